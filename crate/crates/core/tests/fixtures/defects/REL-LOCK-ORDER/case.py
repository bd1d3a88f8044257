import threading

first = threading.Lock()
second = threading.Lock()


def forward() -> None:
    """Take both locks."""
    with first:
        with second:
            pass


def backward() -> None:
    """Take both locks in the other order."""
    with second:
        with first:
            pass
