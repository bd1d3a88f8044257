import threading

guard = threading.Lock()


def update(items: list, value: int) -> None:
    """Append under the lock."""
    guard.acquire()
    if value < 0:
        return None
    items.append(value)
    guard.release()
