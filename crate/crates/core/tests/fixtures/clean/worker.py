"""A lock-protected counter."""

import threading


class Counter:
    """Thread-safe counter."""

    def __init__(self) -> None:
        """Start at zero."""
        self._lock = threading.Lock()
        self._value = 0

    def increment(self, step: int = 1) -> int:
        """Add `step` and return the new value."""
        with self._lock:
            self._value += step
            return self._value

    def reset(self) -> None:
        """Set the counter back to zero."""
        self._lock.acquire()
        try:
            self._value = 0
        finally:
            self._lock.release()
