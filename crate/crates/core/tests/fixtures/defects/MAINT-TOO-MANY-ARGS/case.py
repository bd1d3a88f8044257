def combine(a: int, b: int, c: int, d: int, e: int, f: int) -> int:
    """Add six numbers."""
    return a + b + c + d + e + f
