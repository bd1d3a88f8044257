def half(x: int) -> int:
    """Half of x."""
    return x // 2
