def computeArea(width: float, height: float) -> float:
    """Rectangle area."""
    return width * height
