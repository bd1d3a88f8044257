def walk(grid: list) -> int:
    """Count positive cells."""
    count = 0
    for row in grid:
        for cell in row:
            if cell:
                for part in cell:
                    if part > 0:
                        count += 1
    return count
