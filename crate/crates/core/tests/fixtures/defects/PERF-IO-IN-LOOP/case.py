def sizes(paths: list) -> list:
    """Read every file."""
    result = []
    for path in paths:
        with open(path) as handle:
            result.append(len(handle.read()))
    return result
