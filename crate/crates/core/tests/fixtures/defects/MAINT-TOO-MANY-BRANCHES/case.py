def score(flag: int) -> int:
    """Accumulate hits."""
    hits = 0
    if flag == 0:
        hits += 0
    else:
        hits -= 1
    if flag == 1:
        hits += 1
    else:
        hits -= 1
    if flag == 2:
        hits += 2
    else:
        hits -= 1
    if flag == 3:
        hits += 3
    else:
        hits -= 1
    if flag == 4:
        hits += 4
    else:
        hits -= 1
    if flag == 5:
        hits += 5
    else:
        hits -= 1
    if flag == 6:
        hits += 6
    else:
        hits -= 1
    return hits
