"""Independent reference implementations shared by the test modules."""


def literal_next_support(n: int, gap: int) -> set:
    """Occupied set after inserting a mutant at ``gap`` into an n-indexed sequence.

    Old traits are labelled by their old index, the mutant by "m".  Built
    directly from the explicit case list for the jump chain, without the
    parity shortcut.
    """
    if n % 2 == 0:
        l = n // 2
        if gap % 2 == 1:  # x_{2j} < m < x_{2j+1}, j = (gap - 1) / 2; j = l means above all
            j = (gap - 1) // 2
            return {2 * i - 1 for i in range(1, j + 1)} | {"m"} | {2 * i for i in range(j + 1, l + 1)}
        j = gap // 2  # x_{2j-1} < m < x_{2j}; j = 0 means below all
        return {2 * i - 1 for i in range(1, j + 1)} | {2 * i for i in range(j, l + 1)}
    l = (n - 1) // 2
    if gap % 2 == 0:  # x_{2j-1} < m < x_{2j}, j = gap / 2; j = l + 1 above all, j = 0 below all
        j = gap // 2
        return {2 * (i - 1) for i in range(1, j + 1)} | {"m"} | {2 * i - 1 for i in range(j + 1, l + 2)}
    j = (gap + 1) // 2  # x_{2j-2} < m < x_{2j-1}
    return {2 * (i - 1) for i in range(1, j + 1)} | {2 * i - 1 for i in range(j, l + 2)}
