"""Pure-Python TSR kernels.

Registers are packed into an int: bit ``k`` holds the status recorded
``k`` wake-ups ago, so bit 0 is the most recent entry.
"""


def half_counts(mask, start, n):
    """Return ``(n0, n1, nc0, nc1)`` for the ``n`` bits starting at ``start``."""
    full = (1 << n) - 1
    seg = (mask >> start) & full
    inv = ~seg & full
    n1 = seg.bit_count()
    # adjacent pairs stay inside the segment: the shifted copy has no bit n-1
    nc1 = (seg & (seg >> 1)).bit_count()
    nc0 = (inv & (inv >> 1)).bit_count()
    return n - n1, n1, nc0, nc1


def weighted(mask, start, half):
    n0, n1, nc0, nc1 = half_counts(mask, start, half)
    return (n0 * nc0 - n1 * nc1) / half


def update_factor(mask, length, alpha):
    half = length // 2
    x1 = weighted(mask, 0, half)
    x2 = weighted(mask, half, half)
    return alpha * x1 + (1.0 - alpha) * x2
