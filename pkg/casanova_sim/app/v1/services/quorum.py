from casanova_sim.app.core.base.errors import FaultBoundError


def check_fault_bound(n: int, f: int):
    """Raises FaultBoundError unless N >= 3f + 1 and f >= 0"""

    if f < 0 or n < 1:
        raise FaultBoundError(f"Invalid validator count N={n}, f={f}")
    if n < 3 * f + 1:
        raise FaultBoundError(f"N={n} validators cannot tolerate f={f} faults (N must be >= 3f + 1)")


def quorum_sizes(n: int, f: int, strict: bool = True) -> tuple[int, int]:
    """Non-Faulty Majority and Fault Tolerant Majority for N validators, f faults

    NFM = ceil((N - f + 1) / 2) and FTM = ceil((N + f + 1) / 2) = NFM + f.

    Args:
        - n: number of validators
        - f: number of tolerated Byzantine validators
        - strict: reject N < 3f + 1; callers exploring exceeded bounds pass False

    Returns:
        tuple: (NFM, FTM)
    """

    if strict:
        check_fault_bound(n, f)
    elif f < 0 or n < 1:
        raise FaultBoundError(f"Invalid validator count N={n}, f={f}")

    nfm = (n - f + 2) // 2
    ftm = (n + f + 2) // 2
    return nfm, ftm
