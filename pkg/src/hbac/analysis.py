"""Closed-form bounds, bonacci goals and the AC vs multiscan-PT comparator."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

LN4 = math.log(4.0)

# proton -> carbon polarization ratio, applied to both AC and signal averaging
PROTON_CARBON_MULTIPLIER = 4.0


def kbonacci_sequence(order: int, length: int) -> list[int]:
    """``s_1 = s_2 = 1``, then each term sums the previous ``order`` terms.

    order 2 gives 1, 1, 2, 3, 5, ...; order 3 gives 1, 1, 2, 4, 7, 13, ...
    """
    seq: list[int] = []
    for k in range(length):
        if k < 2:
            seq.append(1)
        else:
            seq.append(sum(seq[max(0, k - order):k]))
    return seq


def fibonacci_number(k: int) -> int:
    return kbonacci_sequence(2, k)[k - 1]


def tribonacci_number(k: int) -> int:
    return kbonacci_sequence(3, k)[k - 1]


def kbonacci_goal(n: int, k: int, delta, order: int = 2):
    """Target bias of bit ``k`` (units of eps0): ``s_k (1 - delta^(n-k+1))``.

    Exact when ``delta`` is a Fraction or int.
    """
    if not 1 <= k <= n:
        raise ValueError(f"bit {k} outside 1..{n}")
    if isinstance(delta, float):
        delta = Fraction(delta)
    s_k = kbonacci_sequence(order, k)[k - 1]
    return s_k * (1 - delta ** (n - k + 1))


def fibonacci_goal(n: int, k: int, delta):
    return kbonacci_goal(n, k, delta, 2)


def tribonacci_goal(n: int, k: int, delta):
    return kbonacci_goal(n, k, delta, 3)


def goal_profile(n: int, delta, order: int = 2) -> list:
    """Goals for bits n..1, MSB first (the order used for printed states)."""
    return [kbonacci_goal(n, k, delta, order) for k in range(n, 0, -1)]


def ideal_mpac_factor(m: int, j: int) -> float:
    """Ideal MSB cooling factor ``(2 - 2^-m)^j`` of mPAC on ``2j + 1`` spins."""
    return (2.0 - 2.0 ** -m) ** j


def lower_bound_resets(k: float) -> float:
    """Entropy lower bound on reset steps needed to cool one spin by factor ``k``."""
    return k * k


def info_content(eps: float) -> float:
    """Leading-order information (bits) removed by one reset of a spin to bias ``eps``."""
    return eps * eps / LN4


def entropy_deficit(k: float, eps: float) -> float:
    """Minimal entropy (bits) to remove when cooling one spin to ``k * eps``."""
    return k * k * eps * eps / LN4


def binary_entropy(eps: float) -> float:
    """Shannon entropy (bits) of one spin with bias ``eps``."""
    h = 0.0
    for p in ((1 + eps) / 2, (1 - eps) / 2):
        if p > 0:
            h -= p * math.log2(p)
    return h


@dataclass
class BoundReport:
    k: float
    lower_bound_resets: float
    actual_resets: int
    satisfied: bool

    def to_dict(self) -> dict:
        return asdict(self)


def check_reset_bound(cooling_factor: float, actual_resets: int) -> BoundReport:
    bound = lower_bound_resets(cooling_factor)
    # float noise on an exact square must not flip the verdict
    need = math.ceil(bound - 1e-9)
    return BoundReport(cooling_factor, bound, actual_resets, actual_resets >= need)


def multiscan_snr(n_scans: int, reset_multiplier: float = 1.0) -> float:
    """SNR gain of averaging ``n_scans`` PT scans from a reset spin."""
    if n_scans < 1:
        raise ValueError(f"need at least one scan, got {n_scans}")
    return reset_multiplier * math.sqrt(n_scans)


@dataclass
class Comparison:
    ac_factor: float
    multiscan_factor: float
    n_scans: int
    acquisitions_ac: int
    acquisitions_multiscan: int
    reset_multiplier: float
    degenerate: bool
    better: str

    def to_dict(self) -> dict:
        return asdict(self)

    CSV_HEADER = (
        "ac_factor,multiscan_factor,n_scans,acquisitions_ac,"
        "acquisitions_multiscan,reset_multiplier,degenerate,better"
    )

    def csv_row(self) -> str:
        d = self.to_dict()
        return ",".join(str(d[c]) for c in self.CSV_HEADER.split(","))


def compare_ac_multiscan(report, reset_multiplier: float = 1.0, n_scans: int | None = None) -> Comparison:
    """Compare an AC run with multiscan-PT using the same number of reset steps.

    Acquisition counts stand in for SAR: AC acquires once, multiscan once per scan.
    """
    scans = report.n_resets if n_scans is None else n_scans
    ac = reset_multiplier * report.cooling_factor
    if scans < 1:
        return Comparison(ac, 0.0, 0, 1, 0, reset_multiplier, True, "undefined")
    ms = multiscan_snr(scans, reset_multiplier)
    better = "ac" if ac > ms else "multiscan" if ms > ac else "tie"
    return Comparison(ac, ms, scans, 1, scans, reset_multiplier, False, better)
