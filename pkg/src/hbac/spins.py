"""Spin-system configuration and closed-form gate action on product-state biases.

A bias vector is a sequence of length ``n`` where entry ``i - 1`` holds the bias
of spin ``i`` (spin 1 is the least significant bit, spin ``n`` the MSB).  A bias
is ``P(0) - P(1)``.  All gate functions return a new list and accept either
floats or :class:`fractions.Fraction` values, so ideal linear-regime runs stay
exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from hbac.engine import TimingParams


class ConfigurationError(ValueError):
    """Raised for invalid spin indices, gate placements or system parameters."""


@dataclass(frozen=True)
class SpinSystem:
    n: int
    reset_spins: frozenset = field(default_factory=lambda: frozenset({1}))
    eps0: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "reset_spins", frozenset(self.reset_spins))
        if self.n < 1:
            raise ConfigurationError(f"spin count must be positive, got {self.n}")
        if not 1 <= len(self.reset_spins) <= 2:
            raise ConfigurationError("one or two reset spins are supported")
        if self.reset_spins != frozenset(range(1, len(self.reset_spins) + 1)):
            raise ConfigurationError(
                f"reset spins must be the lowest indices, got {sorted(self.reset_spins)}"
            )
        if len(self.reset_spins) > self.n:
            raise ConfigurationError("more reset spins than spins")
        if not 0.0 < self.eps0 < 1.0:
            raise ConfigurationError(f"eps0 must lie in (0, 1), got {self.eps0}")

    def is_reset(self, spin: int) -> bool:
        return spin in self.reset_spins

    @property
    def computation_spins(self) -> list[int]:
        return [i for i in range(1, self.n + 1) if i not in self.reset_spins]


def _check_index(state: Sequence, *spins: int) -> None:
    n = len(state)
    for s in spins:
        if not 1 <= s <= n:
            raise ConfigurationError(f"spin index {s} out of range 1..{n}")


def pt(state: Sequence, src: int, dst: int) -> list:
    """Polarization transfer ``src -> dst``, realized as a full SWAP."""
    _check_index(state, src, dst)
    if src == dst:
        raise ConfigurationError("PT needs two distinct spins")
    out = list(state)
    out[src - 1], out[dst - 1] = out[dst - 1], out[src - 1]
    return out


def compress2(state: Sequence, k: int) -> list:
    """2BC(k): |10> <-> |01> on spins k, k-1, which is a SWAP."""
    if k < 2:
        raise ConfigurationError(f"2BC needs k >= 2, got {k}")
    return pt(state, k - 1, k)


def compress3(state: Sequence, k: int, linear: bool = False) -> list:
    """3BC(k): exchange |100> <-> |011> on spins (k, k-1, k-2).

    Exact product-state marginals (c = spin k, b = k-1, a = k-2)::

        c' = (a + b + c - abc) / 2
        b' = (b - a + c + abc) / 2
        a' = (a - b + c + abc) / 2

    With ``linear=True`` the cubic term is dropped (the eps << 1 regime).
    """
    if k < 3:
        raise ConfigurationError(f"3BC needs k >= 3, got {k}")
    _check_index(state, k)
    c, b, a = state[k - 1], state[k - 2], state[k - 3]
    abc = 0 if linear else a * b * c
    out = list(state)
    out[k - 1] = (a + b + c - abc) / 2
    out[k - 2] = (b - a + c + abc) / 2
    out[k - 3] = (a - b + c + abc) / 2
    return out


def compress4(state: Sequence, k: int, linear: bool = False) -> list:
    """4BC(k): exchange |1000> <-> |0111> on spins k..k-3.

    With d the MSB of the quad and s1, s2, s3 the elementary symmetric
    polynomials of the three lower biases, the MSB gains
    ``delta = (s1 + s3 - d - d*s2) / 4`` and every lower bit loses it.
    Linear regime: ``d' = (3d + s1) / 4``.
    """
    if k < 4:
        raise ConfigurationError(f"4BC needs k >= 4, got {k}")
    _check_index(state, k)
    d = state[k - 1]
    c, b, a = state[k - 2], state[k - 3], state[k - 4]
    s1 = a + b + c
    if linear:
        delta = (s1 - d) / 4
    else:
        s2 = a * b + b * c + c * a
        s3 = a * b * c
        delta = (s1 + s3 - d - d * s2) / 4
    out = list(state)
    out[k - 1] = d + delta
    for i in (k - 2, k - 3, k - 4):
        out[i] = state[i] - delta
    return out


def compress(state: Sequence, k: int, width: int, linear: bool = False) -> list:
    """Width-``width`` compression |10...0> <-> |01...1> with MSB at spin ``k``."""
    if width == 2:
        return compress2(state, k)
    if width == 3:
        return compress3(state, k, linear)
    if width == 4:
        return compress4(state, k, linear)
    if width < 2 or k - width + 1 < 1:
        raise ConfigurationError(f"{width}-bit compression cannot sit at spin {k}")
    _check_index(state, k)
    msb = state[k - 1]
    lower = [state[i - 1] for i in range(k - 1, k - width, -1)]
    if linear:
        delta = (sum(lower) - msb) / 2 ** (width - 2)
    else:
        # tot, dif = prod(1+x) + prod(1-x), prod(1+x) - prod(1-x), free of cancellation
        tot, dif = 2, 0
        for x in lower:
            tot, dif = tot + x * dif, dif + x * tot
        delta = (dif - msb * tot) / 2 ** (width - 1)
    out = list(state)
    out[k - 1] = msb + delta
    for i in range(k - 1, k - width, -1):
        out[i - 1] = state[i - 1] - delta
    return out


def relax_factor(duration: float, tau: float) -> float:
    """``exp(-duration / tau)`` with the infinite limits resolved exactly."""
    if duration < 0:
        raise ValueError(f"negative duration {duration}")
    if math.isinf(tau):
        return 1.0
    if math.isinf(duration):
        return 0.0
    return math.exp(-duration / tau)


def relax(state: Sequence, duration: float, timing: "TimingParams", system: SpinSystem) -> list:
    """Free T1 relaxation of every spin toward ``system.eps0`` for ``duration``.

    Time is measured in units of T1 of the reset spin, so reset spins decay by
    ``exp(-duration)`` and computation spins by ``exp(-duration / R)``.
    """
    eps0 = system.eps0
    f_reset = relax_factor(duration, 1.0)
    f_comp = relax_factor(duration, timing.R)
    out = []
    for i, x in enumerate(state, start=1):
        f = f_reset if system.is_reset(i) else f_comp
        out.append((x - eps0) * f + eps0)
    return out
