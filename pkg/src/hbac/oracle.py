"""Exact simulation over the full 2^n diagonal distribution.

Basis index ``b`` carries spin ``i`` in bit ``i - 1``, so spin n is the most
significant bit and ``probs.reshape([2] * n)`` has spin n on axis 0.
Used to validate the bias engine, to run the partner-pairing algorithm (PPA)
and to keep an entropy ledger of every reset.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from hbac.engine import BackendError, EngineConfig, RunReport, TimingParams
from hbac.programs import Instruction, Program
from hbac.spins import ConfigurationError, SpinSystem, relax_factor

MAX_SPINS = 14


@dataclass
class DiagState:
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        size = self.probs.shape[0]
        if size < 2 or size & (size - 1):
            raise ConfigurationError(f"probability vector length {size} is not 2^n")

    @property
    def n(self) -> int:
        return self.probs.shape[0].bit_length() - 1

    @classmethod
    def product(cls, biases: Sequence[float]) -> "DiagState":
        """Product distribution with ``biases[i - 1]`` on spin i."""
        p = np.ones(1)
        for eps in reversed(list(biases)):
            # spin n first so it ends up most significant
            p = np.kron(p, [(1 + eps) / 2, (1 - eps) / 2])
        return cls(p)

    @classmethod
    def mixed(cls, n: int) -> "DiagState":
        return cls(np.full(2**n, 2.0**-n))

    @classmethod
    def equilibrium(cls, n: int, eps0: float) -> "DiagState":
        return cls.product([eps0] * n)

    def tensor(self) -> np.ndarray:
        return self.probs.reshape([2] * self.n)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "prob"])
        for i, p in enumerate(self.probs):
            w.writerow([i, repr(float(p))])
        return buf.getvalue()


def _axis(n: int, spin: int) -> int:
    return n - spin


def _check_size(n: int, cap: int = MAX_SPINS) -> None:
    if n > cap:
        raise BackendError(f"oracle backend is capped at {cap} spins, got {n}")


def apply_permutation(s: DiagState, instr: Instruction) -> DiagState:
    """Apply a basis-state exchange gate (PT, C2, C3, ...) to the distribution."""
    n = s.n
    if instr.op == "PT":
        src, dst = instr.args
        if src == dst or not (1 <= src <= n and 1 <= dst <= n):
            raise ConfigurationError(f"{instr} invalid for n={n}")
        mask = (1 << (src - 1)) | (1 << (dst - 1))
        pattern = 1 << (src - 1)
    elif instr.width:
        k, w = instr.args[0], instr.width
        if not (k <= n and k - w + 1 >= 1):
            raise ConfigurationError(f"{instr} invalid for n={n}")
        mask = ((1 << w) - 1) << (k - w)
        pattern = 1 << (k - 1)
    else:
        raise ConfigurationError(f"{instr} is not a permutation gate")
    idx = np.arange(s.probs.shape[0])
    lo = idx[(idx & mask) == pattern]
    hi = lo ^ mask
    p = s.probs.copy()
    p[lo], p[hi] = s.probs[hi], s.probs[lo]
    return DiagState(p)


def sort_state(s: DiagState) -> DiagState:
    """Largest probability onto |0...0>, then decreasing along basis index.

    Stable on ties (lower basis index first) so degenerate inputs are reproducible.
    """
    order = np.argsort(-s.probs, kind="stable")
    return DiagState(s.probs[order])


def _spin_channel(t: np.ndarray, axis: int, factor: float, eps0: float) -> np.ndarray:
    """Two-outcome T1 map on one axis: bias -> (bias - eps0) * factor + eps0."""
    r = 1.0 - factor
    p_eq = (1 + eps0) / 2
    m = np.array([[1 - r * (1 - p_eq), r * p_eq], [r * (1 - p_eq), 1 - r * p_eq]])
    out = np.tensordot(m, t, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def _replace_spin(t: np.ndarray, axis: int, bias: float) -> np.ndarray:
    """Trace a spin out and put it back uncorrelated with the given bias."""
    rest = t.sum(axis=axis, keepdims=True)
    shape = [1] * t.ndim
    shape[axis] = 2
    return rest * np.array([(1 + bias) / 2, (1 - bias) / 2]).reshape(shape)


def decorrelate(s: DiagState, spins: Iterable[int]) -> DiagState:
    """Replace the joint state by (rest) tensor (each listed spin's marginal)."""
    t = s.tensor()
    for spin in spins:
        ax = _axis(s.n, spin)
        marg = t.sum(axis=tuple(a for a in range(t.ndim) if a != ax))
        t = _replace_spin(t, ax, marg[0] - marg[1])
    return DiagState(t.reshape(-1))


def relax_channel(
    s: DiagState,
    duration: float,
    t: TimingParams,
    sys: SpinSystem,
    extended_markov: bool = False,
    reset_model: str = "general",
) -> DiagState:
    """Independent T1 relaxation of every spin for ``duration`` (units of T1(reset)).

    Reset spins relax with time constant 1 and computation spins with R.  In the
    ``paper_simplified`` reset model each reset spin is instead replaced by an
    uncorrelated spin of bias ``(1 - exp(-duration)) * eps0``.  With
    ``extended_markov`` the reset spins are decorrelated from the rest afterwards.
    """
    if duration < 0:
        raise ValueError(f"negative duration {duration}")
    n = s.n
    tens = s.tensor()
    f_comp = relax_factor(duration, t.R)
    f_reset = relax_factor(duration, 1.0)
    for spin in range(1, n + 1):
        ax = _axis(n, spin)
        if sys.is_reset(spin):
            if reset_model == "paper_simplified":
                tens = _replace_spin(tens, ax, (1 - f_reset) * sys.eps0)
            else:
                tens = _spin_channel(tens, ax, f_reset, sys.eps0)
        elif f_comp != 1.0:
            tens = _spin_channel(tens, ax, f_comp, sys.eps0)
    out = DiagState(tens.reshape(-1))
    if extended_markov:
        out = decorrelate(out, sorted(sys.reset_spins))
    return out


def marginals(s: DiagState) -> list:
    """Bias of every spin, spin 1 first."""
    t = s.tensor()
    n = s.n
    out = []
    for spin in range(1, n + 1):
        ax = _axis(n, spin)
        m = t.sum(axis=tuple(a for a in range(n) if a != ax))
        out.append(float(m[0] - m[1]))
    return out


def entropy(s: DiagState) -> float:
    """Shannon entropy in bits."""
    p = s.probs[s.probs > 0]
    return -math.fsum(p * np.log2(p))


def mutual_information(s: DiagState, spins: Iterable[int]) -> float:
    """Mutual information (bits) between the listed spins and the rest."""
    spins = sorted(set(spins))
    n = s.n
    t = s.tensor()
    axes_a = tuple(_axis(n, x) for x in spins)
    axes_b = tuple(a for a in range(n) if a not in axes_a)
    pa = t.sum(axis=axes_b).reshape(-1) if axes_b else t.reshape(-1)
    pb = t.sum(axis=axes_a).reshape(-1) if axes_a else t.reshape(-1)

    def h(p):
        p = p[p > 0]
        return -math.fsum(p * np.log2(p))

    return h(pa) + h(pb) - entropy(s)


@dataclass
class EntropyLedger:
    h_init: float
    label: str = ""
    deltas: list = field(default_factory=list)
    h_fin: float | None = None

    def record(self, before: float, after: float) -> None:
        self.deltas.append(before - after)
        self.h_fin = after

    @property
    def cumulative(self) -> float:
        return math.fsum(self.deltas)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "h_init": self.h_init,
            "h_fin": self.h_init if self.h_fin is None else self.h_fin,
            "cumulative_delta_h": self.cumulative,
            "per_reset_delta_h": list(self.deltas),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _initial(sys: SpinSystem, initial) -> DiagState:
    if initial is None or initial == "equilibrium":
        return DiagState.equilibrium(sys.n, sys.eps0)
    if initial == "mixed":
        return DiagState.mixed(sys.n)
    if isinstance(initial, DiagState):
        return initial
    return DiagState.product(initial)


def execute_oracle(
    p: Program,
    sys: SpinSystem,
    t: TimingParams,
    extended_markov: bool = True,
    cfg: EngineConfig = EngineConfig(),
    initial=None,
    cap: int = MAX_SPINS,
) -> RunReport:
    """Run a program on the full distribution; SORT is allowed here.

    Gates are exact permutations (``cfg.mode`` and ``cfg.residue`` do not
    apply); ``cfg.reset_model`` selects how WAIT treats reset spins.
    """
    if p.n != sys.n:
        raise ConfigurationError(f"program is for {p.n} spins, system has {sys.n}")
    _check_size(sys.n, cap)
    s = _initial(sys, initial)
    h = entropy(s)
    ledger = EntropyLedger(h, label="initial: " + (initial if isinstance(initial, str) else "equilibrium"))
    n_resets = n_instr = 0
    msb = marginals(s)[-1]
    peak, at_peak = msb, 0
    for instr in p:
        n_instr += 1
        if instr.op == "WAIT":
            s = relax_channel(s, t.d, t, sys, extended_markov, cfg.reset_model)
            h_new = entropy(s)
            ledger.record(h, h_new)
            h = h_new
            n_resets += 1
        elif instr.op == "SORT":
            s = sort_state(s)
        else:
            s = apply_permutation(s, instr)
        msb = float(s.probs[: s.probs.shape[0] // 2].sum() * 2 - 1)
        if msb > peak:
            peak, at_peak = msb, n_resets
    final = marginals(s)
    report = RunReport(
        final=final,
        n_resets=n_resets,
        t_run=t.t_run(n_resets),
        cooling_factor=final[-1] / sys.eps0,
        peak_factor=peak / sys.eps0,
        resets_at_peak=at_peak,
        n_instructions=n_instr,
        eps0=sys.eps0,
        mode="exact",
        program=p.to_dict(),
        timing=t.to_dict(),
        ledger=ledger,
    )
    report.state = s
    return report


@dataclass
class PPAResult:
    state: DiagState
    ledger: EntropyLedger
    msb_trajectory: list

    @property
    def iterations(self) -> int:
        return len(self.msb_trajectory) - 1


def run_ppa(
    sys: SpinSystem,
    t: TimingParams = TimingParams.ideal(),
    iterations: int = 100,
    initial: str = "equilibrium",
    cap: int = MAX_SPINS,
    until: float | None = None,
) -> PPAResult:
    """Partner-pairing algorithm: alternate a full probability SORT and a reset.

    The reset relaxes only the reset spins (for ``t.d``, exactly to eps0 when
    ``d`` is infinite); computation spins are frozen.  ``msb_trajectory[i]`` is
    the MSB bias in units of eps0 after i iterations.  With ``until`` set, stop
    early once the MSB factor reaches it.
    """
    _check_size(sys.n, cap)
    s = _initial(sys, initial)
    h = entropy(s)
    ledger = EntropyLedger(h, label=f"initial: {initial}")
    frozen = TimingParams(math.inf, t.d)
    traj = [marginals(s)[-1] / sys.eps0]
    for _ in range(iterations):
        s = sort_state(s)
        s = relax_channel(s, t.d, frozen, sys)
        h_new = entropy(s)
        ledger.record(h, h_new)
        h = h_new
        traj.append(marginals(s)[-1] / sys.eps0)
        if until is not None and traj[-1] >= until:
            break
    return PPAResult(s, ledger, traj)
