"""Bias engine: runs programs on product-state bias vectors under finite T1.

Model (extended-Markovian): every WAIT lasts ``d`` units of T1(reset); reset
spins relax by ``exp(-d)`` (or, in the ``paper_simplified`` reset model, are set
to ``(1 - exp(-d)) * eps0`` outright) and computation spins by ``exp(-d / R)``.
Gates take no time.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from hbac import programs
from hbac.programs import Instruction, Program, apply_unitary
from hbac.spins import ConfigurationError, SpinSystem, relax_factor

# below this many instructions the Python interpreter is faster than JIT start-up
KERNEL_THRESHOLD = 200_000

LINEAR_REGIME_LIMIT = 0.01


class BackendError(RuntimeError):
    """The requested operation is not supported by this backend."""


def parse_time(value) -> float:
    """Accept numbers or the literal ``"inf"``."""
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "∞"):
        return math.inf
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"not a time value: {value!r}") from None
    if math.isnan(out):
        raise ConfigurationError("time value is NaN")
    return out


@dataclass(frozen=True)
class TimingParams:
    """Dimensionless clock, all times in units of T1 of the reset spin.

    ``R = T1(comp) / T1(reset)`` and ``d = T_WAIT / T1(reset)``; either may be
    ``math.inf``.
    """

    R: float = math.inf
    d: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "R", parse_time(self.R))
        object.__setattr__(self, "d", parse_time(self.d))
        if not self.R > 0 or not self.d > 0:
            raise ConfigurationError(f"R and d must be positive, got R={self.R}, d={self.d}")

    @classmethod
    def ideal(cls) -> "TimingParams":
        return cls(math.inf, math.inf)

    @property
    def is_ideal(self) -> bool:
        return math.isinf(self.R) and math.isinf(self.d)

    @property
    def Q(self) -> float:
        """T1(comp) / T_WAIT."""
        if math.isinf(self.R):
            return math.inf
        return self.R / self.d

    def D(self, n_resets: int) -> float:
        """T1(comp) / T_run."""
        if n_resets == 0:
            return math.inf
        return self.Q / n_resets

    def t_run(self, n_resets: int) -> float:
        return self.d * n_resets if n_resets else 0.0

    @property
    def comp_decay(self) -> float:
        return relax_factor(self.d, self.R)

    @property
    def reset_decay(self) -> float:
        return relax_factor(self.d, 1.0)

    def to_dict(self) -> dict:
        return {"R": _num(self.R), "d": _num(self.d), "Q": _num(self.Q)}


@dataclass(frozen=True)
class EngineConfig:
    mode: str = "exact"
    reset_model: str = "paper_simplified"
    trajectory: str = "off"
    residue: str = "marginal"

    def __post_init__(self):
        if self.mode not in ("exact", "linear"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.reset_model not in ("paper_simplified", "general"):
            raise ConfigurationError(f"unknown reset model {self.reset_model!r}")
        if self.trajectory not in ("off", "wait", "all"):
            raise ConfigurationError(f"unknown trajectory setting {self.trajectory!r}")
        if self.residue not in ("marginal", "mixed"):
            raise ConfigurationError(f"unknown residue convention {self.residue!r}")


@dataclass
class RunReport:
    """Outcome of one run.  ``final`` lists spin 1 first; in linear mode the
    biases are in units of eps0, in exact mode they are absolute."""

    final: list
    n_resets: int
    t_run: float
    cooling_factor: float
    peak_factor: float
    resets_at_peak: int
    n_instructions: int
    eps0: float
    mode: str
    program: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    trajectory: list | None = None
    ledger: object | None = None

    def final_in_eps0(self) -> list:
        if self.mode == "linear":
            return list(self.final)
        return [x / self.eps0 for x in self.final]

    def msb_first(self) -> list:
        return list(reversed(self.final_in_eps0()))

    def to_dict(self, absolute: bool = False) -> dict:
        biases = self.final_in_eps0()
        if absolute:
            biases = [x * self.eps0 for x in biases]
        out = {
            "program": self.program,
            "timing": self.timing,
            "mode": self.mode,
            "eps0": self.eps0,
            "units": "absolute" if absolute else "eps0",
            "final_biases": [_num(x) for x in biases],
            "n_resets": self.n_resets,
            "n_instructions": self.n_instructions,
            "t_run": _num(self.t_run),
            "cooling_factor": _num(self.cooling_factor),
            "peak_factor": _num(self.peak_factor),
            "resets_at_peak": self.resets_at_peak,
        }
        if self.ledger is not None:
            out["entropy_ledger"] = self.ledger.to_dict()
        return out

    def to_json(self, absolute: bool = False) -> str:
        return json.dumps(self.to_dict(absolute), indent=2, sort_keys=True)

    def trajectory_csv(self) -> str:
        if self.trajectory is None:
            raise ValueError("run was executed without trajectory logging")
        n = len(self.final)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "instr"] + [f"spin_{i}" for i in range(1, n + 1)])
        for step, instr, biases in self.trajectory:
            w.writerow([step, instr] + [repr(float(x)) for x in biases])
        return buf.getvalue()


def _num(x):
    if isinstance(x, Fraction):
        x = float(x)
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def initial_state(sys: SpinSystem, mode: str, initial=None) -> list:
    """``None``/"equilibrium" -> every spin at eps0; "mixed" -> all zero."""
    eq = Fraction(1) if mode == "linear" else sys.eps0
    if initial is None or initial == "equilibrium":
        return [eq] * sys.n
    if initial == "mixed":
        return [0 * eq] * sys.n
    state = list(initial)
    if len(state) != sys.n:
        raise ConfigurationError(f"initial state has {len(state)} spins, system has {sys.n}")
    return state


def _check(p: Program, sys: SpinSystem) -> None:
    if p.n != sys.n:
        raise ConfigurationError(f"program is for {p.n} spins, system has {sys.n}")
    if p.name == "ppa":
        raise BackendError("the partner-pairing algorithm runs on the oracle backend only")


def _python_run(p, sys, t, cfg, state, linear, max_resets):
    n = sys.n
    eq = Fraction(1) if linear else sys.eps0
    exact_types = linear and t.is_ideal
    if not exact_types:
        state = [float(x) for x in state]
        eq = float(eq)
    fc = t.comp_decay
    fr = t.reset_decay
    resets = sorted(sys.reset_spins)
    comps = sys.computation_spins
    simplified = cfg.reset_model == "paper_simplified"
    reset_value = eq * (1 - fr) if fr != 0 else eq

    traj = [] if cfg.trajectory != "off" else None
    if traj is not None:
        traj.append((0, "INIT", tuple(state)))
    n_resets = n_instr = 0
    peak, at_peak = state[n - 1], 0
    max_abs = max(abs(x) for x in state)
    for instr in p:
        n_instr += 1
        if instr.op == "WAIT":
            if fc != 1.0:
                for s in comps:
                    state[s - 1] = (state[s - 1] - eq) * fc + eq
            for s in resets:
                if simplified or fr == 0:
                    state[s - 1] = reset_value
                else:
                    state[s - 1] = (state[s - 1] - eq) * fr + eq
            n_resets += 1
        elif instr.op == "SORT":
            raise BackendError("SORT needs the full-distribution oracle backend")
        else:
            state = apply_unitary(state, instr, linear, cfg.residue)
            max_abs = max(max_abs, *(abs(state[s - 1]) for s in instr.spins()))
        if state[n - 1] > peak:
            peak, at_peak = state[n - 1], n_resets
        if traj is not None and (cfg.trajectory == "all" or instr.op == "WAIT"):
            traj.append((n_instr, str(instr), tuple(state)))
        if max_resets is not None and n_resets >= max_resets:
            break
    return state, n_resets, n_instr, peak, at_peak, max_abs, traj


def _kernel_run(p, sys, t, cfg, state, linear, max_resets):
    from hbac._kernel import run_program

    compiled = getattr(p, "_compiled", None)
    if compiled is None:
        compiled = p.compile()
        if np.any(compiled[0][:, 0] == programs.OP_SORT):
            raise BackendError("SORT needs the full-distribution oracle backend")
        p._compiled = compiled
    ops, starts, lengths, root = compiled
    n = sys.n
    arr = np.zeros(n + 1)
    arr[1:] = [float(x) for x in state]
    is_reset = np.zeros(n + 1, dtype=np.bool_)
    for s in sys.reset_spins:
        is_reset[s] = True
    eq = 1.0 if linear else sys.eps0
    n_resets, n_instr, peak, at_peak, max_abs = run_program(
        ops, starts, lengths, root, arr, is_reset,
        eq, t.comp_decay, t.reset_decay,
        cfg.reset_model == "paper_simplified", linear, cfg.residue == "mixed",
        -1 if max_resets is None else int(max_resets),
    )
    final = [float(x) for x in arr[1:]]
    return final, int(n_resets), int(n_instr), float(peak), int(at_peak), float(max_abs), None


def execute(
    p: Program,
    sys: SpinSystem,
    t: TimingParams,
    cfg: EngineConfig = EngineConfig(),
    initial=None,
    max_resets: int | None = None,
    backend: str = "auto",
) -> RunReport:
    """Run ``p`` on the bias engine.

    ``backend`` is "python" (reference interpreter, exact Fractions for ideal
    linear runs), "kernel" (compiled, floats) or "auto".  ``max_resets`` stops
    after that many WAITs.
    """
    _check(p, sys)
    linear = cfg.mode == "linear"
    state = initial_state(sys, cfg.mode, initial)
    if backend == "auto":
        use_kernel = (
            cfg.trajectory == "off"
            and not (linear and t.is_ideal)
            and p.count_instructions() > KERNEL_THRESHOLD
        )
        backend = "kernel" if use_kernel else "python"
    if backend == "kernel":
        result = _kernel_run(p, sys, t, cfg, state, linear, max_resets)
    elif backend == "python":
        result = _python_run(p, sys, t, cfg, state, linear, max_resets)
    else:
        raise ConfigurationError(f"unknown backend {backend!r}")
    final, n_resets, n_instr, peak, at_peak, max_abs, traj = result

    unit = 1 if linear else sys.eps0
    if linear and max_abs * sys.eps0 >= LINEAR_REGIME_LIMIT:
        warnings.warn(
            f"bias {float(max_abs) * sys.eps0:.3g} left the eps << 1 regime; linear results are unreliable",
            RuntimeWarning,
            stacklevel=2,
        )
    return RunReport(
        final=final,
        n_resets=n_resets,
        t_run=t.t_run(n_resets),
        cooling_factor=final[-1] / unit,
        peak_factor=peak / unit,
        resets_at_peak=at_peak,
        n_instructions=n_instr,
        eps0=sys.eps0,
        mode=cfg.mode,
        program=p.to_dict(),
        timing=t.to_dict(),
        trajectory=traj,
    )


def execute_linear(
    p: Program,
    sys: SpinSystem,
    t: TimingParams = TimingParams.ideal(),
    initial="mixed",
    residue: str = "mixed",
    trajectory: str = "off",
) -> RunReport:
    """Linear-regime run in units of eps0 (equilibrium = 1).

    Ideal timing keeps every bias an exact Fraction.  Defaults match the worked
    bonacci trajectories: start from the all-zero state and treat the
    non-target spins of a compression as fully mixed afterwards.
    """
    cfg = EngineConfig(mode="linear", reset_model="paper_simplified", trajectory=trajectory, residue=residue)
    return execute(p, sys, t, cfg, initial=initial)


def max_achievable_bias(
    algorithm,
    n: int,
    sys: SpinSystem,
    t: TimingParams,
    cfg: EngineConfig = EngineConfig(),
    budget: int | None = None,
    **params,
) -> tuple:
    """(cooling factor, resets used) that ``algorithm`` leaves on the MSB.

    ``algorithm`` is a builder id (see :func:`hbac.programs.build`) or a
    ``Program``.  The factor is the MSB bias when the program (or the first
    ``budget`` resets of it) has finished; the in-run peak is available via
    :func:`execute` as ``peak_factor``.
    """
    if budget is not None and budget <= 0:
        raise ConfigurationError("budget must be positive")
    p = algorithm if isinstance(algorithm, Program) else programs.build(algorithm, n, **params)
    report = execute(p, sys, t, cfg, max_resets=budget)
    return report.cooling_factor, report.n_resets
