"""Command-line front end: ``hbac {run,sweep,verify,compare}``.

Exit codes: 0 success, 1 verification mismatch, 2 configuration error,
3 backend-capability error.  Any option may also come from a JSON file given
with ``--config``; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

from hbac import analysis, golden, oracle, programs
from hbac.engine import BackendError, EngineConfig, TimingParams, execute, parse_time
from hbac.spins import ConfigurationError, SpinSystem

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_BACKEND = 0, 1, 2, 3

WORKERS_ENV = "HBAC_WORKERS"

COMMON_DEFAULTS = {
    "algo": "mpac-all",
    "n": 7,
    "m": 2,
    "m_table": None,
    "delta": None,
    "R": "inf",
    "d": "inf",
    "eps0": 1e-5,
    "mode": "exact",
    "reset_model": "paper",
    "reset_spins": None,
    "init": "equilibrium",
    "residue": None,
    "absolute": False,
    "out": None,
}

DEFAULTS = {
    "run": dict(COMMON_DEFAULTS, backend="bias", full_correlations=False, iterations=100, trajectory_csv=None),
    "sweep": dict(
        COMMON_DEFAULTS,
        n="3,5,7,9,11,13,15,17,19,21",
        R="1e2,1e3,1e4,1e5,1e6,1e7,inf",
        d="5",
        workers=None,
    ),
    "verify": {},
    "compare": dict(COMMON_DEFAULTS, multiscan=False, resets=None, multiplier=1.0),
}


class CLIError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON file supplying any option")
    p.add_argument("--algo", choices=programs.ALGORITHMS, default=S)
    p.add_argument("--m", type=int, default=S, help="compressions per level (mPAC) or constant m[n,k]")
    p.add_argument("--m-table", dest="m_table", default=S, help='per-level counts, e.g. "3:2,4:3" or JSON')
    p.add_argument("--delta", default=S, help="goal parameter in (0,1), e.g. 0.5 or 1/2")
    p.add_argument("--eps0", type=float, default=S)
    p.add_argument("--mode", choices=("exact", "linear"), default=S)
    p.add_argument("--reset-model", dest="reset_model", choices=("paper", "paper_simplified", "general"), default=S)
    p.add_argument("--reset-spins", dest="reset_spins", type=int, choices=(1, 2), default=S)
    p.add_argument("--init", choices=("equilibrium", "mixed"), default=S)
    p.add_argument("--residue", choices=("marginal", "mixed"), default=S,
                   help="bookkeeping of the non-target spins after a compression")
    p.add_argument("--absolute", action="store_true", default=S, help="report absolute biases")
    p.add_argument("--out", default=S, help="output file (stdout if omitted)")


def make_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="hbac", description="Heat-bath algorithmic cooling simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one algorithm and write a JSON report")
    _add_common(run)
    run.add_argument("--n", type=int, default=S)
    run.add_argument("--R", default=S, help='T1(comp)/T1(reset), or "inf"')
    run.add_argument("--d", default=S, help='T_WAIT/T1(reset), or "inf"')
    run.add_argument("--backend", choices=("bias", "oracle"), default=S)
    run.add_argument("--full-correlations", dest="full_correlations", action="store_true", default=S,
                     help="oracle: keep reset-spin correlations (no extended-Markov step)")
    run.add_argument("--iterations", type=int, default=S, help="ppa iterations")
    run.add_argument("--trajectory-csv", dest="trajectory_csv", default=S)

    sweep = sub.add_parser("sweep", help="grid of n x R, max achievable MSB bias per cell (CSV)")
    _add_common(sweep)
    sweep.add_argument("--n", default=S, help='comma list or "lo:hi" (odd values)')
    sweep.add_argument("--R", default=S, help="comma list; inf allowed")
    sweep.add_argument("--d", default=S)
    sweep.add_argument("--workers", type=int, default=S, help=f"pool size (default ${WORKERS_ENV} or CPU count)")

    sub.add_parser("verify", help="run the golden checks and print a pass/fail table")

    cmp_ = sub.add_parser("compare", help="bias engine vs oracle, or AC vs multiscan-PT (JSON)")
    _add_common(cmp_)
    cmp_.add_argument("--n", type=int, default=S)
    cmp_.add_argument("--R", default=S)
    cmp_.add_argument("--d", default=S)
    cmp_.add_argument("--multiscan", action="store_true", default=S)
    cmp_.add_argument("--resets", type=int, default=S, help="multiscan scan count (default: AC reset count)")
    cmp_.add_argument("--multiplier", type=float, default=S, help="reset-spin polarization multiplier (4 for 1H->13C)")
    return parser


def _options(ns: argparse.Namespace) -> dict:
    given = vars(ns).copy()
    command = given.pop("command")
    opts = dict(DEFAULTS[command])
    config = given.pop("config", None)
    if config:
        try:
            with open(config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CLIError(f"cannot read config {config}: {exc}", EXIT_CONFIG)
        opts.update({k.replace("-", "_"): v for k, v in data.items()})
    opts.update(given)
    opts["command"] = command
    return opts


def _parse_delta(value):
    if value is None:
        return None
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise CLIError(f"bad delta {value!r}", EXIT_CONFIG)


def _parse_m_table(value):
    if value is None or isinstance(value, dict):
        return {int(k): int(v) for k, v in value.items()} if value else None
    text = str(value).strip()
    try:
        if text.startswith("{"):
            return {int(k): int(v) for k, v in json.loads(text).items()}
        table = {}
        for part in text.split(","):
            k, v = part.split(":")
            table[int(k)] = int(v)
        return table
    except (ValueError, json.JSONDecodeError):
        raise CLIError(f"bad m-table {value!r}", EXIT_CONFIG)


def _reset_model(name: str) -> str:
    return "paper_simplified" if name == "paper" else name


def _system(opts: dict, n: int) -> SpinSystem:
    resets = opts["reset_spins"]
    if resets is None:
        bonacci = opts["algo"] in ("fib", "delta-fib", "trib", "delta-trib", "new-fib", "new-trib")
        resets = 2 if bonacci else 1
    return SpinSystem(n, frozenset(range(1, int(resets) + 1)), float(opts["eps0"]))


def _config(opts: dict) -> EngineConfig:
    residue = opts["residue"]
    if residue is None:
        residue = "mixed" if opts["mode"] == "linear" else "marginal"
    return EngineConfig(mode=opts["mode"], reset_model=_reset_model(opts["reset_model"]), residue=residue)


def _program(opts: dict, n: int, system: SpinSystem):
    return programs.build(
        opts["algo"],
        n,
        m=int(opts["m"]),
        m_table=_parse_m_table(opts["m_table"]),
        delta=_parse_delta(opts["delta"]),
        reset_config=len(system.reset_spins),
    )


def _emit(text: str, path) -> None:
    if path:
        _atomic_write(path, text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _atomic_write(path: str, text: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".hbac-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _json_safe(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


# ---------------------------------------------------------------- commands


def cmd_run(opts: dict) -> int:
    n = int(opts["n"])
    system = _system(opts, n)
    timing = TimingParams(opts["R"], opts["d"])
    if opts["algo"] == "ppa":
        if opts["backend"] != "oracle":
            raise CLIError("ppa needs --backend oracle", EXIT_BACKEND)
        result = oracle.run_ppa(system, timing, int(opts["iterations"]), initial=opts["init"])
        scale = system.eps0 if opts["absolute"] else 1.0
        report = {
            "program": {"name": "ppa", "n": n, "parameters": {"iterations": result.iterations}},
            "timing": timing.to_dict(),
            "eps0": system.eps0,
            "units": "absolute" if opts["absolute"] else "eps0",
            "final_biases": [b / system.eps0 * scale for b in oracle.marginals(result.state)],
            "n_resets": result.iterations,
            "cooling_factor": result.msb_trajectory[-1],
            "asymptote": 2.0 ** (n - 2),
            "msb_trajectory": result.msb_trajectory,
            "entropy_ledger": result.ledger.to_dict(),
        }
        _emit(_dumps(_json_safe(report)), opts["out"])
        return EXIT_OK

    p = _program(opts, n, system)
    cfg = _config(opts)
    if opts["trajectory_csv"]:
        cfg = EngineConfig(cfg.mode, cfg.reset_model, "wait", cfg.residue)
    if opts["backend"] == "oracle":
        report = oracle.execute_oracle(p, system, timing, not opts["full_correlations"], cfg, initial=opts["init"])
    else:
        report = execute(p, system, timing, cfg, initial=opts["init"])
    if opts["trajectory_csv"] and report.trajectory is not None:
        _atomic_write(opts["trajectory_csv"], report.trajectory_csv())
    _emit(report.to_json(bool(opts["absolute"])), opts["out"])
    return EXIT_OK


def _int_list(text) -> list[int]:
    if isinstance(text, list):
        return [int(x) for x in text]
    text = str(text)
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi) + 1, 2))
    return [int(x) for x in text.split(",") if x.strip()]


def _time_list(text) -> list[float]:
    if isinstance(text, list):
        return [parse_time(x) for x in text]
    return [parse_time(x) for x in str(text).split(",") if x.strip()]


SWEEP_HEADER = "n,R,max_bias_over_eps0,resets_at_max,t_run"


def sweep_rows(opts: dict) -> list[str]:
    ns = _int_list(opts["n"])
    Rs = _time_list(opts["R"])
    if not ns or not Rs:
        raise CLIError("empty sweep grid", EXIT_CONFIG)
    d = parse_time(opts["d"])
    cfg = _config(opts)
    cells = [(n, R) for n in ns for R in Rs]
    built: dict = {}
    for n in ns:
        system = _system(opts, n)
        built[n] = (system, _program(opts, n, system))
        built[n][1].count_instructions()

    def cell(args):
        n, R = args
        system, p = built[n]
        report = execute(p, system, TimingParams(R, d), cfg, initial=opts["init"])
        return n, R, report

    workers = opts.get("workers") or int(os.environ.get(WORKERS_ENV, 0) or 0) or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        results = list(pool.map(cell, cells))
    rows = []
    for n, R, report in results:
        r_text = "inf" if math.isinf(R) else repr(R)
        t_text = "inf" if math.isinf(report.t_run) else repr(report.t_run)
        rows.append(f"{n},{r_text},{report.cooling_factor!r},{report.n_resets},{t_text}")
    return rows


def cmd_sweep(opts: dict) -> int:
    rows = sweep_rows(opts)
    _emit(SWEEP_HEADER + "\n" + "\n".join(rows) + "\n", opts["out"])
    return EXIT_OK


def cmd_verify(opts: dict) -> int:
    checks = golden.run_all()
    for c in checks:
        print(c.row())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_MISMATCH


def cmd_compare(opts: dict) -> int:
    n = int(opts["n"])
    system = _system(opts, n)
    timing = TimingParams(opts["R"], opts["d"])
    cfg = _config(opts)
    if opts["multiscan"]:
        p = _program(opts, n, system)
        report = execute(p, system, timing, cfg, initial=opts["init"])
        comp = analysis.compare_ac_multiscan(report, float(opts["multiplier"]), opts["resets"])
        out = {"ac": comp.ac_factor, "multiscan": comp.multiscan_factor, "record": comp.to_dict()}
        _emit(_dumps(_json_safe(out)), opts["out"])
        return EXIT_OK
    if n > oracle.MAX_SPINS:
        raise CLIError(f"n={n} exceeds the oracle cap of {oracle.MAX_SPINS}", EXIT_BACKEND)
    if n == 1:
        p = programs.empty_program(1)
    else:
        p = _program(opts, n, system)
    bias = execute(p, system, timing, cfg, initial=opts["init"])
    out = {"program": p.to_dict(), "timing": timing.to_dict(), "bias_engine": bias.final_in_eps0()}
    for label, ext in (("extended_markov", True), ("full_correlations", False)):
        orc = oracle.execute_oracle(p, system, timing, ext, cfg, initial=opts["init"])
        diffs = [abs(a - b) for a, b in zip(bias.final_in_eps0(), orc.final_in_eps0())]
        rel = [dv / abs(b) if b else dv for dv, b in zip(diffs, orc.final_in_eps0())]
        out[label] = {
            "final_biases": orc.final_in_eps0(),
            "max_abs_diff": max(diffs),
            "max_rel_diff": max(rel),
        }
    _emit(_dumps(_json_safe(out)), opts["out"])
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = make_parser()
    ns = parser.parse_args(argv)
    try:
        opts = _options(ns)
        return COMMANDS[opts["command"]](opts)
    except CLIError as exc:
        print(f"hbac: {exc}", file=sys.stderr)
        return exc.code
    except BackendError as exc:
        print(f"hbac: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ConfigurationError, ValueError) as exc:
        print(f"hbac: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
