"""Cooling algorithms as lazily generated instruction streams.

Recursive algorithms (mPAC, Fibonacci, k-bonacci with a fixed iteration table)
are stored as a small tree of shared blocks, so a stream of ~10^7 instructions
costs O(n) memory and reset counts are computed by memoized recursion.
State-dependent algorithms (new-k-bonacci, whose gate choice depends on the
current biases) are stored as restartable generator factories.

Every stream is in execution order: the right-to-left operator products used
to define the algorithms are already reversed here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Union

import numpy as np

from hbac import spins
from hbac.analysis import kbonacci_goal
from hbac.spins import ConfigurationError

# opcodes shared with the compiled interpreter
OP_WAIT, OP_SWAP, OP_COMPRESS, OP_CALL, OP_SORT = range(5)


class Instruction(NamedTuple):
    op: str
    args: tuple = ()

    @classmethod
    def wait(cls) -> "Instruction":
        return WAIT

    @classmethod
    def pt(cls, src: int, dst: int) -> "Instruction":
        return cls("PT", (src, dst))

    @classmethod
    def compress(cls, width: int, k: int) -> "Instruction":
        return cls(f"C{width}", (k,))

    @classmethod
    def sort(cls) -> "Instruction":
        return SORT

    @property
    def width(self) -> int:
        """Compression width (2 for C2, ...); 0 for non-compression gates."""
        if self.op.startswith("C"):
            return int(self.op[1:])
        return 0

    def spins(self) -> tuple:
        """Spin indices touched by this gate."""
        if self.op == "PT":
            return self.args
        if self.width:
            k = self.args[0]
            return tuple(range(k, k - self.width, -1))
        return ()

    def __str__(self) -> str:
        if self.op == "PT":
            return f"PT({self.args[0]}->{self.args[1]})"
        if self.args:
            return f"{self.op}({self.args[0]})"
        return self.op


WAIT = Instruction("WAIT")
SORT = Instruction("SORT")


@dataclass(frozen=True, eq=False)
class Seq:
    items: tuple


@dataclass(frozen=True, eq=False)
class Repeat:
    count: int
    body: Seq


Block = Union[Instruction, Seq, Repeat]


def _walk(block: Block) -> Iterator[Instruction]:
    if isinstance(block, Instruction):
        yield block
    elif isinstance(block, Seq):
        for item in block.items:
            yield from _walk(item)
    else:
        for _ in range(block.count):
            yield from _walk(block.body)


def _count(block: Block, memo: dict) -> tuple:
    """(resets, instructions) below ``block``, memoized on shared nodes."""
    if isinstance(block, Instruction):
        return (1 if block.op == "WAIT" else 0), 1
    key = id(block)
    if key not in memo:
        if isinstance(block, Seq):
            r = i = 0
            for item in block.items:
                dr, di = _count(item, memo)
                r += dr
                i += di
        else:
            r, i = _count(block.body, memo)
            r, i = r * block.count, i * block.count
        memo[key] = (r, i)
    return memo[key]


class Program:
    """A deterministic, restartable instruction stream plus its metadata.

    Exactly one of ``root`` (a block tree) or ``factory`` (a zero-argument
    callable returning a fresh iterator) is given.
    """

    def __init__(
        self,
        name: str,
        n: int,
        params: Mapping | None = None,
        root: Block | None = None,
        factory: Callable[[], Iterable[Instruction]] | None = None,
    ):
        if (root is None) == (factory is None):
            raise ValueError("give exactly one of root or factory")
        self.name = name
        self.n = n
        self.params = dict(params or {})
        self.root = root
        self._factory = factory
        self._counts = None

    def __iter__(self) -> Iterator[Instruction]:
        if self.root is not None:
            return _walk(self.root)
        return iter(self._factory())

    def _tally(self) -> tuple:
        if self._counts is None:
            if self.root is not None:
                self._counts = _count(self.root, {})
            else:
                r = i = 0
                for instr in self:
                    i += 1
                    r += instr.op == "WAIT"
                self._counts = (r, i)
        return self._counts

    def count_resets(self) -> int:
        return self._tally()[0]

    def count_instructions(self) -> int:
        return self._tally()[1]

    def validate(self) -> None:
        """Check every gate index against the program's spin count."""
        for instr in self:
            for s in instr.spins():
                if not 1 <= s <= self.n:
                    raise ConfigurationError(f"{instr} out of range for n={self.n}")

    def compile(self) -> tuple:
        """Flatten into ``(ops, starts, lengths, root)`` for the compiled engine.

        ``ops`` rows are ``(opcode, a, b)``; a CALL row runs procedure ``a``
        ``b`` times.  Shared blocks become shared procedures.
        """
        procs: list = []
        index: dict = {}

        def row(instr: Instruction) -> tuple:
            if instr.op == "WAIT":
                return (OP_WAIT, 0, 0)
            if instr.op == "SORT":
                return (OP_SORT, 0, 0)
            if instr.op == "PT":
                return (OP_SWAP, instr.args[0], instr.args[1])
            return (OP_COMPRESS, instr.args[0], instr.width)

        def proc_of(block: Block) -> int:
            if isinstance(block, Repeat):
                block = Seq((block,))
            if isinstance(block, Instruction):
                block = Seq((block,))
            key = id(block)
            if key in index:
                return index[key]
            pid = len(procs)
            index[key] = pid
            procs.append(None)
            body = []
            for item in block.items:
                if isinstance(item, Instruction):
                    body.append(row(item))
                elif isinstance(item, Seq):
                    body.append((OP_CALL, proc_of(item), 1))
                else:
                    body.append((OP_CALL, proc_of(item.body), item.count))
            procs[pid] = body
            return pid

        if self.root is not None:
            root = proc_of(self.root)
        else:
            procs.append([row(instr) for instr in self])
            root = 0
        starts, lengths, flat = [], [], []
        for body in procs:
            starts.append(len(flat))
            lengths.append(len(body))
            flat.extend(body)
        ops = np.array(flat, dtype=np.int64).reshape(-1, 3)
        return ops, np.array(starts, dtype=np.int64), np.array(lengths, dtype=np.int64), root

    def to_dict(self) -> dict:
        params = {}
        for key, value in self.params.items():
            if isinstance(value, Fraction):
                value = float(value)
            elif isinstance(value, Mapping):
                value = {str(k): v for k, v in value.items()}
            params[key] = value
        return {
            "name": self.name,
            "n": self.n,
            "parameters": params,
            "n_resets": self.count_resets(),
            "n_instructions": self.count_instructions(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def __repr__(self) -> str:
        return f"Program({self.name!r}, n={self.n}, params={self.params!r})"


def count_resets(p: Program | Iterable[Instruction]) -> int:
    """Number of WAIT (reset) steps in a program or a plain instruction iterable."""
    if isinstance(p, Program):
        return p.count_resets()
    return sum(1 for instr in p if instr.op == "WAIT")


def empty_program(n: int) -> Program:
    return Program("empty", n, root=Seq(()))


# ---------------------------------------------------------------- mPAC


def _check_odd(n: int) -> int:
    if n < 1 or n % 2 == 0:
        raise ConfigurationError(f"mPAC needs an odd spin count, got {n}")
    return (n - 1) // 2


def _mpac_blocks(m: int) -> Callable[[int, int], Block]:
    memo: dict = {}

    def M(j: int, k: int) -> Block:
        if j == 0:
            return WAIT
        if (j, k) not in memo:
            sub = M(j - 1, k - 2)
            body = Seq((sub, Instruction.pt(k - 2, k - 1), sub, Instruction.compress(3, k)))
            memo[(j, k)] = Seq((sub, Instruction.pt(k - 2, k), Repeat(m, body)))
        return memo[(j, k)]

    return M


def build_mpac(n: int, m: int) -> Program:
    """mPAC cooling the MSB of ``n = 2j + 1`` spins with ``m`` compressions per level."""
    j = _check_odd(n)
    if m < 1:
        raise ConfigurationError(f"m must be positive, got {m}")
    M = _mpac_blocks(m)
    root = M(j, n)
    if isinstance(root, Instruction):
        root = Seq((root,))
    return Program("mpac", n, {"m": m, "j": j}, root=root)


def build_mpac_all(n: int, m: int) -> Program:
    """mPAC followed by cooling of every less significant spin in decreasing order."""
    j = _check_odd(n)
    if m < 1:
        raise ConfigurationError(f"m must be positive, got {m}")
    M = _mpac_blocks(m)
    root: Block = Seq((WAIT,))
    for jj in range(1, j + 1):
        k = 2 * jj + 1
        root = Seq((M(jj, k), M(jj - 1, k - 2), Instruction.pt(k - 2, k - 1), root))
    return Program("mpac-all", n, {"m": m, "j": j}, root=root)


# ---------------------------------------------------------------- bonacci


def _lookup_m(m_table, n: int, k: int) -> int:
    if isinstance(m_table, int):
        return m_table
    for key in ((n, k), k):
        if key in m_table:
            m = m_table[key]
            if m < 0:
                raise ConfigurationError(f"negative iteration count for level {k}")
            return int(m)
    raise ConfigurationError(f"missing iteration count m[{n},{k}]")


def _base_block(reset_config: int) -> Block:
    if reset_config == 2:
        return WAIT
    if reset_config == 1:
        return Seq((WAIT, Instruction.compress(2, 2), WAIT))
    raise ConfigurationError(f"reset_config must be 1 or 2, got {reset_config}")


def _level_width(order: int, k: int) -> int:
    return min(order + 1, k)


def apply_unitary(state: list, instr: Instruction, linear: bool = False, residue: str = "marginal") -> list:
    """Apply a PT/compression gate to a bias list.

    ``residue="mixed"`` sets the non-target spins of a 3+-bit compression to
    bias 0 after the gate (conservative bookkeeping); ``"marginal"`` keeps the
    exact product-state marginals.
    """
    if instr.op == "PT":
        return spins.pt(state, *instr.args)
    width = instr.width
    if not width:
        raise ConfigurationError(f"{instr} is not a unitary gate")
    if residue not in ("marginal", "mixed"):
        raise ConfigurationError(f"unknown residue convention {residue!r}")
    k = instr.args[0]
    out = spins.compress(state, k, width, linear)
    if residue == "mixed" and width > 2:
        zero = 0 * out[k - 1]
        for i in range(k - 1, k - width, -1):
            out[i - 1] = zero
    return out


def _ideal_linear_run(state: list, stream: Iterable[Instruction], reset_spins, residue: str) -> list:
    for instr in stream:
        if instr.op == "WAIT":
            for s in reset_spins:
                state[s - 1] = Fraction(1)
        else:
            state = apply_unitary(state, instr, True, residue)
    return state


def _goal_table(n: int, order: int, delta, reset_config: int, residue: str, max_iterations) -> dict:
    """Choose m[n,k] level by level so that bit k first reaches its delta-goal."""
    delta = Fraction(delta)
    if not 0 < delta < 1:
        raise ConfigurationError(f"delta must lie in (0, 1), got {delta}")
    resets = range(1, reset_config + 1)
    table: dict = {}
    lower: Block = _base_block(reset_config)
    for k in range(3, n + 1):
        goal = kbonacci_goal(n, k, delta, order)
        if max_iterations is not None:
            bound = max_iterations
        elif order == 2 and delta <= Fraction(1, 2):
            bound = n - k + 2
        else:
            bound = 64
        gate = Instruction.compress(_level_width(order, k), k)
        state = _ideal_linear_run([Fraction(0)] * n, _walk(lower), resets, residue)
        m = 0
        while state[k - 1] < goal:
            m += 1
            if m > bound:
                raise ConfigurationError(
                    f"goal {float(goal):.6g} for (n={n}, k={k}) unreachable within {bound} iterations"
                )
            state = apply_unitary(state, gate, True, residue)
            state = _ideal_linear_run(state, _walk(lower), resets, residue)
        table[k] = m
        lower = Seq((lower, Repeat(m, Seq((gate, lower)))))
    return table


def build_bonacci(
    n: int,
    order: int,
    m_table=None,
    *,
    delta=None,
    reset_config: int = 2,
    residue: str = "mixed",
    max_iterations: int | None = None,
) -> Program:
    """k-term bonacci: level k repeats ``[lower, C_w(k)]`` m[n,k] times.

    ``order`` 2 is Fibonacci (3BC), 3 is Tribonacci (4BC above level 3), and so
    on; level k uses width ``min(order + 1, k)``.  Give either an iteration
    table (int, ``{k: m}`` or ``{(n, k): m}``) or ``delta`` for goal-driven
    iteration counts.
    """
    if n < 3:
        raise ConfigurationError(f"bonacci algorithms need n >= 3, got {n}")
    if order < 2:
        raise ConfigurationError(f"order must be >= 2, got {order}")
    if (m_table is None) == (delta is None):
        raise ConfigurationError("give exactly one of m_table or delta")
    params: dict = {"order": order, "reset_config": reset_config}
    if delta is not None:
        m_table = _goal_table(n, order, delta, reset_config, residue, max_iterations)
        params["delta"] = Fraction(delta)
    block: Block = _base_block(reset_config)
    table = {}
    for k in range(3, n + 1):
        m = _lookup_m(m_table, n, k)
        table[k] = m
        gate = Instruction.compress(_level_width(order, k), k)
        block = Seq((block, Repeat(m, Seq((gate, block)))))
    if isinstance(block, Instruction):
        block = Seq((block,))
    params["m"] = table
    names = {2: "fib", 3: "trib"}
    name = names.get(order, f"{order}-bonacci")
    if delta is not None:
        name = "delta-" + name
    return Program(name, n, params, root=block)


def build_fibonacci(n: int, m_table, reset_config: int = 2) -> Program:
    return build_bonacci(n, 2, m_table, reset_config=reset_config)


def build_delta_fibonacci(n: int, delta, reset_config: int = 2, residue: str = "mixed") -> Program:
    return build_bonacci(n, 2, delta=delta, reset_config=reset_config, residue=residue)


def build_tribonacci(n: int, m_table=None, *, delta=None, reset_config: int = 2) -> Program:
    return build_bonacci(n, 3, m_table, delta=delta, reset_config=reset_config)


def build_new_bonacci(
    n: int,
    order: int,
    m_table=None,
    *,
    delta=None,
    reset_config: int = 2,
    residue: str = "mixed",
    max_iterations: int = 64,
) -> Program:
    """new-k-bonacci: at every iteration pick the compression width that maximizes
    the target bit's ideal linear bias right after the gate.

    The candidates are widths 2..order+1 that fit below spin k; ties go to the
    narrower gate.  The choice depends on the running state, so the stream is
    produced by replaying an ideal linear simulation starting from the all-zero
    state.  In ``delta`` mode a level iterates until its goal is met.
    """
    if n < 3:
        raise ConfigurationError(f"bonacci algorithms need n >= 3, got {n}")
    if order < 2:
        raise ConfigurationError(f"order must be >= 2, got {order}")
    if (m_table is None) == (delta is None):
        raise ConfigurationError("give exactly one of m_table or delta")
    if m_table is not None:
        levels = {k: _lookup_m(m_table, n, k) for k in range(3, n + 1)}
        goals = None
    else:
        delta = Fraction(delta)
        if not 0 < delta < 1:
            raise ConfigurationError(f"delta must lie in (0, 1), got {delta}")
        levels = None
        goals = {k: kbonacci_goal(n, k, delta, order) for k in range(3, n + 1)}
    resets = range(1, reset_config + 1)
    base = list(_walk(_base_block(reset_config)))

    def factory() -> Iterator[Instruction]:
        state = [Fraction(0)] * n

        def emit(instr: Instruction):
            nonlocal state
            if instr.op == "WAIT":
                for s in resets:
                    state[s - 1] = Fraction(1)
            else:
                state = apply_unitary(state, instr, True, residue)
            return instr

        def level(k: int) -> Iterator[Instruction]:
            if k <= 2:
                for instr in base:
                    yield emit(instr)
                return
            yield from level(k - 1)
            it = 0
            while True:
                if levels is not None:
                    if it >= levels[k]:
                        break
                elif state[k - 1] >= goals[k]:
                    break
                elif it >= max_iterations:
                    raise ConfigurationError(f"goal for (n={n}, k={k}) not met in {max_iterations} iterations")
                best, best_bias = None, None
                for width in range(2, min(order + 1, k) + 1):
                    gate = Instruction.compress(width, k)
                    bias = apply_unitary(state, gate, True, residue)[k - 1]
                    if best is None or bias > best_bias:
                        best, best_bias = gate, bias
                yield emit(best)
                yield from level(k - 1)
                it += 1

        return level(n)

    params: dict = {"order": order, "reset_config": reset_config}
    if levels is not None:
        params["m"] = levels
    else:
        params["delta"] = delta
    names = {2: "new-fib", 3: "new-trib"}
    return Program(names.get(order, f"new-{order}-bonacci"), n, params, factory=factory)


def drop_redundant_resets(p: Program, reset_spins=(1,)) -> Program:
    """Peephole pass: drop a WAIT when no gate touched a reset spin since the last WAIT."""
    reset_spins = frozenset(reset_spins)

    def factory() -> Iterator[Instruction]:
        seen_wait = False
        dirty = False
        for instr in p:
            if instr.op == "WAIT":
                if seen_wait and not dirty:
                    continue
                seen_wait, dirty = True, False
                yield instr
            else:
                if reset_spins.intersection(instr.spins()) or instr.op == "SORT":
                    dirty = True
                yield instr

    params = dict(p.params, peephole=True)
    return Program(p.name, p.n, params, factory=factory)


ALGORITHMS = ("mpac", "mpac-all", "fib", "delta-fib", "trib", "delta-trib", "new-fib", "new-trib", "ppa")


def build(algo: str, n: int, *, m=2, m_table=None, delta=None, reset_config: int = 2) -> Program:
    """Build a program from a CLI-style algorithm id.

    ``m`` is the mPAC compression count; bonacci builders take ``m_table``
    (falling back to a constant ``m``) or ``delta``.
    """
    table = m_table if m_table is not None else m
    if algo == "mpac":
        return build_mpac(n, m)
    if algo == "mpac-all":
        return build_mpac_all(n, m)
    if algo == "fib":
        return build_fibonacci(n, table, reset_config)
    if algo == "trib":
        return build_tribonacci(n, table, reset_config=reset_config)
    if algo in ("delta-fib", "delta-trib"):
        if delta is None:
            raise ConfigurationError(f"{algo} needs delta")
        order = 2 if algo == "delta-fib" else 3
        return build_bonacci(n, order, delta=delta, reset_config=reset_config)
    if algo in ("new-fib", "new-trib"):
        order = 2 if algo == "new-fib" else 3
        if delta is not None:
            return build_new_bonacci(n, order, delta=delta, reset_config=reset_config)
        return build_new_bonacci(n, order, table, reset_config=reset_config)
    if algo == "ppa":
        raise ConfigurationError("ppa is not an instruction program; use hbac.oracle.run_ppa")
    raise ConfigurationError(f"unknown algorithm {algo!r}")
