import itertools
from fractions import Fraction

import pytest

from hbac import programs
from hbac.engine import execute_linear
from hbac.programs import Instruction, Program, Repeat, Seq, WAIT, count_resets
from hbac.spins import ConfigurationError, SpinSystem


def naive_mpac(m, j, k):
    """Eager reference expansion of M_j(k) as a list of strings."""
    if j == 0:
        return ["WAIT"]
    lower = naive_mpac(m, j - 1, k - 2)
    out = lower + [f"PT({k - 2}->{k})"]
    for _ in range(m):
        out += lower + [f"PT({k - 2}->{k - 1})"] + lower + [f"C3({k})"]
    return out


@pytest.mark.parametrize("m,j", [(1, 1), (2, 1), (2, 2), (3, 2), (2, 3)])
def test_mpac_stream_matches_naive_expansion(m, j):
    p = programs.build_mpac(2 * j + 1, m)
    assert [str(i) for i in p] == naive_mpac(m, j, 2 * j + 1)


@pytest.mark.parametrize("j", range(0, 7))
def test_mpac_reset_counts(j):
    assert programs.build_mpac(2 * j + 1, 2).count_resets() == 5**j


def test_mpac_all_recurrence():
    counts = [programs.build_mpac_all(2 * j + 1, 2).count_resets() for j in range(7)]
    assert counts[0] == 1
    for j in range(1, 7):
        assert counts[j] == counts[j - 1] + 5 ** (j - 1) + 5**j
    assert counts[3] == 187


@pytest.mark.parametrize("j", range(0, 5))
def test_memoized_counts_match_stream(j):
    p = programs.build_mpac_all(2 * j + 1, 2)
    stream = list(p)
    assert p.count_resets() == sum(i.op == "WAIT" for i in stream)
    assert p.count_instructions() == len(stream)
    assert count_resets(iter(stream)) == p.count_resets()


@pytest.mark.parametrize("algo", ["mpac", "mpac-all", "fib", "trib", "new-fib", "new-trib"])
def test_stream_is_deterministic(algo):
    p = programs.build(algo, 5, m=2)
    assert [str(i) for i in p] == [str(i) for i in p]
    assert [str(i) for i in p] == [str(i) for i in programs.build(algo, 5, m=2)]
    p.validate()


def test_compile_roundtrip_counts():
    p = programs.build_mpac_all(7, 2)
    ops, starts, lengths, root = p.compile()
    assert ops.shape[1] == 3
    assert len(starts) == len(lengths)
    assert 0 <= root < len(starts)


@pytest.mark.parametrize("table", [{3: 2, 4: 1}, {3: 1, 4: 3}, {3: 0, 4: 2}, 2])
def test_one_reset_spin_doubles_waits(table):
    two = programs.build_fibonacci(4, table, reset_config=2)
    one = programs.build_fibonacci(4, table, reset_config=1)
    assert one.count_resets() == 2 * two.count_resets()


def test_one_reset_spin_base_block():
    p = programs.build_fibonacci(3, {3: 0}, reset_config=1)
    assert [str(i) for i in p] == ["WAIT", "C2(2)", "WAIT"]


def _msb(p, n):
    return execute_linear(p, SpinSystem(n, reset_spins={1, 2})).final[-1]


@pytest.mark.parametrize("n", [3, 4, 5])
def test_new_fibonacci_dominates_fibonacci(n):
    for ms in itertools.product(range(4), repeat=n - 2):
        table = dict(zip(range(3, n + 1), ms))
        new = _msb(programs.build_new_bonacci(n, 2, table), n)
        old = _msb(programs.build_fibonacci(n, table), n)
        assert new >= old, table


@pytest.mark.slow
def test_new_fibonacci_dominates_fibonacci_n6():
    n = 6
    for ms in itertools.product(range(4), repeat=n - 2):
        table = dict(zip(range(3, n + 1), ms))
        assert _msb(programs.build_new_bonacci(n, 2, table), n) >= _msb(programs.build_fibonacci(n, table), n)


def test_new_bonacci_prefers_narrower_gate_on_tie():
    # state {0, 1, 1}: the swap and the 3BC both leave 1 on spin 3
    p = programs.build_new_bonacci(3, 2, {3: 1})
    assert [str(i) for i in p] == ["WAIT", "C2(3)", "WAIT"]


def test_delta_fibonacci_table():
    p = programs.build_delta_fibonacci(4, Fraction(1, 2))
    assert p.params["m"] == {3: 2, 4: 2}
    for n in range(3, 7):
        table = programs.build_delta_fibonacci(n, Fraction(1, 2)).params["m"]
        assert all(m <= n - k + 2 for k, m in table.items())


def test_delta_fibonacci_reaches_goals():
    from hbac.analysis import goal_profile

    n = 5
    p = programs.build_delta_fibonacci(n, Fraction(1, 2))
    final = execute_linear(p, SpinSystem(n, reset_spins={1, 2})).msb_first()
    assert final[0] >= goal_profile(n, Fraction(1, 2))[0]


def test_peephole_drops_only_redundant_waits():
    root = Seq((WAIT, WAIT, Instruction.pt(1, 2), WAIT, Instruction.compress(3, 4), WAIT))
    p = Program("toy", 4, root=root)
    q = programs.drop_redundant_resets(p)
    assert [str(i) for i in q] == ["WAIT", "PT(1->2)", "WAIT", "C3(4)"]
    assert q.count_resets() == 2


def test_repeat_zero_and_nesting():
    p = Program("toy", 3, root=Seq((Repeat(0, WAIT), Repeat(2, Seq((WAIT, Repeat(3, Instruction.pt(2, 3))))))))
    assert p.count_resets() == 2
    assert p.count_instructions() == 8


@pytest.mark.parametrize(
    "call",
    [
        lambda: programs.build_mpac(4, 2),
        lambda: programs.build_mpac(5, 0),
        lambda: programs.build_fibonacci(2, 1),
        lambda: programs.build_fibonacci(4, {3: 1}),
        lambda: programs.build_fibonacci(4, {3: -1, 4: 1}),
        lambda: programs.build_bonacci(4, 2, {3: 1, 4: 1}, delta=Fraction(1, 2)),
        lambda: programs.build("ppa", 3),
        lambda: programs.build("nope", 3),
        lambda: programs.build_new_bonacci(4, 2, delta=Fraction(3, 2)),
    ],
)
def test_builder_errors(call):
    with pytest.raises(ConfigurationError):
        call()


def test_validate_catches_out_of_range_gate():
    p = Program("bad", 3, root=Seq((Instruction.pt(1, 4),)))
    with pytest.raises(ConfigurationError):
        p.validate()


def test_program_json_metadata():
    d = programs.build_mpac_all(7, 2).to_dict()
    assert d["n_resets"] == 187
    assert d["parameters"] == {"m": 2, "j": 3}
