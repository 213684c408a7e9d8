import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_compress
from hbac import oracle, programs
from hbac.engine import BackendError, EngineConfig, TimingParams, execute
from hbac.oracle import DiagState
from hbac.programs import Instruction
from hbac.spins import ConfigurationError, SpinSystem, compress3, compress4

GRID = [-0.9, -0.5, 0.0, 1e-5, 0.3, 0.9]
prob_vectors = st.integers(1, 5).flatmap(
    lambda n: st.lists(st.floats(0.0, 1.0), min_size=2**n, max_size=2**n).filter(lambda v: sum(v) > 1e-3)
)


def _normalized(v):
    a = np.array(v, dtype=float)
    return DiagState(a / a.sum())


def test_product_layout():
    s = DiagState.product([0.2, -0.4, 0.6])
    assert s.tensor().shape == (2, 2, 2)
    assert oracle.marginals(s) == pytest.approx([0.2, -0.4, 0.6], abs=1e-15)
    # spin 3 is the most significant bit
    assert s.probs[:4].sum() == pytest.approx(0.8)


@pytest.mark.parametrize("biases", list(itertools.product(GRID, repeat=3)))
def test_c3_permutation_matches_closed_form(biases):
    s = oracle.apply_permutation(DiagState.product(biases), Instruction.compress(3, 3))
    got = oracle.marginals(s)
    assert got == pytest.approx(compress3(list(biases), 3), abs=1e-12)
    assert got == pytest.approx(brute_compress(list(biases), 3, 3), abs=1e-12)


@pytest.mark.parametrize("biases", list(itertools.product(GRID[::2], repeat=4)))
def test_c4_permutation_matches_closed_form(biases):
    s = oracle.apply_permutation(DiagState.product(biases), Instruction.compress(4, 4))
    assert oracle.marginals(s) == pytest.approx(compress4(list(biases), 4), abs=1e-12)


@pytest.mark.parametrize("instr", [Instruction.pt(1, 3), Instruction.compress(3, 4), Instruction.compress(4, 4), Instruction.compress(2, 2)])
@settings(max_examples=25)
@given(v=st.lists(st.floats(0.0, 1.0), min_size=16, max_size=16).filter(lambda v: sum(v) > 1e-3))
def test_permutations_are_involutions(instr, v):
    s = _normalized(v)
    once = oracle.apply_permutation(s, instr)
    assert np.array_equal(oracle.apply_permutation(once, instr).probs, s.probs)
    assert oracle.entropy(once) == pytest.approx(oracle.entropy(s), abs=1e-12)


@settings(max_examples=50)
@given(prob_vectors)
def test_sort_idempotent_and_ordered(v):
    s = oracle.sort_state(_normalized(v))
    assert np.all(np.diff(s.probs) <= 0)
    assert np.array_equal(oracle.sort_state(s).probs, s.probs)


@settings(max_examples=50, deadline=None)
@given(prob_vectors, st.floats(0.01, 10.0), st.sampled_from([1.0, 10.0, math.inf]), st.booleans())
def test_relaxation_conserves_probability(v, d, R, ext):
    s = _normalized(v)
    system = SpinSystem(s.n, eps0=0.01)
    out = oracle.relax_channel(s, d, TimingParams(R, d), system, extended_markov=ext)
    assert out.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(out.probs >= -1e-15)
    if ext:
        assert oracle.mutual_information(out, system.reset_spins) == pytest.approx(0.0, abs=1e-9)


def test_relaxation_matches_bias_formula():
    system = SpinSystem(3, eps0=0.01)
    s = DiagState.product([-0.2, 0.3, 0.5])
    out = oracle.marginals(oracle.relax_channel(s, 2.0, TimingParams(4.0, 2.0), system))
    f_r, f_c = math.exp(-2.0), math.exp(-0.5)
    assert out == pytest.approx([(-0.2 - 0.01) * f_r + 0.01, (0.3 - 0.01) * f_c + 0.01, (0.5 - 0.01) * f_c + 0.01])


def test_reset_spin_warms_toward_eps0():
    system = SpinSystem(2, eps0=0.1)
    s = DiagState.product([0.02, 0.5])
    out = oracle.marginals(oracle.relax_channel(s, 0.3, TimingParams(10.0, 0.3), system))
    assert 0.02 < out[0] < 0.1


def test_decorrelate_removes_correlations_keeps_marginals():
    s = oracle.apply_permutation(DiagState.product([0.3, 0.4, 0.5]), Instruction.compress(3, 3))
    assert oracle.mutual_information(s, [1]) > 1e-4
    d = oracle.decorrelate(s, [1])
    assert oracle.mutual_information(d, [1]) == pytest.approx(0.0, abs=1e-12)
    assert oracle.marginals(d) == pytest.approx(oracle.marginals(s), abs=1e-14)


@pytest.mark.parametrize(
    "probs,expected",
    [([1, 0, 0, 0], 0.0), ([0.25] * 4, 2.0), ([0.5, 0.5], 1.0), ([0.5, 0.25, 0.25, 0], 1.5)],
)
def test_entropy_examples(probs, expected):
    assert oracle.entropy(DiagState(probs)) == pytest.approx(expected)


def test_bad_vector_length():
    with pytest.raises(ConfigurationError):
        DiagState([0.5, 0.25, 0.25])


@pytest.mark.parametrize("n", [3, 5])
@pytest.mark.parametrize("model", ["paper_simplified", "general"])
def test_engine_equals_extended_markov_oracle(n, model):
    p = programs.build_mpac_all(n, 2)
    system = SpinSystem(n)
    t = TimingParams(1e3, 5)
    cfg = EngineConfig(reset_model=model)
    a = execute(p, system, t, cfg).final
    b = oracle.execute_oracle(p, system, t, True, cfg).final
    assert max(abs(x - y) / abs(y) for x, y in zip(a, b)) <= 1e-10


def test_full_correlation_run_is_close_but_not_required_equal():
    p = programs.build_mpac_all(5, 2)
    system = SpinSystem(5)
    t = TimingParams(1e3, 5)
    a = execute(p, system, t).final
    b = oracle.execute_oracle(p, system, t, extended_markov=False).final
    assert b == pytest.approx(a, rel=1e-6)


def test_oracle_runs_sort_programs_and_ledger():
    p = programs.Program("sort", 3, root=programs.Seq((programs.SORT, programs.WAIT, programs.SORT, programs.WAIT)))
    rep = oracle.execute_oracle(p, SpinSystem(3), TimingParams.ideal())
    assert rep.n_resets == 2
    led = rep.ledger.to_dict()
    assert len(led["per_reset_delta_h"]) == 2
    assert led["h_fin"] == pytest.approx(led["h_init"] - led["cumulative_delta_h"])
    json.loads(rep.ledger.to_json())


def test_oracle_cap():
    with pytest.raises(BackendError):
        oracle.execute_oracle(programs.build_mpac_all(5, 2), SpinSystem(5), TimingParams.ideal(), cap=4)
    with pytest.raises(BackendError):
        oracle.run_ppa(SpinSystem(15))


@pytest.mark.parametrize("n", [3, 4, 5])
def test_ppa_approaches_limit(n):
    res = oracle.run_ppa(SpinSystem(n), iterations=400, until=0.98 * 2 ** (n - 2))
    assert res.msb_trajectory[-1] >= 0.98 * 2 ** (n - 2)
    assert all(a <= b + 1e-9 for a, b in zip(res.msb_trajectory, res.msb_trajectory[1:]))


def test_ppa_entropy_steps_bounded():
    eps0 = 1e-5
    res = oracle.run_ppa(SpinSystem(4, eps0=eps0), iterations=50, initial="mixed")
    bound = eps0**2 / math.log(4)
    assert max(res.ledger.deltas) <= bound * (1 + 1e-3)
    assert len(res.ledger.deltas) == 50


def test_state_csv():
    lines = DiagState.mixed(2).to_csv().splitlines()
    assert lines == ["index,prob", "0,0.25", "1,0.25", "2,0.25", "3,0.25"]
