import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_compress
from hbac.engine import TimingParams
from hbac.spins import (
    ConfigurationError,
    SpinSystem,
    compress,
    compress2,
    compress3,
    compress4,
    pt,
    relax,
    relax_factor,
)

GRID = [-0.9, -0.5, 0.0, 1e-5, 0.3, 0.9]
bias = st.floats(-1.0, 1.0, allow_nan=False)


@pytest.mark.parametrize("biases", list(itertools.product(GRID, repeat=3)))
def test_compress3_matches_brute_force(biases):
    got = compress3(list(biases), 3)
    ref = brute_compress(list(biases), 3, 3)
    assert max(abs(a - b) for a, b in zip(got, ref)) <= 1e-12


@pytest.mark.parametrize("biases", list(itertools.product(GRID, repeat=4)))
def test_compress4_matches_brute_force(biases):
    got = compress4(list(biases), 4)
    ref = brute_compress(list(biases), 4, 4)
    assert max(abs(a - b) for a, b in zip(got, ref)) <= 1e-12


@pytest.mark.parametrize("width", [2, 3, 4, 5, 6])
def test_general_width_matches_brute_force(width):
    biases = [0.1, -0.4, 0.7, 0.25, -0.05, 0.6][:width]
    got = compress(biases, width, width)
    ref = brute_compress(biases, width, width)
    assert got == pytest.approx(ref, abs=1e-12)


def test_compress_inside_larger_register():
    state = [0.2, 0.1, 0.5, -0.3, 0.4]
    got = compress3(state, 4)
    assert got[0] == 0.2 and got[4] == 0.4
    assert got == pytest.approx(brute_compress(state, 4, 3), abs=1e-12)


def test_compress2_and_pt_are_swaps():
    assert compress2([0.1, 0.2, 0.3], 3) == [0.1, 0.3, 0.2]
    assert pt([0.1, 0.2, 0.3], 1, 3) == [0.3, 0.2, 0.1]


def test_compress3_linear_form():
    out = compress3([Fraction(1), Fraction(1), Fraction(0)], 3, linear=True)
    assert out == [0, 0, 1]
    assert compress3([1, 1, 1], 3, linear=True)[2] == 1.5


def test_compress4_linear_form():
    d, c, b, a = Fraction(2), Fraction(3, 2), Fraction(1), Fraction(1)
    out = compress4([a, b, c, d], 4, linear=True)
    assert out[3] == (3 * d + a + b + c) / 4


@given(st.lists(st.floats(-1e-4, 1e-4), min_size=3, max_size=3))
def test_linearization_small_bias(biases):
    out = compress3(biases, 3)
    assert abs(out[2] - sum(biases) / 2) < 1e-12


@settings(max_examples=200)
@given(
    st.lists(bias, min_size=5, max_size=5),
    st.lists(st.tuples(st.sampled_from(["pt", "c3", "c4", "relax"]), st.integers(1, 5), st.integers(1, 5)), max_size=20),
)
def test_bias_bounds_preserved(state, ops):
    system = SpinSystem(5)
    t = TimingParams(100.0, 2.0)
    for op, a, b in ops:
        if op == "pt" and a != b:
            state = pt(state, a, b)
        elif op == "c3" and a >= 3:
            state = compress3(state, a)
        elif op == "c4" and a >= 4:
            state = compress4(state, a)
        elif op == "relax":
            state = relax(state, b / 2, t, system)
        assert all(-1 - 1e-12 <= x <= 1 + 1e-12 for x in state)


@given(bias, st.floats(0.0, 50.0), st.floats(1.0, 1e6))
def test_relax_contracts_toward_eps0(x, duration, R):
    system = SpinSystem(2, eps0=1e-5)
    out = relax([x, x], duration, TimingParams(R, 1.0), system)
    for y in out:
        assert abs(y - 1e-5) <= abs(x - 1e-5) + 1e-15


def test_relax_strict_only_for_positive_duration():
    system = SpinSystem(2, eps0=1e-5)
    t = TimingParams(10.0, 1.0)
    assert relax([0.5, 0.5], 0.0, t, system) == [0.5, 0.5]
    out = relax([0.5, 0.5], 1.0, t, system)
    assert all(abs(y - 1e-5) < 0.5 - 1e-5 for y in out)


def test_relax_factor_limits():
    assert relax_factor(5.0, math.inf) == 1.0
    assert relax_factor(math.inf, 1.0) == 0.0
    assert relax_factor(math.inf, math.inf) == 1.0
    assert relax_factor(2.0, 4.0) == pytest.approx(math.exp(-0.5))
    with pytest.raises(ValueError):
        relax_factor(-1.0, 1.0)


@pytest.mark.parametrize(
    "call",
    [
        lambda: pt([0, 0, 0], 1, 1),
        lambda: pt([0, 0, 0], 0, 2),
        lambda: compress3([0, 0, 0], 2),
        lambda: compress3([0, 0, 0], 4),
        lambda: compress4([0, 0, 0], 3),
        lambda: compress([0] * 5, 3, 5),
    ],
)
def test_bad_indices_raise(call):
    with pytest.raises(ConfigurationError):
        call()


@pytest.mark.parametrize(
    "kwargs",
    [dict(n=0), dict(n=3, reset_spins={2}), dict(n=3, reset_spins={1, 2, 3}), dict(n=3, eps0=0.0), dict(n=1, reset_spins={1, 2})],
)
def test_spin_system_validation(kwargs):
    with pytest.raises(ConfigurationError):
        SpinSystem(**kwargs)


def test_spin_system_roles():
    s = SpinSystem(4, reset_spins={1, 2})
    assert s.is_reset(2) and not s.is_reset(3)
    assert s.computation_spins == [3, 4]
