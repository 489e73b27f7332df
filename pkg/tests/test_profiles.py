"""Initial-profile layer: densities, truncation search, sampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepmax.profiles import (
    AllZeroDensities,
    ChernoffRangeExceeded,
    Configuration,
    DensityOutOfRange,
    full_step,
    make_profile,
    required_left_cut,
    sample_initial,
)
from sepmax.walk_kernel import nearest_neighbor, tail_prob
from sepmax._rng import np_rng

NN3 = nearest_neighbor(theta=3.0)


def test_full_step_profile():
    prof = full_step()
    assert prof.rho_bar == 1.0
    assert prof.is_deterministic()
    assert prof.density(0) == 1.0
    assert prof.density(-7) == 1.0
    assert prof.density(1) == 0.0


def test_periodic_density_layout():
    prof = make_profile([0.5, 1.0])
    # site 0 is always full; the period starts at site -1
    assert prof.density(0) == 1.0
    assert prof.density(-1) == 0.5
    assert prof.density(-2) == 1.0
    assert prof.density(-3) == 0.5
    assert prof.rho_bar == 0.75


def test_l_cut_truncates():
    prof = full_step(l_cut=4)
    assert prof.density(-4) == 1.0
    assert prof.density(-5) == 0.0
    arr = prof.density_array(-6)
    np.testing.assert_array_equal(arr, [0, 0, 1, 1, 1, 1, 1])


def test_profile_validation():
    with pytest.raises(AllZeroDensities):
        make_profile([])
    with pytest.raises(AllZeroDensities):
        make_profile([0.0, 0.0])
    with pytest.raises(DensityOutOfRange):
        make_profile([1.2])
    with pytest.raises(DensityOutOfRange):
        make_profile([-0.1])


def test_required_cut_deepens_with_budget():
    prof = full_step()
    cuts = [required_left_cut(prof, NN3, 50.0, 0.0, eps)
            for eps in (1e-3, 1e-6, 1e-9)]
    assert cuts[0] > cuts[1] > cuts[2]  # cuts are negative site indices


def test_required_cut_honors_l_cut():
    prof = full_step(l_cut=5)
    cut = required_left_cut(prof, NN3, 50.0, 0.0, 1e-12)
    assert cut >= -5


def test_required_cut_budget_is_met():
    # mass of the dropped sites, computed from the exact tails, must be
    # below the requested budget
    prof = full_step()
    t, z, eps = 40.0, 2.0, 1e-6
    cut = required_left_cut(prof, NN3, t, z, eps)
    dropped = sum(tail_prob(NN3, t, z - i, 1e-14) for i in range(cut - 200, cut))
    assert dropped < eps


def test_required_cut_window_contract():
    # theta=1 cannot certify depths past sigma^2*theta*t at small t
    with pytest.raises(ChernoffRangeExceeded):
        required_left_cut(full_step(), nearest_neighbor(), 3.0, 0.0, 1e-12)


def test_sample_initial_deterministic_profile():
    cfg = sample_initial(full_step(), -6, np_rng(3, 0, 0))
    np.testing.assert_array_equal(cfg.occupied, np.arange(-6, 1))
    assert cfg.time == 0.0


def test_sample_initial_bernoulli_statistics():
    prof = make_profile([0.3])
    hits = np.zeros(5)
    n = 4000
    for rep in range(n):
        cfg = sample_initial(prof, -5, np_rng(11, rep, 0))
        for site in cfg.occupied:
            if site < 0:
                hits[-site - 1] += 1
    freq = hits / n
    assert np.all(np.abs(freq - 0.3) < 4 * np.sqrt(0.3 * 0.7 / n))


def test_sample_initial_reproducible():
    prof = make_profile([0.5, 0.8])
    a = sample_initial(prof, -40, np_rng(7, 3, 0))
    b = sample_initial(prof, -40, np_rng(7, 3, 0))
    np.testing.assert_array_equal(a.occupied, b.occupied)


def test_configuration_invariants():
    cfg = Configuration(np.array([-2, 0, 5], dtype=np.int64), 1.0, -2)
    assert cfg.rightmost() == 5
    assert cfg.count_above(0.0) == 1
    assert cfg.count_above(-3.0) == 3
    with pytest.raises(ValueError):
        Configuration(np.array([3, 1], dtype=np.int64), 0.0, 0)


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=4),
       st.integers(0, 30))
@settings(max_examples=40, deadline=None)
def test_density_periodicity_property(densities, depth):
    if max(densities) == 0.0:
        return
    prof = make_profile(densities)
    m = prof.m
    x = -(depth + 1)
    assert prof.density(x) == prof.density(x - m)
    assert 0.0 <= prof.density(x) <= 1.0
