"""Transition-law engine against independent oracles.

The pmf table is cross-checked three ways: the modified-Bessel closed
form for the nearest-neighbor walk, the direct Poissonization series for
a generic kernel at small t, and Chapman-Kolmogorov self-consistency.
Rate claims (shift, gradient, Gaussian comparison) are frozen from
independent measurements so regressions in the numerics are visible.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ive
from scipy.stats import norm

from sepmax.walk_kernel import (
    AsymmetricInput,
    EmptySupport,
    InfiniteMgf,
    NonNormalized,
    OutOfChernoffRange,
    TimeNegative,
    build_kernel,
    chernoff_log_tail,
    gaussian_mean_excess,
    grad_residual_distance,
    local_clt_density,
    local_clt_window,
    nearest_neighbor,
    normal_tail_ratio_error,
    pmf_shift_distance,
    poissonization_pmf_oracle,
    std_normal_tail,
    tail_prob,
    transition_pmf,
)

NN = nearest_neighbor()
# range-3 kernel used for generic-path checks; sigma2 = 2*(0.3 + 4*0.15 + 9*0.05)
GEN = build_kernel([(1, 0.3), (2, 0.15), (3, 0.05)], theta=2.0)


# ---------------------------------------------------------------- validation

def test_build_rejects_bad_mass():
    with pytest.raises(NonNormalized):
        build_kernel([(1, 0.3)], theta=1.0)


def test_build_rejects_asymmetric_listing():
    with pytest.raises(AsymmetricInput):
        build_kernel([(1, 0.3), (-1, 0.2)], theta=1.0)


def test_build_rejects_empty():
    with pytest.raises(EmptySupport):
        build_kernel([], theta=1.0)


def test_build_rejects_nonpositive_theta():
    with pytest.raises(ValueError):
        build_kernel([(1, 0.5)], theta=0.0)


def test_build_rejects_uncertified_envelope():
    # envelope must shrink faster than e^{-theta}
    with pytest.raises(InfiniteMgf):
        build_kernel([(1, 0.45), (2, 0.05)], theta=1.0,
                     tail_envelope=(0.5, 0.9))


def test_negative_time_rejected():
    with pytest.raises(TimeNegative):
        transition_pmf(NN, -1.0)


def test_nearest_neighbor_moments():
    assert NN.sigma2 == 1.0
    assert NN.support == (1,)
    assert NN.probs == (0.5,)


# ------------------------------------------------------------- exact oracles

def test_nn_pmf_is_bessel():
    # P_0(xi_t = k) = e^{-t} I_k(t) for the rate-1 nearest-neighbor walk
    for t in (0.7, 3.0, 25.0):
        tab = transition_pmf(NN, t, 1e-13)
        for k in (0, 1, 2, 5, 11):
            assert tab.prob(k) == pytest.approx(float(ive(k, t)), rel=1e-10)


def test_generic_pmf_matches_poissonization_series():
    for t in (0.5, 2.0):
        tab = transition_pmf(GEN, t, 1e-13)
        for k in (-4, -1, 0, 2, 6):
            assert tab.prob(k) == pytest.approx(
                poissonization_pmf_oracle(GEN, t, k), abs=1e-12)


def test_pmf_mass_and_symmetry():
    for eps in (1e-8, 1e-12):
        tab = transition_pmf(GEN, 17.0, eps)
        assert -1e-12 <= 1.0 - tab.mass() < eps
        arr = tab.array()
        np.testing.assert_allclose(arr, arr[::-1], rtol=0, atol=1e-15)


def test_pmf_variance_identity():
    tab = transition_pmf(GEN, 40.0, 1e-12)
    ks = tab.support().astype(float)
    var = float((ks * ks * tab.array()).sum())
    assert var == pytest.approx(GEN.sigma2 * 40.0, rel=1e-9)


def test_chapman_kolmogorov():
    t1, t2 = 3.0, 5.0
    a = transition_pmf(GEN, t1, 1e-14)
    b = transition_pmf(GEN, t2, 1e-14)
    c = transition_pmf(GEN, t1 + t2, 1e-14)
    conv = np.convolve(a.array(), b.array())
    kmax = a.kmax + b.kmax
    for k in (0, 3, 10, -7):
        assert conv[k + kmax] == pytest.approx(c.prob(k), abs=1e-12)


def test_tail_prob_matches_suffix():
    tab = transition_pmf(NN, 30.0, 1e-12)
    for z in (-3.5, 0.0, 4.0, 9.7):
        brute = sum(p for k, p in tab.items() if k > z)
        assert tail_prob(NN, 30.0, z, 1e-12) == pytest.approx(brute, rel=1e-12)
        assert tab.tail_above(z) == pytest.approx(brute, rel=1e-12)


def test_tail_prob_monotone_in_z():
    vals = [tail_prob(NN, 30.0, z) for z in np.linspace(-10, 20, 61)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


# ----------------------------------------------------------- Chernoff bound

def test_chernoff_frozen_value():
    # continuous-time form -lam*x + t*(M(lam) - 1) at lam = x/(sigma^2 t)
    assert chernoff_log_tail(NN, 100.0, 10.0) == pytest.approx(
        -0.4995831944196496, abs=1e-13)


def test_chernoff_dominates_exact_tail():
    for kern in (NN, GEN):
        for t in (2.0, 20.0):
            xmax = int(kern.sigma2 * kern.theta * t)
            for x in range(1, min(xmax, 25) + 1):
                exact = tail_prob(kern, t, x - 0.5, 1e-14)
                if exact == 0.0:
                    continue
                assert math.log(exact) <= chernoff_log_tail(kern, t, float(x)) + 1e-12


def test_chernoff_window_enforced():
    with pytest.raises(OutOfChernoffRange):
        chernoff_log_tail(NN, 4.0, 4.0 * NN.sigma2 * NN.theta + 1.0)


# ---------------------------------------------------------------- local CLT

def test_local_clt_density_tracks_pmf():
    t = 400.0
    tab = transition_pmf(NN, t, 1e-12)
    w = local_clt_window(NN, t)
    assert w > 0
    for k in (0, 5, w // 2, w):
        dens = local_clt_density(NN, t, float(k))
        assert tab.prob(k) == pytest.approx(dens, rel=0.05)


def test_shift_distance_rate():
    # sum_k |p_t(k) - p_t(k+y)| decays like y/sqrt(t); the scaled value
    # sits near 2*sqrt(2/pi) ~ 0.798 for the NN walk
    for t in (10.0, 100.0, 1000.0):
        for y in (1, 2, 5):
            scaled = pmf_shift_distance(NN, t, y) * math.sqrt(t) / y
            assert 0.6 < scaled < 1.1


def test_grad_residual_rate():
    vals = [grad_residual_distance(NN, t, 1) * t * t for t in (10.0, 100.0, 1000.0)]
    assert max(vals) / min(vals) < 1.05
    assert all(0.05 < v < 0.2 for v in vals)


def test_normal_tail_ratio_error_decreases_at_half():
    vals = [normal_tail_ratio_error(NN, t, 0.5) for t in (1e2, 1e3, 1e4)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 0.01


def test_normal_tail_ratio_error_lattice_caveat():
    # documented exception: at x_scaled=1 the threshold lands on an exact
    # integer at t in {1e2, 1e4} (worst-case continuity offset 0.5) and the
    # sequence is not monotone; regression-pinned, not hidden
    vals = [normal_tail_ratio_error(NN, t, 1.0) for t in (1e2, 1e3, 1e4)]
    assert not vals[0] > vals[1] > vals[2]
    assert vals[1] < vals[0]


# ----------------------------------------------------- Gaussian helper pair

def test_std_normal_tail_matches_scipy():
    for u in (-2.0, 0.0, 1.3, 6.0):
        assert std_normal_tail(u) == pytest.approx(norm.sf(u), rel=1e-12)


def test_mean_excess_identity():
    # f(u) = E[(X-u)^+] = phi(u) - u*P(X>u)
    for u in (0.0, 0.8, 2.5, 5.0):
        direct = norm.pdf(u) - u * norm.sf(u)
        assert gaussian_mean_excess(u) == pytest.approx(direct, rel=1e-11)
    assert gaussian_mean_excess(0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi))


def test_mean_excess_expansion_constant():
    # |f(u) - phi(u)/u^2| <= K*phi(u)/u^4 on [2,8] with a single modest K;
    # the asymptotic coefficient is 3
    us = np.linspace(2.0, 8.0, 121)
    phi = norm.pdf(us)
    err = np.array([gaussian_mean_excess(u) for u in us]) - phi / us**2
    k = (np.abs(err) * us**4 / phi).max()
    assert 1.0 < k <= 5.0


# ------------------------------------------------------------- properties

offset_probs = st.lists(
    st.tuples(st.integers(1, 4), st.floats(0.01, 0.2)),
    min_size=1, max_size=3, unique_by=lambda op: op[0])


@st.composite
def kernels(draw):
    pairs = draw(offset_probs)
    half = sum(p for _, p in pairs)
    pairs = [(i, p / (2 * half)) for i, p in pairs]
    return build_kernel(pairs, theta=1.5)


@given(kernels(), st.floats(0.1, 8.0))
@settings(max_examples=25, deadline=None)
def test_pmf_mass_symmetry_variance_property(kern, t):
    tab = transition_pmf(kern, t, 1e-10)
    arr = tab.array()
    assert -1e-12 <= 1.0 - arr.sum() < 1e-10
    np.testing.assert_allclose(arr, arr[::-1], rtol=0, atol=1e-15)
    ks = tab.support().astype(float)
    assert float((ks * ks * arr).sum()) == pytest.approx(
        kern.sigma2 * t, rel=1e-6)


@given(kernels(), st.floats(0.5, 6.0), st.floats(0.3, 0.95))
@settings(max_examples=25, deadline=None)
def test_chernoff_dominates_property(kern, t, frac):
    x = frac * kern.sigma2 * kern.theta * t
    exact = tail_prob(kern, t, x - 1e-9, 1e-14)
    if exact > 0.0:
        assert math.log(exact) <= chernoff_log_tail(kern, t, x) + 1e-9
