"""Zero-range well simulator and its stationary product law.

Dual-route checks: the stationary mean against closed-form series (for
r = 1/2 the sum over sites of 1/(2^x - 1) is the Erdos-Borwein constant),
and the short-time law against exponentiation of the truncated generator,
which shares nothing with the event-driven engine.
"""

import itertools
import math

import numpy as np
import pytest
from scipy.linalg import expm

from sepmax.asep_zr import (
    AsepParams,
    DominationViolated,
    RatioOutOfRange,
    ZrConfig,
    coupled_evolve,
    default_cut,
    evolve_zr,
    mu_sum_distribution,
    sample_mu,
    tagged_displacement,
)
from sepmax._rng import RngStream, np_rng

P3 = AsepParams(0.3)


def test_params_validation_and_derived():
    assert P3.q == 0.7
    assert P3.ratio == pytest.approx(3.0 / 7.0)
    for bad in (0.0, 0.5, 0.7, -0.1):
        with pytest.raises(ValueError):
            AsepParams(bad)


def test_config_normalization():
    cfg = ZrConfig({1: 2, 4: 0, "3": 1})
    assert cfg.occupancies == {1: 2, 3: 1}
    assert tagged_displacement(cfg) == 3
    with pytest.raises(ValueError):
        ZrConfig({0: 1})
    with pytest.raises(ValueError):
        ZrConfig({2: -1})


def test_ratio_guards():
    for fn in (mu_sum_distribution, default_cut):
        with pytest.raises(RatioOutOfRange):
            fn(1.0)
        with pytest.raises(RatioOutOfRange):
            fn(0.0)


# --------------------------------------------------------- stationary law

def test_mu_mean_erdos_borwein():
    # mean = sum_x r^x/(1-r^x); at r=1/2 that is sum 1/(2^x-1)
    pmf = mu_sum_distribution(0.5, 1e-11)
    mean = float((np.arange(pmf.size) * pmf).sum())
    assert mean == pytest.approx(1.6066951524152917, abs=1e-9)


def test_mu_mean_series_r37():
    r = 3.0 / 7.0
    series = sum(r**x / (1.0 - r**x) for x in range(1, 200))
    pmf = mu_sum_distribution(r, 1e-11)
    mean = float((np.arange(pmf.size) * pmf).sum())
    assert mean == pytest.approx(series, abs=1e-9)
    assert mean == pytest.approx(1.1209, abs=1e-4)


def test_mu_zero_mass_is_product():
    r = 3.0 / 7.0
    pmf = mu_sum_distribution(r, 1e-12)
    prod = 1.0
    for x in range(1, 400):
        prod *= 1.0 - r**x
    assert pmf[0] == pytest.approx(prod, rel=1e-9)
    assert 0.0 < 1.0 - pmf.sum() < 1e-11


def test_default_cut_tail_bound():
    r = 0.45
    cut = default_cut(r, 1e-6)
    dropped = sum(r**x / (1.0 - r**x) for x in range(cut + 1, cut + 200))
    assert dropped < 1e-6
    assert default_cut(r, 1e-9) > cut


def test_sample_mu_site_marginals():
    # P(zeta_x >= 1) = r^x under the product law
    r, n = 0.45, 3000
    hits = np.zeros(3)
    rng = np_rng(91, 0, 0)
    for _ in range(n):
        cfg = sample_mu(r, 8, rng)
        for x in (1, 2, 3):
            if cfg.occupancies.get(x, 0) >= 1:
                hits[x - 1] += 1
    for x in (1, 2, 3):
        target = r**x
        sd = math.sqrt(target * (1 - target) / n)
        assert abs(hits[x - 1] / n - target) < 4 * sd


# ------------------------------------------------------------- dynamics

def test_evolve_identity_and_time_guard():
    cfg = ZrConfig({1: 1}, 3.0)
    assert evolve_zr(cfg, P3, 3.0, np_rng(0, 0, 4)) is cfg
    with pytest.raises(ValueError):
        evolve_zr(cfg, P3, 2.0, np_rng(0, 0, 4))


def test_evolve_deterministic():
    cfg = ZrConfig({2: 2, 5: 1})
    a = evolve_zr(cfg, P3, 40.0, RngStream.from_seed(17, 0))
    b = evolve_zr(cfg, P3, 40.0, RngStream.from_seed(17, 0))
    assert a.occupancies == b.occupancies
    assert a.time == 40.0


def test_evolve_growth_path():
    # mass parked on the last tracked site forces the array to double
    cfg = ZrConfig({8: 6})
    out = evolve_zr(cfg, AsepParams(0.45), 60.0, RngStream.from_seed(18, 0))
    assert all(s >= 1 and c > 0 for s, c in out.occupancies.items())
    assert out.time == 60.0


def _generator_states(n_sites, max_mass):
    states = []
    for total in range(max_mass + 1):
        for combo in itertools.product(range(total + 1), repeat=n_sites):
            if sum(combo) == total:
                states.append(combo)
    return states


def test_short_time_law_matches_generator_exponential():
    # truncated generator on sites 1..6 with mass cap 5; from the empty
    # state at t=0.5 the probability of ever touching the truncation
    # boundary is below 1e-7, far under the Monte Carlo band
    p, q, t = 0.3, 0.7, 0.5
    S, M = 6, 5
    states = _generator_states(S, M)
    index = {s: i for i, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    for s, i in index.items():
        total = sum(s)
        if total < M:
            j = index[(s[0] + 1,) + s[1:]]
            Q[i, j] += p
        for k in range(S):
            if s[k] == 0:
                continue
            dec = list(s)
            dec[k] -= 1
            if k + 1 < S:
                right = tuple(dec[:k + 1] + [dec[k + 1] + 1] + dec[k + 2:])
                Q[i, index[right]] += p
            if k == 0:
                Q[i, index[tuple(dec)]] += q  # exit into the well
            else:
                left = tuple(dec[:k - 1] + [dec[k - 1] + 1] + dec[k:])
                Q[i, index[left]] += q
        Q[i, i] -= Q[i].sum()
    law = expm(Q * t)[index[(0,) * S]]
    sum_law = np.zeros(M + 1)
    for s, i in index.items():
        sum_law[sum(s)] += law[i]

    n = 40000
    counts = np.zeros(M + 2)
    empty = ZrConfig({})
    for rep in range(n):
        out = evolve_zr(empty, P3, t, RngStream.from_seed(19, rep))
        counts[min(tagged_displacement(out), M + 1)] += 1
    emp = counts / n
    assert emp[M + 1] == 0.0  # cap never reached at this horizon
    for k in range(M + 1):
        sd = math.sqrt(max(sum_law[k] * (1 - sum_law[k]), 1e-12) / n)
        assert abs(emp[k] - sum_law[k]) < 4.5 * sd + 1e-7, f"k={k}"


def test_coupled_preserves_domination():
    rng = RngStream.from_seed(20, 0)
    lower = ZrConfig({1: 1})
    upper = ZrConfig({1: 2, 3: 1})
    lo, hi = coupled_evolve(lower, upper, P3, 25.0, rng,
                            check_every_event=True)
    for site in set(lo.occupancies) | set(hi.occupancies):
        assert lo.occupancies.get(site, 0) <= hi.occupancies.get(site, 0)
    assert lo.time == hi.time == 25.0


def test_coupled_rejects_bad_input():
    with pytest.raises(DominationViolated):
        coupled_evolve(ZrConfig({1: 3}), ZrConfig({1: 1}), P3, 1.0,
                       np_rng(0, 0, 4))
    with pytest.raises(ValueError):
        coupled_evolve(ZrConfig({1: 1}, 0.0), ZrConfig({1: 1}, 2.0), P3, 5.0,
                       np_rng(0, 0, 4))
