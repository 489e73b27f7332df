"""Exclusion simulators against exact single-walker and free oracles.

The suppressed and stirring engines share no code with the pmf tables,
so agreement of a lone particle's law with the Bessel pmf, and of the
free maximum with the product CDF, checks the event loops end to end.
"""

import numpy as np
import pytest

from sepmax.profiles import Configuration, full_step, make_profile
from sepmax.sep_sim import (
    COUPLINGS,
    EmptyRun,
    evolve_free,
    evolve_stirring,
    evolve_suppressed,
    run_replicates,
)
from sepmax.stats_harness import dkw_band
from sepmax.walk_kernel import build_kernel, nearest_neighbor, transition_pmf
from sepmax._rng import RngStream, np_rng

NN = nearest_neighbor(theta=3.0)
GEN = build_kernel([(1, 0.3), (2, 0.15), (3, 0.05)], theta=2.0)


def _one(site, t=0.0):
    return Configuration(np.array([site], dtype=np.int64), t, site)


def test_couplings_constant():
    assert set(COUPLINGS) == {"suppressed", "stirring", "free"}


def test_evolve_identity_and_time_checks():
    cfg = Configuration(np.array([-1, 0], dtype=np.int64), 2.0, -1)
    for evolve in (evolve_suppressed, evolve_stirring, evolve_free):
        out = evolve(cfg, NN, 2.0, np_rng(0, 0, 1))
        np.testing.assert_array_equal(
            np.asarray(getattr(out, "occupied", getattr(out, "positions", None))),
            cfg.occupied)
        with pytest.raises(ValueError):
            evolve(cfg, NN, 1.5, np_rng(0, 0, 1))


def test_suppressed_conserves_and_excludes():
    cfg = Configuration(np.arange(-20, 1, dtype=np.int64), 0.0, -20)
    out = evolve_suppressed(cfg, GEN, 13.0, RngStream.from_seed(5, 0))
    assert out.occupied.size == 21
    assert np.all(np.diff(out.occupied) > 0)  # no double occupancy
    assert out.time == 13.0


def test_stirring_conserves_and_excludes():
    cfg = Configuration(np.arange(-20, 1, dtype=np.int64), 0.0, -20)
    out = evolve_stirring(cfg, GEN, 13.0, RngStream.from_seed(5, 0))
    assert out.occupied.size == 21
    assert np.all(np.diff(out.occupied) > 0)


def test_stirring_labels_are_a_permutation():
    cfg = Configuration(np.arange(-15, 1, dtype=np.int64), 0.0, -15)
    out, labels = evolve_stirring(cfg, GEN, 9.0, RngStream.from_seed(8, 1),
                                  with_labels=True)
    np.testing.assert_array_equal(np.sort(labels), out.occupied)


def _single_walker_sample(evolve, kern, t, n, seed):
    xs = np.empty(n)
    for rep in range(n):
        out = evolve(_one(0), kern, t, RngStream.from_seed(seed, rep))
        pos = np.asarray(getattr(out, "occupied", getattr(out, "positions", None)))
        xs[rep] = pos[0]
    return xs


@pytest.mark.parametrize("evolve,seed", [(evolve_suppressed, 21),
                                         (evolve_stirring, 22),
                                         (evolve_free, 23)])
def test_single_walker_marginal_dkw(evolve, seed):
    # a lone particle sees no interaction: its law is the walk pmf exactly
    t, n = 6.0, 3000
    xs = _single_walker_sample(evolve, GEN, t, n, seed)
    tab = transition_pmf(GEN, t, 1e-12)
    suf = tab.suffix_sums()
    band = dkw_band(n, 0.01)
    grid = np.arange(-18, 19)
    for z in grid:
        emp = (xs <= z).mean()
        exact = 1.0 - (float(suf[z + 1 + tab.kmax]) if z + 1 <= tab.kmax else 0.0)
        assert abs(emp - exact) <= band + 1e-12, f"z={z}"


def test_single_walker_variance():
    t, n = 6.0, 3000
    xs = _single_walker_sample(evolve_suppressed, GEN, t, n, 24)
    target = GEN.sigma2 * t
    # Var of the sample variance for ~N(0, s^2): 2 s^4/n plus kurtosis slack
    assert abs(xs.var() - target) < 5 * target * np.sqrt(3.0 / n)


def test_replicates_deterministic():
    prof = full_step()
    a = run_replicates(prof, NN, 8.0, [0.0, 2.0], m_max=2, n=6, base_seed=31,
                       coupling="suppressed", eps_cut=1e-5)
    b = run_replicates(prof, NN, 8.0, [0.0, 2.0], m_max=2, n=6, base_seed=31,
                       coupling="suppressed", eps_cut=1e-5)
    assert [s.to_dict() for s in a] == [s.to_dict() for s in b]


def test_replicates_observables_consistent():
    prof = full_step()
    samples = run_replicates(prof, NN, 8.0, [-1.0, 0.0, 3.0], m_max=3, n=40,
                             base_seed=32, coupling="stirring", eps_cut=1e-5,
                             snapshot_window=(-12, 12))
    for s in samples:
        assert s.order_stats[0] == s.x_t
        assert all(a >= b for a, b in zip(s.order_stats, s.order_stats[1:]))
        # counts from the snapshot window agree with recorded exceedances
        sites = np.arange(s.snapshot.lo, s.snapshot.hi + 1)
        occupied = sites[s.snapshot.bits.astype(bool)]
        for z, cnt in s.n_t.items():
            assert cnt == int((occupied > z).sum())
        above = sum(1 for v in s.order_stats if v > 0.0)
        assert above == min(s.n_t[0.0], len(s.order_stats))


def test_replicates_bernoulli_profile_runs():
    # t large enough that the truncation certificate fits the Chernoff window
    prof = make_profile([0.5])
    samples = run_replicates(prof, NN, 12.0, [0.0], n=30, base_seed=33,
                             coupling="suppressed", eps_cut=1e-4)
    assert len(samples) == 30
    # random initial conditions differ across replicates
    assert len({s.x_t for s in samples}) > 1


def test_replicates_validation():
    prof = full_step()
    with pytest.raises(EmptyRun):
        run_replicates(prof, NN, 5.0, [], n=0)
    with pytest.raises(ValueError):
        run_replicates(prof, NN, 5.0, [], n=1, coupling="telepathic")
    with pytest.raises(ValueError):
        run_replicates(prof, NN, -2.0, [], n=1)


def test_free_matches_product_cdf():
    # exact-oracle check at small n; the acceptance suite repeats it at
    # n=2e4 with the pinned band
    prof = full_step()
    t, n = 30.0, 4000
    samples = run_replicates(prof, NN, t, [], m_max=0, n=n, base_seed=34,
                             coupling="free", z_ref=0.0, eps_cut=1e-6)
    xs = np.sort(np.array([s.x_t for s in samples], dtype=float))
    from sepmax.profiles import required_left_cut
    cut = required_left_cut(prof, NN, t, 0.0, 1e-6)
    tab = transition_pmf(NN, t, 1e-14)

    def product_cdf(z):
        acc = 1.0
        for i in range(cut, 1):
            acc *= 1.0 - tab.tail_above(z - i)
        return acc

    zs = np.arange(int(xs[0]) - 1, int(xs[-1]) + 2, dtype=float)
    fhat = np.searchsorted(xs, zs, side="right") / n
    gap = max(abs(f - product_cdf(z)) for z, f in zip(zs, fhat))
    assert gap <= dkw_band(n, 0.01)
