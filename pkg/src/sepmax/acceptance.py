"""Named acceptance experiments with pinned seeds and tolerances.

Each criterion_* function runs one self-contained experiment mixing
simulation, exact numerics, and the statistical harness, and returns a
CriterionResult whose details dict is JSON-ready for the verify manifest.
Heavy simulation legs are cached at module level so criteria sharing a
sweep (the Gumbel trend and the order-statistic check, the mean-identity
runs and the dispersion suite) pay for it once per process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import sep_sim
from .asep_zr import (AsepParams, ZrConfig, coupled_evolve, default_cut,
                      evolve_zr, mu_sum_distribution, sample_mu,
                      tagged_displacement)
from .limit_theory import (covariance_bound, expected_count, fast_regime_L,
                           limit_law, occupancy_mean_profile,
                           order_stat_limit_cdf, scaled_position,
                           scaling_full, scaling_L, sum_of_squares_bound,
                           threshold)
from .profiles import full_step
from .stats_harness import (EmpiricalDist, dispersion_report, dkw_band,
                            ks_distance, ks_two_sample, trend_report)
from .walk_kernel import (chernoff_log_tail, gaussian_mean_excess,
                          grad_residual_distance, nearest_neighbor,
                          normal_tail_ratio_error, pmf_shift_distance,
                          std_normal_tail, tail_prob, transition_pmf)
from ._rng import np_rng, INIT

N_FULL = 20000
SIGMA = 1.0
GUMBEL_SEEDS = {1.0e2: 201, 1.0e3: 202, 1.0e4: 203}
MEAN_SEEDS = {(50.0, 10.0, "suppressed"): 311, (50.0, 10.0, "stirring"): 312,
              (200.0, 25.0, "suppressed"): 313, (200.0, 25.0, "stirring"): 314}


@dataclass(frozen=True)
class CriterionResult:
    name: str
    passed: bool
    details: dict


def _kernel():
    return nearest_neighbor()


@lru_cache(maxsize=None)
def _gumbel_leg(t: float):
    """One decade of the full-step Gumbel sweep at n=20000.

    Returns scaled rightmost and second-rightmost positions, the count at
    the x=0 threshold, the exact expected count there, and the number of
    replicates violating the order-statistic/count identity.
    """
    kern = _kernel()
    prof = full_step()
    sc = scaling_full(t)
    z0 = threshold(sc, SIGMA, 0.0)
    m_max = 3
    samples = sep_sim.run_replicates(prof, kern, t, [z0], m_max=m_max,
                                     n=N_FULL, base_seed=GUMBEL_SEEDS[t],
                                     coupling="suppressed", eps_cut=3e-5)
    xs = np.array([s.x_t for s in samples], dtype=float)
    x1 = np.array([s.order_stats[1] for s in samples], dtype=float)
    n0 = np.array([s.n_t[z0] for s in samples], dtype=np.int64)
    bad = 0
    for s in samples:
        above = sum(1 for v in s.order_stats if v > z0)
        if above != min(s.n_t[z0], m_max + 1):
            bad += 1
    e_cnt = expected_count(prof, kern, t, z0)
    return {"scaled_x": np.array([scaled_position(v, sc, SIGMA) for v in xs]),
            "scaled_x1": np.array([scaled_position(v, sc, SIGMA) for v in x1]),
            "n0": n0, "z0": z0, "e_cnt": e_cnt, "consistency_bad": bad}


@lru_cache(maxsize=None)
def _mean_leg(t: float, z: float, coupling: str):
    kern = _kernel()
    prof = full_step()
    samples = sep_sim.run_replicates(prof, kern, t, [z], m_max=0, n=N_FULL,
                                     base_seed=MEAN_SEEDS[(t, z, coupling)],
                                     coupling=coupling)
    counts = np.array([s.n_t[z] for s in samples], dtype=np.int64)
    return counts, expected_count(prof, kern, t, z)


def criterion_1() -> CriterionResult:
    """Free-walk exact oracle: empirical CDF of the independent-walk
    maximum against the product CDF, DKW at 99%."""
    kern = _kernel()
    prof = full_step()
    t = 100.0
    samples = sep_sim.run_replicates(prof, kern, t, [], m_max=0, n=N_FULL,
                                     base_seed=301, coupling="free",
                                     z_ref=0.0)
    xs = np.array([s.x_t for s in samples], dtype=float)
    from .profiles import required_left_cut
    cut = required_left_cut(prof, kern, t, 0.0, 1e-6)
    tab = transition_pmf(kern, t, 1e-14)
    suf = tab.suffix_sums()
    kmax = tab.kmax

    def tail_above(w: float) -> float:
        idx = int(math.floor(w)) + 1 + kmax
        if idx < 0:
            return 1.0
        if idx > 2 * kmax:
            return 0.0
        return float(suf[idx])

    def product_cdf(z: float) -> float:
        acc = 1.0
        for i in range(cut, 1):
            acc *= 1.0 - tail_above(z - i)
        return acc

    # Both CDFs are lattice step functions, so the sup over real z is
    # attained on the integer grid; comparing pre-jump empirical values
    # against post-jump oracle values would add the atom mass (~0.13 at
    # the mode) to the statistic regardless of n.
    srt = np.sort(xs)
    zs = np.arange(int(srt[0]) - 1, int(srt[-1]) + 2, dtype=float)
    fhat = np.searchsorted(srt, zs, side="right") / srt.size
    stat = max(abs(f - product_cdf(z)) for z, f in zip(zs, fhat))
    band = dkw_band(N_FULL, 0.01)
    return CriterionResult("free_oracle_dkw", stat <= band,
                           {"ks": stat, "band": band, "n": N_FULL, "t": t})


def criterion_2() -> CriterionResult:
    """Mean identity: empirical mean of the exceedance count against the
    exact expectation, both exclusion couplings."""
    legs = {}
    ok = True
    for t, z in ((50.0, 10.0), (200.0, 25.0)):
        for coupling in ("suppressed", "stirring"):
            counts, e_cnt = _mean_leg(t, z, coupling)
            err = abs(counts.mean() - e_cnt)
            band = 3.0 * counts.std(ddof=1) / math.sqrt(counts.size)
            legs[f"t={t:g},z={z:g},{coupling}"] = {
                "emp_mean": float(counts.mean()), "expected": e_cnt,
                "err": float(err), "band": float(band)}
            ok = ok and err < band
    return CriterionResult("mean_identity", ok, legs)


def criterion_3() -> CriterionResult:
    """Negative association: Var of the count never exceeds its mean."""
    legs = {}
    ok = True
    for t, z in ((50.0, 10.0), (200.0, 25.0)):
        for coupling in ("suppressed", "stirring"):
            counts, _ = _mean_leg(t, z, coupling)
            rep = dispersion_report(counts)
            legs[f"t={t:g},z={z:g},{coupling}"] = rep.to_dict()
            ok = ok and rep.passed
    return CriterionResult("dispersion", ok, legs)


def criterion_4() -> CriterionResult:
    """Coupling equivalence: suppressed vs stirring rightmost samples."""
    kern = _kernel()
    prof = full_step()
    t = 100.0
    n = 5000
    z0 = threshold(scaling_full(t), SIGMA, 0.0)
    xa = [s.x_t for s in sep_sim.run_replicates(
        prof, kern, t, [], m_max=0, n=n, base_seed=341,
        coupling="suppressed", z_ref=z0)]
    xb = [s.x_t for s in sep_sim.run_replicates(
        prof, kern, t, [], m_max=0, n=n, base_seed=342,
        coupling="stirring", z_ref=z0)]
    rep = ks_two_sample(xa, xb, alpha=0.01)
    return CriterionResult("coupling_equivalence", rep.passed, rep.to_dict())


def _gumbel_trends():
    ts = (1.0e2, 1.0e3, 1.0e4)
    gaps, kss = [], []
    for t in ts:
        leg = _gumbel_leg(t)
        p0 = float((leg["n0"] == 0).mean())
        gaps.append((t, abs(p0 - math.exp(-leg["e_cnt"]))))
        stat = ks_distance(EmpiricalDist.from_sample(leg["scaled_x"]),
                           lambda x: math.exp(-math.exp(-x)))
        kss.append((t, stat))
    return gaps, kss


def criterion_5() -> CriterionResult:
    """Gumbel onset: Poissonization gap and KS to the limit law, both
    expected to shrink along t-decades."""
    gaps, kss = _gumbel_trends()
    rep_a = trend_report(gaps)
    rep_b = trend_report(kss)
    return CriterionResult(
        "gumbel_trend", rep_a.passed and rep_b.passed,
        {"pzero_gaps": [[t, v] for t, v in gaps],
         "ks_to_gumbel": [[t, v] for t, v in kss],
         "a": rep_a.to_dict(), "b": rep_b.to_dict()})


def criterion_6() -> CriterionResult:
    """Numeric mean convergence to 1 at the x=0 threshold."""
    kern = _kernel()
    prof = full_step()
    errs = []
    for t in (1.0e4, 1.0e6, 1.0e8):
        z = threshold(scaling_full(t), SIGMA, 0.0)
        e = expected_count(prof, kern, t, z)
        errs.append((t, abs(e - 1.0)))
    rep = trend_report(errs)
    last_ok = errs[-1][1] < 0.15
    return CriterionResult("mean_convergence", rep.passed and last_ok,
                           {"errors": [[t, v] for t, v in errs],
                            "trend": rep.to_dict(), "final_below": 0.15})


def criterion_7() -> CriterionResult:
    """Finite-block means: fast-growing blocks against the depleted
    intensity (at x=-1) and L-scaled slow blocks against the undepleted
    one (at x=0)."""
    kern = _kernel()
    errs_a, errs_b = [], []
    law_a = limit_law("L_fast", SIGMA, 1.0, c=1.0)
    law_b = limit_law("L_slow", SIGMA, 1.0)
    x_a = -1.0
    for t in (1.0e4, 1.0e6, 1.0e8):
        l_fast = fast_regime_L(t, 1.0)
        prof_a = full_step(l_cut=l_fast)
        z = threshold(scaling_full(t), SIGMA, x_a)
        e = expected_count(prof_a, kern, t, z)
        errs_a.append((t, abs(e - law_a.lambda_x(x_a))))
        l_slow = int(t ** 0.25)
        prof_b = full_step(l_cut=l_slow)
        sc = scaling_L(t, l_slow)
        zb = threshold(sc, SIGMA, 0.0)
        eb = expected_count(prof_b, kern, t, zb)
        errs_b.append((t, abs(eb - law_b.lambda_x(0.0))))
    rep_a = trend_report(errs_a)
    rep_b = trend_report(errs_b)
    return CriterionResult(
        "finite_block_means", rep_a.passed and rep_b.passed,
        {"fast_errors": [[t, v] for t, v in errs_a],
         "slow_errors": [[t, v] for t, v in errs_b],
         "a": rep_a.to_dict(), "b": rep_b.to_dict(), "x_fast": x_a})


def criterion_8() -> CriterionResult:
    """Covariance bound decay rates, full and finite-block variants."""
    kern = _kernel()
    ts = (1.0e2, 1.0e3, 1.0e4)
    full_scaled, l_scaled = [], []
    for t in ts:
        z = threshold(scaling_full(t), SIGMA, 0.0)
        cb = covariance_bound(kern, t, z)
        full_scaled.append((t, cb.value * math.sqrt(t) / math.log(t) ** 2))
        l_blk = int(t ** 0.25)
        zl = threshold(scaling_L(t, l_blk), SIGMA, 0.0)
        cbl = covariance_bound(kern, t, zl, L=l_blk)
        l_scaled.append((t, cbl.value * l_blk / math.log(l_blk) ** 2))
    rep_full = trend_report(full_scaled, mode="bounded_ratio", factor=5.0)
    rep_l = trend_report(l_scaled, mode="bounded_ratio", factor=5.0)
    return CriterionResult(
        "covariance_rates", rep_full.passed and rep_l.passed,
        {"full_scaled": [[t, v] for t, v in full_scaled],
         "l_scaled": [[t, v] for t, v in l_scaled],
         "full": rep_full.to_dict(), "l_variant": rep_l.to_dict()})


def criterion_9() -> CriterionResult:
    """Sum-of-squares bound: brute-force occupancy check at t=100 and
    decay rate of the bound along decades."""
    kern = _kernel()
    prof = full_step()
    t0 = 100.0
    z = threshold(scaling_full(t0), SIGMA, 0.0)
    e = expected_count(prof, kern, t0, z)
    bound = sum_of_squares_bound(e, t0, z, SIGMA)
    k_lo = int(math.floor(z)) + 1
    ks = list(range(k_lo, k_lo + 160))
    means = occupancy_mean_profile(prof, kern, t0, ks)
    brute = float(np.sum(np.square(means)))
    scaled = []
    for t in (1.0e2, 1.0e3, 1.0e4):
        zt = threshold(scaling_full(t), SIGMA, 0.0)
        et = expected_count(prof, kern, t, zt)
        bt = sum_of_squares_bound(et, t, zt, SIGMA)
        scaled.append((t, bt * math.sqrt(t) / math.log(t)))
    rep = trend_report(scaled, mode="bounded_ratio", factor=5.0)
    return CriterionResult(
        "sum_of_squares", brute <= bound and rep.passed,
        {"brute": brute, "bound": bound,
         "scaled": [[t, v] for t, v in scaled], "rate": rep.to_dict()})


def _tv_to_pmf(values: np.ndarray, pmf: np.ndarray) -> float:
    kmax = max(int(values.max()), pmf.size - 1)
    emp = np.bincount(values.astype(np.int64), minlength=kmax + 1) / values.size
    ref = np.zeros(kmax + 1)
    ref[:pmf.size] = pmf
    return 0.5 * (np.abs(emp - ref).sum() + (1.0 - pmf.sum()))


def criterion_10() -> CriterionResult:
    """Zero-range stationarity package: convergence in TV from empty,
    stationarity of the product law, coupled domination, and the mean."""
    params = AsepParams(0.3)
    r = params.ratio
    pmf = mu_sum_distribution(r, 1e-10)
    mean_oracle = 1.1209
    n = N_FULL
    ts = (10.0, 50.0, 200.0)
    sums = {t: np.empty(n, dtype=np.int64) for t in ts}
    from ._rng import RngStream, DYN_ZR
    for rep in range(n):
        stream = RngStream.from_seed(361, rep, DYN_ZR)
        cfg = ZrConfig()
        for t in ts:
            cfg = evolve_zr(cfg, params, t, stream)
            sums[t][rep] = tagged_displacement(cfg)
    tvs = [(t, _tv_to_pmf(sums[t], pmf)) for t in ts]
    trend = trend_report(tvs)
    rng = np.random.default_rng(3650)
    ks_pop = np.arange(pmf.size)
    boot = np.empty(400)
    for i in range(400):
        draw = rng.choice(ks_pop, size=n, p=pmf / pmf.sum())
        boot[i] = _tv_to_pmf(draw, pmf)
    tv_thr = 0.02 + float(np.quantile(boot, 0.99))
    tv_final_ok = tvs[-1][1] <= tv_thr

    m = 10000
    cut = default_cut(r)
    sums0 = np.empty(m, dtype=np.int64)
    sums50 = np.empty(m, dtype=np.int64)
    for rep in range(m):
        cfg0 = sample_mu(r, cut, np_rng(362, rep, INIT))
        sums0[rep] = tagged_displacement(cfg0)
        cfg50 = evolve_zr(cfg0, params, 50.0,
                          RngStream.from_seed(363, rep, DYN_ZR))
        sums50[rep] = tagged_displacement(cfg50)
    stat_rep = ks_two_sample(sums0, sums50, alpha=0.01)

    dom_ok = True
    for rep in range(500):
        upper = sample_mu(r, cut, np_rng(364, rep, INIT))
        lo, hi = ZrConfig(), upper
        stream = RngStream.from_seed(365, rep, DYN_ZR)
        try:
            for t in (1.0, 10.0, 100.0):
                lo, hi = coupled_evolve(lo, hi, params, t, stream,
                                        check_every_event=True)
        except Exception:
            dom_ok = False
            break

    final = sums[200.0]
    mean_err = abs(final.mean() - mean_oracle)
    mean_band = 3.0 * final.std(ddof=1) / math.sqrt(n)
    mean_ok = mean_err < mean_band

    passed = (trend.passed and tv_final_ok and stat_rep.passed
              and dom_ok and mean_ok)
    return CriterionResult(
        "zero_range_stationarity", passed,
        {"tv": [[t, v] for t, v in tvs], "tv_threshold": tv_thr,
         "trend": trend.to_dict(), "stationarity": stat_rep.to_dict(),
         "domination_ok": dom_ok, "mean": float(final.mean()),
         "mean_err": float(mean_err), "mean_band": float(mean_band)})


def criterion_11() -> CriterionResult:
    """Local-CLT toolbox rates: shift and gradient-residual distances,
    exponential tail domination, the Gaussian mean-excess expansion, and
    the normal tail ratio."""
    kern = _kernel()
    shift_vals = []
    for t in (10.0, 1.0e2, 1.0e3):
        for y in (1, 2, 5):
            d = pmf_shift_distance(kern, t, y)
            shift_vals.append((t + y / 10.0, d * math.sqrt(t) / y))
    shift_rep = trend_report(sorted(shift_vals), mode="bounded_ratio",
                             factor=5.0)
    grad_vals = []
    for t in (10.0, 1.0e2, 1.0e3):
        g = grad_residual_distance(kern, t, 1)
        grad_vals.append((t, g * t * t))
    grad_rep = trend_report(grad_vals, mode="bounded_ratio", factor=5.0)

    chern_ok = True
    worst = -math.inf
    for t in (1.0, 10.0, 100.0):
        xmax = int(kern.sigma2 * kern.theta * t)
        for x in range(1, max(2, xmax + 1)):
            exact = tail_prob(kern, t, float(x) - 0.5, 1e-14)
            if exact <= 0.0:
                continue
            gap = math.log(exact) - chernoff_log_tail(kern, t, float(x))
            worst = max(worst, gap) if worst > -math.inf else gap
            if gap > 1e-12:
                chern_ok = False

    # |f(u) - phi(u)/u^2| <= K*phi(u)/u^4 on [2,8]: the fitted K is the
    # max of the scaled error; passes when one modest K covers the window
    # (the u -> inf coefficient is 3).
    us = np.linspace(2.0, 8.0, 121)
    phi = np.exp(-us * us / 2.0) / math.sqrt(2.0 * math.pi)
    err = np.array([gaussian_mean_excess(u) for u in us]) - phi / us ** 2
    k_fit = float((np.abs(err) * us ** 4 / phi).max())
    excess_ok = k_fit <= 5.0

    ratio_vals = []
    for t in (1.0e2, 1.0e3, 1.0e4):
        ratio_vals.append((t, normal_tail_ratio_error(kern, t, 0.5)))
    ratio_rep = trend_report(ratio_vals)

    passed = (shift_rep.passed and grad_rep.passed and chern_ok
              and excess_ok and ratio_rep.passed)
    return CriterionResult(
        "clt_toolbox_rates", passed,
        {"shift_scaled": [[t, v] for t, v in shift_vals],
         "shift": shift_rep.to_dict(),
         "grad_scaled": [[t, v] for t, v in grad_vals],
         "grad": grad_rep.to_dict(), "chernoff_dominates": chern_ok,
         "chernoff_worst_gap": worst, "mean_excess_constant": k_fit,
         "tail_ratio": [[t, v] for t, v in ratio_vals],
         "tail_ratio_trend": ratio_rep.to_dict()})


def criterion_12() -> CriterionResult:
    """Order statistics: the second-rightmost particle against its limit
    CDF across two decades, plus the exact count identity per replicate."""
    law = limit_law("full", SIGMA, 1.0)

    def cdf_m1(x: float) -> float:
        return order_stat_limit_cdf(1, x, law)

    kss = {}
    bad = 0
    for t in (1.0e2, 1.0e4):
        leg = _gumbel_leg(t)
        kss[t] = ks_distance(EmpiricalDist.from_sample(leg["scaled_x1"]),
                             cdf_m1)
        bad += leg["consistency_bad"]
    bad += _gumbel_leg(1.0e3)["consistency_bad"]
    closer = kss[1.0e4] < kss[1.0e2]
    consistent = bad == 0
    return CriterionResult(
        "order_statistics", closer and consistent,
        {"ks_t1e2": kss[1.0e2], "ks_t1e4": kss[1.0e4],
         "limit_closer_at_1e4": closer, "consistency_violations": bad})


CRITERIA = {i: fn for i, fn in enumerate(
    (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
     criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
     criterion_11, criterion_12), start=1)}


def run_criteria(numbers=None):
    """Run the requested criteria (all by default) in ascending order."""
    nums = sorted(numbers) if numbers else sorted(CRITERIA)
    out = []
    for i in nums:
        if i not in CRITERIA:
            raise ValueError(f"no criterion {i}")
        out.append((i, CRITERIA[i]()))
    return out
