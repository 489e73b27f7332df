"""Statistical tests confronting simulation output with exact or limit laws.

Everything here is pure over immutable sample arrays and deterministic:
bootstrap resamples derive their generators from an explicit seed, so a
report is reproducible bit for bit. Reports carry the statistic and the
threshold it was compared against; `passed` always means
statistic <= threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats as sstats

from .sep_sim import SiteSnapshot


class SampleTooSmall(ValueError):
    """Fewer observations than the test's validity floor."""


class WindowMismatch(ValueError):
    """Snapshots with differing or insufficient site windows."""


@dataclass(frozen=True)
class EmpiricalDist:
    """Sorted sample with optional nonnegative weights."""

    values: np.ndarray
    n: int
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("need a nonempty 1-d sample")
        if np.any(np.diff(v) < 0):
            raise ValueError("values must be sorted")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "n", int(self.n))
        if self.n != v.size:
            raise ValueError("n must match the number of values")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != v.shape or np.any(w < 0) or w.sum() <= 0:
                raise ValueError("weights must be nonnegative, same shape")
            object.__setattr__(self, "weights", w)

    @classmethod
    def from_sample(cls, sample) -> "EmpiricalDist":
        v = np.sort(np.asarray(sample, dtype=float))
        return cls(v, v.size)

    def cdf_steps(self):
        """Right-continuous CDF values after each sorted point, plus the
        left limits before each point."""
        if self.weights is None:
            upper = np.arange(1, self.n + 1) / self.n
        else:
            upper = np.cumsum(self.weights) / self.weights.sum()
        lower = np.concatenate(([0.0], upper[:-1]))
        return lower, upper


@dataclass(frozen=True)
class TestReport:
    """Outcome of one statistical check; passed iff statistic <= threshold."""

    statistic: float
    threshold: float
    passed: bool
    n: int
    method: str
    confidence: Optional[float] = None

    def __post_init__(self):
        if self.passed != (self.statistic <= self.threshold):
            raise ValueError("passed must equal statistic <= threshold")

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "threshold": self.threshold,
                "passed": self.passed, "n": self.n, "method": self.method,
                "confidence": self.confidence}


@dataclass(frozen=True)
class EstimateWithCI:
    """Point estimate with a central bootstrap confidence interval."""

    value: float
    ci_low: float
    ci_high: float
    n: int
    confidence: float


def _resample_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng((int(seed), int(i)))


def dkw_band(n: int, alpha: float = 0.01) -> float:
    """Two-sided DKW envelope half-width for an n-point empirical CDF."""
    if n < 1:
        raise ValueError("n must be positive")
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def ks_distance(emp: EmpiricalDist, cdf: Callable[[float], float]) -> float:
    """sup_x |F_hat(x) - F(x)| over the sample, both one-sided jumps.

    With ties in the sample the upper jump is taken at the last repeat
    and the lower jump at the first, which reproduces the exact supremum
    for purely atomic empirical CDFs.
    """
    f = np.array([float(cdf(v)) for v in emp.values])
    lower, upper = emp.cdf_steps()
    return float(max((upper - f).max(), (f - lower).max()))


def ks_two_sample(a, b, alpha: float = 0.01) -> TestReport:
    """Two-sample KS with the asymptotic critical value at level alpha."""
    sa = np.sort(np.asarray(a, dtype=float))
    sb = np.sort(np.asarray(b, dtype=float))
    n, m = sa.size, sb.size
    if n == 0 or m == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.unique(np.concatenate([sa, sb]))
    fa = np.searchsorted(sa, grid, side="right") / n
    fb = np.searchsorted(sb, grid, side="right") / m
    stat = float(np.abs(fa - fb).max())
    coeff = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    crit = coeff * math.sqrt((n + m) / (n * m))
    return TestReport(stat, crit, stat <= crit, n + m,
                      "ks_two_sample", 1.0 - alpha)


def dispersion_report(counts: Sequence[int], *, bootstrap: int = 1000,
                      seed: int = 0, confidence: float = 0.99) -> TestReport:
    """One-sided bootstrap test of Var(N) <= mean(N).

    The statistic is the low quantile of the bootstrapped Var - mean at
    the requested confidence; the inequality is rejected only when even
    that lower bound stays positive.
    """
    c = np.asarray(counts, dtype=float)
    if c.size < 100:
        raise SampleTooSmall(f"need at least 100 counts, got {c.size}")
    diffs = np.empty(bootstrap)
    for i in range(bootstrap):
        rng = _resample_rng(seed, i)
        idx = rng.integers(0, c.size, c.size)
        s = c[idx]
        diffs[i] = s.var() - s.mean()
    stat = float(np.quantile(diffs, 1.0 - confidence))
    return TestReport(stat, 0.0, stat <= 0.0, c.size,
                      "dispersion_bootstrap", confidence)


def _tv_to_poisson(c: np.ndarray, lam: float) -> float:
    kmax = int(c.max())
    emp = np.bincount(c.astype(np.int64), minlength=kmax + 1) / c.size
    pois = sstats.poisson.pmf(np.arange(kmax + 1), lam)
    return 0.5 * (np.abs(emp - pois).sum() + (1.0 - pois.sum()))


def poisson_fit(counts: Sequence[int], lam: float, *, bootstrap: int = 1000,
                seed: int = 0, confidence: float = 0.99) -> TestReport:
    """Total-variation fit of integer counts against Poisson(lam).

    The pass threshold is the `confidence` quantile of the TV statistic
    under parametric resampling from Poisson(lam) at the same n, so the
    test stays calibrated when lam is small and chi-square cells break.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    c = np.asarray(counts)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("need a nonempty 1-d count sample")
    if np.any(c < 0):
        raise ValueError("counts must be nonnegative")
    stat = float(_tv_to_poisson(c, lam))
    tvs = np.empty(bootstrap)
    for i in range(bootstrap):
        rng = _resample_rng(seed, i)
        tvs[i] = _tv_to_poisson(rng.poisson(lam, c.size), lam)
    thr = float(np.quantile(tvs, confidence))
    return TestReport(stat, thr, stat <= thr, c.size,
                      "poisson_tv_bootstrap", confidence)


def empirical_cov_sum(snapshots: Sequence[SiteSnapshot], z: float, *,
                      bootstrap: int = 1000, seed: int = 0,
                      confidence: float = 0.99) -> EstimateWithCI:
    """Plug-in estimate of the negated cross-covariance sum above z.

    Computes sum_k Var(eta(k)) - Var(N) over sites k > z from occupancy
    snapshots, which equals -sum_{j != k > z} Cov(eta(j), eta(k)) and is
    expected nonnegative for exclusion fields. The CI is a central
    bootstrap interval over replicates.
    """
    if len(snapshots) < 1000:
        raise SampleTooSmall(f"need at least 1000 snapshots, "
                             f"got {len(snapshots)}")
    first = snapshots[0]
    lo, hi = first.lo, first.hi
    for s in snapshots:
        if s.lo != lo or s.hi != hi:
            raise WindowMismatch("snapshots must share one site window")
    if z < lo - 1:
        raise WindowMismatch(f"window [{lo}, {hi}] does not reach down "
                             f"to threshold {z}")
    start = int(math.floor(z)) + 1 - lo  # first site index strictly above z
    if start < 0:
        start = 0
    occ = np.stack([s.bits for s in snapshots]).astype(np.float64)[:, start:]
    n = occ.shape[0]

    def estimate(mat: np.ndarray) -> float:
        site_var = mat.var(axis=0).sum()
        tot_var = mat.sum(axis=1).var()
        return float(site_var - tot_var)

    val = estimate(occ)
    boots = np.empty(bootstrap)
    for i in range(bootstrap):
        rng = _resample_rng(seed, i)
        boots[i] = estimate(occ[rng.integers(0, n, n)])
    half = (1.0 - confidence) / 2.0
    return EstimateWithCI(val, float(np.quantile(boots, half)),
                          float(np.quantile(boots, 1.0 - half)),
                          n, confidence)


def trend_report(values: Sequence, *, mode: str = "decreasing",
                 factor: Optional[float] = None) -> TestReport:
    """Monotonicity or boundedness check over (t, metric) points.

    mode="decreasing": pass iff the metric strictly decreases across
    consecutive points (ties fail). mode="bounded_ratio": pass iff
    max/min of the metrics is at most `factor`; metrics must then be
    positive.
    """
    pts = [(float(t), float(m)) for t, m in values]
    if len(pts) < 2:
        raise ValueError("need at least 2 points")
    ts = [t for t, _ in pts]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("t must be strictly increasing")
    ms = np.array([m for _, m in pts])
    if mode == "decreasing":
        stat = float(np.diff(ms).max())
        if stat == 0.0:
            stat = np.finfo(float).tiny  # a tie is not a strict decrease
        return TestReport(stat, 0.0, stat <= 0.0, len(pts),
                          "strict_decrease")
    if mode == "bounded_ratio":
        if factor is None:
            raise ValueError("bounded_ratio mode needs a factor")
        stat = float(ms.max() / ms.min()) if ms.min() > 0 else math.inf
        return TestReport(stat, float(factor), stat <= float(factor),
                          len(pts), "bounded_ratio")
    raise ValueError(f"unknown mode {mode!r}")
