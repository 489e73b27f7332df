"""Closed-form predictions for the rightmost exclusion particle.

Centering/scaling pairs, Gumbel and Poisson limit laws, the exact
exceedance mean

    E[N_t(z)] = sum_{i <= 0} rho_i P_i(xi_t > z),

its Gaussian mean-excess surrogate, the exceedance covariance upper
bound evaluated by quadrature, and the sum-of-squares smallness
certificate. Everything here is deterministic numerics; simulation lives
in sep_sim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .profiles import StepProfile
from .walk_kernel import (JumpKernel, OutOfChernoffRange, chernoff_log_tail,
                          gaussian_mean_excess, transition_pmf)


class TimeTooSmall(ValueError):
    """t <= e, where log t <= 1 makes the centering meaningless."""


class LTooSmall(ValueError):
    """L < 2, where log L^2 is not positive."""


class MissingC(ValueError):
    """Fast-regime law requested without its speed constant c."""


class InfiniteRangeUnsupported(ValueError):
    """Covariance bound is evaluated for finite-range kernels only."""


REGIME_FULL = "full"
REGIME_L_FAST = "L_fast"
REGIME_L_SLOW = "L_slow"


@dataclass(frozen=True)
class ScalingPair:
    """Centering a_t and scale b_t for one regime at one time."""

    a_t: float
    b_t: float
    regime: str
    t: float
    L: int | None = None

    def __post_init__(self):
        if self.b_t <= 0:
            raise ValueError("b_t must be positive")
        if self.regime == REGIME_L_SLOW and (self.L is None or self.L < 2):
            raise LTooSmall("slow regime needs L >= 2")


@dataclass(frozen=True)
class LimitLaw:
    """Limiting law through its rate function lambda_x.

    The scaled rightmost particle converges to the Gumbel-type CDF
    exp(-lambda_x(x)); the exceedance count converges to
    Poisson(lambda_x(x)). lambda_x is positive and strictly decreasing.
    """

    kind: str  # "gumbel" or "poisson"
    sigma: float
    rho_bar: float
    c: float | None = None
    regime: str = REGIME_FULL

    def lambda_x(self, x: float) -> float:
        if self.regime == REGIME_FULL:
            return self.sigma * self.rho_bar * math.exp(-x)
        if self.regime == REGIME_L_FAST:
            damp = 1.0 - math.exp(-self.c / self.sigma)
            return self.sigma * self.rho_bar * damp * math.exp(-x)
        return self.rho_bar * math.exp(-x)

    def cdf(self, x: float) -> float:
        return math.exp(-self.lambda_x(x))


def scaling_full(t: float) -> ScalingPair:
    """a_t = log(t / (sqrt(2 pi) log t)), b_t = sqrt(t / log t); needs t > e."""
    if t <= math.e:
        raise TimeTooSmall(f"t = {t} <= e")
    lg = math.log(t)
    return ScalingPair(a_t=math.log(t / (math.sqrt(2.0 * math.pi) * lg)),
                       b_t=math.sqrt(t / lg), regime=REGIME_FULL, t=float(t))


def scaling_L(t: float, L: int) -> ScalingPair:
    """a = log(L^2 / sqrt(2 pi log L^2)), b = sqrt(t / log L^2); needs L >= 2."""
    if L < 2:
        raise LTooSmall(f"L = {L}")
    if t <= 0:
        raise ValueError("t must be positive")
    lg = math.log(float(L) * L)
    return ScalingPair(a_t=math.log(L * L / math.sqrt(2.0 * math.pi * lg)),
                       b_t=math.sqrt(t / lg), regime=REGIME_L_SLOW,
                       t=float(t), L=int(L))


def fast_regime_L(t: float, c: float = 1.0) -> int:
    """L(t) = ceil(c * sqrt(t / log t)) realizing speed constant c (rounded up)."""
    if t <= math.e:
        raise TimeTooSmall(f"t = {t} <= e")
    return int(math.ceil(c * math.sqrt(t / math.log(t))))


def threshold(scaling: ScalingPair, sigma: float, x: float) -> float:
    """Real threshold z = sigma * b_t * (x + a_t)."""
    return sigma * scaling.b_t * (x + scaling.a_t)


def scaled_position(x_t: float, scaling: ScalingPair, sigma: float) -> float:
    """Inverse of threshold: X_t / (sigma b_t) - a_t."""
    if scaling.b_t <= 0:
        raise ValueError("b_t must be positive")
    return x_t / (sigma * scaling.b_t) - scaling.a_t


def limit_law(regime: str, sigma: float, rho_bar: float, c: float | None = None) -> LimitLaw:
    """Limit law for the scaled rightmost particle in the given regime.

    full:   exp(-sigma rho_bar e^{-x})
    L_fast: exp(-sigma rho_bar (1 - e^{-c/sigma}) e^{-x}), c in (0, inf)
    L_slow: exp(-rho_bar e^{-x})
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if not (0.0 < rho_bar <= 1.0):
        raise ValueError("rho_bar must be in (0, 1]")
    if regime == REGIME_L_FAST:
        if c is None:
            raise MissingC("fast regime requires c")
        if c <= 0:
            raise ValueError("c must be positive")
    elif regime not in (REGIME_FULL, REGIME_L_SLOW):
        raise ValueError(f"unknown regime {regime!r}")
    return LimitLaw(kind="gumbel", sigma=float(sigma), rho_bar=float(rho_bar),
                    c=None if c is None else float(c), regime=regime)


def order_stat_limit_cdf(m: int, x: float, law: LimitLaw) -> float:
    """Limit CDF of the m-th rightmost particle: Poisson(lambda_x) CDF at m."""
    if m < 0:
        raise ValueError("m must be >= 0")
    lam = law.lambda_x(x)
    term = math.exp(-lam)
    total = term
    for k in range(1, m + 1):
        term *= lam / k
        total += term
    return min(total, 1.0)


def _tail_depth(kernel: JumpKernel, t: float, z: float, eps: float) -> int:
    """Depth D with sum_{i < -D} P_i(xi_t > z) < eps, via the geometric
    exponential-moment bound at rate lam(D) = (z + D)/(sigma^2 t)."""
    D = 1
    while True:
        x = z + D
        if x > 0:
            try:
                head = chernoff_log_tail(kernel, t, x)
            except OutOfChernoffRange:
                # Window exhausted: anything this deep is already far
                # below every budget used here; certify at the edge.
                head = chernoff_log_tail(kernel, t, kernel.sigma2 * kernel.theta * t)
            lam = min(x / (kernel.sigma2 * t), kernel.theta)
            if math.exp(head) / math.expm1(lam) < eps:
                return D
        D = int(D * 1.5) + 1


def expected_count(profile: StepProfile, kernel: JumpKernel, t: float,
                   z: float, eps: float = 1e-9) -> float:
    """Exact exceedance mean sum_{i <= 0} rho_i P_0(xi_t > z - i), within eps.

    The sum runs over [-L, 0] for truncated profiles and to a certified
    exponential-tail depth otherwise; the pmf-table budget is split so the
    total numeric error stays below eps.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if profile.l_cut is not None:
        depth = profile.l_cut
    else:
        depth = _tail_depth(kernel, t, z, eps / 2.0)
    eps_pmf = eps / (2.0 * (depth + 2))
    table = transition_pmf(kernel, t, eps_pmf)
    suffix = np.concatenate([table.suffix_sums(), [0.0]])
    sites = np.arange(-depth, 1)
    w = np.floor(z - sites).astype(np.int64) + 1  # P(xi > z - i) = suffix[w]
    idx = np.clip(w + table.kmax, 0, 2 * table.kmax + 1)
    rho = np.array([profile.density(int(i)) for i in sites])
    return float((rho * suffix[idx]).sum())


@dataclass(frozen=True)
class MeanAsymptote:
    """Gaussian surrogate for the exceedance mean and its limit constant."""

    surrogate: float
    limit: float


def mean_excess_asymptote(scaling: ScalingPair, sigma: float, rho_bar: float,
                          x: float, regime: str, c: float | None = None) -> MeanAsymptote:
    """Surrogate rho_bar * sigma sqrt(t) [f(z/(sigma sqrt t)) - f((L+z)/(sigma sqrt t))]
    with f the Gaussian mean-excess; the second term drops when L is absent
    (full profile). Also returns the regime's limit constant for the mean.
    """
    law = limit_law(regime, sigma, rho_bar, c)
    z = threshold(scaling, sigma, x)
    st = sigma * math.sqrt(scaling.t)
    value = gaussian_mean_excess(z / st)
    if scaling.L is not None:
        value -= gaussian_mean_excess((scaling.L + z) / st)
    return MeanAsymptote(surrogate=rho_bar * st * value, limit=law.lambda_x(x))


@dataclass(frozen=True)
class CovarianceBound:
    """Quadrature value of the exceedance covariance upper bound."""

    value: float
    resolution: float  # |full grid - half grid|, a quadrature error proxy
    nodes: int


def _s_grid(t: float, n_nodes: int) -> np.ndarray:
    """Double-ended log-refined grid on [0, t] including exact endpoints."""
    half = max(n_nodes // 2, 8)
    inner = np.geomspace(t * 1e-7, t / 2.0, half)
    left = np.concatenate([[0.0], inner])
    right = (t - left)[::-1]
    return np.unique(np.concatenate([left, right]))


def covariance_bound(kernel: JumpKernel, t: float, z: float,
                     L: int | None = None, quad_step: int = 240) -> CovarianceBound:
    """Upper bound for the summed exceedance covariances, evaluated numerically:

        2 sum_{i>=1} i^2 p_i sum_k int_0^t P_0(xi_s = k)^2
                                      P_0(xi_{t-s} > z - k - i)^2 ds,

    with P_0(xi_s = k)^2 replaced by [P_0(xi_s=k) - P_0(xi_s=k+L+1)]^2 for
    the L-truncated variant. quad_step is the node count of the log-refined
    trapezoid grid; the reported resolution is the change when the grid is
    halved. Finite-range kernels only.
    """
    if not kernel.is_finite_range:
        raise InfiniteRangeUnsupported("finite-range kernels only")
    if t <= 0:
        raise ValueError("t must be positive")
    nodes = _s_grid(t, max(int(quad_step), 32))
    eps = 1e-12

    tables = {}

    def table(s):
        if s not in tables:
            tables[s] = transition_pmf(kernel, s, eps)
        return tables[s]

    def integrand(s: float) -> float:
        pa = table(s)
        pb = table(t - s)
        probs = pa.array()
        if L is not None:
            shifted = np.zeros_like(probs)
            if L + 1 < len(probs):
                shifted[:len(probs) - (L + 1)] = probs[L + 1:]
            sq = (probs - shifted) ** 2
        else:
            sq = probs ** 2
        suffix = np.concatenate([pb.suffix_sums(), [0.0]])
        ks = np.arange(-pa.kmax, pa.kmax + 1)
        total = 0.0
        for i, p_i in zip(kernel.support, kernel.probs):
            w = np.floor(z - ks).astype(np.int64) + 1 - i
            idx = np.clip(w + pb.kmax, 0, 2 * pb.kmax + 1)
            tails = suffix[idx]
            total += 2.0 * i * i * p_i * float((sq * tails * tails).sum())
        return total

    values = np.array([integrand(s) for s in nodes])
    full = float(np.trapezoid(values, nodes))
    half = float(np.trapezoid(values[::2], nodes[::2]))
    return CovarianceBound(value=full, resolution=abs(full - half),
                           nodes=len(nodes))


def sum_of_squares_bound(expected_count_value: float, t: float, z: float,
                         sigma: float) -> float:
    """Smallness certificate exp(-z^2 / (2 sigma^2 t)) * E[N_t]."""
    return math.exp(-z * z / (2.0 * sigma * sigma * t)) * expected_count_value


def occupancy_mean_profile(profile: StepProfile, kernel: JumpKernel, t: float,
                           ks: np.ndarray, eps: float = 1e-10) -> np.ndarray:
    """Exact site means E[eta_t(k)] = sum_{i <= 0} rho_i P_0(xi_t = k - i).

    Computed from one pmf table; the left sum is truncated where the
    remaining mass cannot reach min(ks) - kmax, which is exact within the
    table's own eps.
    """
    table = transition_pmf(kernel, t, eps)
    probs = table.array()
    out = np.zeros(len(ks), dtype=float)
    for j, k in enumerate(np.asarray(ks, dtype=np.int64)):
        # density lives on i <= 0, the pmf on |k - i| <= kmax
        acc = 0.0
        for i in range(min(0, int(k) + table.kmax), -10**9, -1):
            d = int(k) - i + table.kmax
            if d > 2 * table.kmax:
                break
            acc += profile.density(i) * probs[d]
        out[j] = acc
    return out
