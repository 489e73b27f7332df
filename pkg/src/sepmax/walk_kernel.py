"""Exact and asymptotic numerics for a continuous-time symmetric random walk on Z.

The walk xi_t takes jumps at rate 1; each jump has displacement i with
probability p_i, where p_i = p_{-i}. Everything downstream (exclusion
process means, covariance bounds, extreme-value thresholds) is built on
the transition probabilities P_0(xi_t = k) computed here.

The pmf is computed exactly through the compound-Poisson decomposition:
thinning the rate-1 jump process by displacement splits it into
independent Poisson streams, so

    xi_t = sum_{i >= 1} i * D_i,   D_i ~ Skellam(t*p_i, t*p_i) independent,

and Skellam(mu, mu) has pmf exp(-2mu) I_k(2mu), a scaled modified Bessel
function that scipy evaluates stably at any scale. Each component is
truncated with a certified tail budget, so the table's total dropped mass
is below the requested eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erfc, ive


class NonNormalized(ValueError):
    """Jump probabilities do not sum to 1."""


class AsymmetricInput(ValueError):
    """Conflicting probabilities supplied for +i and -i."""


class InfiniteMgf(ValueError):
    """exp(theta*i)-moment not certifiably finite for the given theta."""


class EmptySupport(ValueError):
    """No offsets with positive probability."""


class TimeNegative(ValueError):
    """Negative time passed where t >= 0 is required."""


class TruncationBudgetExceeded(RuntimeError):
    """Requested eps is not achievable within the memory cap."""


class OutOfChernoffRange(ValueError):
    """x > sigma^2 * theta * t, outside the certified exponential window."""


# Hard cap on pmf support entries per component; beyond this the requested
# eps cannot be certified without exhausting memory.
_SUPPORT_CAP = 1 << 25


@dataclass(frozen=True)
class JumpKernel:
    """Symmetric jump law {p_i} with certified exponential moments.

    Attributes
    ----------
    support : tuple of int
        Positive offsets i with p_i > 0 (the negative side is implied).
    probs : tuple of float
        p_i for each positive offset; p_{-i} = p_i.
    sigma2 : float
        Variance of a single jump, sum_i i^2 p_i over both signs.
    theta : float
        Radius with sum_i exp(theta*i) p_i < infinity, certified.
    is_finite_range : bool
        False when the kernel was built from a geometric tail envelope.
    range : int
        Largest stored |offset|.
    """

    support: tuple
    probs: tuple
    sigma2: float
    theta: float
    is_finite_range: bool
    range: int

    def __post_init__(self):
        total = 2.0 * sum(self.probs)
        if abs(total - 1.0) > 1e-12:
            raise NonNormalized(f"total mass {total}")
        s2 = 2.0 * sum(i * i * p for i, p in zip(self.support, self.probs))
        if abs(s2 - self.sigma2) > 1e-12 * max(1.0, s2):
            raise NonNormalized(f"sigma2 mismatch: {s2} vs {self.sigma2}")

    def mgf_exponent(self, lam: float) -> float:
        """M(lam) - 1 = sum_i p_i (e^{lam i} - 1), the log-mgf of xi_1."""
        return sum(2.0 * p * (math.cosh(lam * i) - 1.0)
                   for i, p in zip(self.support, self.probs))

    def cum_probs(self) -> np.ndarray:
        """Cumulative law over signed offsets, ordered (-i ... +i)."""
        offs, probs = self.signed()
        return np.cumsum(probs)

    def signed(self):
        """Signed offsets (ascending) and their probabilities."""
        neg = [(-i, p) for i, p in zip(self.support, self.probs)]
        pos = list(zip(self.support, self.probs))
        both = sorted(neg + pos)
        offs = np.array([o for o, _ in both], dtype=np.int64)
        probs = np.array([p for _, p in both], dtype=np.float64)
        return offs, probs


def build_kernel(offsets_probs, theta, tail_envelope=None) -> JumpKernel:
    """Validate and build a symmetric jump kernel.

    Parameters
    ----------
    offsets_probs : list of (offset, prob)
        One side of the law. Offsets are nonzero integers; supplying an
        offset with both signs is allowed only if the probabilities agree
        (symmetric closure is taken automatically). Total mass over both
        signs must be 1 within 1e-9.
    theta : float
        Positive exponential-moment radius to certify.
    tail_envelope : (A, r), optional
        Geometric envelope p_i <= A * r^|i| certifying an infinite-range
        law; the stored support is then the supplied explicit head and the
        kernel is marked infinite-range. Requires exp(theta)*r < 1.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    if not offsets_probs:
        raise EmptySupport("no offsets supplied")
    by_abs = {}
    for off, p in offsets_probs:
        if not isinstance(off, (int, np.integer)) or off == 0:
            raise ValueError(f"offset must be a nonzero integer, got {off!r}")
        if p < 0:
            raise ValueError(f"negative probability {p} at offset {off}")
        key = abs(int(off))
        if key in by_abs:
            prev_off, prev_p = by_abs[key]
            if prev_off == off:
                raise ValueError(f"offset {off} supplied twice")
            if abs(prev_p - p) > 1e-12:
                raise AsymmetricInput(
                    f"p({off}) = {p} conflicts with p({prev_off}) = {prev_p}")
        else:
            by_abs[key] = (int(off), float(p))
    items = sorted((k, p) for k, (_, p) in by_abs.items() if p > 0)
    if not items:
        raise EmptySupport("all probabilities are zero")
    support = tuple(k for k, _ in items)
    probs = tuple(p for _, p in items)
    total = 2.0 * sum(probs)
    if abs(total - 1.0) > 1e-9:
        raise NonNormalized(f"total mass {total}")
    # Rescale the residual 1e-9 slack so stored probs sum exactly to 1/2
    # per side; keeps downstream certifications clean.
    probs = tuple(p / total for p in probs)
    sigma2 = 2.0 * sum(i * i * p for i, p in zip(support, probs))
    is_finite = tail_envelope is None
    if tail_envelope is not None:
        A, r = tail_envelope
        if not (0 < r < 1 and A > 0):
            raise ValueError("tail envelope needs A > 0 and 0 < r < 1")
        if math.exp(theta) * r >= 1.0:
            raise InfiniteMgf(
                f"exp(theta)*r = {math.exp(theta) * r} >= 1; "
                "exponential moment not certified")
        for i, p in zip(support, probs):
            if p > A * r ** i * (1 + 1e-9):
                raise InfiniteMgf(f"p({i}) = {p} violates envelope A*r^i")
    return JumpKernel(support=support, probs=probs, sigma2=sigma2,
                      theta=float(theta), is_finite_range=is_finite,
                      range=support[-1])


def nearest_neighbor(theta: float = 1.0) -> JumpKernel:
    """p_{+1} = p_{-1} = 1/2, the reference kernel with sigma^2 = 1."""
    return build_kernel([(1, 0.5)], theta)


@dataclass(frozen=True)
class PmfTable:
    """Transition law P_0(xi_t = k) on a certified finite window.

    values is exposed as a mapping-style interface (prob / items); the
    underlying storage is a dense array over [-kmax, kmax]. Total mass is
    in [1 - eps, 1] and the table is symmetric in k.
    """

    t: float
    eps: float
    kmax: int
    _probs: np.ndarray  # length 2*kmax + 1, index k + kmax

    def prob(self, k: int) -> float:
        """P_0(xi_t = k); zero outside the stored window."""
        idx = k + self.kmax
        if 0 <= idx <= 2 * self.kmax:
            return float(self._probs[idx])
        return 0.0

    def __getitem__(self, k):
        return self.prob(k)

    def items(self):
        for idx, p in enumerate(self._probs):
            yield idx - self.kmax, float(p)

    def support(self) -> np.ndarray:
        return np.arange(-self.kmax, self.kmax + 1)

    def array(self) -> np.ndarray:
        """Dense probabilities over support(), read-only view."""
        return self._probs

    def mass(self) -> float:
        return float(self._probs.sum())

    def suffix_sums(self) -> np.ndarray:
        """S[idx] = P(xi_t >= idx - kmax) over the stored window."""
        return np.cumsum(self._probs[::-1])[::-1]

    def tail_above(self, z: float) -> float:
        """P(xi_t > z), strict integer comparison against the real z."""
        k0 = math.floor(z) + 1  # smallest integer strictly above z
        if k0 > self.kmax:
            return 0.0
        if k0 < -self.kmax:
            return self.mass()
        return float(self._probs[k0 + self.kmax:].sum())


def _skellam_component(mu: float, eps: float):
    """pmf of Skellam(mu, mu) on [-D, D] with 1 - mass < eps."""
    if mu == 0.0:
        return np.array([1.0])
    D = int(math.ceil(8.0 * math.sqrt(2.0 * mu + 1.0))) + 60
    while True:
        if 2 * D + 1 > _SUPPORT_CAP:
            raise TruncationBudgetExceeded(
                f"component support {2 * D + 1} exceeds cap")
        ks = np.arange(-D, D + 1)
        vals = ive(np.abs(ks), 2.0 * mu)
        deficit = 1.0 - vals.sum()
        if deficit < eps:
            return vals
        D = int(D * 1.6) + 16


def _dilate(arr: np.ndarray, stride: int) -> np.ndarray:
    if stride == 1:
        return arr
    out = np.zeros((len(arr) - 1) * stride + 1)
    out[::stride] = arr
    return out


def transition_pmf(kernel: JumpKernel, t: float, eps: float = 1e-10) -> PmfTable:
    """Certified table of P_0(xi_t = k).

    Equals the Poissonization series sum_n e^{-t} t^n / n! * p^{*n}(k)
    with total dropped mass below eps (one tail truncation per Skellam
    component, budget eps split evenly).

    Raises TimeNegative for t < 0 and TruncationBudgetExceeded when the
    requested eps needs more support than the memory cap allows.
    """
    if t < 0:
        raise TimeNegative(f"t = {t}")
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must be in (0, 1)")
    if t == 0.0:
        return PmfTable(t=0.0, eps=0.0, kmax=0, _probs=np.array([1.0]))
    comps = [(i, _skellam_component(t * p, eps / (2.0 * len(kernel.support))))
             for i, p in zip(kernel.support, kernel.probs)]
    acc = _dilate(comps[0][1], comps[0][0])
    for i, comp in comps[1:]:
        other = _dilate(comp, i)
        if len(acc) * len(other) <= 40_000_000:
            acc = np.convolve(acc, other)
        else:
            # FFT path for very wide tables; clip the ~1e-16-level noise.
            from scipy.signal import fftconvolve
            acc = fftconvolve(acc, other)
            np.clip(acc, 0.0, None, out=acc)
        if len(acc) > _SUPPORT_CAP:
            raise TruncationBudgetExceeded(f"support {len(acc)} exceeds cap")
    kmax = (len(acc) - 1) // 2
    mass = acc.sum()
    if 1.0 - mass > eps:
        raise TruncationBudgetExceeded(
            f"mass deficit {1.0 - mass} exceeds eps = {eps}")
    # Exact symmetry: components are symmetric, so enforce it against the
    # last floating bits of the convolution.
    acc = 0.5 * (acc + acc[::-1])
    return PmfTable(t=float(t), eps=float(eps), kmax=kmax, _probs=acc)


@lru_cache(maxsize=64)
def _cached_pmf(kernel: JumpKernel, t: float, eps: float) -> PmfTable:
    return transition_pmf(kernel, t, eps)


def tail_prob(kernel: JumpKernel, t: float, z: float, eps: float = 1e-10) -> float:
    """P_0(xi_t > z) within eps; z is real, the comparison is strict.

    Translation gives P_i(xi_t > w) = P_0(xi_t > w - i), so callers shift
    z rather than the start site.
    """
    if t < 0:
        raise TimeNegative(f"t = {t}")
    if t == 0.0:
        return 1.0 if z < 0 else 0.0
    return _cached_pmf(kernel, float(t), float(eps)).tail_above(z)


def chernoff_log_tail(kernel: JumpKernel, t: float, x: float) -> float:
    """Certified upper bound for log P(xi_t >= x), x in [0, sigma^2*theta*t].

    Exponential Markov at lam = x / (sigma^2 t):

        log P(xi_t >= x) <= -lam*x + t*(M(lam) - 1),

    where M(lam) - 1 = sum_i p_i (e^{lam i} - 1) is the log-mgf of xi_1
    (the time-1 value of the walk, not of a single jump). For x of order
    sigma*sqrt(t) the bound is -x^2/(2 sigma^2 t) + O(x^4/t^3).
    """
    if x < 0:
        raise ValueError("x must be nonnegative")
    if t < 0:
        raise TimeNegative(f"t = {t}")
    if x == 0.0:
        return 0.0
    if t == 0.0 or x > kernel.sigma2 * kernel.theta * t:
        raise OutOfChernoffRange(
            f"x = {x} beyond sigma^2*theta*t = {kernel.sigma2 * kernel.theta * t}")
    lam = x / (kernel.sigma2 * t)
    return -lam * x + t * kernel.mgf_exponent(lam)


def local_clt_density(kernel: JumpKernel, t: float, x: float) -> float:
    """Gaussian comparator f_t(x) = (2 pi sigma^2 t)^{-1/2} e^{-x^2/(2 sigma^2 t)}."""
    if t <= 0:
        raise ValueError("t must be positive")
    s2t = kernel.sigma2 * t
    return math.exp(-x * x / (2.0 * s2t)) / math.sqrt(2.0 * math.pi * s2t)


def local_clt_window(kernel: JumpKernel, t: float) -> int:
    """|x| range on which local-CLT comparisons are exposed: 2*sigma*sqrt(t log t).

    Behavior beyond this window is reported by callers, not asserted.
    """
    if t <= 1.0:
        return int(math.ceil(2.0 * math.sqrt(kernel.sigma2 * t)))
    return int(math.ceil(2.0 * math.sqrt(kernel.sigma2 * t * math.log(t))))


def std_normal_tail(u: float) -> float:
    """P(X > u) for standard normal X, via erfc (relative accuracy ~1e-15)."""
    return 0.5 * erfc(u / math.sqrt(2.0))


def gaussian_mean_excess(u: float) -> float:
    """f(u) = E[(X - u)^+] = phi(u) - u P(X > u) for standard normal X.

    erfc keeps full relative accuracy in the tail, so the cancellation in
    phi(u) - u*Q(u) costs only ~log10(u^2) digits; for u <= 8 the result
    retains ~13 significant digits. Asymptotically f(u) = phi(u)/u^2 +
    O(phi(u)/u^4).
    """
    phi = math.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
    return phi - u * std_normal_tail(u)


def pmf_shift_distance(kernel: JumpKernel, t: float, y: int, eps: float = 1e-10) -> float:
    """sum_x |P(xi_t = x) - P(xi_t = x + y)|, within 2*eps.

    Decays like C|y|/sqrt(t); symmetric in the sign of y.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    y = int(abs(y))
    if y == 0:
        return 0.0
    probs = _cached_pmf(kernel, float(t), float(eps)).array()
    padded = np.concatenate([probs, np.zeros(y)])
    shifted = np.concatenate([np.zeros(y), probs])
    return float(np.abs(padded - shifted).sum())


def grad_residual_distance(kernel: JumpKernel, t: float, y: int, eps: float = 1e-10) -> float:
    """max_x |Delta_t(x+y) - Delta_t(x)| with Delta_t = pmf - f_t.

    The max runs over the certified pmf support (which dominates the
    local-CLT window); decays like C|y|/t^2.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    y = int(y)
    if y == 0:
        return 0.0
    table = _cached_pmf(kernel, float(t), float(eps))
    ks = table.support()
    s2t = kernel.sigma2 * t
    f = np.exp(-ks.astype(float) ** 2 / (2.0 * s2t)) / math.sqrt(2.0 * math.pi * s2t)
    delta = table.array() - f
    a = delta[:-abs(y)] if y != 0 else delta
    b = delta[abs(y):]
    return float(np.abs(b - a).max())


def normal_tail_ratio_error(kernel: JumpKernel, t: float, x_scaled: float,
                            eps: float = 1e-12) -> float:
    """|1 - P_0(xi_t > sigma*x*sqrt(t)) / P(X > x)| at x = x_scaled.

    The Gaussian comparison error; O(x^3/sqrt(t)) in the moderate-deviation
    window, dominated at fixed x by the lattice continuity correction
    (see tests for the non-monotone-in-t caveat when sigma*x*sqrt(t) sits
    on an integer).
    """
    if x_scaled <= 0:
        raise ValueError("x_scaled must be positive")
    sigma = math.sqrt(kernel.sigma2)
    w = sigma * x_scaled * math.sqrt(t)
    p_lattice = tail_prob(kernel, t, w, eps)
    p_normal = std_normal_tail(x_scaled)
    return abs(1.0 - p_lattice / p_normal)


def poissonization_pmf_oracle(kernel: JumpKernel, t: float, k: int,
                              n_max: int = 300) -> float:
    """Slow reference: sum_n e^{-t} t^n/n! p^{*n}(k) by direct convolution.

    Test oracle only; cost grows with kernel range and n_max. Dropped
    Poisson tail beyond n_max is not certified, so keep t small.
    """
    offs, probs = kernel.signed()
    dist = {0: 1.0}
    total = 0.0
    log_t = math.log(t) if t > 0 else 0.0
    for n in range(n_max + 1):
        if t == 0:
            w = 1.0 if n == 0 else 0.0
        else:
            w = math.exp(-t + n * log_t - math.lgamma(n + 1))
        total += w * dist.get(k, 0.0)
        new = {}
        for pos, pr in dist.items():
            for off, jp in zip(offs, probs):
                key = pos + int(off)
                new[key] = new.get(key, 0.0) + pr * jp
        dist = new
    return total
