"""Step initial profiles and certified left truncation.

A step profile puts a particle at site 0 with probability 1, nothing to
the right, and periodic Bernoulli densities rho_{-1}, ..., rho_{-m}
repeating to the left (optionally truncated to sites >= -L). Simulating
the infinite left tail is impossible, so required_left_cut computes how
deep the initial condition must actually reach before the particles
beyond it stop mattering for right-tail observables, with the dropped
contribution bounded by an exponential-moment tail estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .walk_kernel import JumpKernel, OutOfChernoffRange, chernoff_log_tail


class AllZeroDensities(ValueError):
    """Every periodic density is zero."""


class DensityOutOfRange(ValueError):
    """A density lies outside [0, 1]."""


class ChernoffRangeExceeded(RuntimeError):
    """The tail budget cannot be certified inside the exponential window."""


@dataclass(frozen=True)
class StepProfile:
    """Periodic Bernoulli step densities with an optional left cutoff.

    densities[j] is rho_{-(j+1)}; rho_0 = 1 is implicit and cannot be
    overridden; density is 0 for sites > 0 and below -l_cut when l_cut
    is set. rho_bar is the period average.
    """

    densities: tuple
    l_cut: int | None = None
    rho_bar: float = field(init=False)

    def __post_init__(self):
        if not self.densities:
            raise AllZeroDensities("empty density list")
        for rho in self.densities:
            if not (0.0 <= rho <= 1.0):
                raise DensityOutOfRange(f"rho = {rho}")
        if max(self.densities) == 0.0:
            raise AllZeroDensities("all periodic densities are zero")
        if self.l_cut is not None and self.l_cut < 0:
            raise ValueError("l_cut must be nonnegative")
        object.__setattr__(self, "rho_bar",
                           sum(self.densities) / len(self.densities))

    @property
    def m(self) -> int:
        return len(self.densities)

    def density(self, x: int) -> float:
        """Occupation probability of site x under the product measure."""
        if x > 0:
            return 0.0
        if x == 0:
            return 1.0
        if self.l_cut is not None and x < -self.l_cut:
            return 0.0
        return self.densities[(-x - 1) % self.m]

    def density_array(self, cut: int) -> np.ndarray:
        """Densities for sites cut..0 as a vector (index 0 = site cut)."""
        return np.array([self.density(x) for x in range(cut, 1)])

    def is_deterministic(self) -> bool:
        return all(rho in (0.0, 1.0) for rho in self.densities)


@dataclass(frozen=True)
class Configuration:
    """Finite set of occupied sites at a process time.

    occupied is strictly increasing; left_boundary records the truncation
    below which the initial condition was dropped.
    """

    occupied: np.ndarray
    time: float
    left_boundary: int

    def __post_init__(self):
        occ = np.asarray(self.occupied, dtype=np.int64)
        object.__setattr__(self, "occupied", occ)
        if occ.size and not (np.diff(occ) > 0).all():
            raise ValueError("occupied sites must be strictly increasing")
        if occ.size and occ[0] < self.left_boundary:
            raise ValueError("site below left_boundary")

    def rightmost(self) -> int:
        if self.occupied.size == 0:
            raise ValueError("empty configuration has no rightmost particle")
        return int(self.occupied[-1])

    def count_above(self, z: float) -> int:
        """Number of particles strictly right of the real threshold z."""
        return int((self.occupied > z).sum())


def make_profile(densities, l_cut=None) -> StepProfile:
    """Validated periodic step profile; rho_bar is computed on build."""
    return StepProfile(densities=tuple(float(r) for r in densities),
                       l_cut=None if l_cut is None else int(l_cut))


def full_step(l_cut=None) -> StepProfile:
    """Every site <= 0 occupied (period 1, density 1)."""
    return make_profile([1.0], l_cut)


def _dropped_tail_bound(profile: StepProfile, kernel: JumpKernel,
                        t: float, z: float, c: int) -> float:
    """Upper bound for sum_{i < c} rho_i P_i(xi_t > z).

    Bounds rho_i by 1 and applies the exponential Markov bound with the
    single rate lam fixed at the depth c, which sums geometrically:
    sum_{i<c} P(xi_t >= z-i) <= exp(logbound(z-c)) / (e^lam - 1).
    """
    x = z - c
    if x <= 0:
        return math.inf
    log_head = chernoff_log_tail(kernel, t, x)  # raises OutOfChernoffRange
    lam = x / (kernel.sigma2 * t)
    return math.exp(log_head) / math.expm1(lam)


def required_left_cut(profile: StepProfile, kernel: JumpKernel, t: float,
                      z: float, eps: float) -> int:
    """Shallowest cut c <= 0 with sum_{i<c} rho_i P_i(xi_t > z) < eps.

    Simulating only sites >= c then perturbs the law of any observable of
    the configuration right of z by less than eps in total variation.
    Honors a profile l_cut (never returns deeper than -l_cut). Raises
    ChernoffRangeExceeded if the certification window x <= sigma^2*theta*t
    is exhausted before the budget is met.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must be in (0, 1)")

    def bound(c):
        try:
            return _dropped_tail_bound(profile, kernel, t, z, c)
        except OutOfChernoffRange:
            raise ChernoffRangeExceeded(
                f"budget {eps} not met before x = sigma^2*theta*t "
                f"at depth {c}") from None

    hi = min(0, math.floor(z))  # start at 0, or below z when z < 0
    if bound(hi) < eps:
        cut = hi
    else:
        # exponential search down for a passing depth, then bisect for the
        # shallowest passing cut; bound() is nonincreasing as c decreases.
        step = 1
        lo = hi - step
        while bound(lo) >= eps:
            step *= 2
            lo = hi - step
        while hi - lo > 1:
            mid = (hi + lo) // 2
            if bound(mid) < eps:
                lo = mid
            else:
                hi = mid
        cut = lo
    if profile.l_cut is not None:
        cut = max(cut, -profile.l_cut)
    return int(cut)


def sample_initial(profile: StepProfile, cut: int, rng: np.random.Generator) -> Configuration:
    """Bernoulli product sample of sites cut..0; site 0 always occupied.

    Deterministic densities (0/1) consume no randomness, so all-0/1
    profiles yield the same configuration for every seed.
    """
    if cut > 0:
        raise ValueError("cut must be <= 0")
    sites = []
    for x in range(cut, 1):
        rho = profile.density(x)
        if rho == 1.0:
            sites.append(x)
        elif rho > 0.0 and rng.random() < rho:
            sites.append(x)
    return Configuration(occupied=np.array(sites, dtype=np.int64),
                         time=0.0, left_boundary=int(cut))
