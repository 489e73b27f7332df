"""Asymmetric exclusion with drift toward the packed side, in zero-range form.

The displacement of the front particle maps to the total mass of a well
process on sites 1, 2, ...: new mass is injected into site 1 at rate p,
every occupied site sends one particle right at rate p and left at rate
q = 1 - p, and a left move from site 1 drops out of play. For p < q the
total mass is positive recurrent with an explicit product-geometric
stationary law, exposed here as a certified pmf oracle next to the
simulator, plus a monotone two-copy coupling for domination experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._engines import DOMINATION_BROKEN, OVERFLOW, run_zr, run_zr_coupled
from ._rng import as_stream


class RatioOutOfRange(ValueError):
    """Jump-rate ratio outside (0, 1)."""


class DominationViolated(ValueError):
    """Coupled pair where the lower copy exceeds the upper somewhere."""


@dataclass(frozen=True)
class AsepParams:
    """Nearest-neighbor jump rates with strict drift toward the well.

    p is the rate away from the well (and the injection rate); q = 1 - p
    pulls back. p < 1/2 keeps the total mass positive recurrent.
    """

    p: float

    def __post_init__(self):
        if not (0.0 < self.p < 0.5):
            raise ValueError(f"p must lie in (0, 0.5) strictly, got {self.p}")

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def ratio(self) -> float:
        return self.p / (1.0 - self.p)


@dataclass(frozen=True)
class ZrConfig:
    """Occupancies of the well sites 1, 2, ... with finite total mass."""

    occupancies: dict = field(default_factory=dict)
    time: float = 0.0

    def __post_init__(self):
        clean = {}
        for site, count in self.occupancies.items():
            s = int(site)
            c = int(count)
            if s < 1:
                raise ValueError(f"sites start at 1, got {site}")
            if c < 0:
                raise ValueError(f"negative occupancy at site {site}")
            if c > 0:
                clean[s] = c
        object.__setattr__(self, "occupancies", clean)
        object.__setattr__(self, "time", float(self.time))


def tagged_displacement(config: ZrConfig) -> int:
    """Total mass, i.e. how far the tagged front particle has advanced."""
    return sum(config.occupancies.values())


def _to_array(config: ZrConfig, cap: int) -> np.ndarray:
    zeta = np.zeros(cap, dtype=np.int64)
    for site, count in config.occupancies.items():
        zeta[site - 1] = count
    return zeta


def _from_array(zeta: np.ndarray, t: float) -> ZrConfig:
    occ = {i + 1: int(c) for i, c in enumerate(zeta) if c > 0}
    return ZrConfig(occ, t)


def _initial_cap(*configs: ZrConfig) -> int:
    top = 0
    for c in configs:
        if c.occupancies:
            top = max(top, max(c.occupancies))
    return max(16, 2 * top)


def evolve_zr(config: ZrConfig, params: AsepParams, t_end: float,
              rng) -> ZrConfig:
    """Run the well dynamics from config.time to t_end.

    The tracked site range doubles whenever mass reaches its edge; the
    boundary move is replayed onto the grown array before resuming, so
    trajectories do not depend on the initial capacity.
    """
    if t_end < config.time:
        raise ValueError("t_end precedes the configuration time")
    if t_end == config.time:
        return config
    stream = as_stream(rng)
    cap = _initial_cap(config)
    zeta = _to_array(config, cap)
    t = config.time
    while True:
        status, _, t = run_zr(stream.state, zeta, t, t_end, params.p)
        if status != OVERFLOW:
            break
        grown = np.zeros(2 * cap, dtype=np.int64)
        grown[:cap] = zeta
        grown[cap - 1] -= 1
        grown[cap] += 1
        zeta = grown
        cap *= 2
    return _from_array(zeta, t_end)


def mu_sum_distribution(ratio: float, eps: float = 1e-9) -> np.ndarray:
    """Pmf of the total mass under the product-geometric stationary law.

    Site x holds a Geometric(1 - ratio^x) count (failure convention);
    the pmf of the sum over x = 1..X_max is built by convolution, with
    X_max and the per-site supports chosen so the dropped probability
    mass is certified below eps. Entry k is P(sum = k).
    """
    if not (0.0 < ratio < 1.0):
        raise RatioOutOfRange(f"ratio must lie in (0, 1), got {ratio}")
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    r = float(ratio)
    # spatial cut: P(any mass beyond X) <= sum of means there, which is
    # below r^(X+1) / ((1-r)(1-r^(X+1)))
    x_max = 1
    while r ** (x_max + 1) / ((1.0 - r) * (1.0 - r ** (x_max + 1))) >= eps / 2:
        x_max += 1
    pmf = np.array([1.0])
    site_eps = eps / (2.0 * x_max)
    for x in range(1, x_max + 1):
        rx = r ** x
        # smallest support with geometric tail r^(x*m) below site_eps
        m = max(1, math.ceil(math.log(site_eps) / (x * math.log(r))))
        site = (1.0 - rx) * rx ** np.arange(m + 1)
        pmf = np.convolve(pmf, site)
    return pmf


def default_cut(ratio: float, tail_mean: float = 1e-6) -> int:
    """Smallest site cut whose dropped stationary mean is below tail_mean."""
    if not (0.0 < ratio < 1.0):
        raise RatioOutOfRange(f"ratio must lie in (0, 1), got {ratio}")
    r = float(ratio)
    x = 1
    while r ** (x + 1) / ((1.0 - r) * (1.0 - r ** (x + 1))) >= tail_mean:
        x += 1
    return x


def sample_mu(ratio: float, x_max: int, rng: np.random.Generator) -> ZrConfig:
    """Draw a configuration from the stationary law truncated at x_max."""
    if not (0.0 < ratio < 1.0):
        raise RatioOutOfRange(f"ratio must lie in (0, 1), got {ratio}")
    if x_max < 1:
        raise ValueError("x_max must be at least 1")
    sites = np.arange(1, x_max + 1)
    counts = rng.geometric(1.0 - ratio ** sites.astype(float)) - 1
    occ = {int(s): int(c) for s, c in zip(sites, counts) if c > 0}
    return ZrConfig(occ, 0.0)


def coupled_evolve(lower: ZrConfig, upper: ZrConfig, params: AsepParams,
                   t_end: float, rng, *,
                   check_every_event: bool = False) -> tuple:
    """Evolve two copies under shared events, preserving sitewise order.

    Injections are shared; every move at an upper-occupied site carries
    the lower copy's particle along when it has one there. The sitewise
    ordering lower <= upper is required on input and is audited after the
    run (per event when check_every_event is set).
    """
    if lower.time != upper.time:
        raise ValueError("copies must share a starting time")
    for site, count in lower.occupancies.items():
        if count > upper.occupancies.get(site, 0):
            raise DominationViolated(f"lower exceeds upper at site {site}")
    if t_end < lower.time:
        raise ValueError("t_end precedes the configuration time")
    if t_end == lower.time:
        return lower, upper
    stream = as_stream(rng)
    cap = _initial_cap(lower, upper)
    z_lo = _to_array(lower, cap)
    z_hi = _to_array(upper, cap)
    t = lower.time
    while True:
        status, _, t = run_zr_coupled(stream.state, z_lo, z_hi, t, t_end,
                                      params.p, check_every_event)
        if status == DOMINATION_BROKEN:
            raise DominationViolated(f"order lost during coupling at t={t}")
        if status != OVERFLOW:
            break
        lo_g = np.zeros(2 * cap, dtype=np.int64)
        hi_g = np.zeros(2 * cap, dtype=np.int64)
        lo_g[:cap] = z_lo
        hi_g[:cap] = z_hi
        hi_g[cap - 1] -= 1
        hi_g[cap] += 1
        if lo_g[cap - 1] > 0:
            lo_g[cap - 1] -= 1
            lo_g[cap] += 1
        z_lo, z_hi = lo_g, hi_g
        cap *= 2
    if np.any(z_lo > z_hi):
        raise DominationViolated("order lost during coupling")
    return _from_array(z_lo, t_end), _from_array(z_hi, t_end)
