"""Event-driven exclusion simulation with extreme-value observables.

Two distributionally equivalent couplings of the exclusion dynamics —
suppressed jumps and stirring exchanges — plus a free (non-interacting)
baseline whose extremes have an exact product-form law. Replicate
orchestration derives one stream per (base_seed, replicate, subsystem)
so any slice of a run is reproducible in isolation.

Trajectories live in a finite site window sized so that boundary effects
have probability below ~1e-12 per replicate; on the astronomically rare
window touch the replicate is rerun from its own seed with the window
doubled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _engines, _rng
from .limit_theory import scaled_position  # noqa: F401  (canonical home)
from .profiles import Configuration, StepProfile, required_left_cut, sample_initial
from .walk_kernel import JumpKernel, transition_pmf

COUPLING_SUPPRESSED = "suppressed"
COUPLING_STIRRING = "stirring"
COUPLING_FREE = "free"
COUPLINGS = (COUPLING_SUPPRESSED, COUPLING_STIRRING, COUPLING_FREE)

_WINDOW_CAP = 1 << 26  # sites; beyond this a rerun raises WindowOverflow


class EmptyRun(ValueError):
    """run_replicates needs at least one replicate."""


class WindowOverflow(RuntimeError):
    """A trajectory could not fit any window under the memory cap."""


@dataclass(frozen=True)
class SiteSnapshot:
    """Occupancy bits over [lo, hi] at one time, for covariance estimates."""

    lo: int
    hi: int
    bits: np.ndarray  # uint8, length hi - lo + 1
    t: float

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class ObservableSample:
    """Extreme-value observables of one replicate at horizon t.

    order_stats[m] is the position of the (m+1)-th rightmost particle;
    n_t maps each recorded threshold z to the count strictly above z.
    For exclusion couplings order_stats is strictly decreasing; the free
    baseline allows ties.
    """

    x_t: int
    order_stats: tuple
    n_t: dict
    seed: tuple
    t: float
    events: int
    snapshot: Optional[SiteSnapshot] = field(default=None, repr=False)

    def __post_init__(self):
        os_ = tuple(int(v) for v in self.order_stats)
        object.__setattr__(self, "order_stats", os_)
        if any(a < b for a, b in zip(os_, os_[1:])):
            raise ValueError("order_stats must be nonincreasing")
        if os_ and os_[0] != self.x_t:
            raise ValueError("x_t must equal the top order statistic")

    def to_dict(self) -> dict:
        return {"x_t": self.x_t, "order_stats": list(self.order_stats),
                "n_t": {repr(z): c for z, c in self.n_t.items()},
                "seed": list(self.seed), "t": self.t, "events": self.events}


def _margin(kernel: JumpKernel, dt: float) -> int:
    # 8 sigma sqrt(dt) covers per-particle excursions to ~1e-14
    return int(np.ceil(8.0 * np.sqrt(kernel.sigma2 * max(dt, 0.0)))) + kernel.range + 16


def _signed_cdf(kernel: JumpKernel):
    offs, _ = kernel.signed()
    return kernel.cum_probs(), offs


def evolve_suppressed(config: Configuration, kernel: JumpKernel, t_end: float,
                      rng) -> Configuration:
    """Exclusion dynamics: each particle attempts jumps at rate 1 with
    displacement law p, suppressed when the target is occupied.

    Realized by a Poisson number of attempt events (total rate is the
    particle count, constant by conservation) with uniform particle
    picks — exact in distribution for the fixed-horizon state.
    """
    if t_end < config.time:
        raise ValueError("t_end must be >= config.time")
    dt = t_end - config.time
    if dt == 0.0 or config.occupied.size == 0:
        return Configuration(config.occupied.copy(), t_end, config.left_boundary)
    stream = _rng.as_stream(rng)
    cdf, offs = _signed_cdf(kernel)
    pos0 = config.occupied
    pos, _, lo = _suppressed_windowed(pos0, kernel, dt, stream, cdf, offs)
    pos.sort()
    return Configuration(pos, t_end, min(config.left_boundary, int(lo)))


def _suppressed_windowed(pos0, kernel, dt, stream, cdf, offs):
    margin = _margin(kernel, dt)
    lo0, hi0 = int(pos0[0]), int(pos0[-1])
    snap = stream.snapshot()
    while True:
        lo = lo0 - margin
        wlen = (hi0 + margin) - lo + 1
        if wlen > _WINDOW_CAP:
            raise WindowOverflow(f"window of {wlen} sites exceeds cap")
        occ = np.zeros(wlen, dtype=np.uint8)
        occ[pos0 - lo] = 1
        pos = pos0.astype(np.int64).copy()
        status, events = _engines.run_suppressed(stream.state, pos, occ,
                                                 np.int64(lo), float(dt), cdf, offs)
        if status == _engines.OK:
            return pos, int(events), lo
        stream.restore(snap)
        margin *= 2


def evolve_stirring(config: Configuration, kernel: JumpKernel, t_end: float,
                    rng, with_labels: bool = False):
    """Stirring dynamics: site pairs {k, k+j} exchange contents at rate
    p_j. The occupation law equals evolve_suppressed; labels additionally
    give the stirring walker positions xi_i(t) of the initial sites
    (ordered as config.occupied).
    """
    if t_end < config.time:
        raise ValueError("t_end must be >= config.time")
    dt = t_end - config.time
    if dt == 0.0 or config.occupied.size == 0:
        out = Configuration(config.occupied.copy(), t_end, config.left_boundary)
        return (out, config.occupied.copy()) if with_labels else out
    stream = _rng.as_stream(rng)
    labeled, _, lo = _stirring_windowed(config.occupied, kernel, dt, stream)
    pos = np.sort(labeled)
    out = Configuration(pos, t_end, min(config.left_boundary, int(lo)))
    return (out, labeled) if with_labels else out


def _stirring_windowed(pos0, kernel, dt, stream):
    guard = kernel.range
    margin = _margin(kernel, dt)
    lo0, hi0 = int(pos0[0]), int(pos0[-1])
    n_p = pos0.size
    joffs = np.asarray(kernel.support, dtype=np.int64)
    jp = np.asarray(kernel.probs, dtype=np.float64)
    snap = stream.snapshot()
    while True:
        lo = lo0 - margin
        wlen = (hi0 + margin) - lo + 1
        if wlen > _WINDOW_CAP:
            raise WindowOverflow(f"window of {wlen} sites exceeds cap")
        weights = jp * (wlen - joffs)
        rate = float(weights.sum())
        jw_cdf = np.cumsum(weights) / rate
        lab = np.full(wlen, -1, dtype=np.int32)
        lab[pos0 - lo] = np.arange(n_p, dtype=np.int32)
        status, events = _engines.run_stirring(stream.state, lab, float(dt), rate,
                                               jw_cdf, joffs, np.int64(guard))
        if status == _engines.OK:
            idx = np.flatnonzero(lab >= 0)
            labeled = np.empty(n_p, dtype=np.int64)
            labeled[lab[idx]] = idx + lo
            return labeled, int(events), lo
        stream.restore(snap)
        margin *= 2


@dataclass(frozen=True)
class FreeConfiguration:
    """Multiset of independent-walker positions (collisions allowed)."""

    positions: np.ndarray  # int64, ascending, ties allowed
    time: float

    def __post_init__(self):
        p = np.sort(np.asarray(self.positions, dtype=np.int64))
        object.__setattr__(self, "positions", p)

    def rightmost(self) -> int:
        if self.positions.size == 0:
            raise ValueError("no walkers")
        return int(self.positions[-1])

    def count_above(self, z: float) -> int:
        return int((self.positions > z).sum())


def evolve_free(config: Configuration, kernel: JumpKernel, t_end: float,
                rng, _table=None) -> FreeConfiguration:
    """Independent walkers: every particle gains an exact increment drawn
    from the walk pmf at the elapsed time; no interaction."""
    if t_end < config.time:
        raise ValueError("t_end must be >= config.time")
    dt = t_end - config.time
    pos0 = np.asarray(getattr(config, "occupied", getattr(config, "positions", None)),
                      dtype=np.int64)
    if dt == 0.0 or pos0.size == 0:
        return FreeConfiguration(pos0.copy(), t_end)
    stream = _rng.as_stream(rng)
    table = _table if _table is not None else transition_pmf(kernel, dt, 1e-12)
    cum = np.cumsum(table.array())
    u = np.empty(pos0.size, dtype=np.float64)
    _engines.fill_uniforms(stream.state, u)
    steps = np.searchsorted(cum, u * cum[-1], side="right") - table.kmax
    return FreeConfiguration(pos0 + steps, t_end)


def run_replicates(profile: StepProfile, kernel: JumpKernel, t: float,
                   z_list, m_max: int = 3, n: int = 1, base_seed: int = 0,
                   coupling: str = COUPLING_SUPPRESSED, *,
                   eps_cut: float = 1e-6, z_ref: Optional[float] = None,
                   snapshot_window=None) -> list:
    """n independent replicates of the chosen coupling at horizon t.

    The initial profile is truncated at required_left_cut for the
    smallest threshold of interest (min of z_list and z_ref) with budget
    eps_cut. Each replicate consumes streams keyed by
    (base_seed, replicate, subsystem), so output is deterministic and
    independent of execution order.
    """
    if n < 1:
        raise EmptyRun(f"n = {n}")
    if coupling not in COUPLINGS:
        raise ValueError(f"unknown coupling {coupling!r}")
    if t <= 0:
        raise ValueError("t must be positive")
    zs = [float(z) for z in z_list]
    z_for_cut = min(zs) if zs else 0.0
    if z_ref is not None:
        z_for_cut = min(z_for_cut, float(z_ref))
    cut = required_left_cut(profile, kernel, t, z_for_cut, eps_cut)

    cdf, offs = _signed_cdf(kernel)
    table = transition_pmf(kernel, t, 1e-12) if coupling == COUPLING_FREE else None
    deterministic = profile.is_deterministic()
    pos_init = None
    if deterministic:
        pos_init = sample_initial(profile, cut, _rng.np_rng(base_seed, 0, _rng.INIT)).occupied

    subsystem = {COUPLING_SUPPRESSED: _rng.DYN_SUPPRESSED,
                 COUPLING_STIRRING: _rng.DYN_STIRRING,
                 COUPLING_FREE: _rng.FREE}[coupling]
    out = []
    for rep in range(n):
        if deterministic:
            pos0 = pos_init
        else:
            pos0 = sample_initial(profile, cut, _rng.np_rng(base_seed, rep, _rng.INIT)).occupied
        stream = _rng.RngStream.from_seed(base_seed, rep, subsystem)
        if coupling == COUPLING_SUPPRESSED:
            pos, events, _ = _suppressed_windowed(pos0, kernel, t, stream, cdf, offs)
        elif coupling == COUPLING_STIRRING:
            pos, events, _ = _stirring_windowed(pos0, kernel, t, stream)
        else:
            cfg = Configuration(pos0, 0.0, cut)
            pos = evolve_free(cfg, kernel, t, stream, _table=table).positions
            events = pos0.size
        srt = np.sort(pos)[::-1]
        depth = min(m_max + 1, srt.size)
        order_stats = tuple(int(v) for v in srt[:depth])
        n_t = {z: int((pos > z).sum()) for z in zs}
        snapshot = None
        if snapshot_window is not None:
            s_lo, s_hi = int(snapshot_window[0]), int(snapshot_window[1])
            bits = np.zeros(s_hi - s_lo + 1, dtype=np.uint8)
            inside = pos[(pos >= s_lo) & (pos <= s_hi)]
            bits[inside - s_lo] = 1
            snapshot = SiteSnapshot(s_lo, s_hi, bits, float(t))
        out.append(ObservableSample(x_t=int(srt[0]), order_stats=order_stats,
                                    n_t=n_t, seed=(int(base_seed), rep), t=float(t),
                                    events=int(events), snapshot=snapshot))
    return out
