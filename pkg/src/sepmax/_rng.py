"""Deterministic replicate streams.

Every replicate derives its randomness from a SeedSequence keyed by
(base_seed, replicate, subsystem), so results are reproducible for any
replicate count and independent of execution order. Subsystem ids keep
the initial-condition draws, the event dynamics of each coupling, and
the free baseline on separate streams.
"""

from __future__ import annotations

import numpy as np

INIT = 0
DYN_SUPPRESSED = 1
FREE = 2
DYN_STIRRING = 3
DYN_ZR = 4


def xs_state(base_seed: int, replicate: int = 0, subsystem: int = 0) -> np.ndarray:
    """Two-word xorshift128+ state; the all-zero state is forbidden."""
    ss = np.random.SeedSequence((int(base_seed), int(replicate), int(subsystem)))
    st = ss.generate_state(2, dtype=np.uint64)
    while st[0] == 0 and st[1] == 0:
        ss = ss.spawn(1)[0]
        st = ss.generate_state(2, dtype=np.uint64)
    return st


def np_rng(base_seed: int, replicate: int = 0, subsystem: int = 0) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence((int(base_seed), int(replicate), int(subsystem))))


class RngStream:
    """Mutable event-stream state consumed by the evolve_* operations.

    Successive calls that share a stream continue where the previous one
    stopped, so staged evolutions chain deterministically.
    """

    __slots__ = ("state",)

    def __init__(self, state):
        st = np.asarray(state, dtype=np.uint64).copy()
        if st.shape != (2,):
            raise ValueError("state must be two uint64 words")
        if st[0] == 0 and st[1] == 0:
            raise ValueError("all-zero state is invalid")
        self.state = st

    @classmethod
    def from_seed(cls, base_seed: int, replicate: int = 0,
                  subsystem: int = DYN_SUPPRESSED) -> "RngStream":
        return cls(xs_state(base_seed, replicate, subsystem))

    def snapshot(self) -> np.ndarray:
        return self.state.copy()

    def restore(self, snap: np.ndarray) -> None:
        self.state[:] = snap


def as_stream(rng) -> RngStream:
    """Coerce an int seed or RngStream to a stream (ints get stream 0/0)."""
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream.from_seed(int(rng))
    raise TypeError(f"expected RngStream or int seed, got {type(rng).__name__}")
