# src/quantum/rng.py
"""
Deterministic, role-split random streams.

Each stream is a numpy Philox generator (counter-based). The 128-bit key is
derived from (seed, stream_id) through SeedSequence, and the upper three words
of the 256-bit Philox counter hold "lanes" so that one stream can be cut into
disjoint sub-streams (one lane per EPR pair, per trial, ...).

Guarantees:
    - identical (seed, stream_id, lanes, counter) -> identical draw
    - different stream_ids are independent: Alice drawing one more basis never
      shifts Bob's or the source's sequence
    - fork() and child() are cached, so asking twice for the same sub-stream
      returns the same object instead of replaying its draws
"""

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np

# Configure module logger
logger = logging.getLogger(__name__)

MAX_LANES = 3
SEED_MASK = (1 << 64) - 1


class StreamId(IntEnum):
    """Role tags; the integer value is part of the Philox key derivation."""
    SOURCE = 0
    ALICE = 1
    BOB = 2
    EVE = 3


@lru_cache(maxsize=4096)
def _stream_key(seed: int, stream_id: int) -> int:
    words = np.random.SeedSequence(seed & SEED_MASK, spawn_key=(stream_id,)).generate_state(
        2, dtype=np.uint64
    )
    return (int(words[0]) << 64) | int(words[1])


@dataclass(eq=False)
class RandomStream:
    """
    One role's deterministic random stream.

    Attributes:
        seed: 64-bit session seed.
        stream_id: Role tag (SOURCE, ALICE, BOB, EVE).
        lanes: Up to three lane indices selecting a disjoint counter range.
        counter: Number of uniform draws taken so far.

    Example:
        >>> root = RandomStream(7)
        >>> alice = root.fork(StreamId.ALICE)
        >>> pair_3 = root.child(3)          # source lane for pair 3
        >>> alice.bit(), pair_3.uniform()
    """

    seed: int
    stream_id: StreamId = StreamId.SOURCE
    lanes: Tuple[int, ...] = ()
    counter: int = 0
    _generator: Optional[np.random.Generator] = field(default=None, init=False, repr=False)
    _forks: Dict[StreamId, "RandomStream"] = field(default_factory=dict, init=False, repr=False)
    _children: Dict[int, "RandomStream"] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.lanes) > MAX_LANES:
            raise ValueError(f"at most {MAX_LANES} lanes are supported, got {len(self.lanes)}")
        if any(lane < 0 for lane in self.lanes):
            raise ValueError(f"lanes must be non-negative, got {self.lanes}")
        self.stream_id = StreamId(self.stream_id)

    def _gen(self) -> np.random.Generator:
        if self._generator is None:
            counter = np.zeros(4, dtype=np.uint64)
            for position, lane in enumerate(self.lanes, start=1):
                counter[position] = lane
            bit_generator = np.random.Philox(
                counter=counter, key=_stream_key(self.seed, int(self.stream_id))
            )
            self._generator = np.random.Generator(bit_generator)
        return self._generator

    def fork(self, stream_id: StreamId) -> "RandomStream":
        """Same seed and lanes, another role. Cached per role."""
        stream_id = StreamId(stream_id)
        if stream_id == self.stream_id:
            return self
        if stream_id not in self._forks:
            self._forks[stream_id] = RandomStream(self.seed, stream_id, self.lanes)
        return self._forks[stream_id]

    def child(self, lane: int) -> "RandomStream":
        """Sub-stream on a disjoint counter range. Cached per lane."""
        if lane not in self._children:
            self._children[lane] = RandomStream(self.seed, self.stream_id, self.lanes + (int(lane),))
        return self._children[lane]

    def uniform(self) -> float:
        """Next draw in [0, 1)."""
        value = float(self._gen().random())
        self.counter += 1
        return value

    def bit(self) -> int:
        """Fair coin."""
        return 1 if self.uniform() >= 0.5 else 0

    def bits(self, count: int) -> list[int]:
        return [self.bit() for _ in range(count)]

    def sample_indices(self, population: int, count: int) -> list[int]:
        """Sorted uniform subset of range(population) of the given size."""
        if count < 0 or count > population:
            raise ValueError(f"cannot sample {count} of {population}")
        chosen = self._gen().permutation(population)[:count]
        self.counter += population
        return sorted(int(index) for index in chosen)


def derive_seed(seed: int, *path: int) -> int:
    """
    Derive a child 63-bit seed (per trial, per rebuild attempt).

    The result fits in a signed 64-bit integer so it survives JSON and
    command-line round trips unchanged.
    """
    state = np.random.SeedSequence(seed & SEED_MASK, spawn_key=tuple(path)).generate_state(
        1, dtype=np.uint64
    )
    return int(state[0]) >> 1


def fresh_seed() -> int:
    """Non-deterministic 63-bit seed for runs started without --seed."""
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0]) >> 1
