"""
Seeded random streams.

Every random draw in the library comes from a ``numpy.random.Generator``
backed by the counter-based Philox bit generator, keyed through a
``SeedSequence`` built from ``(base_seed, stream_id)``. Philox gives 2**64
independent streams per key and numpy guarantees its bit stream across
releases; the Generator methods used on top of it are version-pinned
through requirements.txt.
"""
from dataclasses import dataclass

import numpy as np

STREAM_ALGORITHM = 'numpy.random.Philox/SeedSequence'


@dataclass(frozen=True)
class RngSpec:
    """
    Identifies one reproducible random stream.

    Attributes:
        base_seed (int): 64-bit base seed.
        stream_id (int): 64-bit stream index under that seed.
    """
    base_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.base_seed < 0 or self.stream_id < 0:
            raise ValueError("base_seed and stream_id must be non-negative")

    def seed_sequence(self):
        return np.random.SeedSequence(self.base_seed, spawn_key=(self.stream_id,))

    def generator(self):
        """Returns a fresh Generator positioned at the start of this stream."""
        return np.random.Generator(np.random.Philox(self.seed_sequence()))

    def derived_seed(self):
        """A 64-bit seed that is a pure function of (base_seed, stream_id)."""
        return int(self.seed_sequence().generate_state(1, dtype=np.uint64)[0])

    def child(self, stream_id):
        """
        Returns sub-stream ``stream_id`` of this stream. Children of distinct
        streams never share a key, so adding children to one stream never
        perturbs another stream's draws.
        """
        return RngSpec(self.derived_seed(), stream_id)


def derive_seed(base_seed, cell_index, trial_index):
    """Seed of trial ``trial_index`` in experiment cell ``cell_index``."""
    sequence = np.random.SeedSequence(base_seed, spawn_key=(cell_index, trial_index))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def as_generator(rng):
    """Accepts an RngSpec, a Generator or an int seed and returns a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSpec):
        return rng.generator()
    if isinstance(rng, int):
        return RngSpec(rng).generator()
    raise TypeError(f"Cannot build a random generator from {rng!r}")
