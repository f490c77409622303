"""Counter-based random streams.

Every trial gets its own stream, derived from the master seed and the trial
index alone, so trial ``k`` never depends on whether trials ``0..k-1`` ran.
The derivation is SplitMix64 used as a keyed hash:

    root       = mix64(master_seed ^ (stream * GAMMA_STREAM))
    trial_key  = mix64(root + (trial_index + 1) * GAMMA_TRIAL)
    draw_bits  = mix64(trial_key + (draw + 1) * GAMMA_DRAW)
    uniform    = (draw_bits >> 11) * 2**-53          # in [0, 1)

``mix64`` is the SplitMix64 finalizer. All arithmetic is modulo 2**64.
``stream`` separates independent sub-experiments that share a master seed.

Everything is vectorized over trial indices: a :class:`TrialStreams` holds
the keys of a batch of trials and hands out one uniform per trial per draw
slot. Draw slots are addressed explicitly, which keeps rejection samplers
order-free too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SeedSpec", "TrialStreams", "derive_trial_stream", "mix64"]

MASK64 = (1 << 64) - 1
GAMMA_STREAM = np.uint64(0xD1B54A32D192ED03)
GAMMA_TRIAL = np.uint64(0x9E3779B97F4A7C15)
GAMMA_DRAW = np.uint64(0xBF58476D1CE4E5B9 ^ 0x94D049BB133111EB)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TO_UNIT = 2.0**-53


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus an optional sub-stream selector."""

    master_seed: int = 0
    stream: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if not 0 <= int(value) <= MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def substream(self, stream: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, stream)

    @property
    def root(self) -> np.uint64:
        seed = np.array([self.master_seed], dtype=np.uint64)
        salt = np.array([self.stream], dtype=np.uint64) * GAMMA_STREAM
        return mix64(seed ^ salt)[0]


class TrialStreams:
    """Random streams for a batch of trial indices.

    ``uniform(draw)`` returns one float in [0, 1) per trial for the given
    draw slot. Two batches that share a trial index produce identical draws
    for it, regardless of the other indices in the batch.
    """

    def __init__(self, seeds: SeedSpec, indices):
        idx = np.atleast_1d(np.asarray(indices))
        if idx.size and (idx.min() < 0):
            raise ValueError("trial indices must be non-negative")
        self.seeds = seeds
        self.indices = idx.astype(np.int64)
        ctr = self.indices.astype(np.uint64) + np.uint64(1)
        self._keys = mix64(seeds.root + ctr * GAMMA_TRIAL)

    def __len__(self) -> int:
        return self.indices.size

    def bits(self, draw: int) -> np.ndarray:
        if draw < 0:
            raise ValueError("draw slot must be non-negative")
        step = np.array([draw + 1], dtype=np.uint64) * GAMMA_DRAW
        return mix64(self._keys + step)

    def uniform(self, draw: int) -> np.ndarray:
        return (self.bits(draw) >> _S11).astype(np.float64) * _TO_UNIT

    def uniforms(self, count: int, start: int = 0) -> np.ndarray:
        """Draw slots ``start..start+count-1`` as an array of shape (trials, count)."""
        slots = np.arange(start + 1, start + count + 1, dtype=np.uint64) * GAMMA_DRAW
        raw = mix64(self._keys[:, None] + slots[None, :])
        return (raw >> _S11).astype(np.float64) * _TO_UNIT

    def take(self, mask) -> "TrialStreams":
        """Sub-batch holding only the selected trials (keys are reused, not re-derived)."""
        sub = object.__new__(TrialStreams)
        sub.seeds = self.seeds
        sub.indices = self.indices[mask]
        sub._keys = self._keys[mask]
        return sub


def derive_trial_stream(seeds: SeedSpec, trial_index: int) -> TrialStreams:
    """The stream of a single trial."""
    if trial_index < 0:
        raise ValueError("trial_index must be non-negative")
    return TrialStreams(seeds, [trial_index])
