"""Partitioned probabilistic systems and reproducible trial execution.

A :class:`RhoSystem` is split into three parts that are run in order for
every trial:

* the *initializer* turns the trial's random stream into initial conditions,
* the *object model* evolves the test object from those conditions (it sees
  the trial index, which is how drift is expressed),
* the *prober* observes the final object state and reports an outcome, plus
  optional side observations (``extras``).

Parts are vectorized: each is called once per batch of trial indices. Since
every trial's stream depends only on ``(seeds, trial_index)``, a batch of any
composition yields the same per-trial outcomes.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from rhosim.streams import SeedSpec, TrialStreams, derive_trial_stream

__all__ = [
    "ContinuousSpace",
    "DiscreteSpace",
    "OutOfSupport",
    "OutcomeSpace",
    "Part",
    "RhoSystem",
    "SeedSpec",
    "TrialRecord",
    "TrialRecords",
    "derive_trial_stream",
    "run_trial",
    "run_trials",
]

DEFAULT_BINS = 64
CHUNK_SIZE = 1 << 16


class OutOfSupport(ValueError):
    """The prober reported a value outside the system's outcome space."""

    def __init__(self, trial_index: int, value, space: "OutcomeSpace"):
        self.trial_index = int(trial_index)
        self.value = value
        self.space = space
        super().__init__(f"trial {self.trial_index}: outcome {value!r} outside {space}")


@dataclass(frozen=True)
class DiscreteSpace:
    """Finitely many named results, addressed by label index 0..J-1."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise ValueError("a discrete space needs at least one label")
        if len(set(labels)) != len(labels):
            raise ValueError(f"labels must be unique: {labels}")

    kind = "discrete"

    @property
    def size(self) -> int:
        return len(self.labels)

    def contains(self, values) -> np.ndarray:
        v = np.asarray(values)
        if v.dtype.kind in "iu":
            return (v >= 0) & (v < self.size)
        if v.dtype.kind == "f":
            ok = np.isfinite(v) & (v == np.floor(v))
            return ok & (v >= 0) & (v < self.size)
        return np.zeros(v.shape, dtype=bool)

    def cell_index(self, values) -> np.ndarray:
        return np.asarray(values).astype(np.int64)

    def index_of(self, target) -> int:
        if isinstance(target, str):
            try:
                return self.labels.index(target)
            except ValueError:
                raise KeyError(f"unknown label {target!r}") from None
        k = int(target)
        if not 0 <= k < self.size:
            raise KeyError(f"label index {k} out of range for J={self.size}")
        return k

    def describe(self) -> dict:
        return {"kind": self.kind, "labels": list(self.labels)}

    def __str__(self):
        return f"DiscreteSpace(J={self.size})"


@dataclass(frozen=True)
class ContinuousSpace:
    """Closed interval [lo, hi] accounted for in ``bins`` equal-width cells."""

    lo: float
    hi: float
    bins: int = DEFAULT_BINS
    units: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError(f"need finite lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.bins) < 1:
            raise ValueError("bins must be >= 1")

    kind = "continuous"

    @property
    def size(self) -> int:
        return int(self.bins)

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.bins

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.bins + 1)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f"cell_{k}" for k in range(self.bins))

    def contains(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=np.float64)
        return np.isfinite(v) & (v >= self.lo) & (v <= self.hi)

    def cell_index(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=np.float64)
        k = np.floor((v - self.lo) / self.width).astype(np.int64)
        # hi itself belongs to the last cell
        return np.clip(k, 0, self.bins - 1)

    def index_of(self, target) -> int:
        if isinstance(target, str):
            return self.labels.index(target)
        k = int(target)
        if not 0 <= k < self.size:
            raise KeyError(f"cell index {k} out of range for K={self.size}")
        return k

    def describe(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi, "bins": self.size, "units": self.units}

    def __str__(self):
        return f"ContinuousSpace([{self.lo}, {self.hi}], K={self.bins})"


OutcomeSpace = DiscreteSpace | ContinuousSpace


@dataclass(frozen=True)
class Part:
    """A named stage of a system (initializer, object model or prober)."""

    name: str
    fn: Callable = field(repr=False, compare=False)

    def __call__(self, *args):
        return self.fn(*args)


@dataclass(frozen=True)
class RhoSystem:
    """An experiment: test object, initiating subsystem and probing subsystem.

    ``initializer(streams)`` -> initial conditions for the batch;
    ``object_model(indices, init)`` -> final object state;
    ``prober(state)`` -> ``outcomes`` or ``(outcomes, extras)``.
    """

    descriptor: str
    space: OutcomeSpace
    initializer: Part
    object_model: Part
    prober: Part

    def parts(self) -> dict[str, str]:
        return {
            "object": self.object_model.name,
            "initializer": self.initializer.name,
            "prober": self.prober.name,
        }

    def run_batch(self, indices, seeds: SeedSpec) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        streams = TrialStreams(seeds, indices)
        init = self.initializer(streams)
        state = self.object_model(streams.indices, init)
        probed = self.prober(state)
        if isinstance(probed, tuple):
            outcomes, extras = probed
        else:
            outcomes, extras = probed, {}
        outcomes = np.asarray(outcomes)
        if self.space.kind == "discrete":
            outcomes = outcomes.astype(np.int64) if outcomes.dtype.kind in "iub" else outcomes
        else:
            outcomes = outcomes.astype(np.float64)
        bad = ~self.space.contains(outcomes)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise OutOfSupport(streams.indices[k], outcomes[k].item(), self.space)
        return outcomes, {k: np.asarray(v) for k, v in extras.items()}


@dataclass(frozen=True)
class TrialRecord:
    index: int
    outcome: int | float
    extras: dict[str, Any] = field(default_factory=dict)


class TrialRecords(Sequence):
    """Records of trials ``0..n-1`` of one run, stored column-wise."""

    def __init__(self, outcomes, space: OutcomeSpace, extras: dict | None = None):
        self.outcomes = np.asarray(outcomes)
        self.space = space
        self.extras = dict(extras or {})

    def __len__(self) -> int:
        return self.outcomes.size

    def __getitem__(self, i):
        if isinstance(i, slice):
            return TrialRecords(
                self.outcomes[i], self.space, {k: v[i] for k, v in self.extras.items()}
            )
        n = len(self)
        if i < 0:
            i += n
        if not 0 <= i < n:
            raise IndexError(i)
        return TrialRecord(
            index=i,
            outcome=self.outcomes[i].item(),
            extras={k: v[i].item() for k, v in self.extras.items()},
        )

    @property
    def indices(self) -> np.ndarray:
        return np.arange(len(self), dtype=np.int64)

    def labels(self) -> np.ndarray:
        """Label (discrete) or cell (continuous) index of every outcome."""
        return self.space.cell_index(self.outcomes)

    def __eq__(self, other):
        if not isinstance(other, TrialRecords):
            return NotImplemented
        return (
            self.space == other.space
            and np.array_equal(self.outcomes, other.outcomes)
            and self.extras.keys() == other.extras.keys()
            and all(np.array_equal(self.extras[k], other.extras[k]) for k in self.extras)
        )

    def __repr__(self):
        return f"TrialRecords(n={len(self)}, space={self.space})"


def run_trial(system: RhoSystem, trial_index: int, seeds: SeedSpec) -> TrialRecord:
    """Run a single trial. Pure in ``(system, trial_index, seeds)``."""
    if trial_index < 0:
        raise ValueError("trial_index must be non-negative")
    outcomes, extras = system.run_batch([trial_index], seeds)
    return TrialRecord(
        index=int(trial_index),
        outcome=outcomes[0].item(),
        extras={k: v[0].item() for k, v in extras.items()},
    )


def run_trials(
    system: RhoSystem,
    n: int,
    seeds: SeedSpec,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> TrialRecords:
    """Run trials ``0..n-1``; the result does not depend on ``workers``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    starts = list(range(0, n, chunk_size))

    def work(start):
        return system.run_batch(np.arange(start, min(start + chunk_size, n)), seeds)

    if workers == 1 or len(starts) == 1:
        parts = [work(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, starts))
    # merge in ascending chunk order
    outcomes = np.concatenate([p[0] for p in parts])
    keys = parts[0][1].keys()
    extras = {k: np.concatenate([p[1][k] for p in parts]) for k in keys}
    return TrialRecords(outcomes, system.space, extras)
