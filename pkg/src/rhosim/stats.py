"""Frequency stabilization, relative-frequency probability and randomness classes.

Probability is only assigned to a record sequence once its relative
frequencies are seen to settle. :func:`test_stabilization` is the decision
procedure, :func:`classify_randomness` separates settled-and-unpredictable
sequences from settled-but-predictable ones.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from rhosim.core import ContinuousSpace, OutcomeSpace, TrialRecord, TrialRecords

__all__ = [
    "DensityModel",
    "EmptyInput",
    "EmpiricalDistribution",
    "FrequencyTrace",
    "Inconclusive",
    "InconclusiveError",
    "NonStabilizing",
    "PredictorConfig",
    "RandomnessClass",
    "Stabilizing",
    "StabilizationConfig",
    "TooFewRecords",
    "WrongSpaceKind",
    "classify_randomness",
    "estimate_density",
    "estimate_probability",
    "frequency_trace",
    "geometric_schedule",
    "predictor_accuracy",
    "relative_frequencies",
    "test_stabilization",
]

NORMALIZATION_TOL = 1e-9


class EmptyInput(ValueError):
    """Probability is undefined for zero trials."""


class TooFewRecords(ValueError):
    pass


class WrongSpaceKind(TypeError):
    pass


class InconclusiveError(RuntimeError):
    """Too few trials to classify; carries the :class:`Inconclusive` verdict."""

    def __init__(self, verdict: "Inconclusive"):
        self.verdict = verdict
        super().__init__(verdict.reason)


def _label_array(records, space: OutcomeSpace | None) -> tuple[np.ndarray, OutcomeSpace]:
    if isinstance(records, TrialRecords):
        space = space or records.space
        outcomes = records.outcomes
    elif isinstance(records, np.ndarray):
        outcomes = records
    else:
        outcomes = np.array(
            [r.outcome if isinstance(r, TrialRecord) else r for r in records]
        )
    if space is None:
        raise TypeError("an outcome space is required for plain record sequences")
    if outcomes.size and not space.contains(outcomes).all():
        raise ValueError(f"records contain outcomes outside {space}")
    return space.cell_index(outcomes), space


@dataclass(frozen=True)
class EmpiricalDistribution:
    space: OutcomeSpace
    counts: np.ndarray
    n: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if counts.shape != (self.space.size,):
            raise ValueError("one count per label or cell is required")
        if int(counts.sum()) != self.n:
            raise ValueError("counts must sum to n")

    @property
    def frequencies(self) -> np.ndarray:
        if self.n == 0:
            raise EmptyInput("no trials, no frequencies")
        return self.counts / self.n

    def merge(self, other: "EmpiricalDistribution") -> "EmpiricalDistribution":
        if other.space != self.space:
            raise ValueError("cannot merge distributions over different spaces")
        return EmpiricalDistribution(self.space, self.counts + other.counts, self.n + other.n)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "labels": list(self.space.labels),
            "counts": [int(c) for c in self.counts],
            "frequencies": [float(f) for f in self.frequencies],
        }


def relative_frequencies(records, space: OutcomeSpace | None = None) -> EmpiricalDistribution:
    """Count each label (or cell) and divide by the number of trials."""
    labels, space = _label_array(records, space)
    if labels.size == 0:
        raise EmptyInput("probability is undefined at n = 0")
    counts = np.bincount(labels, minlength=space.size)
    return EmpiricalDistribution(space, counts, int(labels.size))


def estimate_probability(dist: EmpiricalDistribution, target, z: float = 4.0) -> tuple[float, float]:
    """Relative frequency of ``target`` with a ``z``-sigma binomial half-width."""
    if dist.n < 1:
        raise EmptyInput("probability is undefined at n = 0")
    k = dist.space.index_of(target)
    p = dist.counts[k] / dist.n
    return float(p), half_width(p, dist.n, z)


def half_width(p: float, n: int, z: float = 4.0) -> float:
    return float(z * math.sqrt(p * (1.0 - p) / n))


# -- convergence traces ------------------------------------------------------


def geometric_schedule(n: int, min_n: int = 1000, ratio: float = 1.5) -> list[int]:
    """Checkpoints ceil(min_n * ratio**k) below n, closed by n itself."""
    if n < 1:
        raise EmptyInput("no trials")
    points = []
    k = 0
    while True:
        c = math.ceil(min_n * ratio**k)
        if c >= n:
            break
        if not points or c > points[-1]:
            points.append(c)
        k += 1
    points.append(n)
    return points


@dataclass(frozen=True)
class FrequencyTrace:
    labels: tuple[str, ...]
    checkpoints: np.ndarray
    frequencies: np.ndarray  # shape (checkpoints, labels)

    def column(self, target) -> np.ndarray:
        k = target if isinstance(target, int) else self.labels.index(target)
        return self.frequencies[:, k]

    def to_csv(self, fh=None) -> str:
        """Header ``n,<labels...>``, one row per checkpoint, 9 significant digits."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", *self.labels])
        for n_k, row in zip(self.checkpoints, self.frequencies):
            w.writerow([int(n_k), *(f"{x:.9g}" for x in row)])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def frequency_trace(records, space: OutcomeSpace | None = None, checkpoints=None, min_n: int = 1000) -> FrequencyTrace:
    labels, space = _label_array(records, space)
    n = labels.size
    if n == 0:
        raise EmptyInput("no trials")
    if checkpoints is None:
        checkpoints = geometric_schedule(n, min_n)
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    if checkpoints.size == 0 or np.any(np.diff(checkpoints) <= 0):
        raise ValueError("checkpoints must be strictly increasing")
    if checkpoints[0] < 1 or checkpoints[-1] > n:
        raise ValueError(f"checkpoints must lie in [1, {n}]")
    rows = []
    counts = np.zeros(space.size, dtype=np.int64)
    prev = 0
    for c in checkpoints:
        counts += np.bincount(labels[prev:c], minlength=space.size)
        prev = c
        rows.append(counts / c)
    return FrequencyTrace(tuple(space.labels), checkpoints, np.vstack(rows))


# -- stabilization -----------------------------------------------------------


@dataclass(frozen=True)
class StabilizationConfig:
    blocks: int = 10
    burn_in: float = 0.1
    z: float = 4.0
    eps_abs: float = 0.0
    min_n: int = 1000

    def __post_init__(self):
        if self.blocks < 2:
            raise ValueError("blocks must be >= 2")
        if not 0.0 <= self.burn_in < 1.0:
            raise ValueError("burn_in must lie in [0, 1)")
        if not self.z > 0:
            raise ValueError("z must be positive")
        if self.eps_abs < 0:
            raise ValueError("eps_abs must be >= 0")
        if self.min_n < 1:
            raise ValueError("min_n must be >= 1")


@dataclass(frozen=True)
class Stabilizing:
    estimates: np.ndarray
    half_widths: np.ndarray
    n_used: int

    kind = "stabilizing"

    def to_dict(self) -> dict:
        return {
            "verdict": self.kind,
            "n_used": self.n_used,
            "estimates": [float(x) for x in self.estimates],
            "half_widths": [float(x) for x in self.half_widths],
        }


@dataclass(frozen=True)
class NonStabilizing:
    label: int
    block: int
    block_pair: tuple[int, int]
    deviation: float
    allowance: float
    n_used: int

    kind = "non-stabilizing"

    def to_dict(self) -> dict:
        return {
            "verdict": self.kind,
            "n_used": self.n_used,
            "label": self.label,
            "block": self.block,
            "block_pair": list(self.block_pair),
            "deviation": self.deviation,
            "allowance": self.allowance,
        }


@dataclass(frozen=True)
class Inconclusive:
    n: int
    min_n: int

    kind = "inconclusive"

    @property
    def reason(self) -> str:
        return f"n = {self.n} is below min_n = {self.min_n}"

    def to_dict(self) -> dict:
        return {"verdict": self.kind, "n": self.n, "min_n": self.min_n, "reason": self.reason}


StabilizationVerdict = Stabilizing | NonStabilizing | Inconclusive


def _block_counts(labels: np.ndarray, n_labels: int, blocks: int, burn_in: float):
    n = labels.size
    start = int(math.floor(burn_in * n))
    n_block = (n - start) // blocks
    used = labels[start : start + blocks * n_block].reshape(blocks, n_block)
    counts = np.zeros((blocks, n_labels), dtype=np.int64)
    for b in range(blocks):
        counts[b] = np.bincount(used[b], minlength=n_labels)
    return counts, n_block


def test_stabilization(records, space: OutcomeSpace | None = None, config: StabilizationConfig | None = None) -> StabilizationVerdict:
    """Block-frequency test for settled relative frequencies.

    After dropping the burn-in prefix, the remaining records are cut into
    ``config.blocks`` equal blocks. Each block's frequency of each label must
    stay within ``z*sqrt(p(1-p)/n_block) + eps_abs`` of the pooled frequency
    ``p``; the largest violation, if any, is reported.
    """
    config = config or StabilizationConfig()
    labels, space = _label_array(records, space)
    return _stabilization(labels, space.size, config)


def _stabilization(labels: np.ndarray, n_labels: int, config: StabilizationConfig) -> StabilizationVerdict:
    n = labels.size
    if n < config.min_n:
        return Inconclusive(n, config.min_n)
    counts, n_block = _block_counts(labels, n_labels, config.blocks, config.burn_in)
    if n_block == 0:
        return Inconclusive(n, config.min_n)
    n_used = config.blocks * n_block
    pooled = counts.sum(axis=0) / n_used
    block_freq = counts / n_block
    allowance = config.z * np.sqrt(pooled * (1.0 - pooled) / n_block) + config.eps_abs
    excess = np.abs(block_freq - pooled) - allowance
    if (excess > 0).any():
        b, j = np.unravel_index(int(np.argmax(excess)), excess.shape)
        col = block_freq[:, j]
        return NonStabilizing(
            label=int(j),
            block=int(b),
            block_pair=(int(np.argmin(col)), int(np.argmax(col))),
            deviation=float(abs(block_freq[b, j] - pooled[j])),
            allowance=float(allowance[j]),
            n_used=n_used,
        )
    hw = config.z * np.sqrt(pooled * (1.0 - pooled) / n_used)
    return Stabilizing(pooled, hw, n_used)


test_stabilization.__test__ = False  # not a pytest test despite the name


# -- predictability ----------------------------------------------------------


@dataclass(frozen=True)
class PredictorConfig:
    order: int = 2
    train_fraction: float = 0.5

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be >= 0")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


class RandomnessClass(enum.Enum):
    P_RANDOM = "p-random"
    DETERMINISTIC = "deterministic"
    NON_P_RANDOM = "non-p-random"


MIN_TEST_RECORDS = 10


def _contexts(labels: np.ndarray, order: int, n_labels: int, positions: np.ndarray) -> np.ndarray:
    code = np.zeros(positions.size, dtype=np.int64)
    for lag in range(order, 0, -1):
        code = code * n_labels + labels[positions - lag]
    return code


def predictor_accuracy(records, pred: PredictorConfig | None = None, space: OutcomeSpace | None = None) -> float:
    """Hit rate of an order-m conditional-frequency predictor on held-out records.

    The first ``train_fraction`` of the records fixes, for every context of
    the previous ``order`` outcomes, the most frequent next outcome (ties go
    to the lowest label). Contexts never seen in training fall back to the
    overall most frequent training outcome.
    """
    pred = pred or PredictorConfig()
    if space is None and not isinstance(records, TrialRecords):
        values = np.asarray(
            [r.outcome if isinstance(r, TrialRecord) else r for r in records]
            if not isinstance(records, np.ndarray) else records
        )
        labels = values.astype(np.int64)
        n_labels = int(labels.max()) + 1 if labels.size else 1
    else:
        labels, space = _label_array(records, space)
        n_labels = space.size
    return _predict(labels, n_labels, pred)


def _predict(labels: np.ndarray, n_labels: int, pred: PredictorConfig) -> float:
    n = labels.size
    m = pred.order
    split = max(int(math.floor(pred.train_fraction * n)), m)
    if n - split < MIN_TEST_RECORDS:
        raise TooFewRecords(f"need at least {MIN_TEST_RECORDS} test records, have {max(n - split, 0)}")
    if n_labels**m > 1 << 26:
        raise ValueError(f"context table too large: {n_labels}^{m}")

    train_pos = np.arange(m, split)
    table = np.bincount(
        _contexts(labels, m, n_labels, train_pos) * n_labels + labels[train_pos],
        minlength=n_labels ** (m + 1),
    ).reshape(n_labels**m, n_labels)
    fallback = int(np.argmax(np.bincount(labels[:split], minlength=n_labels)))
    seen = table.sum(axis=1) > 0
    best = np.where(seen, np.argmax(table, axis=1), fallback)

    test_pos = np.arange(split, n)
    guesses = best[_contexts(labels, m, n_labels, test_pos)]
    return float(np.mean(guesses == labels[test_pos]))


def classify_randomness(
    records,
    space: OutcomeSpace | None = None,
    config: StabilizationConfig | None = None,
    pred: PredictorConfig | None = None,
) -> RandomnessClass:
    """p-random, deterministic, or non-p-random.

    Raises :class:`InconclusiveError` when there are too few trials to run
    the stabilization test.
    """
    config = config or StabilizationConfig()
    pred = pred or PredictorConfig()
    labels, space = _label_array(records, space)
    verdict = _stabilization(labels, space.size, config)
    if isinstance(verdict, Inconclusive):
        raise InconclusiveError(verdict)
    if isinstance(verdict, NonStabilizing):
        return RandomnessClass.NON_P_RANDOM
    if np.any(verdict.estimates == 1.0):
        return RandomnessClass.DETERMINISTIC
    accuracy = _predict(labels, space.size, pred)
    if accuracy >= 0.99:
        return RandomnessClass.DETERMINISTIC
    n_test = labels.size - max(int(math.floor(pred.train_fraction * labels.size)), pred.order)
    b = float(verdict.estimates.max())
    if accuracy <= b + config.z * math.sqrt(b * (1.0 - b) / n_test):
        return RandomnessClass.P_RANDOM
    return RandomnessClass.DETERMINISTIC


# -- densities ---------------------------------------------------------------


@dataclass(frozen=True)
class DensityModel:
    """Point masses plus a piecewise-constant density over equal cells."""

    atoms: tuple[tuple[float, float], ...] = ()
    edges: np.ndarray = field(default_factory=lambda: np.zeros(0))
    heights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.float64)
        heights = np.asarray(self.heights, dtype=np.float64)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "heights", heights)
        object.__setattr__(self, "atoms", tuple((float(x), float(m)) for x, m in self.atoms))
        if heights.size and edges.size != heights.size + 1:
            raise ValueError("need one more edge than heights")
        if np.any(heights < 0) or any(m < 0 for _, m in self.atoms):
            raise ValueError("masses and heights must be non-negative")
        if abs(self.total_mass() - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"density does not integrate to 1 (got {self.total_mass()!r})")

    def cell_masses(self) -> np.ndarray:
        return self.heights * np.diff(self.edges)

    def total_mass(self) -> float:
        return float(sum(m for _, m in self.atoms) + self.cell_masses().sum())

    def integrate(self, a: float, b: float) -> float:
        """Mass on [a, b]; atoms count when they lie in the closed interval."""
        mass = sum(m for x, m in self.atoms if a <= x <= b)
        if self.heights.size:
            lo = np.clip(self.edges[:-1], a, b)
            hi = np.clip(self.edges[1:], a, b)
            mass += float(np.sum(self.heights * (hi - lo)))
        return float(mass)

    def to_dict(self) -> dict:
        return {
            "atoms": [list(a) for a in self.atoms],
            "edges": [float(e) for e in self.edges],
            "heights": [float(h) for h in self.heights],
        }


def estimate_density(dist: EmpiricalDistribution) -> DensityModel:
    """Histogram density: cell frequency divided by cell width."""
    if not isinstance(dist.space, ContinuousSpace):
        raise WrongSpaceKind("density estimation needs a continuous outcome space")
    if dist.n == 0:
        raise EmptyInput("no trials")
    space = dist.space
    edges = space.edges
    return DensityModel(edges=edges, heights=dist.frequencies / np.diff(edges))
