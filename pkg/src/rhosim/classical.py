"""Laplace probabilities for equiprobable spaces, checked against frequencies.

The classical side is exact: counts of favorable cases are integers and the
probabilities are :class:`fractions.Fraction`. Composed events over tuples of
basic outcomes are counted by full enumeration of all ``J**L`` tuples. The
frequentist side simulates uniform tuples through :mod:`rhosim.core` and is
the only place sampling error enters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from rhosim.core import DiscreteSpace, Part, RhoSystem, SeedSpec, run_trials
from rhosim.stats import DensityModel, NORMALIZATION_TOL, half_width

__all__ = [
    "AgreementResult",
    "ComposedEvent",
    "EnumerationTooLarge",
    "EquiprobableSpace",
    "FavorableExceedsTotal",
    "check_frequentist_agreement",
    "composed_event_probability",
    "discrete_density",
    "event_from_descriptor",
    "laplace_probability",
    "make_tuple_system",
]

ENUMERATION_LIMIT = 10**8
ENUMERATION_CHUNK = 1 << 20


class FavorableExceedsTotal(ValueError):
    pass


class EnumerationTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class EquiprobableSpace:
    J: int
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("J must be >= 1")
        labels = tuple(self.labels) or tuple(str(k + 1) for k in range(self.J))
        object.__setattr__(self, "labels", labels)
        if len(labels) != self.J or len(set(labels)) != self.J:
            raise ValueError("need J unique labels")


@dataclass(frozen=True)
class ComposedEvent:
    """Membership test on L-tuples of basic outcomes.

    ``predicate`` receives an integer array of shape (m, L) holding label
    indices and returns m booleans.
    """

    length: int
    predicate: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    descriptor: dict | None = None

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("length must be >= 1")

    def __call__(self, tuples: np.ndarray) -> np.ndarray:
        return np.asarray(self.predicate(tuples), dtype=bool)


def laplace_probability(space: EquiprobableSpace, favorable: int) -> Fraction:
    if favorable < 0:
        raise ValueError("favorable must be >= 0")
    if favorable > space.J:
        raise FavorableExceedsTotal(f"{favorable} favorable cases out of {space.J}")
    return Fraction(favorable, space.J)


def _tuples(J: int, L: int, start: int, stop: int) -> np.ndarray:
    """Tuples ``start..stop-1`` in lexicographic order, one row each."""
    codes = np.arange(start, stop, dtype=np.int64)
    out = np.empty((codes.size, L), dtype=np.int64)
    for pos in range(L - 1, -1, -1):
        out[:, pos] = codes % J
        codes //= J
    return out


def composed_event_probability(space: EquiprobableSpace, event: ComposedEvent) -> Fraction:
    total = space.J**event.length
    if total > ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"{space.J}^{event.length} = {total} tuples exceeds {ENUMERATION_LIMIT}")
    favorable = 0
    # chunks are merged in ascending order; integer sums make the order immaterial anyway
    for start in range(0, total, ENUMERATION_CHUNK):
        stop = min(start + ENUMERATION_CHUNK, total)
        favorable += int(event(_tuples(space.J, event.length, start, stop)).sum())
    return Fraction(favorable, total)


def make_tuple_system(space: EquiprobableSpace, event: ComposedEvent) -> RhoSystem:
    """Throw L fair J-sided objects per trial and report whether the event occurred."""
    J, L = space.J, event.length

    def throws(streams):
        u = streams.uniforms(L)
        return np.minimum((u * J).astype(np.int64), J - 1)

    return RhoSystem(
        descriptor=f"{L} uniform throws over {J} outcomes",
        space=DiscreteSpace(("no", "yes")),
        initializer=Part(f"{L} independent uniform throws", throws),
        object_model=Part(f"{L}-tuple of equiprobable outcomes", lambda indices, t: t),
        prober=Part("event indicator", lambda t: np.where(event(t), 1, 0)),
    )


@dataclass(frozen=True)
class AgreementResult:
    exact: Fraction
    estimate: float
    half_width: float
    n: int

    @property
    def agrees(self) -> bool:
        return abs(float(self.exact) - self.estimate) <= self.half_width

    def to_dict(self) -> dict:
        return {
            "exact": str(self.exact),
            "exact_value": float(self.exact),
            "estimate": self.estimate,
            "half_width": self.half_width,
            "n": self.n,
            "agrees": self.agrees,
        }


def check_frequentist_agreement(
    space: EquiprobableSpace,
    event: ComposedEvent,
    n: int,
    seeds: SeedSpec,
    z: float = 4.0,
    workers: int = 1,
) -> AgreementResult:
    exact = composed_event_probability(space, event)
    records = run_trials(make_tuple_system(space, event), n, seeds, workers=workers)
    p = float(records.outcomes.mean())
    return AgreementResult(exact, p, half_width(p, n, z), n)


def discrete_density(masses, locations=None) -> DensityModel:
    """Point-mass density; ``locations`` default to the label indices."""
    masses = [float(m) for m in masses]
    if not masses:
        raise ValueError("need at least one mass")
    if abs(sum(masses) - 1.0) > NORMALIZATION_TOL:
        raise ValueError(f"masses sum to {sum(masses)}, not 1")
    locations = range(len(masses)) if locations is None else locations
    return DensityModel(atoms=tuple(zip((float(x) for x in locations), masses)))


# -- closed descriptor schema ------------------------------------------------

DESCRIPTOR_KINDS = ("always", "never", "in", "at_least", "at_most", "exactly", "run", "all_of", "any_of", "not")


def _need(desc: dict, key: str, kind=int):
    if key not in desc:
        raise ValueError(f"event descriptor {desc.get('kind')!r} needs {key!r}")
    value = desc[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ValueError(f"{key!r} must be an integer")
    return value


def event_from_descriptor(desc: dict, J: int | None = None) -> ComposedEvent:
    """Build an event from a JSON-style descriptor.

    Kinds (``length`` is the tuple length, outcomes are label indices):

    - ``always`` / ``never``
    - ``in``: ``outcomes`` (list), ``length`` 1; basic outcome in the set
    - ``at_least`` / ``at_most`` / ``exactly``: ``outcome``, ``count``, ``length``
    - ``run``: ``outcome``, ``count``; ``count`` consecutive occurrences
    - ``all_of`` / ``any_of``: ``events`` (list of descriptors, equal lengths)
    - ``not``: ``event``
    """
    if not isinstance(desc, dict) or "kind" not in desc:
        raise ValueError("event descriptor must be an object with a 'kind'")
    kind = desc["kind"]
    if kind not in DESCRIPTOR_KINDS:
        raise ValueError(f"unknown event kind {kind!r}; expected one of {', '.join(DESCRIPTOR_KINDS)}")

    def check_outcome(o):
        if J is not None and not 0 <= o < J:
            raise ValueError(f"outcome {o} outside 0..{J - 1}")
        return o

    if kind in ("all_of", "any_of"):
        subs = [event_from_descriptor(d, J) for d in desc.get("events", [])]
        if not subs:
            raise ValueError(f"{kind!r} needs a non-empty 'events' list")
        lengths = {e.length for e in subs}
        if len(lengths) != 1:
            raise ValueError(f"{kind!r} sub-events must share one length")
        combine = np.logical_and if kind == "all_of" else np.logical_or
        return ComposedEvent(
            lengths.pop(),
            lambda t: combine.reduce([e(t) for e in subs]),
            desc,
        )
    if kind == "not":
        inner = event_from_descriptor(desc.get("event", {}), J)
        return ComposedEvent(inner.length, lambda t: ~inner(t), desc)

    length = _need(desc, "length") if kind != "in" else desc.get("length", 1)
    if kind == "always":
        return ComposedEvent(length, lambda t: np.ones(len(t), dtype=bool), desc)
    if kind == "never":
        return ComposedEvent(length, lambda t: np.zeros(len(t), dtype=bool), desc)
    if kind == "in":
        outcomes = [check_outcome(int(o)) for o in desc.get("outcomes", [])]
        if length != 1:
            raise ValueError("'in' applies to single outcomes (length 1)")
        allowed = np.array(outcomes, dtype=np.int64)
        return ComposedEvent(1, lambda t: np.isin(t[:, 0], allowed), desc)

    outcome = check_outcome(_need(desc, "outcome"))
    count = _need(desc, "count")
    if kind == "run":
        if not 1 <= count <= length:
            raise ValueError("run count must lie in 1..length")

        def has_run(t):
            hit = t == outcome
            streak = np.zeros(len(t), dtype=np.int64)
            best = np.zeros(len(t), dtype=np.int64)
            for pos in range(t.shape[1]):
                streak = np.where(hit[:, pos], streak + 1, 0)
                best = np.maximum(best, streak)
            return best >= count

        return ComposedEvent(length, has_run, desc)

    compare = {"at_least": np.greater_equal, "at_most": np.less_equal, "exactly": np.equal}[kind]
    return ComposedEvent(length, lambda t: compare((t == outcome).sum(axis=1), count), desc)
