"""Catalog of concrete experiments.

Each constructor assembles a :class:`~rhosim.core.RhoSystem` from explicit
initializer, object and prober parts. The catalog at the bottom maps string
ids to constructors, parameter schemas, derived events and reference values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

import numpy as np
from scipy.special import ndtri

from rhosim.core import ContinuousSpace, DiscreteSpace, Part, RhoSystem, SeedSpec, run_trials
from rhosim.stats import half_width

__all__ = [
    "BertrandMethod",
    "BusProber",
    "BusScenarioSpec",
    "CATALOG",
    "CubeFactorySpec",
    "DieSpec",
    "EventSpec",
    "Param",
    "ScenarioEntry",
    "chord_events",
    "cube_below",
    "evaluate_event",
    "get_scenario",
    "make_bertrand",
    "make_bus_scenario",
    "make_camera_die",
    "make_cube_factory",
    "make_deterministic_die",
    "make_nonstationary_walk",
    "make_sublimating_die",
    "make_weighted_die",
    "truncated_gaussian_cdf",
]

FACES = DiscreteSpace(("1", "2", "3", "4", "5", "6"))
SIDE = math.sqrt(3.0)  # side of the equilateral triangle inscribed in the unit circle


def _throwing_hand(streams):
    return streams.uniform(0)


# -- dice --------------------------------------------------------------------


@dataclass(frozen=True)
class DieSpec:
    """Face weights, optionally drifting with the trial index.

    ``drift(indices)`` returns additive adjustments of shape (len(indices), 6);
    the adjusted weights are renormalized per trial.
    """

    weights: tuple[float, ...] = (1 / 6,) * 6
    drift: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) != 6:
            raise ValueError("a die has six faces")
        if any(x < 0 or not math.isfinite(x) for x in w):
            raise ValueError("weights must be finite and non-negative")
        if abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {sum(w)}")

    def weights_at(self, indices: np.ndarray) -> np.ndarray:
        w = np.broadcast_to(np.asarray(self.weights), (indices.size, 6))
        if self.drift is None:
            return w
        w = w + np.asarray(self.drift(indices), dtype=np.float64)
        if np.any(w < -1e-12):
            raise ValueError("drift pushed a face weight below zero")
        w = np.clip(w, 0.0, None)
        return w / w.sum(axis=1, keepdims=True)


def _die_faces(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(weights, axis=-1)
    # face = number of cumulative edges at or below u; zero-weight faces are never hit
    return (cum[..., :5] <= u[:, None]).sum(axis=-1).astype(np.int64)


def _table(state):
    return state


def make_weighted_die(spec: DieSpec, descriptor: str = "weighted die") -> RhoSystem:
    if spec.drift is None:
        cum = np.asarray(spec.weights)[None, :]

        def die(indices, u):
            return _die_faces(cum, u)

        object_name = f"die with weights {tuple(round(w, 6) for w in spec.weights)}"
    else:

        def die(indices, u):
            return _die_faces(spec.weights_at(indices), u)

        object_name = "die whose weights drift with the trial index"
    return RhoSystem(
        descriptor=descriptor,
        space=FACES,
        initializer=Part("throwing hand (one uniform per throw)", _throwing_hand),
        object_model=Part(object_name, die),
        prober=Part("table (face-up side read off)", _table),
    )


def make_sublimating_die(initial_weights=(1 / 6,) * 6, total_drift: float = 0.3, horizon: int = 100_000) -> RhoSystem:
    """Die losing material so face 0 gains ``total_drift`` weight over ``horizon`` trials."""
    w = np.asarray(initial_weights, dtype=np.float64)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if not 0.0 <= w[0] + total_drift <= 1.0:
        raise ValueError("face 0 weight would leave [0, 1]")
    if total_drift == 0:
        return make_weighted_die(DieSpec(tuple(w)), "sublimating die (no drift)")
    rest = w[1:].sum()
    if rest == 0 and total_drift > 0:
        raise ValueError("no weight left to transfer")
    share = np.concatenate([[-1.0], w[1:] / rest]) if rest > 0 else np.zeros(6)

    def drift(indices):
        t = np.minimum(indices / horizon, 1.0)
        return -total_drift * t[:, None] * share[None, :]

    return make_weighted_die(DieSpec(tuple(w), drift), "sublimating die")


def make_deterministic_die(face: int = 0) -> RhoSystem:
    if face not in range(6):
        raise ValueError("face must be in 0..5")

    def placement(streams):
        return np.full(len(streams), face, dtype=np.int64)

    return RhoSystem(
        descriptor=f"die placed face {FACES.labels[face]} up",
        space=FACES,
        initializer=Part(f"hand placing face {FACES.labels[face]} up (no randomness)", placement),
        object_model=Part("die at rest", lambda indices, placed: placed),
        prober=Part("table (face-up side read off)", _table),
    )


def make_camera_die() -> RhoSystem:
    """Fair die watched by a camera that reads the face just before it settles."""
    fair = np.full((1, 6), 1 / 6)

    def camera(faces):
        return faces, {"camera_reading": faces.copy()}

    return RhoSystem(
        descriptor="fair die with camera-equipped observer",
        space=FACES,
        initializer=Part("throwing hand (one uniform per throw)", _throwing_hand),
        object_model=Part("fair die", lambda indices, u: _die_faces(fair, u)),
        prober=Part("camera + table (reading, final face)", camera),
    )


# -- Bertrand chords ---------------------------------------------------------


class BertrandMethod(enum.Enum):
    ENDPOINTS = "endpoints"
    RADIAL_MIDPOINT = "radial"
    DISK_MIDPOINT = "disk"


def _chord_ruler(half_chord_sq):
    return 2.0 * np.sqrt(np.clip(half_chord_sq, 0.0, 1.0))


def make_bertrand(method: BertrandMethod, bins: int = 64) -> RhoSystem:
    """Random chord of the unit circle; outcome is the chord length on [0, 2]."""
    method = BertrandMethod(method)
    space = ContinuousSpace(0.0, 2.0, bins, units="circle radius")
    if method is BertrandMethod.ENDPOINTS:

        def init(streams):
            return 2 * np.pi * streams.uniform(0), 2 * np.pi * streams.uniform(1)

        def chord(indices, angles):
            a, b = angles
            # squared distance of the chord from the centre
            return np.cos((a - b) / 2) ** 2

        init_name = "two independent spins: endpoint angles uniform on the circle"
    elif method is BertrandMethod.RADIAL_MIDPOINT:

        def init(streams):
            return 2 * np.pi * streams.uniform(0), streams.uniform(1)

        def chord(indices, polar):
            _, d = polar
            return d**2

        init_name = "random radius, midpoint uniform along it"
    else:

        def init(streams):
            return 2 * np.pi * streams.uniform(1), np.sqrt(streams.uniform(0))

        def chord(indices, polar):
            _, r = polar
            return r**2

        init_name = "midpoint uniform over the disk area"

    return RhoSystem(
        descriptor=f"Bertrand chord ({method.value})",
        space=space,
        initializer=Part(init_name, init),
        object_model=Part("chord of the unit circle", chord),
        prober=Part("ruler (chord length)", lambda dist_sq: _chord_ruler(1.0 - dist_sq)),
    )


CHORD_EVENTS = DiscreteSpace(("longer", "not-longer"))


def chord_events(lengths) -> np.ndarray:
    """Label 0 when the chord beats the inscribed-triangle side, else 1."""
    return np.where(np.asarray(lengths) > SIDE, 0, 1)


BERTRAND_REFERENCE = {
    BertrandMethod.ENDPOINTS: Fraction(1, 3),
    BertrandMethod.RADIAL_MIDPOINT: Fraction(1, 2),
    BertrandMethod.DISK_MIDPOINT: Fraction(1, 4),
}


# -- cube factory ------------------------------------------------------------


@dataclass(frozen=True)
class CubeFactorySpec:
    mean: float = 1.0
    sigma: float = 0.25
    lo: float = 0.0
    hi: float = 2.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.lo < self.mean < self.hi:
            raise ValueError("mean must lie inside the support")


MAX_REJECTION_ROUNDS = 100_000


def make_cube_factory(spec: CubeFactorySpec = CubeFactorySpec(), bins: int = 64) -> RhoSystem:
    """Gaussian edge lengths, out-of-tolerance cubes rejected."""

    def production(streams):
        x = np.empty(len(streams))
        pending = np.arange(len(streams))
        draw = 0
        while pending.size:
            if draw >= MAX_REJECTION_ROUNDS:
                raise RuntimeError("rejection sampler did not terminate")
            u = streams.take(pending).uniform(draw)
            cand = spec.mean + spec.sigma * ndtri(u)
            ok = (cand >= spec.lo) & (cand <= spec.hi)
            x[pending[ok]] = cand[ok]
            pending = pending[~ok]
            draw += 1
        return x

    return RhoSystem(
        descriptor=f"cube factory (mean {spec.mean} cm, sigma {spec.sigma} cm)",
        space=ContinuousSpace(spec.lo, spec.hi, bins, units="cm"),
        initializer=Part("fabrication process: Gaussian, rejected outside tolerance", production),
        object_model=Part("iron cube", lambda indices, edge: edge),
        prober=Part("caliper (edge length)", lambda edge: edge),
    )


def _phi(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def truncated_gaussian_cdf(t: float, spec: CubeFactorySpec = CubeFactorySpec()) -> float:
    t = min(max(t, spec.lo), spec.hi)
    a = _phi((spec.lo - spec.mean) / spec.sigma)
    b = _phi((spec.hi - spec.mean) / spec.sigma)
    return (_phi((t - spec.mean) / spec.sigma) - a) / (b - a)


def cube_below(system: RhoSystem, threshold: float, n: int, seeds: SeedSpec, z: float = 4.0, workers: int = 1) -> tuple[float, float]:
    """Relative frequency of cubes with edge <= threshold, with its half-width."""
    if not system.space.lo <= threshold <= system.space.hi:
        raise ValueError("threshold outside the support")
    records = run_trials(system, n, seeds, workers=workers)
    p = float(np.mean(records.outcomes <= threshold))
    return p, half_width(p, n, z)


# -- bus stop ----------------------------------------------------------------


class BusProber(enum.Enum):
    WINDOW_WATCHER = "window-watcher"
    TOWER_OBSERVER = "tower-observer"


@dataclass(frozen=True)
class BusScenarioSpec:
    cycle: float = 60.0
    window: float = 5.0
    prober: BusProber = BusProber.WINDOW_WATCHER

    def __post_init__(self):
        object.__setattr__(self, "prober", BusProber(self.prober))
        if not 0 < self.window < self.cycle:
            raise ValueError("need 0 < window < cycle")


BUS_SPACE = DiscreteSpace(("catch", "miss"))


def make_bus_scenario(spec: BusScenarioSpec = BusScenarioSpec()) -> RhoSystem:
    """One bus per cycle, phase re-randomized every trial."""

    def timetable(streams):
        return spec.cycle * streams.uniform(0)

    def bus_line(indices, phase):
        return phase

    if spec.prober is BusProber.WINDOW_WATCHER:

        def prober(wait):
            caught = np.where(wait < spec.window, 0, 1)
            # no per-trial information: the best guess is the likelier label
            guess = 0 if spec.window / spec.cycle > 0.5 else 1
            return caught, {"prediction": np.full(caught.shape, guess)}

        name = "Bob at the stop, watching the next window"
    else:

        def prober(wait):
            caught = np.where(wait < spec.window, 0, 1)
            predicted = np.where(wait < spec.window, 0, 1)
            return caught, {"prediction": predicted, "wait": wait}

        name = "Alice in the tower, seeing where the bus is"

    return RhoSystem(
        descriptor=f"bus stop ({spec.prober.value})",
        space=BUS_SPACE,
        initializer=Part("bus phase uniform over the cycle", timetable),
        object_model=Part(f"bus line, one bus per {spec.cycle:g} min", bus_line),
        prober=Part(name, prober),
    )


# -- Sunday walks ------------------------------------------------------------

WALK_SPACE = ContinuousSpace(0.0, 180.0, 18, units="minutes")
WALK_BASE = 90.0
WALK_SPREAD = 0.3


def walk_level(t: np.ndarray) -> np.ndarray:
    """Typical walk length at life fraction ``t``: steady, lazy years, then decline to zero."""
    t = np.asarray(t, dtype=np.float64)
    level = np.full(t.shape, WALK_BASE)
    level = np.where((t >= 0.3) & (t < 0.5), WALK_BASE / 2, level)
    decline = WALK_BASE * np.clip((1.0 - t) / 0.4, 0.0, 1.0)
    return np.where(t >= 0.6, decline, level)


def make_nonstationary_walk(trend: bool = True, horizon: int = 100_000) -> RhoSystem:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")

    def walker(indices, u):
        t = np.minimum(indices / horizon, 1.0)
        level = walk_level(t) if trend else np.full(t.shape, WALK_BASE)
        return level * (1.0 + WALK_SPREAD * (2.0 * u - 1.0))

    return RhoSystem(
        descriptor="Sunday walk durations" + ("" if trend else " (no trend)"),
        space=WALK_SPACE,
        initializer=Part("weather and mood (one uniform per walk)", _throwing_hand),
        object_model=Part(
            "walker aging over the trial index" if trend else "walker of fixed habits", walker
        ),
        prober=Part("stopwatch (minutes)", lambda d: d),
    )


# -- catalog -----------------------------------------------------------------


@dataclass(frozen=True)
class EventSpec:
    """A named event on the outcomes, optionally conditioned on another one.

    Predicates take ``(outcomes, extras)`` and return boolean arrays.
    """

    name: str
    predicate: Callable = field(repr=False)
    condition: Callable | None = field(default=None, repr=False)
    reference: Fraction | float | None = None


def evaluate_event(event: EventSpec, outcomes, extras, z: float = 4.0) -> dict[str, Any]:
    hit = np.asarray(event.predicate(outcomes, extras), dtype=bool)
    if event.condition is not None:
        cond = np.asarray(event.condition(outcomes, extras), dtype=bool)
        hit = hit & cond
        n = int(cond.sum())
    else:
        n = int(hit.size)
    p = float(hit.sum() / n) if n else None
    hw = half_width(p, n, z) if n else None
    out: dict[str, Any] = {"event": event.name, "n": n, "estimate": p, "half_width": hw}
    if event.reference is not None:
        ref = event.reference
        out["reference"] = float(ref)
        out["reference_exact"] = str(ref) if isinstance(ref, Fraction) else None
        out["agrees"] = bool(p is not None and abs(p - float(ref)) <= hw)
    return out


@dataclass(frozen=True)
class Param:
    name: str
    type: str  # "int" | "float" | "bool" | "floats"
    default: Any
    doc: str

    def parse(self, raw):
        try:
            if self.type == "int":
                if isinstance(raw, bool) or (isinstance(raw, float) and not raw.is_integer()):
                    raise ValueError
                return int(raw)
            if self.type == "float":
                if isinstance(raw, bool):
                    raise ValueError
                return float(Fraction(raw)) if isinstance(raw, str) else float(raw)
            if self.type == "bool":
                if isinstance(raw, bool):
                    return raw
                if str(raw).lower() in ("1", "true", "yes", "on"):
                    return True
                if str(raw).lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError
            if self.type == "floats":
                items = raw.split(",") if isinstance(raw, str) else list(raw)
                return tuple(float(Fraction(x.strip())) if isinstance(x, str) else float(x) for x in items)
        except (ValueError, TypeError, ZeroDivisionError):
            pass
        raise ValueError(f"parameter {self.name!r}: cannot read {raw!r} as {self.type}")

    def to_dict(self) -> dict:
        return {"name": self.name, "type": self.type, "default": self.default, "doc": self.doc}


@dataclass(frozen=True)
class ScenarioEntry:
    id: str
    summary: str
    params: tuple[Param, ...]
    build: Callable[[dict, int], RhoSystem] = field(repr=False)
    events: Callable[[dict], list[EventSpec]] = field(repr=False)

    def resolve(self, raw: dict | None = None) -> dict:
        """Defaults overlaid with ``raw``, every value parsed to its declared type."""
        raw = dict(raw or {})
        known = {p.name: p for p in self.params}
        unknown = sorted(set(raw) - set(known))
        if unknown:
            raise KeyError(f"scenario {self.id!r} has no parameter(s) {', '.join(unknown)}")
        values = {}
        for p in self.params:
            values[p.name] = p.parse(raw[p.name]) if p.name in raw and raw[p.name] is not None else p.default
        return values

    def system(self, raw: dict | None = None, n: int = 100_000) -> RhoSystem:
        return self.build(self.resolve(raw), n)

    def describe(self) -> dict:
        probe = self.system()
        return {
            "id": self.id,
            "summary": self.summary,
            "parts": probe.parts(),
            "space": probe.space.describe(),
            "params": [p.to_dict() for p in self.params],
        }


def _label_events(labels, refs=None) -> list[EventSpec]:
    events = []
    for k, label in enumerate(labels):
        ref = None if refs is None else refs[k]
        events.append(EventSpec(f"face={label}", lambda o, x, k=k: o == k, reference=ref))
    return events


def _horizon(params, n):
    return params["horizon"] if params.get("horizon") else n


HORIZON = Param("horizon", "int", None, "trial count over which the drift unfolds (default: n)")


def _bertrand_entry(method: BertrandMethod, sid: str, summary: str) -> ScenarioEntry:
    ref = BERTRAND_REFERENCE[method]
    return ScenarioEntry(
        sid,
        summary,
        (Param("bins", "int", 64, "cells for frequency accounting of the chord length"),),
        lambda p, n: make_bertrand(method, p["bins"]),
        lambda p: [
            EventSpec("longer", lambda o, x: o > SIDE, reference=ref),
            EventSpec("shorter", lambda o, x: o < SIDE, reference=1 - ref),
        ],
    )


def _cube_events(p):
    spec = CubeFactorySpec(p["mean"], p["sigma"])
    at_one = Fraction(1, 2) if spec.mean == (spec.lo + spec.hi) / 2 else truncated_gaussian_cdf(1.0, spec)
    return [
        EventSpec("x<=1", lambda o, x: o <= 1.0, reference=at_one),
        EventSpec("x>=1", lambda o, x: o >= 1.0, reference=1 - at_one),
        EventSpec("x<=0.75", lambda o, x: o <= 0.75, reference=truncated_gaussian_cdf(0.75, spec)),
        EventSpec("x<=2", lambda o, x: o <= 2.0, reference=Fraction(1)),
    ]


def _bus_ratio(p) -> Fraction:
    return Fraction(str(p["window"])) / Fraction(str(p["cycle"]))


def _bus_events(p, informed: bool):
    ratio = _bus_ratio(p)
    events = [
        EventSpec("catch", lambda o, x: o == 0, reference=ratio),
        EventSpec("miss", lambda o, x: o == 1, reference=1 - ratio),
    ]
    if informed:
        events += [
            EventSpec("catch|predicted catch", lambda o, x: o == 0, lambda o, x: x["prediction"] == 0, Fraction(1)),
            EventSpec("catch|predicted miss", lambda o, x: o == 0, lambda o, x: x["prediction"] == 1, Fraction(0)),
        ]
    else:
        events.append(
            EventSpec("catch|predicted miss", lambda o, x: o == 0, lambda o, x: x["prediction"] == 1, ratio)
        )
    events.append(
        EventSpec(
            "prediction correct",
            lambda o, x: x["prediction"] == o,
            reference=Fraction(1) if informed else (1 - ratio if ratio <= Fraction(1, 2) else ratio),
        )
    )
    return events


def _bus_params():
    return (
        Param("cycle", "float", 60.0, "minutes between buses"),
        Param("window", "float", 5.0, "minutes the observer is willing to wait"),
    )


def _camera_events(p):
    return _label_events(FACES.labels, [Fraction(1, 6)] * 6) + [
        EventSpec("six|reading six", lambda o, x: o == 5, lambda o, x: x["camera_reading"] == 5, Fraction(1)),
        EventSpec("six|reading not six", lambda o, x: o == 5, lambda o, x: x["camera_reading"] != 5, Fraction(0)),
    ]


def _det_refs(face):
    return [Fraction(int(k == face)) for k in range(6)]


CATALOG: dict[str, ScenarioEntry] = {
    e.id: e
    for e in [
        ScenarioEntry(
            "fair-die",
            "regular die thrown by hand and read on a table",
            (),
            lambda p, n: make_weighted_die(DieSpec(), "fair die"),
            lambda p: _label_events(FACES.labels, [Fraction(1, 6)] * 6),
        ),
        ScenarioEntry(
            "sublimating-die",
            "die losing material on one side, so face 1 gains weight trial by trial",
            (
                Param("initial_weights", "floats", (1 / 6,) * 6, "comma-separated starting weights"),
                Param("total_drift", "float", 0.3, "weight gained by face 1 over the horizon"),
                HORIZON,
            ),
            lambda p, n: make_sublimating_die(p["initial_weights"], p["total_drift"], _horizon(p, n)),
            lambda p: _label_events(FACES.labels),
        ),
        ScenarioEntry(
            "deterministic-die",
            "die placed by hand with a fixed face up",
            (Param("face", "int", 0, "label index of the face placed up (0..5)"),),
            lambda p, n: make_deterministic_die(p["face"]),
            lambda p: _label_events(FACES.labels, _det_refs(p["face"])),
        ),
        _bertrand_entry(BertrandMethod.ENDPOINTS, "bertrand-endpoints", "chord through two uniform points on the circle"),
        _bertrand_entry(BertrandMethod.RADIAL_MIDPOINT, "bertrand-radial", "chord with midpoint uniform along a random radius"),
        _bertrand_entry(BertrandMethod.DISK_MIDPOINT, "bertrand-disk", "chord with midpoint uniform over the disk"),
        ScenarioEntry(
            "cube-factory",
            "iron cubes with Gaussian edge lengths truncated to [0, 2] cm",
            (
                Param("mean", "float", 1.0, "mean edge length, cm"),
                Param("sigma", "float", 0.25, "edge length spread, cm"),
                Param("bins", "int", 64, "cells for frequency accounting"),
            ),
            lambda p, n: make_cube_factory(CubeFactorySpec(p["mean"], p["sigma"]), p["bins"]),
            _cube_events,
        ),
        ScenarioEntry(
            "bus-bob",
            "bus stop observed from the kerb: catch iff a bus comes within the window",
            _bus_params(),
            lambda p, n: make_bus_scenario(BusScenarioSpec(p["cycle"], p["window"], BusProber.WINDOW_WATCHER)),
            lambda p: _bus_events(p, informed=False),
        ),
        ScenarioEntry(
            "bus-alice",
            "same bus line observed from a tower that sees the bus position",
            _bus_params(),
            lambda p, n: make_bus_scenario(BusScenarioSpec(p["cycle"], p["window"], BusProber.TOWER_OBSERVER)),
            lambda p: _bus_events(p, informed=True),
        ),
        ScenarioEntry(
            "camera-die",
            "fair die whose observer films the final face",
            (),
            lambda p, n: make_camera_die(),
            _camera_events,
        ),
        ScenarioEntry(
            "sunday-walk",
            "walk durations over a lifetime: lazy years, then decline to nothing",
            (Param("trend", "bool", True, "apply the lifetime trend (false: fixed habits)"), HORIZON),
            lambda p, n: make_nonstationary_walk(p["trend"], _horizon(p, n)),
            lambda p: [],
        ),
    ]
}


def get_scenario(scenario_id: str) -> ScenarioEntry:
    try:
        return CATALOG[scenario_id]
    except KeyError:
        raise KeyError(f"unknown scenario {scenario_id!r}; try one of {', '.join(CATALOG)}") from None
