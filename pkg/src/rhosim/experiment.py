"""Config-driven experiment pipeline and its structured report."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from typing import Any

from rhosim.classical import EquiprobableSpace, check_frequentist_agreement, event_from_descriptor
from rhosim.core import ContinuousSpace, SeedSpec, TrialRecords, run_trials
from rhosim.scenarios import CATALOG, evaluate_event, get_scenario
from rhosim.stats import (
    FrequencyTrace,
    InconclusiveError,
    PredictorConfig,
    StabilizationConfig,
    TooFewRecords,
    classify_randomness,
    estimate_density,
    frequency_trace,
    predictor_accuracy,
    relative_frequencies,
    test_stabilization,
)
from rhosim.streams import MASK64

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "Report",
    "ScenarioError",
    "emit_trace",
    "list_scenarios",
    "load_config",
    "report_schema",
    "run_experiment",
]

SCHEMA_VERSION = 1
CLASSICAL_STREAM = 1


class ConfigError(ValueError):
    pass


class ScenarioError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClassicalCheck:
    J: int
    event: dict


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    params: dict = field(default_factory=dict)
    n: int = 100_000
    seed: int = 0
    stabilization: StabilizationConfig = StabilizationConfig()
    predictor: PredictorConfig = PredictorConfig()
    classical: ClassicalCheck | None = None
    report_path: str | None = None
    trace_path: str | None = None
    workers: int = 1
    format: str = "json"
    timing: bool = False

    def echo(self) -> dict:
        """What identifies the experiment; output paths and worker count are left out."""
        entry = get_scenario(self.scenario)
        return {
            "scenario": self.scenario,
            "params": _jsonable(entry.resolve(self.params)),
            "n": self.n,
            "seed": self.seed,
            "stabilization": asdict(self.stabilization),
            "predictor": asdict(self.predictor),
            "classical": None if self.classical is None else asdict(self.classical),
        }


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _overrides(cls, raw: dict, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be an object")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


CONFIG_KEYS = {
    "scenario", "params", "n", "seed", "stabilization", "predictor",
    "classical", "outputs", "workers", "format", "timing",
}


def load_config(doc: dict) -> ExperimentConfig:
    """Validate a config document (the JSON file layout) into an ExperimentConfig."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(doc) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    if "scenario" not in doc:
        raise ConfigError("config needs a 'scenario'")
    outputs = doc.get("outputs") or {}
    if not isinstance(outputs, dict) or set(outputs) - {"report", "trace"}:
        raise ConfigError("outputs must be an object with optional 'report' and 'trace'")
    classical = doc.get("classical")
    if classical is not None:
        if not isinstance(classical, dict) or set(classical) != {"J", "event"}:
            raise ConfigError("classical must be an object with exactly 'J' and 'event'")
        classical = ClassicalCheck(classical["J"], classical["event"])
    config = ExperimentConfig(
        scenario=doc["scenario"],
        params=doc.get("params") or {},
        n=doc.get("n", 100_000),
        seed=doc.get("seed", 0),
        stabilization=_overrides(StabilizationConfig, doc.get("stabilization") or {}, "stabilization"),
        predictor=_overrides(PredictorConfig, doc.get("predictor") or {}, "predictor"),
        classical=classical,
        report_path=outputs.get("report"),
        trace_path=outputs.get("trace"),
        workers=doc.get("workers", 1),
        format=doc.get("format", "json"),
        timing=bool(doc.get("timing", False)),
    )
    validate_config(config)
    return config


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def validate_config(config: ExperimentConfig) -> None:
    if config.scenario not in CATALOG:
        raise ConfigError(f"unknown scenario {config.scenario!r}; try one of {', '.join(CATALOG)}")
    if not _is_int(config.n) or config.n < 1:
        raise ConfigError(f"n must be a positive integer, got {config.n!r}")
    if not _is_int(config.seed) or not 0 <= config.seed <= MASK64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {config.seed!r}")
    if not _is_int(config.workers) or config.workers < 1:
        raise ConfigError(f"workers must be a positive integer, got {config.workers!r}")
    if config.format not in ("json", "text"):
        raise ConfigError(f"format must be 'json' or 'text', got {config.format!r}")
    if not isinstance(config.params, dict):
        raise ConfigError("params must be an object")
    entry = CATALOG[config.scenario]
    try:
        entry.system(config.params, config.n)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"scenario {config.scenario!r}: {exc.args[0] if exc.args else exc}") from None
    if config.classical is not None:
        J = config.classical.J
        if not _is_int(J) or J < 1:
            raise ConfigError("classical.J must be a positive integer")
        try:
            event_from_descriptor(config.classical.event, J)
        except ValueError as exc:
            raise ConfigError(f"classical.event: {exc}") from None


@dataclass
class Report:
    data: dict[str, Any]
    records: TrialRecords = field(repr=False)
    trace: FrequencyTrace | None = field(default=None, repr=False)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True, allow_nan=False) + "\n"

    def to_text(self) -> str:
        d = self.data
        lines = [
            f"scenario     {d['config']['scenario']}  ({d['system']['descriptor']})",
            f"parts        object: {d['system']['parts']['object']}",
            f"             initializer: {d['system']['parts']['initializer']}",
            f"             prober: {d['system']['parts']['prober']}",
            f"trials       n = {d['distribution']['n']}, seed = {d['config']['seed']}",
            f"verdict      {d['stabilization']['verdict']}",
            f"class        {d['randomness']['class'] or 'undetermined'}"
            + (f"  ({d['randomness']['note']})" if d["randomness"]["note"] else ""),
        ]
        if d["randomness"]["predictor_accuracy"] is not None:
            lines.append(f"predictor    accuracy {d['randomness']['predictor_accuracy']:.6f}")
        if d["estimates"]:
            lines.append("estimates")
            for e in d["estimates"]:
                if e["estimate"] is None:
                    lines.append(f"  {e['event']:<24} (no conditioning trials)")
                    continue
                row = f"  {e['event']:<24} {e['estimate']:.6f} +/- {e['half_width']:.6f}"
                if "reference" in e:
                    ref = e["reference_exact"] or f"{e['reference']:.6f}"
                    row += f"   ref {ref:<10} {'ok' if e['agrees'] else 'DISAGREES'}"
                lines.append(row)
        c = d.get("classical")
        if c:
            lines.append(
                f"classical    exact {c['exact']}  estimate {c['estimate']:.6f} +/- {c['half_width']:.6f}"
                f"  {'ok' if c['agrees'] else 'DISAGREES'}"
            )
        if "timing" in d:
            lines.append(f"wall clock   {d['timing']['seconds']:.3f} s")
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        return self.to_json() if fmt == "json" else self.to_text()


def run_experiment(config: ExperimentConfig) -> Report:
    """Run trials, test stabilization, classify, estimate; no file I/O."""
    validate_config(config)
    started = time.perf_counter()
    entry = get_scenario(config.scenario)
    params = entry.resolve(config.params)
    system = entry.build(params, config.n)
    seeds = SeedSpec(config.seed)
    try:
        records = run_trials(system, config.n, seeds, workers=config.workers)
    except (ValueError, RuntimeError) as exc:
        raise ScenarioError(str(exc)) from exc

    dist = relative_frequencies(records)
    verdict = test_stabilization(records, config=config.stabilization)
    z = config.stabilization.z
    note = None
    try:
        cls = classify_randomness(records, config=config.stabilization, pred=config.predictor).value
    except InconclusiveError as exc:
        cls, note = None, f"inconclusive: {exc}"
    try:
        accuracy = predictor_accuracy(records, config.predictor)
    except (TooFewRecords, ValueError):
        accuracy = None

    data: dict[str, Any] = {
        "schema": "rhosim.report",
        "schema_version": SCHEMA_VERSION,
        "config": config.echo(),
        "system": {"descriptor": system.descriptor, "parts": system.parts(), "space": system.space.describe()},
        "distribution": dist.to_dict(),
        "stabilization": verdict.to_dict(),
        "randomness": {"class": cls, "note": note, "predictor_accuracy": accuracy},
        "estimates": [evaluate_event(e, records.outcomes, records.extras, z) for e in entry.events(params)],
        "density": estimate_density(dist).to_dict() if isinstance(system.space, ContinuousSpace) else None,
        "classical": None,
    }
    if config.classical is not None:
        space = EquiprobableSpace(config.classical.J)
        event = event_from_descriptor(config.classical.event, space.J)
        result = check_frequentist_agreement(
            space, event, config.n, seeds.substream(CLASSICAL_STREAM), z=z, workers=config.workers
        )
        data["classical"] = {"J": space.J, "event": config.classical.event, **result.to_dict()}
    if config.timing:
        data["timing"] = {"seconds": time.perf_counter() - started}
    _check_finite(data)
    trace = frequency_trace(records, min_n=config.stabilization.min_n)
    return Report(data, records, trace)


def _check_finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ScenarioError("non-finite number in report")
    if isinstance(obj, dict):
        for v in obj.values():
            _check_finite(v)
    elif isinstance(obj, list):
        for v in obj:
            _check_finite(v)


def emit_trace(config: ExperimentConfig) -> str:
    """CSV convergence trace of the configured run."""
    validate_config(config)
    entry = get_scenario(config.scenario)
    system = entry.system(config.params, config.n)
    try:
        records = run_trials(system, config.n, SeedSpec(config.seed), workers=config.workers)
    except (ValueError, RuntimeError) as exc:
        raise ScenarioError(str(exc)) from exc
    return frequency_trace(records, min_n=config.stabilization.min_n).to_csv()


def list_scenarios() -> list[dict]:
    return [entry.describe() for entry in CATALOG.values()]


def report_schema() -> dict:
    text = resources.files("rhosim").joinpath("report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def with_overrides(config: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(config, **{k: v for k, v in changes.items() if v is not None})
