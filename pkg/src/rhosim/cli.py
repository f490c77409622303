"""Command-line runner.

    rhosim --list [--format json]
    rhosim --scenario fair-die --n 600000 --seed 42 --out report.json --trace trace.csv
    rhosim --config experiment.json --workers 8

Exit codes: 0 success, 1 I/O failure, 2 invalid configuration, 3 scenario error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from rhosim.experiment import ConfigError, ScenarioError, list_scenarios, load_config, run_experiment

EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_SCENARIO = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rhosim",
        description="Run a cataloged probabilistic experiment and test its frequencies for stabilization.",
    )
    p.add_argument("--list", action="store_true", help="list the scenario catalog and exit")
    p.add_argument("--config", type=Path, help="JSON experiment config; flags override its values")
    p.add_argument("--scenario", help="scenario id (see --list)")
    p.add_argument("--param", action="append", default=[], metavar="K=V", help="scenario parameter (repeatable)")
    p.add_argument("--n", type=int, help="number of trials")
    p.add_argument("--seed", type=int, help="master seed (64-bit unsigned)")
    p.add_argument("--blocks", type=int, help="blocks in the stabilization test")
    p.add_argument("--burn-in", type=float, help="fraction of leading trials ignored by the test")
    p.add_argument("--z", type=float, help="allowance multiplier (binomial sigmas)")
    p.add_argument("--eps-abs", type=float, help="absolute precision added to the allowance")
    p.add_argument("--min-n", type=int, help="fewest trials for a verdict")
    p.add_argument("--order", type=int, help="context length of the predictability check")
    p.add_argument("--event", help="classical check: composed event descriptor as JSON")
    p.add_argument("--classical-j", type=int, help="classical check: number of equiprobable outcomes")
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--trace", help="convergence trace CSV path")
    p.add_argument("--workers", type=int, help="worker threads; results do not depend on it")
    p.add_argument("--format", choices=("json", "text"), help="report format (default json)")
    p.add_argument("--timing", action="store_true", help="add wall-clock duration to the report")
    return p


def _fail(code: int, message: str) -> int:
    print(f"rhosim: {message}", file=sys.stderr)
    return code


def _parse_param(item: str) -> tuple[str, str]:
    key, sep, value = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"--param expects K=V, got {item!r}")
    return key.strip(), value.strip()


def _merge(doc: dict, args) -> dict:
    doc = dict(doc)
    if args.scenario is not None:
        if doc.get("scenario") not in (None, args.scenario):
            doc["params"] = {}
        doc["scenario"] = args.scenario
    if args.param:
        params = dict(doc.get("params") or {})
        params.update(_parse_param(item) for item in args.param)
        doc["params"] = params
    for key in ("n", "seed", "workers", "format"):
        if getattr(args, key) is not None:
            doc[key] = getattr(args, key)
    if args.timing:
        doc["timing"] = True
    stab = dict(doc.get("stabilization") or {})
    for flag, key in (("blocks", "blocks"), ("burn_in", "burn_in"), ("z", "z"), ("eps_abs", "eps_abs"), ("min_n", "min_n")):
        if getattr(args, flag) is not None:
            stab[key] = getattr(args, flag)
    if stab:
        doc["stabilization"] = stab
    if args.order is not None:
        doc["predictor"] = {**(doc.get("predictor") or {}), "order": args.order}
    if args.event is not None or args.classical_j is not None:
        classical = dict(doc.get("classical") or {})
        if args.event is not None:
            try:
                classical["event"] = json.loads(args.event)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"--event is not valid JSON: {exc}") from None
        if args.classical_j is not None:
            classical["J"] = args.classical_j
        classical.setdefault("J", 6)
        doc["classical"] = classical
    outputs = dict(doc.get("outputs") or {})
    if args.out is not None:
        outputs["report"] = args.out
    if args.trace is not None:
        outputs["trace"] = args.trace
    if outputs:
        doc["outputs"] = outputs
    return doc


def _listing(fmt: str | None) -> str:
    entries = list_scenarios()
    if fmt == "json":
        return json.dumps(entries, indent=2, sort_keys=True) + "\n"
    lines = []
    for e in entries:
        lines.append(f"{e['id']}: {e['summary']}")
        for part in ("object", "initializer", "prober"):
            lines.append(f"    {part:<12} {e['parts'][part]}")
        for p in e["params"]:
            lines.append(f"    --param {p['name']}=<{p['type']}>  default {p['default']!r}: {p['doc']}")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list:
        sys.stdout.write(_listing(args.format))
        return 0

    doc = {}
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            return _fail(EXIT_IO, f"cannot read config {args.config}: {exc.strerror or exc}")
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            return _fail(EXIT_CONFIG, f"config {args.config} is not valid JSON: {exc}")
    try:
        config = load_config(_merge(doc, args))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))

    try:
        report = run_experiment(config)
    except ScenarioError as exc:
        return _fail(EXIT_SCENARIO, f"scenario {config.scenario!r} failed: {exc}")

    try:
        if config.trace_path:
            Path(config.trace_path).write_text(report.trace.to_csv(), encoding="utf-8")
        rendered = report.render(config.format)
        if config.report_path:
            Path(config.report_path).write_text(rendered, encoding="utf-8")
        else:
            sys.stdout.write(rendered)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write output: {exc.strerror or exc}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
