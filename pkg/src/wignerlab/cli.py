"""Command-line entry point: single runs, dimension sweeps, and self-checks.

Outputs are machine-readable: a key/value report plus a per-round CSV for
``run``, a flat CSV for ``sweep``, and a JSON manifest listing every file
written together with the full configuration echo.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .protocol import (
    RULES,
    VARIANTS,
    ComparisonReport,
    ProtocolConfig,
    TrialLog,
    run_protocol,
)
from .verify import run_checks

MAX_WORKERS_ENV = "WIGNERLAB_MAX_WORKERS"


@dataclass
class RunManifest:
    """Record of one CLI invocation: config echo, version, outputs."""

    command: str
    config: dict
    outputs: list[str] = field(default_factory=list)
    artifact_version: str = __version__
    created_utc: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )

    def write(self, path: Path) -> None:
        payload = {
            "artifact": "wignerlab",
            "artifact_version": self.artifact_version,
            "created_utc": self.created_utc,
            "command": self.command,
            "config": self.config,
            "outputs": self.outputs,
        }
        path.write_text(json.dumps(payload, indent=2) + "\n")


def _config_echo(config: ProtocolConfig) -> dict:
    return {
        "dimension": config.dimension,
        "trials": config.trials,
        "seed": config.seed,
        "rule": config.rule,
        "variant": config.variant,
        "phases": list(config.phases) if config.phases else [],
    }


def _parse_phases(text: str | None) -> tuple[float, ...] | None:
    if not text:
        return None
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError as exc:
        raise ValueError(f"cannot parse --phases {text!r}: {exc}") from None


def _parse_int_list(text: str) -> list[int]:
    parts = [part.strip() for part in text.split(",") if part.strip()]
    return [int(part) for part in parts]


def write_report(path: Path, config: ProtocolConfig, report: ComparisonReport) -> None:
    """Key/value report, one ``key: value`` line each; tables as JSON objects."""
    lines = []
    for key, value in _config_echo(config).items():
        lines.append(f"{key}: {json.dumps(value)}")
    lines.append(f"predicted_summary: {json.dumps(report.predicted_summary.as_dict())}")
    lines.append(f"predicted_rule: {json.dumps(report.predicted_summary.provenance)}")
    lines.append(f"observed_summary: {json.dumps(report.observed_summary.as_dict())}")
    lines.append(f"tvd: {report.tvd!r}")
    lines.append(f"chi2_statistic: {report.chi2_statistic!r}")
    lines.append(f"p_value: {report.p_value!r}")
    lines.append(f"minus_probability_bound: {report.minus_probability_bound!r}")
    lines.append(f"open_lab_outcome: {json.dumps(report.open_lab_outcome)}")
    path.write_text("\n".join(lines) + "\n")


def read_report(path: Path) -> dict:
    """Parse a report file back into a dict (inverse of write_report)."""
    parsed: dict = {}
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(": ")
        try:
            parsed[key] = json.loads(value)
        except json.JSONDecodeError:
            parsed[key] = value
    return parsed


def write_trials_csv(path: Path, log: TrialLog) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["round", "friend_outcome", "predicted_plus", "predicted_minus", "wigner_outcome"]
        )
        for record in log.records:
            writer.writerow(
                [
                    record.round_index,
                    record.friend_outcome,
                    repr(record.prediction["+"]),
                    repr(record.prediction["-"]),
                    record.wigner_outcome,
                ]
            )


SWEEP_COLUMNS = [
    "d",
    "rule",
    "variant",
    "N",
    "seed",
    "predicted_plus",
    "observed_plus",
    "tvd",
    "chi2",
    "p_value",
]


def _sweep_cell(config: ProtocolConfig) -> dict:
    _, report = run_protocol(config)
    return {
        "d": config.dimension,
        "rule": config.rule,
        "variant": config.variant,
        "N": config.trials,
        "seed": config.seed,
        "predicted_plus": repr(report.predicted_summary["+"]),
        "observed_plus": repr(report.observed_summary["+"]),
        "tvd": repr(report.tvd),
        "chi2": repr(report.chi2_statistic),
        "p_value": repr(report.p_value),
    }


def _max_workers() -> int:
    raw = os.environ.get(MAX_WORKERS_ENV, "")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap < 1:
        cap = os.cpu_count() or 1
    return cap


def cmd_run(args: argparse.Namespace) -> int:
    config = ProtocolConfig(
        dimension=args.dimension,
        trials=args.trials,
        seed=args.seed,
        rule=args.rule,
        variant=args.variant,
        phases=_parse_phases(args.phases),
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    log, report = run_protocol(config)

    report_path = out_dir / "report.txt"
    trials_path = out_dir / "trials.csv"
    write_report(report_path, config, report)
    write_trials_csv(trials_path, log)
    manifest = RunManifest(command="run", config=_config_echo(config))
    manifest.outputs = [str(report_path), str(trials_path)]
    manifest.write(out_dir / "manifest.json")

    print(f"rule={config.rule} d={config.dimension} N={config.trials} seed={config.seed}")
    print(f"predicted {report.predicted_summary.as_dict()}")
    print(f"observed  {report.observed_summary.as_dict()}")
    print(
        f"tvd={report.tvd!r} chi2={report.chi2_statistic!r} p_value={report.p_value!r}"
    )
    print(f"open_lab_outcome={report.open_lab_outcome}")
    print(f"wrote {report_path}, {trials_path}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    dimensions = _parse_int_list(args.dimensions)
    rules = [part.strip() for part in args.rules.split(",") if part.strip()]
    if not dimensions:
        raise ValueError("empty dimension list")
    if not rules:
        raise ValueError("empty rule list")
    configs = [
        ProtocolConfig(
            dimension=d,
            trials=args.trials,
            seed=args.seed,
            rule=rule,
            variant=args.variant,
        )
        for rule in rules
        for d in dimensions
    ]
    workers = min(_max_workers(), len(configs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, configs))
    else:
        rows = [_sweep_cell(config) for config in configs]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sweep_path = out_dir / "sweep.csv"
    with sweep_path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    manifest = RunManifest(
        command="sweep",
        config={
            "dimensions": dimensions,
            "rules": rules,
            "trials": args.trials,
            "seed": args.seed,
            "variant": args.variant,
        },
        outputs=[str(sweep_path)],
    )
    manifest.write(out_dir / "manifest.json")
    for row in rows:
        print(
            f"d={row['d']} rule={row['rule']} predicted_plus={row['predicted_plus']} "
            f"tvd={row['tvd']}"
        )
    print(f"wrote {sweep_path}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    results = run_checks(phase_mismatch=args.inject_phase_mismatch)
    failed = [r for r in results if not r.passed]
    for i, result in enumerate(results, start=1):
        status = "PASS" if result.passed else "FAIL"
        print(
            f"[{i:2d}/{len(results)}] {result.name:<40s} "
            f"max|dev| = {result.max_deviation:9.3e}  tol = {result.tolerance:9.3e}  {status}"
        )
    print(f"{len(results)} checks, {len(results) - len(failed)} passed")
    if failed:
        print(f"FAILED: {failed[0].name}")
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wignerlab",
        description=(
            "Simulate the repeated prediction protocol for an observer inside "
            "an isolated lab that is itself measured from outside."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="one protocol run; writes report + trial CSV")
    run_p.add_argument("--dimension", type=int, default=2)
    run_p.add_argument("--trials", type=int, default=10_000)
    run_p.add_argument("--seed", type=int, default=42)
    run_p.add_argument("--rule", choices=RULES, default="standard")
    run_p.add_argument(
        "--variant",
        choices=[v.replace("_", "-") for v in VARIANTS],
        default="messages-out",
    )
    run_p.add_argument("--phases", default=None, help="comma list of radians, one per outcome")
    run_p.add_argument("--out", default="results")
    run_p.set_defaults(handler=cmd_run)

    sweep_p = sub.add_parser("sweep", help="sweep dimensions/rules; writes one CSV row per cell")
    sweep_p.add_argument("--dimensions", default="2,4,8,16", help="comma list of dimensions")
    sweep_p.add_argument("--rules", default="standard", help="comma list of rules")
    sweep_p.add_argument("--trials", type=int, default=10_000)
    sweep_p.add_argument("--seed", type=int, default=42)
    sweep_p.add_argument(
        "--variant",
        choices=[v.replace("_", "-") for v in VARIANTS],
        default="messages-out",
    )
    sweep_p.add_argument("--out", default="results")
    sweep_p.set_defaults(handler=cmd_sweep)

    verify_p = sub.add_parser("verify", help="run the built-in property checks")
    verify_p.add_argument(
        "--inject-phase-mismatch",
        type=float,
        default=0.0,
        metavar="RADIANS",
        help="test hook: offset the lab measurement's phases to break the eigenstate check",
    )
    verify_p.set_defaults(handler=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure, not a flag problem
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
