"""``acgap`` command line: ``run``, ``verify`` and ``summarize``.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiment import (
    ConfigError,
    SchemaError,
    format_summary,
    load_config,
    run_experiment,
    summarize,
)
from .verify.harness import InstanceFamily, verify_all

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("at least one seed is required")
    return seeds


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        n = 0
    if n < 1:
        raise argparse.ArgumentTypeError("--jobs must be a positive integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="acgap", description="Tabular actor-critic gap experiments and checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="train agents and write CSV traces")
    run.add_argument("--config", required=True, help="experiment JSON file")
    run.add_argument("--out", help="output directory (overrides the config)")
    run.add_argument("--seeds", type=_seeds, help="comma-separated seeds, e.g. 0,1,2")
    run.add_argument("--agent", action="append", help="run only this agent (repeatable)")
    run.add_argument("--jobs", type=_positive, default=1)

    ver = sub.add_parser("verify", help="run the identity and oracle checks")
    ver.add_argument("--config", help="JSON with a 'verify' section")
    ver.add_argument("--out", help="directory for report.json and report.txt")
    ver.add_argument("--seeds", type=_seeds, help="instance seeds (default 0..99)")
    ver.add_argument("--jobs", type=_positive, default=1)

    summ = sub.add_parser("summarize", help="summarize trace CSVs")
    summ.add_argument("paths", nargs="*", help="trace CSVs or a run directory")
    summ.add_argument("--out", help="run directory (alternative to paths)")
    summ.add_argument("--threshold", type=float, default=None)
    summ.add_argument("--reference", choices=("auto", "jstar", "own"), default="auto")
    summ.add_argument("--json", action="store_true", help="print JSON instead of a table")
    return p


def _cmd_run(args) -> int:
    cfg = load_config(args.config, seeds=args.seeds, out=args.out, agents=args.agent)
    if cfg.mode == "verify":
        return _verify(cfg.verify, args.seeds, args.out or cfg.out, args.jobs)
    manifest = run_experiment(cfg, jobs=args.jobs)
    print(f"wrote {len(manifest['traces'])} traces and {len(manifest['aggregates'])} aggregates "
          f"to {cfg.out or 'results'}")
    return EXIT_OK


def _verify(section: dict, seeds, out, jobs) -> int:
    section = dict(section)
    try:
        family = InstanceFamily(**{k: tuple(v) for k, v in section.pop("family", {}).items()})
        tolerances = section.pop("tolerances", None)
        checks = section.pop("checks", None)
        lo, hi = section.pop("seed_range", (0, 100))
        if section:
            raise ConfigError(f"unknown verify keys {sorted(section)}")
        if seeds is not None:
            if seeds != list(range(seeds[0], seeds[-1] + 1)):
                raise ConfigError("verify seeds must be a contiguous ascending range")
            lo, hi = seeds[0], seeds[-1] + 1
        report = verify_all(family, tolerances, (lo, hi), checks=checks, jobs=jobs)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"verify config: {exc}") from None
    print(report.to_text())
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / "report.json").write_text(report.to_json())
        (path / "report.txt").write_text(report.to_text() + "\n")
    return EXIT_OK if report.passed else EXIT_VERIFY


def _cmd_verify(args) -> int:
    section = {}
    if args.config:
        section = load_config(args.config).verify
    return _verify(section, args.seeds, args.out, args.jobs)


def _cmd_summarize(args) -> int:
    paths, manifest = [], {}
    for p in ([args.out] if args.out else []) + list(args.paths):
        p = Path(p)
        if p.is_dir():
            paths += [f for f in sorted(p.glob("*__seed*.csv"))]
            if (p / "manifest.json").exists():
                manifest = json.loads((p / "manifest.json").read_text())
        elif p.exists():
            paths.append(p)
        else:
            raise ConfigError(f"no such file or directory: {p}")
    threshold = args.threshold if args.threshold is not None else manifest.get("config", {}).get("threshold", 0.9)
    optimal = manifest.get("env", {}).get("optimal_J")
    reference = args.reference
    if reference == "jstar" and optimal is None:
        raise ConfigError("--reference jstar needs a run directory with manifest.json")
    summary = summarize(paths, threshold, optimal, reference)
    if args.json:
        out = dict(summary, agents=[vars(a) for a in summary["agents"]])
        print(json.dumps(out, indent=2))
    else:
        print(format_summary(summary))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "verify": _cmd_verify, "summarize": _cmd_summarize}[args.command]
    try:
        return handler(args)
    except (ConfigError, SchemaError) as exc:
        print(f"acgap: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
