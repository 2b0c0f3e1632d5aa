"""Command line front door: serve the gateway, replay episodes, run the
synthetic data pipeline, and score prediction files."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import datagen, metrics, service
from .goldens import ALL_GOLDENS, load_golden
from .replay import replay_families, replay_file, replay_trajectory
from .trajectory import Trajectory, TrajectoryError


def _read_documents(path: Path) -> list[Trajectory]:
    trajectories = []
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                trajectories.append(Trajectory.from_document(doc))
            except (ValueError, TrajectoryError) as exc:
                raise ValueError(f"{path}:{line_no}: {exc}") from exc
    return trajectories


def _family_hint(path: Path, explicit: str | None) -> str | None:
    if explicit:
        return explicit
    return path.stem if path.stem in datagen.FAMILIES else None


def _cmd_serve(args: argparse.Namespace) -> int:
    config = service.ServiceConfig.from_env()
    overrides = {}
    if args.port is not None:
        overrides["port"] = args.port
    if args.store is not None:
        overrides["store_path"] = args.store
    if args.model_endpoint is not None:
        overrides["model_endpoint"] = args.model_endpoint
    if args.sms_mode is not None:
        overrides["sms_mode"] = args.sms_mode
    if args.sms_endpoint is not None:
        overrides["sms_endpoint"] = args.sms_endpoint
    if args.no_demo:
        overrides["seed_demo"] = False
    if args.tick_seconds is not None:
        overrides["tick_seconds"] = args.tick_seconds
    if overrides:
        config = dataclasses.replace(config, **overrides)
    service.serve(config)
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    results = []
    if args.all or not args.targets:
        results.extend(replay_families())
    for target in args.targets:
        path = Path(target)
        if path.exists():
            results.extend(replay_file(path))
        elif target in ALL_GOLDENS:
            results.append(replay_trajectory(load_golden(target), name=target))
        else:
            raise ValueError(f"no such file or golden {target!r}; goldens: "
                             f"{', '.join(ALL_GOLDENS)}")
    for result in results:
        print(result.describe())
    failed = sum(1 for r in results if not r.ok)
    if failed:
        print(f"{failed} of {len(results)} replays diverged", file=sys.stderr)
        return 1
    return 0


def _cmd_generate(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    families = args.family or list(datagen.FAMILIES)
    for family in families:
        trajectories = datagen.generate(family, args.count, seed=args.seed)
        if args.enhance:
            trajectories = datagen.enhance_corpus(
                trajectories, datagen.EnhancementConfig(seed=args.seed))
        target = out_dir / f"{family}.jsonl"
        with target.open("w", encoding="utf-8") as handle:
            for trajectory in trajectories:
                handle.write(json.dumps(trajectory.to_document(),
                                        ensure_ascii=False) + "\n")
        print(f"{target}: {len(trajectories)} trajectories")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    path = Path(args.input)
    family = _family_hint(path, args.family)
    violations = 0
    for index, trajectory in enumerate(_read_documents(path)):
        report = datagen.verify(trajectory, family=family)
        if not report.ok:
            violations += len(report.violations)
            print(f"{path}:{index}: {report.describe()}")
    if violations:
        print(f"{violations} violations", file=sys.stderr)
        return 1
    print("clean")
    return 0


def _cmd_interleave(args: argparse.Namespace) -> int:
    path = Path(args.input)
    family = _family_hint(path, args.family)
    written = 0
    with Path(args.out).open("w", encoding="utf-8") as handle:
        for trajectory in _read_documents(path):
            planner, caller = datagen.interleave(trajectory)
            for sample in planner + caller:
                if family:
                    sample["family"] = family
                handle.write(json.dumps(sample, ensure_ascii=False) + "\n")
                written += 1
    print(f"{args.out}: {written} samples")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    samples = []
    with Path(args.input).open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                samples.append(json.loads(line))
    if any("role" not in sample for sample in samples):
        raise ValueError(f"{args.input}: not an interleaved sample file "
                         "(no 'role' field; run datagen interleave first)")
    print(json.dumps(datagen.dataset_stats(samples), indent=2))
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    report = metrics.evaluate_dataset(
        args.pred, args.gold, expected_categories=tuple(args.expect))
    print(report.render_table())
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if args.record:
        Path(args.record).write_text(
            json.dumps(report.to_record(), indent=2) + "\n", encoding="utf-8")
    thresholds = {}
    for spec in args.min:
        metric, _, value = spec.partition("=")
        if metric not in metrics.CALLER_METRICS:
            raise ValueError(f"unknown metric {metric!r} in --min; expected "
                             f"one of {', '.join(metrics.CALLER_METRICS)}")
        thresholds[metric] = float(value)
    failures = report.failing(thresholds)
    for failure in failures:
        print(f"below minimum: {failure}", file=sys.stderr)
    return 1 if failures else 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="health-agent",
        description="On-device health assistant service and data tooling.")
    commands = parser.add_subparsers(dest="command", required=True)

    serve = commands.add_parser("serve", help="run the HTTP gateway")
    serve.add_argument("--port", type=int)
    serve.add_argument("--store", help="sqlite path (default in-memory)")
    serve.add_argument("--model-endpoint",
                       help="completion endpoint; empty uses the rule policy")
    serve.add_argument("--sms-mode", choices=("mock", "external"))
    serve.add_argument("--sms-endpoint")
    serve.add_argument("--no-demo", action="store_true",
                       help="skip seeding the demo user on an empty store")
    serve.add_argument("--tick-seconds", type=float)
    serve.set_defaults(handler=_cmd_serve)

    replay = commands.add_parser(
        "replay", help="re-run recorded episodes and diff every state")
    replay.add_argument("targets", nargs="*",
                        help="golden names or trajectory JSON files; "
                             "none means all goldens")
    replay.add_argument("--all", action="store_true",
                        help="replay every golden before the listed targets")
    replay.set_defaults(handler=_cmd_replay)

    dg = commands.add_parser("datagen", help="synthetic trajectory pipeline")
    dg_commands = dg.add_subparsers(dest="datagen_command", required=True)

    generate = dg_commands.add_parser(
        "generate", help="write trajectory JSONL files, one per family")
    generate.add_argument("--out", required=True, help="output directory")
    generate.add_argument("--count", type=int, default=100,
                          help="trajectories per family")
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--family", action="append",
                          choices=datagen.FAMILIES,
                          help="repeatable; default is every family")
    generate.add_argument("--enhance", action="store_true",
                          help="rewrite entities for corpus diversity")
    generate.set_defaults(handler=_cmd_generate)

    verify = dg_commands.add_parser(
        "verify", help="check a trajectory file; nonzero exit on violations")
    verify.add_argument("--input", required=True)
    verify.add_argument("--family", choices=datagen.FAMILIES,
                        help="enable family checks; inferred from the "
                             "filename when it matches")
    verify.set_defaults(handler=_cmd_verify)

    interleave = dg_commands.add_parser(
        "interleave", help="expand trajectories into per-state samples")
    interleave.add_argument("--input", required=True)
    interleave.add_argument("--out", required=True)
    interleave.add_argument("--family", choices=datagen.FAMILIES,
                            help="tag samples; inferred from the filename "
                                 "when it matches")
    interleave.set_defaults(handler=_cmd_interleave)

    stats = dg_commands.add_parser("stats",
                                   help="per-family sample counts")
    stats.add_argument("--input", required=True)
    stats.set_defaults(handler=_cmd_stats)

    evaluate = commands.add_parser(
        "eval", help="score a prediction file against gold samples")
    evaluate.add_argument("--pred", required=True)
    evaluate.add_argument("--gold", required=True)
    evaluate.add_argument("--record", help="write the report as JSON")
    evaluate.add_argument("--min", action="append", default=[],
                          metavar="METRIC=VALUE",
                          help="fail when a row scores below VALUE")
    evaluate.add_argument("--expect", action="append", default=[],
                          metavar="CATEGORY",
                          help="warn when CATEGORY has no gold samples")
    evaluate.set_defaults(handler=_cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (service.ConfigError, metrics.EmptyCorpus, metrics.LengthMismatch,
            TrajectoryError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
