"""Operator command line.

Subcommands: generate (run the pipeline into a store), bench (serial vs
pipelined speedup with synthetic stage costs), stats (dataset table),
validate (store invariants), inspect-config (parse/resolve/validate a task
config). Exit codes: 0 success, 1 findings or failures, 2 usage errors.
SYNTHLINE_LOG controls log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import config_dsl
from .assets import load_registry
from .errors import PipelineAborted, SynthlineError
from .pipeline import JobSpec, SyntheticCosts, run_bench, run_pipeline, run_serial_baseline
from .store import compute_stats, validate_store

log = logging.getLogger("synthline")


def _setup_logging():
    level = os.environ.get("SYNTHLINE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _load_config(args):
    cfg = config_dsl.load_task_config(args.config, config_root=args.config_root)
    return config_dsl.resolve_references(cfg)


def _common_pipeline_flags(sub):
    sub.add_argument("--planner-workers", type=int, default=4)
    sub.add_argument("--renderer-workers", type=int, default=1)
    sub.add_argument("--queue-cap", type=int, default=8)
    sub.add_argument("--render-batch", type=int, default=1)
    sub.add_argument("--retry-limit", type=int, default=2)
    sub.add_argument("--json", action="store_true", help="machine-readable output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synthline", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("generate", help="generate episodes into a store")
    gen.add_argument("--config", required=True)
    gen.add_argument("--config-root", default=None)
    gen.add_argument("--assets", required=True)
    gen.add_argument("--episodes", type=int, default=10)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--serial", action="store_true", help="single-stage baseline mode")
    _common_pipeline_flags(gen)

    bench = subs.add_parser("bench", help="serial vs pipelined speedup benchmark")
    bench.add_argument("--episodes", type=int, default=200)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--plan-cost-ms", type=float, default=40.0)
    bench.add_argument("--render-cost-ms", type=float, default=120.0)
    bench.add_argument("--success-rate", type=float, default=0.5)
    _common_pipeline_flags(bench)

    stats = subs.add_parser("stats", help="dataset statistics table")
    stats.add_argument("--store", required=True)
    stats.add_argument("--json", action="store_true")

    val = subs.add_parser("validate", help="validate a store")
    val.add_argument("--store", required=True)
    val.add_argument("--json", action="store_true")

    insp = subs.add_parser("inspect-config", help="parse, resolve, and validate a task config")
    insp.add_argument("--config", required=True)
    insp.add_argument("--config-root", default=None)
    insp.add_argument("--assets", default=None)
    insp.add_argument("--json", action="store_true")
    return parser


def _cmd_generate(args) -> int:
    cfg = _load_config(args)
    registry = load_registry(args.assets)
    report_findings = config_dsl.validate_config(cfg, registry)
    if not report_findings.ok:
        for f in report_findings.findings:
            print(f"config finding: {f.code} at {f.path}: {f.message}", file=sys.stderr)
        return 1
    job = JobSpec(
        episodes=args.episodes,
        root_seed=args.seed,
        config=cfg,
        registry=registry,
        out_root=args.out,
        planner_workers=args.planner_workers,
        renderer_workers=args.renderer_workers,
        queue_capacity=args.queue_cap,
        render_batch=args.render_batch,
        retry_limit=args.retry_limit,
    )
    try:
        report = run_serial_baseline(job) if args.serial else run_pipeline(job)
    except PipelineAborted as exc:
        print(f"aborted: {exc.reason}", file=sys.stderr)
        return 1
    if args.json:
        print(json.dumps(report.to_dict(), sort_keys=True, indent=1))
    else:
        print(f"mode:               {report.mode}")
        print(f"episodes attempted: {report.attempted}")
        print(f"planned ok:         {report.planned_ok}")
        print(f"validated ok:       {report.validated_ok}")
        print(f"rendered:           {report.rendered}")
        print(f"written:            {report.written}")
        print(f"plan failed:        {report.plan_failed}")
        print(f"validation failed:  {report.validation_failed}")
        print(f"permanently failed: {report.permanently_failed}")
        print(f"retries:            {report.retries}")
        print(f"wall time:          {report.wall_time_s:.2f} s")
        print(f"throughput:         {report.throughput_eps_per_s:.2f} eps/s, "
              f"{report.throughput_frames_per_s:.1f} frames/s")
    if not report.accounting_ok():
        print("accounting identity violated", file=sys.stderr)
        return 1
    return 0 if (report.written > 0 or args.episodes == 0) else 1


def _cmd_bench(args) -> int:
    job = JobSpec(
        episodes=args.episodes,
        root_seed=args.seed,
        planner_workers=args.planner_workers,
        renderer_workers=args.renderer_workers,
        queue_capacity=args.queue_cap,
        render_batch=args.render_batch,
        retry_limit=args.retry_limit,
        cpu_render_spillover=False,  # keep the measurement comparable to the model
        synthetic=SyntheticCosts(
            plan_s=args.plan_cost_ms / 1000.0,
            render_setup_s=args.render_cost_ms / 1000.0,
            plan_success_rate=args.success_rate,
        ),
    )
    result = run_bench(job)
    if args.json:
        print(json.dumps(
            {
                "serial_wall_s": result["serial"].wall_time_s,
                "pipelined_wall_s": result["pipelined"].wall_time_s,
                "speedup": result["speedup"],
                "prediction": result["prediction"],
                "serial": result["serial"].to_dict(),
                "pipelined": result["pipelined"].to_dict(),
            },
            sort_keys=True, indent=1,
        ))
    else:
        print(f"{'mode':<12}{'wall s':>10}{'written':>9}{'eps/s':>9}")
        for key in ("serial", "pipelined"):
            r = result[key]
            print(f"{key:<12}{r.wall_time_s:>10.2f}{r.written:>9}{r.throughput_eps_per_s:>9.2f}")
        print(f"speedup:    {result['speedup']:.2f}x (model predicts {result['prediction']:.2f}x)")
    return 0


def _cmd_stats(args) -> int:
    stats = compute_stats(args.store)
    if args.json:
        print(json.dumps(
            {
                "rows": [
                    {
                        "task": r.task,
                        "per_embodiment": r.per_embodiment,
                        "trajectories": r.trajectories,
                        "frames": r.frames,
                    }
                    for r in stats.rows
                ],
                "total_trajectories": stats.total_trajectories,
                "total_frames": stats.total_frames,
                "total_hours": stats.total_hours,
                "fps": stats.fps,
            },
            sort_keys=True, indent=1,
        ))
        return 0
    embodiments = list(stats.embodiments)
    header = f"{'Task Name':<32}" + "".join(f"{e:>22}" for e in embodiments) + f"{'Sum':>10}"
    print(header)
    print("-" * len(header))
    for row in stats.rows:
        cells = "".join(f"{row.per_embodiment.get(e, ''):>22}" for e in embodiments)
        print(f"{row.task:<32}{cells}{row.trajectories:>10}")
    print("-" * len(header))
    print(f"{'Overall Trajectories':<32}{stats.total_trajectories:>{22 * len(embodiments) + 10}}")
    print(f"{'Overall Frames':<32}{stats.total_frames:>{22 * len(embodiments) + 10}}")
    print(f"{'Overall Hours':<32}{stats.total_hours:>{22 * len(embodiments) + 10}.2f}")
    return 0


def _cmd_validate(args) -> int:
    report = validate_store(args.store)
    if args.json:
        print(json.dumps(
            {"findings": [{"code": f.code, "where": f.where, "message": f.message} for f in report.findings]},
            sort_keys=True, indent=1,
        ))
    else:
        for f in report.findings:
            print(f"{f.code} at {f.where}: {f.message}")
        print(f"{len(report.findings)} finding(s)")
    return 0 if report.ok else 1


def _cmd_inspect(args) -> int:
    cfg = _load_config(args)
    registry = load_registry(args.assets) if args.assets else None
    report = config_dsl.validate_config(cfg, registry) if registry is not None else None
    if args.json:
        print(json.dumps(
            {
                "name": cfg.name,
                "task_id": cfg.task_id,
                "robots": [r.name for r in cfg.robots],
                "objects": [o.name for o in cfg.objects],
                "regions": len(cfg.regions),
                "cameras": [c.name for c in cfg.cameras],
                "skill_steps": sum(len(b.steps) for b in cfg.skills),
                "findings": [
                    {"code": f.code, "path": f.path, "message": f.message}
                    for f in (report.findings if report else [])
                ],
            },
            sort_keys=True, indent=1,
        ))
    else:
        print(f"name:        {cfg.name}")
        print(f"task_id:     {cfg.task_id}")
        print(f"robots:      {', '.join(r.name for r in cfg.robots) or '-'}")
        print(f"objects:     {', '.join(o.name for o in cfg.objects) or '-'}")
        print(f"regions:     {len(cfg.regions)}")
        print(f"cameras:     {', '.join(c.name for c in cfg.cameras) or '-'}")
        print(f"skill steps: {sum(len(b.steps) for b in cfg.skills)}")
        print(f"instruction: {cfg.data.language_instruction}")
        if report is not None:
            for f in report.findings:
                print(f"finding: {f.code} at {f.path}: {f.message}")
            print(f"{len(report.findings)} finding(s)")
    if report is not None and not report.ok:
        return 1
    return 0


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate": _cmd_generate,
        "bench": _cmd_bench,
        "stats": _cmd_stats,
        "validate": _cmd_validate,
        "inspect-config": _cmd_inspect,
    }
    try:
        return handlers[args.command](args)
    except SynthlineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
