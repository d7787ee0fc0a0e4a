"""Command-line entry point: ``rlorca train | run | bench``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from importlib import resources
from pathlib import Path

from rlorca.errors import ConfigError, FormatError, UsageError
from rlorca.export import emit_plot, export
from rlorca.policy import Policy, load_params
from rlorca.scenario import builtin_scenario, load_scenario
from rlorca.sim import run as run_scenario

EXIT_OK, EXIT_USAGE, EXIT_CONFIG = 0, 2, 3

BENCH_SUITE = (
    ("circle3", "circle", {"n": 3}),
    ("circle4", "circle", {"n": 4}),
    ("circle8", "circle", {"n": 8}),
    ("circle42", "circle", {"n": 42}),
    ("concentric10_10", "concentric", {"n_outer": 10, "n_inner": 10}),
)
BENCH_RADIUS_INFLATION = 1.1
# a longer look-ahead than the 2 s default: at 20 Hz the bicycle can only
# change its velocity a little per step, and a 2 s horizon lets the dense
# 42-agent crossing tighten faster than the agents can follow
BENCH_HORIZON_S = 3.0
BENCH_TIME_LIMIT_S = 120.0


def default_policy_path() -> Path:
    return Path(str(resources.files("rlorca") / "data" / "pretrained.params"))


def _policy(path: str | None, sc) -> Policy:
    p = Path(path) if path else default_policy_path()
    try:
        params = load_params(p)
    except OSError as exc:
        raise ConfigError(f"cannot read policy {p}: {exc}") from exc
    except FormatError as exc:
        raise ConfigError(str(exc)) from exc
    return Policy(params, box=sc.limits)


def cmd_train(args) -> int:
    from rlorca.policy import save_params
    from rlorca.training import TrainConfig, params_hash, train

    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read training config {args.config}: {exc}") from exc
    cfg = TrainConfig.from_dict(raw)
    if args.seed is not None:
        cfg = replace(cfg, es=replace(cfg.es, seed=args.seed))
    if args.generations is not None:
        cfg = replace(cfg, es=replace(cfg.es, generations=args.generations))
    out = Path(args.out)
    log_path = Path(args.log) if args.log else out.with_suffix(".log.csv")
    params, history = train(cfg, checkpoint_dir=args.checkpoint_dir, log_path=log_path, checkpoint_every=args.checkpoint_every)
    save_params(out, params)
    print(f"wrote {out} sha256={params_hash(params)} generations={len(history)}")
    return EXIT_OK


def cmd_run(args) -> int:
    overrides = {"dt": args.dt, "max_steps": args.max_steps}
    sc = load_scenario(args.scenario, overrides)
    policy = _policy(args.policy, sc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log, metrics = run_scenario(sc, policy, workers=args.workers)
    export(log, out / "trajectory.csv")
    if args.json:
        export(log, out / "trajectory.json")
    summary = dict(scenario=sc.name, seed=args.seed, **metrics.to_dict())
    (out / "metrics.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if args.svg:
        emit_plot(log, out / "trajectory.svg", title=sc.name, show_interventions=args.interventions)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def bench_suite(policy_path: str | None = None, out_dir=None, svg: bool = True) -> list[dict]:
    """Run the builtin benchmark scenarios and return one row of metrics per scenario."""
    rows = []
    for label, name, params in BENCH_SUITE:
        sc = builtin_scenario(name, params)
        sc = replace(
            sc,
            orca=replace(sc.orca, radius_inflation=BENCH_RADIUS_INFLATION, horizon_T=BENCH_HORIZON_S),
            max_steps=int(round(BENCH_TIME_LIMIT_S / sc.dt)),
        )
        policy = _policy(policy_path, sc)
        t0 = time.perf_counter()
        log, m = run_scenario(sc, policy)
        wall = time.perf_counter() - t0
        if out_dir is not None:
            d = Path(out_dir)
            d.mkdir(parents=True, exist_ok=True)
            export(log, d / f"{label}.csv")
            if svg:
                emit_plot(log, d / f"{label}.svg", title=label, show_interventions=True)
        last = max((t for t in m.arrival_times if t is not None), default=0.0)
        rows.append(
            dict(
                scenario=label,
                agents=sc.n_agents,
                collisions=m.collisions,
                min_dist=m.min_pairwise_distance,
                deadlocked=m.deadlocked,
                all_arrived=m.all_arrived,
                last_arrival_s=last,
                relaxed=m.qp_status_counts.get("relaxed", 0),
                smoothness=m.mean_smoothness,
                wall_s=wall,
            )
        )
    return rows


def format_table(rows: list[dict]) -> str:
    head = f"{'scenario':<18}{'M':>4}{'coll':>6}{'min_d':>8}{'deadlk':>8}{'arrived':>9}{'t_last':>8}{'relaxed':>9}{'smooth':>8}{'wall':>7}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(
            f"{r['scenario']:<18}{r['agents']:>4}{r['collisions']:>6}{r['min_dist']:>8.3f}{str(r['deadlocked']):>8}"
            f"{str(r['all_arrived']):>9}{r['last_arrival_s']:>8.1f}{r['relaxed']:>9}{r['smoothness']:>8.4f}{r['wall_s']:>7.1f}"
        )
    return "\n".join(lines)


def cmd_bench(args) -> int:
    if args.suite != "paper":
        raise UsageError(f"unknown suite {args.suite!r}")
    rows = bench_suite(args.policy, args.out, svg=not args.no_svg)
    print(format_table(rows))
    ok = all(r["collisions"] == 0 and not r["deadlocked"] and r["all_arrived"] for r in rows)
    return EXIT_OK if ok or not args.strict else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rlorca", description="RL + ORCA collision avoidance for bicycle agents")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train the two-agent policy with evolution strategies")
    t.add_argument("--config", required=True, help="training config JSON")
    t.add_argument("--out", required=True, help="output parameter file")
    t.add_argument("--seed", type=int)
    t.add_argument("--generations", type=int)
    t.add_argument("--log", help="training log CSV (default: <out>.log.csv)")
    t.add_argument("--checkpoint-dir")
    t.add_argument("--checkpoint-every", type=int, default=10)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("--scenario", required=True, help="JSON file or builtin:NAME[:ARG]")
    r.add_argument("--policy", help="parameter file (default: bundled pretrained policy)")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int, default=0, help="recorded in metrics; the simulation itself is deterministic")
    r.add_argument("--dt", type=float)
    r.add_argument("--max-steps", type=int)
    r.add_argument("--svg", action="store_true")
    r.add_argument("--interventions", action="store_true", help="mark projection interventions in the SVG")
    r.add_argument("--json", action="store_true", help="also write trajectory.json")
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="run a scenario suite and print a metrics table")
    b.add_argument("--suite", required=True)
    b.add_argument("--policy")
    b.add_argument("--out", help="directory for CSV logs and SVG plots")
    b.add_argument("--no-svg", action="store_true")
    b.add_argument("--strict", action="store_true", help="exit 1 unless every scenario is clean")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
