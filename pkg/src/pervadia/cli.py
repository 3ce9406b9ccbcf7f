"""Command-line entry point: pervadia run | classify | serve | replay.

Exit codes: 0 ok, 1 assertion/acceptance failure, 2 usage/input error.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from pervadia import classify as clf
from pervadia import distsim, journal
from pervadia.errors import InvalidScenarioError, JournalGapError, PervadiaError
from pervadia.scenario import ScenarioFile, build_distsim_scenario, run_engine_scenario
from pervadia.world import World


def bundled_scenario_path(name: str) -> Path:
    return Path(str(resources.files("pervadia").joinpath("scenarios", name)))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="pervadia")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario headless and emit reports")
    p_run.add_argument("scenario", help="scenario file (.json or .toml)")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--ticks", type=int, default=None)
    p_run.add_argument("--out", default="report")
    p_run.add_argument("--format", choices=["text", "csv", "jsonl"], default="text")

    p_classify = sub.add_parser("classify", help="classify technology profiles")
    p_classify.add_argument("profiles", nargs="?", default=None,
                            help="profiles JSON file (default: bundled fixtures)")
    p_classify.add_argument("--out", default=None, help="directory for table.txt/table.csv")
    p_classify.add_argument("--format", choices=["text", "csv"], default="text")

    p_serve = sub.add_parser("serve", help="serve the gateway API")
    p_serve.add_argument("scenario")
    p_serve.add_argument("--listen", default="127.0.0.1:8471")
    p_serve.add_argument("--seed", type=int, default=None)

    p_replay = sub.add_parser("replay", help="replay a journal to a state digest")
    p_replay.add_argument("journal", help="journal.bin from a previous run")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "classify":
            return cmd_classify(args)
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "replay":
            return cmd_replay(args)
    except (FileNotFoundError, InvalidScenarioError, JournalGapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


def _load_scenario(args) -> ScenarioFile:
    path = Path(args.scenario)
    if not path.exists():
        bundled = bundled_scenario_path(path.name)
        if bundled.exists():
            path = bundled
        else:
            raise FileNotFoundError(f"no such scenario: {args.scenario}")
    scenario = ScenarioFile.load(path)
    if getattr(args, "seed", None) is not None:
        scenario.seed = args.seed
    if getattr(args, "ticks", None) is not None:
        scenario.ticks = args.ticks
    return scenario


def cmd_run(args) -> int:
    from pervadia import report

    scenario = _load_scenario(args)
    out_dir = Path(args.out)
    if scenario.topology is not None:
        sim_scenario = build_distsim_scenario(scenario)
        metrics, trace = distsim.run(sim_scenario)
        written = report.write_distsim_report(metrics, trace, out_dir)
        print(f"availability={metrics.availability:.4f} staleness={metrics.staleness} "
              f"violations={metrics.consistency_violations}")
        print(f"trace digest: {distsim.trace_digest(trace)}")
    else:
        engine, _ = run_engine_scenario(scenario)
        written = report.write_engine_report(engine, out_dir)
        print(f"ticks={engine.world.virtual_tick} entities={len(engine.world.entities)} "
              f"events={len(engine.triad.events)}")
        print(f"trace digest: {engine.trace_digest()}")
        print(f"state digest: {engine.state_digest()}")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_classify(args) -> int:
    if args.profiles is None:
        profiles = clf.bundled_profiles()
    else:
        path = Path(args.profiles)
        if not path.exists():
            raise FileNotFoundError(f"no such profiles file: {args.profiles}")
        try:
            profiles = clf.load_profiles(path.read_text())
        except ValueError as exc:
            print(f"error: {args.profiles}: {exc}", file=sys.stderr)
            return 2
    table = clf.render_table(profiles)
    if args.format == "csv":
        print(clf.render_csv(profiles), end="")
    else:
        print(table, end="")
        for profile in profiles:
            verdict = clf.classify(profile)
            print(f"{profile.name}: {verdict.notation}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "table.txt").write_text(table)
        (out_dir / "table.csv").write_text(clf.render_csv(profiles))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from pervadia.scenario import build_engine
    from pervadia.server import build_app

    scenario = _load_scenario(args)
    engine, _ = build_engine(scenario)
    host, _, port = args.listen.partition(":")
    app = build_app(engine, tick_realtime=True)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or "8471"), log_level="warning")
    return 0


def cmd_replay(args) -> int:
    path = Path(args.journal)
    if not path.exists():
        raise FileNotFoundError(f"no such journal: {args.journal}")
    records = journal.decode_records(path.read_bytes())
    world = World()
    for record in records:
        # The journal has no header; recover the tick period from tick records.
        if record.kind == journal.KIND_TICK:
            world.tick_period = record.payload["dt"]
            break
    world.apply_records(records)
    import hashlib

    digest = hashlib.sha256(world.snapshot()).hexdigest()
    print(f"state digest: {digest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
