"""Report rendering: delimited outputs plus matplotlib figures.

Every report is a pure function of (scenario, seed): the CSV/JSONL files and
the figures are reproducible byte-for-byte given the same inputs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from pervadia import journal as jrn
from pervadia.distsim import SimMetrics
from pervadia.engine import Engine


def write_engine_report(engine: Engine, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    trace = out_dir / "trace.jsonl"
    trace.write_text(engine.triad.export_jsonl())
    written.append(trace)

    metrics = out_dir / "metrics.csv"
    with metrics.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerow(["ticks", engine.world.virtual_tick])
        writer.writerow(["sim_time_ms", engine.world.sim_time])
        writer.writerow(["entities", len(engine.world.entities)])
        writer.writerow(["events", len(engine.triad.events)])
        writer.writerow(["journal_records", len(engine.world.records)])
        writer.writerow(["fired_actions", len(engine.action_log)])
        writer.writerow(["trace_digest", engine.trace_digest()])
        writer.writerow(["state_digest", engine.state_digest()])
    written.append(metrics)

    journal = out_dir / "journal.bin"
    journal.write_bytes(jrn.encode_records(engine.world.records))
    written.append(journal)

    status = out_dir / "status.json"
    status.write_text(json.dumps(engine.gateway.status(), indent=2, sort_keys=True) + "\n")
    written.append(status)

    written.append(save_activity_figure(engine, out_dir / "activity.png"))
    written.append(save_fix_map_figure(engine, out_dir / "fix_map.png"))
    return written


def write_distsim_report(metrics: SimMetrics, trace: list[dict], out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    trace_path = out_dir / "trace.jsonl"
    trace_path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in trace))
    written.append(trace_path)

    metrics_path = out_dir / "metrics.csv"
    with metrics_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerow(["availability", f"{metrics.availability:.6f}"])
        writer.writerow(["staleness_ticks", metrics.staleness])
        writer.writerow(["latency_p50_ms", metrics.latency_p50])
        writer.writerow(["latency_p95_ms", metrics.latency_p95])
        writer.writerow(["consistency_violations", metrics.consistency_violations])
        writer.writerow(["served", metrics.served])
        writer.writerow(["failed", metrics.failed])
        for cls, p95 in sorted(metrics.latency_by_class.items()):
            writer.writerow([f"latency_p95_{cls}_ms", p95])
        for edge, count in sorted(metrics.messages.items()):
            writer.writerow([f"messages_{edge}", count])
    written.append(metrics_path)

    written.append(save_latency_figure(trace, out_dir / "latency.png"))
    return written


def save_activity_figure(engine: Engine, path: Path) -> Path:
    """Events per tick over the run."""
    counts: dict[int, int] = {}
    for event in engine.triad.events:
        counts[event.when[1]] = counts.get(event.when[1], 0) + 1
    ticks = sorted(counts)
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.bar(ticks, [counts[t] for t in ticks], width=1.0, color="#33658a")
    ax.set_xlabel("virtual tick")
    ax.set_ylabel("events")
    ax.set_title("world activity per tick")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def save_fix_map_figure(engine: Engine, path: Path) -> Path:
    """All recorded fixes on an equirectangular scatter, colored by entity."""
    fig, ax = plt.subplots(figsize=(5, 5))
    by_entity: dict[int, list] = {}
    for event in engine.triad.events:
        if event.fix is not None:
            by_entity.setdefault(event.what, []).append(event.fix)
    for entity, fixes in sorted(by_entity.items()):
        ax.plot([f.lon for f in fixes], [f.lat for f in fixes],
                marker="o", markersize=3, linewidth=0.8, label=str(entity))
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.set_title("recorded fixes")
    if by_entity and len(by_entity) <= 12:
        ax.legend(fontsize=7, title="entity")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def save_heatmap_figure(counts: dict[tuple[int, int], int], path: Path) -> Path:
    """Render a heat-map grid (cell -> activity count) to a file."""
    fig, ax = plt.subplots(figsize=(5, 5))
    if counts:
        cells = sorted(counts)
        lats = [c[0] for c in cells]
        lons = [c[1] for c in cells]
        values = [counts[c] for c in cells]
        sc = ax.scatter(lons, lats, c=values, cmap="hot", marker="s", s=60)
        fig.colorbar(sc, ax=ax, label="fixes")
    ax.set_xlabel("lon cell")
    ax.set_ylabel("lat cell")
    ax.set_title("activity heat map")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def save_latency_figure(trace: list[dict], path: Path) -> Path:
    """Op latency over time, split by traffic class."""
    fig, ax = plt.subplots(figsize=(7, 3))
    for cls, color in (("inelastic", "#d1495b"), ("elastic", "#33658a")):
        points = [(r["t"], r["latency"]) for r in trace
                  if r.get("type") == "op" and r.get("traffic") == cls and "latency" in r]
        if points:
            ax.plot([p[0] for p in points], [p[1] for p in points],
                    ".", color=color, label=cls)
    ax.set_xlabel("tick")
    ax.set_ylabel("latency (ms)")
    ax.set_title("op latency by traffic class")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
