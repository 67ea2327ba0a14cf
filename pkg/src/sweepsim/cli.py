"""Command-line entry points.

Exit codes are stable API: 0 success, 2 configuration/usage error,
3 run finished without reaching mission completion.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import engine, metrics, world
from .errors import (ConfigError, IncompatibleLog, IncompatibleReports,
                     InvalidSchedule, ParseError, SweepsimError, VersionMismatch)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INCOMPLETE = 3


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_CONFIG)


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise ConfigError(f"size must look like 50x50, got {text!r}") from None


def _parse_seeds(text: str) -> list[int]:
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise ConfigError("no seeds given")
    return seeds


@click.group()
def main():
    """Deterministic multi-robot threat-survey simulator."""


@main.command()
@click.option("--size", default="50x50", show_default=True)
@click.option("--threats", default=10, show_default=True)
@click.option("--seed", default=1, show_default=True)
@click.option("--indoor", default=0.12, show_default=True,
              help="Indoor area fraction.")
@click.option("--obstacles", default=0.04, show_default=True,
              help="Scattered obstacle density.")
@click.option("--mode", default="centralized", show_default=True,
              type=click.Choice(["centralized", "mns"]))
@click.option("--out", "outfile", default="scenario.json", show_default=True,
              type=click.Path(dir_okay=False))
def generate(size, threats, seed, indoor, obstacles, mode, outfile):
    """Generate a scenario file from parameters and a seed."""
    try:
        w, h = _parse_size(size)
        params = world.ScenarioParams(width=w, height=h, threat_count=threats,
                                      indoor_fraction=indoor,
                                      obstacle_density=obstacles,
                                      controller_mode=mode)
        scenario = world.generate_scenario(params, seed)
        world.save_scenario(scenario, outfile)
    except SweepsimError as exc:
        _fail(str(exc))
    click.echo(f"wrote {outfile}: {w}x{h}, {threats} threats, seed {seed}, "
               f"mode {mode}")


def _run_one(scenario, seed, mode, max_ticks, faults, outdir: Path,
             mission_cfg=None, net_trace_path=None):
    import dataclasses
    scen = dataclasses.replace(scenario, seed=seed)
    tag = f"{mode}_s{seed}"
    trace_records = []
    trace = trace_records.append if net_trace_path else None
    sim = engine.SimRun(scen, max_ticks=max_ticks, mode=mode,
                        mission_cfg=mission_cfg, faults=faults,
                        log_path=outdir / f"events_{tag}.jsonl",
                        net_trace=trace)
    log, report = sim.run_to_completion()
    report_path = outdir / f"report_{tag}.json"
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=1, sort_keys=True)
        f.write("\n")
    heat = sim.coordinators[0].heatmap
    with open(outdir / f"heatmap_{tag}.csv", "w", encoding="utf-8") as f:
        post = heat.posterior().reshape(scen.grid.height, scen.grid.width)
        for row in post:
            f.write(",".join(f"{v:.6f}" for v in row) + "\n")
    if net_trace_path:
        with open(net_trace_path, "w", encoding="utf-8") as f:
            for record in trace_records:
                f.write(json.dumps(record, sort_keys=True) + "\n")
    return log, report, report_path


@main.command(name="run")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True,
              dir_okay=False), required=True)
@click.option("--seed", default=None, type=int,
              help="Override the scenario seed.")
@click.option("--seeds", default=None,
              help="Seed batch, e.g. 1..32 or 1,2,5.")
@click.option("--mode", default=None,
              type=click.Choice(["centralized", "mns"]),
              help="Override the scenario's controller mode.")
@click.option("--max-ticks", default=5000, show_default=True)
@click.option("--faults", "faults_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--outdir", default="out", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--net-trace", is_flag=True,
              help="Also write a per-message network trace.")
def run_cmd(scenario_path, seed, seeds, mode, max_ticks, faults_path, outdir,
            net_trace):
    """Run one scenario (optionally over a seed batch); write artifacts."""
    try:
        if seed is not None and seeds is not None:
            raise ConfigError("give either --seed or --seeds, not both")
        scenario = world.load_scenario(scenario_path)
        seed_list = ([scenario.seed] if seed is None else [seed]) \
            if seeds is None else _parse_seeds(seeds)
        run_mode = mode or scenario.controller_mode
        faults = None
        if faults_path:
            with open(faults_path, "r", encoding="utf-8") as f:
                faults_doc = json.load(f)
            faults = engine.FaultSchedule.from_doc(faults_doc)
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
    except (SweepsimError, json.JSONDecodeError) as exc:
        _fail(str(exc))

    reports = []
    for s in seed_list:
        fresh = (engine.FaultSchedule(faults.entries) if faults else None)
        trace_path = out / f"nettrace_{run_mode}_s{s}.jsonl" if net_trace else None
        try:
            _, report, report_path = _run_one(scenario, s, run_mode, max_ticks,
                                              fresh, out,
                                              net_trace_path=trace_path)
        except SweepsimError as exc:
            _fail(str(exc))
        reports.append(report)
        click.echo(f"seed {s}: {'complete' if report['completed'] else 'INCOMPLETE'}"
                   f" at tick {report['end_tick']}, coverage "
                   f"{report['coverage_final']:.3f} -> {report_path}")

    if len(reports) > 1:
        rows = _aggregate(reports)
        agg_path = out / f"aggregate_{run_mode}.json"
        with open(agg_path, "w", encoding="utf-8") as f:
            json.dump(rows, f, indent=1, sort_keys=True)
            f.write("\n")
        click.echo(f"aggregate over {len(reports)} seeds -> {agg_path}")
        for name in ("coverage_final", "recall", "precision", "end_tick"):
            stats = rows["metrics"].get(name)
            if stats:
                click.echo(f"  {name}: mean {stats['mean']:.4g} "
                           f"sd {stats['sd']:.4g} (n={stats['n']})")
    sys.exit(EXIT_OK if all(r["completed"] for r in reports) else EXIT_INCOMPLETE)


def _aggregate(reports: list[dict]) -> dict:
    import math
    keys = set()
    flat = [metrics._flatten(r) for r in reports]
    for f in flat:
        keys.update(f)
    out = {}
    for key in sorted(keys):
        vals = [f[key] for f in flat if f.get(key) is not None]
        if not vals:
            continue
        mean = sum(vals) / len(vals)
        sd = math.sqrt(sum((v - mean) ** 2 for v in vals) / len(vals)) \
            if len(vals) > 1 else 0.0
        out[key] = {"mean": mean, "sd": sd, "n": len(vals)}
    return {"schema_version": metrics.REPORT_SCHEMA, "runs": len(reports),
            "metrics": out}


@main.command()
@click.argument("report_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("report_b", type=click.Path(exists=True, dir_okay=False))
def compare(report_a, report_b):
    """Per-metric delta table between two run reports."""
    try:
        a = metrics.load_report(report_a)
        b = metrics.load_report(report_b)
        rows = metrics.compare_reports(a, b)
    except (IncompatibleReports, json.JSONDecodeError) as exc:
        _fail(str(exc))
    click.echo(metrics.format_comparison(rows))
    sys.exit(EXIT_OK)


@main.command(name="replay")
@click.argument("event_log", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "outfile", default=None, type=click.Path(dir_okay=False))
def replay_cmd(event_log, outfile):
    """Recompute the metrics report from an event log."""
    try:
        report = engine.replay(event_log)
    except (IncompatibleLog, json.JSONDecodeError) as exc:
        _fail(str(exc))
    text = json.dumps(report, indent=1, sort_keys=True)
    if outfile:
        Path(outfile).write_text(text + "\n", encoding="utf-8")
        click.echo(f"wrote {outfile}")
    else:
        click.echo(text)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--scenario", "scenario_path", type=click.Path(exists=True,
              dir_okay=False), required=True)
@click.option("--seed", default=None, type=int)
@click.option("--mode", default=None, type=click.Choice(["centralized", "mns"]))
@click.option("--max-ticks", default=50000, show_default=True)
@click.option("--port", default=8700, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--pace", default=10.0, show_default=True,
              help="Ticks per second while running.")
@click.option("--autonomous", is_flag=True,
              help="Do not hold phase transitions for operator approval.")
def serve(scenario_path, seed, mode, max_ticks, port, host, pace, autonomous):
    """Run supervised with the operator gateway (JSON frames over WebSocket)."""
    try:
        from .opserver import serve_forever
        scenario = world.load_scenario(scenario_path)
        if seed is not None:
            import dataclasses
            scenario = dataclasses.replace(scenario, seed=seed)
    except (SweepsimError, ImportError) as exc:
        _fail(str(exc))
    try:
        serve_forever(scenario, mode=mode, max_ticks=max_ticks, host=host,
                      port=port, pace=pace, supervised=not autonomous)
    except OSError as exc:
        _fail(f"cannot bind {host}:{port}: {exc}")


if __name__ == "__main__":
    main()
