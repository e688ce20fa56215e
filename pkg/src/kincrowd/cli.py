"""Command-line front end: ``kincrowd list | run | sweep``.

Exit status: 0 on success, 2 for an invalid scenario or request, 3 when a
simulation hits a numerically invalid state.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import builtins, metrics
from .errors import ConfigError, KinCrowdError, NumericStateError
from .geometry import quality_field
from .kinetics import speed
from .scenario import ScenarioConfig, load_file, parse_value
from .solver import run as simulate

log = logging.getLogger("kincrowd")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
WORKERS_ENV = "KINCROWD_WORKERS"
SWEEP_METRICS = ("evacuation_time", "final_lane_order")


@dataclass
class RunRequest:
    source: str                         # built-in name or path to a TOML file
    out_dir: Path
    every: Optional[float] = None       # snapshot cadence in seconds
    overrides: dict = field(default_factory=dict)
    figures: bool = True

    def config(self) -> ScenarioConfig:
        if self.every is not None and not self.every > 0:
            raise ConfigError("snapshot cadence must be positive", "--every")
        if self.source in builtins.REGISTRY:
            cfg = builtins.builtin(self.source)
        elif Path(self.source).is_file():
            cfg = load_file(self.source)
        else:
            raise ConfigError(f"{self.source!r} is neither a built-in nor a file", "scenario")
        overrides = dict(self.overrides)
        if self.every is not None:
            overrides["output.snapshot_every"] = self.every
        return cfg.with_overrides(overrides) if overrides else cfg


@dataclass
class SweepRequest:
    base: RunRequest
    key: str
    values: list
    metric: str = "evacuation_time"

    def configs(self) -> list[ScenarioConfig]:
        if len(self.values) < 2:
            raise ConfigError("a sweep needs at least two values", "--values")
        if self.metric not in SWEEP_METRICS:
            raise ConfigError(f"unknown metric {self.metric!r}", "--metric")
        base = self.base.config()
        return [base.with_overrides({self.key: v}) for v in self.values]


def parse_overrides(items: list[str]) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}", "--set")
        key, value = item.split("=", 1)
        out[key.strip()] = parse_value(value.strip())
    return out


def _series_unit(name: str) -> str:
    if name.startswith("density_"):
        return "persons_per_m2"
    if name.startswith("flow_"):
        return "persons_per_s"
    return {"in_room": "persons", "lane_order": "order", "total_mass": "dimensionless",
            "outflow": "dimensionless"}.get(name, "value")


def write_run(trace, cfg: ScenarioConfig, out_dir: Path, figures: bool = True) -> dict:
    """Write CSVs, snapshots, figures and ``manifest.json``; return the manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = trace.problem
    files = []

    (out_dir / "scenario.toml").write_text(cfg.to_toml())
    files.append("scenario.toml")
    for name, values in trace.series.items():
        fname = f"{name}.csv"
        metrics.write_series_csv(out_dir / fname, trace.times, values, _series_unit(name))
        files.append(fname)

    snap_dir = out_dir / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    law = problem.params.velocity_law
    xc, yc = problem.grid.centers()
    quality = quality_field(problem.domain, xc, yc, problem.params.alpha)
    for t, f in trace.snapshots:
        v = speed(f.sum(axis=0), quality, law)
        fname = f"snapshots/t{t:08.2f}.csv"
        metrics.write_snapshot_csv(out_dir / fname, f, v, problem.grid, problem.refs)
        files.append(fname)

    if figures:
        from . import plotting
        if "in_room" in trace.series:
            plotting.plot_series(trace.times, {"in room": trace.series["in_room"]}, "persons",
                                 out_dir / "in_room.png", cfg.name)
            files.append("in_room.png")
        for kind, ylabel in (("flow", "F_V (persons/s)"), ("density", "D_V (persons/m^2)")):
            curves = {k.split("_", 1)[1]: v for k, v in trace.series.items()
                      if k.startswith(kind + "_")}
            if curves:
                plotting.plot_series(trace.times, curves, ylabel, out_dir / f"{kind}.png")
                files.append(f"{kind}.png")
        if "lane_order" in trace.series:
            plotting.plot_series(trace.times, {"lane order": trace.series["lane_order"]},
                                 "lane order parameter", out_dir / "lane_order.png")
            files.append("lane_order.png")
        plotting.plot_snapshots(trace.snapshots, problem.grid, problem.refs, problem.domain,
                                out_dir / "snapshots.png")
        files.append("snapshots.png")

    t_ev = trace.evacuation_time
    manifest = {"scenario": cfg.name,
                "evacuation_time_s": t_ev,
                "evacuated": t_ev is not None,
                "t_final_s": trace.times[-1],
                "files": files}
    if "lane_order" in trace.series:
        manifest["final_lane_order"] = trace.series["lane_order"][-1]
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def _run_one(cfg: ScenarioConfig, out_dir: Path, figures: bool) -> dict:
    trace = simulate(cfg)
    return write_run(trace, cfg, out_dir, figures)


def _sweep_row(args):
    k, cfg, out_dir, figures = args
    try:
        return k, _run_one(cfg, out_dir, figures), None
    except NumericStateError as exc:
        return k, None, str(exc)


def cmd_run(req: RunRequest) -> int:
    cfg = req.config()
    log.info("running %s", cfg.name)
    manifest = _run_one(cfg, req.out_dir, req.figures)
    print(f"{cfg.name}: evacuation time: {metrics.fmt_time(manifest['evacuation_time_s'])}")
    if "final_lane_order" in manifest:
        print(f"{cfg.name}: final lane order {manifest['final_lane_order']:.4f}")
    print(f"outputs in {req.out_dir}")
    return EXIT_OK


def cmd_sweep(req: SweepRequest, workers: int = 1) -> int:
    configs = req.configs()
    out = req.base.out_dir
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(k, cfg, out / f"row{k:02d}", req.base.figures) for k, cfg in enumerate(configs)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_sweep_row, jobs))
    else:
        results = [_sweep_row(j) for j in jobs]

    rows, failed = [], 0
    for (k, manifest, error), value in zip(sorted(results, key=lambda r: r[0]), req.values):
        if error is not None:
            failed += 1
            log.error("row %d (%s = %r) failed: %s", k, req.key, value, error)
            rows.append((value, None, "failed"))
            continue
        if req.metric == "evacuation_time":
            m = manifest["evacuation_time_s"]
        else:
            m = manifest.get("final_lane_order")
        rows.append((value, m, "ok"))
        print(f"{req.key} = {value}: {req.metric} = "
              f"{metrics.fmt_time(m) if req.metric == 'evacuation_time' else m}")

    with open(out / "summary.csv", "w") as fh:
        fh.write(f"{req.key},{req.metric},status\n")
        for value, m, status in rows:
            fh.write(f"{value},{'' if m is None else repr(float(m))},{status}\n")
    if req.base.figures:
        from . import plotting
        plotting.plot_sweep([r[0] for r in rows], [r[1] for r in rows], req.key,
                            req.metric.replace("_", " "), out / "summary.png")
    print(f"summary in {out / 'summary.csv'}")
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_list() -> int:
    for name in builtins.names():
        cfg = builtins.builtin(name)
        print(f"{name:26s} {cfg.description}")
    return EXIT_OK


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}", WORKERS_ENV) from None
    return max(1, n)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kincrowd", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list the built-in scenarios")

    def common(sp):
        sp.add_argument("scenario", help="built-in name or path to a TOML scenario file")
        sp.add_argument("-o", "--out", type=Path, default=None, help="output directory")
        sp.add_argument("--every", type=float, default=None,
                        help="snapshot cadence in seconds (default from the scenario)")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="dotted-path config override (repeatable)")
        sp.add_argument("--no-figures", action="store_true", help="skip PNG output")

    common(sub.add_parser("run", help="run one scenario"))
    sw = sub.add_parser("sweep", help=f"run a scenario for several values of one key; "
                                      f"workers from ${WORKERS_ENV}")
    common(sw)
    sw.add_argument("--key", required=True, help="dotted config key to vary")
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--metric", default="evacuation_time", choices=SWEEP_METRICS)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list":
            return cmd_list()
        out = args.out or Path("runs") / Path(args.scenario).stem
        base = RunRequest(args.scenario, out, args.every, parse_overrides(args.overrides),
                          not args.no_figures)
        if args.command == "run":
            return cmd_run(base)
        values = [parse_value(v.strip()) for v in args.values.split(",") if v.strip()]
        return cmd_sweep(SweepRequest(base, args.key, values, args.metric), _workers())
    except ConfigError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericStateError as exc:
        print(f"error: numeric state: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except KinCrowdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
