"""Command-line entry point: ``harmgrad <experiment> [options]``.

Every run writes ``<name>.json`` (deterministic: no timestamps), one CSV per
table and a ``<name>.meta.json`` sidecar carrying the wall-clock timestamp.
The exit status is 0 iff every metric passed, 1 if some metric failed and 2
on configuration or numerical errors.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from ..errors import HarmgradError
from .config import ExperimentConfig, load_config
from .experiments import REGISTRY, run_experiment

SUBCOMMANDS = {
    "quasimode-residual": "quasimode-residual",
    "stationary-phase": "stationary-phase",
    "density-check": "density-check",
    "qls-forward": "qls-forward",
    "qls-dtn": "qls-dtn",
    "qls-unique": "qls-unique",
}
LINCAL = {"plant": "lincal-plant", "decompose": "lincal-decompose", "tartar": "lincal-tartar"}


def _cell(v):
    if isinstance(v, complex):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return json.dumps([_cell(x) if isinstance(x, complex) else x for x in v], default=str)
    return v


def write_report(rep, out_dir: Path, stem: str):
    out_dir.mkdir(parents=True, exist_ok=True)
    rep.artifacts = []
    for tname, (cols, rows) in sorted(rep.tables.items()):
        fname = f"{stem}.{tname}.csv"
        with open(out_dir / fname, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in rows:
                w.writerow([_cell(v) for v in r])
        rep.artifacts.append(fname)
    (out_dir / f"{stem}.json").write_text(rep.to_json() + "\n")
    meta = {"timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(), "report": f"{stem}.json"}
    (out_dir / f"{stem}.meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return out_dir / f"{stem}.json"


def run_config(cfg: ExperimentConfig, out_dir: Path, threads: int = 1):
    cases = cfg.expanded()

    def one(i_params):
        i, params = i_params
        return run_experiment(cfg.experiment, params, cfg.seed)

    if threads > 1 and len(cases) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            reports = list(ex.map(one, enumerate(cases)))
    else:
        reports = [one(c) for c in enumerate(cases)]
    stems = [cfg.experiment] if len(reports) == 1 else [f"{cfg.experiment}.case{i}" for i in range(len(reports))]
    for rep, stem in zip(reports, stems):
        path = write_report(rep, out_dir, stem)
        status = "PASS" if rep.passed else "FAIL"
        print(f"{status} {stem} -> {path}")
        for m in rep.metrics:
            print(f"  {'ok  ' if m.passed else 'FAIL'} {m.name} = {m.value:.6g} (tol {m.tol})")
    return reports


def _parse_set(items):
    params = {}
    for item in items or []:
        if "=" not in item:
            raise HarmgradError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            params[k] = json.loads(v)
        except json.JSONDecodeError:
            params[k] = v
    return params


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config; its params are overridden by --set")
    common.add_argument("--out-dir", default="results", help="directory for JSON/CSV output")
    common.add_argument("--threads", type=int, default=1, help="worker threads over config cases")
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0, or the config's)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one parameter; VALUE is parsed as JSON when possible")

    p = argparse.ArgumentParser(prog="harmgrad", description="Run a numerical experiment and write a report.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
    lc = sub.add_parser("lincal", help="linearized Calderon experiments")
    lsub = lc.add_subparsers(dest="lincal_command", required=True)
    for name in LINCAL:
        lsub.add_parser(name, parents=[common], help=f"run {LINCAL[name]}")
    r = sub.add_parser("run", parents=[common], help="run the experiment named in a config file")
    r.add_argument("config_path", help="JSON config")
    sub.add_parser("list", help="list experiments and their default parameters")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name, (_, defaults) in sorted(REGISTRY.items()):
            print(f"{name}: {json.dumps(defaults, default=str)}")
        return 0
    try:
        if args.command == "run":
            cfg = load_config(args.config_path)
        else:
            name = LINCAL[args.lincal_command] if args.command == "lincal" else SUBCOMMANDS[args.command]
            if args.config:
                cfg = load_config(args.config)
                if cfg.experiment != name:
                    raise HarmgradError(f"config is for {cfg.experiment!r}, not {name!r}")
            else:
                cfg = ExperimentConfig(name, 0)
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.params = {**cfg.params, **_parse_set(args.set)}
        if args.threads < 1:
            raise HarmgradError("--threads must be positive")
        reports = run_config(cfg, Path(args.out_dir), args.threads)
    except HarmgradError as exc:
        print(f"harmgrad: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0 if all(r.passed for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
