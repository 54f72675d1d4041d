"""Command-line front end: ``lagflow verify-identities | flow | hodge``.

Settings are resolved in three layers: built-in defaults, then a JSON config
file (``--config``; keys ``scenario``, ``params``, ``grid``, ``flow`` and a few
command-specific ones), then explicit command-line flags.  The resolved
configuration is echoed into ``manifest.json`` and can be fed back through
``--config`` to repeat the run.

Exit codes: 0 success, 1 bad configuration or input, 2 numerical check failed
(identity threshold, Lagrangian violation, solver divergence).
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence


from . import __version__
from .errors import ConfigError, LagflowError, LagrangianViolation, SolverDivergence
from .flow import FlowConfig, run_flow, theta_form
from .geometry import GeometryState
from .grid import ParamGrid, set_workers
from .hodge import hodge_decompose, loop_periods
from .identities import consistency_reports, evaluate_all
from .io import (RunManifest, hodge_to_dict, read_snapshot, write_curve_svg, write_diagnostics_csv,
                 write_json, write_periods_csv, write_snapshot)
from .scenarios import SCENARIO_NAMES, make_scenario

log = logging.getLogger("lagflow")

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2

DEFAULT_OUT = "lagflow_out"

# scenario set checked by ``verify-identities`` when none is given
DEFAULT_IDENTITY_SUITE = (
    {"name": "flat_plane", "params": {}},
    {"name": "circle", "params": {"r": 1.0}},
    {"name": "ellipse", "params": {"a": 1.0, "b": 2.0}},
    {"name": "product_torus", "params": {"r": 1.0, "s": 3.0}},
    {"name": "lagrangian_graph", "params": {"amplitude": 0.1}},
    {"name": "affine_sheet", "params": {}},
    {"name": "perturbed_lagrangian", "params": {"eps": 0.05}},
)

DEFAULT_THRESHOLD = 1e-6
CONSISTENCY_THRESHOLD = 1e-8

DEFAULTS = {
    "verify-identities": {
        "scenario": None,
        "params": {},
        "grid": {"n_grid": 64, "scheme": "spectral"},
        "thresholds": {},
        "out": None,
    },
    "flow": {
        "scenario": "circle",
        "params": {},
        "grid": {"n_grid": 64, "scheme": "spectral"},
        "flow": {"theta": "mcf", "dt": 1e-4, "t_end": 0.01, "cfl_safety": 0.1, "snapshot_stride": 10,
                 "stop_min_eig_g": 1e-6},
        "out": None,
    },
    "hodge": {
        "snapshot": None,
        "basepoint": None,
        "rtol": 1e-10,
        "maxiter": None,
        "out": None,
    },
}


def _merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_param(text: str):
    if "=" not in text:
        raise ConfigError(f"--param expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _flag_overrides(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    if getattr(args, "scenario", None):
        cfg["scenario"] = args.scenario if args.command != "verify-identities" else list(args.scenario)
    if getattr(args, "param", None):
        cfg["params"] = dict(_parse_param(p) for p in args.param)
    grid = {k: v for k, v in (("n_grid", getattr(args, "n_grid", None)),
                              ("scheme", getattr(args, "scheme", None))) if v is not None}
    if grid:
        cfg["grid"] = grid
    flow = {k: getattr(args, k) for k in ("theta", "dt", "t_end", "cfl_safety", "snapshot_stride")
            if getattr(args, k, None) is not None}
    if flow:
        cfg["flow"] = flow
    for key in ("out", "snapshot", "rtol", "maxiter"):
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
    if getattr(args, "basepoint", None) is not None:
        cfg["basepoint"] = [int(b) for b in args.basepoint.split(",")]
    return cfg


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = _merge(DEFAULTS[args.command], _load_config(args.config))
    cfg = _merge(cfg, _flag_overrides(args))
    if cfg.get("out") is None:
        cfg["out"] = os.environ.get("LAGFLOW_OUT", DEFAULT_OUT)
    return cfg


def _grid_for(n: int, grid_cfg: dict) -> ParamGrid:
    sizes = grid_cfg.get("n_grid", 64)
    if isinstance(sizes, (list, tuple)):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) != n:
            raise ConfigError(f"grid has {len(sizes)} sizes for a {n}-dimensional scenario")
    else:
        sizes = (int(sizes),) * n
    try:
        return ParamGrid(sizes, grid_cfg.get("scheme", "spectral"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _scenario_list(cfg: dict) -> list:
    spec = cfg.get("scenario")
    if spec is None:
        return [dict(s) for s in DEFAULT_IDENTITY_SUITE]
    if isinstance(spec, (str, dict)):
        spec = [spec]
    out = []
    for item in spec:
        if isinstance(item, str):
            params = cfg.get("params", {}) if len(spec) == 1 else {}
            out.append({"name": item, "params": params})
        elif isinstance(item, dict) and "name" in item:
            out.append({"name": item["name"], "params": item.get("params", {})})
        else:
            raise ConfigError(f"cannot read scenario entry {item!r}")
    return out


def _threshold(cfg: dict, identity: str) -> float:
    return float(cfg.get("thresholds", {}).get(identity, DEFAULT_THRESHOLD))


# ------------------------------------------------------------------ commands


def cmd_verify_identities(cfg: dict, flip_omega: bool = False, dump_geometry: bool = False) -> tuple:
    """Evaluate every applicable identity on every configured scenario.

    Returns ``(exit_code, reports, outputs)`` where ``reports`` is a list of
    dicts (one per identity and scenario, consistency checks included).
    """
    out_dir = Path(cfg["out"])
    reports, outputs, failed = [], [], []
    for entry in _scenario_list(cfg):
        sc = make_scenario(entry["name"], entry["params"])
        grid = _grid_for(sc.n, cfg["grid"])
        state = GeometryState(sc.sample(grid), omega_sign=-1 if flip_omega else 1)
        items = [(r, _threshold(cfg, r.id)) for r in evaluate_all(state, scenario=sc.name)]
        items += [(r, CONSISTENCY_THRESHOLD) for r in consistency_reports(state, scenario=sc.name)]
        for report, limit in items:
            row = report.to_dict()
            row["threshold"] = limit
            row["passed"] = bool(report.max_residual <= limit)
            if not row["passed"]:
                failed.append(f"{sc.name}/{report.id}")
            reports.append(row)
        if dump_geometry:
            path = out_dir / f"geometry_{sc.name}.json"
            write_json(path, state.to_dict())
            outputs.append(str(path))
    path = out_dir / "identities.json"
    write_json(path, reports, indent=2)
    outputs.append(str(path))
    for name in failed:
        log.error("threshold exceeded: %s", name)
    return (EXIT_CHECK if failed else EXIT_OK), reports, outputs


def cmd_flow(cfg: dict) -> tuple:
    """Run the flow and write diagnostics, snapshots and (for curves) SVGs."""
    sc = make_scenario(cfg["scenario"], cfg.get("params", {}))
    grid = _grid_for(sc.n, cfg["grid"])
    try:
        config = FlowConfig(scheme=grid.scheme, **cfg["flow"])
    except TypeError as exc:
        raise ConfigError(f"bad flow settings: {exc}") from None
    out_dir = Path(cfg["out"])
    try:
        record = run_flow(sc.sample(grid), config)
    except LagrangianViolation as exc:
        log.error("%s", exc)
        return EXIT_CHECK, None, []
    outputs = [str(write_diagnostics_csv(out_dir / "diagnostics.csv", record, sc.n))]
    snap_dir = out_dir / "snapshots"
    for k, (t, F) in enumerate(record.snapshots):
        theta = theta_form(GeometryState(F), config)
        outputs.append(str(write_snapshot(snap_dir / f"snap_{k:05d}.json", F, t, theta)))
        if sc.n == 1:
            outputs.append(str(write_curve_svg(snap_dir / f"snap_{k:05d}.svg", F, sc.lattice)))
    if record.stop_reason:
        log.warning("flow stopped early at t = %.6g: %s", record.final_time, record.stop_reason)
    return EXIT_OK, record, outputs


def cmd_hodge(cfg: dict) -> tuple:
    """Hodge-split the snapshot's 1-form (its ``theta``, else its mean curvature form)."""
    path = cfg.get("snapshot")
    if path is None:
        raise ConfigError("no snapshot given")
    if not Path(path).is_file():
        raise ConfigError(f"snapshot {path} does not exist")
    try:
        t, F, theta = read_snapshot(path)
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read snapshot {path}: {exc}") from None
    state = GeometryState(F)
    if theta is None:
        theta = state.H
    basepoint = cfg.get("basepoint")
    if basepoint is not None:
        basepoint = tuple(int(b) for b in basepoint)
        if len(basepoint) != F.n or any(not 0 <= b < s for b, s in zip(basepoint, F.grid.sizes)):
            raise ConfigError(f"basepoint {basepoint} is not a node of a {F.grid.sizes} grid")
    try:
        split = hodge_decompose(theta, state, basepoint, rtol=float(cfg.get("rtol", 1e-10)),
                                maxiter=cfg.get("maxiter"))
    except SolverDivergence as exc:
        log.error("%s", exc)
        return EXIT_CHECK, None, []
    out_dir = Path(cfg["out"])
    data = hodge_to_dict(split)
    data["t"] = t
    outputs = [str(write_json(out_dir / "hodge.json", data)),
               str(write_periods_csv(out_dir / "periods.csv", loop_periods(theta, F.grid)))]
    return EXIT_OK, split, outputs


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (keys: scenario, params, grid, flow)")
    common.add_argument("--out", help="output directory (default: $LAGFLOW_OUT or ./lagflow_out)")
    par = common.add_mutually_exclusive_group()
    par.add_argument("--threads", type=int, help="worker threads for FFTs")
    par.add_argument("--serial", action="store_true", help="single-threaded, deterministic run")
    common.add_argument("-v", "--verbose", action="store_true")

    scen = argparse.ArgumentParser(add_help=False)
    scen.add_argument("--param", action="append", metavar="KEY=VALUE", help="scenario parameter (repeatable)")
    scen.add_argument("--n-grid", type=int, help="nodes per parameter direction")
    scen.add_argument("--scheme", choices=("spectral", "central4"))

    parser = argparse.ArgumentParser(prog="lagflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lagflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-identities", parents=[common, scen], help="check the geometric identities")
    p.add_argument("--scenario", action="append", choices=SCENARIO_NAMES,
                   help="scenario to check (repeatable; default: built-in suite)")
    p.add_argument("--dump-geometry", action="store_true", help="also write per-node tensors as JSON")
    p.add_argument("--flip-omega-convention", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("flow", parents=[common, scen], help="integrate the deformation flow")
    p.add_argument("--scenario", choices=SCENARIO_NAMES)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--theta", help="'mcf' or 'grad:<name>'")
    p.add_argument("--cfl-safety", type=float)
    p.add_argument("--snapshot-stride", type=int)

    p = sub.add_parser("hodge", parents=[common], help="Hodge-split the 1-form of a snapshot")
    p.add_argument("snapshot", nargs="?", help="snapshot JSON written by 'flow'")
    p.add_argument("--basepoint", help="node index where phi vanishes, e.g. 0,0")
    p.add_argument("--rtol", type=float)
    p.add_argument("--maxiter", type=int)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    set_workers(1 if args.serial or not args.threads else args.threads)
    start = time.perf_counter()
    try:
        cfg = resolve_config(args)
        if args.command == "verify-identities":
            code, reports, outputs = cmd_verify_identities(cfg, args.flip_omega_convention, args.dump_geometry)
            print(json.dumps(reports, indent=2))
        elif args.command == "flow":
            code, _, outputs = cmd_flow(cfg)
        else:
            code, _, outputs = cmd_hodge(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"lagflow: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LagflowError as exc:
        print(f"lagflow: {exc}", file=sys.stderr)
        return EXIT_CHECK
    manifest = RunManifest(
        command=args.command,
        config=cfg,
        version=__version__,
        scheme=cfg.get("grid", {}).get("scheme", "spectral"),
        grid=_grid_echo(cfg),
        scenario=cfg.get("scenario"),
        outputs=outputs,
        wall_clock=time.perf_counter() - start,
        exit_code=code,
    )
    manifest.write(Path(cfg["out"]) / "manifest.json")
    return code


def _grid_echo(cfg: dict) -> list:
    size = cfg.get("grid", {}).get("n_grid")
    if size is None:
        return []
    return list(size) if isinstance(size, (list, tuple)) else [size]


if __name__ == "__main__":
    sys.exit(main())
