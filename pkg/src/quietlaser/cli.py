"""Command-line front end.

Every subcommand writes its outputs plus a ``manifest.json`` into ``--out``.
Feeding a manifest back through ``--config`` reruns the same computation;
explicit flags override config values. The exit code is 0 only if every
check the command performs passes.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from .constants import (
    CouplingParams,
    PhysicalConstants,
    box_width_for_frequency,
    transition_frequency,
    voltage_for_rabi,
)
from .loop import closed_loop_transfer, design_for_a, detected_noise_ratio, simulate_loop, steady_state
from .renewal import fano_factor, generate_event_train

DEFAULTS = {
    "analytic": {"a": [0.1, 0.25, 0.5, 1.0, 2.0, 4.0], "format": "csv"},
    "design": {"min_noise": False, "mu": 1.0, "tau_p": 1e-6, "J": None, "volume": None, "nu": 1.42e9,
               "constants": {}},
    "renewal": {"a": 1.0, "gamma": 1.0, "rabi": None, "horizon": 1e5, "window": 100.0, "seed": 20240607,
                "save_events": True},
    "loop": {"a": 0.25, "mu": 100.0, "tau_p": 1e-6, "horizon": 1e4, "window": 100.0, "seed": 20240608,
             "save_events": True, "trace_stride": 1.0, "constants": {}},
    "tdse": {"grid_points": 2048, "dt": None, "nu": 1.42e9, "rabi_ratio": 1e-3, "periods": 1.0,
             "record_every": 10, "constants": {}},
}


class UsageError(Exception):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _resolve(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        loaded = loaded.get("config", loaded)
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(loaded)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n")


def _constants(cfg: dict) -> PhysicalConstants:
    """Default constants with any overrides from the config's ``constants`` mapping."""
    try:
        return PhysicalConstants(**cfg.get("constants", {}))
    except TypeError as exc:
        raise UsageError(f"bad constants override: {exc}") from None


def _manifest(out: Path, command: str, cfg: dict, passed: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "manifest.json", {"command": command, "config": cfg, "version": _version(),
                                        "passed": passed})


def cmd_analytic(cfg: dict, out: Path) -> bool:
    grid = cfg["a"]
    if not grid or any(not (float(a) > 0) for a in grid):
        raise UsageError("the a-grid must be a non-empty list of positive numbers")
    rows = []
    for a in map(float, grid):
        c = CouplingParams.from_a(a, 1.0)
        gain, _ = closed_loop_transfer(a)
        rows.append({
            "a": a,
            "rate_times_tau": dyn.event_rate(c) * dyn.mean_waiting_time(c),
            "pump_noise_ratio": dyn.pump_noise_ratio(a),
            "loop_gain": gain,
            "detected_noise_ratio": detected_noise_ratio(a),
        })
    out.mkdir(parents=True, exist_ok=True)
    if cfg["format"] == "json":
        _write_json(out / "analytic.json", rows)
    else:
        with open(out / "analytic.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(v) for k, v in r.items()})
    for r in rows:
        print("  ".join(f"{k}={v:.6g}" for k, v in r.items()))
    return True


def cmd_design(cfg: dict, out: Path) -> bool:
    consts = _constants(cfg)
    omega = 2 * math.pi * cfg["nu"]
    geom = box_width_for_frequency(omega, consts)
    if cfg["min_noise"]:
        points = [design_for_a(0.25, cfg["mu"], cfg["tau_p"], consts)]
    else:
        if cfg["J"] is None or cfg["volume"] is None:
            raise UsageError("design needs --J and --volume, or --min-noise with --mu")
        points = steady_state(cfg["J"], cfg["tau_p"], cfg["volume"], consts)
        if not points:
            print("no steady state: the drive is too weak (Omega_R < 2 sqrt(2) J)", file=sys.stderr)
            return False
    report = []
    for op in points:
        report.append({
            "J": op.J, "tau_p": op.tau_p, "mu": op.mu, "volume": op.volume,
            "volume_over_tau_p_sq": op.volume / op.tau_p**2,
            "gamma": op.gamma, "rabi": math.sqrt(op.rabi_sq), "a": op.a,
            "box_width": geom.d, "capacitor_side": math.sqrt(op.volume / geom.d),
            "detected_noise_ratio": detected_noise_ratio(op.a),
        })
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "design.json", report)
    for r in report:
        print("  ".join(f"{k}={v:.6g}" for k, v in r.items()))
    return True


def cmd_renewal(cfg: dict, out: Path) -> bool:
    if cfg["rabi"] is not None:
        coupling = CouplingParams.from_rabi(cfg["rabi"], cfg["gamma"])
    else:
        coupling = CouplingParams.from_a(cfg["a"], cfg["gamma"])
    tau = dyn.mean_waiting_time(coupling)
    horizon, window = cfg["horizon"] * tau, cfg["window"] * tau
    if horizon < 50 * window:
        raise UsageError("horizon must be at least 50 counting windows")
    if cfg["window"] < 20:
        raise UsageError("window must be at least 20 mean waiting times")
    train = generate_event_train(dyn.WaitingTimeLaw(coupling), horizon, cfg["seed"])
    stats = fano_factor(train, window)
    target = dyn.pump_noise_ratio(coupling.a)
    tol = max(3 * stats.std_err, 0.02)
    passed = abs(stats.fano - target) <= tol
    result = {
        "a": coupling.a, "gamma": coupling.gamma, "rate": train.rate, "analytic_rate": dyn.event_rate(coupling),
        "fano": stats.fano, "std_err": stats.std_err, "analytic_target": target,
        "abs_error": abs(stats.fano - target), "z_score": stats.z_score(target),
        "tolerance": tol, "n_windows": stats.n_windows, "passed": passed,
    }
    out.mkdir(parents=True, exist_ok=True)
    if cfg["save_events"]:
        train.to_csv(out / "events.csv")
    _write_json(out / "stats.json", result)
    print(json.dumps(result, default=float))
    return passed


def cmd_loop(cfg: dict, out: Path) -> bool:
    op = design_for_a(cfg["a"], cfg["mu"], cfg["tau_p"], _constants(cfg))
    horizon, window = cfg["horizon"] * op.tau_p, cfg["window"] * op.tau_p
    if horizon < 10 * window:
        raise UsageError("horizon must hold at least 10 counting windows")
    res = simulate_loop(op, horizon, cfg["seed"], count_window=window, keep_events=cfg["save_events"],
                        trace_stride=cfg["trace_stride"] * op.tau_p)
    det = res.detection_fano()
    emi = res.emission_fano()
    z_sub = (1.0 - det.fano) / det.std_err
    target = detected_noise_ratio(op.a)
    sub_poissonian = bool(det.fano < 1 and z_sub > 3)
    result = {
        "a": op.a, "mu": op.mu, "tau_p": op.tau_p, "J": op.J, "gamma": op.gamma, "volume": op.volume,
        "mu_mean": res.mu_mean, "detection_rate": res.detection_rate, "emission_rate": res.emission_rate,
        "detection_fano": det.fano, "detection_std_err": det.std_err, "analytic_target": target,
        "z_below_shot_noise": z_sub, "emission_fano": emi.fano, "emission_std_err": emi.std_err,
        "sub_poissonian": sub_poissonian, "n_windows": det.n_windows, "final_mu": res.final_state.mu_int,
    }
    if res.final_state.mu_int == 0:
        # mu = 0 is absorbing: with no field the electron never emits again
        print("warning: the photon number reached zero and the laser went out", file=sys.stderr)
    out.mkdir(parents=True, exist_ok=True)
    if res.detections is not None:
        res.detections.to_csv(out / "detections.csv")
    res.trace_csv(out / "trace.csv")
    _write_json(out / "stats.json", result)
    print(json.dumps(result, default=float))
    return sub_poissonian


def cmd_tdse(cfg: dict, out: Path) -> bool:
    from .constants import dipole_element
    from .tdse import SpatialGrid, eigenstates_numeric, evolve, fit_rabi_frequency, ground_state, induced_current

    consts = _constants(cfg)
    geom = box_width_for_frequency(2 * math.pi * cfg["nu"], consts)
    grid = SpatialGrid(int(cfg["grid_points"]), geom.d)
    energies, vecs = eigenstates_numeric(grid, consts)
    omega = (energies[1] - energies[0]) / consts.hbar
    rabi = cfg["rabi_ratio"] * omega
    v = voltage_for_rabi(rabi, geom, consts)
    period = 2 * math.pi / omega
    dt = cfg["dt"] if cfg["dt"] is not None else period / 500
    if dt > 0.01 * period:
        raise UsageError("--dt must not exceed 1% of the optical period")
    t_end = cfg["periods"] * 2 * math.pi / rabi
    traj = evolve(ground_state(grid, consts), v, omega, t_end, dt, consts, record_every=int(cfg["record_every"]))
    current = induced_current(traj, geom, consts)
    residual = float(np.max(np.abs(traj.p2 - np.sin(0.5 * rabi * traj.times) ** 2)))
    fitted = fit_rabi_frequency(traj, rabi)
    x12_num = float(np.sum(grid.x * vecs[0] * vecs[1]) * grid.spacing)
    x12_err = abs(x12_num / dipole_element(geom) - 1)
    leak = float(np.max(1 - traj.p1 - traj.p2))
    passed = residual <= 0.02 and abs(fitted / rabi - 1) <= 5e-3 and x12_err <= 1e-5
    result = {
        "box_width": geom.d, "omega_grid": omega, "omega_analytic": transition_frequency(geom, consts),
        "rabi": rabi, "voltage": v, "dt": dt, "max_rwa_residual": residual, "fitted_rabi": fitted,
        "fitted_rabi_rel_error": fitted / rabi - 1, "x12_rel_error": x12_err, "max_leakage": leak,
        "norm_drift": float(np.max(np.abs(traj.norm - 1))), "passed": passed,
    }
    out.mkdir(parents=True, exist_ok=True)
    traj.to_csv(out / "trajectory.csv", current)
    _write_json(out / "stats.json", result)
    print(json.dumps(result, default=float))
    return passed


COMMANDS = {"analytic": cmd_analytic, "design": cmd_design, "renewal": cmd_renewal, "loop": cmd_loop,
            "tdse": cmd_tdse}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quietlaser", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config or manifest; explicit flags win")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        return p

    p = common(sub.add_parser("analytic", help="tabulate rate and noise formulas over an a-grid"))
    p.add_argument("--a", type=float, nargs="+")
    p.add_argument("--format", choices=["csv", "json"])

    p = common(sub.add_parser("design", help="steady-state operating points"))
    p.add_argument("--min-noise", dest="min_noise", action="store_true", default=None)
    p.add_argument("--mu", type=float)
    p.add_argument("--tau-p", dest="tau_p", type=float)
    p.add_argument("--J", type=float)
    p.add_argument("--volume", type=float)
    p.add_argument("--nu", type=float, help="transition frequency in Hz (sets the box width)")

    p = common(sub.add_parser("renewal", help="Monte Carlo renewal train and Fano factor"))
    p.add_argument("--a", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--rabi", type=float, help="Rabi angular frequency; overrides --a")
    p.add_argument("--horizon", type=float, help="simulated time in mean waiting times")
    p.add_argument("--window", type=float, help="counting window in mean waiting times")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-save-events", dest="save_events", action="store_false", default=None)

    p = common(sub.add_parser("loop", help="closed-loop laser jump simulation"))
    p.add_argument("--a", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--tau-p", dest="tau_p", type=float)
    p.add_argument("--horizon", type=float, help="simulated time in photon lifetimes")
    p.add_argument("--window", type=float, help="counting window in photon lifetimes")
    p.add_argument("--seed", type=int)
    p.add_argument("--trace-stride", dest="trace_stride", type=float, help="mu trace stride in photon lifetimes")
    p.add_argument("--no-save-events", dest="save_events", action="store_false", default=None)

    p = common(sub.add_parser("tdse", help="grid Schrodinger check of Rabi dynamics"))
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--dt", type=float, help="time step in seconds (default: optical period / 500)")
    p.add_argument("--nu", type=float)
    p.add_argument("--rabi-ratio", dest="rabi_ratio", type=float)
    p.add_argument("--periods", type=float, help="duration in Rabi periods")
    p.add_argument("--record-every", dest="record_every", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = _resolve(args.command, args)
        out = Path(args.out)
        passed = COMMANDS[args.command](cfg, out)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _manifest(out, args.command, cfg, passed)
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
