"""Command-line entry point: shoot, match, epdiff-check, validate, convergence.

Configuration is a flat INI file (key = value with sections); no environment
variables, so the written manifest is a complete record of the run. Every
command writes its manifest first, artifacts incrementally, and a terminal
status.json; the exit status is 0 iff the run completed.
"""
from __future__ import annotations

import argparse
import configparser
import os
import sys
import time

import numpy as np

from . import epdiff, geodesic, io, matching, presets, validation
from .spectral import GridError, make_grid, l2_norm_values

DEFAULT_SOLVER_TOL = 1e-10


class ConfigError(ValueError):
    """Malformed run configuration; message names the offending section/key."""


def _get(cfg, section, key, cast, default=None, required=False):
    if not cfg.has_option(section, key):
        if required:
            raise ConfigError(f"[{section}] {key}: missing required key")
        return default
    raw = cfg.get(section, key)
    try:
        if cast is bool:
            return cfg.getboolean(section, key)
        return cast(raw)
    except ValueError:
        raise ConfigError(
            f"[{section}] {key}: cannot parse {raw!r} as {cast.__name__}"
        ) from None


def load_config(path) -> configparser.ConfigParser:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cfg = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cfg.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cfg


def _build_grid(cfg):
    dim = _get(cfg, "grid", "dim", int, required=True)
    n = _get(cfg, "grid", "n", int, required=True)
    try:
        return make_grid(dim, n)
    except GridError as exc:
        raise ConfigError(f"[grid]: {exc}") from None


def _metric_order(cfg):
    k = _get(cfg, "metric", "k", int, required=True)
    if k < -1:
        raise ConfigError(f"[metric] k: must be >= -1, got {k}")
    return k


def _load_scalar(cfg, grid, section, key, role, required=True):
    """Initial data entry: preset string or file:PATH; returns (field, source)."""
    spec = _get(cfg, section, key, str, required=required)
    if spec is None:
        return None, None
    spec = spec.strip()
    if spec.startswith("file:"):
        path = spec[len("file:"):].strip()
        if not os.path.exists(path):
            raise ConfigError(f"[{section}] {key}: file not found: {path}")
        digest = io.sha256_file(path)
        expected = _get(cfg, section, f"{key}_checksum", str)
        if expected is not None and digest != expected:
            raise ConfigError(
                f"[{section}] {key}: checksum mismatch for {path} "
                f"(got {digest})")
        try:
            field = io.read_field(path, expected_grid=grid)
        except io.FieldFormatError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None
        vals = field.values
        if role == "rho":
            if vals.min() <= 0.0:
                raise ConfigError(f"[{section}] {key}: density not positive")
            field.values = vals / vals.mean()
        else:
            field.values = vals - vals.mean()
            field.mean_zero = True
        return field, {"file": path, "sha256": digest}
    try:
        if role == "rho":
            return presets.density_preset(grid, spec), {"preset": spec}
        return presets.momentum_preset(grid, spec), {"preset": spec}
    except presets.PresetError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def _common_manifest(cfg, args, command, config_path):
    sections = {s: dict(cfg.items(s)) for s in cfg.sections()}
    return {
        "command": command,
        "config_file": os.path.abspath(config_path),
        "config": sections,
        "config_sha256": io.sha256_file(config_path),
        "seed": _get(cfg, "run", "seed", int, default=0),
    }


def _write_status(outdir, ok, message, t0):
    io.write_json(os.path.join(outdir, "status.json"), {
        "status": "ok" if ok else "aborted",
        "message": message,
        "wall_time": time.time() - t0,
    })


def _diag_rows(times, diags):
    return [
        (t, d.mass, d.energy, d.min_rho, d.max_abs_p, d.cg_iterations,
         d.spectral_tail)
        for t, d in zip(times, diags)
    ]


DIAG_HEADER = ["t", "mass", "energy", "min_rho", "max_abs_p",
               "cg_iterations", "spectral_tail"]


def cmd_shoot(cfg, args, outdir, manifest):
    grid = _build_grid(cfg)
    k = _metric_order(cfg)
    T = _get(cfg, "time", "T", float, required=True)
    dt = _get(cfg, "time", "dt", float)
    stride = _get(cfg, "output", "snapshot_stride", int, default=10)
    rho0, rho_src = _load_scalar(cfg, grid, "initial", "rho", "rho")
    p0, p_src = _load_scalar(cfg, grid, "initial", "p", "p")
    state0 = geodesic.make_state(grid, rho0.values, p0.values, k)
    if dt is None:
        dt = geodesic.default_dt(state0)
        if dt is None:
            dt = T / 100.0
    manifest.update({
        "grid": {"dim": grid.dim, "n": grid.n}, "k": k, "T": T, "dt": dt,
        "snapshot_stride": stride,
        "inputs": {"rho": rho_src, "p": p_src},
        "tolerances": {"mass_drift": geodesic.MASS_DRIFT_TOL},
    })
    io.write_json(os.path.join(outdir, "manifest.json"), manifest)
    traj = geodesic.shoot(rho0, p0, k, T, dt, store_every=stride)
    for i, (t, state) in enumerate(zip(traj.times, traj.states)):
        io.write_field(os.path.join(outdir, f"rho_{i:05d}.field"), state.rho)
        io.write_field(os.path.join(outdir, f"p_{i:05d}.field"), state.p)
    io.write_csv(os.path.join(outdir, "diagnostics.csv"), DIAG_HEADER,
                 _diag_rows(traj.times, traj.diagnostics))
    return f"shoot completed: {len(traj.times)} snapshots over T={T}"


def cmd_match(cfg, args, outdir, manifest):
    grid = _build_grid(cfg)
    k = _metric_order(cfg)
    T = _get(cfg, "time", "T", float, required=True)
    dt = _get(cfg, "time", "dt", float, required=True)
    rho0, rho0_src = _load_scalar(cfg, grid, "initial", "rho", "rho")
    rho1, rho1_src = _load_scalar(cfg, grid, "matching", "rho1", "rho")
    n_modes = _get(cfg, "matching", "n_modes", int, default=8)
    opt = matching.OptSettings(
        max_iter=_get(cfg, "matching", "max_iter", int, default=200),
        grad_tol=_get(cfg, "matching", "grad_tol", float, default=1e-8),
        fd_step=_get(cfg, "matching", "fd_step", float, default=1e-5),
    )
    try:
        problem = matching.MatchProblem(rho0, rho1, k, T, dt, n_modes, opt)
    except ValueError as exc:
        raise ConfigError(f"[matching]: {exc}") from None
    manifest.update({
        "grid": {"dim": grid.dim, "n": grid.n}, "k": k, "T": T, "dt": dt,
        "n_modes": n_modes,
        "inputs": {"rho0": rho0_src, "rho1": rho1_src},
        "optimizer": {"max_iter": opt.max_iter, "grad_tol": opt.grad_tol,
                      "fd_step": opt.fd_step},
    })
    io.write_json(os.path.join(outdir, "manifest.json"), manifest)
    result = matching.solve_match(problem)
    io.write_field(os.path.join(outdir, "p0.field"), result.p0)
    io.write_field(os.path.join(outdir, "rho_final.field"),
                   result.geodesic.states[-1].rho)
    io.write_csv(os.path.join(outdir, "history.csv"),
                 ["iter", "objective", "grad_norm", "step"],
                 result.history_rows)
    io.write_csv(os.path.join(outdir, "diagnostics.csv"), DIAG_HEADER,
                 _diag_rows(result.geodesic.times,
                            result.geodesic.diagnostics))
    io.write_json(os.path.join(outdir, "result.json"), {
        "status": result.status,
        "final_l2_mismatch": result.final_l2_mismatch,
        "iterations": len(result.objective_history) - 1,
    })
    return (f"match {result.status}: relative mismatch "
            f"{result.final_l2_mismatch:.3e}")


def cmd_epdiff_check(cfg, args, outdir, manifest):
    grid = _build_grid(cfg)
    k = _metric_order(cfg)
    if k < 0:
        raise ConfigError("[metric] k: epdiff-check requires k >= 0")
    T = _get(cfg, "time", "T", float, required=True)
    dt = _get(cfg, "time", "dt", float, required=True)
    rho0, rho_src = _load_scalar(cfg, grid, "initial", "rho", "rho")
    p0, p_src = _load_scalar(cfg, grid, "initial", "p", "p")
    manifest.update({
        "grid": {"dim": grid.dim, "n": grid.n}, "k": k, "T": T, "dt": dt,
        "inputs": {"rho": rho_src, "p": p_src},
    })
    io.write_json(os.path.join(outdir, "manifest.json"), manifest)
    report = epdiff.cross_validate(rho0, p0, k, T, dt)
    io.write_json(os.path.join(outdir, "cross_validation.json"), report)
    return (f"cross validation: final L2 discrepancy "
            f"{report['l2_discrepancy_final']:.3e}")


def cmd_validate(cfg, args, outdir, manifest):
    grid = _build_grid(cfg)
    k = _metric_order(cfg)
    seed = _get(cfg, "run", "seed", int, default=0)
    manifest.update({"grid": {"dim": grid.dim, "n": grid.n}, "k": k,
                     "seed": seed})
    io.write_json(os.path.join(outdir, "manifest.json"), manifest)
    report = validation.run_suite(dim=grid.dim, n=grid.n, k=k, seed=seed)
    io.write_json(os.path.join(outdir, "validation.json"), report)
    if not report["all_passed"]:
        failed = [name for name, r in report["checks"].items()
                  if not r["passed"]]
        raise RuntimeError(f"invariant checks failed: {', '.join(failed)}")
    return f"all {len(report['checks'])} invariant checks passed"


def cmd_convergence(cfg, args, outdir, manifest):
    grid = _build_grid(cfg)
    k = _metric_order(cfg)
    T = _get(cfg, "time", "T", float, required=True)
    dt = _get(cfg, "time", "dt", float, required=True)
    rho_spec = _get(cfg, "initial", "rho", str, required=True)
    p_spec = _get(cfg, "initial", "p", str, required=True)
    manifest.update({"grid": {"dim": grid.dim, "n": grid.n}, "k": k,
                     "T": T, "dt": dt})
    io.write_json(os.path.join(outdir, "manifest.json"), manifest)

    rows = []
    finals = {}

    def run_one(label, n_run, dt_run):
        g = make_grid(grid.dim, n_run)
        rho0 = presets.density_preset(g, rho_spec)
        p0 = presets.momentum_preset(g, p_spec)
        try:
            traj = geodesic.shoot(rho0, p0, k, T, dt_run,
                                  store_every=10 ** 9)
        except geodesic.SolverAbort as exc:
            rows.append((label, n_run, dt_run, "aborted", "", "", ""))
            return None
        d0, dT = traj.diagnostics[0], traj.diagnostics[-1]
        drift = (abs(dT.energy - d0.energy) / abs(d0.energy)
                 if d0.energy != 0 else 0.0)
        rows.append((label, n_run, dt_run, "ok", drift,
                     dT.spectral_tail, abs(dT.mass - 1.0)))
        finals[label] = traj.states[-1].rho.values
        return traj

    for i, f in enumerate((1, 2, 4)):
        run_one(f"dt/{f}", grid.n, dt / f)
    run_one("2n", 2 * grid.n, dt)

    summary = {}
    if all(f"dt/{f}" in finals for f in (1, 2, 4)):
        e12 = l2_norm_values(finals["dt/1"] - finals["dt/2"])
        e24 = l2_norm_values(finals["dt/2"] - finals["dt/4"])
        if e24 > 0:
            summary["observed_temporal_order"] = float(np.log2(e12 / e24))
    if "2n" in finals and "dt/1" in finals:
        coarse_on_fine = finals["2n"][(slice(None, None, 2),) * grid.dim]
        summary["spatial_refinement_change"] = l2_norm_values(
            coarse_on_fine - finals["dt/1"])
    io.write_csv(os.path.join(outdir, "convergence.csv"),
                 ["run", "n", "dt", "status", "energy_drift",
                  "spectral_tail", "mass_error"], rows)
    io.write_json(os.path.join(outdir, "summary.json"), summary)
    parts = [f"{key}={val:.3g}" for key, val in summary.items()]
    return "convergence study done: " + ", ".join(parts)


COMMANDS = {
    "shoot": cmd_shoot,
    "match": cmd_match,
    "epdiff-check": cmd_epdiff_check,
    "validate": cmd_validate,
    "convergence": cmd_convergence,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="densgeo",
        description="Pseudospectral geodesic solvers on torus densities")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--output-dir", default=None)
        p.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    t0 = time.time()
    try:
        cfg = load_config(args.config)
        outdir = args.output_dir or _get(cfg, "run", "output_dir", str,
                                         default="densgeo-out")
        io.ensure_dir(outdir)
        manifest = _common_manifest(cfg, args, args.command, args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        message = COMMANDS[args.command](cfg, args, outdir, manifest)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        io.write_json(os.path.join(outdir, "error.json"),
                      {"error": str(exc)})
        return 2
    except (geodesic.SolverAbort, epdiff.InversionError,
            RuntimeError) as exc:
        _write_status(outdir, False, str(exc), t0)
        if not args.quiet:
            print(f"aborted: {exc}", file=sys.stderr)
        return 1
    _write_status(outdir, True, message, t0)
    if not args.quiet:
        print(message)
    return 0


if __name__ == "__main__":
    sys.exit(main())
