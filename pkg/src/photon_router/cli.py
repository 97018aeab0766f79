"""Command-line front end: figure-style sweeps, record simulation, click
analysis, and a repro recipe bundling all of them.

Every output is CSV with a '# key = value' metadata block carrying the fully
resolved configuration (defaults < config file < flags), so a run can be
reproduced byte-identically from any of its outputs.  No timestamps are
written inside files.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, model, trajectory
from .errors import (
    ConfigError,
    DegenerateFluxError,
    PhotonRouterError,
    RecordFormatError,
    ResourceLimitError,
    SolverError,
    StatisticalInsufficiencyError,
)
from .params import SystemParams, read_params_file

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_STATISTICS = 4

_PARAM_KEYS = set(SystemParams().to_mapping())


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _write_table(path, command: str, config: dict, header: list[str], rows,
                 extra_meta: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# photon-router {command}\n")
        for key in sorted(config):
            fh.write(f"# {key} = {_fmt(config[key])}\n")
        for key, value in (extra_meta or {}).items():
            fh.write(f"# {key} = {_fmt(value)}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _resolve(defaults: dict, args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags; unknown file keys rejected."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        file_vals = read_params_file(args.config)
        unknown = set(file_vals) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_vals)
    for key in defaults:
        flag = getattr(args, key.replace(".", "_"), None)
        if flag is not None:
            cfg[key] = flag
    return cfg


def _base_defaults() -> dict:
    base = SystemParams().to_mapping()
    del base["drive_ep"]  # always derived from nbar
    return base


def _params_from_config(cfg: dict) -> SystemParams:
    fields = {k: cfg[k] for k in cfg if k in _PARAM_KEYS}
    p = SystemParams.from_mapping(fields)
    return p.with_(drive_ep=model.calibrate_drive(p, cfg["nbar"]))


def _detector_model(cfg: dict) -> trajectory.DetectorModel:
    return trajectory.DetectorModel(
        efficiency=cfg["efficiency"],
        split_ratio=cfg["split_ratio"],
        background_rate_per_s=cfg["background_rate_per_s"],
        timestamp_resolution_ns=cfg["timestamp_resolution_ns"],
    )


def _transit_model(cfg: dict, no_atom: bool = False) -> trajectory.TransitModel:
    return trajectory.TransitModel(
        arrival_rate_per_s=0.0 if no_atom else cfg["arrival_rate_per_s"],
        envelope_fwhm_us=cfg["envelope_fwhm_us"],
        g_peak_min=cfg["g_peak_min"],
        g_peak_max=cfg["g_peak_max"],
    )


# ---------------------------------------------------------------------------
# spectra

def _add_physics_flags(sp):
    for key in sorted(_PARAM_KEYS - {"drive_ep"}):
        sp.add_argument(f"--{key.replace('_', '-')}", type=float, dest=key)


def _add_spectra_args(sp):
    sp.add_argument("--delta-min", type=float, dest="delta_min")
    sp.add_argument("--delta-max", type=float, dest="delta_max")
    sp.add_argument("--points", type=float)
    sp.add_argument("--nbar", type=float)
    sp.add_argument("--atom", choices=["both", "present", "absent"], default="both")


def cmd_spectra(args) -> int:
    defaults = {**_base_defaults(), "delta_min": -1000.0, "delta_max": 1000.0,
                "points": 201.0, "nbar": 1e-5}
    cfg = _resolve(defaults, args)
    p = _params_from_config(cfg)
    grid = np.linspace(cfg["delta_min"], cfg["delta_max"], int(cfg["points"]))
    modes = {"both": (True, False), "present": (True,), "absent": (False,)}[args.atom]

    columns: dict[bool, tuple[np.ndarray, np.ndarray]] = {}
    failures: list[str] = []
    for atom in modes:
        norm = model._far_detuned_flux(p, atom)

        def point(delta, atom=atom, norm=norm):
            pd = p.with_(delta_ap=delta + p.delta_ac)
            rho, space = model.solve_steady(pd, atom_present=atom)
            i_t, i_r = model.output_fluxes(pd, space, rho)
            return i_t / norm, i_r / norm

        t_col = np.full(grid.size, math.nan)
        r_col = np.full(grid.size, math.nan)
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            futures = [pool.submit(point, d) for d in grid]
        for i, fut in enumerate(futures):
            try:
                t_col[i], r_col[i] = fut.result()
            except (SolverError, ResourceLimitError) as exc:
                failures.append(f"delta={grid[i]!r} atom={atom}: {exc}")
        columns[atom] = (t_col, r_col)

    header = ["delta_mhz"]
    for atom in modes:
        tag = "atom" if atom else "empty"
        header += [f"t_{tag}", f"r_{tag}"]
    rows = []
    for i, d in enumerate(grid):
        row = [float(d)]
        for atom in modes:
            row += [float(columns[atom][0][i]), float(columns[atom][1][i])]
        rows.append(row)
    meta = {"atom": args.atom, "seed": args.seed}
    if failures:
        meta["failed_points"] = "; ".join(failures)
    out = args.out or "spectra.csv"
    _write_table(out, "spectra", cfg, header, rows, meta)
    return EXIT_OK


# ---------------------------------------------------------------------------
# correlations

def cmd_correlations(args) -> int:
    defaults = {**_base_defaults(), "delta_min": -120.0, "delta_max": 120.0,
                "points": 41.0, "nbar": 1e-3}
    cfg = _resolve(defaults, args)
    p = _params_from_config(cfg)
    grid = np.linspace(cfg["delta_min"], cfg["delta_max"], int(cfg["points"]))

    def point(delta):
        pd = p.with_(delta_ap=delta + p.delta_ac)
        g2_t = model.g2_curves(pd, [0.0], "T").g2[0]
        g2_r = model.g2_curves(pd, [0.0], "R").g2[0]
        return g2_t, g2_r

    t_col = np.full(grid.size, math.nan)
    r_col = np.full(grid.size, math.nan)
    failures = []
    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        futures = [pool.submit(point, d) for d in grid]
    for i, fut in enumerate(futures):
        try:
            t_col[i], r_col[i] = fut.result()
        except (SolverError, ResourceLimitError, DegenerateFluxError) as exc:
            failures.append(f"delta={grid[i]!r}: {exc}")
    rows = [(float(d), float(t_col[i]), float(r_col[i])) for i, d in enumerate(grid)]
    meta = {"seed": args.seed}
    if failures:
        meta["failed_points"] = "; ".join(failures)
    out = args.out or "correlations.csv"
    _write_table(out, "correlations", cfg, ["delta_mhz", "g2_t0", "g2_r0"], rows, meta)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

_SIM_DEFAULTS = {
    "nbar": 0.093,
    "duration_s": 0.002,
    "arrival_rate_per_s": 10_000.0,
    "envelope_fwhm_us": 2.0,
    "g_peak_min": 35.0,
    "g_peak_max": 65.0,
    "efficiency": 0.5,
    "split_ratio": 0.5,
    "background_rate_per_s": 25_000.0,
    "timestamp_resolution_ns": 1.0,
}


def cmd_simulate(args) -> int:
    defaults = {**_base_defaults(), **_SIM_DEFAULTS}
    cfg = _resolve(defaults, args)
    p = _params_from_config(cfg)
    dm = _detector_model(cfg)
    out = args.out or "record.csv"
    rec = trajectory.simulate_record(
        p, _transit_model(cfg, no_atom=args.no_atom), dm, cfg["duration_s"], args.seed
    )
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    trajectory.write_record(rec, out)
    if args.no_atom_out:
        rec_no = trajectory.simulate_record(
            p, _transit_model(cfg, no_atom=True), dm, cfg["duration_s"], args.seed + 1
        )
        trajectory.write_record(rec_no, args.no_atom_out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze

_ANALYZE_DEFAULTS = {
    "c_th": 5.0,
    "dt_atom_us": 4.0,
    "bin_us": 0.5,
    "tau_bin_ns": 2.0,
    "tau_max_ns": 60.0,
    "background_fraction": 0.0,
}


def cmd_analyze(args) -> int:
    cfg = _resolve(dict(_ANALYZE_DEFAULTS), args)
    rec = trajectory.read_record(args.record)
    if cfg["background_fraction"] > 0:
        rec = trajectory.inject_background(rec, cfg["background_fraction"], args.seed)
    out_dir = Path(args.out or "analysis")
    meta = {"record": str(args.record), "seed": args.seed}

    events = analysis.detect_transits(rec, int(cfg["c_th"]), cfg["dt_atom_us"])
    if not events:
        _write_table(out_dir / "signals.csv", "analyze", cfg,
                     ["t_us", "transmission", "reflection"], [], {**meta, "n_events": 0})
        print("no transit events detected; empty tables written", file=sys.stderr)
        return EXIT_OK

    sig = analysis.averaged_signals(rec, events, cfg["bin_us"],
                                    args.empty_flux)
    _write_table(
        out_dir / "signals.csv", "analyze", cfg,
        ["t_us", "transmission", "reflection"],
        zip(sig.t_us.tolist(), sig.transmitted.tolist(), sig.reflected.tolist()),
        {**meta, "n_events": sig.n_events, "empty_flux_per_us": sig.empty_flux_per_us,
         "empty_flux_source": sig.empty_flux_source},
    )

    edges = np.arange(0.0, cfg["tau_max_ns"] + 0.5 * cfg["tau_bin_ns"],
                      cfg["tau_bin_ns"]) / 1000.0
    for which in ("T", "R"):
        corr = analysis.estimate_g2(rec, events, which, edges)
        _write_table(
            out_dir / f"g2_{which.lower()}.csv", "analyze", cfg,
            ["tau_us", "g2", "stderr", "n_pairs"],
            zip(corr.tau_bins_us.tolist(), corr.g2.tolist(), corr.stderr.tolist(),
                corr.n_pairs.tolist()),
            {**meta, "n_events": len(events),
             "normalization": corr.normalization["method"]},
        )

    rec_no = trajectory.read_record(args.no_atom_record) if args.no_atom_record else None
    rows = []
    for c_th in range(3, 9):
        ev_c = analysis.detect_transits(rec, c_th, cfg["dt_atom_us"])
        if not ev_c:
            continue
        sig_c = analysis.averaged_signals(rec, ev_c, cfg["bin_us"], args.empty_flux)
        center = int(np.argmin(np.abs(sig_c.t_us)))
        f_ratio = math.nan
        if rec_no is not None:
            try:
                f_ratio = analysis.false_detection_ratio(
                    rec, rec_no, c_th, cfg["dt_atom_us"], cfg["bin_us"], args.empty_flux)
            except DegenerateFluxError:
                pass
        rows.append((c_th, len(ev_c), float(sig_c.transmitted[center]),
                     float(sig_c.reflected[center]), f_ratio))
    _write_table(out_dir / "thresholds.csv", "analyze", cfg,
                 ["c_th", "n_events", "t0_center", "r0_center", "false_ratio"],
                 rows, meta)
    return EXIT_OK


# ---------------------------------------------------------------------------
# saturation

def cmd_saturation(args) -> int:
    defaults = {**_base_defaults(), "background_fraction": 0.0,
                "g_samples": 16.0, "kx_samples": 16.0}
    cfg = _resolve(defaults, args)
    p = SystemParams.from_mapping({k: cfg[k] for k in cfg if k in _PARAM_KEYS})
    nbars = [float(s) for s in args.nbars.split(",")] if args.nbars else \
        [0.001, 0.003, 0.01, 0.03, 0.093, 0.3, 0.7]
    rows = model.saturation_curve(
        p, nbars,
        kx_samples=int(cfg["kx_samples"]), g_samples=int(cfg["g_samples"]),
        background_fraction=cfg["background_fraction"],
    )
    out = args.out or "saturation.csv"
    _write_table(
        out, "saturation", cfg,
        ["nbar", "t0", "g2_r0", "xi", "g2_t0"],
        [(r.nbar, r.t0, r.g2_r0, r.xi, r.g2_t0) for r in rows],
        {"nbars": ",".join(repr(n) for n in nbars), "seed": args.seed},
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# repro

def cmd_repro(args) -> int:
    out_dir = Path(args.out) if args.out else \
        Path(time.strftime("repro-%Y%m%d-%H%M%S"))
    out_dir.mkdir(parents=True, exist_ok=True)
    common = ["--seed", str(args.seed), "--threads", str(args.threads)]
    record = out_dir / "record.csv"
    record_no = out_dir / "record_no_atom.csv"
    recipes = [
        ["spectra", "--out", str(out_dir / "fig1_spectra.csv"),
         "--points", "101"],
        ["correlations", "--out", str(out_dir / "fig1_correlations.csv"),
         "--points", "21"],
        ["simulate", "--out", str(record), "--no-atom-out", str(record_no),
         "--duration-s", str(args.duration_s)],
        ["analyze", "--record", str(record), "--no-atom-record", str(record_no),
         "--out", str(out_dir / "fig2")],
        ["saturation", "--out", str(out_dir / "fig4_model.csv")],
    ]
    for recipe in recipes:
        code = main(recipe + common)
        if code != EXIT_OK:
            return code
    return EXIT_OK


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photon-router",
        description="Single-atom microtoroid photon-router simulator and analysis toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=str, default=None)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=str, default=None)
        sp.add_argument("--threads", type=int, default=1)

    sp = sub.add_parser("spectra", help="steady-state T/R spectra vs probe detuning")
    common(sp)
    _add_physics_flags(sp)
    _add_spectra_args(sp)
    sp.set_defaults(func=cmd_spectra)

    sp = sub.add_parser("correlations", help="g2(0) of both outputs vs probe detuning")
    common(sp)
    _add_physics_flags(sp)
    sp.add_argument("--delta-min", type=float, dest="delta_min")
    sp.add_argument("--delta-max", type=float, dest="delta_max")
    sp.add_argument("--points", type=float)
    sp.add_argument("--nbar", type=float)
    sp.set_defaults(func=cmd_correlations)

    sp = sub.add_parser("simulate", help="generate a synthetic click record")
    common(sp)
    _add_physics_flags(sp)
    for key in _SIM_DEFAULTS:
        sp.add_argument(f"--{key.replace('_', '-')}", type=float, dest=key)
    sp.add_argument("--no-atom", action="store_true",
                    help="turn off atom transits in the main record")
    sp.add_argument("--no-atom-out", type=str, default=None,
                    help="also write a paired atom-free record here (seed+1)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("analyze", help="run the click-analysis pipeline on a record")
    common(sp)
    sp.add_argument("--record", type=str, required=True)
    sp.add_argument("--no-atom-record", type=str, default=None)
    sp.add_argument("--empty-flux", type=float, default=None,
                    help="supplied empty-cavity transmitted flux per us "
                         "(default: measured from the record)")
    for key in _ANALYZE_DEFAULTS:
        sp.add_argument(f"--{key.replace('_', '-')}", type=float, dest=key)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("saturation", help="model-side drive-strength sweep")
    common(sp)
    _add_physics_flags(sp)
    sp.add_argument("--nbars", type=str, default=None,
                    help="comma-separated list of empty-cavity photon numbers")
    sp.add_argument("--background-fraction", type=float, dest="background_fraction")
    sp.add_argument("--g-samples", type=float, dest="g_samples")
    sp.add_argument("--kx-samples", type=float, dest="kx_samples")
    sp.set_defaults(func=cmd_saturation)

    sp = sub.add_parser("repro", help="run the full figure recipe suite")
    common(sp)
    sp.add_argument("--duration-s", type=float, default=0.02)
    sp.set_defaults(func=cmd_repro)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RecordFormatError as exc:
        print(f"record format error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, ResourceLimitError, DegenerateFluxError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except StatisticalInsufficiencyError as exc:
        print(f"insufficient statistics: {exc}", file=sys.stderr)
        return EXIT_STATISTICS
    except PhotonRouterError as exc:  # pragma: no cover - catch-all safety
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
