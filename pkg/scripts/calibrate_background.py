#!/usr/bin/env python3
"""Sweep the per-detector background rate and tabulate the false-detection
ratio F versus selection threshold, to pick the operating default.

Usage: python scripts/calibrate_background.py [--duration-s 0.02] [--seed 201]
"""

import argparse

from photon_router import FIG1_PARAMS, analysis, calibrate_drive, trajectory


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--duration-s", type=float, default=0.02)
    ap.add_argument("--no-atom-duration-s", type=float, default=0.08)
    ap.add_argument("--nbar", type=float, default=0.093)
    ap.add_argument("--seed", type=int, default=201)
    ap.add_argument("--rates", type=str, default="15e3,20e3,25e3,30e3,45e3")
    args = ap.parse_args()

    p = FIG1_PARAMS.with_(drive_ep=calibrate_drive(FIG1_PARAMS, args.nbar))
    tm = trajectory.TransitModel()
    tm_no = trajectory.TransitModel(arrival_rate_per_s=0.0)
    for rate in (float(r) for r in args.rates.split(",")):
        dm = trajectory.DetectorModel(background_rate_per_s=rate)
        rec = trajectory.simulate_record(p, tm, dm, args.duration_s, args.seed)
        rec_no = trajectory.simulate_record(p, tm_no, dm, args.no_atom_duration_s,
                                            args.seed + 1)
        cells = []
        for c_th in range(3, 9):
            try:
                f = analysis.false_detection_ratio(rec, rec_no, c_th, 4.0)
                cells.append(f"{c_th}:{f:.4f}")
            except Exception as exc:  # noqa: BLE001 - report and keep sweeping
                cells.append(f"{c_th}:({type(exc).__name__})")
        print(f"bg={rate / 1e3:6.1f}k/s  " + "  ".join(cells), flush=True)


if __name__ == "__main__":
    main()
