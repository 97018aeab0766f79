#!/usr/bin/env python3
"""Compare the trajectory ensemble against the time-dependent master equation
for a single transit: time-binned transmitted/reflected click rates.

Usage: python scripts/transit_closure.py [--runs 400] [--g-peak 50] [--kx 0.3]
"""

import argparse
import time

import numpy as np
from scipy.integrate import trapezoid

from photon_router import FIG1_PARAMS, calibrate_drive, expected_transit_fluxes
from photon_router.trajectory import (
    WINDOW_HALF_FWHM,
    WINDOW_TAIL_US,
    _TransitEngine,
)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=400)
    ap.add_argument("--nbar", type=float, default=0.093)
    ap.add_argument("--g-peak", type=float, default=50.0)
    ap.add_argument("--kx", type=float, default=0.3)
    ap.add_argument("--fwhm-us", type=float, default=2.0)
    ap.add_argument("--bins", type=int, default=41)
    ap.add_argument("--seed", type=int, default=1000)
    args = ap.parse_args()

    p = FIG1_PARAMS.with_(drive_ep=calibrate_drive(FIG1_PARAMS, args.nbar))
    half = WINDOW_HALF_FWHM * args.fwhm_us
    t0w, t1w = -half, half + WINDOW_TAIL_US

    grid = np.linspace(t0w, t1w, 301)
    i_t, i_r = expected_transit_fluxes(p, args.g_peak, args.kx, args.fwhm_us, grid)

    engine = _TransitEngine(p, 3)
    edges = np.linspace(t0w, t1w, args.bins + 1)
    h_t = np.zeros(args.bins)
    h_r = np.zeros(args.bins)
    start = time.time()
    for i in range(args.runs):
        ch, ts = engine.run_window(t0w, t1w, 0.0, args.g_peak, args.kx,
                                   args.fwhm_us, args.seed + i)
        h_t += np.histogram(ts[ch == 0], edges)[0]
        h_r += np.histogram(ts[ch == 1], edges)[0]
    print(f"{args.runs} trajectories in {time.time() - start:.1f} s")

    width = edges[1] - edges[0]
    mids = 0.5 * (edges[1:] + edges[:-1])
    print(f"{'t_us':>7} {'T_mcwf':>9} {'T_me':>9} {'R_mcwf':>9} {'R_me':>9}")
    for j in range(args.bins):
        print(f"{mids[j]:7.2f} {h_t[j] / (args.runs * width):9.3f} "
              f"{np.interp(mids[j], grid, i_t):9.3f} "
              f"{h_r[j] / (args.runs * width):9.4f} "
              f"{np.interp(mids[j], grid, i_r):9.4f}")
    int_t = trapezoid(i_t, grid)
    int_r = trapezoid(i_r, grid)
    print(f"integrated T: mcwf {h_t.sum() / args.runs:.2f}  me {int_t:.2f} "
          f"({100 * (h_t.sum() / args.runs / int_t - 1):+.2f}%)")
    print(f"integrated R: mcwf {h_r.sum() / args.runs:.2f}  me {int_r:.2f} "
          f"({100 * (h_r.sum() / args.runs / int_r - 1):+.2f}%)")


if __name__ == "__main__":
    main()
