"""Click-record measurement pipeline: transit selection by thresholded
reflected counts, aligned-window averaging of transmission / reflection,
photon correlation estimation, false-detection ratio, and the saturation
table.

All analysis here is blind to the simulator truth log: it sees only
detector ids and timestamps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .errors import ConfigError, DegenerateFluxError, StatisticalInsufficiencyError
from .trajectory import DETECTOR_PAIR_R, DETECTOR_PAIR_T, ClickRecord

HALF_WINDOW_US = 6.0  # counts are extracted within +-6 us of the time origin
SLIDE_STEP_US = 0.1  # threshold-window sliding resolution
SHAPE_BIN_US = 0.2  # resolution of the mean click-density shape used in g2
MIN_PAIRS_PER_BIN = 10


@dataclass(frozen=True)
class TransitEvent:
    """One selected transit: time origin, extraction window, and the
    triggering count sum over its qualifying span."""

    t0_us: float
    s: int
    source_span: tuple[float, float]

    @property
    def window(self) -> tuple[float, float]:
        return (self.t0_us - HALF_WINDOW_US, self.t0_us + HALF_WINDOW_US)


@dataclass
class CorrelationResult:
    tau_bins_us: np.ndarray  # bin centers
    g2: np.ndarray
    stderr: np.ndarray
    n_pairs: np.ndarray
    normalization: dict = field(default_factory=dict)


@dataclass
class AveragedSignals:
    """Mean normalized transmission / reflection around the transit origin."""

    t_us: np.ndarray  # bin centers relative to t0
    transmitted: np.ndarray  # T0(t)
    reflected: np.ndarray  # R0(t)
    empty_flux_per_us: float  # detected transmitted flux used as normalization
    n_events: int
    empty_flux_source: str  # "supplied" or "measured"


def detect_transits(rec: ClickRecord, c_th: int, dt_atom_us: float) -> list[TransitEvent]:
    """Select transits: slide a dt_atom window over the summed D1+D2 counts in
    100 ns steps; spans with S >= c_th qualify; overlapping qualifying spans
    merge into one event keeping the max-S span; the time origin is the mean
    timestamp of the counts in that span."""
    if dt_atom_us <= 0:
        raise ConfigError("dt_atom must be > 0")
    if c_th < 1:
        raise ConfigError("c_th must be >= 1")
    t_r = rec.times_us(DETECTOR_PAIR_R)
    if t_r.size == 0:
        return []
    t_r.sort()

    # candidate window starts: only grid points within dt_atom before a click
    n_back = int(math.floor(dt_atom_us / SLIDE_STEP_US)) + 1
    base = np.floor(t_r / SLIDE_STEP_US).astype(np.int64)
    cand = np.unique((base[:, None] - np.arange(n_back)[None, :]).ravel())
    cand = cand[cand >= 0]
    starts = cand * SLIDE_STEP_US
    s_counts = (
        np.searchsorted(t_r, starts + dt_atom_us, side="left")
        - np.searchsorted(t_r, starts, side="left")
    )
    qual = s_counts >= c_th
    if not np.any(qual):
        return []
    q_starts = starts[qual]
    q_counts = s_counts[qual]

    events: list[TransitEvent] = []
    group_start = 0
    for i in range(1, q_starts.size + 1):
        if i == q_starts.size or q_starts[i] - q_starts[i - 1] > dt_atom_us:
            grp = slice(group_start, i)
            best = group_start + int(np.argmax(q_counts[grp]))
            lo = q_starts[best]
            hi = lo + dt_atom_us
            in_span = t_r[(t_r >= lo) & (t_r < hi)]
            t0 = float(in_span.mean())
            events.append(TransitEvent(t0_us=t0, s=int(q_counts[best]), source_span=(lo, hi)))
            group_start = i
    return events


def tiled_events(rec: ClickRecord, spacing_us: float | None = None) -> list[TransitEvent]:
    """Unconditioned pseudo-events tiling the whole record, for estimating
    correlations of an unselected (e.g. atom-free) stream."""
    spacing = 2.0 * HALF_WINDOW_US if spacing_us is None else spacing_us
    centers = np.arange(HALF_WINDOW_US, rec.duration_us - HALF_WINDOW_US, spacing)
    return [TransitEvent(t0_us=float(t), s=0, source_span=(t - spacing / 2, t + spacing / 2))
            for t in centers]


def _window_clicks(times: np.ndarray, t0: float) -> np.ndarray:
    lo = np.searchsorted(times, t0 - HALF_WINDOW_US)
    hi = np.searchsorted(times, t0 + HALF_WINDOW_US)
    return times[lo:hi] - t0


def empty_transmitted_flux(rec: ClickRecord, events: list[TransitEvent],
                           margin_us: float = 2.0) -> float:
    """Detected transmitted flux (D3+D4 clicks per us) measured on record
    stretches away from any selected event window."""
    t_t = rec.times_us(DETECTOR_PAIR_T)
    t_t.sort()
    blocked = 0.0
    n_blocked = 0
    prev_hi = 0.0
    for ev in sorted(events, key=lambda e: e.t0_us):
        lo = max(ev.t0_us - HALF_WINDOW_US - margin_us, prev_hi)
        hi = min(ev.t0_us + HALF_WINDOW_US + margin_us, rec.duration_us)
        if hi > lo:
            blocked += hi - lo
            n_blocked += np.searchsorted(t_t, hi) - np.searchsorted(t_t, lo)
            prev_hi = hi
    free_time = rec.duration_us - blocked
    if free_time <= 0:
        raise DegenerateFluxError("no atom-free stretches to measure the empty flux")
    flux = (t_t.size - n_blocked) / free_time
    if flux <= 0:
        raise DegenerateFluxError("measured empty transmitted flux is zero")
    return float(flux)


def averaged_signals(
    rec: ClickRecord,
    events: list[TransitEvent],
    bin_us: float,
    empty_flux_per_us: float | None = None,
) -> AveragedSignals:
    """Event-aligned average of the transmitted and reflected count rates,
    both normalized to the empty-cavity transmitted flux (supplied, or
    measured from the stretches of this record outside event windows)."""
    if not events:
        raise ConfigError("averaged_signals requires at least one event")
    n_bins_f = 2.0 * HALF_WINDOW_US / bin_us
    n_bins = int(round(n_bins_f))
    if abs(n_bins_f - n_bins) > 1e-9 or n_bins < 1:
        raise ConfigError("bin width must divide the 12 us window")
    if empty_flux_per_us is None:
        flux0 = empty_transmitted_flux(rec, events)
        source = "measured"
    else:
        flux0 = float(empty_flux_per_us)
        source = "supplied"
    if flux0 <= 0:
        raise DegenerateFluxError("empty-flux normalization must be > 0")

    edges = np.linspace(-HALF_WINDOW_US, HALF_WINDOW_US, n_bins + 1)
    t_t = rec.times_us(DETECTOR_PAIR_T)
    t_r = rec.times_us(DETECTOR_PAIR_R)
    t_t.sort()
    t_r.sort()
    h_t = np.zeros(n_bins)
    h_r = np.zeros(n_bins)
    for ev in events:
        h_t += np.histogram(_window_clicks(t_t, ev.t0_us), edges)[0]
        h_r += np.histogram(_window_clicks(t_r, ev.t0_us), edges)[0]
    scale = 1.0 / (len(events) * bin_us * flux0)
    return AveragedSignals(
        t_us=0.5 * (edges[1:] + edges[:-1]),
        transmitted=h_t * scale,
        reflected=h_r * scale,
        empty_flux_per_us=flux0,
        n_events=len(events),
        empty_flux_source=source,
    )


def _mean_shape(times: np.ndarray, events: list[TransitEvent]) -> np.ndarray:
    """Mean click density across aligned windows, normalized to unit area."""
    n_bins = int(round(2.0 * HALF_WINDOW_US / SHAPE_BIN_US))
    edges = np.linspace(-HALF_WINDOW_US, HALF_WINDOW_US, n_bins + 1)
    h = np.zeros(n_bins)
    for ev in events:
        h += np.histogram(_window_clicks(times, ev.t0_us), edges)[0]
    total = h.sum()
    if total == 0:
        return np.full(n_bins, 1.0 / (2.0 * HALF_WINDOW_US))
    return h / (total * SHAPE_BIN_US)


def estimate_g2(
    rec: ClickRecord,
    events: list[TransitEvent],
    which: str,
    tau_edges_us,
) -> CorrelationResult:
    """Cross-detector g2(|tau|) from click pairs inside selected windows.

    Coincidences between the two detectors of the chosen pair are histogrammed
    in |tau|.  The accidental normalization is transit-resolved — per-window
    singles products Sum_w N1_w N2_w — multiplied by the lag correlation of
    the mean (event-aligned) click-density shapes, so that rate modulation by
    the transit envelope itself does not masquerade as a correlation and the
    estimate plateaus at 1 at large |tau| inside the windows.
    """
    if not events:
        raise ConfigError("estimate_g2 requires at least one event")
    pair = {"T": DETECTOR_PAIR_T, "R": DETECTOR_PAIR_R}.get(which.upper())
    if pair is None:
        raise ConfigError("which must be 'T' or 'R'")
    edges = np.asarray(tau_edges_us, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0) or edges[0] < 0:
        raise ConfigError("tau_edges_us must be increasing and nonnegative")

    t1 = rec.times_us([pair[0]])
    t2 = rec.times_us([pair[1]])
    t1.sort()
    t2.sort()

    # timestamps live on a discrete lattice (the detector resolution), so
    # lags are binned as integer lattice units with half-open [lo, hi) bins;
    # the accidental normalization below sums over exactly the same lag sets
    res_us = rec.detector_model.timestamp_resolution_ns / 1000.0
    k_edges = np.array([int(math.ceil(e / res_us - 1e-9)) for e in edges])
    if np.any(np.diff(k_edges) < 1):
        raise ConfigError("tau bins are narrower than the timestamp resolution")

    counts = np.zeros(edges.size - 1)
    prod_sum = 0.0
    for ev in events:
        w1 = _window_clicks(t1, ev.t0_us)
        w2 = _window_clicks(t2, ev.t0_us)
        prod_sum += w1.size * w2.size
        if w1.size and w2.size:
            d = np.rint(np.abs(w2[None, :] - w1[:, None]).ravel() / res_us)
            counts += np.histogram(d, k_edges)[0]
            # np.histogram closes the last bin; shed lags equal to the end edge
            counts[-1] -= np.count_nonzero(d == k_edges[-1])

    if prod_sum == 0:
        raise StatisticalInsufficiencyError("no click pairs in any selected window")

    # accidental shape factor c(tau) = integral p1(s) p2(s + tau) ds
    p1 = _mean_shape(t1, events)
    p2 = _mean_shape(t2, events)
    c_full = np.correlate(p2, p1, mode="full") * SHAPE_BIN_US  # lag -(n-1)..(n-1)
    lags = np.arange(-(p1.size - 1), p1.size) * SHAPE_BIN_US
    centers = 0.5 * (edges[1:] + edges[:-1])

    # each |tau| bin collects a definite set of signed integer lags (the zero
    # lag only once); summing c over exactly those lags matches the numerator
    accidental = np.empty(edges.size - 1)
    for j in range(edges.size - 1):
        ks = np.arange(k_edges[j], k_edges[j + 1])
        signed = np.concatenate([ks, -ks[ks > 0]])  # zero lag counted once
        c_vals = np.interp(signed * res_us, lags, c_full)
        accidental[j] = prod_sum * c_vals.sum() * res_us

    if np.any(accidental <= 0):
        raise DegenerateFluxError("vanishing accidental normalization in a tau bin")
    g2 = counts / accidental
    stderr = np.sqrt(np.maximum(counts, 1.0)) / accidental
    if np.all(counts < MIN_PAIRS_PER_BIN):
        raise StatisticalInsufficiencyError(
            f"fewer than {MIN_PAIRS_PER_BIN} pairs in every tau bin"
        )
    return CorrelationResult(
        tau_bins_us=centers,
        g2=g2,
        stderr=stderr,
        n_pairs=counts.astype(np.int64),
        normalization={
            "method": "per-window singles product x mean-shape lag correlation",
            "pair_product_sum": float(prod_sum),
            "n_events": len(events),
        },
    )


def fit_relaxation(tau_us: np.ndarray, g2: np.ndarray) -> tuple[float, float]:
    """Fit g2(tau) = 1 + (g2(0) - 1) exp(-tau / tau_r); returns (tau_r, g2_0).

    Works for both the antibunched (recovery from below) and bunched decay.
    """

    def shape(t, tau_r, g2_0):
        return 1.0 + (g2_0 - 1.0) * np.exp(-t / tau_r)

    a0 = float(g2[0] - 1.0)
    p0 = (max(tau_us[1], 1e-3), 1.0 + a0)
    popt, _ = curve_fit(shape, tau_us, g2, p0=p0, maxfev=20000)
    return float(popt[0]), float(popt[1])


def false_detection_ratio(
    rec_atoms: ClickRecord,
    rec_no_atoms: ClickRecord,
    c_th: int,
    dt_atom_us: float,
    bin_us: float = 1.0,
    empty_flux_per_us: float | None = None,
) -> float:
    """Ratio of the reflected-signal centers of the no-atom and atom records.

    Both records are pushed through the same detect/average pipeline; each
    center signal is weighted by its record's event rate (events per unit
    time), so F reflects how often spurious transits fire relative to real
    ones, not just the per-event burst strength.
    """
    ev_atom = detect_transits(rec_atoms, c_th, dt_atom_us)
    if not ev_atom:
        raise DegenerateFluxError("no transits detected in the atom record")
    sig_atom = averaged_signals(rec_atoms, ev_atom, bin_us, empty_flux_per_us)
    center = np.argmin(np.abs(sig_atom.t_us))
    denom = sig_atom.reflected[center] * len(ev_atom) / rec_atoms.duration_us
    if denom <= 0:
        raise DegenerateFluxError("atom-record reflected center signal is zero")

    ev_no = detect_transits(rec_no_atoms, c_th, dt_atom_us)
    if not ev_no:
        return 0.0
    sig_no = averaged_signals(
        rec_no_atoms, ev_no, bin_us,
        empty_flux_per_us if empty_flux_per_us is not None else sig_atom.empty_flux_per_us,
    )
    numer = sig_no.reflected[center] * len(ev_no) / rec_no_atoms.duration_us
    return float(numer / denom)


@dataclass(frozen=True)
class SaturationAnalysisRow:
    nbar: float
    c_th: int
    t0_center: float
    g2_r0: float
    f_ratio: float
    flagged: bool  # no threshold met the false-detection requirement


def saturation_analysis(
    records: list[tuple[float, ClickRecord, ClickRecord]],
    f_max: float,
    dt_atom_us: float = 4.0,
    c_th_range=range(3, 9),
    bin_us: float = 1.0,
    tau_edges_us=None,
) -> list[SaturationAnalysisRow]:
    """Per drive strength: smallest threshold with F < f_max, then the center
    transmission and g2_R(0) at that threshold.  Rows where no threshold
    qualifies are flagged (computed at the largest threshold) rather than
    raised."""
    if not records:
        raise ConfigError("saturation_analysis requires at least one record")
    if tau_edges_us is None:
        tau_edges_us = np.linspace(0.0, 0.05, 11)
    rows = []
    for nbar, rec_atom, rec_no in records:
        chosen = None
        f_at = math.inf
        for c_th in c_th_range:
            try:
                f_at = false_detection_ratio(rec_atom, rec_no, c_th, dt_atom_us, bin_us)
            except (DegenerateFluxError, StatisticalInsufficiencyError):
                continue
            if f_at < f_max:
                chosen = c_th
                break
        flagged = chosen is None
        c_th = max(c_th_range) if flagged else chosen
        events = detect_transits(rec_atom, c_th, dt_atom_us)
        sig = averaged_signals(rec_atom, events, bin_us)
        center = np.argmin(np.abs(sig.t_us))
        corr = estimate_g2(rec_atom, events, "R", tau_edges_us)
        rows.append(SaturationAnalysisRow(
            nbar=float(nbar),
            c_th=int(c_th),
            t0_center=float(sig.transmitted[center]),
            g2_r0=float(corr.g2[0]),
            f_ratio=float(f_at),
            flagged=flagged,
        ))
    return rows
