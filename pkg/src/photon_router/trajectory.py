"""Stochastic quantum-trajectory generator of time-stamped photodetection
records at four detectors.

Unravelling: the transmitted channel uses the displaced jump operator
J_T = sqrt(2 kappa_ex) a - alpha_in so that detections interfere the input
and cavity fields; to keep the ensemble average equal to the master
equation, the coherent drive term in the trajectory Hamiltonian carries
half the model's amplitude (the displacement supplies the other half).

Between atom transits the conditional state is the empty-cavity coherent
state, which is an eigenstate of every jump operator; clicks there are
generated directly as Poisson processes at the exact output rates.  During
a transit the wavefunction is stepped on a 50 ns Hamiltonian grid (the
Gaussian coupling envelope is piecewise constant per cell) with a fixed
sub-step for jump timing.

Everything is deterministic given the record seed: independent substreams
are derived per transit, per empty segment, and per background detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import erf
import scipy.sparse as sp

from . import hilbert, model
from .errors import ConfigError, RecordFormatError, SolverError
from .hilbert import HilbertSpace, make_space
from .params import SystemParams, angular

try:  # pragma: no cover - environment dependent
    from numba import njit

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _HAVE_NUMBA = False

CELL_US = 0.025  # Hamiltonian re-assembly grid during transits
DEFAULT_STEP_US = 5e-4  # jump-timing sub-step (0.5 ns)
WINDOW_HALF_FWHM = 2.0  # simulated half-window in units of the envelope FWHM
WINDOW_TAIL_US = 0.3  # extra settling time after the envelope has died off

DETECTOR_PAIR_R = (1, 2)  # reflected output b_out
DETECTOR_PAIR_T = (3, 4)  # transmitted output a_out


@dataclass(frozen=True)
class TransitModel:
    """Atom-transit statistics: Poisson arrivals, Gaussian coupling envelope,
    peak coupling drawn uniformly, azimuthal phase uniform on [0, 2 pi)."""

    arrival_rate_per_s: float = 10_000.0
    envelope_fwhm_us: float = 2.0
    g_peak_min: float = 35.0
    g_peak_max: float = 65.0

    def __post_init__(self) -> None:
        if self.arrival_rate_per_s < 0:
            raise ConfigError("arrival rate must be >= 0")
        if self.envelope_fwhm_us <= 0:
            raise ConfigError("envelope FWHM must be > 0")
        if self.g_peak_min > self.g_peak_max:
            raise ConfigError("g_peak_min must be <= g_peak_max")


@dataclass(frozen=True)
class DetectorModel:
    """Detection chain: 50/50 splitting onto each detector pair, per-channel
    efficiency, independent Poisson background per detector."""

    efficiency: float = 0.5
    split_ratio: float = 0.5
    background_rate_per_s: float = 25_000.0
    timestamp_resolution_ns: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.efficiency <= 1.0:
            raise ConfigError("efficiency must be in [0, 1]")
        if not 0.0 <= self.split_ratio <= 1.0:
            raise ConfigError("split_ratio must be in [0, 1]")
        if self.background_rate_per_s < 0:
            raise ConfigError("background rate must be >= 0")
        if self.timestamp_resolution_ns <= 0:
            raise ConfigError("timestamp resolution must be > 0")


@dataclass(frozen=True)
class TransitTruth:
    t_center_us: float
    g_peak: float
    kx: float


@dataclass
class ClickRecord:
    """Time-ordered photodetection events plus full run metadata and the
    truth log of simulated transits (for validation only)."""

    detectors: np.ndarray  # int values in {1,2,3,4}
    timestamps_ns: np.ndarray  # int64, nondecreasing
    params: SystemParams
    transit_model: TransitModel
    detector_model: DetectorModel
    seed: int
    duration_s: float
    transits: list[TransitTruth] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.detectors = np.asarray(self.detectors, dtype=np.int64)
        self.timestamps_ns = np.asarray(self.timestamps_ns, dtype=np.int64)
        if self.detectors.shape != self.timestamps_ns.shape:
            raise RecordFormatError("detector and timestamp arrays differ in length")
        if self.detectors.size and (self.detectors.min() < 1 or self.detectors.max() > 4):
            raise RecordFormatError("detector ids must be in 1..4")
        if np.any(np.diff(self.timestamps_ns) < 0):
            raise RecordFormatError("timestamps must be nondecreasing")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClickRecord):
            return NotImplemented
        return (
            np.array_equal(self.detectors, other.detectors)
            and np.array_equal(self.timestamps_ns, other.timestamps_ns)
            and self.params == other.params
            and self.transit_model == other.transit_model
            and self.detector_model == other.detector_model
            and self.seed == other.seed
            and self.duration_s == other.duration_s
            and self.transits == other.transits
        )

    @property
    def duration_us(self) -> float:
        return self.duration_s * 1e6

    def times_us(self, detector_ids) -> np.ndarray:
        """Timestamps (us, float) of clicks on any of the given detectors."""
        mask = np.isin(self.detectors, list(detector_ids))
        return self.timestamps_ns[mask].astype(float) / 1000.0


# ---------------------------------------------------------------------------
# analytic empty-cavity rates

def empty_cavity_amplitudes(p: SystemParams) -> tuple[complex, complex]:
    """Steady coherent amplitudes <a>, <b> of the empty driven cavity (angular units)."""
    ep = angular(p.drive_ep)
    d = angular(p.kappa) - 1j * angular(p.delta_cp)
    hh = angular(p.h)
    det = d * d + hh * hh
    return ep * d / det, -1j * hh * ep / det


def empty_output_rates(p: SystemParams) -> tuple[float, float]:
    """Transmitted and reflected photon rates (per us) of the empty cavity."""
    a_ss, b_ss = empty_cavity_amplitudes(p)
    kex = angular(p.kappa_ex)
    alpha_in = angular(p.drive_ep) / math.sqrt(2.0 * kex)
    r_t = abs(math.sqrt(2.0 * kex) * a_ss - alpha_in) ** 2
    r_r = 2.0 * kex * abs(b_ss) ** 2
    return r_t, r_r


def envelope(t_us, t_center_us: float, fwhm_us: float) -> np.ndarray:
    """Gaussian transit envelope, peak 1 at the center."""
    t = np.asarray(t_us, dtype=float)
    return np.exp(-4.0 * math.log(2.0) * (t - t_center_us) ** 2 / fwhm_us**2)


def trajectory_truncation(nbar: float) -> int:
    return max(3, math.ceil(8.0 * nbar) + 2)


# ---------------------------------------------------------------------------
# MCWF stepping kernel

def _mcwf_cells_py(u_cells, steps_per_cell, dt_us, t_start_us, jump_ops, psi, seed,
                   out_channels, out_times):
    rng = np.random.RandomState(seed)
    n_jump = jump_ops.shape[0]
    nj = 0
    r = rng.random_sample()
    t = t_start_us
    n2_start = 1.0
    for c in range(u_cells.shape[0]):
        u = u_cells[c]
        for _ in range(steps_per_cell):
            psi = u @ psi
            t += dt_us
            n2 = float(np.vdot(psi, psi).real)
            while n2 <= r:
                phis = jump_ops @ psi
                w = np.einsum("ki,ki->k", phis.conj(), phis).real
                x = rng.random_sample() * w.sum()
                k = int(np.searchsorted(np.cumsum(w), x))
                k = min(k, n_jump - 1)
                psi = phis[k] / math.sqrt(w[k])
                if nj >= out_channels.shape[0]:
                    return -1, psi
                out_channels[nj] = k
                out_times[nj] = t
                nj += 1
                # the threshold was crossed a fraction f into the step; the
                # post-jump state still owes the remaining (1 - f) of the step's
                # survival decay, at its *own* decay rate (using the pre-jump
                # rate instead biases channels whose rate changes at a jump)
                if n2_start > n2 and r < n2_start:
                    f = math.log(r / n2_start) / math.log(n2 / n2_start)
                else:
                    f = 1.0
                phis_post = jump_ops @ psi
                lam_dt = float(np.einsum("ki,ki->", phis_post.conj(), phis_post).real) * dt_us
                r = rng.random_sample() * min(math.exp(lam_dt * (1.0 - f)), 4.0)
                n2 = 1.0
            n2_start = n2
    return nj, psi


if _HAVE_NUMBA:

    @njit(cache=True)
    def _mcwf_cells_nb(u_cells, steps_per_cell, dt_us, t_start_us, jump_ops, psi, seed,
                       out_channels, out_times):  # pragma: no cover - compiled
        np.random.seed(seed)
        n_jump = jump_ops.shape[0]
        dim = psi.shape[0]
        nj = 0
        r = np.random.random()
        t = t_start_us
        n2_start = 1.0
        w = np.empty(n_jump)
        phis = np.empty((n_jump, dim), dtype=np.complex128)
        for c in range(u_cells.shape[0]):
            u = u_cells[c]
            for _ in range(steps_per_cell):
                psi = np.dot(u, psi)
                t += dt_us
                n2 = 0.0
                for i in range(dim):
                    n2 += psi[i].real ** 2 + psi[i].imag ** 2
                while n2 <= r:
                    tot = 0.0
                    for k in range(n_jump):
                        acc = 0.0
                        for i in range(dim):
                            val = 0.0 + 0.0j
                            for j in range(dim):
                                val += jump_ops[k, i, j] * psi[j]
                            phis[k, i] = val
                            acc += val.real**2 + val.imag**2
                        w[k] = acc
                        tot += acc
                    x = np.random.random() * tot
                    k = 0
                    acc = w[0]
                    while acc < x and k < n_jump - 1:
                        k += 1
                        acc += w[k]
                    nrm = math.sqrt(w[k])
                    for i in range(dim):
                        psi[i] = phis[k, i] / nrm
                    if nj >= out_channels.shape[0]:
                        return -1, psi
                    out_channels[nj] = k
                    out_times[nj] = t
                    nj += 1
                    # the threshold was crossed a fraction f into the step;
                    # the post-jump state still owes the remaining (1 - f) of
                    # the step's survival decay at its *own* decay rate (the
                    # pre-jump rate would bias channels whose rate changes at
                    # a jump)
                    if n2_start > n2 and r < n2_start:
                        f = math.log(r / n2_start) / math.log(n2 / n2_start)
                    else:
                        f = 1.0
                    lam_dt = 0.0
                    for k2 in range(n_jump):
                        for i in range(dim):
                            val = 0.0 + 0.0j
                            for j in range(dim):
                                val += jump_ops[k2, i, j] * psi[j]
                            lam_dt += val.real**2 + val.imag**2
                    lam_dt *= dt_us
                    carry = math.exp(lam_dt * (1.0 - f))
                    if carry > 4.0:
                        carry = 4.0
                    r = np.random.random() * carry
                    n2 = 1.0
                n2_start = n2
        return nj, psi


def _taylor_expm(a: np.ndarray) -> np.ndarray:
    """exp(a) by scaling-and-squaring with a Taylor series (small dense a)."""
    norm = float(np.abs(a).sum(axis=1).max())
    s = max(0, math.ceil(math.log2(norm)) + 1) if norm > 0.5 else 0
    a_s = a / (2**s)
    u = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, 40):
        term = term @ a_s / k
        u = u + term
        if np.abs(term).max() < 1e-14:
            break
    for _ in range(s):
        u = u @ u
    return u


class _TransitEngine:
    """Precomputed operators and propagators for transit windows."""

    JUMP_T = 0
    JUMP_R = 1

    def __init__(self, p: SystemParams, n_max: int, step_us: float = DEFAULT_STEP_US):
        self.p = p
        self.step_us = step_us
        self.space = make_space(n_max, n_max)
        space = self.space
        a = hilbert.mode_annihilation(space, "a")
        b = hilbert.mode_annihilation(space, "b")
        sm = hilbert.atom_lowering(space)
        self._a, self._b, self._sm = a, b, sm

        kex = angular(p.kappa_ex)
        ki = angular(p.kappa_i)
        gam = angular(p.gamma)
        alpha_in = angular(p.drive_ep) / math.sqrt(2.0 * kex)
        eye = hilbert.identity(space)
        jumps = [
            math.sqrt(2.0 * kex) * a - alpha_in * eye,  # transmitted (monitored)
            math.sqrt(2.0 * kex) * b,  # reflected (monitored)
            math.sqrt(2.0 * ki) * a,
            math.sqrt(2.0 * ki) * b,
            math.sqrt(gam) * sm,
        ]
        self.jump_ops = np.ascontiguousarray(np.stack(jumps))
        k_tot = sum(j.conj().T @ j for j in jumps)
        # half-amplitude drive: the displaced jump operator carries the rest
        h_base = model.build_hamiltonian(p, space, atom_present=True,
                                         g_override_mhz=0.0, drive_scale=0.5)
        self._h_eff_static = h_base - 0.5j * k_tot
        self._coupling_cache_kx: float | None = None
        self._v_kx: np.ndarray | None = None

    def _coupling_unit(self, kx: float) -> np.ndarray:
        if self._coupling_cache_kx != kx:
            term = (np.exp(-1j * kx) * self._a + np.exp(+1j * kx) * self._b) @ self._sm.conj().T
            self._v_kx = term + term.conj().T
            self._coupling_cache_kx = kx
        return self._v_kx

    def cell_propagators(self, t_start_us: float, n_cells: int, t_center_us: float,
                         g_peak: float, kx: float, fwhm_us: float) -> np.ndarray:
        v = self._coupling_unit(kx)
        # exact cell average of the Gaussian envelope (midpoint sampling
        # retards the response and skews flux toward the trailing edge)
        lo = t_start_us + np.arange(n_cells) * CELL_US - t_center_us
        sq = 2.0 * math.sqrt(math.log(2.0)) / fwhm_us
        gs = angular(g_peak) * (erf(sq * (lo + CELL_US)) - erf(sq * lo)) \
            * math.sqrt(math.pi) / (2.0 * sq * CELL_US)
        u = np.empty((n_cells, self.space.total_dim, self.space.total_dim), dtype=complex)
        for i, g in enumerate(gs):
            h_eff = self._h_eff_static + g * v
            u[i] = _taylor_expm(-1j * self.step_us * h_eff)
        return u

    def initial_state(self) -> np.ndarray:
        a_ss, b_ss = empty_cavity_amplitudes(self.p)
        return hilbert.coherent_ground_state(self.space, a_ss, b_ss)

    def run_window(self, t_start_us: float, t_end_us: float, t_center_us: float,
                   g_peak: float, kx: float, fwhm_us: float, kernel_seed: int
                   ) -> tuple[np.ndarray, np.ndarray]:
        """Simulate one transit window; returns (channels, times_us) of all jumps."""
        n_cells = max(1, int(round((t_end_us - t_start_us) / CELL_US)))
        steps_per_cell = max(1, int(round(CELL_US / self.step_us)))
        u_cells = self.cell_propagators(t_start_us, n_cells, t_center_us, g_peak, kx, fwhm_us)
        psi = self.initial_state()

        total_rate = model.input_flux(self.p) + 2.0 * angular(self.p.kappa) * 1.0 + angular(self.p.gamma)
        cap = int(4 * total_rate * (t_end_us - t_start_us)) + 1000
        kernel = _mcwf_cells_nb if _HAVE_NUMBA else _mcwf_cells_py
        for _ in range(4):
            channels = np.empty(cap, dtype=np.int64)
            times = np.empty(cap, dtype=np.float64)
            nj, _ = kernel(u_cells, steps_per_cell, self.step_us, t_start_us,
                           self.jump_ops, psi.copy(), kernel_seed, channels, times)
            if nj >= 0:
                return channels[:nj], times[:nj]
            cap *= 4
        raise SolverError("jump buffer overflow; rate far above estimate")


# ---------------------------------------------------------------------------
# record synthesis

def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, *key)))


def _poisson_times(rng: np.random.Generator, rate_per_us: float, t0_us: float,
                   t1_us: float) -> np.ndarray:
    span = t1_us - t0_us
    if span <= 0 or rate_per_us <= 0:
        return np.empty(0)
    n = rng.poisson(rate_per_us * span)
    return t0_us + rng.random(n) * span


def simulate_record(
    p: SystemParams,
    tm: TransitModel,
    dm: DetectorModel,
    duration_s: float,
    seed: int,
    n_max: int | None = None,
    step_us: float = DEFAULT_STEP_US,
) -> ClickRecord:
    """Synthesize a click record; fully deterministic given the seed."""
    if duration_s <= 0:
        raise ConfigError("duration must be > 0")
    duration_us = duration_s * 1e6

    # transit schedule (non-overlapping windows; overlapping arrivals dropped)
    half = WINDOW_HALF_FWHM * tm.envelope_fwhm_us
    tail = WINDOW_TAIL_US
    sched = _rng(seed, 0)
    n_arrivals = sched.poisson(tm.arrival_rate_per_s * duration_s)
    centers = np.sort(sched.uniform(0.0, duration_us, n_arrivals))
    kept: list[float] = []
    prev_end = 0.0
    for tc in centers:
        t0, t1 = tc - half, tc + half + tail
        if t0 >= prev_end and t1 <= duration_us:
            kept.append(tc)
            prev_end = t1

    truths: list[TransitTruth] = []
    det_list: list[np.ndarray] = []
    time_list: list[np.ndarray] = []

    engine = None
    if kept:
        nbar = model.empty_cavity_nbar(p)
        engine = _TransitEngine(p, n_max or trajectory_truncation(nbar), step_us=step_us)

    windows: list[tuple[float, float]] = []
    for i, tc in enumerate(kept):
        rng_i = _rng(seed, 1, i)
        g_peak = rng_i.uniform(tm.g_peak_min, tm.g_peak_max)
        kx = rng_i.uniform(0.0, 2.0 * math.pi)
        truths.append(TransitTruth(t_center_us=float(tc), g_peak=float(g_peak), kx=float(kx)))
        t0, t1 = tc - half, tc + half + tail
        windows.append((t0, t1))
        kernel_seed = int(np.random.SeedSequence((seed, 1, i, 7)).generate_state(1)[0] & 0x7FFFFFFF)
        channels, times = engine.run_window(t0, t1, tc, g_peak, kx,
                                            tm.envelope_fwhm_us, kernel_seed)
        for chan, pair in ((_TransitEngine.JUMP_T, DETECTOR_PAIR_T),
                           (_TransitEngine.JUMP_R, DETECTOR_PAIR_R)):
            t_chan = times[channels == chan]
            keep = rng_i.random(t_chan.size) < dm.efficiency
            t_chan = t_chan[keep]
            first = rng_i.random(t_chan.size) < dm.split_ratio
            dets = np.where(first, pair[0], pair[1])
            det_list.append(dets)
            time_list.append(t_chan)

    # empty-cavity segments: exact Poisson output
    r_t, r_r = empty_output_rates(p)
    rates = {
        DETECTOR_PAIR_T[0]: r_t * dm.efficiency * dm.split_ratio,
        DETECTOR_PAIR_T[1]: r_t * dm.efficiency * (1.0 - dm.split_ratio),
        DETECTOR_PAIR_R[0]: r_r * dm.efficiency * dm.split_ratio,
        DETECTOR_PAIR_R[1]: r_r * dm.efficiency * (1.0 - dm.split_ratio),
    }
    edges = [0.0] + [t for w in windows for t in w] + [duration_us]
    segments = [(edges[i], edges[i + 1]) for i in range(0, len(edges), 2)]
    for s_idx, (t0, t1) in enumerate(segments):
        rng_s = _rng(seed, 2, s_idx)
        for det in (1, 2, 3, 4):
            ts = _poisson_times(rng_s, rates[det], t0, t1)
            det_list.append(np.full(ts.size, det))
            time_list.append(ts)

    # detector background over the full record
    bg_rate_us = dm.background_rate_per_s / 1e6
    for det in (1, 2, 3, 4):
        ts = _poisson_times(_rng(seed, 3, det), bg_rate_us, 0.0, duration_us)
        det_list.append(np.full(ts.size, det))
        time_list.append(ts)

    dets = np.concatenate(det_list) if det_list else np.empty(0, dtype=np.int64)
    times_us = np.concatenate(time_list) if time_list else np.empty(0)
    res = dm.timestamp_resolution_ns
    ts_ns = (np.round(times_us * 1000.0 / res) * res).astype(np.int64)
    order = np.lexsort((dets, ts_ns))
    return ClickRecord(
        detectors=dets[order].astype(np.int64),
        timestamps_ns=ts_ns[order],
        params=p,
        transit_model=tm,
        detector_model=dm,
        seed=seed,
        duration_s=duration_s,
        transits=truths,
    )


def inject_background(rec: ClickRecord, fraction: float, seed: int) -> ClickRecord:
    """Admix extra uncorrelated Poisson clicks on every detector at `fraction`
    of that detector's observed rate; metadata and the truth log carry over."""
    if fraction < 0:
        raise ConfigError("background fraction must be >= 0")
    rng = np.random.default_rng(np.random.SeedSequence((rec.seed, 9, seed)))
    det_list = [rec.detectors]
    time_list = [rec.timestamps_ns.astype(float) / 1000.0]
    for det in (1, 2, 3, 4):
        n_det = int((rec.detectors == det).sum())
        rate = fraction * n_det / rec.duration_us
        ts = _poisson_times(rng, rate, 0.0, rec.duration_us)
        det_list.append(np.full(ts.size, det))
        time_list.append(ts)
    dets = np.concatenate(det_list)
    times_us = np.concatenate(time_list)
    res = rec.detector_model.timestamp_resolution_ns
    ts_ns = (np.round(times_us * 1000.0 / res) * res).astype(np.int64)
    order = np.lexsort((dets, ts_ns))
    return ClickRecord(
        detectors=dets[order].astype(np.int64),
        timestamps_ns=ts_ns[order],
        params=rec.params,
        transit_model=rec.transit_model,
        detector_model=rec.detector_model,
        seed=rec.seed,
        duration_s=rec.duration_s,
        transits=list(rec.transits),
    )


# ---------------------------------------------------------------------------
# master-equation oracle for a single transit

def expected_transit_fluxes(
    p: SystemParams,
    g_peak: float,
    kx: float,
    fwhm_us: float,
    t_grid_us,
    n_max: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Master-equation transmitted and reflected output fluxes (per us) during
    one transit with the Gaussian envelope centered at t = 0.

    The time grid must start at or before the window edge (where the coupling
    is negligible); the cavity starts in its empty-cavity coherent state.
    """
    t_grid = np.asarray(t_grid_us, dtype=float)
    space = make_space(*(2 * [n_max or trajectory_truncation(model.empty_cavity_nbar(p))]))
    liouv0 = model.build_liouvillian(p, space, atom_present=False)
    a = hilbert.mode_annihilation(space, "a")
    b = hilbert.mode_annihilation(space, "b")
    sm = hilbert.atom_lowering(space)
    term = (np.exp(-1j * kx) * a + np.exp(+1j * kx) * b) @ sm.conj().T
    v = term + term.conj().T
    eye = sp.identity(space.total_dim, dtype=complex, format="csr")
    vs = sp.csr_matrix(v)
    lv = -1j * (sp.kron(vs, eye) - sp.kron(eye, vs.T))
    l0 = liouv0.matrix()
    g_ang = angular(g_peak)

    a_ss, b_ss = empty_cavity_amplitudes(p)
    psi0 = hilbert.coherent_ground_state(space, a_ss, b_ss)
    rho0 = np.outer(psi0, psi0.conj())

    def rhs(t, vvec):
        g = g_ang * math.exp(-4.0 * math.log(2.0) * t * t / fwhm_us**2)
        return l0 @ vvec + g * (lv @ vvec)

    sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), rho0.reshape(-1), t_eval=t_grid,
                    method="DOP853", rtol=1e-8, atol=1e-10)
    if not sol.success:
        raise SolverError(f"transit master equation failed: {sol.message}")

    o_t, o_r = model.output_flux_operators(p, space)
    odo_t = o_t.conj().T @ o_t
    odo_r = o_r.conj().T @ o_r
    n = space.total_dim
    i_t = np.empty(t_grid.size)
    i_r = np.empty(t_grid.size)
    for i in range(t_grid.size):
        rho = sol.y[:, i].reshape(n, n)
        i_t[i] = np.trace(odo_t @ rho).real
        i_r[i] = np.trace(odo_r @ rho).real
    return i_t, i_r


# ---------------------------------------------------------------------------
# record file I/O (text CSV with '#' metadata header)

_FORMAT_TAG = "photon-router click record v1"


def write_record(rec: ClickRecord, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {_FORMAT_TAG}\n")
        fh.write(f"# seed = {rec.seed}\n")
        fh.write(f"# duration_s = {rec.duration_s!r}\n")
        for key, value in rec.params.to_mapping().items():
            fh.write(f"# param.{key} = {value!r}\n")
        for f in fields(TransitModel):
            fh.write(f"# transit_model.{f.name} = {getattr(rec.transit_model, f.name)!r}\n")
        for f in fields(DetectorModel):
            fh.write(f"# detector_model.{f.name} = {getattr(rec.detector_model, f.name)!r}\n")
        for tr in rec.transits:
            fh.write(f"# transit = {tr.t_center_us!r} {tr.g_peak!r} {tr.kx!r}\n")
        fh.write("detector_id,timestamp_ns\n")
        for det, ts in zip(rec.detectors, rec.timestamps_ns):
            fh.write(f"{det},{ts}\n")


def read_record(path) -> ClickRecord:
    meta: dict[str, str] = {}
    transits: list[TransitTruth] = []
    dets: list[int] = []
    times: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    if not lines or lines[0].strip() != f"# {_FORMAT_TAG}":
        raise RecordFormatError("line 1: missing record format tag")
    header_seen = False
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("transit ="):
                parts = body.partition("=")[2].split()
                if len(parts) != 3:
                    raise RecordFormatError(f"line {lineno}: bad transit entry")
                transits.append(TransitTruth(float(parts[0]), float(parts[1]), float(parts[2])))
            elif "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            if line != "detector_id,timestamp_ns":
                raise RecordFormatError(f"line {lineno}: expected CSV header")
            header_seen = True
            continue
        try:
            d_str, t_str = line.split(",")
            dets.append(int(d_str))
            times.append(int(t_str))
        except ValueError as exc:
            raise RecordFormatError(f"line {lineno}: bad event line {line!r}") from exc

    def grab(prefix: str, cls):
        vals = {}
        for f in fields(cls):
            key = f"{prefix}.{f.name}"
            if key not in meta:
                raise RecordFormatError(f"missing metadata key {key}")
            vals[f.name] = float(meta[key])
        return vals

    try:
        params = SystemParams(**grab("param", SystemParams))
        tm = TransitModel(**grab("transit_model", TransitModel))
        dm = DetectorModel(**grab("detector_model", DetectorModel))
        seed = int(meta["seed"])
        duration_s = float(meta["duration_s"])
    except KeyError as exc:
        raise RecordFormatError(f"missing metadata key {exc}") from exc

    ts_arr = np.asarray(times, dtype=np.int64)
    if np.any(np.diff(ts_arr) < 0):
        bad = int(np.argmax(np.diff(ts_arr) < 0)) + 1
        raise RecordFormatError(f"timestamp order violation at event {bad + 1}")
    return ClickRecord(
        detectors=np.asarray(dets, dtype=np.int64),
        timestamps_ns=ts_arr,
        params=params,
        transit_model=tm,
        detector_model=dm,
        seed=seed,
        duration_s=duration_s,
        transits=transits,
    )
