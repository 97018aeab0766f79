"""Atom-toroid-taper physics: parameter derivations, Liouvillian assembly,
steady-state spectra, regression correlations, the analytic overcoupled
limit, the adiabatically-eliminated Bloch model, and saturation sweeps.

Model conventions (validated against the known operating-point numbers, not
against a printed Hamiltonian):

* rotating frame at the probe frequency;
* H = -delta_cp (a'a + b'b) - delta_ap s+s- + h (a'b + b'a)
      + g [exp(-i kx) a + exp(+i kx) b] s+ + h.c. + i E_p (a' - a);
* collapse operators sqrt(2 kappa_ex) a, sqrt(2 kappa_ex) b,
  sqrt(2 kappa_i) a, sqrt(2 kappa_i) b, sqrt(gamma) s-  (kappa is the field
  amplitude decay rate; gamma the atomic population decay rate);
* input-output: a_out = sqrt(2 kappa_ex) a - alpha_in with
  alpha_in = E_p / sqrt(2 kappa_ex), b_out = sqrt(2 kappa_ex) b.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import hilbert, lindblad
from .errors import ResourceLimitError, SolverError
from .hilbert import HilbertSpace, make_space
from .lindblad import Liouvillian, expectation, regression_g2, steady_state
from .params import SystemParams, angular

TRUNCATION_POP_TOL = 1e-8
WEAK_DRIVE_NBAR_WARN = 0.05
NORMALIZATION_DETUNING_KAPPAS = 50.0


# ---------------------------------------------------------------------------
# parameter derivations

def cooperativity(p: SystemParams) -> float:
    """Single-atom cooperativity 2 g^2 kappa / (gamma (kappa^2 + h^2))."""
    if p.gamma <= 0 or p.kappa <= 0:
        raise ZeroDivisionError("cooperativity requires gamma > 0 and kappa > 0")
    return 2.0 * p.g_tw**2 * p.kappa / (p.gamma * (p.kappa**2 + p.h**2))


def enhanced_decay(p: SystemParams) -> float:
    """Cavity-enhanced atomic population decay rate gamma (1 + 2C), in MHz."""
    return p.gamma * (1.0 + 2.0 * cooperativity(p))


def input_flux(p: SystemParams) -> float:
    """Incident photon flux |alpha_in|^2 = E_p^2 / (2 kappa_ex), photons/us."""
    ep = angular(p.drive_ep)
    return ep**2 / (2.0 * angular(p.kappa_ex))


def empty_cavity_nbar(p: SystemParams) -> float:
    """Resonant empty-cavity <a'a> at the configured drive (coherent-state value)."""
    if p.drive_ep == 0:
        return 0.0
    return (p.drive_ep * p.kappa / (p.kappa**2 + p.h**2)) ** 2


def calibrate_drive(p: SystemParams, nbar_target: float) -> float:
    """Drive amplitude E_p (MHz) giving the requested resonant empty-cavity <a'a>."""
    if nbar_target < 0:
        raise ValueError("nbar target must be >= 0")
    return math.sqrt(nbar_target) * (p.kappa**2 + p.h**2) / p.kappa


def default_truncation(nbar: float) -> int:
    if nbar < 1e-3:
        return 2
    return max(4, math.ceil(10.0 * nbar) + 4)


# ---------------------------------------------------------------------------
# Liouvillian construction

def build_hamiltonian(
    p: SystemParams,
    space: HilbertSpace,
    atom_present: bool = True,
    g_override_mhz: float | None = None,
    drive_scale: float = 1.0,
) -> np.ndarray:
    """Rotating-frame Hamiltonian in rad/us on the given space."""
    a = hilbert.mode_annihilation(space, "a")
    b = hilbert.mode_annihilation(space, "b")
    sm = hilbert.atom_lowering(space)
    sp_ = sm.conj().T

    dcp = angular(p.delta_cp)
    dap = angular(p.delta_ap)
    hh = angular(p.h)
    g = angular(p.g_tw if g_override_mhz is None else g_override_mhz)
    ep = angular(p.drive_ep) * drive_scale

    ham = -dcp * (a.conj().T @ a + b.conj().T @ b)
    ham = ham - dap * (sp_ @ sm)
    ham = ham + hh * (a.conj().T @ b + b.conj().T @ a)
    if atom_present and g != 0.0:
        coupling = g * (np.exp(-1j * p.kx) * a + np.exp(+1j * p.kx) * b) @ sp_
        ham = ham + coupling + coupling.conj().T
    ham = ham + 1j * ep * (a.conj().T - a)
    return ham


def collapse_operators(p: SystemParams, space: HilbertSpace) -> list[np.ndarray]:
    a = hilbert.mode_annihilation(space, "a")
    b = hilbert.mode_annihilation(space, "b")
    sm = hilbert.atom_lowering(space)
    kex = angular(p.kappa_ex)
    ki = angular(p.kappa_i)
    gam = angular(p.gamma)
    ops = [math.sqrt(2.0 * kex) * a, math.sqrt(2.0 * kex) * b]
    if ki > 0:
        ops += [math.sqrt(2.0 * ki) * a, math.sqrt(2.0 * ki) * b]
    if gam > 0:
        ops.append(math.sqrt(gam) * sm)
    return ops


def build_liouvillian(p: SystemParams, space: HilbertSpace, atom_present: bool = True) -> Liouvillian:
    """Full master-equation generator; the atom factor is kept (decoupled)
    when atom_present is false."""
    return Liouvillian(
        hamiltonian=build_hamiltonian(p, space, atom_present=atom_present),
        collapse_ops=collapse_operators(p, space),
    )


def output_flux_operators(p: SystemParams, space: HilbertSpace) -> tuple[np.ndarray, np.ndarray]:
    """Transmitted and reflected output operators; fluxes are <O'O>.

    The transmitted channel interferes the cavity leakage with the incident
    field, O_T = sqrt(2 kappa_ex) a - alpha_in, with alpha_in real in this
    phase convention; O_R = sqrt(2 kappa_ex) b.
    """
    a = hilbert.mode_annihilation(space, "a")
    b = hilbert.mode_annihilation(space, "b")
    kex = angular(p.kappa_ex)
    alpha_in = angular(p.drive_ep) / math.sqrt(2.0 * kex)
    o_t = math.sqrt(2.0 * kex) * a - alpha_in * hilbert.identity(space)
    o_r = math.sqrt(2.0 * kex) * b
    return o_t, o_r


def output_fluxes(p: SystemParams, space: HilbertSpace, rho: np.ndarray) -> tuple[float, float]:
    o_t, o_r = output_flux_operators(p, space)
    i_t = expectation(o_t.conj().T @ o_t, rho).real
    i_r = expectation(o_r.conj().T @ o_r, rho).real
    return i_t, i_r


def flux_balance_residual(p: SystemParams, space: HilbertSpace, rho: np.ndarray) -> float:
    """Relative defect of input = transmitted + reflected + intrinsic + atomic."""
    a = hilbert.mode_annihilation(space, "a")
    b = hilbert.mode_annihilation(space, "b")
    sm = hilbert.atom_lowering(space)
    i_t, i_r = output_fluxes(p, space, rho)
    ki = angular(p.kappa_i)
    gam = angular(p.gamma)
    n_ab = expectation(a.conj().T @ a + b.conj().T @ b, rho).real
    pe = expectation(sm.conj().T @ sm, rho).real
    p_in = input_flux(p)
    return abs(p_in - i_t - i_r - 2.0 * ki * n_ab - gam * pe) / max(p_in, 1e-300)


def solve_steady(
    p: SystemParams,
    atom_present: bool = True,
    n_start: int | None = None,
    max_doublings: int = 4,
) -> tuple[np.ndarray, HilbertSpace]:
    """Steady state with adaptive Fock truncation (top-level population < 1e-8)."""
    n = n_start if n_start is not None else default_truncation(empty_cavity_nbar(p))
    for _ in range(max_doublings + 1):
        space = make_space(n, n)
        rho = steady_state(build_liouvillian(p, space, atom_present=atom_present))
        if hilbert.highest_level_population(rho, space) < TRUNCATION_POP_TOL:
            return rho, space
        n *= 2
    raise ResourceLimitError(
        f"Fock truncation did not converge below population {TRUNCATION_POP_TOL}"
    )


# ---------------------------------------------------------------------------
# weak-drive linear oracle and analytic overcoupled limit

@dataclass(frozen=True)
class LinearResponse:
    """Weak-drive steady state with the atom replaced by a linear dipole."""

    t0: float
    r0: float
    a_amp: complex
    b_amp: complex
    sigma_amp: complex
    input_amp: float


def linear_response(p: SystemParams, atom_present: bool = True) -> LinearResponse:
    """Closed linear solve for <a>, <b>, <sigma->; exact as drive -> 0."""
    kap = angular(p.kappa)
    dcp = angular(p.delta_cp)
    dap = angular(p.delta_ap)
    hh = angular(p.h)
    g = angular(p.g_tw)
    gam = angular(p.gamma)
    ep = angular(p.drive_ep) if p.drive_ep != 0 else 1.0  # T0/R0 are drive-independent
    kex = angular(p.kappa_ex)

    if atom_present:
        mat = np.array(
            [
                [kap - 1j * dcp, 1j * hh, 1j * g * np.exp(+1j * p.kx)],
                [1j * hh, kap - 1j * dcp, 1j * g * np.exp(-1j * p.kx)],
                [1j * g * np.exp(-1j * p.kx), 1j * g * np.exp(+1j * p.kx), gam / 2.0 - 1j * dap],
            ],
            dtype=complex,
        )
        rhs = np.array([ep, 0.0, 0.0], dtype=complex)
    else:
        mat = np.array(
            [[kap - 1j * dcp, 1j * hh], [1j * hh, kap - 1j * dcp]], dtype=complex
        )
        rhs = np.array([ep, 0.0], dtype=complex)

    if abs(np.linalg.det(mat)) < 1e-30 * np.abs(mat).max() ** mat.shape[0]:
        raise SolverError("linear steady-state system is singular")
    sol = np.linalg.solve(mat, rhs)
    a_amp, b_amp = sol[0], sol[1]
    s_amp = sol[2] if atom_present else 0.0j

    alpha_in = ep / math.sqrt(2.0 * kex)
    t_amp = math.sqrt(2.0 * kex) * a_amp - alpha_in
    t0 = abs(t_amp) ** 2 / alpha_in**2
    r0 = 2.0 * kex * abs(b_amp) ** 2 / alpha_in**2
    return LinearResponse(t0, r0, a_amp, b_amp, s_amp, alpha_in)


def analytic_overcoupled(c: float) -> tuple[float, float, float, float]:
    """Ideal overcoupled-limit (T0, R0, g2_T(0), g2_R(0)) as functions of C."""
    if c < 0:
        raise ValueError("cooperativity must be >= 0")
    t0 = 1.0 / (2.0 * c + 1.0) ** 2
    r0 = (2.0 * c / (2.0 * c + 1.0)) ** 2
    g2t0 = (4.0 * c**2 - 1.0) ** 2
    return t0, r0, g2t0, 0.0


# ---------------------------------------------------------------------------
# spectra and correlation curves from the full model

@dataclass
class SpectraResult:
    detunings: np.ndarray  # MHz
    transmission: np.ndarray
    reflection: np.ndarray
    normalization: float  # far-detuned transmitted flux, photons/us
    atom_present: bool
    params: SystemParams


def _far_detuned_flux(p: SystemParams, atom_present: bool) -> float:
    delta_norm = NORMALIZATION_DETUNING_KAPPAS * p.kappa
    pn = p.with_(delta_ap=delta_norm + p.delta_ac)
    rho, space = solve_steady(pn, atom_present=atom_present)
    i_t, _ = output_fluxes(pn, space, rho)
    return i_t


def spectra(p: SystemParams, delta_grid, atom_present: bool = True) -> SpectraResult:
    """Normalized T(Delta), R(Delta) from the full steady-state solver."""
    nbar = empty_cavity_nbar(p)
    if nbar > WEAK_DRIVE_NBAR_WARN:
        warnings.warn(
            f"empty-cavity nbar = {nbar:.3g} exceeds the weak-driving guideline "
            f"{WEAK_DRIVE_NBAR_WARN}", stacklevel=2,
        )
    delta_grid = np.asarray(delta_grid, dtype=float)
    norm = _far_detuned_flux(p, atom_present)
    ts, rs = [], []
    for delta in delta_grid:
        pd = p.with_(delta_ap=delta + p.delta_ac)
        rho, space = solve_steady(pd, atom_present=atom_present)
        i_t, i_r = output_fluxes(pd, space, rho)
        ts.append(i_t / norm)
        rs.append(i_r / norm)
    return SpectraResult(
        detunings=delta_grid,
        transmission=np.array(ts),
        reflection=np.array(rs),
        normalization=norm,
        atom_present=atom_present,
        params=p,
    )


@dataclass
class ModelCorrelation:
    taus: np.ndarray  # us
    g2: np.ndarray
    which: str
    flux: float  # photons/us


def g2_curves(p: SystemParams, taus_us, which: str, atom_present: bool = True) -> ModelCorrelation:
    """Quantum-regression g2(tau) for the transmitted ('T') or reflected ('R')
    output; relaxes to 1 on the enhanced-decay timescale."""
    which = which.upper()
    if which not in ("T", "R"):
        raise ValueError("which must be 'T' or 'R'")
    rho, space = solve_steady(p, atom_present=atom_present)
    liouv = build_liouvillian(p, space, atom_present=atom_present)
    o_t, o_r = output_flux_operators(p, space)
    op = o_t if which == "T" else o_r
    flux = expectation(op.conj().T @ op, rho).real
    taus = np.asarray(taus_us, dtype=float)
    vals = regression_g2(liouv, rho, op, taus)
    return ModelCorrelation(taus=taus, g2=vals, which=which, flux=flux)


# ---------------------------------------------------------------------------
# adiabatic elimination of the cavity modes

@dataclass(frozen=True)
class EffectiveModel:
    """Two-level Bloch model obtained by eliminating the cavity modes.

    gamma_enhanced and detuning_eff are in MHz; drive and the output
    coefficients are in angular units (rad/us and sqrt(1/us) amplitudes).
    """

    gamma_enhanced: float  # MHz, population decay
    cooperativity: float
    detuning_eff: float  # MHz, includes the h-induced light shift
    effective_drive: complex  # rad/us, coefficient of sigma_+ in H
    c0_t: complex
    c1_t: complex
    c0_r: complex
    c1_r: complex
    input_flux: float  # photons/us


def effective_model(p: SystemParams) -> EffectiveModel:
    """Eliminate a, b (set their time derivatives to zero) and express the
    dynamics and outputs through sigma_- alone."""
    if p.kappa < 3.0 * max(p.g_tw, p.gamma):
        warnings.warn(
            "adiabatic elimination marginal: kappa < 3 max(g_tw, gamma)", stacklevel=2
        )
    kap = angular(p.kappa)
    kex = angular(p.kappa_ex)
    dcp = angular(p.delta_cp)
    dap = angular(p.delta_ap)
    hh = angular(p.h)
    g = angular(p.g_tw)
    gam = angular(p.gamma)
    ep = angular(p.drive_ep)

    d = kap - 1j * dcp
    det = d * d + hh * hh
    if abs(det) < 1e-30 * max(kap, abs(dcp), hh, 1.0) ** 2:
        raise SolverError("elimination system singular (D^2 + h^2 = 0)")

    z = 1j * dap - gam / 2.0 - (2.0 * g**2 * d - 2j * hh * g**2 * np.cos(2.0 * p.kx)) / det
    gamma_eff = -2.0 * z.real
    delta_eff = z.imag

    omega_sigma = -1j * g * ep * (d * np.exp(-1j * p.kx) - 1j * hh * np.exp(+1j * p.kx)) / det
    omega_h = 1j * omega_sigma  # coefficient of sigma_+ in the effective Hamiltonian

    alpha_in = ep / math.sqrt(2.0 * kex) if kex > 0 else 0.0
    sq = math.sqrt(2.0 * kex)
    c0_t = sq * d * ep / det - alpha_in
    c1_t = -sq * g * (1j * d * np.exp(+1j * p.kx) + hh * np.exp(-1j * p.kx)) / det
    c0_r = -1j * sq * hh * ep / det
    c1_r = -sq * g * (1j * d * np.exp(-1j * p.kx) + hh * np.exp(+1j * p.kx)) / det

    return EffectiveModel(
        gamma_enhanced=gamma_eff / angular(1.0),
        cooperativity=cooperativity(p),
        detuning_eff=delta_eff / angular(1.0),
        effective_drive=omega_h,
        c0_t=c0_t,
        c1_t=c1_t,
        c0_r=c0_r,
        c1_r=c1_r,
        input_flux=ep**2 / (2.0 * kex) if kex > 0 else 0.0,
    )


_SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


def effective_liouvillian(em: EffectiveModel) -> Liouvillian:
    sm = _SIGMA_MINUS
    sp_ = sm.conj().T
    ham = -angular(em.detuning_eff) * (sp_ @ sm) \
        + em.effective_drive * sp_ + np.conj(em.effective_drive) * sm
    return Liouvillian(ham, [math.sqrt(angular(em.gamma_enhanced)) * sm])


@dataclass(frozen=True)
class EffectiveObservables:
    i_t: float
    i_r: float
    g2_t0: float
    g2_r0: float
    num_t: float  # <O' O' O O> numerators, for flux-weighted averaging
    num_r: float


def effective_observables(em: EffectiveModel) -> EffectiveObservables:
    """Steady-state output fluxes and zero-delay correlations of the Bloch model."""
    rho = steady_state(effective_liouvillian(em))
    eye = np.eye(2, dtype=complex)

    def channel(c0: complex, c1: complex) -> tuple[float, float]:
        op = c0 * eye + c1 * _SIGMA_MINUS
        odo = op.conj().T @ op
        flux = expectation(odo, rho).real
        num = np.trace(odo @ (op @ rho @ op.conj().T)).real
        return flux, num

    i_t, num_t = channel(em.c0_t, em.c1_t)
    i_r, num_r = channel(em.c0_r, em.c1_r)
    g2_t0 = num_t / i_t**2 if i_t > 0 else float("nan")
    g2_r0 = num_r / i_r**2 if i_r > 0 else float("nan")
    return EffectiveObservables(i_t, i_r, g2_t0, g2_r0, num_t, num_r)


def effective_g2_closed_form(taus_us, gamma_enhanced_mhz: float) -> np.ndarray:
    """Weak-drive reflected correlation (1 - exp(-Gamma tau / 2))^2."""
    taus = np.asarray(taus_us, dtype=float)
    return (1.0 - np.exp(-angular(gamma_enhanced_mhz) * taus / 2.0)) ** 2


# ---------------------------------------------------------------------------
# saturation sweep, averaging, and routing efficiency

DEFAULT_G_RANGE = (35.0, 65.0)


def with_background(g2: float, fraction: float) -> float:
    """Zero-delay g2 after admixing independent Poisson background counts at
    `fraction` of the signal flux."""
    return (g2 + 2.0 * fraction + fraction**2) / (1.0 + fraction) ** 2


@dataclass(frozen=True)
class SaturationRow:
    nbar: float
    t0: float
    g2_r0: float
    xi: float
    g2_t0: float


def saturation_curve(
    p: SystemParams,
    nbar_list,
    g_range: tuple[float, float] = DEFAULT_G_RANGE,
    kx_samples: int = 16,
    g_samples: int = 16,
    background_fraction: float = 0.0,
) -> list[SaturationRow]:
    """Drive sweep of the adiabatic model with uniform averaging over the
    coupling range and the azimuthal position; correlations are averaged
    flux-weighted (numerators and denominators separately)."""
    nbar_list = list(nbar_list)
    if not nbar_list:
        raise ValueError("nbar_list must be nonempty")
    g_min, g_max = g_range
    if g_min > g_max:
        raise ValueError("g_range must satisfy g_min <= g_max")
    gs = g_min + (np.arange(g_samples) + 0.5) * (g_max - g_min) / g_samples \
        if g_max > g_min else np.array([g_min])
    kxs = np.arange(kx_samples) * 2.0 * math.pi / kx_samples

    rows = []
    for nbar in nbar_list:
        ep = calibrate_drive(p, nbar)
        i_t = i_r = num_t = num_r = 0.0
        count = 0
        c0_t_flux = None
        p_in = None
        for g in gs:
            for kx in kxs:
                em = effective_model(p.with_(g_tw=float(g), kx=float(kx), drive_ep=ep))
                obs = effective_observables(em)
                i_t += obs.i_t
                i_r += obs.i_r
                num_t += obs.num_t
                num_r += obs.num_r
                count += 1
                c0_t_flux = abs(em.c0_t) ** 2
                p_in = em.input_flux
        i_t /= count
        i_r /= count
        num_t /= count
        num_r /= count
        g2_r0 = with_background(num_r / i_r**2 if i_r > 0 else float("nan"), background_fraction)
        g2_t0 = with_background(num_t / i_t**2 if i_t > 0 else float("nan"), background_fraction)
        t0 = i_t / c0_t_flux if c0_t_flux else float("nan")
        xi = i_r / p_in if p_in else float("nan")
        rows.append(SaturationRow(nbar=float(nbar), t0=t0, g2_r0=g2_r0, xi=xi, g2_t0=g2_t0))
    return rows


def routing_efficiency(
    p: SystemParams,
    nbar: float,
    g_range: tuple[float, float] = DEFAULT_G_RANGE,
    kx_samples: int = 16,
    g_samples: int = 16,
) -> float:
    """Single-photon throughput: on-resonance reflected flux over input flux,
    averaged like the saturation curves."""
    [row] = saturation_curve(p, [nbar], g_range=g_range, kx_samples=kx_samples,
                             g_samples=g_samples)
    return row.xi
