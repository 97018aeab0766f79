"""Generic Lindblad machinery: superoperator assembly, steady states,
time propagation, and two-time correlations via the regression theorem.

Density matrices are plain complex ndarrays.  Vectorization is row-major,
vec(rho) = rho.reshape(-1), so vec(A rho B) = kron(A, B.T) @ vec(rho).
All rates are angular (rad per time unit); collapse operators carry their
rate as a sqrt(rate) prefactor.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .errors import DegenerateFluxError, SolverError

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
NEGATIVITY_TOL = 1e-8
RESIDUAL_TOL = 1e-10


@dataclass
class Liouvillian:
    """Hamiltonian plus collapse operators (each pre-scaled by sqrt(rate))."""

    hamiltonian: np.ndarray
    collapse_ops: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        h = np.asarray(self.hamiltonian, dtype=complex)
        scale = max(1.0, float(np.abs(h).max()))
        if np.abs(h - h.conj().T).max() > HERMITICITY_TOL * scale:
            raise ValueError("Hamiltonian is not Hermitian")
        self.hamiltonian = h
        self.collapse_ops = [np.asarray(c, dtype=complex) for c in self.collapse_ops]
        self._matrix: sp.csr_matrix | None = None

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def matrix(self) -> sp.csr_matrix:
        """Sparse superoperator acting on vec(rho) (row-major)."""
        if self._matrix is None:
            n = self.dim
            eye = sp.identity(n, dtype=complex, format="csr")
            h = sp.csr_matrix(self.hamiltonian)
            lm = -1j * (sp.kron(h, eye) - sp.kron(eye, h.T))
            for c in self.collapse_ops:
                cs = sp.csr_matrix(c)
                cdc = sp.csr_matrix(c.conj().T @ c)
                lm = lm + sp.kron(cs, cs.conjugate()) \
                    - 0.5 * (sp.kron(cdc, eye) + sp.kron(eye, cdc.T))
            self._matrix = lm.tocsr()
        return self._matrix

    def apply(self, rho: np.ndarray) -> np.ndarray:
        n = self.dim
        return (self.matrix() @ rho.reshape(-1)).reshape(n, n)


def expectation(op: np.ndarray, rho: np.ndarray) -> complex:
    return complex(np.trace(op @ rho))


def validate_density_matrix(rho: np.ndarray) -> None:
    """Hermiticity / unit-trace / positivity checks with the standard tolerances."""
    if np.abs(rho - rho.conj().T).max() > HERMITICITY_TOL:
        raise SolverError("density matrix not Hermitian within 1e-12")
    if abs(np.trace(rho).real - 1.0) > TRACE_TOL or abs(np.trace(rho).imag) > TRACE_TOL:
        raise SolverError("density matrix trace differs from 1 beyond 1e-10")
    w = np.linalg.eigvalsh(rho)
    if w.min() < -NEGATIVITY_TOL:
        raise SolverError(f"density matrix has eigenvalue {w.min():.3e} < -1e-8")


def steady_state(liouv: Liouvillian) -> np.ndarray:
    """Steady state by direct sparse solve of L vec(rho) = 0 with the trace
    constraint replacing the first row."""
    if not liouv.collapse_ops:
        raise ValueError("steady state requires at least one collapse operator")
    n = liouv.dim
    lm = liouv.matrix()

    a = lm.tolil(copy=True)
    trace_row = np.zeros(n * n)
    trace_row[:: n + 1] = 1.0  # diagonal entries of rho in row-major vec
    a[0, :] = trace_row
    a = a.tocsc()
    b = np.zeros(n * n, dtype=complex)
    b[0] = 1.0

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            v = spla.spsolve(a, b)
        except RuntimeError as exc:  # pragma: no cover - umfpack failure path
            raise SolverError(f"steady-state solve failed: {exc}") from exc
    if any("singular" in str(w.message).lower() for w in caught) or not np.all(np.isfinite(v)):
        cond = spla.onenormest(a)
        raise SolverError(
            f"steady-state system singular or ill-conditioned (1-norm estimate {cond:.3e})"
        )

    rho = v.reshape(n, n)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real

    residual = np.linalg.norm(lm @ rho.reshape(-1))
    lnorm = spla.norm(lm)
    if residual > RESIDUAL_TOL * max(lnorm, 1.0):
        raise SolverError(
            f"steady-state residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e} * |L| = "
            f"{RESIDUAL_TOL * lnorm:.3e}"
        )
    validate_density_matrix(rho)
    return rho


def _propagate(liouv: Liouvillian, rho0: np.ndarray, t: float) -> np.ndarray:
    lm = liouv.matrix()
    sol = solve_ivp(
        lambda _t, v: lm @ v,
        (0.0, t),
        rho0.reshape(-1).astype(complex),
        method="DOP853",
        rtol=1e-10,
        atol=1e-12,
    )
    if not sol.success:
        raise SolverError(f"time propagation failed: {sol.message}")
    n = liouv.dim
    return sol.y[:, -1].reshape(n, n)


def evolve(liouv: Liouvillian, rho0: np.ndarray, t: float) -> np.ndarray:
    """rho(t) = exp(L t) rho0 by adaptive integration; trace preserved to 1e-8."""
    if t < 0:
        raise ValueError("evolution time must be >= 0")
    if t == 0:
        return np.array(rho0, dtype=complex, copy=True)
    tr0 = np.trace(rho0)
    rho = _propagate(liouv, np.asarray(rho0, dtype=complex), float(t))
    if abs(np.trace(rho) - tr0) > 1e-8 * max(1.0, abs(tr0)):
        raise SolverError("trace drifted by more than 1e-8 during evolution")
    return rho


def regression_g2(
    liouv: Liouvillian,
    rho_ss: np.ndarray,
    op: np.ndarray,
    taus: np.ndarray | list[float],
) -> np.ndarray:
    """g2(tau) = Tr[O'O exp(L tau)(O rho O')] / <O'O>^2 for tau >= 0.

    The conditioned matrix O rho_ss O' is propagated without renormalization.
    """
    taus = np.asarray(taus, dtype=float)
    if np.any(taus < 0):
        raise ValueError("correlation delays must be >= 0")
    odo = op.conj().T @ op
    flux = expectation(odo, rho_ss).real
    if flux < 1e-14:
        raise DegenerateFluxError(f"steady-state flux {flux:.3e} below 1e-14")

    order = np.argsort(taus)
    cond = op @ rho_ss @ op.conj().T
    out = np.empty_like(taus)
    t_prev = 0.0
    for idx in order:
        dt = taus[idx] - t_prev
        if dt > 0:
            cond = _propagate(liouv, cond, dt)
            t_prev = taus[idx]
        out[idx] = np.trace(odo @ cond).real / flux**2
    return out
