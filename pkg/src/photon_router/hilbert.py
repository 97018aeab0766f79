"""Truncated Hilbert space for two cavity modes and a two-level atom.

Basis ordering is fixed so that golden files stay stable: the Fock index of
mode a varies slowest, then mode b, then the atomic state (0 = ground,
1 = excited) fastest.  A full-space operator is therefore assembled as
``kron(op_a, kron(op_b, op_atom))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError

DEFAULT_DIM_CAP = 20_000

ATOM_GROUND = 0
ATOM_EXCITED = 1


@dataclass(frozen=True)
class HilbertSpace:
    """Truncated space (mode a) x (mode b) x (two-level atom).

    n_max_a / n_max_b are the highest retained Fock levels, so each mode
    carries n_max + 1 basis states.
    """

    n_max_a: int
    n_max_b: int
    atom_dim: int = 2

    @property
    def dim_a(self) -> int:
        return self.n_max_a + 1

    @property
    def dim_b(self) -> int:
        return self.n_max_b + 1

    @property
    def total_dim(self) -> int:
        return self.dim_a * self.dim_b * self.atom_dim

    def index(self, n_a: int, n_b: int, s: int) -> int:
        """Basis index of |n_a, n_b, s>; mode a slowest, atom fastest."""
        if not (0 <= n_a <= self.n_max_a and 0 <= n_b <= self.n_max_b and 0 <= s < self.atom_dim):
            raise IndexError(f"basis label ({n_a}, {n_b}, {s}) outside truncation")
        return (n_a * self.dim_b + n_b) * self.atom_dim + s


def make_space(n_max_a: int, n_max_b: int, dim_cap: int = DEFAULT_DIM_CAP) -> HilbertSpace:
    if n_max_a < 1 or n_max_b < 1:
        raise ValueError("Fock truncations must be >= 1")
    space = HilbertSpace(int(n_max_a), int(n_max_b))
    if space.total_dim > dim_cap:
        raise ResourceLimitError(
            f"total dimension {space.total_dim} exceeds cap {dim_cap}"
        )
    return space


def _destroy(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def identity(space: HilbertSpace) -> np.ndarray:
    return np.eye(space.total_dim, dtype=complex)


def mode_annihilation(space: HilbertSpace, which: str) -> np.ndarray:
    """Annihilation operator of mode 'a' or 'b' embedded on the full space."""
    which = which.lower()
    if which == "a":
        return np.kron(_destroy(space.dim_a), np.eye(space.dim_b * space.atom_dim, dtype=complex))
    if which == "b":
        return np.kron(
            np.eye(space.dim_a, dtype=complex),
            np.kron(_destroy(space.dim_b), np.eye(space.atom_dim, dtype=complex)),
        )
    raise ValueError("mode must be 'a' or 'b'")


def atom_lowering(space: HilbertSpace) -> np.ndarray:
    """sigma_minus = |g><e| embedded on the full space."""
    sm = np.zeros((space.atom_dim, space.atom_dim), dtype=complex)
    sm[ATOM_GROUND, ATOM_EXCITED] = 1.0
    return np.kron(np.eye(space.dim_a * space.dim_b, dtype=complex), sm)


def basis_state(space: HilbertSpace, n_a: int, n_b: int, s: int) -> np.ndarray:
    psi = np.zeros(space.total_dim, dtype=complex)
    psi[space.index(n_a, n_b, s)] = 1.0
    return psi


def coherent_ground_state(space: HilbertSpace, alpha_a: complex, alpha_b: complex) -> np.ndarray:
    """Normalized |alpha_a> x |alpha_b> x |g> truncated to the space."""

    def coh(alpha: complex, dim: int) -> np.ndarray:
        v = np.zeros(dim, dtype=complex)
        v[0] = 1.0
        for n in range(1, dim):
            v[n] = v[n - 1] * alpha / np.sqrt(n)
        return v / np.linalg.norm(v)

    atom = np.zeros(space.atom_dim, dtype=complex)
    atom[ATOM_GROUND] = 1.0
    return np.kron(coh(alpha_a, space.dim_a), np.kron(coh(alpha_b, space.dim_b), atom))


def mode_level_populations(rho: np.ndarray, space: HilbertSpace, which: str) -> np.ndarray:
    """Marginal Fock-level populations of one mode from a density matrix."""
    p = np.real(np.diag(rho)).reshape(space.dim_a, space.dim_b, space.atom_dim)
    if which.lower() == "a":
        return p.sum(axis=(1, 2))
    if which.lower() == "b":
        return p.sum(axis=(0, 2))
    raise ValueError("mode must be 'a' or 'b'")


def highest_level_population(rho: np.ndarray, space: HilbertSpace) -> float:
    """Largest population found in the top retained Fock level of either mode."""
    pa = mode_level_populations(rho, space, "a")[-1]
    pb = mode_level_populations(rho, space, "b")[-1]
    return float(max(pa, pb))
