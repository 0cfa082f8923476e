"""Spectral decomposition of Hermitian matrices and the unitaries ``exp(-i H dt)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITICITY_TOL = 1e-10


@dataclass(frozen=True)
class Spectral:
    """Eigen-decomposition ``H = V diag(λ) V†`` with ascending ``λ``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T


def hermitian_eig(H: np.ndarray) -> Spectral:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    if np.max(np.abs(H - H.conj().T), initial=0.0) > HERMITICITY_TOL:
        raise ValueError("matrix is not Hermitian")
    w, V = np.linalg.eigh(H)
    return Spectral(w, V)


def propagator(s: Spectral, dt: float) -> np.ndarray:
    """``U = V diag(exp(-i λ dt)) V†`` (ħ = 1)."""
    if not np.isfinite(dt):
        raise ValueError(f"time step must be finite, got {dt}")
    V = s.eigenvectors
    return (V * np.exp(-1j * s.eigenvalues * dt)) @ V.conj().T


def evolve(U: np.ndarray, psi: np.ndarray) -> np.ndarray:
    if U.shape[1] != psi.shape[0]:
        raise ValueError(f"dimension mismatch: operator {U.shape} vs state {psi.shape}")
    return U @ psi


def evolve_spectral(s: Spectral, psi: np.ndarray, t: float) -> np.ndarray:
    """Apply ``exp(-i H t)`` without forming the full matrix."""
    V = s.eigenvectors
    return V @ (np.exp(-1j * s.eigenvalues * t) * (V.conj().T @ psi))
