"""Closed-form predictions for measure-and-reset thermalization and the Zeno regime.

Haar-circuit decay of the frame potential, saturation and Zeno thresholds,
and the Hamiltonian constants ``c_H`` entering the large-``n`` bound
``F^(K) >~ exp(-c_H T^(α+1) / n^α)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .frame_potential import haar_frame_potential_dim
from .hamiltonian import (
    HamiltonianSet,
    UnsupportedClassificationError,
    bath_block,
    classify_alpha,
    partial_expectation,
)
from .propagator import evolve_spectral, hermitian_eig, propagator
from .spin_hilbert import attach_reset_bath, random_state

LN2 = math.log(2.0)


class UndefinedThresholdError(ValueError):
    """A measurement-count threshold does not exist because ``c_H = 0``."""


class Averaging(str, Enum):
    HAAR = "HAAR"
    MC = "MC"
    EVOLVED = "EVOLVED"


@dataclass(frozen=True)
class TheoryParams:
    n_s: int
    n_b: int
    r: float = 0.1
    alpha: int = 1
    c_H: float = 0.0
    K: int = 1

    def __post_init__(self):
        if self.n_s < 1 or self.n_b < 1:
            raise ValueError("need n_s >= 1 and n_b >= 1")
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.c_H < 0:
            raise ValueError("c_H must be non-negative")
        if self.alpha not in (1, 3):
            raise ValueError("alpha must be 1 or 3")

    @property
    def N_s(self) -> int:
        return 2**self.n_s

    @property
    def N_b(self) -> int:
        return 2**self.n_b


# ---------------------------------------------------------------- HDT decay


def q1(N_s: int, N_b: int) -> float:
    """Saturation value of the first frame potential for a finite bath."""
    return N_s**2 * (N_b + 1) / (N_s**2 * N_b + 1) * haar_frame_potential_dim(N_s, 1)


def f1_decay_ratio(N_s: int, N_b: int) -> float:
    return (N_s**2 - 1) * N_b / (N_s**2 * N_b**2 - 1)


def f1_decay_rate(N_s: int, N_b: int) -> float:
    """``ln`` of the per-measurement decay ratio (negative)."""
    return math.log(f1_decay_ratio(N_s, N_b))


def hdt_f1(N_s: int, N_b: int, n: float) -> float:
    if n < 0:
        raise ValueError("n must be >= 0")
    prefactor = (N_s - 1) * (N_s * N_b - 1) / (N_s**2 * N_b + 1)
    return q1(N_s, N_b) + prefactor * math.exp(n * f1_decay_rate(N_s, N_b))


def q_k(N_s: int, N_b: int, K: int) -> float:
    if K < 2:
        raise ValueError("the finite-bath factor q_K is defined for K >= 2")
    return (1 + (2**K - 1) / N_b) * haar_frame_potential_dim(N_s, K)


def _fk_decay(N_s: int, N_b: int, n: float) -> float:
    return math.exp(n * math.log(N_s**2 * N_b / (N_s**2 * N_b**2 - 1)))


def hdt_fk_bound(N_s: int, N_b: int, n: float, K: int) -> float:
    """Higher-order lower bound, as printed: ``(1-q_K) ratio^n - q_K``.

    This tends to ``-q_K`` for large ``n``; see :func:`hdt_fk_bound_plus`.
    """
    q = q_k(N_s, N_b, K)
    return (1 - q) * _fk_decay(N_s, N_b, n) - q


def hdt_fk_bound_plus(N_s: int, N_b: int, n: float, K: int) -> float:
    """Conjectured sign-corrected variant ``(1-q_K) ratio^n + q_K`` (saturates at ``q_K``)."""
    q = q_k(N_s, N_b, K)
    return (1 - q) * _fk_decay(N_s, N_b, n) + q


def n_sat(n_s: int, n_b: int, r: float = 0.1) -> float:
    if r <= 0:
        raise ValueError("r must be positive")
    return (n_s - math.log2(r)) / n_b


# ----------------------------------------------------------- Zeno constants


def _leak_operator(hs: HamiltonianSet) -> np.ndarray:
    """System operator ``A`` with ``<ψ|A|ψ> = ||(I⊗Q) H (ψ⊗φ0)||²``, ``Q = 1 - |φ0><φ0|``."""
    part = hs.partition
    phi0 = hs.phi0
    B = np.einsum(
        "sbtc,c->sbt", hs.H.reshape(part.dim_s, part.dim_b, part.dim_s, part.dim_b), phi0
    )
    on_phi0 = np.einsum("b,sbt->st", phi0.conj(), B)
    QB = B - on_phi0[:, None, :] * phi0[None, :, None]
    QB = QB.reshape(part.dim, part.dim_s)
    return QB.conj().T @ QB


def leak_rates(hs: HamiltonianSet, states: np.ndarray) -> np.ndarray:
    """``2 ||(I⊗Q) H (ψ⊗φ0)||²`` for each row ``ψ`` of ``states``."""
    A = _leak_operator(hs)
    return 2.0 * np.real(np.einsum("is,st,it->i", states.conj(), A, states))


def c_H_low(
    hs: HamiltonianSet,
    averaging: Averaging | str = Averaging.HAAR,
    *,
    samples: int = 10_000,
    seed: int = 0,
    T: float = 15.0,
    grid: int = 201,
    psi0: np.ndarray | None = None,
) -> float:
    """Zeno constant for ``α = 1``: twice the average leak rate out of ``φ0``.

    HAAR averages over Haar-random system states in closed form
    (``2 Tr A / N_s``), MC over ``samples`` random states, and EVOLVED over
    the mean-field trajectory ``exp(-i H_s0 t) ψ0`` on ``grid`` points of
    ``[0, T]``.
    """
    averaging = Averaging(averaging)
    part = hs.partition
    if averaging is Averaging.HAAR:
        return float(2.0 * np.real(np.trace(_leak_operator(hs))) / part.dim_s)
    if averaging is Averaging.MC:
        rng = np.random.default_rng(seed)
        states = np.stack([random_state(part.dim_s, rng) for _ in range(samples)])
        return float(np.mean(leak_rates(hs, states)))
    h_mf = partial_expectation(hs.H_s0, part, hs.phi0)
    spectral = hermitian_eig(h_mf)
    if psi0 is None:
        psi0 = np.zeros(part.dim_s, dtype=complex)
        psi0[0] = 1.0
    states = np.stack([evolve_spectral(spectral, psi0, t) for t in np.linspace(0.0, T, grid)])
    return float(np.mean(leak_rates(hs, states)))


def _scalar_block(op: np.ndarray) -> complex:
    """Scalar ``c`` of a system operator known to equal ``c I``."""
    return complex(np.trace(op) / op.shape[0])


def half_spreads(hs: HamiltonianSet) -> np.ndarray:
    """``μ_m``: half the eigenvalue spread of ``<φ_m|H_c0|φ_m>`` for every bath state."""
    part = hs.partition
    mu = np.empty(part.dim_b)
    for m in range(part.dim_b):
        w = np.linalg.eigvalsh(bath_block(hs.H_c0, part, m, m))
        mu[m] = (w[-1] - w[0]) / 2
    return mu


def bath_transition_amplitudes(hs: HamiltonianSet) -> np.ndarray:
    """``<φ_m|V|φ0>`` for every computational bath state ``m``."""
    part = hs.partition
    V4 = hs.V.reshape(part.dim_s, part.dim_b, part.dim_s, part.dim_b)
    blocks = np.einsum("smtc,c->mst", V4, hs.phi0)
    return np.array([_scalar_block(b) for b in blocks])


def c_H_high(hs: HamiltonianSet, K: int = 1) -> float:
    """Zeno constant for ``α = 3``: ``(K/2) Σ_m |<φ_m|V|φ0>|² μ_m²``."""
    if classify_alpha(hs) != 3:
        raise UnsupportedClassificationError(
            "H_c0 does not commute with the bath projectors; use c_H_low (alpha = 1)"
        )
    v = bath_transition_amplitudes(hs)
    mu = half_spreads(hs)
    return float(K / 2 * np.sum(np.abs(v) ** 2 * mu**2))


def zeno_constant(hs: HamiltonianSet, K: int = 1, averaging: Averaging | str = Averaging.HAAR) -> tuple[int, float]:
    """``(α, c_H)`` matched to the Hamiltonian's commutation structure."""
    alpha = classify_alpha(hs)
    if alpha == 3:
        return 3, c_H_high(hs, K)
    return 1, c_H_low(hs, averaging)


# -------------------------------------------------------------- thresholds


def zeno_bound(T: float, n: float, alpha: int, c_H: float) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.exp(-c_H * T ** (alpha + 1) / n**alpha)


def _require_positive(c_H: float) -> None:
    if c_H <= 0:
        raise UndefinedThresholdError("threshold undefined for c_H = 0 (no leakage out of the reset state)")


def n_zeno(T: float, n_s: int, alpha: int, c_H: float) -> float:
    _require_positive(c_H)
    return (c_H * T ** (alpha + 1) / (n_s * LN2)) ** (1 / alpha)


def t_threshold(n_s: int, n_b: int, r: float, alpha: int, c_H: float) -> float:
    """Minimum total time for saturation to set in before the Zeno regime."""
    _require_positive(c_H)
    lead = n_s - math.log2(r)
    if lead <= 0:
        return 0.0
    return (lead**alpha * n_s * LN2 / (n_b**alpha * c_H)) ** (1 / (alpha + 1))


def n_gamma(T: float, n_b: int, alpha: int, c_H: float) -> float:
    _require_positive(c_H)
    return T * (c_H / (n_b * LN2)) ** (1 / (alpha + 1))


# ------------------------------------------------------- derivation checks


@dataclass(frozen=True)
class DerivationReport:
    alpha: int
    c_H: float
    dts: np.ndarray
    trotter_err: np.ndarray
    pm_exact: np.ndarray
    pm_perturbative: np.ndarray
    trotter_exponent: float
    pm_exponent: float
    pm_relative_error: np.ndarray

    def rows(self) -> list[tuple[float, float, float, float]]:
        return list(
            zip(
                self.dts.tolist(),
                self.trotter_err.tolist(),
                self.pm_exact.tolist(),
                self.pm_perturbative.tolist(),
            )
        )


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def zeno_derivation_check(
    hs: HamiltonianSet,
    psi0: np.ndarray | None = None,
    K: int = 1,
    dts=(0.1, 0.05, 0.025),
) -> DerivationReport:
    """Compare short-step dynamics against the split-operator and perturbative forms.

    For each ``dt``: the spectral-norm distance between ``exp(-iH dt)`` and
    ``exp(-iH_c0 dt/2) exp(-i(H_s0+H_b) dt) exp(-iH_c0 dt/2)``, the exact
    probability of leaving the reset state, and its perturbative estimate.
    The estimate is the ``sin²`` form built from ``V`` and the bath
    energies when ``α = 3`` and ``dt² ||(I⊗Q) H (ψ⊗φ0)||²`` otherwise. The
    reset state is assumed to be a computational basis state.
    """
    part = hs.partition
    dts = np.asarray(dts, dtype=float)
    if psi0 is None:
        psi0 = np.zeros(part.dim_s, dtype=complex)
        psi0[0] = 1.0
    alpha, c_H = zeno_constant(hs, K)
    m0 = int(np.argmax(np.abs(hs.phi0)))
    others = [m for m in range(part.dim_b) if m != m0]

    full = hermitian_eig(hs.H)
    half = hermitian_eig(hs.H_c0)
    mid = hermitian_eig(hs.H_s0 + hs.H_b)
    joint0 = attach_reset_bath(psi0, part, hs.phi0)

    v = bath_transition_amplitudes(hs)
    energies = np.array([_scalar_block(bath_block(hs.H_bm, part, m, m)).real for m in range(part.dim_b)])
    leak = float(leak_rates(hs, psi0[None, :])[0]) / 2

    trotter, exact, pert = [], [], []
    for dt in dts:
        U = propagator(full, dt)
        Uh = propagator(half, dt / 2)
        split = Uh @ propagator(mid, dt) @ Uh
        trotter.append(np.linalg.norm(U - split, ord=2))
        blocks = (U @ joint0).reshape(part.dim_s, part.dim_b)
        exact.append(float(np.sum(np.abs(blocks[:, others]) ** 2)))
        if alpha == 3:
            total = 0.0
            for m in others:
                gap = energies[m0] - energies[m]
                if abs(gap) < 1e-12:
                    total += abs(v[m]) ** 2 * dt**2
                else:
                    total += 4 * abs(v[m] / gap) ** 2 * math.sin(gap * dt / 2) ** 2
            pert.append(total)
        else:
            pert.append(leak * dt**2)

    trotter, exact, pert = map(np.asarray, (trotter, exact, pert))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(exact - pert) / np.abs(exact)
    return DerivationReport(
        alpha=alpha,
        c_H=c_H,
        dts=dts,
        trotter_err=trotter,
        pm_exact=exact,
        pm_perturbative=pert,
        trotter_exponent=_loglog_slope(dts, trotter),
        pm_exponent=_loglog_slope(dts, exact),
        pm_relative_error=rel,
    )
