"""Evolve → measure bath → reset, repeated ``n`` times over a total time ``T``.

After the reset the joint state is always ``ψ ⊗ φ0``, so one cycle acts on
the system alone through the maps

    K_m = (I ⊗ <φ_m|) exp(-i H dt) (I ⊗ |φ0>),        Σ_m K_m† K_m = I,

and a measurement record ``z = (m_1, ..., m_n)`` leaves the unnormalized
system state ``K_{m_n} ... K_{m_1} |ψ0>`` whose squared norm is its Born
probability. Enumeration and sampling both work on these maps; :func:`step`
keeps the literal joint-space composition for cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .hamiltonian import HamiltonianSet
from .propagator import Spectral, evolve, evolve_spectral, hermitian_eig, propagator
from .spin_hilbert import (
    ZERO_PROBABILITY,
    QubitPartition,
    attach_reset_bath,
    fidelity,
    measure_bath_distribution,
    zero_state,
)

DEFAULT_PRUNE_THRESHOLD = 1e-10
DEFAULT_MAX_BRANCHES = 2_000_000


class ResourceLimitError(RuntimeError):
    """Raised when exact enumeration would exceed the live-branch cap."""


class EnsembleKind(str, Enum):
    EXACT = "EXACT"
    SAMPLED = "SAMPLED"


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    T: float
    n: int
    partition: QubitPartition
    reset_state: np.ndarray | None = None
    initial_system: np.ndarray | None = None
    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD
    max_branches: int = DEFAULT_MAX_BRANCHES

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one measurement cycle, got n={self.n}")
        dt = self.T / self.n
        if not (np.isfinite(dt) and dt > 0):
            raise ValueError(f"time step T/n must be finite and positive, got {dt}")
        if self.prune_threshold < 0:
            raise ValueError("prune_threshold must be >= 0")
        for name, state, dim in (
            ("reset_state", self.reset_state, self.partition.dim_b),
            ("initial_system", self.initial_system, self.partition.dim_s),
        ):
            if state is None:
                continue
            if state.shape != (dim,):
                raise ValueError(f"{name} has length {state.shape[0]}, expected {dim}")
            if abs(np.linalg.norm(state) - 1) > 1e-10:
                raise ValueError(f"{name} must be normalized")

    @property
    def dt(self) -> float:
        return self.T / self.n

    @property
    def phi0(self) -> np.ndarray:
        return zero_state(self.partition.n_b) if self.reset_state is None else self.reset_state

    @property
    def psi0(self) -> np.ndarray:
        if self.initial_system is None:
            return zero_state(self.partition.n_s)
        return self.initial_system


@dataclass(frozen=True, eq=False)
class Trajectory:
    outcomes: tuple[int, ...]
    probability: float
    final_state: np.ndarray


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Measurement-induced system ensemble stored column-wise.

    ``states[i]`` is the normalized final system state of record
    ``records[i]`` with Born probability ``probabilities[i]``. For sampled
    ensembles the members are i.i.d. draws and the probabilities are only
    informational.
    """

    kind: EnsembleKind
    states: np.ndarray
    probabilities: np.ndarray
    records: np.ndarray
    truncated_mass: float = 0.0

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def members(self) -> list[Trajectory]:
        return [
            Trajectory(tuple(int(m) for m in rec), float(p), psi)
            for rec, p, psi in zip(self.records, self.probabilities, self.states)
        ]


def step(joint: np.ndarray, U: np.ndarray, cfg: ProtocolConfig) -> dict[int, tuple[float, np.ndarray]]:
    """One cycle on the joint state: evolve, measure the bath, reset it to ``φ0``."""
    evolved = evolve(U, joint)
    return {
        m: (p, attach_reset_bath(psi, cfg.partition, cfg.phi0))
        for m, (p, psi) in measure_bath_distribution(evolved, cfg.partition).items()
    }


def kraus_operators(U: np.ndarray, part: QubitPartition, phi0: np.ndarray) -> np.ndarray:
    """System maps ``K_m``, returned with shape ``(N_b, N_s, N_s)``."""
    U4 = U.reshape(part.dim_s, part.dim_b, part.dim_s, part.dim_b)
    return np.einsum("smtc,c->mst", U4, phi0)


def cycle_kraus(hs: HamiltonianSet, cfg: ProtocolConfig, spectral: Spectral | None = None) -> np.ndarray:
    spectral = spectral or hermitian_eig(hs.H)
    return kraus_operators(propagator(spectral, cfg.dt), cfg.partition, cfg.phi0)


def enumerate_ensemble(
    hs: HamiltonianSet, cfg: ProtocolConfig, spectral: Spectral | None = None
) -> Ensemble:
    """Exact ensemble over all measurement records, with probability pruning.

    The tree is expanded one level at a time over every live branch, so the
    final records come out in lexicographic order. A child is dropped (its
    probability added to ``truncated_mass``) when its absolute probability
    is below ``cfg.prune_threshold`` or its conditional probability is
    below the Born zero threshold.
    """
    part = cfg.partition
    kraus = cycle_kraus(hs, cfg, spectral)
    flat = kraus.reshape(part.dim_b * part.dim_s, part.dim_s)

    vecs = cfg.psi0[:, None].astype(complex)
    probs = np.ones(1)
    records = np.zeros((1, 0), dtype=np.int64)
    truncated = 0.0
    for _ in range(cfg.n):
        n_live = vecs.shape[1]
        cand = (flat @ vecs).reshape(part.dim_b, part.dim_s, n_live)
        p = np.sum(np.abs(cand) ** 2, axis=1).T  # (parent, outcome)
        keep = (p >= cfg.prune_threshold) & (p >= ZERO_PROBABILITY * probs[:, None])
        truncated += float(p[~keep].sum())
        parent, outcome = np.nonzero(keep)
        if parent.size > cfg.max_branches:
            raise ResourceLimitError(
                f"{parent.size} live branches exceed the cap of {cfg.max_branches}; "
                "raise prune_threshold or use sampling instead"
            )
        vecs = cand[outcome, :, parent].T
        probs = p[parent, outcome]
        records = np.column_stack([records[parent], outcome])

    states = (vecs / np.sqrt(probs)).T
    return Ensemble(EnsembleKind.EXACT, states, probs, records, truncated)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for trajectory ``index``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _sample_batch(kraus: np.ndarray, psi0: np.ndarray, uniforms: np.ndarray):
    """Run trajectories side by side; row ``i`` of ``uniforms`` drives trajectory ``i``."""
    n_b, n_s, _ = kraus.shape
    M, n = uniforms.shape
    flat = kraus.reshape(n_b * n_s, n_s)
    cols = np.arange(M)
    states = np.repeat(psi0[:, None].astype(complex), M, axis=1)
    records = np.empty((M, n), dtype=np.int64)
    log_p = np.zeros(M)
    for k in range(n):
        cand = (flat @ states).reshape(n_b, n_s, M)
        p = np.sum(np.abs(cand) ** 2, axis=1)
        p[p < ZERO_PROBABILITY] = 0.0
        cum = np.cumsum(p, axis=0)
        m = np.minimum(np.sum(cum <= uniforms[:, k] * cum[-1], axis=0), n_b - 1)
        chosen = p[m, cols]
        states = cand[m, :, cols].T / np.sqrt(chosen)
        records[:, k] = m
        log_p += np.log(chosen)
    return states.T, np.exp(log_p), records


def sample_trajectory(
    hs: HamiltonianSet,
    cfg: ProtocolConfig,
    rng: np.random.Generator,
    spectral: Spectral | None = None,
) -> Trajectory:
    kraus = cycle_kraus(hs, cfg, spectral)
    states, probs, records = _sample_batch(kraus, cfg.psi0, rng.random((1, cfg.n)))
    return Trajectory(tuple(int(m) for m in records[0]), float(probs[0]), states[0])


def sample_ensemble(
    hs: HamiltonianSet,
    cfg: ProtocolConfig,
    M: int,
    seed: int,
    spectral: Spectral | None = None,
) -> Ensemble:
    """``M`` i.i.d. trajectories; trajectory ``i`` uses ``trajectory_rng(seed, i)``."""
    if M < 2:
        raise ValueError(f"need at least 2 samples, got M={M}")
    kraus = cycle_kraus(hs, cfg, spectral)
    uniforms = np.stack([trajectory_rng(seed, i).random(cfg.n) for i in range(M)])
    states, probs, records = _sample_batch(kraus, cfg.psi0, uniforms)
    return Ensemble(EnsembleKind.SAMPLED, states, probs, records)


def average_state(hs: HamiltonianSet, cfg: ProtocolConfig, spectral: Spectral | None = None) -> np.ndarray:
    """Probability-weighted mixture ``Σ_z p_z |ψ_z><ψ_z|`` of the exact ensemble.

    Obtained by iterating the channel ``ρ -> Σ_m K_m ρ K_m†`` ``n`` times,
    which costs ``O(n N_b N_s^3)`` regardless of how many records exist.
    """
    kraus = cycle_kraus(hs, cfg, spectral)
    rho = np.outer(cfg.psi0, cfg.psi0.conj())
    for _ in range(cfg.n):
        rho = np.einsum("mst,tu,mvu->sv", kraus, rho, kraus.conj(), optimize=True)
    return rho


def unmonitored_state(hs: HamiltonianSet, cfg: ProtocolConfig, spectral: Spectral | None = None) -> np.ndarray:
    """Joint state after the ``n`` evolution segments with measurement and reset skipped."""
    spectral = spectral or hermitian_eig(hs.H)
    U = propagator(spectral, cfg.dt)
    psi = attach_reset_bath(cfg.psi0, cfg.partition, cfg.phi0)
    for _ in range(cfg.n):
        psi = evolve(U, psi)
    return psi


@dataclass(frozen=True, eq=False)
class RevivalCurve:
    times: np.ndarray
    fidelity: np.ndarray
    first_revival_time: float | None = field(default=None)

    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.fidelity.tolist()))


def first_revival(times: np.ndarray, values: np.ndarray) -> float | None:
    """Time of the first strict local maximum that follows the first strict local minimum."""
    seen_min = False
    for i in range(1, len(values) - 1):
        if not seen_min and values[i - 1] > values[i] < values[i + 1]:
            seen_min = True
        elif seen_min and values[i - 1] < values[i] > values[i + 1]:
            return float(times[i])
    return None


def revival_curve(
    hs: HamiltonianSet,
    psi0: np.ndarray,
    times,
    spectral: Spectral | None = None,
) -> RevivalCurve:
    """Return-probability ``ξ(t) = |<ψ0|exp(-iHt)|ψ0>|²`` on a time grid."""
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise ValueError("need at least 3 grid points")
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("psi0 must be normalized")
    spectral = spectral or hermitian_eig(hs.H)
    # dividing by <ψ0|ψ0>² and skipping the propagator at t = 0 makes ξ(0) exactly 1
    norm2 = np.vdot(psi0, psi0).real ** 2
    xi = np.array([
        fidelity(psi0, psi0 if t == 0 else evolve_spectral(spectral, psi0, t)) / norm2
        for t in times
    ])
    return RevivalCurve(times, xi, first_revival(times, xi))
