"""Frame potentials of pure-state ensembles.

``F^(K) = Σ_{z,z'} p_z p_z' |<ψ_z|ψ_z'>|^(2K)``. Exact ensembles are summed
directly; sampled ensembles use the unbiased pair U-statistic with a
delete-one jackknife error. Pair overlaps are computed once per block and
raised to every requested ``K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .protocol import Ensemble, EnsembleKind

BLOCK = 512


class Method(str, Enum):
    EXACT = "EXACT"
    PAIR_ESTIMATOR = "PAIR_ESTIMATOR"


@dataclass(frozen=True)
class FramePotentialEstimate:
    K: int
    value: float
    std_error: float
    method: Method
    M: int | None = None
    truncated_mass: float = 0.0

    @property
    def truncation_bound(self) -> float:
        """Half-width of the interval the pruned branches could shift the value by."""
        return 2.0 * self.truncated_mass


def _orders(K: int | Iterable[int]) -> list[int]:
    Ks = [K] if isinstance(K, (int, np.integer)) else list(K)
    if not Ks or any(k < 1 for k in Ks):
        raise ValueError(f"frame-potential orders must be >= 1, got {Ks}")
    return [int(k) for k in Ks]


def _overlap_blocks(states: np.ndarray):
    """Yield ``(row_slice, |<ψ_i|ψ_j>|^2)`` for row blocks of the Gram matrix."""
    for start in range(0, states.shape[0], BLOCK):
        rows = slice(start, min(start + BLOCK, states.shape[0]))
        g = states[rows].conj() @ states.T
        yield rows, np.minimum(g.real**2 + g.imag**2, 1.0)


def exact_frame_potentials(e: Ensemble, Ks: Sequence[int]) -> list[FramePotentialEstimate]:
    if e.kind is not EnsembleKind.EXACT:
        raise ValueError("exact_frame_potential needs an EXACT ensemble")
    if len(e) == 0:
        raise ValueError("ensemble is empty")
    Ks = _orders(Ks)
    p = e.probabilities
    totals = np.zeros(len(Ks))
    for rows, ov in _overlap_blocks(e.states):
        w = p[rows, None] * p[None, :]
        for i, k in enumerate(Ks):
            totals[i] += np.sum(w * ov**k)
    return [
        FramePotentialEstimate(k, float(v), 0.0, Method.EXACT, truncated_mass=e.truncated_mass)
        for k, v in zip(Ks, totals)
    ]


def exact_frame_potential(e: Ensemble, K: int) -> FramePotentialEstimate:
    return exact_frame_potentials(e, [K])[0]


def sampled_frame_potentials(e: Ensemble, Ks: Sequence[int]) -> list[FramePotentialEstimate]:
    """Pair U-statistic ``(1/(M(M-1))) Σ_{i≠j} |<ψ_i|ψ_j>|^(2K)`` with jackknife errors.

    Two independent draws coincide with probability ``Σ p_z^2``, so the
    off-diagonal pair average is unbiased for the full double sum including
    its ``z = z'`` terms.
    """
    M = len(e)
    if M < 2:
        raise ValueError(f"need at least 2 samples, got M={M}")
    Ks = _orders(Ks)
    # equal records give equal states: sum pairs over distinct records with multiplicities
    keys = e.records.reshape(M, -1)
    if keys.shape[1] == 0:
        keys = np.arange(M)[:, None]
    _, first, inverse, counts = np.unique(
        keys, axis=0, return_index=True, return_inverse=True, return_counts=True
    )
    inverse = inverse.reshape(-1)
    distinct = e.states[first]
    grouped = np.zeros((len(Ks), len(first)))
    for rows, ov in _overlap_blocks(distinct):
        idx = np.arange(rows.start, rows.stop)
        ov[idx - rows.start, idx] = 1.0
        for i, k in enumerate(Ks):
            grouped[i, rows] = (ov**k) @ counts
    # drop the self-pair; |<ψ|ψ>|^(2K) = 1
    row_sums = grouped[:, inverse] - 1.0

    out = []
    for i, k in enumerate(Ks):
        r = row_sums[i]
        total = r.sum()
        value = total / (M * (M - 1))
        if M > 2:
            loo = (total - 2.0 * r) / ((M - 1) * (M - 2))
            err = math.sqrt((M - 1) / M * np.sum((loo - loo.mean()) ** 2))
        else:
            err = math.nan
        out.append(FramePotentialEstimate(k, float(value), err, Method.PAIR_ESTIMATOR, M=M))
    return out


def sampled_frame_potential(e: Ensemble, K: int) -> FramePotentialEstimate:
    return sampled_frame_potentials(e, [K])[0]


def frame_potentials(e: Ensemble, Ks: Sequence[int]) -> list[FramePotentialEstimate]:
    if e.kind is EnsembleKind.EXACT:
        return exact_frame_potentials(e, Ks)
    return sampled_frame_potentials(e, Ks)


def purity_frame_potential(rho: np.ndarray) -> float:
    """First frame potential from the ensemble's average state: ``F^(1) = Tr ρ²``."""
    return float(np.sum(np.abs(rho) ** 2))


def haar_frame_potential(n_s: int, K: int) -> float:
    """``(N_s-1)! K! / (N_s+K-1)! = 1 / C(N_s+K-1, K)`` with ``N_s = 2**n_s``."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return haar_frame_potential_dim(2**n_s, K)


def haar_frame_potential_dim(N: int, K: int) -> float:
    # exact big-integer binomial; int/int division is correctly rounded
    return 1 / math.comb(N + K - 1, K)
