"""Open-chain Ising Hamiltonians and their system/bath/coupling decomposition.

Three variants are supported::

    ISING = J_x Σ X_j + J_z Σ Z_j + J_zz Σ Z_j Z_{j+1}
    YY    = ISING + J_yy Σ Y_j Y_{j+1}
    XXX   = ISING + J_xxx Σ X_{j-1} X_j X_{j+1}

Every term is assigned to ``H_s``, ``H_b`` or ``H_c`` according to whether
its support lies in the system, in the bath, or straddles the cut between
site ``n_s - 1`` and site ``n_s``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .spin_hilbert import PauliString, QubitPartition, pauli_matrix, zero_state

ALPHA_TOL = 1e-12


class Variant(str, Enum):
    ISING = "ISING"
    YY = "YY"
    XXX = "XXX"


class UnsupportedClassificationError(ValueError):
    """Raised when a property is asked of a Hamiltonian it is not defined for."""


@dataclass(frozen=True)
class CouplingSpec:
    n_s: int
    n_b: int
    J_x: float = 1.05
    J_z: float = -0.5
    J_zz: float = 1.0
    J_yy: float = 0.5
    J_xxx: float = 0.5
    variant: Variant = Variant.ISING

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.n_s < 1 or self.n_b < 1:
            raise ValueError(f"need n_s >= 1 and n_b >= 1, got ({self.n_s}, {self.n_b})")

    @property
    def partition(self) -> QubitPartition:
        return QubitPartition(self.n_s, self.n_b)

    def scaled(self, factor: float) -> "CouplingSpec":
        return dataclasses.replace(
            self,
            J_x=factor * self.J_x,
            J_z=factor * self.J_z,
            J_zz=factor * self.J_zz,
            J_yy=factor * self.J_yy,
            J_xxx=factor * self.J_xxx,
        )


@dataclass(frozen=True)
class HamiltonianSet:
    """Dense Hamiltonian on the joint chain together with its decomposition.

    ``H_s0``/``H_c0`` are filled by :func:`mean_field_shift` and
    ``H_bm``/``V`` by :func:`bath_split`; :func:`build` does both with the
    all-zero bath state unless told otherwise.
    """

    partition: QubitPartition
    H: np.ndarray
    H_s: np.ndarray
    H_b: np.ndarray
    H_c: np.ndarray
    H_s0: np.ndarray | None = None
    H_c0: np.ndarray | None = None
    H_bm: np.ndarray | None = None
    V: np.ndarray | None = None
    phi0: np.ndarray | None = None
    spec: CouplingSpec | None = None

    def members(self) -> dict[str, np.ndarray]:
        names = ("H", "H_s", "H_b", "H_c", "H_s0", "H_c0", "H_bm", "V")
        return {k: getattr(self, k) for k in names if getattr(self, k) is not None}


def chain_terms(spec: CouplingSpec, n: int | None = None) -> list[PauliString]:
    """All Pauli terms of the chosen variant on an open chain (zero couplings skipped).

    ``n`` overrides the chain length, which is otherwise ``n_s + n_b``.
    """
    n = spec.n_s + spec.n_b if n is None else n
    if spec.variant is Variant.XXX and n < 3:
        raise ValueError("XXX variant needs at least 3 sites")
    two_site = spec.J_zz != 0 or (spec.variant is Variant.YY and spec.J_yy != 0)
    if n < 2 and two_site:
        raise ValueError("two-site couplings need at least 2 sites")

    terms = []
    for j in range(n):
        if spec.J_x:
            terms.append(PauliString.from_sites(n, {j: "X"}, spec.J_x))
        if spec.J_z:
            terms.append(PauliString.from_sites(n, {j: "Z"}, spec.J_z))
    for j in range(n - 1):
        if spec.J_zz:
            terms.append(PauliString.from_sites(n, {j: "Z", j + 1: "Z"}, spec.J_zz))
        if spec.variant is Variant.YY and spec.J_yy:
            terms.append(PauliString.from_sites(n, {j: "Y", j + 1: "Y"}, spec.J_yy))
    if spec.variant is Variant.XXX and spec.J_xxx:
        for j in range(1, n - 1):
            terms.append(PauliString.from_sites(n, {j - 1: "X", j: "X", j + 1: "X"}, spec.J_xxx))
    return terms


def chain_matrix(spec: CouplingSpec, n: int | None = None) -> np.ndarray:
    """Dense Hamiltonian of the whole chain, ignoring the system/bath cut."""
    terms = chain_terms(spec, n)
    n = terms[0].num_qubits if terms else (spec.n_s + spec.n_b if n is None else n)
    return sum((pauli_matrix(t) for t in terms), np.zeros((2**n, 2**n), dtype=complex))


def term_region(term: PauliString, part: QubitPartition) -> str:
    support = term.support
    if all(q < part.n_s for q in support):
        return "s"
    if all(q >= part.n_s for q in support):
        return "b"
    return "c"


def build(spec: CouplingSpec, phi0: np.ndarray | None = None) -> HamiltonianSet:
    """Build the chain Hamiltonian and all derived parts.

    ``phi0`` is the bath reset state used for the mean-field shift; it
    defaults to the all-zero bath state.
    """
    part = spec.partition
    parts = {r: np.zeros((part.dim, part.dim), dtype=complex) for r in "sbc"}
    for term in chain_terms(spec):
        parts[term_region(term, part)] += pauli_matrix(term)
    hs = HamiltonianSet(
        partition=part,
        H=parts["s"] + parts["b"] + parts["c"],
        H_s=parts["s"],
        H_b=parts["b"],
        H_c=parts["c"],
        spec=spec,
    )
    if phi0 is None:
        phi0 = zero_state(part.n_b)
    return bath_split(mean_field_shift(hs, phi0))


def _as_blocks(op: np.ndarray, part: QubitPartition) -> np.ndarray:
    """Reshape a joint operator to ``[s, b, s', b']``."""
    return op.reshape(part.dim_s, part.dim_b, part.dim_s, part.dim_b)


def bath_block(op: np.ndarray, part: QubitPartition, m: int, m2: int) -> np.ndarray:
    """System operator ``<φ_m| op |φ_m2>`` for computational bath states."""
    return _as_blocks(op, part)[:, m, :, m2]


def partial_expectation(op: np.ndarray, part: QubitPartition, phi: np.ndarray) -> np.ndarray:
    """System operator ``<φ| op |φ>`` with the bath contracted against ``phi``."""
    return np.einsum("b,sbtc,c->st", phi.conj(), _as_blocks(op, part), phi)


def mean_field_shift(hs: HamiltonianSet, phi0: np.ndarray) -> HamiltonianSet:
    """Move the reset-state expectation of ``H_c`` into the system Hamiltonian."""
    part = hs.partition
    if phi0.shape != (part.dim_b,):
        raise ValueError(f"phi0 has length {phi0.shape[0]}, expected {part.dim_b}")
    if abs(np.linalg.norm(phi0) - 1) > 1e-10:
        raise ValueError("phi0 must be normalized")
    mean = np.kron(partial_expectation(hs.H_c, part, phi0), np.eye(part.dim_b))
    return dataclasses.replace(hs, H_s0=hs.H_s + mean, H_c0=hs.H_c - mean, phi0=phi0)


def bath_split(hs: HamiltonianSet) -> HamiltonianSet:
    """Split ``H_b`` into its computational-basis diagonal ``H_bm`` and the rest ``V``."""
    H_bm = np.diag(np.diag(hs.H_b))
    return dataclasses.replace(hs, H_bm=H_bm, V=hs.H_b - H_bm)


def is_integrable(spec: CouplingSpec) -> bool:
    """The Ising chain is integrable exactly when the longitudinal field vanishes."""
    if spec.variant is not Variant.ISING:
        raise UnsupportedClassificationError(
            f"integrability is only classified for the ISING variant, not {spec.variant.value}"
        )
    return spec.J_z == 0


def classify_alpha(hs: HamiltonianSet, part: QubitPartition | None = None) -> int:
    """Zeno exponent: 3 if ``H_c0`` has no bath off-diagonal blocks, else 1."""
    if hs.H_c0 is None:
        raise ValueError("mean_field_shift has not been applied")
    part = part or hs.partition
    blocks = _as_blocks(hs.H_c0, part)
    for m in range(part.dim_b):
        for m2 in range(part.dim_b):
            if m != m2 and np.max(np.abs(blocks[:, m, :, m2])) >= ALPHA_TOL:
                return 1
    return 3


def projector_commutator_norm(hs: HamiltonianSet, m: int) -> float:
    """Max element of ``[H_c0, I_s ⊗ |φ_m><φ_m|]``, built as explicit matrices."""
    part = hs.partition
    proj = np.zeros((part.dim_b, part.dim_b))
    proj[m, m] = 1.0
    P = np.kron(np.eye(part.dim_s), proj)
    return float(np.max(np.abs(hs.H_c0 @ P - P @ hs.H_c0)))
