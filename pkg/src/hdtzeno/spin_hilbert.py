"""Qubit-chain state vectors, Pauli strings and bath measurement primitives.

Bit-order convention: qubit 0 is the most significant bit of the basis
index. System qubits occupy the leading positions and bath qubits the
trailing ones, so a joint amplitude vector reshaped to ``(N_s, N_b)`` has
the system index on the rows and the bath index on the columns.

States are plain 1-D complex ``numpy`` arrays of length ``2**n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

# Born probabilities below this are treated as exactly zero.
ZERO_PROBABILITY = 1e-14

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class QubitPartition:
    """Split of a chain into ``n_s`` system qubits followed by ``n_b`` bath qubits."""

    n_s: int
    n_b: int

    def __post_init__(self):
        if self.n_s < 1 or self.n_b < 1:
            raise ValueError(f"need n_s >= 1 and n_b >= 1, got ({self.n_s}, {self.n_b})")

    @property
    def n_total(self) -> int:
        return self.n_s + self.n_b

    @property
    def dim_s(self) -> int:
        return 2**self.n_s

    @property
    def dim_b(self) -> int:
        return 2**self.n_b

    @property
    def dim(self) -> int:
        return 2**self.n_total


@dataclass(frozen=True)
class PauliString:
    """A real multiple of a tensor product of single-qubit Pauli letters."""

    letters: str
    coefficient: float = 1.0

    def __post_init__(self):
        bad = set(self.letters) - set(PAULI)
        if bad or not self.letters:
            raise ValueError(f"invalid Pauli string {self.letters!r}")

    @property
    def num_qubits(self) -> int:
        return len(self.letters)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.letters) if c != "I")

    @classmethod
    def from_sites(cls, n: int, ops: dict[int, str], coefficient: float = 1.0) -> "PauliString":
        letters = ["I"] * n
        for site, letter in ops.items():
            if not 0 <= site < n:
                raise ValueError(f"site {site} outside chain of {n} qubits")
            letters[site] = letter
        return cls("".join(letters), coefficient)


def num_qubits_of(state: np.ndarray) -> int:
    dim = state.shape[0]
    n = dim.bit_length() - 1
    if dim < 2 or 2**n != dim:
        raise ValueError(f"state length {dim} is not a power of two >= 2")
    return n


def normalize(state: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(state)
    if norm == 0:
        raise ValueError("cannot normalize the zero vector")
    return state / norm


def basis_state(n: int, bits: str) -> np.ndarray:
    """Computational basis state ``|bits>`` on ``n`` qubits (bits[0] is qubit 0)."""
    if len(bits) != n or set(bits) - {"0", "1"}:
        raise ValueError(f"bits {bits!r} is not a length-{n} bitstring")
    psi = np.zeros(2**n, dtype=complex)
    psi[int(bits, 2)] = 1.0
    return psi


def zero_state(n: int) -> np.ndarray:
    return basis_state(n, "0" * n)


def inner_product(a: np.ndarray, b: np.ndarray) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    return abs(inner_product(a, b)) ** 2


def pauli_matrix(p: PauliString) -> np.ndarray:
    mats = [PAULI[c] for c in p.letters]
    return p.coefficient * reduce(np.kron, mats)


def bath_blocks(joint: np.ndarray, part: QubitPartition) -> np.ndarray:
    """Amplitudes reshaped to ``(N_s, N_b)``; column ``m`` is the unnormalized system state for bath outcome ``m``."""
    if joint.shape != (part.dim,):
        raise ValueError(f"joint state of length {joint.shape[0]} does not match partition {part}")
    return joint.reshape(part.dim_s, part.dim_b)


def measure_bath_distribution(
    joint: np.ndarray, part: QubitPartition
) -> dict[int, tuple[float, np.ndarray]]:
    """Measure the bath in the computational basis.

    Returns a map ``m -> (p_m, system_state_m)`` with the collapsed system
    state normalized. Outcomes with ``p_m < ZERO_PROBABILITY`` are left out.
    """
    blocks = bath_blocks(joint, part)
    probs = np.sum(np.abs(blocks) ** 2, axis=0)
    out = {}
    for m, p in enumerate(probs):
        if p < ZERO_PROBABILITY:
            continue
        out[m] = (float(p), blocks[:, m] / np.sqrt(p))
    return out


def attach_reset_bath(system: np.ndarray, part: QubitPartition, reset: np.ndarray) -> np.ndarray:
    """``system ⊗ reset`` in system-major order."""
    if system.shape != (part.dim_s,):
        raise ValueError(f"system state has length {system.shape[0]}, expected {part.dim_s}")
    if reset.shape != (part.dim_b,):
        raise ValueError(f"reset state has length {reset.shape[0]}, expected {part.dim_b}")
    return np.kron(system, reset)


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state from a normalized complex Gaussian vector."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)
