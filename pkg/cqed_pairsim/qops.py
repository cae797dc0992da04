"""Dense operator algebra on resonator ⊗ qubit1 ⊗ qubit2.

Basis convention: the resonator factor is slowest and qubit 2 fastest, so
|n, s1, s2> sits at index n*4 + s1*2 + s2 with g = 0 and e = 1. Matrices are
built as kron(kron(resonator, qubit1), qubit2).

Eigenvector phases are whatever the LAPACK driver returns; every downstream
consumer uses modulus-squared overlaps or rank-one projectors.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np
from scipy import linalg as la

logger = logging.getLogger("cqed_pairsim.qops")

QUBIT_LEVELS = {"g": 0, "e": 1}
QUBIT_KINDS = ("sz", "sx", "s_plus", "s_minus")

# relative tolerance applied to eigh input
HERMITIAN_RTOL = 1e-10

_LABEL_RE = re.compile(r"^\|?\s*(\d+)\s*,?\s*([ge])\s*,?\s*([ge])\s*>?$")

_SINGLE_QUBIT = {
    "sz": np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex),
    "sx": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    # |e><g| and |g><e| with g = index 0
    "s_plus": np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex),
    "s_minus": np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex),
}


def _frozen_array(values, shape: Tuple[int, ...]) -> np.ndarray:
    arr = np.array(values, dtype=complex, copy=True)
    if arr.shape != shape:
        raise ValueError(f"expected array of shape {shape}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class HilbertSpace:
    n_max: int

    def __post_init__(self) -> None:
        if isinstance(self.n_max, bool) or int(self.n_max) != self.n_max:
            raise ValueError(f"n_max must be an integer, got {self.n_max!r}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def dim(self) -> int:
        return (self.n_max + 1) * 4

    def index(self, n: int, s1: str, s2: str) -> int:
        if not 0 <= n <= self.n_max:
            raise ValueError(f"photon number n={n} outside [0, {self.n_max}]")
        try:
            return n * 4 + QUBIT_LEVELS[s1] * 2 + QUBIT_LEVELS[s2]
        except KeyError as exc:
            raise ValueError(f"qubit labels must be 'g' or 'e', got {s1!r}, {s2!r}") from exc

    def label(self, index: int) -> str:
        if not 0 <= index < self.dim:
            raise ValueError(f"basis index {index} outside [0, {self.dim})")
        n, rest = divmod(index, 4)
        s1, s2 = divmod(rest, 2)
        names = "ge"
        return f"{n}{names[s1]}{names[s2]}"

    def check_same(self, other: "HilbertSpace", what: str) -> None:
        if other != self:
            raise ValueError(
                f"{what}: dimension mismatch (n_max={self.n_max} vs n_max={other.n_max})"
            )


@dataclass(frozen=True, eq=False)
class Operator:
    space: HilbertSpace
    entries: np.ndarray

    __array_ufunc__ = None

    def __post_init__(self) -> None:
        d = self.space.dim
        object.__setattr__(self, "entries", _frozen_array(self.entries, (d, d)))

    # arithmetic -----------------------------------------------------------

    def _other(self, other: "Operator") -> np.ndarray:
        self.space.check_same(other.space, "operator arithmetic")
        return other.entries

    def __add__(self, other: "Operator") -> "Operator":
        return Operator(self.space, self.entries + self._other(other))

    def __sub__(self, other: "Operator") -> "Operator":
        return Operator(self.space, self.entries - self._other(other))

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.entries)

    def __mul__(self, scalar: complex) -> "Operator":
        if isinstance(scalar, (Operator, StateVector)):
            return NotImplemented
        return Operator(self.space, self.entries * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            return Operator(self.space, self.entries @ self._other(other))
        if isinstance(other, StateVector):
            self.space.check_same(other.space, "operator application")
            return StateVector(self.space, self.entries @ other.amplitudes)
        return NotImplemented

    def dag(self) -> "Operator":
        return Operator(self.space, self.entries.conj().T)

    def element(self, bra: "StateVector", ket: "StateVector") -> complex:
        return complex(np.vdot(bra.amplitudes, self.entries @ ket.amplitudes))

    # diagnostics ----------------------------------------------------------

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.entries))) if self.entries.size else 0.0

    def max_asymmetry(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        """Asymmetry measured against the largest entry."""
        return self.max_asymmetry() <= rtol * max(self.max_abs(), np.finfo(float).tiny)

    def norm(self) -> float:
        """Spectral norm (largest singular value)."""
        return float(np.linalg.norm(self.entries, 2))


@dataclass(frozen=True, eq=False)
class StateVector:
    space: HilbertSpace
    amplitudes: np.ndarray

    __array_ufunc__ = None

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "amplitudes", _frozen_array(self.amplitudes, (self.space.dim,))
        )

    def __add__(self, other: "StateVector") -> "StateVector":
        self.space.check_same(other.space, "state arithmetic")
        return StateVector(self.space, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "StateVector") -> "StateVector":
        self.space.check_same(other.space, "state arithmetic")
        return StateVector(self.space, self.amplitudes - other.amplitudes)

    def __mul__(self, scalar: complex) -> "StateVector":
        return StateVector(self.space, self.amplitudes * scalar)

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.space, self.amplitudes / n)

    def overlap(self, other: "StateVector") -> complex:
        """<self|other>."""
        self.space.check_same(other.space, "overlap")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def probability(self, other: "StateVector") -> float:
        return abs(self.overlap(other)) ** 2


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    space: HilbertSpace
    entries: np.ndarray

    def __post_init__(self) -> None:
        d = self.space.dim
        object.__setattr__(self, "entries", _frozen_array(self.entries, (d, d)))

    @classmethod
    def from_state(cls, psi: StateVector) -> "DensityMatrix":
        return cls(psi.space, np.outer(psi.amplitudes, psi.amplitudes.conj()))

    @classmethod
    def mixture(cls, states, weights) -> "DensityMatrix":
        states = list(states)
        rho = sum(w * np.outer(s.amplitudes, s.amplitudes.conj()) for s, w in zip(states, weights))
        return cls(states[0].space, rho)

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.entries + self.entries.conj().T)
        return float(la.eigvalsh(herm)[0])

    def population(self, state: StateVector) -> float:
        self.space.check_same(state.space, "population")
        return float(np.real(np.vdot(state.amplitudes, self.entries @ state.amplitudes)))

    def validate_physical(self, tol: float = 1e-10) -> None:
        """Raise ValueError unless rho is Hermitian, unit-trace and PSD within `tol`."""
        herm = self.hermiticity_error()
        if herm > tol:
            raise ValueError(f"density matrix is not Hermitian (max asymmetry {herm:.3e})")
        tr_err = abs(self.trace() - 1.0)
        if tr_err > tol:
            raise ValueError(f"density matrix trace deviates from 1 by {tr_err:.3e}")
        lam = self.min_eigenvalue()
        if lam < -tol:
            raise ValueError(f"density matrix has negative eigenvalue {lam:.3e}")


@dataclass(frozen=True, eq=False)
class Eigensystem:
    """Ascending eigenvalues with eigenvectors stored as matrix columns."""

    space: HilbertSpace
    values: np.ndarray
    vectors: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float, copy=True)
        vectors = np.array(self.vectors, dtype=complex, copy=True)
        if vectors.shape != (self.space.dim, values.size):
            raise ValueError(
                f"eigenvector matrix shape {vectors.shape} does not match "
                f"({self.space.dim}, {values.size})"
            )
        values.flags.writeable = False
        vectors.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "vectors", vectors)

    def __len__(self) -> int:
        return int(self.values.size)

    def state(self, k: int) -> StateVector:
        return StateVector(self.space, self.vectors[:, k])

    def states(self) -> Iterator[StateVector]:
        for k in range(len(self)):
            yield self.state(k)

    def truncated(self, k: int) -> "Eigensystem":
        return Eigensystem(self.space, self.values[:k], self.vectors[:, :k])

    def to_eigenbasis(self, op: Operator) -> np.ndarray:
        """Matrix elements <psi_j|op|psi_k>."""
        self.space.check_same(op.space, "eigenbasis transform")
        return self.vectors.conj().T @ op.entries @ self.vectors


# constructors ---------------------------------------------------------------


def make_space(n_max: int) -> HilbertSpace:
    return HilbertSpace(n_max)


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.dim, dtype=complex))


def zero(space: HilbertSpace) -> Operator:
    return Operator(space, np.zeros((space.dim, space.dim), dtype=complex))


def _resonator_lowering(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)


def embed_resonator(space: HilbertSpace, factor: np.ndarray) -> Operator:
    return Operator(space, np.kron(factor, np.eye(4, dtype=complex)))


def annihilation(space: HilbertSpace) -> Operator:
    return embed_resonator(space, _resonator_lowering(space.n_max))


def creation(space: HilbertSpace) -> Operator:
    return embed_resonator(space, _resonator_lowering(space.n_max).conj().T)


def number(space: HilbertSpace) -> Operator:
    return embed_resonator(space, np.diag(np.arange(space.n_max + 1, dtype=float)))


def qubit_op(space: HilbertSpace, which: int, kind: str) -> Operator:
    if which not in (1, 2):
        raise ValueError(f"qubit index must be 1 or 2, got {which!r}")
    if kind not in _SINGLE_QUBIT:
        raise ValueError(f"unknown qubit operator {kind!r}; expected one of {QUBIT_KINDS}")
    eye2 = np.eye(2, dtype=complex)
    single = _SINGLE_QUBIT[kind]
    qubits = np.kron(single, eye2) if which == 1 else np.kron(eye2, single)
    return Operator(space, np.kron(np.eye(space.n_max + 1, dtype=complex), qubits))


def basis_state(space: HilbertSpace, n: int, s1: str, s2: str) -> StateVector:
    amps = np.zeros(space.dim, dtype=complex)
    amps[space.index(n, s1, s2)] = 1.0
    return StateVector(space, amps)


def parse_basis_label(label: str) -> Tuple[int, str, str]:
    """'1gg', '|0,e,e>' and '0ee' style labels -> (n, s1, s2)."""
    match = _LABEL_RE.match(label.strip())
    if not match:
        raise ValueError(f"cannot parse basis label {label!r}; expected e.g. '1gg' or '|0,e,e>'")
    return int(match.group(1)), match.group(2), match.group(3)


def labelled_state(space: HilbertSpace, label: str) -> StateVector:
    return basis_state(space, *parse_basis_label(label))


def projector(state: StateVector) -> Operator:
    return Operator(state.space, np.outer(state.amplitudes, state.amplitudes.conj()))


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


# linear algebra -------------------------------------------------------------


def eigh(op: Operator) -> Eigensystem:
    """Hermitian eigendecomposition, ascending, ties kept in solver order."""
    asym = op.max_asymmetry()
    scale = max(op.max_abs(), np.finfo(float).tiny)
    if asym > HERMITIAN_RTOL * scale:
        raise ValueError(
            f"eigh requires a Hermitian operator: max asymmetry {asym:.3e} "
            f"exceeds {HERMITIAN_RTOL:g} x max entry {scale:.3e}"
        )
    herm = 0.5 * (op.entries + op.entries.conj().T)
    values, vectors = la.eigh(herm)
    order = np.argsort(values, kind="stable")
    return Eigensystem(op.space, values[order], vectors[:, order])


def expm(op: Operator) -> Operator:
    return Operator(op.space, la.expm(np.asarray(op.entries)))

