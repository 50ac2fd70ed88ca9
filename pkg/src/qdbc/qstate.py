"""
Small dense pure-state simulator.

Basis ordering is big-endian: qubit 0 is the leftmost ket, so for two qubits
the amplitude index is 2*q0 + q1.

The Ry gate uses the full-angle convention

    Ry(t)|0> = cos t |0> + sin t |1>

which keeps real rotations additive: Ry(a) Ry(b) = Ry(a + b).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import cos, sin, sqrt
from typing import Callable, Sequence

import numpy as np

NORM_TOL = 1e-9
UNITARY_TOL = 1e-10

_SQRT2_INV = 1 / sqrt(2)


class StateError(ValueError):
    """Invalid state, gate or register index."""


@dataclass(frozen=True, eq=False)
class StateVector:
    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex).reshape(-1)
        n = amps.size.bit_length() - 1
        if amps.size < 2 or 1 << n != amps.size:
            raise StateError(f"length {amps.size} is not a power of two")
        if not np.all(np.isfinite(amps)):
            raise StateError("non-finite amplitude")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1) > NORM_TOL:
            raise StateError(f"state not normalized (norm^2 = {norm:.12g})")
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)

    @property
    def num_qubits(self) -> int:
        return self.amps.size.bit_length() - 1

    @property
    def dim(self) -> int:
        return self.amps.size

    @classmethod
    def basis(cls, index: int, num_qubits: int) -> StateVector:
        amps = np.zeros(1 << num_qubits, dtype=complex)
        amps[index] = 1
        return cls(amps)

    @classmethod
    def zeros(cls, num_qubits: int) -> StateVector:
        return cls.basis(0, num_qubits)

    @classmethod
    def normalized(cls, amps) -> StateVector:
        amps = np.asarray(amps, dtype=complex)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise StateError("cannot normalize the zero vector")
        return cls(amps / norm)

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits}, amps={np.round(self.amps, 6)})"


@dataclass(frozen=True)
class MeasurementBranch:
    outcome: int
    probability: float
    post_state: StateVector | None


# Gate constructors


def hadamard() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV


def pauli_x() -> np.ndarray:
    return np.array([[0, 1], [1, 0]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = cos(theta), sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def cnot() -> np.ndarray:
    """Control is the first target index, negated qubit the second."""
    u = np.eye(4, dtype=complex)
    u[2:, 2:] = pauli_x()
    return u


def standard_gates() -> dict[str, Callable[..., np.ndarray]]:
    return {"H": hadamard, "X": pauli_x, "Ry": ry, "CNOT": cnot}


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))) < tol


# State operations


def _check_targets(targets: Sequence[int], n: int):
    if len(set(targets)) != len(targets):
        raise StateError(f"duplicate targets {list(targets)}")
    for t in targets:
        if not 0 <= t < n:
            raise StateError(f"qubit {t} out of range for {n} qubits")


def apply(state: StateVector, u: np.ndarray, targets: Sequence[int]) -> StateVector:
    """Apply ``u`` to the ordered ``targets``; identity on every other qubit."""
    n = state.num_qubits
    targets = list(targets)
    _check_targets(targets, n)
    u = np.asarray(u, dtype=complex)
    k = len(targets)
    if u.shape != (1 << k, 1 << k):
        raise StateError(f"gate of shape {u.shape} does not act on {k} qubit(s)")

    psi = state.amps.reshape([2] * n)
    psi = np.tensordot(u.reshape([2] * (2 * k)), psi, axes=(list(range(k, 2 * k)), targets))
    # tensordot puts the acted-on axes first; move them back in place
    psi = np.moveaxis(psi, list(range(k)), targets)
    return StateVector(psi.reshape(-1))


def tensor(a: StateVector, b: StateVector) -> StateVector:
    return StateVector(np.kron(a.amps, b.amps))


def inner(a: StateVector, b: StateVector) -> complex:
    if a.dim != b.dim:
        raise StateError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return complex(np.vdot(a.amps, b.amps))


def measure_qubit(state: StateVector, qubit: int) -> tuple[MeasurementBranch, MeasurementBranch]:
    """Both Born-rule branches of a computational-basis measurement of one qubit."""
    n = state.num_qubits
    _check_targets([qubit], n)
    psi = state.amps.reshape([2] * n)
    branches = []
    for outcome in (0, 1):
        proj = np.zeros_like(psi)
        idx = [slice(None)] * n
        idx[qubit] = outcome
        proj[tuple(idx)] = psi[tuple(idx)]
        p = float(np.vdot(proj, proj).real)
        post = StateVector(proj.reshape(-1) / sqrt(p)) if p > 0 else None
        branches.append(MeasurementBranch(outcome, p, post))
    return branches[0], branches[1]


def remove_qubit(state: StateVector, qubit: int, value: int) -> StateVector:
    """Drop a qubit known to be in basis state ``value`` (e.g. just measured)."""
    n = state.num_qubits
    _check_targets([qubit], n)
    if n == 1:
        raise StateError("cannot remove the only qubit")
    psi = np.take(state.amps.reshape([2] * n), value, axis=qubit)
    return StateVector.normalized(psi.reshape(-1))


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|, insensitive to global phase."""
    return abs(inner(a, b))
