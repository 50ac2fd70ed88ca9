"""
Feature preprocessing, amplitude encoding and preparation circuits.

Register layout for every circuit here: qubit 0 is the ancilla, the
remaining qubits hold the amplitude-encoded features (most significant
feature bit first).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from math import atan2, pi, sqrt
from typing import Sequence

import numpy as np

from . import qstate
from .qstate import StateVector

MODES = ("normalize", "standardize", "minmax")
DEFAULT_MODE = "minmax"

UNIT_TOL = 1e-9
SYNTHESIS_TOL = 1e-10


class PreprocessError(ValueError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class SynthesisError(RuntimeError):
    def __init__(self, message: str, fidelity: float, circuit=None):
        super().__init__(message)
        self.fidelity = fidelity
        self.circuit = circuit  # best attempt


# Preprocessing


@dataclass(frozen=True)
class Scaler:
    """Per-feature affine map fitted on a reference set, followed by unit normalization."""

    mode: str
    shift: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, raw, mode: str = DEFAULT_MODE) -> Scaler:
        raw = _as_matrix(raw)
        d = raw.shape[1]
        if mode == "normalize":
            return cls(mode, np.zeros(d), np.ones(d))
        if mode == "standardize":
            shift, spread = raw.mean(axis=0), raw.std(axis=0)
            scale = spread
        elif mode == "minmax":
            lo, hi = raw.min(axis=0), raw.max(axis=0)
            spread = hi - lo
            # maps [lo, hi] onto [-1, 1]
            shift, scale = (lo + hi) / 2, spread / 2
        else:
            raise PreprocessError(f"unknown preprocessing mode {mode!r}; expected one of {MODES}")
        bad = np.flatnonzero(spread <= 0)
        if bad.size:
            raise PreprocessError(f"feature {bad[0]} has zero spread", index=int(bad[0]))
        return cls(mode, shift, scale)

    def transform(self, raw) -> np.ndarray:
        z = (_as_matrix(raw) - self.shift) / self.scale
        norms = np.linalg.norm(z, axis=1)
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise PreprocessError(f"zero vector at index {zero[0]}", index=int(zero[0]))
        return z / norms[:, None]


def preprocess(raw, mode: str = DEFAULT_MODE) -> np.ndarray:
    """Map raw feature rows to unit vectors.

    ``standardize`` and ``minmax`` fit their statistics on ``raw`` itself;
    ``minmax`` rescales every feature to [-1, 1] before normalizing.
    """
    return Scaler.fit(raw, mode).transform(raw)


def _as_matrix(raw) -> np.ndarray:
    arr = np.asarray(raw)
    if np.iscomplexobj(arr):
        raise PreprocessError("complex features are not supported")
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise PreprocessError(f"expected a non-empty 2-D feature array, got shape {arr.shape}")
    return arr


# Encoding


def _unit_real(x, what: str = "feature vector") -> np.ndarray:
    x = np.asarray(x)
    if np.iscomplexobj(x):
        raise ValueError(f"{what} must be real")
    x = np.asarray(x, dtype=float).reshape(-1)
    if abs(np.linalg.norm(x) - 1) > UNIT_TOL:
        raise ValueError(f"{what} is not unit norm (|x| = {np.linalg.norm(x):.12g})")
    return x


def encode(x) -> StateVector:
    x = _unit_real(x)
    if x.size < 2 or x.size & (x.size - 1):
        raise ValueError(f"feature count {x.size} is not a power of two")
    return StateVector(x)


def comparison_state(test, sample) -> StateVector:
    """(|0>|test> + |1>|sample>) / sqrt(2), ancilla leftmost."""
    t, s = encode(test).amps, encode(sample).amps
    if t.size != s.size:
        raise ValueError(f"length mismatch: {t.size} vs {s.size}")
    return StateVector(np.concatenate([t, s]) / sqrt(2))


def interference_state(test, sample) -> StateVector:
    """The comparison state after the ancilla Hadamard."""
    return qstate.apply(comparison_state(test, sample), qstate.hadamard(), [0])


# Circuits


@dataclass(frozen=True)
class Gate:
    kind: str  # "H", "Ry" or "CNOT"
    targets: tuple[int, ...]
    params: tuple[float, ...] = ()
    controls: tuple[int, ...] = ()

    def matrix(self) -> np.ndarray:
        if self.kind == "H":
            return qstate.hadamard()
        if self.kind == "Ry":
            return qstate.ry(self.params[0])
        if self.kind == "CNOT":
            return qstate.cnot()
        raise ValueError(f"unknown gate kind {self.kind!r}")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.controls + self.targets


@dataclass
class Circuit:
    num_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def h(self, q: int) -> Circuit:
        self.gates.append(Gate("H", (q,)))
        return self

    def ry(self, theta: float, q: int) -> Circuit:
        self.gates.append(Gate("Ry", (q,), (float(theta),)))
        return self

    def cnot(self, control: int, target: int) -> Circuit:
        self.gates.append(Gate("CNOT", (target,), (), (control,)))
        return self

    def run(self, initial: StateVector | None = None) -> StateVector:
        state = initial if initial is not None else StateVector.zeros(self.num_qubits)
        for g in self.gates:
            state = qstate.apply(state, g.matrix(), g.qubits)
        return state

    def unitary(self) -> np.ndarray:
        dim = 1 << self.num_qubits
        cols = [self.run(StateVector.basis(i, self.num_qubits)).amps for i in range(dim)]
        return np.stack(cols, axis=1)

    def without_final_h(self) -> Circuit:
        if not self.gates or self.gates[-1] != Gate("H", (0,)):
            raise ValueError("circuit does not end with a Hadamard on the ancilla")
        return Circuit(self.num_qubits, self.gates[:-1])

    def census(self, qubits: Sequence[int] | None = None) -> Counter:
        """Gate counts by kind, optionally restricted to gates targeting ``qubits``."""
        keep = set(range(self.num_qubits) if qubits is None else qubits)
        return Counter(g.kind for g in self.gates if set(g.targets) & keep)

    def layout(self) -> list[tuple[str, tuple[int, ...], tuple[int, ...]]]:
        """Parameter-free gate sequence: (kind, controls, targets)."""
        return [(g.kind, g.controls, g.targets) for g in self.gates]


PrepAngles = tuple  # (alpha1, alpha2)


def prep_angles(phi_test: float, phi_m: float) -> PrepAngles:
    return pi / 4 + (phi_test - phi_m) / 2, -pi / 4 + (phi_test + phi_m) / 2


def prep_circuit_2f(phi_test: float, phi_m: float) -> Circuit:
    """Prepare (H x 1)(|0>|phi_test> + |1>|phi_m>)/sqrt(2) from |00>.

    |phi> = cos(phi)|0> + sin(phi)|1>. The circuit is
    Ry(a1) on the feature, H on the ancilla, CNOT, Ry(a2), H on the ancilla.
    """
    a1, a2 = prep_angles(phi_test, phi_m)
    return Circuit(2).ry(a1, 1).h(0).cnot(0, 1).ry(a2, 1).h(0)


TEMPLATE_2F = Circuit(2).ry(0, 1).h(0).cnot(0, 1).ry(0, 1).h(0).layout()

# H(a), H(f1), Ry, CX(a), Ry, CX(f1), Ry, CX(a), Ry, H(a)
TEMPLATE_4F = (
    Circuit(3).h(0).h(1)
    .ry(0, 2).cnot(0, 2).ry(0, 2).cnot(1, 2).ry(0, 2).cnot(0, 2).ry(0, 2)
    .h(0).layout()
)

# Walsh-type map from the four template angles to the rotation angle seen
# by the low feature qubit in each (ancilla, high feature bit) branch.
_BRANCH_MAP = np.array([
    [1, 1, 1, 1],     # a=0, h=0
    [1, 1, -1, -1],   # a=0, h=1 (an X precedes the net rotation)
    [1, -1, -1, 1],   # a=1, h=0
    [1, -1, 1, -1],   # a=1, h=1 (an X precedes the net rotation)
], dtype=float)


def _angle(x0: float, x1: float) -> float:
    return atan2(x1, x0)


def _low_qubit_angles(test: np.ndarray, sample: np.ndarray) -> np.ndarray:
    branch = []
    for v in (test, sample):
        for h in (0, 1):
            g = _angle(v[2 * h], v[2 * h + 1])
            branch.append(pi / 2 - g if h else g)
    # order branches as the rows of _BRANCH_MAP
    c = np.array([branch[0], branch[1], branch[2], branch[3]])
    return np.linalg.solve(_BRANCH_MAP, c)


def prep_circuit_4f(test, sample, template: str = "extended") -> Circuit:
    """Three-qubit preparation of (H x 1)(|0>|test> + |1>|sample>)/sqrt(2).

    ``template="fixed"`` uses exactly four Ry rotations and three CNOTs on the
    low feature qubit with a bare Hadamard on the high one. That Hadamard
    fixes the weight of each half of both vectors to 1/2, so only such
    "balanced" pairs are reachable; others raise ``SynthesisError`` carrying
    the best attainable fidelity.

    ``template="extended"`` swaps that Hadamard for an ancilla-controlled
    pair of Ry rotations (Ry, CNOT, Ry) on the high qubit and reaches every
    real pair. The low-qubit part is identical in both.
    """
    t = _unit_real(test, "test vector")
    s = _unit_real(sample, "sample vector")
    if t.size != 4 or s.size != 4:
        raise ValueError("prep_circuit_4f needs two length-4 vectors")
    theta = _low_qubit_angles(t, s)

    c = Circuit(3).h(0)
    if template == "fixed":
        c.h(1)
    elif template == "extended":
        d0 = _angle(np.hypot(t[0], t[1]), np.hypot(t[2], t[3]))
        d1 = _angle(np.hypot(s[0], s[1]), np.hypot(s[2], s[3]))
        b0 = (d0 + pi / 2 - d1) / 2
        b1 = (d0 - pi / 2 + d1) / 2
        c.ry(b0, 1).cnot(0, 1).ry(b1, 1)
    else:
        raise ValueError(f"unknown template {template!r}")
    c.ry(theta[0], 2).cnot(0, 2).ry(theta[1], 2).cnot(1, 2)
    c.ry(theta[2], 2).cnot(0, 2).ry(theta[3], 2).h(0)

    f = circuit_fidelity(c, interference_state(t, s))
    if f < 1 - SYNTHESIS_TOL:
        raise SynthesisError(
            f"{template} template cannot reach this pair (fidelity {f:.12f})", fidelity=f, circuit=c)
    return c


def prep_circuit(test, sample, template: str = "extended") -> Circuit:
    t = _unit_real(test, "test vector")
    s = _unit_real(sample, "sample vector")
    if t.size != s.size:
        raise ValueError(f"length mismatch: {t.size} vs {s.size}")
    if t.size == 2:
        return prep_circuit_2f(_angle(*t), _angle(*s))
    if t.size == 4:
        return prep_circuit_4f(t, s, template)
    raise ValueError(f"no preparation circuit for {t.size} features")


def circuit_fidelity(circuit: Circuit, target: StateVector) -> float:
    return qstate.fidelity(circuit.run(), target)


# Classical reference


def kernel_classify(test, train_vectors, train_labels, tol: float = 0.0) -> int:
    """sgn sum_i y_i (1 - |x_i - x'|^2 / 4M) for labels in {-1, +1}.

    Returns 0 when the weighted sum is within ``tol`` of zero.
    """
    x = np.asarray(train_vectors, dtype=float)
    y = np.asarray(train_labels, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("empty training set")
    if not np.all(np.isin(y, (-1, 1))):
        raise ValueError("labels must be -1 or +1")
    m = x.shape[0]
    d2 = np.sum((x - np.asarray(test, dtype=float)) ** 2, axis=1)
    total = float(np.sum(y * (1 - d2 / (4 * m))))
    if abs(total) <= tol:
        return 0
    return 1 if total > 0 else -1
