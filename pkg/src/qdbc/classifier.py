"""
Channel form of the distance-based classifier.

Only the ancilla and feature registers are quantum. The training index is
drawn classically, the comparison state is prepared and interfered, and the
sample label is emitted when the ancilla reads 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, log2, sqrt
from typing import Hashable, Sequence

import numpy as np

from . import qstate
from .encoding import comparison_state, interference_state, prep_circuit
from .qstate import StateVector

DEFAULT_MAX_ATTEMPTS = 1000


class ZeroSuccessProbability(ArithmeticError):
    """Post-selection can never succeed, so conditionals are undefined."""


@dataclass(frozen=True, eq=False)
class TrainingSet:
    vectors: np.ndarray
    labels: tuple
    classes: tuple = ()

    def __post_init__(self):
        x = np.asarray(self.vectors, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError("training set needs at least one sample")
        if len(self.labels) != x.shape[0]:
            raise ValueError("one label per sample required")
        norms = np.linalg.norm(x, axis=1)
        if np.max(np.abs(norms - 1)) > 1e-9:
            raise ValueError("training vectors must be unit norm")
        x.flags.writeable = False
        object.__setattr__(self, "vectors", x)
        object.__setattr__(self, "labels", tuple(self.labels))
        seen = tuple(dict.fromkeys(self.labels))
        classes = tuple(self.classes) or seen
        missing = set(seen) - set(classes)
        if missing:
            raise ValueError(f"labels {sorted(map(str, missing))} not among classes")
        object.__setattr__(self, "classes", classes)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple], classes: Sequence = ()) -> TrainingSet:
        vectors, labels = zip(*pairs)
        return cls(np.array(vectors, dtype=float), tuple(labels), tuple(classes))

    @property
    def M(self) -> int:
        return self.vectors.shape[0]

    @property
    def label_index(self) -> np.ndarray:
        pos = {c: k for k, c in enumerate(self.classes)}
        return np.array([pos[y] for y in self.labels])

    def without(self, index: int) -> TrainingSet:
        keep = np.arange(self.M) != index
        return TrainingSet(self.vectors[keep],
                           tuple(y for k, y in enumerate(self.labels) if k != index),
                           self.classes)


@dataclass(frozen=True)
class ClassDistribution:
    classes: tuple
    joint: np.ndarray          # p(0, y)
    total: float               # p(0)
    conditional: np.ndarray | None  # p(y | 0); None when p(0) = 0

    def __getitem__(self, label) -> float:
        if self.conditional is None:
            raise ZeroSuccessProbability("p(0) = 0: conditional distribution undefined")
        return float(self.conditional[self.classes.index(label)])

    def argmax(self):
        if self.conditional is None:
            raise ZeroSuccessProbability("p(0) = 0: conditional distribution undefined")
        return self.classes[int(np.argmax(self.conditional))]


@dataclass
class ClassificationTranscript:
    attempts: int = 0
    sampled_indices: list[int] = field(default_factory=list)
    final_label: Hashable | None = None
    succeeded: bool = False


def success_probability(test, sample) -> float:
    """Probability that the ancilla reads 0: |x + x'|^2 / 4 = (1 + <x|x'>) / 2."""
    t = np.asarray(test, dtype=float)
    s = np.asarray(sample, dtype=float)
    if t.shape != s.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {s.shape}")
    return float(np.clip((1 + t @ s) / 2, 0.0, 1.0))


def _success_probabilities(test, vectors: np.ndarray) -> np.ndarray:
    return np.clip((1 + vectors @ np.asarray(test, dtype=float)) / 2, 0.0, 1.0)


def _distribution(joint: np.ndarray, classes: tuple) -> ClassDistribution:
    total = float(joint.sum())
    conditional = joint / total if total > 0 else None
    return ClassDistribution(classes, joint, total, conditional)


def class_distribution(test, train: TrainingSet) -> ClassDistribution:
    p0 = _success_probabilities(test, train.vectors)
    joint = np.bincount(train.label_index, weights=p0, minlength=len(train.classes)) / train.M
    return _distribution(joint, train.classes)


def superposition_distribution(test, train: TrainingSet) -> ClassDistribution:
    """p(0, y) read off the full index x ancilla x feature x class pure state.

    Builds A sum_i |i>|psi(i)>|y_i> explicitly, applies the Hadamard to the
    ancilla and marginalizes. Exponential in register size; meant as an
    oracle for small training sets.
    """
    m, n_classes = train.M, len(train.classes)
    n_index = max(1, ceil(log2(m)))
    n_class = max(1, ceil(log2(n_classes)))
    amps = 0
    for i, (x, c) in enumerate(zip(train.vectors, train.label_index)):
        branch = qstate.tensor(
            qstate.tensor(StateVector.basis(i, n_index), comparison_state(test, x)),
            StateVector.basis(int(c), n_class),
        )
        amps = amps + branch.amps / sqrt(m)
    full = StateVector(amps)

    ancilla = n_index
    full = qstate.apply(full, qstate.hadamard(), [ancilla])
    zero, _ = qstate.measure_qubit(full, ancilla)
    joint = np.zeros(n_classes)
    if zero.post_state is not None:
        probs = np.abs(zero.post_state.amps) ** 2
        per_class = probs.reshape(-1, 1 << n_class).sum(axis=0)
        joint = zero.probability * per_class[:n_classes]
    return _distribution(joint, train.classes)


def sample_classify(test, train: TrainingSet, seed=None,
                    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                    prep: str = "direct") -> ClassificationTranscript:
    """Repeat-until-success sampling of the channel classifier.

    Each attempt draws a training index uniformly, prepares the interfered
    comparison state (``prep="direct"`` builds it from amplitudes,
    ``prep="circuit"`` runs the synthesized circuit), and measures the
    ancilla. Outcome 0 emits that sample's label.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    rng = np.random.default_rng(seed)
    transcript = ClassificationTranscript()
    for _ in range(max_attempts):
        i = int(rng.integers(train.M))
        transcript.attempts += 1
        transcript.sampled_indices.append(i)
        zero, _ = qstate.measure_qubit(_prepared(test, train.vectors[i], prep), 0)
        if rng.random() < zero.probability:
            transcript.final_label = train.labels[i]
            transcript.succeeded = True
            break
    return transcript


def _prepared(test, sample, prep: str) -> StateVector:
    if prep == "direct":
        return interference_state(test, sample)
    if prep == "circuit":
        return prep_circuit(test, sample).run()
    raise ValueError(f"unknown prep {prep!r}")


def ancilla_branches(test, sample, prep: str = "direct"):
    return qstate.measure_qubit(_prepared(test, sample, prep), 0)


@dataclass(frozen=True)
class LoocvTables:
    classes: tuple
    postselection: np.ndarray  # [test class, sample class] mean p(0 | i)
    conditional: np.ndarray    # [test class, output class] mean p(y | 0)
    counts: np.ndarray

    @property
    def success(self) -> np.ndarray:
        return np.diag(self.conditional).copy()


def loocv_report(vectors, labels: Sequence, classes: Sequence = ()) -> LoocvTables:
    """Exact leave-one-out tables over preprocessed unit vectors."""
    data = TrainingSet(vectors, tuple(labels), tuple(classes))
    idx, k = data.label_index, len(data.classes)
    counts = np.bincount(idx, minlength=k)
    if np.any(counts < 2):
        small = data.classes[int(np.argmin(counts))]
        raise ValueError(f"class {small!r} has fewer than 2 samples")

    p = np.clip((1 + data.vectors @ data.vectors.T) / 2, 0.0, 1.0)
    np.fill_diagonal(p, 0.0)
    onehot = np.eye(k)[idx]                       # (N, k)
    sums = p @ onehot                             # per-test sum over each class
    others = counts[None, :] - onehot             # held-out sample excluded
    mean_p = sums / others
    cond = sums / sums.sum(axis=1, keepdims=True)

    post = np.zeros((k, k))
    condt = np.zeros((k, k))
    for c in range(k):
        post[c] = mean_p[idx == c].mean(axis=0)
        condt[c] = cond[idx == c].mean(axis=0)
    return LoocvTables(data.classes, post, condt, counts)

