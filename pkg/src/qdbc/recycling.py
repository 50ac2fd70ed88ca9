"""
Classification with state recycling.

When the ancilla reads 1 the feature register is left in
(c - s)/|c - s|, which points away from the compared sample. Instead of
discarding it, the next comparison uses it in place of the test state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from . import qstate
from .classifier import TrainingSet
from .encoding import encode
from .oqw import WalkGraph, build_graph
from .qstate import StateVector

BRANCH_EPS = 1e-15


class ZeroProbabilityBranch(ArithmeticError):
    pass


@dataclass(frozen=True)
class RecycleStep:
    sampled_index: int
    ancilla_outcome: int
    pre_state: StateVector
    post_state: StateVector


@dataclass
class RecycleResult:
    label: Hashable | None
    succeeded: bool
    steps: list[RecycleStep] = field(default_factory=list)
    restarts: int = 0


@dataclass(frozen=True)
class SchemeComparison:
    classes: tuple
    one_step: np.ndarray       # per-class mean success, single comparison
    two_step: np.ndarray       # per-class mean success, with one recycled comparison
    win_fraction: np.ndarray   # per-class fraction of samples where two_step > one_step
    per_sample_one: np.ndarray
    per_sample_two: np.ndarray
    labels: tuple


def _as_state(current) -> StateVector:
    return current if isinstance(current, StateVector) else encode(current)


def _interfered_branches(current: StateVector, sample: StateVector):
    if current.dim != sample.dim:
        raise ValueError(f"dimension mismatch: {current.dim} vs {sample.dim}")
    joint = StateVector(np.concatenate([current.amps, sample.amps]) / np.sqrt(2))
    return qstate.measure_qubit(qstate.apply(joint, qstate.hadamard(), [0]), 0)


def post_measure_state(current, sample, outcome: int) -> tuple[float, StateVector]:
    """Probability and feature-register state after reading ``outcome`` on the ancilla.

    Outcome 0 leaves (c + s)/|c + s| with probability (1 + <c|s>)/2,
    outcome 1 leaves (c - s)/|c - s| with probability (1 - <c|s>)/2.
    """
    branch = _interfered_branches(_as_state(current), encode(sample))[outcome]
    if branch.probability < BRANCH_EPS:
        raise ZeroProbabilityBranch(f"outcome {outcome} has probability zero")
    return branch.probability, qstate.remove_qubit(branch.post_state, 0, outcome)


def rotation_angle(test_angle: float, sample_angle: float) -> float:
    """Angle of the failure-branch state relative to the sample, 2 features.

    For an acute angle phi between test and sample this is phi/2 + pi/2.
    """
    c = np.array([np.cos(test_angle), np.sin(test_angle)])
    s = np.array([np.cos(sample_angle), np.sin(sample_angle)])
    _, post = post_measure_state(c, s, 1)
    v = post.amps.real
    return float(np.arccos(np.clip(v @ s, -1, 1)))


def _next_candidates(graph: WalkGraph | None, m: int, node: int | None) -> Sequence[int]:
    if graph is None or node is None:
        return range(m)
    return graph.neighbors[node]


def _node_of(graph: WalkGraph | None) -> dict | None:
    if graph is None:
        return None
    return {s: k for k, s in enumerate(graph.samples)}


def recycle_classify(test, train: TrainingSet, seed=None, max_steps: int = 2,
                     graph: WalkGraph | None = None,
                     max_restarts: int = 1000) -> RecycleResult:
    """Sampled recycling protocol.

    The first index is uniform over the training set. After outcome 1 the
    post-measurement state replaces the test state and the next index is
    drawn from the current node's out-neighbors in ``graph`` (uniform over
    the whole set when ``graph`` is None). Outcome 0 emits the current
    sample's label. A sequence that runs ``max_steps`` comparisons without
    success restarts from the original test state, at most ``max_restarts``
    times.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    rng = np.random.default_rng(seed)
    node_of = _node_of(graph)
    if node_of is not None and len(node_of) != train.M:
        raise ValueError("graph nodes must correspond one-to-one to training samples")
    result = RecycleResult(None, False)
    start = encode(test)

    for attempt in range(max_restarts + 1):
        result.restarts = attempt
        current = start
        i = int(rng.integers(train.M))
        for _ in range(max_steps):
            branches = _interfered_branches(current, encode(train.vectors[i]))
            outcome = 0 if rng.random() < branches[0].probability else 1
            post = qstate.remove_qubit(branches[outcome].post_state, 0, outcome)
            result.steps.append(RecycleStep(i, outcome, current, post))
            if outcome == 0:
                result.label, result.succeeded = train.labels[i], True
                return result
            current = post
            node = None if node_of is None else node_of[i]
            cands = _next_candidates(graph, train.M, node)
            nxt = cands[int(rng.integers(len(cands)))]
            i = int(nxt if node_of is None else graph.samples[nxt])
    return result


def exact_multistep_success(test, true_label, train: TrainingSet, steps: int = 2,
                            graph: WalkGraph | None = None) -> float:
    """Probability that the emitted label is ``true_label``, given that some label is emitted.

    ``steps=1`` is one comparison with a uniform index. ``steps=2`` adds
    a second comparison on the recycled state after a first-step failure;
    paths failing both comparisons are discarded. Exact enumeration over
    (i, j) index pairs.
    """
    if steps not in (1, 2):
        raise ValueError("steps must be 1 or 2")
    if len(train.classes) > 2:
        raise ValueError("recycling comparison is defined for two classes")
    x = train.vectors
    m = train.M
    correct = np.array([y == true_label for y in train.labels], dtype=float)
    t = np.asarray(test, dtype=float)

    p0 = np.clip((1 + x @ t) / 2, 0, 1)
    num = float(p0 @ correct) / m
    den = float(p0.sum()) / m
    if steps == 2:
        node_of = _node_of(graph)
        for i in range(m):
            fail = 1 - p0[i]
            if fail < BRANCH_EPS:
                continue
            _, rotated = post_measure_state(t, x[i], 1)
            r = rotated.amps.real
            if node_of is None:
                cand = np.arange(m)
            else:
                cand = np.array([graph.samples[k] for k in graph.neighbors[node_of[i]]])
            q = np.clip((1 + x[cand] @ r) / 2, 0, 1)
            w = fail / m / len(cand)
            num += w * float(q @ correct[cand])
            den += w * float(q.sum())
    if den <= 0:
        raise ZeroProbabilityBranch("no comparison sequence can succeed")
    return num / den


def scheme_comparison(vectors, labels: Sequence, class_pair: Sequence | None = None,
                      graph_kind: str | None = None) -> SchemeComparison:
    """Leave-one-out 1-step vs 2-step success on a two-class subset.

    ``graph_kind`` None draws the second index uniformly from the whole
    training set; "complete" excludes the first index; "bipartite" only
    moves to the other class.
    """
    vectors = np.asarray(vectors, dtype=float)
    labels = list(labels)
    classes = tuple(dict.fromkeys(labels))
    pair = tuple(class_pair) if class_pair is not None else classes[:2]
    if len(pair) != 2 or len(set(pair)) != 2:
        raise ValueError("exactly two distinct classes are required")
    for c in pair:
        if c not in classes:
            raise ValueError(f"class {c!r} not in dataset")
    keep = [k for k, y in enumerate(labels) if y in pair]
    x = vectors[keep]
    y = tuple(labels[k] for k in keep)
    for c in pair:
        if y.count(c) < 2:
            raise ValueError(f"class {c!r} has fewer than 2 samples")

    full = TrainingSet(x, y, pair)
    one = np.zeros(len(y))
    two = np.zeros(len(y))
    for k in range(len(y)):
        train = full.without(k)
        graph = None if graph_kind is None else build_graph(graph_kind, train.labels)
        one[k] = exact_multistep_success(x[k], y[k], train, 1, graph)
        two[k] = exact_multistep_success(x[k], y[k], train, 2, graph)

    ya = np.array(y, dtype=object)
    means1 = np.array([one[ya == c].mean() for c in pair])
    means2 = np.array([two[ya == c].mean() for c in pair])
    wins = np.array([(two[ya == c] > one[ya == c]).mean() for c in pair])
    return SchemeComparison(pair, means1, means2, wins, one, two, y)
