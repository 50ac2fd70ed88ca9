"""
Open quantum walk engine for the distributed classifier.

The walk state is block diagonal in the position basis, so it is stored as
one k x k density block per node (k = 2 * feature dimension: ancilla and
feature register). Transition operators come in three kinds:

reset
    Every term |psi(j)><d| / sqrt(d_out(i)) of the rank-one transition is a
    separate Kraus operator, so the internal state is replaced by the
    comparison state of the target node. Trace preserving.
conditional
    The single operator (|0><0| x 1 + |1><1| x |x_j><s|) / sqrt(d_out(i)),
    where <s| is the sum of feature basis bras. Keeps the test branch and
    overwrites the sample branch, but is not trace preserving in general;
    each step renormalizes and records the lost trace.
handoff
    The conditional operator with <s| replaced by <x_i|, i.e. the source
    node first rotates its own sample back to the reference basis state
    and the target node then prepares its sample from there. Trace
    preserving on every state the protocol produces.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Callable, Hashable, Sequence

import numpy as np
from scipy import sparse

from . import qstate
from .classifier import TrainingSet, class_distribution
from .encoding import comparison_state
from .qstate import StateVector

KINDS = ("reset", "conditional", "handoff")
TRACE_TOL = 1e-9


class WalkError(ValueError):
    pass


# Graphs


@dataclass(frozen=True, eq=False)
class WalkGraph:
    labels: tuple                         # class label of each node
    samples: tuple                        # training-sample index held by each node
    neighbors: tuple                      # out-neighbors of each node

    def __post_init__(self):
        n = len(self.labels)
        if len(self.samples) != n or len(self.neighbors) != n:
            raise WalkError("labels, samples and neighbors must have one entry per node")
        for i, nb in enumerate(self.neighbors):
            if not nb:
                raise WalkError(f"node {i} has no outgoing edge")
            if any(not 0 <= j < n for j in nb):
                raise WalkError(f"node {i} has an edge to a missing node")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def d_out(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.neighbors])

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, nb in enumerate(self.neighbors) for j in nb]

    def has_edge(self, i: int, j: int) -> bool:
        return 0 <= i < self.n and j in self.neighbors[i]

    def transition_matrix(self) -> np.ndarray:
        """Row-stochastic matrix of the classical walk with uniform out-edges."""
        p = np.zeros((self.n, self.n))
        for i, nb in enumerate(self.neighbors):
            for j in nb:
                p[i, j] += 1 / len(nb)
        return p


def arrange(labels: Sequence, arrangement: str = "given") -> list[int]:
    """Sample order along the node list."""
    classes = list(dict.fromkeys(labels))
    by_class = {c: [k for k, y in enumerate(labels) if y == c] for c in classes}
    if arrangement == "given":
        return list(range(len(labels)))
    if arrangement == "clustered":
        return [k for c in classes for k in by_class[c]]
    if arrangement == "interleaved":
        order, queues = [], [list(by_class[c]) for c in classes]
        while any(queues):
            for q in queues:
                if q:
                    order.append(q.pop(0))
        return order
    raise WalkError(f"unknown arrangement {arrangement!r}")


def build_graph(kind: str, labels: Sequence, arrangement: str = "given",
                self_loops: bool = False) -> WalkGraph:
    """Labeled walk graph over the training samples.

    ``cycle`` links node i to i-1 and i+1 (plus i itself with ``self_loops``,
    which makes the walk aperiodic), ``complete`` links every ordered pair,
    ``bipartite`` links exactly the pairs with different class labels.
    """
    labels = list(labels)
    n = len(labels)
    if n < 2 and not self_loops:
        raise WalkError("a walk graph needs at least 2 nodes")
    order = arrange(labels, arrangement)
    node_labels = tuple(labels[k] for k in order)

    if kind == "cycle":
        nbrs = [sorted({(i - 1) % n, (i + 1) % n} | ({i} if self_loops else set()))
                for i in range(n)]
    elif kind == "complete":
        nbrs = [[j for j in range(n) if j != i or self_loops] for i in range(n)]
    elif kind == "bipartite":
        if len(set(node_labels)) < 2:
            raise WalkError("bipartite-by-class graph needs at least two classes")
        nbrs = [[j for j in range(n) if node_labels[j] != node_labels[i]] for i in range(n)]
    else:
        raise WalkError(f"unknown graph kind {kind!r}")
    return WalkGraph(node_labels, tuple(order), tuple(tuple(nb) for nb in nbrs))


# Transition operators


def _dims(vectors: np.ndarray) -> tuple[int, int]:
    f = vectors.shape[1]
    return f, 2 * f


def _branch_operator(f: int, sample_ket: np.ndarray, bra: np.ndarray) -> np.ndarray:
    """|0><0| x 1 + |1><1| x |sample_ket><bra|."""
    k = np.zeros((2 * f, 2 * f))
    k[:f, :f] = np.eye(f)
    k[f:, f:] = np.outer(sample_ket, bra)
    return k


def kraus_for_edge(graph: WalkGraph, edge: tuple[int, int], kind: str, vectors,
                   test=None) -> np.ndarray:
    """Kraus operators (stacked along axis 0) for the hop ``edge = (i, j)``."""
    i, j = edge
    if not graph.has_edge(i, j):
        raise WalkError(f"{edge} is not an edge of the graph")
    vectors = np.asarray(vectors, dtype=float)
    f, k = _dims(vectors)
    scale = 1 / sqrt(len(graph.neighbors[i]))
    x_j = vectors[graph.samples[j]]

    if kind == "reset":
        if test is None:
            raise WalkError("reset transitions embed the test state; test is required")
        psi = comparison_state(test, x_j).amps.real
        ops = np.zeros((k, k, k))
        for d in range(k):
            ops[d, :, d] = psi * scale
        return ops
    if kind == "conditional":
        return (_branch_operator(f, x_j, np.ones(f)) * scale)[None]
    if kind == "handoff":
        x_i = vectors[graph.samples[i]]
        return (_branch_operator(f, x_j, x_i) * scale)[None]
    raise WalkError(f"unknown transition kind {kind!r}")


def injection_operator(sample) -> np.ndarray:
    """Places ``sample`` on the ancilla-1 branch of a freshly provided state.

    The provided state carries the first feature basis vector on that
    branch, which the summed bra maps to ``sample`` with unit weight.
    """
    sample = np.asarray(sample, dtype=float)
    return _branch_operator(sample.size, sample, np.ones(sample.size))


def provided_state(test) -> StateVector:
    """(|0>|test> + |1>|e_0>) / sqrt(2), the state handed to the first agent."""
    t = np.asarray(test, dtype=float)
    ref = np.zeros_like(t)
    ref[0] = 1
    return StateVector(np.concatenate([t, ref]) / sqrt(2))


@dataclass(eq=False)
class TransitionSet:
    graph: WalkGraph
    kind: str
    kraus: dict
    _src: np.ndarray = field(init=False, repr=False)
    _left: np.ndarray = field(init=False, repr=False)
    _right: np.ndarray | None = field(init=False, repr=False)
    _scatter: sparse.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        missing = [e for e in self.graph.edges if e not in self.kraus]
        if missing:
            raise WalkError(f"missing Kraus operator for edge {missing[0]}")
        edges = self.graph.edges
        self._src = np.array([i for i, _ in edges])
        dst = np.array([j for _, j in edges])
        # vec(K rho K^dag) = (K kron conj(K)) vec(rho) for row-major vec
        superop = np.stack([
            sum(np.kron(op, op.conj()) for op in self.kraus[e]) for e in edges
        ])
        # reset edges have rank-one superoperators; apply low-rank ones factored
        u, sv, vt = np.linalg.svd(superop)
        rank = int(np.max(np.sum(sv > 1e-13 * sv[:, :1], axis=1)))
        if rank <= superop.shape[1] // 4:
            self._left = u[:, :, :rank] * sv[:, None, :rank]
            self._right = vt[:, :rank, :]
        else:
            self._left, self._right = superop, None
        self._scatter = sparse.csr_matrix(
            (np.ones(len(edges)), (dst, np.arange(len(edges)))),
            shape=(self.graph.n, len(edges)),
        )

    @property
    def dim(self) -> int:
        return next(iter(self.kraus.values())).shape[-1]

    def completeness_deviation(self) -> np.ndarray:
        """Per node: max |sum_j K_ij^dag K_ij - 1|."""
        k = self.dim
        dev = np.zeros(self.graph.n)
        for i, nb in enumerate(self.graph.neighbors):
            acc = sum(op.conj().T @ op for j in nb for op in self.kraus[(i, j)])
            dev[i] = np.max(np.abs(acc - np.eye(k)))
        return dev


def build_transitions(graph: WalkGraph, kind: str, vectors, test=None) -> TransitionSet:
    if kind not in KINDS:
        raise WalkError(f"unknown transition kind {kind!r}")
    ops = {e: kraus_for_edge(graph, e, kind, vectors, test) for e in graph.edges}
    return TransitionSet(graph, kind, ops)


# Walk states


@dataclass(frozen=True, eq=False)
class WalkState:
    blocks: np.ndarray       # (n, k, k)
    deficit: float = 0.0     # trace lost in the step that produced this state

    def __post_init__(self):
        b = np.array(self.blocks)
        if np.iscomplexobj(b) and not np.any(b.imag):
            b = b.real.copy()
        if b.ndim != 3 or b.shape[1] != b.shape[2]:
            raise WalkError("blocks must have shape (n, k, k)")
        b.flags.writeable = False
        object.__setattr__(self, "blocks", b)

    @property
    def trace(self) -> float:
        return float(np.einsum("ikk->", self.blocks).real)


def point_state(n: int, position: int, internal: StateVector) -> WalkState:
    k = internal.dim
    amps = internal.amps.real if not np.any(internal.amps.imag) else internal.amps
    blocks = np.zeros((n, k, k), dtype=amps.dtype)
    blocks[position] = np.outer(amps, amps.conj())
    return WalkState(blocks)


def initial_state(graph: WalkGraph, start: int, kind: str, vectors, test) -> WalkState:
    """Walker at ``start`` holding the comparison state for that node."""
    vectors = np.asarray(vectors, dtype=float)
    x_start = vectors[graph.samples[start]]
    if kind == "reset":
        internal = comparison_state(test, x_start)
    else:
        amps = injection_operator(x_start) @ provided_state(test).amps
        internal = StateVector(amps)
    return point_state(graph.n, start, internal)


def walk_step(state: WalkState, transitions: TransitionSet) -> WalkState:
    """One application of the walk channel.

    block_j' = sum_{i -> j} sum_K K block_i K^dag. Cross-position coherences
    never appear, so only diagonal blocks are stored. Non trace-preserving
    kinds are renormalized and the lost trace is reported as ``deficit``.
    """
    n, k, _ = state.blocks.shape
    if n != transitions.graph.n or k != transitions.dim:
        raise WalkError("walk state does not match the transition set")
    vec = state.blocks.reshape(n, k * k)
    out = vec[transitions._src][:, :, None]
    if transitions._right is not None:
        out = np.matmul(transitions._right, out)
    out = np.matmul(transitions._left, out)[:, :, 0]
    new = np.asarray(transitions._scatter @ out).reshape(n, k, k)
    tr = float(np.einsum("ikk->", new).real)
    deficit = state.trace - tr
    if transitions.kind == "conditional":
        if tr <= 0:
            raise WalkError("walk state annihilated by conditional transitions")
        new = new / tr * state.trace
    return WalkState(new, deficit)


def position_marginal(state: WalkState) -> np.ndarray:
    return np.einsum("ikk->i", state.blocks).real.copy()


def _post_selection_effect(f: int) -> np.ndarray:
    """(H x 1)(|0><0| x 1)(H x 1): the effect of reading ancilla 0 after the Hadamard."""
    return np.kron(np.full((2, 2), 0.5), np.eye(f))


def outcome_joint(state: WalkState, graph: WalkGraph, classes: Sequence) -> np.ndarray:
    """p(0, y) if the walker were interfered and measured now."""
    k = state.blocks.shape[1]
    eff = _post_selection_effect(k // 2)
    per_node = np.einsum("ab,iba->i", eff, state.blocks).real
    joint = np.zeros(len(classes))
    for c, label in enumerate(classes):
        mask = np.array([y == label for y in graph.labels])
        joint[c] = per_node[mask].sum()
    return joint


def outcome_curve(graph: WalkGraph, vectors, test, kind: str = "reset", steps: int = 1,
                  start: int = 0, classes: Sequence = ()) -> np.ndarray:
    """Conditional output-class distribution after each of ``steps`` walk steps.

    Rows are t = 1..steps, columns follow ``classes``. The walk is never
    collapsed; each row is the distribution a measurement at that step
    would produce.
    """
    if steps < 1:
        raise WalkError("steps must be >= 1")
    classes = tuple(classes) or tuple(dict.fromkeys(graph.labels))
    trans = build_transitions(graph, kind, vectors, test)
    state = initial_state(graph, start, kind, vectors, test)
    rows = np.zeros((steps, len(classes)))
    for t in range(steps):
        state = walk_step(state, trans)
        joint = outcome_joint(state, graph, classes)
        rows[t] = joint / joint.sum()
    return rows


def success_curve(graph: WalkGraph, vectors, test, true_label, kind: str = "reset",
                  steps: int = 1, start: int = 0) -> np.ndarray:
    classes = tuple(dict.fromkeys(graph.labels))
    rows = outcome_curve(graph, vectors, test, kind, steps, start, classes)
    return rows[:, classes.index(true_label)]


def marginal_trajectory(graph: WalkGraph, vectors, steps: int, start: int = 0,
                        kind: str = "reset", test=None) -> np.ndarray:
    """Position marginals for t = 1..steps computed with the block engine."""
    vectors = np.asarray(vectors, dtype=float)
    test = vectors[graph.samples[start]] if test is None else test
    trans = build_transitions(graph, kind, vectors, test)
    state = initial_state(graph, start, kind, vectors, test)
    out = np.zeros((steps, graph.n))
    for t in range(steps):
        state = walk_step(state, trans)
        out[t] = position_marginal(state)
    return out


def class_success_curves(graph: WalkGraph, vectors, labels: Sequence, steps: int,
                         start: int = 0, kind: str = "reset") -> tuple[tuple, np.ndarray]:
    """Per-class mean probability of the correct output at each step.

    Every sample of ``vectors`` is used as a test against the nodes of
    ``graph``. For reset and handoff transitions each node's block is its
    comparison state scaled by the position weight, so the walk is run once
    for the marginals and the per-node post-selection probabilities are
    applied to every test. Conditional transitions depend on the test
    through renormalization and are simulated per test.
    """
    vectors = np.asarray(vectors, dtype=float)
    labels = list(labels)
    classes = tuple(dict.fromkeys(labels))
    label_idx = np.array([classes.index(y) for y in labels])
    curves = np.zeros((steps, len(classes)))

    if kind in ("reset", "handoff"):
        marg = marginal_trajectory(graph, vectors, steps, start, kind)
        node_x = vectors[list(graph.samples)]
        node_c = np.array([classes.index(y) for y in graph.labels])
        p0 = np.clip((1 + vectors @ node_x.T) / 2, 0, 1)          # (tests, nodes)
        for c in range(len(classes)):
            tests = label_idx == c
            num = marg[:, node_c == c] @ p0[tests][:, node_c == c].T   # (T, tests)
            den = marg @ p0[tests].T
            curves[:, c] = (num / den).mean(axis=1)
        return classes, curves

    for c in range(len(classes)):
        tests = np.flatnonzero(label_idx == c)
        acc = np.zeros(steps)
        for t in tests:
            acc += success_curve(graph, vectors, vectors[t], classes[c], kind, steps, start)
        curves[:, c] = acc / len(tests)
    return classes, curves


def channel_limit(graph: WalkGraph, vectors, labels: Sequence) -> np.ndarray:
    """Per-class mean correct-output probability of the channel model over the graph's nodes."""
    vectors = np.asarray(vectors, dtype=float)
    classes = tuple(dict.fromkeys(labels))
    train = TrainingSet(vectors[list(graph.samples)], graph.labels, classes)
    out = np.zeros(len(classes))
    for c, label in enumerate(classes):
        vals = [class_distribution(x, train)[label]
                for x, y in zip(vectors, labels) if y == label]
        out[c] = np.mean(vals)
    return out


def stationary_distribution(graph: WalkGraph) -> np.ndarray:
    p = graph.transition_matrix()
    w, v = np.linalg.eig(p.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1))])
    return pi / pi.sum()


def mixing_time(graph: WalkGraph, start: int = 0, eps: float = 0.25,
                max_steps: int = 1_000_000) -> int:
    """First t with total-variation distance <= eps from stationarity."""
    p = graph.transition_matrix()
    pi = stationary_distribution(graph)
    m = np.zeros(graph.n)
    m[start] = 1
    for t in range(1, max_steps + 1):
        m = m @ p
        if 0.5 * np.abs(m - pi).sum() <= eps:
            return t
    raise WalkError(f"walk did not mix within {max_steps} steps (periodic graph?)")


# Multi-agent protocol


class Agent:
    """Holds a private share of the training set.

    The walker state enters and leaves through ``receive`` and ``release``;
    both only touch this agent's own samples.
    """

    def __init__(self, agent_id: Hashable, vectors, labels: Sequence):
        self.id = agent_id
        self._vectors = np.asarray(vectors, dtype=float)
        self._labels = list(labels)
        if self._vectors.ndim != 2 or len(self._labels) != len(self._vectors) or not self._labels:
            raise WalkError(f"agent {agent_id!r} needs at least one labeled sample")
        self._placed: int | None = None

    def __len__(self):
        return len(self._labels)

    @property
    def label(self):
        if self._placed is None:
            raise WalkError(f"agent {self.id!r} holds no walker")
        return self._labels[self._placed]

    def receive(self, state: StateVector, rng: np.random.Generator) -> StateVector:
        """Prepare one of this agent's samples from the reference basis state."""
        self._placed = int(rng.integers(len(self._labels)))
        op = injection_operator(self._vectors[self._placed])
        return StateVector(op @ state.amps)

    def release(self, state: StateVector) -> StateVector:
        """Rotate the placed sample back to the reference basis state."""
        x = self._vectors[self._placed]
        ref = np.zeros_like(x)
        ref[0] = 1
        self._placed = None
        return StateVector(_branch_operator(x.size, ref, x) @ state.amps)

    def discard(self):
        self._placed = None


def make_agents(train: TrainingSet, partition: Sequence[Sequence[int]]) -> list[Agent]:
    flat = sorted(k for part in partition for k in part)
    if flat != list(range(train.M)):
        raise WalkError("agents must partition the training indices")
    return [Agent(a, train.vectors[list(part)], [train.labels[k] for k in part])
            for a, part in enumerate(partition)]


@dataclass
class DistributedRun:
    hops: list = field(default_factory=list)   # agent ids, first entry is the injecting agent
    outcome: int | None = None


@dataclass
class DistributedResult:
    label: Hashable | None
    succeeded: bool
    runs: list[DistributedRun]


def run_distributed(agents: Sequence[Agent], test, seed=None,
                    stop: int | Callable[[int, Hashable], bool] = 1,
                    graph: WalkGraph | None = None, start: int | None = None,
                    max_hops: int = 10_000, max_restarts: int = 1000) -> DistributedResult:
    """Classify ``test`` by walking a comparison state between agents.

    A fresh state is provided to the start agent (uniformly random unless
    ``start`` is given), which places one of its samples. The walker then
    hops to uniformly random graph neighbors until ``stop`` (a hop count or
    a predicate of (hops, current agent id)) holds. The ancilla is then
    interfered and measured; outcome 1 restarts from a fresh state.
    """
    if graph is None:
        n = len(agents)
        graph = WalkGraph(tuple(range(n)), tuple(range(n)),
                          tuple(tuple(j for j in range(n) if j != i) or (i,) for i in range(n)))
    if graph.n != len(agents):
        raise WalkError("graph must have one node per agent")
    done = (lambda h, _a: h >= stop) if isinstance(stop, int) else stop
    rng = np.random.default_rng(seed)
    test = np.asarray(test, dtype=float)
    runs = []

    for _ in range(max_restarts + 1):
        run = DistributedRun()
        runs.append(run)
        pos = int(rng.integers(graph.n)) if start is None else start
        state = agents[pos].receive(provided_state(test), rng)
        run.hops.append(agents[pos].id)
        hops = 0
        while not done(hops, agents[pos].id):
            if hops >= max_hops:
                raise WalkError(f"stop condition not reached within {max_hops} hops")
            nxt = graph.neighbors[pos][int(rng.integers(len(graph.neighbors[pos])))]
            state = agents[pos].release(state)
            state = agents[nxt].receive(state, rng)
            pos = nxt
            hops += 1
            run.hops.append(agents[pos].id)

        state = qstate.apply(state, qstate.hadamard(), [0])
        zero, _ = qstate.measure_qubit(state, 0)
        run.outcome = 0 if rng.random() < zero.probability else 1
        if run.outcome == 0:
            return DistributedResult(agents[pos].label, True, runs)
        agents[pos].discard()
    return DistributedResult(None, False, runs)
