import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdbc import qstate
from qdbc.qstate import StateError, StateVector

S2 = 1 / np.sqrt(2)


def random_state(rng, n):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return StateVector.normalized(v)


def test_hadamard_on_zero():
    out = qstate.apply(StateVector.basis(0, 1), qstate.hadamard(), [0])
    assert np.allclose(out.amps, [S2, S2])


def test_ry_quarter_turn():
    out = qstate.apply(StateVector.basis(0, 1), qstate.ry(np.pi / 2), [0])
    assert np.allclose(out.amps, [0, 1])


def test_cnot_flips_target():
    out = qstate.apply(StateVector.basis(0b10, 2), qstate.cnot(), [0, 1])
    assert np.allclose(out.amps, StateVector.basis(0b11, 2).amps)


def test_cnot_control_order():
    # control is the first listed target
    out = qstate.apply(StateVector.basis(0b01, 2), qstate.cnot(), [1, 0])
    assert np.allclose(out.amps, StateVector.basis(0b11, 2).amps)


def test_apply_h_leftmost_qubit():
    out = qstate.apply(StateVector.zeros(2), qstate.hadamard(), [0])
    assert np.allclose(out.amps, [S2, 0, S2, 0])


def test_interference_yields_sum_and_difference():
    t = np.array([0.6, 0.8])
    s = np.array([1.0, 0.0])
    psi = StateVector(np.concatenate([t, s]) * S2)
    out = qstate.apply(psi, qstate.hadamard(), [0])
    assert np.allclose(out.amps, np.concatenate([t + s, t - s]) / 2)


def test_apply_then_inverse_restores():
    rng = np.random.default_rng(1)
    s = random_state(rng, 3)
    u = qstate.ry(0.7) @ qstate.hadamard()
    back = qstate.apply(qstate.apply(s, u, [1]), u.conj().T, [1])
    assert np.allclose(back.amps, s.amps, atol=1e-12)


def test_standard_gates_unitary():
    gates = qstate.standard_gates()
    assert set(gates) == {"H", "X", "Ry", "CNOT"}
    for name, g in gates.items():
        u = g(0.3) if name == "Ry" else g()
        assert qstate.is_unitary(u)


def test_tensor_basics():
    assert np.allclose(qstate.tensor(StateVector.basis(0, 1), StateVector.basis(1, 1)).amps,
                       StateVector.basis(1, 2).amps)
    phi = 0.4
    a = qstate.apply(StateVector.basis(0, 1), qstate.ry(phi), [0])
    out = qstate.tensor(a, StateVector.basis(0, 1))
    assert np.allclose(out.amps, [np.cos(phi), 0, np.sin(phi), 0])


def test_inner_products():
    z, o = StateVector.basis(0, 1), StateVector.basis(1, 1)
    assert qstate.inner(z, z) == pytest.approx(1)
    assert qstate.inner(z, o) == pytest.approx(0)
    a = StateVector(np.array([0.6, 0.8]))
    b = StateVector(np.array([0.8, 0.6]))
    assert qstate.inner(a, b) == pytest.approx(0.96)


def test_inner_conjugates_first():
    a = StateVector(np.array([1j, 0]))
    b = StateVector(np.array([1, 0]))
    assert qstate.inner(a, b) == pytest.approx(-1j)


def test_measure_plus_state():
    zero, one = qstate.measure_qubit(StateVector(np.array([S2, S2])), 0)
    assert zero.probability == pytest.approx(0.5)
    assert one.probability == pytest.approx(0.5)


def test_measure_interfered_state():
    t = np.array([0.6, 0.8])
    s = np.array([S2, -S2])
    psi = qstate.apply(StateVector(np.concatenate([t, s]) * S2), qstate.hadamard(), [0])
    zero, one = qstate.measure_qubit(psi, 0)
    assert zero.probability == pytest.approx(np.sum((t + s) ** 2) / 4, abs=1e-12)
    post = qstate.remove_qubit(one.post_state, 0, 1)
    assert np.allclose(post.amps, (t - s) / np.linalg.norm(t - s))


def test_zero_probability_branch_has_no_state():
    zero, one = qstate.measure_qubit(StateVector.basis(0, 1), 0)
    assert zero.probability == 1 and one.probability == 0
    assert one.post_state is None


def test_rejects_bad_states():
    with pytest.raises(StateError):
        StateVector(np.array([1.0, 1.0]))
    with pytest.raises(StateError):
        StateVector(np.array([1.0, 0.0, 0.0]))
    with pytest.raises(StateError):
        StateVector(np.array([np.nan, 1.0]))


def test_apply_rejects_bad_targets():
    s = StateVector.zeros(2)
    with pytest.raises(StateError):
        qstate.apply(s, qstate.cnot(), [0, 0])
    with pytest.raises(StateError):
        qstate.apply(s, qstate.hadamard(), [2])
    with pytest.raises(StateError):
        qstate.apply(s, qstate.cnot(), [0])


def test_amplitudes_read_only():
    s = StateVector.zeros(1)
    with pytest.raises(ValueError):
        s.amps[0] = 0


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_measurement_probabilities_sum_to_one(n, seed):
    rng = np.random.default_rng(seed)
    s = random_state(rng, n)
    q = int(rng.integers(n))
    zero, one = qstate.measure_qubit(s, q)
    assert zero.probability + one.probability == pytest.approx(1, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**32 - 1), st.floats(-np.pi, np.pi))
def test_gates_preserve_norm(n, seed, theta):
    rng = np.random.default_rng(seed)
    s = random_state(rng, n)
    a, b = rng.choice(n, size=2, replace=False)
    out = qstate.apply(qstate.apply(s, qstate.ry(theta), [int(a)]), qstate.cnot(), [int(a), int(b)])
    assert np.linalg.norm(out.amps) == pytest.approx(1, abs=1e-12)
