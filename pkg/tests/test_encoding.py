import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdbc import qstate
from qdbc.encoding import (TEMPLATE_2F, TEMPLATE_4F, PreprocessError, Scaler, SynthesisError,
                           circuit_fidelity, comparison_state, encode, interference_state,
                           kernel_classify, prep_angles, prep_circuit, prep_circuit_2f,
                           prep_circuit_4f, preprocess)
from qdbc.qstate import StateVector

S2 = 1 / np.sqrt(2)


def unit(rng, d):
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)


def direct_interfered(t, s):
    # independent construction: (|0>(t+s) + |1>(t-s)) / 2
    return np.concatenate([t + s, t - s]) / 2


def test_normalize_only():
    assert np.allclose(preprocess([[3, 4]], "normalize"), [[0.6, 0.8]])


def test_standardize_symmetric_pair():
    sc = Scaler.fit([[1, 0], [-1, 2]], "standardize")
    z = (np.array([[1, 0], [-1, 2]]) - sc.shift) / sc.scale
    assert np.allclose(z[:, 0], [1, -1])


def test_minmax_maps_to_unit_interval():
    raw = np.array([[0.0, 10.0], [2.0, 20.0], [1.0, 30.0]])
    sc = Scaler.fit(raw, "minmax")
    z = (raw - sc.shift) / sc.scale
    assert np.allclose(z.min(axis=0), -1) and np.allclose(z.max(axis=0), 1)


def test_zero_vector_rejected_with_index():
    with pytest.raises(PreprocessError, match="zero vector") as exc:
        preprocess([[1, 1], [0, 0]], "normalize")
    assert exc.value.index == 1


def test_zero_variance_feature_rejected():
    with pytest.raises(PreprocessError) as exc:
        preprocess([[1, 2], [1, 3]], "standardize")
    assert exc.value.index == 0


def test_unknown_mode_and_complex_rejected():
    with pytest.raises(PreprocessError):
        preprocess([[1, 2]], "zscore")
    with pytest.raises(PreprocessError):
        preprocess(np.array([[1 + 1j, 2]]), "normalize")


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["normalize", "standardize", "minmax"]), st.integers(0, 2**32 - 1))
def test_preprocess_gives_unit_rows(mode, seed):
    raw = np.random.default_rng(seed).normal(size=(12, 4)) + 0.5
    out = preprocess(raw, mode)
    assert np.allclose(np.linalg.norm(out, axis=1), 1, atol=1e-12)


def test_encode_examples():
    assert np.allclose(encode([0.6, 0.8]).amps, [0.6, 0.8])
    assert encode([1, 0, 0, 0]).num_qubits == 2
    assert np.allclose(encode([0.5] * 4).amps, 0.5)


def test_encode_rejects_bad_input():
    with pytest.raises(ValueError):
        encode([1, 1])
    with pytest.raises(ValueError):
        encode([1, 0, 0])
    with pytest.raises(ValueError):
        encode(np.array([1j, 0]))


def test_comparison_state_examples():
    same = comparison_state([1, 0], [1, 0])
    assert np.allclose(same.amps, [S2, 0, S2, 0])
    cross = comparison_state([1, 0], [0, 1])
    assert np.allclose(cross.amps, [S2, 0, 0, S2])
    zero, one = qstate.measure_qubit(cross, 0)
    assert zero.probability == pytest.approx(0.5)


def test_prep_angles_at_origin():
    a1, a2 = prep_angles(0, 0)
    assert a1 == pytest.approx(np.pi / 4) and a2 == pytest.approx(-np.pi / 4)


def test_prep_2f_equal_angles_before_final_h():
    phi = 0.37
    out = prep_circuit_2f(phi, phi).without_final_h().run()
    expect = np.kron([S2, S2], [np.cos(phi), np.sin(phi)])
    assert np.allclose(out.amps, expect, atol=1e-12)


def test_prep_2f_layout():
    c = prep_circuit_2f(0.1, 0.2)
    assert c.layout() == TEMPLATE_2F
    assert [g.kind for g in c.gates] == ["Ry", "H", "CNOT", "Ry", "H"]


@settings(max_examples=100, deadline=None)
@given(st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi))
def test_prep_2f_fidelity(phi_t, phi_m):
    t = np.array([np.cos(phi_t), np.sin(phi_t)])
    s = np.array([np.cos(phi_m), np.sin(phi_m)])
    out = prep_circuit_2f(phi_t, phi_m).run().amps
    assert abs(np.vdot(direct_interfered(t, s), out)) == pytest.approx(1, abs=1e-10)


def test_prep_4f_basis_pair():
    e0 = np.array([1.0, 0, 0, 0])
    out = prep_circuit_4f(e0, e0).without_final_h().run()
    expect = np.kron([S2, S2], e0)
    assert abs(np.vdot(expect, out.amps)) == pytest.approx(1, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_prep_4f_extended_fidelity(seed):
    rng = np.random.default_rng(seed)
    t, s = unit(rng, 4), unit(rng, 4)
    out = prep_circuit_4f(t, s).run().amps
    assert abs(np.vdot(direct_interfered(t, s), out)) == pytest.approx(1, abs=1e-10)


def test_prep_4f_feature_register_census():
    rng = np.random.default_rng(0)
    c = prep_circuit_4f(unit(rng, 4), unit(rng, 4))
    low = c.census([2])
    assert low["Ry"] == 4 and low["CNOT"] == 3


def test_fixed_template_balanced_pairs():
    rng = np.random.default_rng(5)

    def balanced():
        a, b = unit(rng, 2), unit(rng, 2)
        return np.concatenate([a, b]) * S2

    t, s = balanced(), balanced()
    c = prep_circuit_4f(t, s, template="fixed")
    assert c.layout() == TEMPLATE_4F
    assert circuit_fidelity(c, interference_state(t, s)) == pytest.approx(1, abs=1e-10)


def test_fixed_template_reports_residual():
    t = np.array([1.0, 0, 0, 0])
    s = np.array([0, 0, 0, 1.0])
    with pytest.raises(SynthesisError) as exc:
        prep_circuit_4f(t, s, template="fixed")
    assert 0 < exc.value.fidelity < 1 - 1e-10


def test_prep_circuit_dispatch_and_errors():
    assert prep_circuit([1, 0], [0, 1]).num_qubits == 2
    assert prep_circuit([1, 0, 0, 0], [0, 1, 0, 0]).num_qubits == 3
    with pytest.raises(ValueError):
        prep_circuit([1, 0], [1, 0, 0, 0])
    with pytest.raises(ValueError):
        prep_circuit_4f([1, 0, 0, 0], [1, 0, 0, 0], template="other")


def test_circuit_unitary_matches_run():
    c = prep_circuit_2f(0.3, -1.1)
    u = c.unitary()
    assert qstate.is_unitary(u)
    assert np.allclose(u[:, 0], c.run().amps)


def test_kernel_examples():
    assert kernel_classify([1, 0], [[1, 0]], [1]) == 1
    assert kernel_classify([0.6, 0.8], [[1, 0], [0, 1]], [1, -1]) == -1
    assert kernel_classify([S2, S2], [[1, 0], [0, 1]], [1, -1]) == 0


def test_kernel_rejects_bad_labels():
    with pytest.raises(ValueError):
        kernel_classify([1, 0], [[1, 0]], [2])
