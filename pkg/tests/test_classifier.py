import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdbc.classifier import (TrainingSet, ZeroSuccessProbability, ancilla_branches,
                             class_distribution, loocv_report, sample_classify,
                             success_probability, superposition_distribution)


def unit(rng, d):
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)


T = np.array([0.6, 0.8])


def test_success_probability_extremes():
    assert success_probability(T, T) == pytest.approx(1)
    assert success_probability(T, [-0.8, 0.6]) == pytest.approx(0.5)
    assert success_probability(T, -T) == pytest.approx(0)


def test_success_probability_matches_branch():
    rng = np.random.default_rng(3)
    t, s = unit(rng, 4), unit(rng, 4)
    zero, _ = ancilla_branches(t, s)
    assert success_probability(t, s) == pytest.approx(zero.probability, abs=1e-12)
    zero_c, _ = ancilla_branches(t, s, prep="circuit")
    assert zero_c.probability == pytest.approx(zero.probability, abs=1e-10)


def test_single_sample_distribution():
    d = class_distribution(T, TrainingSet([T], ("A",)))
    assert d.joint[0] == pytest.approx(1) and d["A"] == pytest.approx(1)


def test_antipodal_sample_contributes_nothing():
    d = class_distribution(T, TrainingSet([T, -T], ("A", "B")))
    assert d.joint == pytest.approx([0.5, 0])
    assert d["A"] == pytest.approx(1)
    assert d.argmax() == "A"


def test_zero_success_is_explicit():
    d = class_distribution(T, TrainingSet([-T], ("B",)))
    assert d.total == 0 and d.conditional is None
    with pytest.raises(ZeroSuccessProbability):
        d["B"]


def test_training_set_validation():
    with pytest.raises(ValueError):
        TrainingSet([[1.0, 1.0]], ("A",))
    with pytest.raises(ValueError):
        TrainingSet([T], ("A", "B"))
    with pytest.raises(ValueError):
        TrainingSet([T], ("A",), ("B",))
    ts = TrainingSet.from_pairs([(T, "A"), (-T, "B")])
    assert ts.M == 2 and ts.classes == ("A", "B")
    assert ts.without(0).labels == ("B",) and ts.without(0).classes == ("A", "B")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 3))
def test_channel_equals_superposition(seed, m, n_classes):
    rng = np.random.default_rng(seed)
    x = np.array([unit(rng, 2) for _ in range(m)])
    classes = tuple("ABC"[:n_classes])
    labels = tuple(classes[int(k)] for k in rng.integers(n_classes, size=m))
    train = TrainingSet(x, labels, classes)
    t = unit(rng, 2)
    a = class_distribution(t, train)
    b = superposition_distribution(t, train)
    assert np.allclose(a.joint, b.joint, atol=1e-12)
    assert a.total == pytest.approx(a.joint.sum())
    assert a.conditional.sum() == pytest.approx(1, abs=1e-12)


def test_sample_classify_certain_success():
    tr = sample_classify(T, TrainingSet([T], ("A",)), seed=7)
    assert tr.succeeded and tr.attempts == 1 and tr.final_label == "A"


def test_sample_classify_exhaustion():
    tr = sample_classify(T, TrainingSet([-T], ("B",)), seed=7, max_attempts=25)
    assert not tr.succeeded and tr.final_label is None and tr.attempts == 25


def test_sample_classify_transcript_consistency():
    rng = np.random.default_rng(0)
    x = np.array([unit(rng, 2) for _ in range(5)])
    train = TrainingSet(x, ("A", "B", "A", "B", "B"))
    for seed in range(50):
        tr = sample_classify(unit(rng, 2), train, seed=seed)
        assert len(tr.sampled_indices) == tr.attempts
        if tr.succeeded:
            assert tr.final_label == train.labels[tr.sampled_indices[-1]]


def test_sample_classify_is_seeded():
    train = TrainingSet([T, [1.0, 0.0]], ("A", "B"))
    a = sample_classify([0, 1.0], train, seed=11)
    b = sample_classify([0, 1.0], train, seed=11)
    assert a == b


def test_sample_classify_frequencies():
    train = TrainingSet([[1.0, 0.0], [0.0, 1.0]], ("A", "B"))
    test = np.array([0.6, 0.8])
    exact = class_distribution(test, train)["A"]
    rng = np.random.default_rng(2024)
    n = 5000
    hits = sum(sample_classify(test, train, seed=int(s)).final_label == "A"
               for s in rng.integers(2**32, size=n))
    sigma = np.sqrt(exact * (1 - exact) / n)
    assert abs(hits / n - exact) < 4 * sigma


def test_loocv_small_oracle():
    rng = np.random.default_rng(9)
    x = np.array([unit(rng, 4) for _ in range(8)])
    labels = ("A", "A", "A", "B", "B", "B", "C", "C")
    tab = loocv_report(x, labels)
    classes = ("A", "B", "C")
    # independent fold loop with class_distribution
    cond = np.zeros((3, 3))
    post = np.zeros((3, 3))
    for c in range(3):
        rows_c, rows_p = [], []
        for k, y in enumerate(labels):
            if y != classes[c]:
                continue
            train = TrainingSet(np.delete(x, k, axis=0), labels[:k] + labels[k + 1:], classes)
            rows_c.append(class_distribution(x[k], train).conditional)
            p0 = [(1 + x[k] @ x[j]) / 2 for j in range(8) if j != k]
            ys = [labels[j] for j in range(8) if j != k]
            rows_p.append([np.mean([p for p, yy in zip(p0, ys) if yy == cc]) for cc in classes])
        cond[c] = np.mean(rows_c, axis=0)
        post[c] = np.mean(rows_p, axis=0)
    assert np.allclose(tab.conditional, cond, atol=1e-12)
    assert np.allclose(tab.postselection, post, atol=1e-12)
    assert np.allclose(tab.conditional.sum(axis=1), 1, atol=1e-12)
    assert np.array_equal(tab.success, np.diag(tab.conditional))


def test_loocv_needs_two_per_class():
    with pytest.raises(ValueError):
        loocv_report([[1.0, 0], [0, 1.0], [0.6, 0.8]], ("A", "A", "B"))
