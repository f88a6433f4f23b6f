import numpy as np
import pytest

from egoact.errors import ValidationError
from egoact.svm import (
    BinarySvmModel,
    decision,
    decision_many,
    kkt_residuals,
    ova_predict_scores,
    ova_train,
    predict_label,
    smo_train,
)
from oracles import random_svm_problem, svm_dual_oracle, svm_dual_value


def test_symmetric_pair():
    gram = np.array([[1.0, -1.0], [-1.0, 1.0]])  # 1-d points at +1 and -1
    y = np.array([1.0, -1.0])
    model = smo_train(gram, y, c_reg=100.0, tol=1e-9)
    assert np.allclose(model.alpha, [0.5, 0.5], atol=1e-9)
    assert model.bias == pytest.approx(0.0, abs=1e-9)
    # the midpoint (the origin) sits exactly on the boundary
    assert decision(model, np.array([0.0, 0.0])) == pytest.approx(0.0, abs=1e-9)


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(42)
    for _ in range(20):
        kernel, y, c_reg = random_svm_problem(rng)
        model = smo_train(kernel, y, c_reg, tol=1e-7)
        oracle_alpha = svm_dual_oracle(kernel, y, np.full(y.size, c_reg))
        gap = abs(model.objective - svm_dual_value(oracle_alpha, y, kernel))
        assert gap <= 1e-6
        assert kkt_residuals(model, kernel, y).max() <= 1e-3


def test_duplicating_points_keeps_decision_function():
    rng = np.random.default_rng(7)
    points = rng.normal(size=(6, 2))
    y = np.where(points[:, 0] + 0.2 * rng.normal(size=6) > 0, 1.0, -1.0)
    if abs(y.sum()) == 6:
        y[0] = -y[0]
    queries = rng.normal(size=(5, 2))
    model = smo_train(points @ points.T, y, 5.0, tol=1e-9)
    doubled = np.vstack([points, points])
    model2 = smo_train(doubled @ doubled.T, np.concatenate([y, y]), 5.0, tol=1e-9)
    base = decision_many(model, queries @ points.T)
    again = decision_many(model2, queries @ doubled.T)
    assert np.abs(base - again).max() <= 1e-6


def test_decision_with_zero_alphas_is_bias():
    model = BinarySvmModel(np.zeros(3), np.array([1.0, -1.0, 1.0]), bias=0.25,
                           c_reg=1.0, box=np.ones(3))
    assert decision(model, np.array([5.0, 6.0, 7.0])) == 0.25


def test_free_support_vectors_sit_on_margin():
    rng = np.random.default_rng(3)
    kernel, y, _ = random_svm_problem(rng, max_size=8)
    tol = 1e-6
    model = smo_train(kernel, y, c_reg=1.0, tol=tol)
    scores = decision_many(model, kernel)
    free = (model.alpha > 1e-9) & (model.alpha < model.box - 1e-9)
    assert free.any()
    assert np.abs(scores[free] - y[free]).max() <= tol * 10


def test_decision_matches_naive_resummation():
    rng = np.random.default_rng(4)
    kernel, y, c_reg = random_svm_problem(rng)
    model = smo_train(kernel, y, c_reg)
    for row in kernel:
        manual = sum(a * yi * k for a, yi, k in zip(model.alpha, model.labels, row))
        assert decision(model, row) == pytest.approx(manual + model.bias, abs=1e-12)


def test_equality_constraint_and_box():
    rng = np.random.default_rng(5)
    for _ in range(10):
        kernel, y, c_reg = random_svm_problem(rng)
        model = smo_train(kernel, y, c_reg)
        assert abs(float(model.alpha @ model.labels)) <= 1e-8
        assert model.alpha.min() >= 0.0
        assert (model.alpha <= model.box + 1e-12).all()


def test_objective_is_monotone():
    rng = np.random.default_rng(6)
    kernel, y, c_reg = random_svm_problem(rng)
    model = smo_train(kernel, y, c_reg, tol=1e-8, track_objective=True)
    history = model.objective_history
    assert len(history) >= 2
    for before, after in zip(history, history[1:]):
        assert after >= before - 1e-12


def test_weighted_boxes():
    rng = np.random.default_rng(8)
    kernel, y, _ = random_svm_problem(rng, max_size=6)
    weights = rng.random(y.size)
    weights /= weights.sum()
    model = smo_train(kernel, y, c_reg=2.0, sample_weights=weights)
    assert np.allclose(model.box, 2.0 * y.size * weights)
    assert (model.alpha <= model.box + 1e-12).all()
    with pytest.raises(ValidationError):
        smo_train(kernel, y, 2.0, sample_weights=-weights)


def test_validation_errors():
    gram = np.eye(3)
    with pytest.raises(ValidationError):
        smo_train(gram, np.array([1.0, 1.0, 1.0]), 1.0)     # single class
    with pytest.raises(ValidationError):
        smo_train(gram, np.array([1.0, -1.0]), 1.0)         # size mismatch
    with pytest.raises(ValidationError):
        smo_train(gram, np.array([1.0, -1.0, 0.5]), 1.0)    # bad label value
    with pytest.raises(ValidationError):
        smo_train(gram, np.array([1.0, -1.0, 1.0]), 0.0)    # bad C
    model = smo_train(gram, np.array([1.0, -1.0, 1.0]), 1.0)
    with pytest.raises(ValidationError):
        decision(model, np.zeros(4))


def test_predict_label_zero_goes_positive():
    assert predict_label(0.0) == 1
    assert predict_label(-1e-12) == -1


def _clusters(rng, centers, per=8, spread=0.3):
    points, labels = [], []
    for k, center in enumerate(centers):
        points.append(center + spread * rng.normal(size=(per, 2)))
        labels += [k] * per
    return np.vstack(points), np.array(labels)


def _gaussian_gram(a, b, sigma=1.0):
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
    return np.exp(-d2 / (2 * sigma * sigma))


def test_ova_two_class_agrees_with_binary_sign():
    rng = np.random.default_rng(9)
    points, labels = _clusters(rng, [np.array([0.0, 0.0]), np.array([3.0, 0.0])])
    gram = _gaussian_gram(points, points)
    ova = ova_train(labels, ["a", "b"], lambda y_pm, k: smo_train(gram, y_pm, 10.0))
    scores = np.stack([decision_many(m, gram) for m in ova.models], axis=1)
    predicted = ova_predict_scores(scores)
    binary = smo_train(gram, np.where(labels == 0, 1.0, -1.0), 10.0)
    signs = decision_many(binary, gram) >= 0
    assert np.array_equal(predicted == 0, signs)


def test_ova_three_separated_clusters():
    rng = np.random.default_rng(10)
    centers = [np.array([0.0, 0.0]), np.array([5.0, 0.0]), np.array([0.0, 5.0])]
    points, labels = _clusters(rng, centers)
    gram = _gaussian_gram(points, points)
    ova = ova_train(labels, ["a", "b", "c"], lambda y_pm, k: smo_train(gram, y_pm, 10.0))
    scores = np.stack([decision_many(m, gram) for m in ova.models], axis=1)
    assert np.array_equal(ova_predict_scores(scores), labels)


def test_ova_tie_breaks_to_lowest_class():
    scores = np.zeros((3, 4))
    assert np.array_equal(ova_predict_scores(scores), np.zeros(3, dtype=np.int64))


def test_ova_requires_every_class():
    with pytest.raises(ValidationError):
        ova_train(np.array([0, 0, 1, 1]), ["a", "b", "c"], lambda y, k: None)
    with pytest.raises(ValidationError):
        ova_train(np.array([0, 0]), ["a"], lambda y, k: None)
