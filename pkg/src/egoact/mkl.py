"""Reduced-gradient multiple kernel learning over a fixed kernel bank.

Kernel weights live on the probability simplex. Each outer iteration
trains an SVM on the weighted kernel combination, evaluates the gradient
of the optimal dual value with respect to the weights, forms the reduced
gradient against the largest-weight coordinate, and walks a halving line
search along the projected descent direction, accepting only objective
decreases that keep the weights nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .kernels import KernelBank, check_simplex, combine, combine_rows
from .svm import BinarySvmModel, decision, decision_many, smo_train


@dataclass(frozen=True)
class MklParams:
    c_reg: float = 10.0
    svm_tol: float = 1e-3
    weight_tol: float = 1e-4       # stop when max |delta c| falls below
    objective_tol: float = 1e-4    # ... or the relative objective change does
    max_outer: int = 200
    max_line_search: int = 30

    def __post_init__(self):
        if min(self.c_reg, self.svm_tol, self.weight_tol, self.objective_tol) <= 0:
            raise ValidationError("MKL parameters must be positive")
        if self.max_outer < 1 or self.max_line_search < 1:
            raise ValidationError("MKL iteration limits must be at least 1")


class MklModel:
    """Learned kernel weights plus the SVM trained on the combined kernel."""

    __slots__ = ("weights", "svm", "specs", "converged", "objective_history")

    def __init__(self, weights, svm: BinarySvmModel, specs, converged: bool,
                 objective_history=None):
        self.weights = check_simplex(weights, len(weights))
        self.svm = svm
        self.specs = list(specs)
        self.converged = bool(converged)
        self.objective_history = objective_history if objective_history is not None else []

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "svm": self.svm.to_dict(),
            "converged": self.converged,
        }

    @staticmethod
    def from_dict(doc: dict, specs=()) -> "MklModel":
        return MklModel(
            np.asarray(doc["weights"], dtype=np.float64),
            BinarySvmModel.from_dict(doc["svm"]),
            specs,
            doc.get("converged", True),
        )


def _weight_gradient(bank_matrices: np.ndarray, svm: BinarySvmModel) -> np.ndarray:
    ay = svm.alpha * svm.labels
    return -0.5 * np.einsum("i,mij,j->m", ay, bank_matrices, ay)


def _descent_direction(weights: np.ndarray, grad: np.ndarray) -> np.ndarray:
    # Reduced gradient against the heaviest coordinate; zero-weight
    # coordinates may only move up.
    anchor = int(np.argmax(weights))
    reduced = grad - grad[anchor]
    direction = -reduced
    direction[(weights <= 0.0) & (direction < 0.0)] = 0.0
    direction[anchor] = 0.0
    direction[anchor] = -direction.sum()
    return direction


def simple_mkl_train(bank: KernelBank, y, params: MklParams = MklParams()) -> MklModel:
    """Jointly optimize simplex kernel weights and the SVM on their combination."""
    m = len(bank)
    y = np.asarray(y, dtype=np.float64)
    matrices = bank.matrices()
    weights = np.full(m, 1.0 / m)

    svm = smo_train(combine(bank, weights), y, params.c_reg, tol=params.svm_tol)
    objective = svm.objective
    history = [objective]
    converged = False

    for _ in range(params.max_outer):
        grad = _weight_gradient(matrices, svm)
        direction = _descent_direction(weights, grad)
        if np.max(np.abs(direction)) <= 1e-14:
            converged = True
            break

        negative = direction < 0.0
        step = float(np.min(-weights[negative] / direction[negative]))
        accepted = None
        for _ in range(params.max_line_search):
            trial = np.maximum(weights + step * direction, 0.0)
            trial /= trial.sum()
            trial_svm = smo_train(combine(bank, trial), y, params.c_reg, tol=params.svm_tol)
            if trial_svm.objective < objective:
                accepted = (trial, trial_svm)
                break
            step /= 2.0
        if accepted is None:
            converged = True
            break

        new_weights, new_svm = accepted
        new_weights = check_simplex(new_weights, m)
        delta_w = float(np.max(np.abs(new_weights - weights)))
        delta_obj = objective - new_svm.objective
        weights, svm, objective = new_weights, new_svm, new_svm.objective
        history.append(objective)
        if delta_w < params.weight_tol or delta_obj <= params.objective_tol * abs(objective):
            converged = True
            break

    return MklModel(weights, svm, bank.specs, converged, history)


def mkl_predict(model: MklModel, k_rows) -> float:
    """Decision value from per-kernel rows of kernel values to the training set."""
    k_rows = np.asarray(k_rows, dtype=np.float64)
    if k_rows.ndim != 2 or k_rows.shape[0] != model.weights.size:
        raise ValidationError(
            f"need {model.weights.size} kernel rows, got shape {k_rows.shape}"
        )
    return decision(model.svm, combine_rows(k_rows, model.weights))


def mkl_predict_many(model: MklModel, k_rows) -> np.ndarray:
    """Vectorized scores for (M, n_items, L) stacked kernel rows."""
    k_rows = np.asarray(k_rows, dtype=np.float64)
    if k_rows.ndim != 3 or k_rows.shape[0] != model.weights.size:
        raise ValidationError(
            f"need stacked rows (M, n, L) with M={model.weights.size}, got {k_rows.shape}"
        )
    return decision_many(model.svm, combine_rows(k_rows, model.weights))
