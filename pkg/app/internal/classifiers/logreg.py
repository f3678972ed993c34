from dataclasses import dataclass
from typing import final

import numpy as np
from scipy.special import expit

from app.internal.classifiers.params import ClassWeights, Hyperparams, TrainingError
from app.util.log import logger

GRADIENT_TOLERANCE = 1e-6
DIVERGENCE_PATIENCE = 10


class DivergenceError(TrainingError):
    pass


def logistic_loss_and_grad(
    coef: np.ndarray,
    intercept: float,
    X: np.ndarray,
    y: np.ndarray,
    sample_weights: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, float]:
    """
    Mean sample-weighted logistic loss plus (l2 / 2) * ||coef||^2. The intercept is not penalized.

    Returns (loss, gradient w.r.t. coef, gradient w.r.t. intercept).
    """
    n = X.shape[0]
    margin = X @ coef + intercept
    losses = np.logaddexp(0.0, margin) - y * margin
    loss = float(np.dot(sample_weights, losses) / n + 0.5 * l2 * np.dot(coef, coef))
    residual = sample_weights * (expit(margin) - y)
    grad_coef = X.T @ residual / n + l2 * coef
    grad_intercept = float(residual.sum() / n)
    return loss, grad_coef, grad_intercept


def lipschitz_step(X: np.ndarray, sample_weights: np.ndarray, l2: float) -> float:
    """1/L where L bounds the curvature of the loss above."""
    augmented = np.hstack([X, np.ones((X.shape[0], 1))])
    sigma_max = float(np.linalg.norm(augmented, ord=2))
    lipschitz = float(sample_weights.max()) / 4.0 * sigma_max**2 / X.shape[0] + l2
    return 1.0 / lipschitz


@final
@dataclass(frozen=True)
class LogisticModel:
    coef: np.ndarray
    intercept: float
    iterations: int
    converged: bool

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coef + self.intercept

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return expit(self.decision_function(X))


def fit_logreg(
    X: np.ndarray,
    y: np.ndarray,
    weights: ClassWeights,
    params: Hyperparams,
) -> LogisticModel:
    """Class-weighted, L2-regularized logistic regression by full-batch gradient descent."""
    if X.shape[0] == 0:
        raise TrainingError("Cannot fit logistic regression on an empty training set")
    y = y.astype(np.float64)
    sample_weights = np.where(y == 1, weights.w_pos, weights.w_neg)
    step = params.lr_step or lipschitz_step(X, sample_weights, params.lr_l2)

    coef = np.zeros(X.shape[1])
    intercept = 0.0
    loss, grad_coef, grad_intercept = logistic_loss_and_grad(
        coef, intercept, X, y, sample_weights, params.lr_l2
    )
    increases = 0
    converged = False
    iteration = 0
    for iteration in range(1, params.lr_max_iter + 1):
        grad_norm = float(np.sqrt(np.dot(grad_coef, grad_coef) + grad_intercept**2))
        if grad_norm < GRADIENT_TOLERANCE:
            converged = True
            iteration -= 1
            break
        coef = coef - step * grad_coef
        intercept = intercept - step * grad_intercept
        new_loss, grad_coef, grad_intercept = logistic_loss_and_grad(
            coef, intercept, X, y, sample_weights, params.lr_l2
        )
        if not np.isfinite(new_loss):
            raise DivergenceError(
                f"Logistic loss became non-finite at iteration {iteration}; use a smaller lr_step"
            )
        increases = increases + 1 if new_loss > loss else 0
        if increases >= DIVERGENCE_PATIENCE:
            raise DivergenceError(
                f"Logistic loss increased for {DIVERGENCE_PATIENCE} consecutive steps "
                + f"(step={step:.3g}); use a smaller lr_step"
            )
        loss = new_loss

    if not converged:
        logger.debug("Logistic regression stopped at the iteration limit", iterations=iteration, loss=loss)
    return LogisticModel(coef=coef, intercept=intercept, iterations=iteration, converged=converged)
