"""Linear hinge-loss classifiers trained by mini-batch stochastic subgradient descent.

Besides the window features, each classifier sees one-hot indicators of the
power level of the centre sample (quantile bins of the training aggregate).
An appliance whose consumption sits between the levels of other appliances
(a 100 W lamp next to a 1000 W kettle) occupies a band of the power axis,
which no single hyperplane over raw watts can carve out; the indicators make
such bands linearly separable. ``level_bins=0`` turns them off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forest import apply_bins, bin_cuts


@dataclass(frozen=True)
class MarginParams:
    epochs: int = 20
    learning_rate: float = 0.01
    regularization: float = 1e-4
    batch_size: int = 32
    level_bins: int = 32

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0 or self.regularization < 0:
            raise ValueError("learning_rate must be > 0 and regularization >= 0")
        if self.level_bins == 1 or not 0 <= self.level_bins <= 256:
            raise ValueError("level_bins must be 0 or in [2, 256]")


def expand_levels(X: np.ndarray, center: int, level_cuts: np.ndarray) -> np.ndarray:
    if len(level_cuts) == 0:
        return X
    levels = apply_bins(X[:, center:center + 1], [level_cuts])[:, 0]
    return np.hstack([X, np.eye(len(level_cuts) + 1)[levels]])


@dataclass(frozen=True, eq=False)
class LinearMargin:
    """Hyperplane over standardized, level-expanded features of one appliance."""

    center: int
    level_cuts: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    weights: np.ndarray
    bias: float

    def standardized(self, X: np.ndarray) -> np.ndarray:
        return (expand_levels(X, self.center, self.level_cuts) - self.mean) / self.scale

    def decision(self, X: np.ndarray) -> np.ndarray:
        return self.standardized(X) @ self.weights + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.decision(X) > 0


def fit_standardizer(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = Z.mean(axis=0)
    std = Z.std(axis=0)
    # constant columns are centred but left unscaled
    scale = np.where(std > 1e-12 * np.maximum(1.0, np.abs(mean)), std, 1.0)
    return mean, scale


def regularized_hinge(Z: np.ndarray, signs: np.ndarray, sample_weight: np.ndarray,
                      weights: np.ndarray, bias: np.ndarray, regularization: float) -> np.ndarray:
    """Per-column objective ``lambda/2 |w|^2 + mean_i c_i max(0, 1 - y_i f(x_i))``."""
    margins = signs * (Z @ weights + bias)
    hinge = (sample_weight * np.maximum(0.0, 1.0 - margins)).mean(axis=0)
    return 0.5 * regularization * (weights**2).sum(axis=0) + hinge


def fit_margin(X: np.ndarray, Y: np.ndarray, params: MarginParams, rng: np.random.Generator,
               center: int, sample_weight: np.ndarray | None = None
               ) -> tuple[list[LinearMargin], np.ndarray]:
    """Fit one classifier per column of ``Y``; all columns share the shuffled batch order.

    Returns the classifiers and the objective of every column at each epoch
    boundary, shape ``(epochs + 1, k)``; row 0 is the untrained model.
    """
    Y = np.asarray(Y, dtype=bool)
    n, k = Y.shape
    level_cuts = bin_cuts(X[:, center:center + 1], params.level_bins)[0] if params.level_bins else np.empty(0)
    expanded = expand_levels(X, center, level_cuts)
    mean, scale = fit_standardizer(expanded)
    Z = (expanded - mean) / scale
    signs = np.where(Y, 1.0, -1.0)
    c = np.ones((n, k)) if sample_weight is None else np.asarray(sample_weight, float)

    weights = np.zeros((Z.shape[1], k))
    bias = np.zeros(k)
    lam = params.regularization
    history = [regularized_hinge(Z, signs, c, weights, bias, lam)]
    step = 0
    for _ in range(params.epochs):
        order = rng.permutation(n)
        for start in range(0, n, params.batch_size):
            batch = order[start:start + params.batch_size]
            zb, sb = Z[batch], signs[batch]
            active = (sb * (zb @ weights + bias) < 1.0) * c[batch] * sb
            eta = params.learning_rate / (1.0 + params.learning_rate * lam * step)
            weights -= eta * (lam * weights - zb.T @ active / len(batch))
            bias += eta * active.mean(axis=0)
            step += 1
        history.append(regularized_hinge(Z, signs, c, weights, bias, lam))
    models = [LinearMargin(center, level_cuts, mean, scale, weights[:, j].copy(), float(bias[j]))
              for j in range(k)]
    return models, np.array(history)
