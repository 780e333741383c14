"""Ridge regression with an unpenalized intercept and cross-validated shrinkage."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["DEFAULT_LAMBDA_GRID", "RidgeConfig", "ridge_fit", "ridge_cv_select"]

# 10 log-spaced penalties spanning 1e-5 .. 1e5.
DEFAULT_LAMBDA_GRID = tuple(np.logspace(-5.0, 5.0, 10))


@dataclass
class RidgeConfig:
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    folds: int = 5

    def __post_init__(self):
        grid = tuple(float(v) for v in self.lambda_grid)
        if not grid:
            raise ValueError("lambda grid must be non-empty")
        if any(v <= 0 for v in grid):
            raise ValueError("lambda values must be positive")
        self.lambda_grid = grid
        if self.folds < 2:
            raise ValueError(f"need at least 2 folds, got {self.folds}")


def _as_xy(X, Y):
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or Y.ndim != 2:
        raise ValueError("X must be (N, D) and Y (N, V)")
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"sample counts differ: X has {X.shape[0]}, Y has {Y.shape[0]}")
    if X.shape[0] < 2:
        raise ValueError("ridge needs at least two samples")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("ridge inputs must be finite")
    return X, Y


def ridge_fit(X, Y, lam: float, fit_bias: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Solve min |XW + b - Y|^2 + lam |W|^2 with the bias left unpenalized.

    Implemented by centering X and Y and solving through an SVD of the
    centered design, which is algebraically the normal-equations solution
    (Xc'Xc + lam I)^-1 Xc'Yc. Returns (W, b) with shapes (D, V) and (V,).
    """
    X, Y = _as_xy(X, Y)
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if fit_bias:
        xm = X.mean(axis=0)
        ym = Y.mean(axis=0)
        Xc, Yc = X - xm, Y - ym
    else:
        xm = np.zeros(X.shape[1])
        ym = np.zeros(Y.shape[1])
        Xc, Yc = X, Y
    u, s, vt = np.linalg.svd(Xc, full_matrices=False)
    shrink = s / (s * s + lam)
    W = vt.T @ (shrink[:, None] * (u.T @ Yc))
    b = ym - xm @ W if fit_bias else np.zeros(Y.shape[1])
    return W, b


def ridge_cv_select(X, Y, config: RidgeConfig | None = None) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Pick the penalty by contiguous k-fold CV, then refit on all samples.

    Fold MSEs are averaged unweighted across folds; ties in mean MSE resolve
    to the larger lambda. Returns (best_lambda, (W, b)).
    """
    cfg = config or RidgeConfig()
    X, Y = _as_xy(X, Y)
    n = X.shape[0]
    if n < cfg.folds:
        raise ValueError(f"{cfg.folds} folds need at least {cfg.folds} samples, got {n}")
    folds = np.array_split(np.arange(n), cfg.folds)
    grid = sorted(cfg.lambda_grid)
    best_lam, best_mse = None, np.inf
    for lam in grid:
        fold_mses = []
        for hold in folds:
            train = np.setdiff1d(np.arange(n), hold)
            W, b = ridge_fit(X[train], Y[train], lam)
            resid = X[hold] @ W + b - Y[hold]
            fold_mses.append(np.mean(resid**2))
        mse = float(np.mean(fold_mses))
        if mse <= best_mse:  # ascending grid, so <= keeps the larger lambda on ties
            best_lam, best_mse = lam, mse
    return best_lam, ridge_fit(X, Y, best_lam)
