"""Polynomial-kernel C-SVC trained with sequential minimal optimization.

The solver itself lives in the kernel backend (compiled or numpy); this
module builds kernel matrices and wraps the result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import smo_solve


def polynomial_kernel(a, b, degree: int = 3, gamma: float = 1.0, coef0: float = 1.0) -> np.ndarray:
    """``K(u, v) = (gamma * <u, v> + coef0) ** degree`` for all row pairs."""
    return (gamma * (np.asarray(a, dtype=np.float64) @ np.asarray(b, dtype=np.float64).T) + coef0) ** degree


@dataclass
class PolySVM:
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    degree: int
    gamma: float
    coef0: float
    C: float
    n_iter: int = 0

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], self.bias)
        K = polynomial_kernel(X, self.support_vectors, self.degree, self.gamma, self.coef0)
        return K @ self.dual_coef + self.bias

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) > 0, 1, -1)


def fit_svm(X, y, C: float = 1.0, degree: int = 3, gamma: float | None = None,
            coef0: float = 1.0, tol: float = 1e-3, max_iter: int = 1_000_000) -> PolySVM:
    """Train on rows of ``X`` with labels in {-1, +1}.

    ``gamma`` defaults to ``1 / n_features``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D with one label per row")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValueError("labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain both classes")
    if C <= 0:
        raise ValueError("C must be positive")
    gamma = 1.0 / X.shape[1] if gamma is None else float(gamma)
    K = polynomial_kernel(X, X, degree, gamma, coef0)
    alpha, rho, n_iter = smo_solve(K, y, float(C), float(tol), int(max_iter))
    sv = alpha > 0
    return PolySVM(
        support_vectors=X[sv].copy(),
        dual_coef=(alpha * y)[sv],
        bias=-float(rho),
        degree=int(degree),
        gamma=gamma,
        coef0=float(coef0),
        C=float(C),
        n_iter=int(n_iter),
    )
