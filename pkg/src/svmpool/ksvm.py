"""Kernel SVM trained by SMO with second-order working-set selection.

Unlike :mod:`svmpool.svm_core` the bias here is a free variable, enforced
through the dual equality constraint ``sum_k y_k a_k = 0``.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DimensionMismatch, OrderingMismatch
from .kernel import kernel_matrix
from .svm_core import SolverConfig, as_matrix, stack_problem

TAU = 1e-12


@dataclass(frozen=True)
class DualSolution:
    """Signed dual coefficients ``alphas[k] = a_k * y_k`` plus the bias.

    The ordering is the one used at fit time: positive samples first, then
    negatives.
    """

    alphas: np.ndarray
    bias: float
    support_count: int
    C: float
    objective: float
    converged: bool
    iterations: int
    kkt_violation: float
    labels: np.ndarray = field(repr=False)

    def descriptor(self):
        return np.append(self.alphas, self.bias)


@njit(cache=True, nogil=True)
def _smo(K, y, C, eps, max_iter, alpha, grad):
    """Fan-Chen-Lin SMO on ``Q = y y^T * K``. Mutates alpha and grad."""
    n = y.shape[0]
    it = 0
    gap = np.inf
    while it < max_iter:
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * grad[t]
                if v > gmax:
                    gmax = v
                    i = t
        gmin = np.inf
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                v = -y[t] * grad[t]
                if v < gmin:
                    gmin = v
                b = gmax - v
                if i >= 0 and b > 0:
                    a = K[i, i] + K[t, t] - 2.0 * K[i, t]
                    if a <= 0:
                        a = TAU
                    score = -(b * b) / a
                    if score < best:
                        best = score
                        j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap < eps:
            break
        it += 1

        ai = alpha[i]
        aj = alpha[j]
        yi = y[i]
        yj = y[j]
        a = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if a <= 0:
            a = TAU
        if yi != yj:
            delta = (-grad[i] - grad[j]) / a
            diff = ai - aj
            ni = ai + delta
            nj = aj + delta
            if diff > 0:
                if nj < 0:
                    nj = 0.0
                    ni = diff
            else:
                if ni < 0:
                    ni = 0.0
                    nj = -diff
            if diff > 0:
                if ni > C:
                    ni = C
                    nj = C - diff
            else:
                if nj > C:
                    nj = C
                    ni = C + diff
        else:
            delta = (grad[i] - grad[j]) / a
            s = ai + aj
            ni = ai - delta
            nj = aj + delta
            if s > C:
                if ni > C:
                    ni = C
                    nj = s - C
            else:
                if nj < 0:
                    nj = 0.0
                    ni = s
            if s > C:
                if nj > C:
                    nj = C
                    ni = s - C
            else:
                if ni < 0:
                    ni = 0.0
                    nj = s
        di = ni - ai
        dj = nj - aj
        alpha[i] = ni
        alpha[j] = nj
        for t in range(n):
            grad[t] += y[t] * (yi * K[t, i] * di + yj * K[t, j] * dj)
    return it, gap


def _bias(y, alpha, grad, C):
    """Bias from free support vectors, or the midpoint of the feasible range."""
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        rho = float(np.mean(yg[free]))
    else:
        up = ((y > 0) & (alpha >= C)) | ((y < 0) & (alpha <= 0))
        low = ((y > 0) & (alpha <= 0)) | ((y < 0) & (alpha >= C))
        ub = np.min(yg[low]) if np.any(low) else np.inf
        lb = np.max(yg[up]) if np.any(up) else -np.inf
        if np.isfinite(ub) and np.isfinite(lb):
            rho = 0.5 * (ub + lb)
        else:
            rho = float(ub if np.isfinite(ub) else lb if np.isfinite(lb) else 0.0)
    return -rho


def solve_smo(K, y, config):
    """SMO on a precomputed kernel ``K`` with labels ``y`` in {-1, +1}.

    Returns ``DualSolution``. The iteration cap is ``max_passes * n``.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    C = float(config.C)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    max_iter = int(config.max_passes) * max(n, 1)
    iters, gap = _smo(K, y, C, float(config.tolerance), max_iter, alpha, grad)
    np.clip(alpha, 0.0, C, out=alpha)
    b = _bias(y, alpha, grad, C)
    signed = alpha * y
    obj = float(alpha.sum() - 0.5 * signed @ K @ signed)
    return DualSolution(
        alphas=signed,
        bias=float(b) + 0.0,  # no negative zero
        support_count=int(np.count_nonzero(np.abs(signed) > 1e-12)),
        C=C,
        objective=obj,
        converged=bool(gap < config.tolerance),
        iterations=int(iters),
        kkt_violation=float(max(gap, 0.0)),
        labels=y.copy(),
    )


def train_kernel_svm(positives, negatives, spec, config=SolverConfig()):
    """Fit a kernel SVM; positives are labelled +1 and come first."""
    X, y = stack_problem(positives, negatives)
    return solve_smo(kernel_matrix(spec, X, X), y, config)


def kernel_decision(sol, training_points, spec, x):
    """``sum_k alphas[k] K(x, training_points[k]) + bias``; rows of 2-D ``x`` map to a vector."""
    T = as_matrix(training_points, "training_points")
    if T.shape[0] != sol.alphas.shape[0]:
        raise OrderingMismatch(
            f"{T.shape[0]} training points for {sol.alphas.shape[0]} coefficients"
        )
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    Xq = x[None, :] if single else x
    if Xq.shape[1] != T.shape[1]:
        raise DimensionMismatch(f"query dimension {Xq.shape[1]} != {T.shape[1]}")
    f = kernel_matrix(spec, Xq, T) @ sol.alphas + sol.bias
    return float(f[0]) if single else f


def kernel_primal_objective(sol, K):
    """``1/2 ||w||^2 + C sum(hinge)`` evaluated through the training kernel."""
    f = K @ sol.alphas + sol.bias
    hinge = np.maximum(0.0, 1.0 - sol.labels * f)
    return 0.5 * float(sol.alphas @ K @ sol.alphas) + sol.C * float(hinge.sum())
