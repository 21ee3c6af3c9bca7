"""Soft-margin linear SVM trained by dual coordinate descent.

The bias is folded into the weight vector: every sample is extended with a
constant coordinate 1.0, so the problem solved is

    min_w  1/2 ||w||^2 + C * sum_k max(0, 1 - y_k <w, [x_k; 1]>)

and the last entry of ``w`` is the bias. The dual is a box-constrained QP
(0 <= alpha <= C) with no equality constraint, which is what makes plain
coordinate descent applicable.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .errors import (
    DimensionMismatch,
    EmptyBag,
    InvalidConfig,
    NonFiniteInput,
    StateMismatch,
)

# Above this many samples the n x n Gram matrix is not materialised.
GRAM_LIMIT = 4096


@dataclass(frozen=True)
class SolverConfig:
    C: float = 1.0
    tolerance: float = 1e-4
    max_passes: int = 1000
    shuffle_seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.C) and self.C > 0):
            raise InvalidConfig(f"C must be positive, got {self.C}")
        if not (np.isfinite(self.tolerance) and self.tolerance > 0):
            raise InvalidConfig(f"tolerance must be positive, got {self.tolerance}")
        if int(self.max_passes) < 1:
            raise InvalidConfig(f"max_passes must be >= 1, got {self.max_passes}")

    def with_C(self, C):
        return replace(self, C=float(C))


@dataclass(frozen=True)
class Hyperplane:
    weights: np.ndarray
    bias: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise DimensionMismatch("weights must be a vector")
        if not np.all(np.isfinite(w)) or not np.isfinite(self.bias):
            raise NonFiniteInput("hyperplane has non-finite entries")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self):
        return self.weights.shape[0]

    def as_descriptor(self):
        """Return ``[weights; bias]`` as a fresh (p+1)-vector."""
        return np.append(self.weights, self.bias)

    def decision(self, X):
        """Vectorised ``decision_value`` over the rows of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DimensionMismatch(
                f"expected rows of length {self.dim}, got shape {X.shape}"
            )
        return X @ self.weights + self.bias


@dataclass(frozen=True)
class DualState:
    alphas: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True)
class TrainStats:
    passes_used: int
    primal_objective: float
    total_slack: float
    converged: bool
    kkt_residual: float
    dual_state: DualState = field(repr=False)


def decision_value(h, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (h.dim,):
        raise DimensionMismatch(f"expected length {h.dim}, got {x.shape}")
    return float(x @ h.weights + h.bias)


def as_matrix(vectors, name="input"):
    """Stack a list of feature vectors (or a 2-D array) into a float64 matrix."""
    if isinstance(vectors, np.ndarray):
        X = vectors
        if X.ndim == 1:
            X = X[None, :]
    else:
        rows = [np.asarray(v, dtype=np.float64).ravel() for v in vectors]
        if not rows:
            raise EmptyBag(f"{name} is empty")
        lengths = {r.shape[0] for r in rows}
        if len(lengths) > 1:
            raise DimensionMismatch(f"{name} has mixed lengths {sorted(lengths)}")
        X = np.vstack(rows)
    if X.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise EmptyBag(f"{name} is empty")
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return X


def augment(X):
    """Append the constant bias coordinate."""
    return np.hstack([X, np.ones((X.shape[0], 1))])


def stack_problem(positives, negatives):
    P = as_matrix(positives, "positives")
    N = as_matrix(negatives, "negatives")
    if P.shape[1] != N.shape[1]:
        raise DimensionMismatch(
            f"positives have dimension {P.shape[1]}, negatives {N.shape[1]}"
        )
    X = np.vstack([P, N])
    y = np.concatenate([np.ones(P.shape[0]), -np.ones(N.shape[0])])
    return X, y


@njit(cache=True, nogil=True)
def _projected_gradient(g, a, C):
    if a <= 0.0:
        return min(g, 0.0)
    if a >= C:
        return max(g, 0.0)
    return g


@njit(cache=True, nogil=True)
def _dcd_gram_passes(Q, alpha, grad, C, perms, tol):
    """Run coordinate passes on a precomputed signed Gram ``Q``.

    ``grad`` holds ``Q @ alpha - 1`` and is kept in sync. Returns the number
    of passes run and whether a pass ended with every projected gradient
    inside ``tol``.
    """
    n = alpha.shape[0]
    for t in range(perms.shape[0]):
        worst = 0.0
        for s in range(n):
            i = perms[t, s]
            g = grad[i]
            a = alpha[i]
            pg = _projected_gradient(g, a, C)
            if abs(pg) > worst:
                worst = abs(pg)
            if pg == 0.0:
                continue
            qii = Q[i, i]
            if qii > 0.0:
                new = min(max(a - g / qii, 0.0), C)
            else:
                new = C if g < 0.0 else 0.0
            d = new - a
            if d != 0.0:
                alpha[i] = new
                for k in range(n):
                    grad[k] += d * Q[k, i]
        if worst <= tol:
            return t + 1, True
    return perms.shape[0], False


@njit(cache=True, nogil=True)
def _dcd_primal_passes(X, y, alpha, w, C, perms, tol):
    """Same iteration as ``_dcd_gram_passes`` but keeps ``w`` instead of Q."""
    n, p = X.shape
    for t in range(perms.shape[0]):
        worst = 0.0
        for s in range(n):
            i = perms[t, s]
            xi = X[i]
            qii = 0.0
            dot = 0.0
            for k in range(p):
                qii += xi[k] * xi[k]
                dot += xi[k] * w[k]
            g = y[i] * dot - 1.0
            a = alpha[i]
            pg = _projected_gradient(g, a, C)
            if abs(pg) > worst:
                worst = abs(pg)
            if pg == 0.0:
                continue
            if qii > 0.0:
                new = min(max(a - g / qii, 0.0), C)
            else:
                new = C if g < 0.0 else 0.0
            d = new - a
            if d != 0.0:
                alpha[i] = new
                step = d * y[i]
                for k in range(p):
                    w[k] += step * xi[k]
        if worst <= tol:
            return t + 1, True
    return perms.shape[0], False


def _dual_residual(grad, alpha, C):
    pg = np.where(alpha <= 0.0, np.minimum(grad, 0.0),
                  np.where(alpha >= C, np.maximum(grad, 0.0), grad))
    return float(np.max(np.abs(pg))) if pg.size else 0.0


def solve_dual_box(Xa, y, config, gram=None, chunk=32):
    """Dual coordinate descent on already-augmented rows ``Xa``.

    ``gram`` may carry a precomputed ``Xa @ Xa.T`` (or any PSD kernel matrix
    over the same rows), which is reused across calls that differ only in C.
    Returns ``(w_aug, alphas, passes, converged, residual)``; ``w_aug`` is
    ``None`` when only a Gram matrix was supplied (``Xa is None``).
    """
    n = y.shape[0]
    C = float(config.C)
    rng = np.random.default_rng(config.shuffle_seed)
    alpha = np.zeros(n)
    use_gram = gram is not None or n <= GRAM_LIMIT
    if use_gram:
        K = gram if gram is not None else Xa @ Xa.T
        Q = (y[:, None] * y[None, :]) * K
        grad = -np.ones(n)
    else:
        w = np.zeros(Xa.shape[1])
        Xc = np.ascontiguousarray(Xa)

    passes = 0
    converged = False
    residual = np.inf
    base = np.arange(n, dtype=np.int64)
    while passes < config.max_passes:
        k = min(chunk, config.max_passes - passes)
        perms = rng.permuted(np.tile(base, (k, 1)), axis=1)
        if use_gram:
            done, hit = _dcd_gram_passes(Q, alpha, grad, C, perms, config.tolerance)
        else:
            done, hit = _dcd_primal_passes(Xc, y, alpha, w, C, perms, config.tolerance)
        passes += int(done)
        if hit:
            # re-check from scratch; the in-pass maximum mixes iterates
            if use_gram:
                grad = Q @ alpha - 1.0
            else:
                grad = y * (Xc @ w) - 1.0
            residual = _dual_residual(grad, alpha, C)
            if residual <= config.tolerance:
                converged = True
                break
    if not converged:
        if use_gram:
            grad = Q @ alpha - 1.0
        else:
            grad = y * (Xc @ w) - 1.0
        residual = _dual_residual(grad, alpha, C)
        converged = residual <= config.tolerance

    w_aug = None
    if Xa is not None:
        w_aug = Xa.T @ (alpha * y)
    return w_aug, alpha, passes, converged, residual


def primal_objective(w_aug, Xa, y, C):
    """``1/2 ||w||^2 + C * sum(slack)`` with the bias folded into ``w_aug``."""
    slack = np.maximum(0.0, 1.0 - y * (Xa @ w_aug))
    return 0.5 * float(w_aug @ w_aug) + C * float(slack.sum()), float(slack.sum())


def fit_augmented(Xa, y, config, gram=None):
    """Train on rows that already carry the bias coordinate.

    Used directly when some rows are not plain feature vectors, e.g. the
    virtual classifier point inserted during joint training.
    """
    w_aug, alpha, passes, converged, residual = solve_dual_box(Xa, y, config, gram)
    obj, slack = primal_objective(w_aug, Xa, y, config.C)
    h = Hyperplane(w_aug[:-1], w_aug[-1])
    stats = TrainStats(
        passes_used=passes,
        primal_objective=obj,
        total_slack=slack,
        converged=converged,
        kkt_residual=residual,
        dual_state=DualState(alpha, y),
    )
    return h, stats


def train_linear_svm(positives, negatives, config=SolverConfig()):
    """Train a max-margin hyperplane separating ``positives`` from ``negatives``.

    Parameters
    ----------
    positives, negatives : sequence of vectors or 2-D array
        Samples labelled +1 and -1. Both must be non-empty and share one
        dimension.
    config : SolverConfig
        Slack penalty, termination tolerance on the largest projected dual
        gradient, pass budget and shuffle seed.

    Returns
    -------
    (Hyperplane, TrainStats)
    """
    X, y = stack_problem(positives, negatives)
    return fit_augmented(augment(X), y, config)


def kkt_residual(h, dual_state, positives, negatives, C):
    """Largest projected-gradient violation of ``dual_state`` for this data.

    The gradient is evaluated through ``h`` (weights and bias), so the value
    certifies the returned hyperplane rather than the solver's internal copy.
    """
    X, y = stack_problem(positives, negatives)
    alpha = np.asarray(dual_state.alphas, dtype=np.float64)
    if alpha.shape != y.shape:
        raise StateMismatch(
            f"dual state has {alpha.shape[0]} coordinates, data has {y.shape[0]}"
        )
    if not np.array_equal(np.asarray(dual_state.labels), y):
        raise StateMismatch("dual state labels do not match the data ordering")
    grad = y * h.decision(X) - 1.0
    return _dual_residual(grad, alpha, float(C))
