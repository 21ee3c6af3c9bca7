"""Kernel evaluation, Gram matrices and the explicit homogeneous-kernel map."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, NegativeInput
from .svm_core import as_matrix

KERNEL_KINDS = ("linear", "rbf")
HOMOGENEOUS_FAMILIES = ("chi2", "intersection", "jensen_shannon")

# Sampling periods minimising the mean relative error of the chi2 map on
# uniform [0, 1] data (16 coordinates, 5000 pairs), one per order.
DEFAULT_PERIODS = {1: 0.63, 2: 0.51, 3: 0.44, 4: 0.40, 5: 0.36, 6: 0.34, 7: 0.31}


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise InvalidConfig(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf":
            if self.gamma is None or not (np.isfinite(self.gamma) and self.gamma > 0):
                raise InvalidConfig(f"rbf kernel needs gamma > 0, got {self.gamma}")

    def to_dict(self):
        return {"kind": self.kind, "gamma": self.gamma}


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    row_ids: tuple
    col_ids: tuple

    @property
    def is_square(self):
        return self.row_ids == self.col_ids

    def min_relative_eigenvalue(self):
        """Smallest eigenvalue divided by the largest magnitude one."""
        vals = np.linalg.eigvalsh(0.5 * (self.entries + self.entries.T))
        scale = max(float(np.max(np.abs(vals))), np.finfo(float).tiny)
        return float(vals[0]) / scale


@dataclass(frozen=True)
class HomogeneousMapConfig:
    family: str = "chi2"
    order: int = 3
    period: Optional[float] = None

    def __post_init__(self):
        if self.family not in HOMOGENEOUS_FAMILIES:
            raise InvalidConfig(f"unknown homogeneous family {self.family!r}")
        if int(self.order) < 1:
            raise InvalidConfig(f"order must be >= 1, got {self.order}")
        if self.period is not None and not self.period > 0:
            raise InvalidConfig(f"period must be positive, got {self.period}")

    @property
    def resolved_period(self):
        if self.period is not None:
            return float(self.period)
        return DEFAULT_PERIODS.get(int(self.order), DEFAULT_PERIODS[7])

    def to_dict(self):
        return {"family": self.family, "order": int(self.order),
                "period": self.resolved_period}


def _sqdist(A, B):
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.maximum(d, 0.0)


def kernel_eval(spec, x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionMismatch(f"shapes {x.shape} and {y.shape} differ")
    if spec.kind == "linear":
        return float(x @ y)
    diff = x - y
    return float(np.exp(-spec.gamma * (diff @ diff)))


def kernel_matrix(spec, X, Y):
    """Raw kernel block between the rows of two float64 matrices."""
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch(f"dimensions {X.shape[1]} and {Y.shape[1]} differ")
    if spec.kind == "linear":
        return X @ Y.T
    if X is Y:
        sq = (X * X).sum(1)
        d = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (X @ X.T), 0.0)
        np.fill_diagonal(d, 0.0)
        K = np.exp(-spec.gamma * d)
        return 0.5 * (K + K.T)
    return np.exp(-spec.gamma * _sqdist(X, Y))


def gram(spec, X, Y=None, row_ids=None, col_ids=None):
    """Gram matrix ``K[i, j] = kernel_eval(spec, X[i], Y[j])``.

    With ``Y`` omitted the self-Gram is built and symmetrised exactly.
    """
    Xm = as_matrix(X, "X")
    same = Y is None or Y is X
    Ym = Xm if same else as_matrix(Y, "Y")
    K = kernel_matrix(spec, Xm, Xm if same else Ym)
    if same:
        K = 0.5 * (K + K.T)
    rows = tuple(row_ids) if row_ids is not None else tuple(range(Xm.shape[0]))
    if col_ids is not None:
        cols = tuple(col_ids)
    else:
        cols = rows if same else tuple(range(Ym.shape[0]))
    return GramMatrix(K, rows, cols)


def median_heuristic_gamma(X, rng=None, max_samples=256):
    """``1 / median squared pairwise distance`` over at most 256 rows."""
    X = as_matrix(X, "X")
    if X.shape[0] > max_samples:
        rng = np.random.default_rng(0) if rng is None else rng
        X = X[np.sort(rng.choice(X.shape[0], max_samples, replace=False))]
    d = _sqdist(X, X)[np.triu_indices(X.shape[0], 1)]
    d = d[d > 0]
    if d.size == 0:
        return 1.0
    return float(1.0 / np.median(d))


def _spectrum(family, lam):
    if family == "chi2":
        return 1.0 / np.cosh(np.pi * lam)
    if family == "intersection":
        return 2.0 / (np.pi * (1.0 + 4.0 * lam * lam))
    # jensen_shannon
    return 2.0 / (np.log(4.0) * np.cosh(np.pi * lam) * (1.0 + 4.0 * lam * lam))


def homogeneous_kernel(family, x, y):
    """Exact additive homogeneous kernel on non-negative vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        if family == "chi2":
            s = x + y
            terms = np.where(s > 0, 2.0 * x * y / np.where(s > 0, s, 1.0), 0.0)
        elif family == "intersection":
            terms = np.minimum(x, y)
        else:
            s = x + y
            lx = np.where(x > 0, x * np.log2(np.where(x > 0, s / x, 1.0)), 0.0)
            ly = np.where(y > 0, y * np.log2(np.where(y > 0, s / y, 1.0)), 0.0)
            terms = 0.5 * (lx + ly)
    return float(terms.sum(axis=-1)) if terms.ndim == 1 else terms.sum(axis=-1)


def homogeneous_map(config, x):
    """Finite feature map whose inner products approximate the kernel.

    Each coordinate ``v`` becomes ``2*order + 1`` features

        sqrt(v L k(0)),
        sqrt(2 v L k(jL)) cos(jL log v), sqrt(2 v L k(jL)) sin(jL log v),

    for ``j = 1..order``, where ``k`` is the kernel's spectrum and ``L`` the
    sampling period. Works row-wise on 2-D input. Output blocks are laid out
    as ``[all j=0 terms, cos/sin pairs for j=1, ...]``; a zero coordinate
    maps to zeros in every block.
    """
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if np.any(X < 0):
        raise NegativeInput("homogeneous map requires non-negative input")
    L = config.resolved_period
    pos = X > 0
    logx = np.log(np.where(pos, X, 1.0))
    blocks = [np.sqrt(X * L * _spectrum(config.family, 0.0))]
    for j in range(1, int(config.order) + 1):
        amp = np.sqrt(2.0 * X * L * _spectrum(config.family, j * L))
        blocks.append(amp * np.cos(j * L * logx))
        blocks.append(amp * np.sin(j * L * logx))
    out = np.concatenate(blocks, axis=1)
    return out[0] if single else out


@dataclass(frozen=True)
class MinMaxShift:
    """Per-coordinate affine map onto [0, 1], fitted on a training split."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, X):
        X = as_matrix(X, "X")
        return cls(X.min(axis=0), X.max(axis=0))

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        span = self.hi - self.lo
        safe = np.where(span > 0, span, 1.0)
        Z = np.where(span > 0, (X - self.lo) / safe, 0.0)
        # held-out rows may fall outside the training range
        return np.clip(Z, 0.0, 1.0)
