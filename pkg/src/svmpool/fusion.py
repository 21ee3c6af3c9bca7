"""Fixed-weight fusion of the linear and kernel pooling descriptors.

The fused kernel is ``beta1 * K_svmp + beta2 * K_nsvmp``. Kernel-pooling
descriptors hold signed dual coefficients, so before the homogeneous map
they are shifted per coordinate onto [0, 1] with bounds taken from the
training split.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CountMismatch, InvalidConfig, MissingClass, NotPSD
from .kernel import (
    GramMatrix,
    HomogeneousMapConfig,
    KernelSpec,
    MinMaxShift,
    homogeneous_map,
    kernel_matrix,
)
from .ksvm import solve_smo
from .svm_core import SolverConfig, as_matrix, solve_dual_box

PSD_TOLERANCE = 1e-6


@dataclass(frozen=True)
class FusedKernelConfig:
    beta1: float = 1.0
    beta2: float = 1.0
    svmp_kernel: KernelSpec = field(default_factory=KernelSpec)
    nsvmp_kernel: KernelSpec = field(default_factory=KernelSpec)
    nsvmp_map: Optional[HomogeneousMapConfig] = field(default_factory=HomogeneousMapConfig)

    def __post_init__(self):
        if self.beta1 < 0 or self.beta2 < 0 or not (self.beta1 + self.beta2) > 0:
            raise InvalidConfig(f"need beta1, beta2 >= 0 with a positive sum, got "
                                f"{self.beta1}, {self.beta2}")

    def to_dict(self):
        return {
            "beta1": self.beta1, "beta2": self.beta2,
            "svmp_kernel": self.svmp_kernel.to_dict(),
            "nsvmp_kernel": self.nsvmp_kernel.to_dict(),
            "nsvmp_map": None if self.nsvmp_map is None else self.nsvmp_map.to_dict(),
        }


def nsvmp_features(descs, cfg, shift):
    """Shift onto [0, 1] and apply the homogeneous map, if one is configured."""
    X = as_matrix(descs, "nsvmp descriptors")
    if cfg.nsvmp_map is None:
        return X
    return homogeneous_map(cfg.nsvmp_map, shift.transform(X))


def fused_gram(svmp_descs, nsvmp_descs, cfg=FusedKernelConfig(),
               svmp_cols=None, nsvmp_cols=None, shift=None):
    """Fused Gram between row descriptors and column (training) descriptors.

    Columns default to the rows, giving the square training Gram. ``shift``
    defaults to one fitted on the column NSVMP descriptors.
    """
    S = as_matrix(svmp_descs, "svmp descriptors")
    N = as_matrix(nsvmp_descs, "nsvmp descriptors")
    if S.shape[0] != N.shape[0]:
        raise CountMismatch(f"{S.shape[0]} SVMP vs {N.shape[0]} NSVMP descriptors")
    square = svmp_cols is None and nsvmp_cols is None
    Sc = S if svmp_cols is None else as_matrix(svmp_cols, "svmp columns")
    Nc = N if nsvmp_cols is None else as_matrix(nsvmp_cols, "nsvmp columns")
    if Sc.shape[0] != Nc.shape[0]:
        raise CountMismatch(f"{Sc.shape[0]} SVMP vs {Nc.shape[0]} NSVMP column descriptors")
    K = np.zeros((S.shape[0], Sc.shape[0]))
    if cfg.beta1 > 0:
        K += cfg.beta1 * kernel_matrix(cfg.svmp_kernel, S, S if square else Sc)
    if cfg.beta2 > 0:
        if shift is None and cfg.nsvmp_map is not None:
            shift = MinMaxShift.fit(Nc)
        A = nsvmp_features(N, cfg, shift)
        B = A if square else nsvmp_features(Nc, cfg, shift)
        K += cfg.beta2 * kernel_matrix(cfg.nsvmp_kernel, A, A if square else B)
    if square:
        K = 0.5 * (K + K.T)
    ids = tuple(range(S.shape[0]))
    return GramMatrix(K, ids, ids if square else tuple(range(Sc.shape[0])))


@dataclass(frozen=True)
class PrecomputedModel:
    coefficients: np.ndarray  # (d, n_train) signed dual coefficients
    biases: np.ndarray
    class_ids: tuple
    solver: str
    n_train: int


def _entries(K):
    return K.entries if isinstance(K, GramMatrix) else np.asarray(K, dtype=np.float64)


def check_psd(K, tol=PSD_TOLERANCE):
    vals = np.linalg.eigvalsh(0.5 * (K + K.T))
    top = float(np.max(np.abs(vals))) if vals.size else 0.0
    if vals.size and vals[0] < -tol * max(top, np.finfo(float).tiny):
        raise NotPSD(f"min eigenvalue {vals[0]:.3e} below -{tol:g} x {top:.3e}")


def train_precomputed(K, labels, C=10.0, solver="dcd", config=SolverConfig(), class_ids=None):
    """One-vs-rest kernel classifiers on a precomputed training Gram.

    ``solver="dcd"`` folds the bias in as a constant kernel offset (``K + 1``)
    and runs dual coordinate descent, which solves exactly the problem of
    the linear trainer when ``K`` is a linear kernel. ``solver="smo"`` keeps
    a free bias.
    """
    K = _entries(K)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise CountMismatch(f"training Gram must be square, got {K.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (K.shape[0],):
        raise CountMismatch(f"{labels.shape[0]} labels for a {K.shape[0]}-sample Gram")
    if solver not in ("dcd", "smo"):
        raise InvalidConfig(f"unknown solver {solver!r}")
    check_psd(K)
    ids = tuple(sorted(set(labels.tolist()))) if class_ids is None else tuple(class_ids)
    missing = [c for c in ids if not np.any(labels == c)]
    if missing:
        raise MissingClass(f"no samples for classes {missing}")
    n = K.shape[0]
    coef = np.zeros((len(ids), n))
    bias = np.zeros(len(ids))
    cfg = config.with_C(C)
    if len(ids) > 1:
        Kb = K + 1.0 if solver == "dcd" else K
        for k, c in enumerate(ids):
            y = np.where(labels == c, 1.0, -1.0)
            if solver == "dcd":
                _, alpha, *_ = solve_dual_box(None, y, cfg, gram=Kb)
                coef[k] = alpha * y
                bias[k] = float(coef[k].sum())
            else:
                sol = solve_smo(K, y, cfg)
                coef[k] = sol.alphas
                bias[k] = sol.bias
    return PrecomputedModel(coef, bias, ids, solver, n)


def decision_scores(model, K_rows):
    R = _entries(K_rows)
    single = R.ndim == 1
    R = R[None, :] if single else R
    if R.shape[1] != model.n_train:
        raise CountMismatch(f"test rows have {R.shape[1]} columns, model has {model.n_train}")
    S = R @ model.coefficients.T + model.biases
    return S[0] if single else S


def predict_precomputed(model, K_rows):
    """Argmax class over one-vs-rest scores, lowest id on ties."""
    S = decision_scores(model, K_rows)
    ids = np.asarray(model.class_ids)
    order = np.argsort(ids, kind="stable")
    if S.ndim == 1:
        return int(ids[order][int(np.argmax(S[order]))])
    return ids[order][np.argmax(S[:, order], axis=1)]
