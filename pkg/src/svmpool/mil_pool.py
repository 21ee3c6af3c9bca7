"""SVM pooling of a bag of frame features.

A sequence is summarised by the max-margin hyperplane that separates (at
least a fraction ``eta`` of) its frames from a shared negative bag. The
fraction constraint is met by re-solving with a geometrically growing slack
penalty until enough frames land on the positive side.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, EmptyBag, EmptyDataset, InvalidConfig
from .kernel import KernelSpec, kernel_matrix
from .ksvm import solve_smo
from .svm_core import SolverConfig, as_matrix, augment, fit_augmented


def _frozen(X, dtype=None):
    X = np.array(X, dtype=dtype if dtype is not None else None, copy=True)
    X.flags.writeable = False
    return X


@dataclass(frozen=True, eq=False)
class FeatureBag:
    sequence_id: str
    label: int
    frames: np.ndarray
    informative: Optional[np.ndarray] = None

    def __post_init__(self):
        F = np.asarray(self.frames)
        if F.ndim != 2 or F.shape[0] < 1:
            raise EmptyBag(f"bag {self.sequence_id!r} needs a non-empty 2-D frame array")
        object.__setattr__(self, "frames", _frozen(F))
        if self.informative is not None:
            m = np.asarray(self.informative, dtype=bool)
            if m.shape != (F.shape[0],):
                raise DimensionMismatch("informative mask must have one entry per frame")
            object.__setattr__(self, "informative", _frozen(m))
        object.__setattr__(self, "label", int(self.label))

    @property
    def n(self):
        return self.frames.shape[0]

    @property
    def dim(self):
        return self.frames.shape[1]

    def __eq__(self, other):
        if not isinstance(other, FeatureBag):
            return NotImplemented
        masks_equal = (
            (self.informative is None and other.informative is None)
            or (self.informative is not None and other.informative is not None
                and np.array_equal(self.informative, other.informative))
        )
        return (self.sequence_id == other.sequence_id and self.label == other.label
                and self.frames.dtype == other.frames.dtype
                and np.array_equal(self.frames, other.frames) and masks_equal)


@dataclass(frozen=True, eq=False)
class NegativeBag:
    frames: np.ndarray
    source_tag: str = "unspecified"

    def __post_init__(self):
        F = np.asarray(self.frames)
        if F.ndim != 2 or F.shape[0] < 1:
            raise EmptyBag("negative bag needs a non-empty 2-D frame array")
        object.__setattr__(self, "frames", _frozen(F))

    @property
    def dim(self):
        return self.frames.shape[1]

    def __eq__(self, other):
        if not isinstance(other, NegativeBag):
            return NotImplemented
        return (self.source_tag == other.source_tag
                and self.frames.dtype == other.frames.dtype
                and np.array_equal(self.frames, other.frames))


@dataclass(frozen=True)
class PoolConfig:
    """Settings of the C-growth loop.

    ``c_fixed`` switches to a single solve at that C; ``eta`` is then only
    used to fill in ``satisfied``. ``eta=None`` means no fraction target.
    """

    eta: Optional[float] = 0.9
    c_init: float = 1e-4
    growth: float = 10.0
    c_cap: float = 1e4
    c_fixed: Optional[float] = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    kernel: Optional[KernelSpec] = None

    def __post_init__(self):
        if self.eta is not None and not (0.0 < self.eta <= 1.0):
            raise InvalidConfig(f"eta must lie in (0, 1], got {self.eta}")
        if not self.c_init > 0 or not self.c_cap > 0:
            raise InvalidConfig("c_init and c_cap must be positive")
        if self.c_init > self.c_cap:
            raise InvalidConfig(f"c_init {self.c_init} exceeds c_cap {self.c_cap}")
        if not self.growth > 1:
            raise InvalidConfig(f"growth must exceed 1, got {self.growth}")
        if self.c_fixed is not None and not self.c_fixed > 0:
            raise InvalidConfig(f"c_fixed must be positive, got {self.c_fixed}")
        if self.eta is None and self.c_fixed is None:
            raise InvalidConfig("either eta or c_fixed must be given")

    def schedule(self):
        """C values tried in order; the loop stops early once eta is met.

        ``C`` is multiplied by ``growth`` before every solve and the loop
        ends after the first solve at a ``C`` above ``c_cap``.
        """
        if self.c_fixed is not None:
            return [float(self.c_fixed)]
        steps = math.floor(math.log(self.c_cap / self.c_init) / math.log(self.growth) + 1e-9) + 1
        return [self.c_init * self.growth ** k for k in range(1, steps + 1)]

    def to_dict(self):
        return {
            "eta": self.eta, "c_init": self.c_init, "growth": self.growth,
            "c_cap": self.c_cap, "c_fixed": self.c_fixed,
            "solver": {"tolerance": self.solver.tolerance,
                       "max_passes": self.solver.max_passes,
                       "shuffle_seed": self.solver.shuffle_seed},
            "kernel": None if self.kernel is None else self.kernel.to_dict(),
        }


@dataclass(frozen=True)
class SVMPDescriptor:
    vector: np.ndarray
    satisfied: bool
    final_C: float
    achieved_fraction: float
    selected: np.ndarray
    solver_calls: int = 1
    converged: bool = True


@dataclass(frozen=True)
class NSVMPDescriptor:
    vector: np.ndarray
    satisfied: bool
    final_C: float
    achieved_fraction: float
    selected: np.ndarray
    solver_calls: int = 1
    converged: bool = True


def positive_fraction(h, bag):
    """Share of frames with decision value >= 0 (boundary frames count).

    ``h`` is a :class:`~svmpool.svm_core.Hyperplane`, a descriptor vector
    ``[w; b]``, or any callable mapping a frame matrix to decision values.
    """
    F = bag.frames if hasattr(bag, "frames") else np.asarray(bag)
    F = np.asarray(F, dtype=np.float64)
    if hasattr(h, "decision"):
        values = h.decision(F)
    elif callable(h):
        values = np.asarray(h(F), dtype=np.float64)
    else:
        v = np.asarray(h, dtype=np.float64)
        if v.shape != (F.shape[1] + 1,):
            raise DimensionMismatch(f"descriptor length {v.shape} for frames of dim {F.shape[1]}")
        values = F @ v[:-1] + v[-1]
    return float(np.count_nonzero(values >= 0.0)) / F.shape[0]


def _check_pair(bag, neg):
    if bag.dim != neg.dim:
        raise DimensionMismatch(f"bag dimension {bag.dim} != negative dimension {neg.dim}")


def _satisfied(fraction, eta):
    return True if eta is None else fraction >= eta


class SVMPProblem:
    """Augmented design matrix and Gram for one bag, reused across C values."""

    def __init__(self, bag, neg, virtual_point=None):
        _check_pair(bag, neg)
        P = augment(as_matrix(bag.frames, "positive bag"))
        N = augment(as_matrix(neg.frames, "negative bag"))
        self.n = P.shape[0]
        rows = [P]
        if virtual_point is not None:
            v = np.asarray(virtual_point, dtype=np.float64).ravel()
            if v.shape[0] != P.shape[1]:
                raise DimensionMismatch(
                    f"virtual point has length {v.shape[0]}, augmented frames {P.shape[1]}"
                )
            rows.append(v[None, :])
        rows.append(N)
        self.Xa = np.vstack(rows)
        n_pos = self.Xa.shape[0] - N.shape[0]
        self.y = np.concatenate([np.ones(n_pos), -np.ones(N.shape[0])])
        self.gram = self.Xa @ self.Xa.T
        self.P = P

    def fit(self, solver, C):
        return fit_augmented(self.Xa, self.y, solver.with_C(C), gram=self.gram)


def svmp_pool(bag, neg, cfg=PoolConfig(), virtual_point=None):
    """Linear SVM-pooling descriptor ``[w; b]`` of one bag.

    Parameters
    ----------
    bag : FeatureBag
    neg : NegativeBag
        Shared across all bags of a run; never modified.
    cfg : PoolConfig
    virtual_point : array of length p+1, optional
        Extra positive sample already in augmented coordinates (joint
        training). It is excluded from the achieved fraction.

    Returns
    -------
    SVMPDescriptor
        The hyperplane of the last solve, with ``satisfied=False`` when the
        cap was passed before the fraction target was met.
    """
    problem = SVMPProblem(bag, neg, virtual_point)
    h = stats = None
    C = None
    calls = 0
    values = None
    for C in cfg.schedule():
        h, stats = problem.fit(cfg.solver, C)
        calls += 1
        values = problem.P @ h.as_descriptor()
        if cfg.c_fixed is None and _satisfied(np.count_nonzero(values >= 0.0) / problem.n, cfg.eta):
            break
    selected = values >= 0.0
    fraction = float(np.count_nonzero(selected)) / problem.n
    return SVMPDescriptor(
        vector=h.as_descriptor(),
        satisfied=_satisfied(fraction, cfg.eta),
        final_C=float(C),
        achieved_fraction=fraction,
        selected=selected,
        solver_calls=calls,
        converged=stats.converged,
    )


def nsvmp_pool(bag, neg, cfg):
    """Kernel variant: the descriptor is the signed dual vector plus the bias.

    Coefficients follow the training order (bag frames, then negatives), so
    every bag of a fixed size pooled against the same negative bag yields a
    vector of the same length ``n + |neg| + 1``.
    """
    if cfg.kernel is None:
        raise InvalidConfig("nsvmp_pool needs cfg.kernel")
    _check_pair(bag, neg)
    P = as_matrix(bag.frames, "positive bag")
    N = as_matrix(neg.frames, "negative bag")
    X = np.vstack([P, N])
    y = np.concatenate([np.ones(P.shape[0]), -np.ones(N.shape[0])])
    K = kernel_matrix(cfg.kernel, X, X)
    n = P.shape[0]
    sol = None
    C = None
    calls = 0
    for C in cfg.schedule():
        sol = solve_smo(K, y, cfg.solver.with_C(C))
        calls += 1
        values = K[:n] @ sol.alphas + sol.bias
        if cfg.c_fixed is None and _satisfied(np.count_nonzero(values >= 0.0) / n, cfg.eta):
            break
    values = K[:n] @ sol.alphas + sol.bias
    selected = values >= 0.0
    fraction = float(np.count_nonzero(selected)) / n
    return NSVMPDescriptor(
        vector=sol.descriptor(),
        satisfied=_satisfied(fraction, cfg.eta),
        final_C=float(C),
        achieved_fraction=fraction,
        selected=selected,
        solver_calls=calls,
        converged=sol.converged,
    )


def global_mean(dataset):
    """Mean over every positive-bag frame and every negative frame."""
    blocks = [np.asarray(b.frames, dtype=np.float64) for b in dataset.sequences]
    if dataset.negative is not None:
        blocks.append(np.asarray(dataset.negative.frames, dtype=np.float64))
    if not blocks:
        raise EmptyDataset("dataset has no frames")
    total = sum(B.sum(axis=0) for B in blocks)
    count = sum(B.shape[0] for B in blocks)
    return total / count


def centralize(dataset, mean=None):
    """Subtract one global mean from all frames.

    ``mean`` defaults to :func:`global_mean` of ``dataset`` itself; pass the
    training-split mean when centring held-out data. The returned dataset
    carries float64 frames and records the mean in ``center``.
    """
    if not dataset.sequences:
        raise EmptyDataset("dataset has no sequences")
    mu = global_mean(dataset) if mean is None else np.asarray(mean, dtype=np.float64)
    if mu.shape != (dataset.p,):
        raise DimensionMismatch(f"mean has shape {mu.shape}, dataset dimension {dataset.p}")
    seqs = [replace(b, frames=np.asarray(b.frames, dtype=np.float64) - mu) for b in dataset.sequences]
    neg = replace(dataset.negative, frames=np.asarray(dataset.negative.frames, dtype=np.float64) - mu)
    return replace(dataset, sequences=seqs, negative=neg, center=_frozen(mu))
