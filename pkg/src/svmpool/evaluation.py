"""Cross-validated comparison of pooling pipelines.

Every pipeline follows the same protocol per fold: centre all frames with
the training-split global mean, pool each bag into a descriptor, fit
one-vs-rest classifiers on the training descriptors and score the held-out
ones. Held-out bags are pooled against the training negative bag. Pooling is unsupervised per bag, so only the centring mean, kernel
bandwidth and descriptor shift depend on the training split.
"""

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import InvalidConfig
from .fusion import FusedKernelConfig, fused_gram, predict_precomputed, train_precomputed
from .joint import JointConfig, bcd_fit, predict, train_action_classifiers
from .kernel import KernelSpec, MinMaxShift, median_heuristic_gamma
from .mil_pool import PoolConfig, centralize, global_mean, nsvmp_pool, svmp_pool
from .model import TrainedModel
from .parallel import map_ordered
from .svm_core import SolverConfig

PIPELINES = ("avg", "max", "svmp", "nsvmp", "fused", "joint")


@dataclass(frozen=True)
class EvalConfig:
    pool: PoolConfig = field(default_factory=PoolConfig)
    nsvmp_pool: Optional[PoolConfig] = None
    c2: float = 10.0
    fusion: FusedKernelConfig = field(default_factory=FusedKernelConfig)
    nsvmp_gamma: Optional[float] = None
    normalize: bool = True
    centralize: bool = True
    max_bcd_iters: int = 3
    classifier_solver: SolverConfig = field(default_factory=SolverConfig)
    jobs: int = 1

    def nsvmp_config(self, gamma):
        base = self.nsvmp_pool if self.nsvmp_pool is not None else self.pool
        return replace(base, kernel=KernelSpec("rbf", gamma))

    def to_dict(self):
        return {
            "pool": self.pool.to_dict(),
            "nsvmp_pool": None if self.nsvmp_pool is None else self.nsvmp_pool.to_dict(),
            "c2": self.c2,
            "fusion": self.fusion.to_dict(),
            "nsvmp_gamma": self.nsvmp_gamma,
            "normalize": self.normalize,
            "centralize": self.centralize,
            "max_bcd_iters": self.max_bcd_iters,
            "classifier_solver": {"tolerance": self.classifier_solver.tolerance,
                                  "max_passes": self.classifier_solver.max_passes,
                                  "shuffle_seed": self.classifier_solver.shuffle_seed},
        }


@dataclass
class CVResult:
    pipeline: str
    fold_accuracies: list
    confusion: np.ndarray
    class_ids: list
    predictions: np.ndarray
    timings: dict = field(default_factory=dict)

    @property
    def mean_accuracy(self):
        return float(np.mean(self.fold_accuracies))

    @property
    def overall_accuracy(self):
        return float(np.trace(self.confusion) / max(self.confusion.sum(), 1))

    @property
    def per_class_accuracy(self):
        rows = self.confusion.sum(axis=1)
        return [float(self.confusion[i, i] / rows[i]) if rows[i] else float("nan")
                for i in range(len(self.class_ids))]


class Timer:
    def __init__(self):
        self.totals = {}

    def add(self, stage, seconds):
        self.totals[stage] = self.totals.get(stage, 0.0) + seconds

    def run(self, stage, fn, *args, **kwargs):
        t = time.perf_counter()
        out = fn(*args, **kwargs)
        self.add(stage, time.perf_counter() - t)
        return out


def stratified_folds(labels, k=3, seed=0):
    """Fold id per sample; each class is spread round-robin after a shuffle."""
    labels = np.asarray(labels)
    if k < 2:
        raise InvalidConfig(f"need at least 2 folds, got {k}")
    rng = np.random.default_rng(seed)
    folds = np.empty(labels.shape[0], dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.shape[0])]
        folds[idx] = (np.arange(idx.shape[0]) + offset) % k
        offset += idx.shape[0]
    return folds


def l2_rows(D):
    D = np.asarray(D, dtype=np.float64)
    norms = np.linalg.norm(D, axis=1, keepdims=True)
    return D / np.where(norms > 0, norms, 1.0)


def average_pool(ds):
    return np.vstack([np.asarray(b.frames, dtype=np.float64).mean(axis=0) for b in ds.sequences])


def max_pool(ds):
    return np.vstack([np.asarray(b.frames, dtype=np.float64).max(axis=0) for b in ds.sequences])


def svmp_matrix(ds, cfg, jobs=1):
    descs = map_ordered(lambda b: svmp_pool(b, ds.negative, cfg), ds.sequences, jobs)
    return np.vstack([d.vector for d in descs]), descs


def nsvmp_matrix(ds, cfg, jobs=1):
    descs = map_ordered(lambda b: nsvmp_pool(b, ds.negative, cfg), ds.sequences, jobs)
    return np.vstack([d.vector for d in descs]), descs


def _frames(ds):
    return np.vstack([np.asarray(b.frames, dtype=np.float64) for b in ds.sequences]
                     + [np.asarray(ds.negative.frames, dtype=np.float64)])


def resolve_gamma(train, cfg, seed=0):
    if cfg.nsvmp_gamma is not None:
        return float(cfg.nsvmp_gamma)
    return median_heuristic_gamma(_frames(train), np.random.default_rng(seed))


def _describe(pipeline, ds, cfg, timer, gamma=None):
    """Descriptor matrices for a centred dataset: ``(linear part, kernel part)``."""
    S = N = None
    if pipeline == "avg":
        S = timer.run("pool", average_pool, ds)
    elif pipeline == "max":
        S = timer.run("pool", max_pool, ds)
    if pipeline in ("svmp", "fused", "joint"):
        S, _ = timer.run("pool_svmp", svmp_matrix, ds, cfg.pool, cfg.jobs)
    if pipeline in ("nsvmp", "fused"):
        N, _ = timer.run("pool_nsvmp", nsvmp_matrix, ds, cfg.nsvmp_config(gamma), cfg.jobs)
    if S is not None and cfg.normalize:
        S = l2_rows(S)
    return S, N


def _kernel_parts(pipeline, S, N, cfg):
    if pipeline == "nsvmp":
        return np.zeros((N.shape[0], 1)), replace(cfg.fusion, beta1=0.0, beta2=1.0)
    return S, cfg.fusion


def fit_model(train, pipeline, cfg=EvalConfig(), timer=None, seed=0):
    """Fit one pipeline on a training split.

    Parameters
    ----------
    train : BagDataset
        Raw (uncentred) training bags.
    pipeline : str
        One of ``PIPELINES``.
    cfg : EvalConfig
    timer : Timer, optional
        Accumulates per-stage wall-clock time.
    seed : int
        Seeds the row subsample of the bandwidth heuristic.

    Returns
    -------
    TrainedModel
    """
    if pipeline not in PIPELINES:
        raise InvalidConfig(f"unknown pipeline {pipeline!r}; choose from {PIPELINES}")
    timer = timer or Timer()
    center = None
    if cfg.centralize:
        center = timer.run("centralize", global_mean, train)
        train = timer.run("centralize", centralize, train, center)
    ytr = train.labels
    ids = tuple(c for c in range(train.class_count) if np.any(ytr == c))
    model = TrainedModel(pipeline, cfg, train.class_count, train.negative, center)
    if pipeline == "joint":
        jcfg = JointConfig(c2=cfg.c2, max_bcd_iters=cfg.max_bcd_iters, pool=cfg.pool,
                           classifier_solver=cfg.classifier_solver, jobs=cfg.jobs)
        transform = l2_rows if cfg.normalize else None
        _, model.classifiers, _ = timer.run("bcd", bcd_fit, train, jcfg, transform)
        return model
    if pipeline in ("nsvmp", "fused"):
        model.gamma = resolve_gamma(train, cfg, seed)
    S, N = _describe(pipeline, train, cfg, timer, model.gamma)
    if N is None:
        model.classifiers = timer.run("classify", train_action_classifiers,
                                      S, ytr, cfg.c2, ids, cfg.classifier_solver)
        return model
    S, fcfg = _kernel_parts(pipeline, S, N, cfg)
    model.shift = MinMaxShift.fit(N) if fcfg.nsvmp_map is not None else None
    model.svmp_train, model.nsvmp_train = S, N
    K = timer.run("gram", fused_gram, S, N, fcfg, shift=model.shift)
    model.kernel_model = timer.run("classify", train_precomputed, K, ytr, cfg.c2, "dcd",
                                   cfg.classifier_solver, ids)
    return model


def predict_model(model, ds, timer=None):
    """Class predictions for the bags of ``ds`` (raw, uncentred frames)."""
    timer = timer or Timer()
    cfg = model.config
    if model.center is not None:
        ds = timer.run("centralize", centralize, ds, model.center)
    ds = replace(ds, negative=model.negative)
    pipeline = model.pipeline
    S, N = _describe("svmp" if pipeline == "joint" else pipeline, ds, cfg, timer, model.gamma)
    if N is None:
        return timer.run("classify", predict, model.classifiers, S)
    S, fcfg = _kernel_parts(pipeline, S, N, cfg)
    K = timer.run("gram", fused_gram, S, N, fcfg, svmp_cols=model.svmp_train,
                  nsvmp_cols=model.nsvmp_train, shift=model.shift)
    return timer.run("classify", predict_precomputed, model.kernel_model, K)


def run_fold(pipeline, train, test, cfg, timer=None, seed=0):
    """Predicted labels for ``test`` after fitting ``pipeline`` on ``train``."""
    timer = timer or Timer()
    return predict_model(fit_model(train, pipeline, cfg, timer, seed), test, timer)


def cross_validate(ds, pipeline, cfg=EvalConfig(), folds=3, seed=0):
    """k-fold evaluation; uses ``ds.split_assignments`` when present."""
    labels = ds.labels
    assign = ds.split_assignments if ds.split_assignments is not None \
        else stratified_folds(labels, folds, seed)
    fold_ids = sorted(set(assign.tolist()))
    d = ds.class_count
    confusion = np.zeros((d, d), dtype=np.int64)
    predictions = np.full(len(ds), -1, dtype=np.int64)
    accs = []
    timer = Timer()
    for f in fold_ids:
        te = np.flatnonzero(assign == f)
        tr = np.flatnonzero(assign != f)
        pred = np.asarray(run_fold(pipeline, ds.subset(tr), ds.subset(te), cfg, timer, seed))
        predictions[te] = pred
        accs.append(float(np.mean(pred == labels[te])))
        np.add.at(confusion, (labels[te], pred), 1)
    return CVResult(pipeline, accs, confusion, list(range(d)), predictions, timer.totals)
