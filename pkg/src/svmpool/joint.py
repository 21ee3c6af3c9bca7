"""Joint training of pooling descriptors and one-vs-rest action classifiers.

Block-coordinate descent alternates between pooling every bag and fitting
the classifiers on the pooled descriptors. The coupling between the two is
realised by inserting the current classifier of the bag's class into the bag
as one extra positive sample (the virtual point), replaced in place on every
iteration.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, MissingClass
from .mil_pool import PoolConfig, svmp_pool
from .parallel import map_ordered
from .svm_core import SolverConfig, as_matrix, train_linear_svm

VIRTUAL_SCALES = ("unit_norm", "bag_mean_norm")


@dataclass(frozen=True)
class ActionClassifierSet:
    weights: np.ndarray  # (d, q): one row per class over descriptor space
    biases: np.ndarray  # (d,)
    class_ids: tuple

    @property
    def dim(self):
        return self.weights.shape[1]

    def scores(self, descriptors):
        D = np.asarray(descriptors, dtype=np.float64)
        single = D.ndim == 1
        D = D[None, :] if single else D
        if D.shape[1] != self.dim:
            raise DimensionMismatch(f"descriptor length {D.shape[1]}, classifiers expect {self.dim}")
        S = D @ self.weights.T + self.biases
        return S[0] if single else S

    def stacked(self):
        return np.hstack([self.weights, self.biases[:, None]])


@dataclass(frozen=True)
class JointConfig:
    c2: float = 10.0
    max_bcd_iters: int = 3
    z_tolerance: float = 1e-3
    pool: PoolConfig = field(default_factory=PoolConfig)
    virtual_point_scale: str = "bag_mean_norm"
    classifier_solver: SolverConfig = field(default_factory=SolverConfig)
    jobs: int = 1

    def __post_init__(self):
        if not self.c2 > 0:
            raise InvalidConfig(f"c2 must be positive, got {self.c2}")
        if int(self.max_bcd_iters) < 1:
            raise InvalidConfig("max_bcd_iters must be >= 1")
        if not self.z_tolerance > 0:
            raise InvalidConfig("z_tolerance must be positive")
        if self.virtual_point_scale not in VIRTUAL_SCALES:
            raise InvalidConfig(f"unknown virtual_point_scale {self.virtual_point_scale!r}")


@dataclass
class BcdHistory:
    mean_fraction: list = field(default_factory=list)
    z_change: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    converged: bool = False

    def __len__(self):
        return len(self.mean_fraction)


def train_action_classifiers(descriptors, labels, c2=10.0, class_ids=None,
                             solver=SolverConfig()):
    """One binary linear SVM per class, that class positive and the rest negative.

    Every binary problem uses the same solver seed, so relabelling the
    classes only permutes the resulting classifiers.
    """
    D = as_matrix(descriptors, "descriptors")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (D.shape[0],):
        raise DimensionMismatch("need one label per descriptor")
    ids = tuple(sorted(set(labels.tolist()))) if class_ids is None else tuple(class_ids)
    missing = [c for c in ids if not np.any(labels == c)]
    if missing:
        raise MissingClass(f"no descriptors for classes {missing}")
    W = np.zeros((len(ids), D.shape[1]))
    b = np.zeros(len(ids))
    if len(ids) == 1:
        return ActionClassifierSet(W, b, ids)
    cfg = solver.with_C(c2)
    for k, c in enumerate(ids):
        pos = labels == c
        h, _ = train_linear_svm(D[pos], D[~pos], cfg)
        W[k] = h.weights
        b[k] = h.bias
    return ActionClassifierSet(W, b, ids)


def predict(Z, descriptor):
    """Class id with the largest score; ties go to the lowest id.

    Accepts one descriptor or a 2-D batch (returns an array then).
    """
    S = Z.scores(descriptor)
    ids = np.asarray(Z.class_ids)
    order = np.argsort(ids, kind="stable")
    if S.ndim == 1:
        return int(ids[order][int(np.argmax(S[order]))])
    return ids[order][np.argmax(S[:, order], axis=1)]


def virtual_point(Z, class_id, bag, scale="bag_mean_norm"):
    """Classifier weights of ``class_id`` rescaled for insertion into ``bag``.

    The point lives in augmented frame space (length p+1), which is the
    descriptor space the classifiers were trained on.
    """
    k = Z.class_ids.index(class_id)
    w = np.asarray(Z.weights[k], dtype=np.float64)
    if w.shape[0] != bag.dim + 1:
        raise DimensionMismatch(
            f"classifier weights have length {w.shape[0]}, augmented frames {bag.dim + 1}")
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        return None
    if scale == "unit_norm":
        target = 1.0
    else:
        F = np.asarray(bag.frames, dtype=np.float64)
        target = float(np.mean(np.sqrt((F * F).sum(1) + 1.0)))
    return w * (target / norm)


def bcd_fit(dataset, cfg=JointConfig(), transform=None):
    """Alternate pooling and classifier fitting.

    Parameters
    ----------
    dataset : BagDataset
        Training bags (already centred if centring is wanted).
    cfg : JointConfig
    transform : callable, optional
        Applied to the stacked descriptor matrix before fitting classifiers,
        e.g. row normalisation. Virtual points are taken from classifiers in
        the transformed space.

    Returns
    -------
    descriptors : list of SVMPDescriptor
    Z : ActionClassifierSet
    history : BcdHistory
    """
    bags = dataset.sequences
    labels = dataset.labels
    ids = tuple(range(dataset.class_count))
    present = tuple(c for c in ids if np.any(labels == c))
    virtual = [None] * len(bags)
    history = BcdHistory()
    prev = None
    descriptors = Z = None
    for _ in range(int(cfg.max_bcd_iters)):
        descriptors = map_ordered(
            lambda i: svmp_pool(bags[i], dataset.negative, cfg.pool, virtual[i]),
            range(len(bags)), jobs=cfg.jobs,
        )
        D = np.vstack([d.vector for d in descriptors])
        if transform is not None:
            D = transform(D)
        Z = train_action_classifiers(D, labels, cfg.c2, present, cfg.classifier_solver)
        acc = float(np.mean(predict(Z, D) == labels))
        cur = Z.stacked()
        change = np.inf if prev is None else float(
            np.linalg.norm(cur - prev) / max(np.linalg.norm(prev), np.finfo(float).tiny))
        history.mean_fraction.append(float(np.mean([d.achieved_fraction for d in descriptors])))
        history.z_change.append(change)
        history.train_accuracy.append(acc)
        prev = cur
        if change <= cfg.z_tolerance:
            history.converged = True
            break
        for i, bag in enumerate(bags):
            virtual[i] = virtual_point(Z, bag.label, bag, cfg.virtual_point_scale)
    return descriptors, Z, history
