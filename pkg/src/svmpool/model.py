"""Trained pipeline models and their on-disk container.

A model keeps everything needed to classify new bags: the centring mean,
the (centred) negative bag used for pooling, and either linear one-vs-rest
classifiers or a precomputed-kernel model together with its training
descriptors.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataio import read_container, write_container
from .errors import CorruptFile
from .fusion import FusedKernelConfig, PrecomputedModel
from .joint import ActionClassifierSet
from .kernel import HomogeneousMapConfig, KernelSpec, MinMaxShift
from .mil_pool import NegativeBag, PoolConfig
from .svm_core import SolverConfig

MODEL_MAGIC = "SVMPMODL"
MODEL_VERSION = 1


def _solver_from(d, base=SolverConfig()):
    if d is None:
        return base
    return SolverConfig(C=base.C, tolerance=float(d["tolerance"]),
                        max_passes=int(d["max_passes"]), shuffle_seed=int(d["shuffle_seed"]))


def _kernel_from(d):
    return None if d is None else KernelSpec(d["kind"], d["gamma"])


def pool_config_from_dict(d):
    return PoolConfig(eta=d["eta"], c_init=float(d["c_init"]), growth=float(d["growth"]),
                      c_cap=float(d["c_cap"]), c_fixed=d["c_fixed"],
                      solver=_solver_from(d.get("solver")), kernel=_kernel_from(d.get("kernel")))


def fusion_config_from_dict(d):
    m = d.get("nsvmp_map")
    hmap = None if m is None else HomogeneousMapConfig(m["family"], int(m["order"]), m["period"])
    return FusedKernelConfig(beta1=float(d["beta1"]), beta2=float(d["beta2"]),
                             svmp_kernel=_kernel_from(d["svmp_kernel"]),
                             nsvmp_kernel=_kernel_from(d["nsvmp_kernel"]), nsvmp_map=hmap)


def eval_config_from_dict(d):
    from .evaluation import EvalConfig

    return EvalConfig(
        pool=pool_config_from_dict(d["pool"]),
        nsvmp_pool=None if d.get("nsvmp_pool") is None else pool_config_from_dict(d["nsvmp_pool"]),
        c2=float(d["c2"]),
        fusion=fusion_config_from_dict(d["fusion"]),
        nsvmp_gamma=d.get("nsvmp_gamma"),
        normalize=bool(d["normalize"]),
        centralize=bool(d["centralize"]),
        max_bcd_iters=int(d["max_bcd_iters"]),
        classifier_solver=_solver_from(d.get("classifier_solver")),
    )


@dataclass
class TrainedModel:
    pipeline: str
    config: object  # EvalConfig
    class_count: int
    negative: NegativeBag  # already centred
    center: Optional[np.ndarray] = None
    classifiers: Optional[ActionClassifierSet] = None
    kernel_model: Optional[PrecomputedModel] = None
    svmp_train: Optional[np.ndarray] = None
    nsvmp_train: Optional[np.ndarray] = None
    shift: Optional[MinMaxShift] = None
    gamma: Optional[float] = None

    @property
    def class_ids(self):
        src = self.classifiers if self.classifiers is not None else self.kernel_model
        return tuple(int(c) for c in src.class_ids)


def save_model(model, path):
    header = {
        "pipeline": model.pipeline,
        "config": model.config.to_dict(),
        "class_count": model.class_count,
        "class_ids": list(model.class_ids),
        "gamma": model.gamma,
        "negative_source_tag": model.negative.source_tag,
    }
    arrays = {"negative": np.asarray(model.negative.frames, dtype=np.float64)}
    if model.center is not None:
        arrays["center"] = model.center
    if model.classifiers is not None:
        arrays["weights"] = model.classifiers.weights
        arrays["biases"] = model.classifiers.biases
    if model.kernel_model is not None:
        km = model.kernel_model
        header["kernel_solver"] = km.solver
        arrays["coefficients"] = km.coefficients
        arrays["kernel_biases"] = km.biases
    for name in ("svmp_train", "nsvmp_train"):
        if getattr(model, name) is not None:
            arrays[name] = getattr(model, name)
    if model.shift is not None:
        arrays["shift_lo"] = model.shift.lo
        arrays["shift_hi"] = model.shift.hi
    write_container(path, MODEL_MAGIC, MODEL_VERSION, header, arrays)


def load_model(path):
    head, arrays = read_container(path, MODEL_MAGIC, MODEL_VERSION)
    try:
        ids = tuple(int(c) for c in head["class_ids"])
        classifiers = kernel_model = shift = None
        if "weights" in arrays:
            classifiers = ActionClassifierSet(arrays["weights"], arrays["biases"], ids)
        if "coefficients" in arrays:
            C = arrays["coefficients"]
            kernel_model = PrecomputedModel(C, arrays["kernel_biases"], ids,
                                            head["kernel_solver"], C.shape[1])
        if "shift_lo" in arrays:
            shift = MinMaxShift(arrays["shift_lo"], arrays["shift_hi"])
        return TrainedModel(
            pipeline=head["pipeline"],
            config=eval_config_from_dict(head["config"]),
            class_count=int(head["class_count"]),
            negative=NegativeBag(arrays["negative"], head.get("negative_source_tag", "")),
            center=arrays.get("center"),
            classifiers=classifiers,
            kernel_model=kernel_model,
            svmp_train=arrays.get("svmp_train"),
            nsvmp_train=arrays.get("nsvmp_train"),
            shift=shift,
            gamma=head.get("gamma"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"{path}: incomplete model ({exc})") from exc
