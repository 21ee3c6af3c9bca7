"""Max-margin pooling of frame-feature bags for sequence classification."""

__version__ = "0.1.0"

from .dataio import (
    BagDataset,
    SyntheticSpec,
    export_table,
    import_table,
    load_dataset,
    sample_bag,
    sample_negative_bag,
    save_dataset,
    synthesize,
)
from .errors import *  # noqa: F401,F403
from .evaluation import EvalConfig, cross_validate, fit_model, predict_model
from .fusion import FusedKernelConfig, fused_gram, predict_precomputed, train_precomputed
from .joint import ActionClassifierSet, JointConfig, bcd_fit, predict, train_action_classifiers
from .kernel import (
    GramMatrix,
    HomogeneousMapConfig,
    KernelSpec,
    gram,
    homogeneous_kernel,
    homogeneous_map,
    kernel_eval,
)
from .ksvm import DualSolution, kernel_decision, train_kernel_svm
from .mil_pool import (
    FeatureBag,
    NegativeBag,
    NSVMPDescriptor,
    PoolConfig,
    SVMPDescriptor,
    centralize,
    nsvmp_pool,
    positive_fraction,
    svmp_pool,
)
from .model import TrainedModel, load_model, save_model
from .svm_core import (
    DualState,
    Hyperplane,
    SolverConfig,
    TrainStats,
    decision_value,
    kkt_residual,
    train_linear_svm,
)
