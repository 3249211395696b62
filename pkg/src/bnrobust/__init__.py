"""L2, L1 and TopK batch normalization with a weight-noise robustness harness."""
from .estimator import BatchNormScaler, BNMLPClassifier
from .exceptions import (
    BNRobustError,
    ConfigError,
    ContractError,
    DegenerateInputError,
    DimensionError,
    DivergenceError,
    FormatError,
    ParameterError,
)
from .gradnoise import GradNoiseEstimate, ScalarQuadratic, check_bound, estimate_C, full_gradient
from .noise import (
    DEFAULT_ETAS,
    LayerNoiseStats,
    NoiseSweepConfig,
    SweepResult,
    average_normalized_accuracy,
    inject_noise,
    layer_weight_std,
    normalized_accuracy,
    run_sweep,
)
from .norm import (
    BatchNormLayer,
    BNCache,
    NormKind,
    bn_backward,
    bn_forward_eval,
    bn_forward_train,
    sigma_l1,
    sigma_l2,
    sigma_topk,
)
from .tensor import SeededRng, gaussian, matmul, mean_axis0

__version__ = "0.1.0"
