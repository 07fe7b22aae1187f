"""spanrl: separable B-spline function approximation for small-budget RL."""

__version__ = "0.1.0"

from .bspline import SplineBasis
from .mlp import MlpConfig, MlpNetwork, mlp_param_count
from .optim import AdamConfig, ParamStore, adam_step, grad_check, matvec, soft_update
from .span import SpanConfig, SpanNetwork, span_param_count

__all__ = [
    "AdamConfig",
    "MlpConfig",
    "MlpNetwork",
    "ParamStore",
    "SpanConfig",
    "SpanNetwork",
    "SplineBasis",
    "adam_step",
    "grad_check",
    "matvec",
    "mlp_param_count",
    "soft_update",
    "span_param_count",
]
