"""Magic Formula tire parameter and uncertainty estimation."""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
from .tire_model import (  # noqa: F401
    REFERENCE_PARAMS,
    ParamBounds,
    TireParams,
    evaluate,
    evaluate_batch,
    gradients,
    stiffness_at_origin,
)
