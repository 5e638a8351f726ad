"""Dense tensors with reverse-mode differentiation."""
from .functional import (
    BatchNormState,
    batchnorm,
    conv1x1,
    conv3x3,
    elu,
    leaky_relu,
    masked_cross_entropy,
    masked_softmax,
    prelu,
    softmax,
)
from .tensor import (
    NonFiniteError,
    Tensor,
    add,
    as_tensor,
    concat,
    exp,
    log,
    make,
    matmul,
    mean,
    mul,
    reshape,
    sub,
    transpose,
    tsum,
)
from .gradcheck import numerical_grad, gradcheck

__all__ = [
    "BatchNormState", "NonFiniteError", "Tensor", "add", "as_tensor", "batchnorm",
    "concat", "conv1x1", "conv3x3", "elu", "exp", "gradcheck", "leaky_relu", "log",
    "make", "masked_cross_entropy", "masked_softmax", "matmul", "mean", "mul",
    "numerical_grad", "prelu", "reshape", "softmax", "sub", "transpose", "tsum",
]
