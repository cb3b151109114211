from .linalg import acyclicity_value, least_squares
from .optim import SGD, Adam, clip_grad_norm, make_optimizer
from .rng import RngStream
from .tensor import (
    GraphError,
    ShapeError,
    Tensor,
    add,
    add_n,
    as_tensor,
    backward,
    concat,
    exp,
    log,
    log_sigmoid,
    matmul,
    mean,
    mul,
    power,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax,
    sub,
    sum_,
    tanh,
    transpose,
)

__all__ = [
    "Adam",
    "GraphError",
    "RngStream",
    "SGD",
    "ShapeError",
    "Tensor",
    "acyclicity_value",
    "add",
    "add_n",
    "as_tensor",
    "backward",
    "clip_grad_norm",
    "concat",
    "exp",
    "least_squares",
    "log",
    "log_sigmoid",
    "make_optimizer",
    "matmul",
    "mean",
    "mul",
    "power",
    "relu",
    "reshape",
    "scale",
    "sigmoid",
    "softmax",
    "sub",
    "sum_",
    "tanh",
    "transpose",
]
