from app.numeric.tensor import Function, Tensor, as_tensor, backward, is_grad_enabled, no_grad
from app.numeric.optim import Optimizer, OptimizerState, optimizer_step
from app.numeric.functions import tensor_algebra

__all__ = [
    "Function",
    "Tensor",
    "as_tensor",
    "backward",
    "is_grad_enabled",
    "no_grad",
    "Optimizer",
    "OptimizerState",
    "optimizer_step",
    "tensor_algebra",
]
