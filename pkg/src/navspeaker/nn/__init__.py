from . import kernels
from .tensor import Tensor, no_grad
from .layers import Module, Parameter

__all__ = ["kernels", "Tensor", "no_grad", "Module", "Parameter"]
