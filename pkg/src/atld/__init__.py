"""Robust-training toolkit: latent-distribution adversarial training on 2-D toys."""

from atld.tensor import Tensor, NumericError, DomainError, backward, input_gradient

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "NumericError",
    "DomainError",
    "backward",
    "input_gradient",
    "__version__",
]
