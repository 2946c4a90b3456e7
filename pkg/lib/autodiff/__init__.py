from .checkpoint import load_tensors, save_tensors, serialize_tensors, tensors_digest
from .gradcheck import gradient_check
from .optim import Adam, AdamState, adam_step
from .tensor import ComputationRecord, FlopCounter, Tensor, as_tensor, is_grad_enabled, no_grad

__all__ = [
    "Adam",
    "AdamState",
    "ComputationRecord",
    "FlopCounter",
    "Tensor",
    "adam_step",
    "as_tensor",
    "gradient_check",
    "is_grad_enabled",
    "load_tensors",
    "no_grad",
    "save_tensors",
    "serialize_tensors",
    "tensors_digest",
]
