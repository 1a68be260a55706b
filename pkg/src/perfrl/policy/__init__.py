from .kernels import BACKEND_NAME, available_backends
from .model import (
    CandidateGroupSpec,
    PolicyModel,
    PolicyParams,
    TokenDistribution,
    load_checkpoint,
    save_checkpoint,
)
from .tokenizer import ByteTokenizer

__all__ = [
    "BACKEND_NAME",
    "ByteTokenizer",
    "CandidateGroupSpec",
    "PolicyModel",
    "PolicyParams",
    "TokenDistribution",
    "available_backends",
    "load_checkpoint",
    "save_checkpoint",
]
