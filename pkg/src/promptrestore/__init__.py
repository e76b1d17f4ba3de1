"""Desk-scale all-in-one image restoration guided by dual learnable prompt pools.

A small numpy-backed library: a tape-autodiff tensor core, task and domain
prompt pools with top-k retrieval and softmax composition, auxiliary
regularization losses, cross-attention fusion with per-layer learnable gates,
a compact U-shaped restoration backbone, a deterministic synthetic
multi-domain dataset, and a reproducible trainer with binary checkpoints.
"""

from .tensor import Tensor, Tape, ShapeError, NonFiniteError

__version__ = "0.1.0"

__all__ = ["Tensor", "Tape", "ShapeError", "NonFiniteError", "__version__"]
