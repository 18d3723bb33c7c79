"""Encoder bridge: pretrained vision backbones in, .ufdb feature banks out.

The detection toolkit itself never touches model weights; this package is
the one place they live. It decodes images, optionally perturbs them
(blur / JPEG) before encoding, runs a chosen backbone layer, and writes
the embeddings to the bank format the toolkit consumes.
"""

from .augment import AugmentPolicy, apply_policy, gaussian_blur, jpeg_compress, policy_draws
from .backends import load_backend, wrap_model
from .encoders import ENCODERS, EncoderInfo, ExtractionSpec, encoder_info, list_encoders
from .errors import (
    DecodeFailure,
    ExtractError,
    InvalidLayer,
    UnknownEncoder,
    WeightsUnavailable,
)
from .extract import ExtractReport, extract
from .preprocess import preprocess_hash, preprocess_params, to_model_input
from .writer import write_bank

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
