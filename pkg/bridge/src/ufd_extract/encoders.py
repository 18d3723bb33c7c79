"""Supported encoder table and extraction specs.

Every encoder row names its layer options and the output dimension per
layer, so callers can size downstream storage before loading any weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .augment import AugmentPolicy
from .errors import InvalidLayer, UnknownEncoder


@dataclass(frozen=True)
class EncoderInfo:
    encoder_id: str
    family: str                    # "clip" or "imagenet": picks preprocessing constants
    layers: tuple[str, ...]
    default_layer: str
    dims: Mapping[str, int]        # layer_id -> output dimension
    pretrained_source: str         # where load_backend() finds weights
    input_size: int

    def dim_for(self, layer_id: str) -> int:
        if layer_id not in self.dims:
            raise InvalidLayer(f"{self.encoder_id} has no layer {layer_id!r}; options: {self.layers}")
        return self.dims[layer_id]


def _info(**kw) -> EncoderInfo:
    kw["dims"] = MappingProxyType(dict(kw["dims"]))
    return EncoderInfo(**kw)


# The ViT tower exposes intermediate blocks as class-token snapshots (the
# trunk's hidden width); its final layer is the pooled-and-projected
# embedding, which is what the detection workflow stores by default.
ENCODERS: Mapping[str, EncoderInfo] = MappingProxyType({
    "clip-vit-l14": _info(
        encoder_id="clip-vit-l14",
        family="clip",
        layers=("L0", "L8", "L16", "L24"),
        default_layer="L24",
        dims={"L0": 1024, "L8": 1024, "L16": 1024, "L24": 768},
        pretrained_source="hf:openai/clip-vit-large-patch14",
        input_size=224,
    ),
    "clip-rn50": _info(
        encoder_id="clip-rn50",
        family="clip",
        layers=("final",),
        default_layer="final",
        dims={"final": 1024},
        pretrained_source="open_clip:RN50/openai",
        input_size=224,
    ),
    "imagenet-rn50": _info(
        encoder_id="imagenet-rn50",
        family="imagenet",
        layers=("final",),
        default_layer="final",
        dims={"final": 2048},
        pretrained_source="torchvision:resnet50/IMAGENET1K_V1",
        input_size=224,
    ),
    "imagenet-vit-b16": _info(
        encoder_id="imagenet-vit-b16",
        family="imagenet",
        layers=("final",),
        default_layer="final",
        dims={"final": 768},
        pretrained_source="torchvision:vit_b_16/IMAGENET1K_V1",
        input_size=224,
    ),
})


def list_encoders() -> tuple[EncoderInfo, ...]:
    """All supported encoders, stable order."""
    return tuple(ENCODERS.values())


def encoder_info(encoder_id: str) -> EncoderInfo:
    try:
        return ENCODERS[encoder_id]
    except KeyError:
        raise UnknownEncoder(
            f"unknown encoder {encoder_id!r}; supported: {', '.join(ENCODERS)}"
        ) from None


@dataclass(frozen=True)
class ExtractionSpec:
    """One extraction configuration: which encoder, which layer, how to batch.

    layer_id defaults to the encoder's default layer when left empty.
    """

    encoder_id: str
    layer_id: str = ""
    batch_size: int = 8
    augment: AugmentPolicy | None = None
    device: str = "cpu"

    def __post_init__(self):
        info = encoder_info(self.encoder_id)
        layer = self.layer_id or info.default_layer
        if layer not in info.layers:
            raise InvalidLayer(f"{self.encoder_id} has no layer {layer!r}; options: {info.layers}")
        object.__setattr__(self, "layer_id", layer)
        if self.batch_size <= 0:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")

    @property
    def info(self) -> EncoderInfo:
        return encoder_info(self.encoder_id)

    @property
    def dim(self) -> int:
        """Advertised output dimension for this encoder/layer pair."""
        return self.info.dim_for(self.layer_id)
