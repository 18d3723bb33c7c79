"""Model loading and batched embedding, per encoder.

Heavy imports (torch, transformers, torchvision) stay inside functions so
table queries and CLI help never pay for them. Every load failure becomes
WeightsUnavailable: this package is the only place weights exist, and
callers should see one error type whether the cause was a missing file,
a download failure, or a bad checkpoint.
"""

from __future__ import annotations

import numpy as np

from .encoders import EncoderInfo, ExtractionSpec
from .errors import InvalidLayer, WeightsUnavailable


def layer_request(info: EncoderInfo, layer_id: str) -> int | None:
    """None = the tower's final (pooled/projected) output; an int k = the
    class-token snapshot after block k."""
    if layer_id == info.layers[-1]:
        return None
    return int(layer_id.lstrip("L"))


class ClipVisionBackend:
    """A transformers CLIP vision tower with projection head."""

    def __init__(self, model, input_size: int | None = None):
        self.model = model.eval()
        self.input_size = int(input_size or model.config.image_size)

    def embed(self, batch: np.ndarray, layer: int | None) -> np.ndarray:
        import torch

        with torch.no_grad():
            out = self.model(
                pixel_values=torch.from_numpy(batch),
                output_hidden_states=layer is not None,
            )
        if layer is None:
            vecs = out.image_embeds
        else:
            states = out.hidden_states  # [embeddings, block1, ..., blockN]
            if layer >= len(states):
                raise InvalidLayer(
                    f"block {layer} requested but the model has {len(states) - 1} blocks"
                )
            vecs = states[layer][:, 0, :]  # class token
        return vecs.cpu().numpy().astype(np.float32, copy=True)


class TorchvisionBackend:
    """An ImageNet classifier with its head removed; final features only."""

    def __init__(self, model, input_size: int):
        self.model = model.eval()
        self.input_size = int(input_size)

    def embed(self, batch: np.ndarray, layer: int | None) -> np.ndarray:
        if layer is not None:
            raise InvalidLayer("this backend only exposes its final feature layer")
        import torch

        with torch.no_grad():
            vecs = self.model(torch.from_numpy(batch))
        return vecs.reshape(vecs.shape[0], -1).cpu().numpy().astype(np.float32, copy=True)


class OpenClipBackend:
    """An open_clip model; embeds through encode_image."""

    def __init__(self, model, input_size: int):
        self.model = model.eval()
        self.input_size = int(input_size)

    def embed(self, batch: np.ndarray, layer: int | None) -> np.ndarray:
        if layer is not None:
            raise InvalidLayer("this backend only exposes its final feature layer")
        import torch

        with torch.no_grad():
            vecs = self.model.encode_image(torch.from_numpy(batch))
        return vecs.cpu().numpy().astype(np.float32, copy=True)


def wrap_model(spec: ExtractionSpec, model):
    """Adopt a caller-supplied, already-constructed model (local weights,
    custom checkpoints, test doubles)."""
    info = spec.info
    if spec.encoder_id == "clip-vit-l14":
        return ClipVisionBackend(model)
    if spec.encoder_id == "clip-rn50":
        return OpenClipBackend(model, info.input_size)
    return TorchvisionBackend(model, info.input_size)


def _headless_resnet(model):
    import torch

    model.fc = torch.nn.Identity()
    return model


def _headless_vit(model):
    import torch

    model.heads = torch.nn.Identity()
    return model


def load_backend(spec: ExtractionSpec, weights_path=None):
    """Load pretrained weights for the spec's encoder.

    weights_path overrides the default source: a transformers model
    directory for clip-vit-l14, a state-dict file for the torchvision
    encoders, a checkpoint path for clip-rn50.
    """
    info = spec.info
    enc = spec.encoder_id
    try:
        if enc == "clip-vit-l14":
            from transformers import CLIPVisionModelWithProjection

            src = weights_path or info.pretrained_source.removeprefix("hf:")
            model = CLIPVisionModelWithProjection.from_pretrained(src)
            return ClipVisionBackend(model)

        if enc == "clip-rn50":
            try:
                import open_clip
            except ImportError:
                raise WeightsUnavailable(
                    "clip-rn50 needs the open-clip-torch package"
                ) from None
            model = open_clip.create_model("RN50", pretrained=weights_path or "openai")
            return OpenClipBackend(model, info.input_size)

        if enc == "imagenet-rn50":
            import torch
            from torchvision.models import ResNet50_Weights, resnet50

            if weights_path:
                model = resnet50()
                model.load_state_dict(torch.load(weights_path, map_location="cpu"))
            else:
                model = resnet50(weights=ResNet50_Weights.IMAGENET1K_V1)
            return TorchvisionBackend(_headless_resnet(model), info.input_size)

        if enc == "imagenet-vit-b16":
            import torch
            from torchvision.models import ViT_B_16_Weights, vit_b_16

            if weights_path:
                model = vit_b_16()
                model.load_state_dict(torch.load(weights_path, map_location="cpu"))
            else:
                model = vit_b_16(weights=ViT_B_16_Weights.IMAGENET1K_V1)
            return TorchvisionBackend(_headless_vit(model), info.input_size)
    except WeightsUnavailable:
        raise
    except Exception as exc:  # HF/torch raise a zoo of types for "not available"
        raise WeightsUnavailable(f"could not load weights for {enc}: {exc}") from exc
    raise WeightsUnavailable(f"no loader wired for {enc}")
