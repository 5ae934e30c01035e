"""Denoiser weight snapshots: tagging, hashing, checkpoint I/O, prediction.

A ``DenoiserWeights`` is an immutable named-parameter collection plus the
architecture and noise-schedule constants needed to rebuild the module.
Checkpoints are a .npz named-array archive next to a JSON manifest carrying
parameter names, shapes, cross-attention tags, and schedule constants.
"""

from __future__ import annotations

import hashlib
import json
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .schedule import NoiseSchedule, make_noise_schedule
from .unet import CondUNet, UNetArch, build_unet, is_cross_attention_param


@dataclass
class DenoiserWeights:
    arch: UNetArch
    schedule: NoiseSchedule
    tensors: "OrderedDict[str, torch.Tensor]"
    trained: bool = False
    _module: CondUNet | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        names = list(self.tensors)
        if not any(is_cross_attention_param(n) for n in names):
            raise ValueError("weight collection has an empty cross-attention subset")

    def parameter_names(self) -> list[str]:
        return list(self.tensors)

    def cross_attention_names(self) -> list[str]:
        return [n for n in self.tensors if is_cross_attention_param(n)]

    def has_nan(self) -> bool:
        return any(bool(torch.isnan(t).any()) for t in self.tensors.values())

    def content_hash(self) -> str:
        """SHA-256 over parameter names and float64 bytes, in name order."""
        h = hashlib.sha256()
        for name, t in self.tensors.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(t.detach().to(torch.float64).numpy()).tobytes())
        return h.hexdigest()

    def clone(self) -> "DenoiserWeights":
        return DenoiserWeights(
            arch=self.arch,
            schedule=self.schedule,
            tensors=OrderedDict((n, t.detach().clone()) for n, t in self.tensors.items()),
            trained=self.trained,
        )

    def build_module(self, dtype: torch.dtype = torch.float32) -> CondUNet:
        """Fresh module loaded with these weights (params detached, grad-free)."""
        model = CondUNet(self.arch)
        model.load_state_dict({n: t.to(dtype) for n, t in self.tensors.items()})
        model.requires_grad_(False)
        model.eval()
        return model.to(dtype)

    def module(self) -> CondUNet:
        """Cached read-only module for repeated prediction calls."""
        if self._module is None:
            self._module = self.build_module()
        return self._module


def weights_from_module(
    model: CondUNet, schedule: NoiseSchedule, trained: bool
) -> DenoiserWeights:
    tensors = OrderedDict((n, p.detach().clone()) for n, p in model.named_parameters())
    return DenoiserWeights(arch=model.arch, schedule=schedule, tensors=tensors, trained=trained)


def init_weights(arch: UNetArch, schedule: NoiseSchedule, seed: int) -> DenoiserWeights:
    return weights_from_module(build_unet(arch, seed), schedule, trained=False)


def denoise_predict(xt: torch.Tensor, t, cond, weights) -> torch.Tensor:
    """Noise prediction for (possibly unbatched) xt under prompt conditioning.

    ``cond`` may be a PromptEmbedding or a raw (L, d) / (B, L, d) tensor;
    ``weights`` a DenoiserWeights or an already-built CondUNet. Differentiable
    with respect to the conditioning vectors (and, via the module path, the
    weights).
    """
    vectors = getattr(cond, "vectors", cond)
    model = weights.module() if isinstance(weights, DenoiserWeights) else weights

    unbatched = xt.dim() == 3
    if unbatched:
        xt = xt.unsqueeze(0)
    if xt.dim() != 4:
        raise ValueError(f"xt must be (C,H,W) or (B,C,H,W), got {tuple(xt.shape)}")
    b = xt.shape[0]
    t = torch.as_tensor(t, dtype=torch.long)
    if t.dim() == 0:
        t = t.expand(b)
    if t.shape[0] != b:
        raise ValueError(f"t batch {t.shape[0]} != xt batch {b}")
    if vectors.dim() == 2:
        vectors = vectors.unsqueeze(0).expand(b, -1, -1)
    if vectors.shape[0] != b:
        raise ValueError(f"cond batch {vectors.shape[0]} != xt batch {b}")
    if vectors.shape[1] > model.arch.max_tokens:
        raise ValueError(
            f"prompt length {vectors.shape[1]} exceeds model limit {model.arch.max_tokens}"
        )

    out = model(xt, t, vectors.to(xt.dtype))
    return out.squeeze(0) if unbatched else out


def save_checkpoint(weights: DenoiserWeights, path: Path | str) -> Path:
    """Write <path>.npz + <path>.json; returns the npz path."""
    path = Path(path)
    arrays = {n: t.detach().numpy() for n, t in weights.tensors.items()}
    npz_path = path.with_suffix(".npz")
    np.savez(npz_path, **arrays)
    manifest = {
        "format": "eraselab-checkpoint-v1",
        "trained": weights.trained,
        "arch": weights.arch.to_dict(),
        "schedule": {
            "T": weights.schedule.T,
            "beta_start": float(weights.schedule.betas[0]),
            "beta_end": float(weights.schedule.betas[-1]),
        },
        "content_hash": weights.content_hash(),
        "parameters": [
            {
                "name": n,
                "shape": list(t.shape),
                "dtype": str(t.dtype).removeprefix("torch."),
                "cross_attention": is_cross_attention_param(n),
            }
            for n, t in weights.tensors.items()
        ],
    }
    path.with_suffix(".json").write_text(json.dumps(manifest, indent=2))
    return npz_path


def load_checkpoint(path: Path | str) -> DenoiserWeights:
    path = Path(path)
    manifest = json.loads(path.with_suffix(".json").read_text())
    arch = UNetArch.from_dict(manifest["arch"])
    sch = manifest["schedule"]
    schedule = make_noise_schedule(sch["T"], sch["beta_start"], sch["beta_end"])
    with np.load(path.with_suffix(".npz")) as data:
        tensors = OrderedDict(
            (p["name"], torch.from_numpy(np.array(data[p["name"]])))
            for p in manifest["parameters"]
        )
    weights = DenoiserWeights(
        arch=arch, schedule=schedule, tensors=tensors, trained=manifest["trained"]
    )
    if weights.content_hash() != manifest["content_hash"]:
        raise ValueError(f"checkpoint content hash mismatch for {path}")
    return weights
