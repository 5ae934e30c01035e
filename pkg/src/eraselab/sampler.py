"""Deterministic skipped-step sampler with classifier-free guidance."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .determinism import make_generator
from .prompts import PromptEmbedding
from .weights import DenoiserWeights


@dataclass
class SamplerConfig:
    num_steps: int = 50
    guidance_scale: float = 2.0
    deterministic: bool = True
    seed: int = 0

    def validate(self, T: int) -> None:
        if self.num_steps < 1 or self.num_steps > T:
            raise ValueError(f"num_steps must be in [1, {T}], got {self.num_steps}")
        if self.guidance_scale < 0:
            raise ValueError(f"guidance_scale must be >= 0, got {self.guidance_scale}")


def sampling_timesteps(T: int, num_steps: int) -> list[int]:
    """Evenly spaced timesteps from T down to 1 (always including both ends)."""
    ts = torch.linspace(T, 1, num_steps).round().to(torch.long)
    out: list[int] = []
    for t in ts.tolist():
        if not out or t < out[-1]:
            out.append(int(t))
    return out


def sample(
    weights: DenoiserWeights,
    cond: PromptEmbedding,
    empty_cond: PromptEmbedding,
    cfg: SamplerConfig,
    batch_size: int = 1,
) -> torch.Tensor:
    """Generate images, shape (batch_size, C, H, W), clipped to [-1, 1].

    The per-step prediction is the guided one, eps_empty + s * (eps_cond -
    eps_empty); scales 0 and 1 collapse exactly to the unconditional and
    conditional predictions.
    """
    schedule = weights.schedule
    cfg.validate(schedule.T)
    if not weights.trained:
        raise ValueError("sampling from untrained weights")
    if weights.has_nan():
        raise ValueError("weights contain NaN")

    model = weights.module()
    arch = weights.arch
    seed = cfg.seed if cfg.deterministic else int(torch.randint(0, 2**62, (1,)))
    g = make_generator(seed)
    x = torch.randn(batch_size, arch.in_channels, arch.image_size, arch.image_size, generator=g)

    ctx_c = cond.vectors.unsqueeze(0).expand(batch_size, -1, -1)
    ctx_e = empty_cond.vectors.unsqueeze(0).expand(batch_size, -1, -1)
    s = cfg.guidance_scale

    steps = sampling_timesteps(schedule.T, cfg.num_steps)
    with torch.no_grad():
        for i, t_now in enumerate(steps):
            t = torch.full((batch_size,), t_now, dtype=torch.long)
            if s == 0.0:
                eps = model(x, t, ctx_e)
            elif s == 1.0:
                eps = model(x, t, ctx_c)
            else:
                both = model(torch.cat([x, x]), torch.cat([t, t]), torch.cat([ctx_e, ctx_c]))
                eps_e, eps_c = both.chunk(2)
                eps = eps_e + s * (eps_c - eps_e)

            ab_now = schedule.alpha_bar(t_now).to(x.dtype)
            x0_pred = (x - torch.sqrt(1.0 - ab_now) * eps) / torch.sqrt(ab_now)
            x0_pred = x0_pred.clamp(-1.0, 1.0)
            if i + 1 < len(steps):
                ab_next = schedule.alpha_bar(steps[i + 1]).to(x.dtype)
                x = torch.sqrt(ab_next) * x0_pred + torch.sqrt(1.0 - ab_next) * eps
            else:
                x = x0_pred
    return x.clamp(-1.0, 1.0)
