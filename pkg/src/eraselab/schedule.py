"""Diffusion noise schedule and the closed-form forward noising step."""

from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear beta schedule with cumulative alpha products.

    ``betas`` and ``alpha_bars`` have length T and are stored in float64;
    timesteps are 1-indexed (t in [1, T]), so ``alpha_bars[t - 1]`` is
    the product of (1 - beta_s) for s <= t.
    """

    T: int
    betas: torch.Tensor
    alpha_bars: torch.Tensor

    def alpha_bar(self, t: torch.Tensor | int) -> torch.Tensor:
        """alpha-bar at (1-indexed) timestep t; t may be an int or index tensor."""
        if isinstance(t, int):
            if not 1 <= t <= self.T:
                raise ValueError(f"timestep {t} outside [1, {self.T}]")
            return self.alpha_bars[t - 1]
        t = torch.as_tensor(t, dtype=torch.long)
        if torch.any(t < 1) or torch.any(t > self.T):
            raise ValueError(f"timestep outside [1, {self.T}]")
        return self.alpha_bars[t - 1]


def make_noise_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linear interpolation of betas and the cumulative product of (1 - beta)."""
    if T < 2:
        raise ValueError(f"T must be >= 2, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(
            f"betas must satisfy 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    betas = torch.linspace(beta_start, beta_end, T, dtype=torch.float64)
    if torch.any(betas <= 0) or torch.any(betas >= 1):
        raise ValueError("betas out of (0, 1)")
    alpha_bars = torch.cumprod(1.0 - betas, dim=0)
    return NoiseSchedule(T=T, betas=betas, alpha_bars=alpha_bars)


@dataclass
class NoisySample:
    """A (possibly batched) forward-noised sample.

    xt = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps holds exactly.
    """

    x0: torch.Tensor
    t: torch.Tensor  # long tensor, shape (B,) for batched input, () otherwise
    eps: torch.Tensor
    xt: torch.Tensor


def diffuse(x0: torch.Tensor, t, eps: torch.Tensor, schedule: NoiseSchedule) -> NoisySample:
    """Closed-form forward noising of x0 at timestep t with the given noise."""
    if x0.shape != eps.shape:
        raise ValueError(f"x0 shape {tuple(x0.shape)} != eps shape {tuple(eps.shape)}")
    t = torch.as_tensor(t, dtype=torch.long)
    ab = schedule.alpha_bar(t).to(x0.dtype)
    # broadcast per-sample alpha-bar over trailing image dims
    while ab.dim() < x0.dim():
        ab = ab.unsqueeze(-1)
    xt = torch.sqrt(ab) * x0 + torch.sqrt(1.0 - ab) * eps
    return NoisySample(x0=x0, t=t, eps=eps, xt=xt)
