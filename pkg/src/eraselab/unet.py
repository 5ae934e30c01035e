"""Tiny conditional U-Net denoiser for 3x16x16 images.

Prompt conditioning enters through cross-attention blocks (image queries over
prompt-token keys/values) at the 8x8 and 4x4 resolutions; those blocks are the
only parameters touched by unlearning, identified by name via
``is_cross_attention_param``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

CROSS_ATTENTION_MARKER = "xattn"


def is_cross_attention_param(name: str) -> bool:
    """Cross-attention tag, a function of the parameter name only."""
    return CROSS_ATTENTION_MARKER in name


@dataclass(frozen=True)
class UNetArch:
    in_channels: int = 3
    base_channels: int = 16
    context_dim: int = 16
    image_size: int = 16
    max_tokens: int = 12

    def to_dict(self) -> dict:
        return {
            "in_channels": self.in_channels,
            "base_channels": self.base_channels,
            "context_dim": self.context_dim,
            "image_size": self.image_size,
            "max_tokens": self.max_tokens,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UNetArch":
        return cls(**d)


def timestep_embedding(t: torch.Tensor, dim: int, dtype: torch.dtype) -> torch.Tensor:
    """Sinusoidal embedding of integer timesteps, shape (B, dim)."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=dtype) / max(half - 1, 1))
    args = t.to(dtype)[:, None] * freqs[None, :]
    return torch.cat([torch.cos(args), torch.sin(args)], dim=-1)


class ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, time_dim: int):
        super().__init__()
        groups = math.gcd(8, in_ch)
        self.norm1 = nn.GroupNorm(groups, in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, out_ch)
        self.norm2 = nn.GroupNorm(math.gcd(8, out_ch), out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x, temb):
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(F.silu(temb))[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class CrossAttention(nn.Module):
    """Single-head cross-attention of image positions over prompt tokens."""

    def __init__(self, channels: int, context_dim: int):
        super().__init__()
        self.norm = nn.GroupNorm(math.gcd(8, channels), channels)
        self.to_q = nn.Linear(channels, channels, bias=False)
        self.to_k = nn.Linear(context_dim, channels, bias=False)
        self.to_v = nn.Linear(context_dim, channels, bias=False)
        self.to_out = nn.Linear(channels, channels)
        self.scale = channels ** -0.5

    def forward(self, x, context):
        b, c, h, w = x.shape
        q = self.to_q(self.norm(x).reshape(b, c, h * w).transpose(1, 2))
        k = self.to_k(context)
        v = self.to_v(context)
        attn = torch.softmax(q @ k.transpose(1, 2) * self.scale, dim=-1)
        out = self.to_out(attn @ v)
        return x + out.transpose(1, 2).reshape(b, c, h, w)


class CondUNet(nn.Module):
    """16x16 -> 8x8 -> 4x4 encoder/decoder with cross-attention at 8 and 4."""

    def __init__(self, arch: UNetArch):
        super().__init__()
        self.arch = arch
        c = arch.base_channels
        tdim = 4 * c
        self.time_mlp = nn.Sequential(nn.Linear(c, tdim), nn.SiLU(), nn.Linear(tdim, tdim))

        self.conv_in = nn.Conv2d(arch.in_channels, c, 3, padding=1)
        self.down1 = ResBlock(c, c, tdim)
        self.pool1 = nn.Conv2d(c, c, 3, stride=2, padding=1)
        self.down2 = ResBlock(c, 2 * c, tdim)
        self.down2_xattn = CrossAttention(2 * c, arch.context_dim)
        self.pool2 = nn.Conv2d(2 * c, 2 * c, 3, stride=2, padding=1)

        self.mid1 = ResBlock(2 * c, 2 * c, tdim)
        self.mid_xattn = CrossAttention(2 * c, arch.context_dim)
        self.mid2 = ResBlock(2 * c, 2 * c, tdim)

        self.up2 = ResBlock(4 * c, 2 * c, tdim)
        self.up2_xattn = CrossAttention(2 * c, arch.context_dim)
        self.up1 = ResBlock(3 * c, c, tdim)
        self.norm_out = nn.GroupNorm(math.gcd(8, c), c)
        self.conv_out = nn.Conv2d(c, arch.in_channels, 3, padding=1)
        nn.init.zeros_(self.conv_out.weight)
        nn.init.zeros_(self.conv_out.bias)

    def forward(self, x: torch.Tensor, t: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        temb = self.time_mlp(timestep_embedding(t, self.arch.base_channels, x.dtype))
        h1 = self.down1(self.conv_in(x), temb)              # (B, c, 16, 16)
        h2 = self.down2(self.pool1(h1), temb)               # (B, 2c, 8, 8)
        h2 = self.down2_xattn(h2, context)
        h3 = self.mid1(self.pool2(h2), temb)                # (B, 2c, 4, 4)
        h3 = self.mid_xattn(h3, context)
        h3 = self.mid2(h3, temb)

        u2 = F.interpolate(h3, scale_factor=2, mode="nearest")
        u2 = self.up2(torch.cat([u2, h2], dim=1), temb)     # (B, 2c, 8, 8)
        u2 = self.up2_xattn(u2, context)
        u1 = F.interpolate(u2, scale_factor=2, mode="nearest")
        u1 = self.up1(torch.cat([u1, h1], dim=1), temb)     # (B, c, 16, 16)
        return self.conv_out(F.silu(self.norm_out(u1)))


def build_unet(arch: UNetArch, seed: int) -> CondUNet:
    """Construct a CondUNet with seed-determined initialization."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(seed))
        model = CondUNet(arch)
    return model
