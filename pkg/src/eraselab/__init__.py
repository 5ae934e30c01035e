"""Desk-scale lab for concept unlearning in a tiny text-conditioned diffusion model."""

__version__ = "0.1.0"
