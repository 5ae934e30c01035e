"""Batched image generation with per-(label, seed-index) RNG streams.

Seed streams are keyed by a label that excludes model identity, so before- and
after-model generations for the same (concept, seed index) share their initial
noise and stay pairable for perceptual distances.
"""

from __future__ import annotations

import torch

from .concepts import concept_prompt_tokens
from .determinism import derive_seed
from .prompts import PromptEmbedding, Vocabulary, embed_prompt, empty_prompt, pad_tokens
from .sampler import SamplerConfig, sample
from .weights import DenoiserWeights


def padded_prompt(vocab: Vocabulary, tokens, concept: str, max_tokens: int) -> PromptEmbedding:
    return embed_prompt(pad_tokens(tokens, max_tokens), vocab, concept)


def concept_prompt(vocab: Vocabulary, concept: str, max_tokens: int) -> PromptEmbedding:
    return padded_prompt(vocab, concept_prompt_tokens(concept), concept, max_tokens)


def pair_prompt(vocab: Vocabulary, style: str, shape: str, max_tokens: int) -> PromptEmbedding:
    return padded_prompt(vocab, ["a", style, shape], style, max_tokens)


def generate_images(
    weights: DenoiserWeights,
    vocab: Vocabulary,
    prompt: PromptEmbedding,
    n_seeds: int,
    images_per_seed: int,
    sampler_steps: int,
    guidance: float,
    seed_root: int,
    stream_label: str,
) -> torch.Tensor:
    """(n_seeds * images_per_seed, C, H, W) images, one sampler call per seed."""
    empty = empty_prompt(vocab, weights.arch.max_tokens)
    chunks = []
    for i in range(n_seeds):
        cfg = SamplerConfig(
            num_steps=sampler_steps,
            guidance_scale=guidance,
            deterministic=True,
            seed=derive_seed(seed_root, stream_label, i),
        )
        chunks.append(sample(weights, prompt, empty, cfg, batch_size=images_per_seed))
    return torch.cat(chunks, dim=0)
