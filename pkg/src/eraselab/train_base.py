"""Base-model training: joint denoiser + token-embedding learning.

Standard epsilon-prediction objective with conditioning dropout, so the empty
prompt is a trained unconditional anchor. The embedding table is learned here
and frozen into the Vocabulary afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from .concepts import AnchorTable, EMPTY_TOKEN, SHAPE_TOKENS, STYLE_TOKENS, vocabulary_tokens
from .dataset import ConceptCorpus
from .determinism import configure_torch, derive_seed, make_generator
from .errors import NumericalError
from .prompts import Vocabulary, pad_tokens
from .schedule import diffuse, make_noise_schedule
from .unet import UNetArch, build_unet
from .weights import DenoiserWeights, weights_from_module


@dataclass
class TrainBaseConfig:
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    embed_dim: int = 16
    base_channels: int = 16
    max_tokens: int = 12
    steps: int = 3000
    batch_size: int = 32
    lr: float = 2e-3
    # Embeddings get their own small learning rate: the table must stay at a
    # small scale (the attention projections amplify it) so embedding-space
    # perturbations of a few 1e-3 have visible effect on predictions.
    embed_lr: float = 2e-4
    cond_dropout: float = 0.1
    embed_init_std: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.cond_dropout < 1.0:
            raise ValueError(f"cond_dropout must be in [0, 1), got {self.cond_dropout}")
        if self.steps < 1 or self.batch_size < 1:
            raise ValueError("steps and batch_size must be >= 1")


@dataclass
class BaseTrainResult:
    weights: DenoiserWeights
    vocab: Vocabulary
    loss_trace: list = field(default_factory=list)


def train_base(corpus: ConceptCorpus, config: TrainBaseConfig) -> BaseTrainResult:
    """Train the toy diffusion model on the labeled corpus."""
    if len(corpus) == 0:
        raise ValueError("empty dataset")
    missing = {
        (s, h) for s in STYLE_TOKENS for h in SHAPE_TOKENS
    } - corpus.covered_pairs()
    if missing:
        raise ValueError(f"dataset missing concept pairs: {sorted(missing)}")

    configure_torch()
    tokens = vocabulary_tokens()
    token_index = {t: i for i, t in enumerate(tokens)}
    schedule = make_noise_schedule(config.T, config.beta_start, config.beta_end)
    arch = UNetArch(
        base_channels=config.base_channels,
        context_dim=config.embed_dim,
        max_tokens=config.max_tokens,
    )
    model = build_unet(arch, derive_seed(config.seed, "unet-init"))

    g = make_generator(derive_seed(config.seed, "train-base"))
    embeddings = torch.nn.Parameter(
        torch.randn(len(tokens), config.embed_dim, generator=g) * config.embed_init_std
    )
    opt = torch.optim.Adam(
        [
            {"params": list(model.parameters()), "lr": config.lr},
            {"params": [embeddings], "lr": config.embed_lr},
        ]
    )

    # pre-tokenized padded prompts, one per corpus image
    empty_row = [token_index[EMPTY_TOKEN]] * config.max_tokens
    prompt_ids = torch.tensor(
        [
            [token_index[t] for t in pad_tokens(p, config.max_tokens)]
            for p in corpus.prompts
        ],
        dtype=torch.long,
    )
    empty_ids = torch.tensor(empty_row, dtype=torch.long)

    n = len(corpus)
    loss_trace = []
    model.train()
    for step in range(config.steps):
        idx = torch.randint(0, n, (config.batch_size,), generator=g)
        x0 = corpus.images[idx]
        ids = prompt_ids[idx].clone()
        drop = torch.rand(config.batch_size, generator=g) < config.cond_dropout
        ids[drop] = empty_ids
        context = embeddings[ids]

        t = torch.randint(1, config.T + 1, (config.batch_size,), generator=g)
        eps = torch.randn(x0.shape, generator=g)
        xt = diffuse(x0, t, eps, schedule).xt

        pred = model(xt, t, context)
        loss = F.mse_loss(pred, eps)
        if not torch.isfinite(loss):
            raise NumericalError(f"base training diverged (non-finite loss at step {step})")
        opt.zero_grad()
        loss.backward()
        opt.step()
        loss_trace.append(float(loss.detach()))

    weights = weights_from_module(model, schedule, trained=True)
    vocab = Vocabulary(
        tokens=tuple(tokens),
        vectors=embeddings.detach().clone(),
        anchors=AnchorTable(),
    )
    return BaseTrainResult(weights=weights, vocab=vocab, loss_trace=loss_trace)
