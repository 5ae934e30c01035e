"""Concept classifier: evaluation protocol, training on base-model generations.

The classifier has a shared conv trunk with a penultimate feature vector
(used by the distribution and perceptual metrics) and two linear heads, one
over style tokens and one over shape tokens. It is trained purely on images
generated by the base model and must pass a per-concept accuracy gate on a
held-out split before any trend measurement is trusted.
"""

from __future__ import annotations

import hashlib
import json
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .concepts import SHAPE_TOKENS, STYLE_TOKENS, concept_kind
from .determinism import derive_seed, make_generator
from .errors import GateError, NumericalError
from .generation import generate_images, pair_prompt
from .prompts import Vocabulary
from .unet import build_unet  # noqa: F401  (shared seeding idiom)
from .weights import DenoiserWeights

FEATURE_DIM = 16


@dataclass
class EvalProtocol:
    """Evaluation-data recipe: how many images, for which concepts, how often."""

    seeds_per_concept: int = 50
    images_per_seed: int = 4
    concepts_erase: list = field(default_factory=list)
    concepts_preserve: list = field(default_factory=list)
    runs: int = 3
    sampler_steps: int = 50
    guidance: float = 2.0
    seed: int = 0
    # classifier training budget (images generated per (style, shape) pair)
    clf_train_per_pair: int = 20
    clf_holdout_per_pair: int = 8
    clf_steps: int = 1500
    clf_lr: float = 2e-3
    clf_batch: int = 64
    gate: float = 0.90

    def __post_init__(self):
        for name in ("seeds_per_concept", "images_per_seed", "runs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


class ConceptClassifier(nn.Module):
    def __init__(self, feature_dim: int = FEATURE_DIM):
        super().__init__()
        self.feature_dim = feature_dim
        self.trunk = nn.Sequential(
            nn.Conv2d(3, 16, 3, stride=2, padding=1),  # 16 -> 8
            nn.GroupNorm(4, 16),
            nn.SiLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),  # 8 -> 4
            nn.GroupNorm(8, 32),
            nn.SiLU(),
            nn.Conv2d(32, 32, 3, stride=2, padding=1),  # 4 -> 2
            nn.SiLU(),
        )
        self.to_feature = nn.Linear(32 * 4, feature_dim)
        self.style_head = nn.Linear(feature_dim, len(STYLE_TOKENS))
        self.shape_head = nn.Linear(feature_dim, len(SHAPE_TOKENS))

    def features(self, x: torch.Tensor) -> torch.Tensor:
        h = self.trunk(x).flatten(1)
        return self.to_feature(h)

    def forward(self, x: torch.Tensor):
        f = self.features(x)
        return self.style_head(f), self.shape_head(f)


@dataclass
class ClassifierWeights:
    tensors: "OrderedDict[str, torch.Tensor]"
    feature_dim: int = FEATURE_DIM
    gate_accuracies: dict = field(default_factory=dict)
    _module: ConceptClassifier | None = field(default=None, repr=False, compare=False)

    def module(self) -> ConceptClassifier:
        if self._module is None:
            m = ConceptClassifier(self.feature_dim)
            m.load_state_dict(self.tensors)
            m.requires_grad_(False)
            m.eval()
            self._module = m
        return self._module

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.tensors):
            t = self.tensors[name]
            h.update(name.encode())
            h.update(np.ascontiguousarray(t.detach().to(torch.float64).numpy()).tobytes())
        return h.hexdigest()


def classifier_features(images: torch.Tensor, clf: ClassifierWeights) -> torch.Tensor:
    """Penultimate feature vectors, shape (N, feature_dim)."""
    with torch.no_grad():
        return clf.module().features(images)


def classify_accuracy(images: torch.Tensor, label: str, clf: ClassifierWeights) -> float:
    """Fraction of images whose argmax prediction (on the label's head) is `label`."""
    if images.shape[0] == 0:
        raise ValueError("empty image set")
    kind = concept_kind(label)
    with torch.no_grad():
        style_logits, shape_logits = clf.module()(images)
    if kind == "style":
        pred = style_logits.argmax(dim=1)
        target = STYLE_TOKENS.index(label)
    else:
        pred = shape_logits.argmax(dim=1)
        target = SHAPE_TOKENS.index(label)
    return float((pred == target).to(torch.float64).mean())


def confusion_matrix(images: torch.Tensor, clf: ClassifierWeights) -> np.ndarray:
    """Joint (style, shape) prediction counts, shape (6*4, 2) argmax indices."""
    with torch.no_grad():
        s, h = clf.module()(images)
    return np.stack([s.argmax(1).numpy(), h.argmax(1).numpy()], axis=1)


def _generate_pair_dataset(
    base: DenoiserWeights, vocab: Vocabulary, protocol: EvalProtocol, per_pair: int, split: str
):
    images, style_idx, shape_idx = [], [], []
    for s in STYLE_TOKENS:
        for h in SHAPE_TOKENS:
            prompt = pair_prompt(vocab, s, h, base.arch.max_tokens)
            imgs = generate_images(
                base,
                vocab,
                prompt,
                n_seeds=1,
                images_per_seed=per_pair,
                sampler_steps=protocol.sampler_steps,
                guidance=protocol.guidance,
                seed_root=derive_seed(protocol.seed, "clf-data", split),
                stream_label=f"{s}/{h}",
            )
            images.append(imgs)
            style_idx += [STYLE_TOKENS.index(s)] * per_pair
            shape_idx += [SHAPE_TOKENS.index(h)] * per_pair
    return (
        torch.cat(images),
        torch.tensor(style_idx, dtype=torch.long),
        torch.tensor(shape_idx, dtype=torch.long),
    )


def train_classifier(
    base: DenoiserWeights, vocab: Vocabulary, protocol: EvalProtocol
) -> ClassifierWeights:
    """Train the concept classifier on base-model generations and check the gate.

    Raises GateError (with the per-concept accuracy table) if any concept's
    held-out accuracy falls below ``protocol.gate``.
    """
    x_tr, s_tr, h_tr = _generate_pair_dataset(
        base, vocab, protocol, protocol.clf_train_per_pair, "train"
    )
    x_ho, s_ho, h_ho = _generate_pair_dataset(
        base, vocab, protocol, protocol.clf_holdout_per_pair, "holdout"
    )

    g = make_generator(derive_seed(protocol.seed, "clf-train"))
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(derive_seed(protocol.seed, "clf-init"))
        model = ConceptClassifier()
    opt = torch.optim.Adam(model.parameters(), lr=protocol.clf_lr)
    n = x_tr.shape[0]
    model.train()
    for step in range(protocol.clf_steps):
        idx = torch.randint(0, n, (protocol.clf_batch,), generator=g)
        style_logits, shape_logits = model(x_tr[idx])
        loss = F.cross_entropy(style_logits, s_tr[idx]) + F.cross_entropy(shape_logits, h_tr[idx])
        if not torch.isfinite(loss):
            raise NumericalError(f"classifier training diverged at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
    model.eval()

    clf = ClassifierWeights(
        tensors=OrderedDict((k, v.detach().clone()) for k, v in model.state_dict().items())
    )

    gate_accs = {}
    with torch.no_grad():
        style_logits, shape_logits = model(x_ho)
    s_pred, h_pred = style_logits.argmax(1), shape_logits.argmax(1)
    for i, s in enumerate(STYLE_TOKENS):
        m = s_ho == i
        gate_accs[s] = float((s_pred[m] == i).to(torch.float64).mean())
    for i, h in enumerate(SHAPE_TOKENS):
        m = h_ho == i
        gate_accs[h] = float((h_pred[m] == i).to(torch.float64).mean())
    clf.gate_accuracies = gate_accs

    failing = {c: a for c, a in gate_accs.items() if a < protocol.gate}
    if failing:
        raise GateError(
            f"classifier gate failed (threshold {protocol.gate}): "
            + ", ".join(f"{c}={a:.3f}" for c, a in sorted(failing.items()))
            + f"; full table: {json.dumps(gate_accs)}"
        )
    return clf


def save_classifier(clf: ClassifierWeights, path: Path | str) -> None:
    path = Path(path)
    np.savez(path.with_suffix(".npz"), **{k: v.numpy() for k, v in clf.tensors.items()})
    manifest = {
        "format": "eraselab-classifier-v1",
        "feature_dim": clf.feature_dim,
        "gate_accuracies": clf.gate_accuracies,
        "content_hash": clf.content_hash(),
    }
    path.with_suffix(".json").write_text(json.dumps(manifest, indent=2))


def load_classifier(path: Path | str) -> ClassifierWeights:
    path = Path(path)
    manifest = json.loads(path.with_suffix(".json").read_text())
    with np.load(path.with_suffix(".npz")) as data:
        tensors = OrderedDict((k, torch.from_numpy(np.array(data[k]))) for k in data.files)
    clf = ClassifierWeights(
        tensors=tensors,
        feature_dim=manifest["feature_dim"],
        gate_accuracies=manifest["gate_accuracies"],
    )
    if clf.content_hash() != manifest["content_hash"]:
        raise ValueError(f"classifier content hash mismatch for {path}")
    return clf
