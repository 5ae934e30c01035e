"""Vocabulary, prompt embeddings, and anchor-prompt construction.

The vocabulary's embedding table is learned jointly with the denoiser during
base training and frozen afterwards; every operation here is a pure function
of frozen state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import torch

from .concepts import AnchorTable, EMPTY_TOKEN, concept_kind, concept_prompt_tokens


@dataclass
class Vocabulary:
    tokens: tuple
    vectors: torch.Tensor  # (V, d), frozen after base training
    anchors: AnchorTable

    def __post_init__(self):
        if len(self.tokens) != self.vectors.shape[0]:
            raise ValueError("token count != embedding rows")
        if EMPTY_TOKEN not in self.tokens:
            raise ValueError("vocabulary is missing the empty token")
        self._index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self._index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def index_of(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise KeyError(f"unknown token: {token!r}") from None

    def vector_of(self, token: str) -> torch.Tensor:
        return self.vectors[self.index_of(token)]

    def content_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update("\x00".join(self.tokens).encode())
        h.update(np.ascontiguousarray(self.vectors.to(torch.float64).numpy()).tobytes())
        return h.hexdigest()


@dataclass
class PromptEmbedding:
    """Token sequence, looked-up vectors, and the concept-position mask."""

    tokens: tuple
    vectors: torch.Tensor  # (L, d)
    concept_mask: torch.Tensor  # (L,) bool, True exactly where token == concept
    concept: str

    def __len__(self) -> int:
        return len(self.tokens)


def embed_prompt(tokens, vocab: Vocabulary, concept: str) -> PromptEmbedding:
    """Row-wise embedding lookup with a string-equality concept mask."""
    tokens = tuple(tokens)
    idx = torch.tensor([vocab.index_of(t) for t in tokens], dtype=torch.long)
    vectors = vocab.vectors[idx]
    mask = torch.tensor([t == concept for t in tokens], dtype=torch.bool)
    return PromptEmbedding(tokens=tokens, vectors=vectors, concept_mask=mask, concept=concept)


def pad_tokens(tokens, length: int) -> list:
    """Right-pad a token sequence with the empty token to a fixed length."""
    tokens = list(tokens)
    if len(tokens) > length:
        raise ValueError(f"prompt of {len(tokens)} tokens exceeds pad length {length}")
    return tokens + [EMPTY_TOKEN] * (length - len(tokens))


def empty_prompt(vocab: Vocabulary, length: int, concept: str = "") -> PromptEmbedding:
    return embed_prompt([EMPTY_TOKEN] * length, vocab, concept or EMPTY_TOKEN)


class AnchorKind(str, Enum):
    WORD = "word"
    MASK = "mask"
    LONG = "long"
    DESC_INCLUSIVE = "desc_inclusive"
    DESC_EXCLUSIVE = "desc_exclusive"
    ADVERSARIAL = "adversarial"


@dataclass(frozen=True)
class AnchorSpec:
    """Anchor construction recipe: kind plus the token material it needs."""

    kind: AnchorKind
    word: str | None = None  # anchor word (word/mask/long; desc defaults to the concept)
    prefix_len: int = 0  # long anchors: shared filler-prefix length

    def __post_init__(self):
        if self.kind in (AnchorKind.WORD, AnchorKind.MASK) and not self.word:
            raise ValueError(f"{self.kind.value} anchor requires an anchor word")
        if self.kind is AnchorKind.LONG:
            if not self.word:
                raise ValueError("long anchor requires an anchor word")
            if self.prefix_len < 0:
                raise ValueError("prefix length must be >= 0")

    def label(self) -> str:
        if self.kind is AnchorKind.LONG:
            return f"long[{self.prefix_len}]:{self.word}"
        if self.kind in (AnchorKind.WORD, AnchorKind.MASK):
            return f"{self.kind.value}:{self.word}"
        if self.word:
            return f"{self.kind.value}:{self.word}"
        return self.kind.value


def _fill_template(template, concept_word: str) -> list:
    return [concept_word if t == "<concept>" else t for t in template]


def _desc_tokens(spec: AnchorSpec, concept: str, vocab: Vocabulary) -> list:
    table = vocab.anchors
    anchor_word = spec.word or concept
    if anchor_word not in table.attributes:
        raise KeyError(f"no attribute declaration for {anchor_word!r}")
    if concept not in table.attributes:
        raise KeyError(f"no attribute declaration for {concept!r}")
    shared = [a for a in table.attributes[anchor_word] if a in set(table.attributes[concept])]
    if spec.kind is AnchorKind.DESC_EXCLUSIVE:
        defining = set(table.defining[concept])
        shared = [a for a in shared if a not in defining]
    return shared


def build_anchor_prompt(spec: AnchorSpec, concept: str, vocab: Vocabulary) -> list:
    """Token sequence of the anchor prompt for the given spec and concept."""
    tokens = _anchor_pair(spec, concept, vocab)[1]
    for t in tokens:
        vocab.index_of(t)
    return tokens


def build_prompt_pair(spec: AnchorSpec, concept: str, vocab: Vocabulary) -> tuple:
    """(undesirable prompt, anchor prompt) token pair for a fixed-anchor run.

    The two prompts differ only at concept positions (plus the declared
    prefix/attribute slots), so alignment targets stay local to the concept.
    """
    pu, anchor = _anchor_pair(spec, concept, vocab)
    for t in pu + anchor:
        vocab.index_of(t)
    return pu, anchor


def _anchor_pair(spec: AnchorSpec, concept: str, vocab: Vocabulary) -> tuple:
    table = vocab.anchors
    if spec.kind is AnchorKind.WORD:
        return [concept], [spec.word]
    if spec.kind is AnchorKind.MASK:
        return (
            _fill_template(table.mask_template, concept),
            _fill_template(table.mask_template, spec.word),
        )
    if spec.kind is AnchorKind.LONG:
        if spec.prefix_len > len(table.filler_sentence):
            raise ValueError(
                f"prefix length {spec.prefix_len} exceeds filler sentence "
                f"({len(table.filler_sentence)} tokens)"
            )
        prefix = list(table.filler_sentence[: spec.prefix_len])
        return prefix + [concept], prefix + [spec.word]
    if spec.kind in (AnchorKind.DESC_INCLUSIVE, AnchorKind.DESC_EXCLUSIVE):
        return [concept], _desc_tokens(spec, concept, vocab)
    if spec.kind is AnchorKind.ADVERSARIAL:
        pu = concept_prompt_tokens(concept)
        return pu, list(pu)
    raise ValueError(f"unhandled anchor kind: {spec.kind}")


def anchor_similarity_rank(specs, concept: str, vocab: Vocabulary) -> list:
    """Specs ordered by cosine(mean anchor embedding, concept embedding), descending.

    Ties keep declaration order. Returns (spec, similarity) pairs.
    """
    specs = list(specs)
    if len(specs) < 2:
        raise ValueError("ranking needs at least 2 anchor specs")
    cvec = vocab.vector_of(concept).to(torch.float64)
    scored = []
    for i, spec in enumerate(specs):
        tokens = build_anchor_prompt(spec, concept, vocab)
        if not tokens:
            raise ValueError(f"anchor spec {spec.label()} produced an empty prompt")
        mean = embed_prompt(tokens, vocab, concept).vectors.to(torch.float64).mean(dim=0)
        sim = torch.nn.functional.cosine_similarity(mean, cvec, dim=0).item()
        scored.append((i, spec, sim))
    scored.sort(key=lambda x: (-x[2], x[0]))
    return [(spec, sim) for _, spec, sim in scored]


def word_anchor_specs(concept: str, vocab: Vocabulary, roles=None) -> list:
    """The four word-anchor analogs declared for a concept, in role order."""
    roles = list(roles or ("closest", "imitated", "parent", "least"))
    declared = vocab.anchors.word_anchors[concept]
    return [AnchorSpec(AnchorKind.WORD, word=declared[r]) for r in roles]


def save_vocabulary(vocab: Vocabulary, path: Path | str) -> None:
    """JSON document (token list, embedding-matrix reference, anchor table).

    The embedding matrix itself goes to a sibling .npy file that the JSON
    references by name.
    """
    path = Path(path)
    emb_name = path.stem + "_embeddings.npy"
    np.save(path.parent / emb_name, vocab.vectors.numpy())
    doc = {
        "format": "eraselab-vocab-v1",
        "tokens": list(vocab.tokens),
        "embedding_dim": vocab.dim,
        "embedding_file": emb_name,
        "anchor_table": vocab.anchors.to_dict(),
        "content_hash": vocab.content_hash(),
    }
    path.write_text(json.dumps(doc, indent=2))


def load_vocabulary(path: Path | str) -> Vocabulary:
    path = Path(path)
    doc = json.loads(path.read_text())
    vectors = torch.from_numpy(np.load(path.parent / doc["embedding_file"]))
    vocab = Vocabulary(
        tokens=tuple(doc["tokens"]),
        vectors=vectors,
        anchors=AnchorTable.from_dict(doc["anchor_table"]),
    )
    if vocab.content_hash() != doc["content_hash"]:
        raise ValueError(f"vocabulary content hash mismatch for {path}")
    return vocab
