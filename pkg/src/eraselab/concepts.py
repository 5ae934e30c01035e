"""Static declarations of the toy concept world.

Concepts are (style, shape) pairs: 6 style tokens with distinct palettes and
4 shape tokens with distinct geometry. Each concept additionally declares
word-anchor analogs (closest / imitated / parent / least-similar) and an
attribute-token set with a defining subset; these live in config rather than
being produced by any language model, so anchor construction is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

EMPTY_TOKEN = "<empty>"

STYLE_TOKENS = ["style_A", "style_B", "style_C", "style_D", "style_E", "style_F"]
SHAPE_TOKENS = ["circle", "square", "triangle", "cross"]

# Shared filler sentence used for long-prefix prompts; prefixes are its first
# k tokens. Fillers also appear (with random lengths) in base-training prompts
# so their embeddings are trained to be near-neutral context.
FILLER_SENTENCE = ["this", "is", "just", "one", "more", "very", "nice", "plain"]

# Masked-sentence template; "<concept>" is replaced by the concept / anchor word.
MASK_TEMPLATE = ["a", "very", "nice", "<concept>", "thing"]

STYLE_ATTRIBUTES = {
    "style_A": ["warm", "vivid", "crimson_hue"],
    "style_B": ["warm", "soft", "amber_hue"],
    "style_C": ["cool", "vivid", "navy_hue"],
    "style_D": ["cool", "soft", "teal_hue"],
    "style_E": ["cool", "soft", "moss_hue"],
    "style_F": ["warm", "vivid", "orchid_hue"],
}
STYLE_DEFINING = {
    "style_A": ["crimson_hue"],
    "style_B": ["amber_hue"],
    "style_C": ["navy_hue"],
    "style_D": ["teal_hue"],
    "style_E": ["moss_hue"],
    "style_F": ["orchid_hue"],
}

SHAPE_ATTRIBUTES = {
    "circle": ["compact", "round_form"],
    "square": ["compact", "boxy_form"],
    "triangle": ["pointy", "wedge_form"],
    "cross": ["pointy", "plus_form"],
}
SHAPE_DEFINING = {
    "circle": ["round_form"],
    "square": ["boxy_form"],
    "triangle": ["wedge_form"],
    "cross": ["plus_form"],
}

# Word-anchor analogs per concept: the four roles played by ChatGPT answers in
# the original anchor taxonomy, pinned as a static table.
WORD_ANCHORS = {
    "style_A": {"closest": "style_B", "imitated": "style_F", "parent": "warm", "least": "style_D"},
    "style_B": {"closest": "style_A", "imitated": "style_F", "parent": "warm", "least": "style_C"},
    "style_C": {"closest": "style_D", "imitated": "style_E", "parent": "cool", "least": "style_B"},
    "style_D": {"closest": "style_C", "imitated": "style_E", "parent": "cool", "least": "style_A"},
    "style_E": {"closest": "style_D", "imitated": "style_C", "parent": "cool", "least": "style_F"},
    "style_F": {"closest": "style_A", "imitated": "style_B", "parent": "warm", "least": "style_E"},
    "circle": {"closest": "square", "imitated": "triangle", "parent": "thing", "least": "cross"},
    "square": {"closest": "circle", "imitated": "cross", "parent": "thing", "least": "triangle"},
    "triangle": {"closest": "cross", "imitated": "circle", "parent": "thing", "least": "square"},
    "cross": {"closest": "triangle", "imitated": "square", "parent": "thing", "least": "circle"},
}

# Style palettes: (foreground RGB, background RGB) in [0, 1]. Warm styles share
# a cream background, navy/teal share a pale blue one, so visually (and after
# embedding training, semantically) similar styles form families.
STYLE_PALETTES = {
    "style_A": ((0.86, 0.08, 0.18), (0.99, 0.91, 0.78)),
    "style_B": ((0.93, 0.62, 0.12), (0.99, 0.91, 0.78)),
    "style_C": ((0.10, 0.16, 0.72), (0.78, 0.86, 0.98)),
    "style_D": ((0.06, 0.62, 0.60), (0.78, 0.86, 0.98)),
    "style_E": ((0.24, 0.47, 0.14), (0.90, 0.94, 0.82)),
    "style_F": ((0.80, 0.16, 0.72), (0.99, 0.88, 0.96)),
}

_EXTRA_TOKENS = ["a", "thing"]


def vocabulary_tokens() -> list[str]:
    """Ordered token list for the toy vocabulary (empty token first)."""
    tokens: list[str] = [EMPTY_TOKEN]
    seen = set(tokens)
    for tok in (
        _EXTRA_TOKENS
        + FILLER_SENTENCE
        + STYLE_TOKENS
        + SHAPE_TOKENS
        + sorted({a for attrs in STYLE_ATTRIBUTES.values() for a in attrs})
        + sorted({a for attrs in SHAPE_ATTRIBUTES.values() for a in attrs})
    ):
        if tok not in seen:
            tokens.append(tok)
            seen.add(tok)
    return tokens


def concept_kind(concept: str) -> str:
    if concept in STYLE_TOKENS:
        return "style"
    if concept in SHAPE_TOKENS:
        return "shape"
    raise KeyError(f"not a concept token: {concept!r}")


def attributes_of(concept: str) -> list[str]:
    return list(STYLE_ATTRIBUTES[concept] if concept_kind(concept) == "style" else SHAPE_ATTRIBUTES[concept])


def defining_attributes_of(concept: str) -> list[str]:
    return list(STYLE_DEFINING[concept] if concept_kind(concept) == "style" else SHAPE_DEFINING[concept])


def concept_prompt_tokens(concept: str) -> list[str]:
    """Default undesirable-prompt form for a concept ("a <style> thing" / "a <shape>")."""
    if concept_kind(concept) == "style":
        return ["a", concept, "thing"]
    return ["a", concept]


@dataclass
class AnchorTable:
    """Per-concept anchor-word roles, attributes, and defining attributes."""

    word_anchors: dict = field(default_factory=lambda: {k: dict(v) for k, v in WORD_ANCHORS.items()})
    attributes: dict = field(
        default_factory=lambda: {**{k: list(v) for k, v in STYLE_ATTRIBUTES.items()},
                                 **{k: list(v) for k, v in SHAPE_ATTRIBUTES.items()}}
    )
    defining: dict = field(
        default_factory=lambda: {**{k: list(v) for k, v in STYLE_DEFINING.items()},
                                 **{k: list(v) for k, v in SHAPE_DEFINING.items()}}
    )
    filler_sentence: list = field(default_factory=lambda: list(FILLER_SENTENCE))
    mask_template: list = field(default_factory=lambda: list(MASK_TEMPLATE))

    def to_dict(self) -> dict:
        return {
            "word_anchors": self.word_anchors,
            "attributes": self.attributes,
            "defining": self.defining,
            "filler_sentence": self.filler_sentence,
            "mask_template": self.mask_template,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnchorTable":
        return cls(
            word_anchors={k: dict(v) for k, v in d["word_anchors"].items()},
            attributes={k: list(v) for k, v in d["attributes"].items()},
            defining={k: list(v) for k, v in d["defining"].items()},
            filler_sentence=list(d["filler_sentence"]),
            mask_template=list(d["mask_template"]),
        )
