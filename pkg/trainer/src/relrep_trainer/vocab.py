"""Whole-token vocabulary for the from-scratch encoder.

Marker tokens are first-class vocabulary entries with their own randomly
initialized embeddings, the standard entity-marker recipe. Unseen context
tokens map to [UNK] at encode time.
"""

from __future__ import annotations

from dataclasses import dataclass

from .data import Example
from .marking import CLS, SEP, marker_names

PAD = "[PAD]"
UNK = "[UNK]"


@dataclass
class Vocab:
    token_to_id: dict[str, int]

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD]

    def __len__(self) -> int:
        return len(self.token_to_id)

    def encode(self, tokens) -> list[int]:
        unk = self.token_to_id[UNK]
        return [self.token_to_id.get(tok, unk) for tok in tokens]


def build_vocab(examples: list[Example]) -> Vocab:
    specials = [PAD, UNK, CLS, SEP]
    markers: set[str] = set()
    words: set[str] = set()
    for ex in examples:
        markers.update(marker_names(ex))
        words.update(ex.tokens)
    ordered = specials + sorted(markers) + sorted(words)
    return Vocab({tok: i for i, tok in enumerate(ordered)})
