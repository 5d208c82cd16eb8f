"""Encoder plus classifier head over concatenated marker representations.

The relation representation of an example is the concatenation of the
encoder hidden states at the subject-begin and object-begin marker
positions (dimension 2 x hidden). A feedforward head over it predicts the
relation distribution including NULL.

The default encoder is a compact transformer trained from scratch over the
corpus vocabulary, which keeps the package self-contained; a pretrained
masked-LM encoder (uncased base for general domains, a scientific-vocab
model for scientific text) can be plugged in through the transformers
library when its weights are available locally.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


@dataclass
class EncoderConfig:
    hidden_size: int = 64
    num_layers: int = 2
    num_heads: int = 4
    max_len: int = 256
    dropout: float = 0.1


class RelationEncoder(nn.Module):
    def __init__(self, vocab_size: int, config: EncoderConfig):
        super().__init__()
        self.config = config
        h = config.hidden_size
        self.token_emb = nn.Embedding(vocab_size, h)
        self.pos_emb = nn.Embedding(config.max_len, h)
        layer = nn.TransformerEncoderLayer(
            d_model=h,
            nhead=config.num_heads,
            dim_feedforward=4 * h,
            dropout=config.dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, config.num_layers)
        self.norm = nn.LayerNorm(h)

    def forward(self, ids: torch.Tensor,
                pad_mask: torch.Tensor) -> torch.Tensor:
        # ids: (B, L) int64; pad_mask: (B, L) bool, True where padding
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.token_emb(ids) + self.pos_emb(positions)[None, :, :]
        x = self.encoder(x, src_key_padding_mask=pad_mask)
        return self.norm(x)


class RelationClassifier(nn.Module):
    """p(y in labels + NULL | Rel) with Rel = h_i (+) h_j."""

    def __init__(self, vocab_size: int, num_classes: int,
                 config: EncoderConfig):
        super().__init__()
        self.encoder = RelationEncoder(vocab_size, config)
        h = config.hidden_size
        self.head = nn.Sequential(
            nn.Linear(2 * h, 2 * h),
            nn.GELU(),
            nn.Linear(2 * h, num_classes),
        )

    @property
    def rep_dim(self) -> int:
        return 2 * self.encoder.config.hidden_size

    def relation_rep(self, ids: torch.Tensor, pad_mask: torch.Tensor,
                     subj_idx: torch.Tensor,
                     obj_idx: torch.Tensor) -> torch.Tensor:
        hidden = self.encoder(ids, pad_mask)
        batch = torch.arange(ids.shape[0], device=ids.device)
        h_i = hidden[batch, subj_idx]
        h_j = hidden[batch, obj_idx]
        return torch.cat([h_i, h_j], dim=-1)

    def forward(self, ids, pad_mask, subj_idx, obj_idx) -> torch.Tensor:
        return self.head(self.relation_rep(ids, pad_mask, subj_idx, obj_idx))
