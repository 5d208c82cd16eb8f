"""Fine-tuning loop with dev-selected checkpointing.

Training covers the whole train split, NULL examples included; that
supervision over the full NULL set is what lets the exported
representations separate NULL from the pre-defined relations downstream.

Default hyperparameters (lr 2e-5, batch 32, 10 epochs) are inherited from
the entity-marker fine-tuning literature rather than tuned here; the tiny
from-scratch encoder used in tests needs a larger learning rate, so
everything is overridable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .data import Example, Schema
from .marking import mark_entities
from .model import EncoderConfig, RelationClassifier
from .vocab import Vocab, build_vocab

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class Hyperparameters:
    learning_rate: float = 2e-5
    batch_size: int = 32
    epochs: int = 10
    seed: int = 13
    encoder: EncoderConfig = field(default_factory=EncoderConfig)


@dataclass
class Batch:
    ids: torch.Tensor
    pad_mask: torch.Tensor
    subj_idx: torch.Tensor
    obj_idx: torch.Tensor
    labels: torch.Tensor


@dataclass
class TrainedModel:
    model: RelationClassifier
    vocab: Vocab
    schema: Schema
    class_names: list[str]
    dev_metric: float
    seed: int

    @property
    def hidden_size(self) -> int:
        return self.model.encoder.config.hidden_size


def encode_examples(examples: list[Example], vocab: Vocab, max_len: int):
    """Marked, id-encoded tensors plus marker positions, one row each."""
    rows = []
    for ex in examples:
        marked = mark_entities(ex)
        if len(marked.tokens) > max_len:
            raise ValueError(
                f"example {ex.id!r} has {len(marked.tokens)} marked tokens, "
                f"over the encoder limit {max_len}"
            )
        rows.append((vocab.encode(marked.tokens), marked.subj_marker_idx,
                     marked.obj_marker_idx))
    return rows


def collate(rows, labels, pad_id: int) -> Batch:
    width = max(len(ids) for ids, _, _ in rows)
    ids = torch.full((len(rows), width), pad_id, dtype=torch.long)
    pad_mask = torch.ones((len(rows), width), dtype=torch.bool)
    subj = torch.zeros(len(rows), dtype=torch.long)
    obj = torch.zeros(len(rows), dtype=torch.long)
    for r, (row_ids, s, o) in enumerate(rows):
        ids[r, : len(row_ids)] = torch.tensor(row_ids, dtype=torch.long)
        pad_mask[r, : len(row_ids)] = False
        subj[r] = s
        obj[r] = o
    return Batch(ids, pad_mask, subj, obj,
                 torch.tensor(labels, dtype=torch.long))


def extraction_micro_f1(golds: list[int], preds: list[int],
                        null_id: int) -> float:
    """Micro-F1 over non-NULL decisions; accuracy when no gold is non-NULL."""
    tp = sum(1 for g, p in zip(golds, preds) if g == p != null_id)
    fp = sum(1 for g, p in zip(golds, preds) if p != null_id and p != g)
    fn = sum(1 for g, p in zip(golds, preds) if g != null_id and p != g)
    if tp + fn == 0:  # no non-NULL gold: degenerate, use accuracy
        return sum(1 for g, p in zip(golds, preds) if g == p) / len(golds)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn)
    return (2 * precision * recall / (precision + recall)
            if precision + recall else 0.0)


@torch.no_grad()
def evaluate(model: RelationClassifier, rows, labels, pad_id: int,
             null_id: int, batch_size: int) -> float:
    model.eval()
    preds: list[int] = []
    for start in range(0, len(rows), batch_size):
        batch = collate(rows[start : start + batch_size],
                        labels[start : start + batch_size], pad_id)
        logits = model(batch.ids, batch.pad_mask, batch.subj_idx,
                       batch.obj_idx)
        preds.extend(logits.argmax(dim=-1).tolist())
    return extraction_micro_f1(labels, preds, null_id)


def train(train_examples: list[Example], dev_examples: list[Example],
          schema: Schema, hp: Hyperparameters) -> TrainedModel:
    """Fit the classifier on the full train split; keep the best dev epoch."""
    torch.manual_seed(hp.seed)
    rng = np.random.default_rng(hp.seed)

    vocab = build_vocab(train_examples)
    class_names = schema.class_names()
    class_index = {name: i for i, name in enumerate(class_names)}
    null_id = class_index[schema.null_name]

    train_rows = encode_examples(train_examples, vocab, hp.encoder.max_len)
    train_labels = [class_index[schema.class_of(ex)] for ex in train_examples]
    dev_rows = encode_examples(dev_examples, vocab, hp.encoder.max_len)
    dev_labels = [class_index[schema.class_of(ex)] for ex in dev_examples]

    model = RelationClassifier(len(vocab), len(class_names), hp.encoder)
    optimizer = torch.optim.AdamW(model.parameters(), lr=hp.learning_rate)
    loss_fn = nn.CrossEntropyLoss()

    best_metric = -1.0
    best_state = None
    order = np.arange(len(train_rows))
    for epoch in range(hp.epochs):
        model.train()
        rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), hp.batch_size):
            chunk = order[start : start + hp.batch_size]
            batch = collate([train_rows[i] for i in chunk],
                            [train_labels[i] for i in chunk], vocab.pad_id)
            optimizer.zero_grad()
            logits = model(batch.ids, batch.pad_mask, batch.subj_idx,
                           batch.obj_idx)
            loss = loss_fn(logits, batch.labels)
            if not math.isfinite(loss.item()):
                raise TrainingDiverged(
                    f"loss became {loss.item()} at epoch {epoch}, step "
                    f"{start // hp.batch_size}, lr {hp.learning_rate}"
                )
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item() * len(chunk)
        metric = evaluate(model, dev_rows, dev_labels, vocab.pad_id, null_id,
                          hp.batch_size)
        logger.info("epoch %d: train loss %.4f, dev micro-F1 %.4f", epoch,
                    epoch_loss / len(order), metric)
        if metric > best_metric:
            best_metric = metric
            best_state = {k: v.detach().clone()
                          for k, v in model.state_dict().items()}
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return TrainedModel(model=model, vocab=vocab, schema=schema,
                        class_names=class_names, dev_metric=best_metric,
                        seed=hp.seed)
