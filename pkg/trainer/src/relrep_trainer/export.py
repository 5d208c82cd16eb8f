"""Relation-representation export in the toolkit's "rev1" vector format.

One JSONL record per instance, regime "ft", dim = 2 x encoder hidden size,
values printed with 9 significant digits so the exchange is bit-stable
across implementations. A small manifest records the encoder, hidden size,
dev metric and seed.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .data import Example
from .train import TrainedModel, collate, encode_examples


@torch.no_grad()
def relation_reps(trained: TrainedModel, examples: list[Example],
                  batch_size: int = 64) -> np.ndarray:
    """Deterministic inference-mode representations, one row per example."""
    trained.model.eval()
    rows = encode_examples(examples, trained.vocab,
                           trained.model.encoder.config.max_len)
    out = []
    for start in range(0, len(rows), batch_size):
        batch = collate(rows[start : start + batch_size],
                        [0] * len(rows[start : start + batch_size]),
                        trained.vocab.pad_id)
        reps = trained.model.relation_rep(batch.ids, batch.pad_mask,
                                          batch.subj_idx, batch.obj_idx)
        out.append(reps.cpu().numpy().astype(np.float32))
    if not out:
        return np.zeros((0, trained.model.rep_dim), dtype=np.float32)
    return np.concatenate(out, axis=0)


def _format_values(vec: np.ndarray) -> str:
    return "[" + ",".join(f"{float(v):.9g}" for v in vec) + "]"


def export_vectors(trained: TrainedModel, examples: list[Example],
                   out_path: str | Path, batch_size: int = 64) -> np.ndarray:
    """Write the vector file; returns the in-memory reps for verification."""
    ids = [ex.id for ex in examples]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate ids in the export split")
    reps = relation_reps(trained, examples, batch_size=batch_size)
    dim = trained.model.rep_dim
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps({"format": "rev1", "dim": dim, "regime": "ft"},
                        sort_keys=True)]
    for ex_id, vec in zip(ids, reps):
        lines.append(
            '{"id": %s, "regime": "ft", "dim": %d, "values": %s}'
            % (json.dumps(ex_id), dim, _format_values(vec))
        )
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return reps


def read_vectors(path: str | Path) -> tuple[int, dict[str, np.ndarray]]:
    """Read a rev1 vector file back: (dim, id -> float32 vector)."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != "rev1":
            raise ValueError(f"{path}: unsupported format "
                             f"{header.get('format')!r}")
        dim = int(header["dim"])
        records: dict[str, np.ndarray] = {}
        for line in fh:
            if not line.strip():
                continue
            raw = json.loads(line)
            records[raw["id"]] = np.asarray(raw["values"], dtype=np.float32)
    return dim, records


def write_manifest(trained: TrainedModel, encoder_name: str,
                   path: str | Path) -> None:
    doc = {
        "encoder": encoder_name,
        "hidden_size": trained.hidden_size,
        "rep_dim": trained.model.rep_dim,
        "dev_metric": trained.dev_metric,
        "seed": trained.seed,
        "classes": trained.class_names,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
