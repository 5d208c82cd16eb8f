"""On-disk synthetic corpora for pipeline-level tests.

One-hot "ft" vectors aligned with gold labels make retrieval perfectly
label-separable, which pins down expected end-to-end behavior; random
vectors destroy the signal for contrast.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from relicl.corpus import DatasetSplit, write_dataset, write_schema
from relicl.embed import VectorStore

from conftest import make_schema, synth_split


def build_split(labels, per_label, null_count, schema, name):
    if isinstance(per_label, int):
        counts = {lab: per_label for lab in labels}
    else:
        counts = dict(per_label)
    if null_count:
        counts[schema.null_name] = null_count
    return synth_split(counts, schema, name=name, prefix=f"{name}:")


def onehot_store(split: DatasetSplit, labels: list[str],
                 include_null_axis: bool) -> VectorStore:
    dim = len(labels) + (1 if include_null_axis else 0)
    store = VectorStore("ft", dim)
    for inst in split.instances:
        vec = np.zeros(dim, dtype=np.float32)
        if inst.gold_label.is_null:
            vec[-1] = 1.0
        else:
            vec[labels.index(inst.gold_label.name)] = 1.0
        store.add(inst.id, vec)
    return store


def random_store(split: DatasetSplit, dim: int, seed: int) -> VectorStore:
    rng = np.random.default_rng(seed)
    store = VectorStore("ft", dim)
    for inst in split.instances:
        vec = rng.standard_normal(dim).astype(np.float32)
        store.add(inst.id, vec / np.linalg.norm(vec))
    return store


def write_corpus_with_onehot_vectors(root: Path, labels, train_per_label=6,
                                     test_per_label=2, null_train=0,
                                     null_test=0, seed=0,
                                     vector_mode="onehot") -> dict:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    schema = make_schema(labels)
    train = build_split(labels, train_per_label, null_train, schema, "train")
    test = build_split(labels, test_per_label, null_test, schema, "test")
    paths = {
        "root": root,
        "schema": root / "schema.json",
        "train": root / "train.jsonl",
        "test": root / "test.jsonl",
        "train_ft": root / "train_ft.jsonl",
        "test_ft": root / "test_ft.jsonl",
    }
    write_schema(schema, paths["schema"])
    write_dataset(train, paths["train"])
    write_dataset(test, paths["test"])
    include_null = bool(null_train or null_test)
    if vector_mode == "onehot":
        train_store = onehot_store(train, list(labels), include_null)
        test_store = onehot_store(test, list(labels), include_null)
    else:
        dim = len(labels) + (1 if include_null else 0)
        train_store = random_store(train, dim, seed)
        test_store = random_store(test, dim, seed + 1)
    train_store.save(paths["train_ft"])
    test_store.save(paths["test_ft"])
    paths["splits"] = (schema, train, test)
    return paths
