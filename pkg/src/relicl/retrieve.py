"""Demonstration selection: exact cosine kNN and a balanced-random baseline.

Search is exact (full scan over the store); train sets at this scale do not
justify approximate indexes, and exactness keeps the brute-force test
oracle meaningful. Ties in similarity break on ascending id so every query
is reproducible.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .corpus import DatasetSplit, REInstance, RelationLabel
from .embed import VectorStore
from .errors import DataError

logger = logging.getLogger(__name__)

STRATEGIES = ("random_balanced", "knn_sent", "knn_entprompt", "knn_ft")

# Embedding regime each kNN strategy expects.
STRATEGY_REGIME = {
    "knn_sent": "sent",
    "knn_entprompt": "entprompt",
    "knn_ft": "ft",
}

# Default shot-count search ranges per dataset; overridable, violations warn.
SHOT_RANGES = {
    "semeval": (5, 30),
    "tacred": (5, 15),
    "scierc": (5, 30),
    "ace05": (5, 25),
}


@dataclass(frozen=True)
class Demonstration:
    """A retrieved labeled example, optionally enriched with reasoning text."""

    instance: REInstance
    label: RelationLabel
    reasoning: Optional[str] = None

    def __post_init__(self) -> None:
        if self.reasoning is not None and not self.reasoning.strip():
            raise DataError(
                f"demonstration {self.instance.id}: reasoning must be non-empty "
                "when present"
            )


@dataclass(frozen=True)
class DemonstrationSet:
    """Ordered demonstrations with per-item provenance.

    provenance[i] is the cosine similarity score for kNN strategies, or the
    string "random" for the balanced-random baseline.
    """

    items: tuple[Demonstration, ...]
    provenance: tuple[Union[float, str], ...]

    def __post_init__(self) -> None:
        if len(self.items) != len(self.provenance):
            raise DataError("provenance length must match items")
        ids = [d.instance.id for d in self.items]
        if len(set(ids)) != len(ids):
            raise DataError("demonstration ids must be pairwise distinct")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def scores(self) -> list[Optional[float]]:
        return [p if isinstance(p, float) else None for p in self.provenance]

    def with_items(self, items: Sequence[Demonstration]) -> "DemonstrationSet":
        return DemonstrationSet(tuple(items), self.provenance)


@dataclass(frozen=True)
class SelectionRequest:
    test_instance: REInstance
    k: int
    strategy: str
    seed: int = 0
    shot_range: Optional[tuple[int, int]] = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise DataError(f"unknown strategy {self.strategy!r}")
        if self.k < 1:
            raise DataError(f"k must be positive, got {self.k}")
        if self.shot_range is not None:
            lo, hi = self.shot_range
            if not lo <= self.k <= hi:
                warnings.warn(
                    f"k={self.k} outside the configured shot range [{lo}, {hi}]",
                    stacklevel=2,
                )


class KnnIndex:
    """Read-only exact cosine search over one vector store."""

    def __init__(self, regime: str, ids: list[str], matrix: np.ndarray):
        self.regime = regime
        self._ids = np.asarray(ids)
        matrix = np.asarray(matrix, dtype=np.float64)
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        self._matrix = matrix / norms

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def dim(self) -> int:
        return int(self._matrix.shape[1])


def build_index(store: VectorStore) -> KnnIndex:
    """Normalize a store into a query-ready index; store stays untouched."""
    ids, matrix = store.matrix()
    if not ids:
        raise DataError("cannot build an index over an empty store")
    return KnnIndex(store.regime, ids, matrix)


def knn_query(index: KnnIndex, query: np.ndarray, k: int,
              exclude: Optional[set[str]] = None) -> list[tuple[str, float]]:
    """Top-k ids by cosine similarity, descending; ties break on ascending id.

    Excluded ids are never returned; returns min(k, available) results.
    """
    if k < 1:
        raise DataError(f"k must be positive, got {k}")
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1 or query.shape[0] != index.dim:
        raise DataError(
            f"query dim {query.shape} does not match index dim {index.dim}"
        )
    qnorm = np.linalg.norm(query)
    if qnorm == 0.0:
        raise DataError("cannot query with a zero vector")
    scores = index._matrix @ (query / qnorm)
    order = np.lexsort((index._ids, -scores))
    exclude = exclude or set()
    out: list[tuple[str, float]] = []
    for i in order:
        instance_id = str(index._ids[i])
        if instance_id in exclude:
            continue
        out.append((instance_id, float(scores[i])))
        if len(out) == k:
            break
    return out


def select_random_balanced(train: DatasetSplit, request: SelectionRequest,
                           include_null: bool = True) -> DemonstrationSet:
    """Label-balanced random selection.

    Labels take turns in a seed-shuffled round-robin; each turn draws one
    example uniformly without replacement from that label's pool, skipping
    exhausted labels. Per-label counts therefore differ by at most one
    whenever every pool is large enough. NULL participates as an ordinary
    label by default; include_null=False restricts the pool to the
    pre-defined relations.
    """
    if request.strategy != "random_balanced":
        raise DataError(f"wrong strategy {request.strategy!r} for random selection")
    candidates = [inst for inst in train.instances
                  if inst.id != request.test_instance.id
                  and (include_null or not inst.gold_label.is_null)]
    if request.k > len(candidates):
        raise DataError(
            f"k={request.k} exceeds the {len(candidates)} available training "
            "examples"
        )
    verbalize = train.schema.verbalize
    pools: dict[str, list[REInstance]] = {}
    for inst in candidates:
        pools.setdefault(verbalize(inst.gold_label), []).append(inst)
    keys = sorted(pools)
    rng = np.random.default_rng(request.seed)
    order = [keys[i] for i in rng.permutation(len(keys))]
    shuffled = {}
    for key in keys:
        pool = pools[key]
        shuffled[key] = [pool[i] for i in rng.permutation(len(pool))]
    chosen: list[Demonstration] = []
    cursor = {key: 0 for key in keys}
    while len(chosen) < request.k:
        progressed = False
        for key in order:
            if len(chosen) == request.k:
                break
            pos = cursor[key]
            if pos >= len(shuffled[key]):
                continue
            cursor[key] = pos + 1
            inst = shuffled[key][pos]
            chosen.append(Demonstration(inst, inst.gold_label))
            progressed = True
        if not progressed:
            break
    return DemonstrationSet(tuple(chosen), tuple(["random"] * len(chosen)))


def select_knn(train: DatasetSplit, index: KnnIndex, request: SelectionRequest,
               test_vector: np.ndarray) -> DemonstrationSet:
    """Top-k most similar training instances, self excluded, most similar first."""
    regime = STRATEGY_REGIME.get(request.strategy)
    if regime is None:
        raise DataError(f"strategy {request.strategy!r} is not a kNN strategy")
    if index.regime != regime:
        raise DataError(
            f"strategy {request.strategy!r} needs a {regime!r} index, got "
            f"{index.regime!r}"
        )
    if test_vector is None:
        raise DataError(f"missing test vector for {request.test_instance.id!r}")
    by_id = train.by_id()
    hits = knn_query(index, test_vector, request.k,
                     exclude={request.test_instance.id})
    items = []
    scores = []
    for instance_id, score in hits:
        inst = by_id.get(instance_id)
        if inst is None:
            raise DataError(
                f"index id {instance_id!r} is not part of split {train.name!r}"
            )
        items.append(Demonstration(inst, inst.gold_label))
        scores.append(score)
    return DemonstrationSet(tuple(items), tuple(scores))


def selection_record(test_id: str, strategy: str, k: int,
                     demos: DemonstrationSet) -> dict:
    """Audit-log form of one selection."""
    items = []
    for demo, score in zip(demos.items, demos.scores()):
        items.append({"id": demo.instance.id, "score": score})
    return {"test_id": test_id, "strategy": strategy, "k": k, "items": items}


def write_selections(records: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
