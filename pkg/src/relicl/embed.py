"""Dense vector production and persistence for retrieval.

Three representation regimes feed the kNN retriever: "sent" embeds the raw
sentence, "entprompt" embeds a template that names the entity pair before
the context, and "ft" imports relation representations exported by a
fine-tuned entity-marker model. Vectors live in an append-only JSONL store
("rev1" format) so they can be exchanged with the external trainer
bit-stably.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Protocol

import numpy as np
import requests

from .corpus import DatasetSplit, REInstance
from .errors import DataError, ProviderError, TransientProviderError

REGIMES = ("sent", "entprompt", "ft")
STORE_FORMAT = "rev1"

ENTITY_PROMPT_TEMPLATE = "The relation between '{subj}' and '{obj}' in the context: {sentence}"


def entity_prompt_text(instance: REInstance) -> str:
    """Reconstruct the context with the entity pair named up front.

    Entity texts are substituted verbatim, no escaping.
    """
    return ENTITY_PROMPT_TEMPLATE.format(
        subj=instance.subject.text,
        obj=instance.object.text,
        sentence=instance.sentence,
    )


def entity_marked_tokens(instance: REInstance) -> list[str]:
    """Token sequence with entity-marker tokens inserted around both spans.

    Markers carry the entity type when present ([SUB_PER] ... [/SUB_PER]),
    plain [SUB]/[OBJ] otherwise; the sequence is framed by [CLS] and [SEP].
    """
    inserts: list[tuple[int, str]] = []
    for mention, tag in ((instance.subject, "SUB"), (instance.object, "OBJ")):
        name = f"{tag}_{mention.entity_type}" if mention.entity_type else tag
        inserts.append((mention.start, f"[{name}]"))
        inserts.append((mention.end, f"[/{name}]"))
    tokens = list(instance.tokens)
    # Insert right-to-left so earlier offsets stay valid; at equal offsets a
    # close marker must land before the open marker that follows it, so the
    # open marker is inserted first.
    for pos, marker in sorted(inserts,
                              key=lambda e: (-e[0], e[1].startswith("[/"))):
        tokens.insert(pos, marker)
    return ["[CLS]"] + tokens + ["[SEP]"]


def entity_marked_text(instance: REInstance) -> str:
    return " ".join(entity_marked_tokens(instance))


@dataclass(frozen=True)
class EmbeddingRecord:
    instance_id: str
    regime: str
    values: np.ndarray  # float32, L2 norm > 0

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def _check_vector(instance_id: str, values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise DataError(f"vector for {instance_id!r} must be a non-empty 1-d array")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"vector for {instance_id!r} has non-finite components")
    if float(np.linalg.norm(arr)) == 0.0:
        raise DataError(f"zero vector rejected for {instance_id!r}")
    return arr


def _format_values(arr: np.ndarray) -> str:
    # 9 significant decimal digits: enough to round-trip float32 exactly.
    return "[" + ",".join(f"{float(v):.9g}" for v in arr) + "]"


class VectorStore:
    """Append-only collection of embedding records, one regime and dim."""

    def __init__(self, regime: str, dim: int):
        if regime not in REGIMES:
            raise DataError(f"unknown regime {regime!r}")
        if dim <= 0:
            raise DataError(f"dim must be positive, got {dim}")
        self.regime = regime
        self.dim = dim
        self._records: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, instance_id: str) -> bool:
        return instance_id in self._records

    def ids(self) -> list[str]:
        return list(self._records)

    def get(self, instance_id: str) -> np.ndarray:
        if instance_id not in self._records:
            raise DataError(f"no vector stored for id {instance_id!r}")
        return self._records[instance_id]

    def add(self, instance_id: str, values: np.ndarray) -> None:
        if instance_id in self._records:
            raise DataError(f"duplicate id in vector store: {instance_id!r}")
        arr = _check_vector(instance_id, values)
        if arr.shape[0] != self.dim:
            raise DataError(
                f"dim mismatch for {instance_id!r}: got {arr.shape[0]}, "
                f"store has {self.dim}"
            )
        self._records[instance_id] = arr

    def records(self) -> Iterable[EmbeddingRecord]:
        for instance_id, arr in self._records.items():
            yield EmbeddingRecord(instance_id, self.regime, arr)

    def matrix(self) -> tuple[list[str], np.ndarray]:
        """All vectors stacked row-wise, paired with their ids."""
        ids = self.ids()
        if not ids:
            return ids, np.zeros((0, self.dim), dtype=np.float32)
        return ids, np.stack([self._records[i] for i in ids])

    def restricted(self, keep_ids: set[str]) -> "VectorStore":
        """A new store holding only the given ids (order preserved)."""
        out = VectorStore(self.regime, self.dim)
        for instance_id, arr in self._records.items():
            if instance_id in keep_ids:
                out._records[instance_id] = arr
        return out

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = json.dumps(
            {"format": STORE_FORMAT, "dim": self.dim, "regime": self.regime},
            sort_keys=True,
        )
        lines = [header]
        for instance_id, arr in self._records.items():
            lines.append(
                '{"id": %s, "regime": %s, "dim": %d, "values": %s}'
                % (json.dumps(instance_id), json.dumps(self.regime), self.dim,
                   _format_values(arr))
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "VectorStore":
        path = Path(path)
        if not path.exists():
            raise DataError(f"vector file not found: {path}")
        with path.open(encoding="utf-8") as fh:
            header_line = fh.readline().strip()
            try:
                header = json.loads(header_line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:1: bad header: {exc}") from exc
            if header.get("format") != STORE_FORMAT:
                raise DataError(f"{path}: unsupported format {header.get('format')!r}")
            store = cls(regime=header["regime"], dim=int(header["dim"]))
            for lineno, line in enumerate(fh, start=2):
                line = line.strip()
                if not line:
                    continue
                try:
                    raw = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
                if raw.get("regime") != store.regime:
                    raise DataError(
                        f"{path}:{lineno}: regime {raw.get('regime')!r} does not "
                        f"match header {store.regime!r}"
                    )
                if int(raw.get("dim", -1)) != store.dim:
                    raise DataError(f"{path}:{lineno}: dim mismatch")
                try:
                    store.add(raw["id"], np.asarray(raw["values"], dtype=np.float32))
                except DataError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from exc
        return store


class EmbeddingProvider(Protocol):
    name: str
    dim: int

    def embed(self, texts: list[str]) -> list[np.ndarray]: ...


class HashProjectionProvider:
    """Deterministic test-local provider: text -> seeded Gaussian projection.

    Not a semantic embedding; exists so pipelines are runnable and testable
    without any model runtime. Identical text always maps to the identical
    unit vector.
    """

    def __init__(self, dim: int = 64, name: str = "hash-projection"):
        self.name = name
        self.dim = dim

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        out = []
        for text in texts:
            digest = hashlib.sha256(f"{self.name}:{text}".encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "little")
            rng = np.random.default_rng(seed)
            vec = rng.standard_normal(self.dim).astype(np.float32)
            vec /= np.linalg.norm(vec)
            out.append(vec)
        return out


class HttpEmbeddingProvider:
    """POST {"texts": [...]} to an embedding service, returns {"vectors": [...]}.

    Endpoint comes from the constructor or RELICL_EMBED_ENDPOINT; the bearer
    token, if any, from RELICL_EMBED_TOKEN. Retries transient failures with
    exponential backoff.
    """

    def __init__(self, dim: int, endpoint: Optional[str] = None,
                 name: str = "http-embed", max_attempts: int = 3,
                 backoff_s: float = 1.0, timeout_s: float = 60.0,
                 session: Optional[requests.Session] = None):
        self.name = name
        self.dim = dim
        self.endpoint = endpoint or os.environ.get("RELICL_EMBED_ENDPOINT")
        if not self.endpoint:
            raise ProviderError(
                "no embedding endpoint configured (set RELICL_EMBED_ENDPOINT)"
            )
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self.timeout_s = timeout_s
        self._session = session or requests.Session()

    def _post(self, texts: list[str]) -> list[list[float]]:
        headers = {}
        token = os.environ.get("RELICL_EMBED_TOKEN")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = self._session.post(
                self.endpoint, json={"texts": texts}, headers=headers,
                timeout=self.timeout_s,
            )
        except requests.RequestException as exc:
            raise TransientProviderError(f"embedding request failed: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientProviderError(f"embedding service HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise ProviderError(f"embedding service HTTP {resp.status_code}: "
                                f"{resp.text[:200]}")
        return resp.json()["vectors"]

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                vectors = self._post(texts)
                break
            except TransientProviderError as exc:
                last = exc
                if attempt + 1 < self.max_attempts:
                    time.sleep(self.backoff_s * (2 ** attempt))
        else:
            raise ProviderError(
                f"embedding provider failed after {self.max_attempts} attempts: {last}"
            )
        if len(vectors) != len(texts):
            raise ProviderError(
                f"embedding service returned {len(vectors)} vectors for "
                f"{len(texts)} texts"
            )
        return [np.asarray(v, dtype=np.float32) for v in vectors]


def regime_text(instance: REInstance, regime: str) -> str:
    if regime == "sent":
        return instance.sentence
    if regime == "entprompt":
        return entity_prompt_text(instance)
    raise DataError(f"regime {regime!r} is not producible from text")


def embed_split(split: DatasetSplit, provider: EmbeddingProvider, regime: str,
                store_path: Optional[str | Path] = None,
                batch_size: int = 32) -> VectorStore:
    """Embed every instance of a split under the given regime.

    When store_path exists, cached ids are skipped and only missing ones are
    embedded (idempotent: a complete store is left byte-identical).
    """
    if regime not in ("sent", "entprompt"):
        raise DataError(f"embed_split regime must be sent|entprompt, got {regime!r}")
    if store_path is not None and Path(store_path).exists():
        store = VectorStore.load(store_path)
        if store.regime != regime:
            raise DataError(
                f"existing store {store_path} holds regime {store.regime!r}, "
                f"requested {regime!r}"
            )
        if store.dim != provider.dim:
            raise DataError(
                f"existing store {store_path} has dim {store.dim}, provider "
                f"produces {provider.dim}"
            )
    else:
        store = VectorStore(regime=regime, dim=provider.dim)

    pending = [inst for inst in split.instances if inst.id not in store]
    for start in range(0, len(pending), batch_size):
        batch = pending[start : start + batch_size]
        texts = [regime_text(inst, regime) for inst in batch]
        vectors = provider.embed(texts)
        for inst, vec in zip(batch, vectors):
            if vec.shape[0] != provider.dim:
                raise ProviderError(
                    f"provider {provider.name} returned dim {vec.shape[0]}, "
                    f"declared {provider.dim}"
                )
            store.add(inst.id, vec)
    if store_path is not None and pending:
        store.save(store_path)
    return store


def import_ft_vectors(path: str | Path, split: DatasetSplit) -> VectorStore:
    """Load trainer-exported relation representations for a split.

    Every record id must resolve to an instance of the split; the regime tag
    must be "ft".
    """
    store = VectorStore.load(path)
    if store.regime != "ft":
        raise DataError(f"{path}: expected regime 'ft', found {store.regime!r}")
    known = {inst.id for inst in split.instances}
    for instance_id in store.ids():
        if instance_id not in known:
            raise DataError(
                f"{path}: id {instance_id!r} does not resolve to any instance "
                f"in split {split.name!r}"
            )
    return store
