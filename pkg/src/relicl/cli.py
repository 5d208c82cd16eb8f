"""Command-line orchestration of the experiment lifecycle.

Commands: ingest, embed, index, reason, run, sweep, eval, report,
sample-subset. A run directory always contains a manifest that records the
full configuration, template version, estimator and provider, so any output
is reconstructible from its manifest alone (given warm caches); re-running
yields byte-identical prediction files.

Exit codes: 0 success, 1 usage, 2 data error, 3 provider error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from . import __version__
from .corpus import (
    DatasetSplit,
    RelationSchema,
    label_histogram,
    load_dataset,
    load_schema,
    null_fraction,
    sample_stratified_subset,
    write_dataset,
)
from .embed import (
    HashProjectionProvider,
    HttpEmbeddingProvider,
    VectorStore,
    embed_split,
    import_ft_vectors,
)
from .errors import (
    BudgetError,
    DataError,
    ProviderError,
    RelIclError,
    UsageError,
)
from .llm import Completer, LlmConfig, ResponseCache, parse_prediction
from .prompt import (
    ESTIMATORS,
    PromptParts,
    ReasoningCache,
    TEMPLATE_VERSION,
    assemble_prompt,
    induce_reasoning,
    render_instructions,
    render_test_block,
)
from .retrieve import (
    SHOT_RANGES,
    STRATEGY_REGIME,
    SelectionRequest,
    build_index,
    select_knn,
    select_random_balanced,
    selection_record,
)
from .scoring import (
    PredPair,
    PredictionSet,
    confusion_to_csv,
    filter_null_setting,
    report_to_json,
    score,
)

logger = logging.getLogger(__name__)

PREDICTIONS_FILE = "predictions.jsonl"
SELECTIONS_FILE = "selections.jsonl"
MANIFEST_FILE = "manifest.json"
REPORT_FILE = "report.json"


@dataclass
class RunConfig:
    """Everything a run needs; location-independent (no output dir)."""

    train_path: str
    test_path: str
    schema_path: str
    dataset_name: str = "dataset"
    strategy: str = "knn_ft"
    k: int = 5
    seed: int = 0
    setting: str = "with_null"
    reasoning: bool = False
    budget_tokens: int = 4097
    estimator: str = "char-ratio"
    train_vectors: Optional[str] = None
    test_vectors: Optional[str] = None
    cache_dir: str = "cache"
    workers: int = 1
    llm: LlmConfig = field(default_factory=LlmConfig)
    # Provider for reasoning generation; defaults to the main llm.
    reasoning_llm: Optional[LlmConfig] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        known_llm = {f.name for f in dataclasses.fields(LlmConfig)}

        def parse_llm(sub: Optional[dict], section: str) -> Optional[LlmConfig]:
            if sub is None:
                return None
            unknown = set(sub) - known_llm
            if unknown:
                raise UsageError(
                    f"unknown {section} config keys: {sorted(unknown)}"
                )
            return LlmConfig(**sub)

        llm = parse_llm(doc.pop("llm", None) or {}, "llm")
        reasoning_llm = parse_llm(doc.pop("reasoning_llm", None),
                                  "reasoning_llm")
        known = {f.name for f in dataclasses.fields(cls)} - {"llm",
                                                             "reasoning_llm"}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown run config keys: {sorted(unknown)}")
        return cls(llm=llm, reasoning_llm=reasoning_llm, **doc)


def load_run_config(config_path: Optional[str],
                    overrides: dict) -> RunConfig:
    doc: dict = {}
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    llm_doc = dict(doc.get("llm") or {})
    for key, value in overrides.items():
        if value is None:
            continue
        if key.startswith("llm_"):
            llm_doc[key[len("llm_"):]] = value
        else:
            doc[key] = value
    doc["llm"] = llm_doc
    required = ("train_path", "test_path", "schema_path")
    missing = [key for key in required if not doc.get(key)]
    if missing:
        raise UsageError(f"missing required config keys: {missing}")
    return RunConfig.from_dict(doc)


def _per_instance_seed(seed: int, test_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{test_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def _load_splits(config: RunConfig):
    """Returns (schema, train, test, train_full, test_full).

    Vector stores are validated against the full splits; the without_null
    setting filters the working splits only.
    """
    schema = load_schema(config.schema_path)
    train_full = load_dataset(config.train_path, schema, name="train")
    test_full = load_dataset(config.test_path, schema, name="test")
    if config.setting == "without_null":
        train = filter_null_setting(train_full)
        test = filter_null_setting(test_full)
    else:
        train, test = train_full, test_full
    return schema, train, test, train_full, test_full


def _load_vector_stores(config: RunConfig, train: DatasetSplit,
                        test: DatasetSplit, train_full: DatasetSplit,
                        test_full: DatasetSplit):
    regime = STRATEGY_REGIME[config.strategy]
    if not config.train_vectors or not config.test_vectors:
        raise UsageError(
            f"strategy {config.strategy!r} needs train_vectors and test_vectors"
        )
    if regime == "ft":
        train_store = import_ft_vectors(config.train_vectors, train_full)
        test_store = import_ft_vectors(config.test_vectors, test_full)
    else:
        train_store = VectorStore.load(config.train_vectors)
        test_store = VectorStore.load(config.test_vectors)
        for store, which in ((train_store, "train"), (test_store, "test")):
            if store.regime != regime:
                raise DataError(
                    f"{which} vectors hold regime {store.regime!r}, strategy "
                    f"{config.strategy!r} needs {regime!r}"
                )
    train_ids = {inst.id for inst in train.instances}
    return train_store.restricted(train_ids), test_store


def _estimator(name: str):
    if name not in ESTIMATORS:
        raise UsageError(f"unknown estimator {name!r} "
                         f"(choose from {sorted(ESTIMATORS)})")
    return ESTIMATORS[name]()


def cmd_run(config: RunConfig, out_dir: str | Path) -> Path:
    """Execute the full pipeline over the test split; resumable.

    Returns the output directory, containing predictions.jsonl,
    selections.jsonl and manifest.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    schema, train, test, train_full, test_full = _load_splits(config)
    estimator = _estimator(config.estimator)
    instructions = render_instructions(schema)

    index = None
    test_store = None
    if config.strategy != "random_balanced":
        train_store, test_store = _load_vector_stores(config, train, test,
                                                      train_full, test_full)
        index = build_index(train_store)

    cache_root = Path(config.cache_dir)
    response_cache = ResponseCache(cache_root / "responses")
    completer = Completer(config.llm, cache=response_cache,
                          estimator=estimator)
    reasoning_cfg = config.reasoning_llm or config.llm
    reasoning_completer = (completer if reasoning_cfg == config.llm
                           else Completer(reasoning_cfg, cache=response_cache,
                                          estimator=estimator))
    reasoning_cache = ReasoningCache(cache_root / "reasoning")
    shot_range = SHOT_RANGES.get(config.dataset_name.lower())

    predictions_path = out / PREDICTIONS_FILE
    done: set[str] = set()
    if predictions_path.exists():
        with predictions_path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    done.add(json.loads(line)["test_id"])

    pending = [inst for inst in test.instances if inst.id not in done]
    effective_ks: list[int] = []

    def process(inst) -> tuple[dict, dict]:
        request = SelectionRequest(
            test_instance=inst,
            k=config.k,
            strategy=config.strategy,
            seed=_per_instance_seed(config.seed, inst.id),
            shot_range=shot_range,
        )
        if config.strategy == "random_balanced":
            demos = select_random_balanced(train, request)
        else:
            demos = select_knn(train, index, request, test_store.get(inst.id))
        if config.reasoning:
            demos = induce_reasoning(demos, schema,
                                     reasoning_completer.complete,
                                     reasoning_cache, reasoning_cfg.provider)
        parts = PromptParts(
            instructions=instructions,
            demonstrations=demos,
            test_text=render_test_block(inst),
            budget_tokens=config.budget_tokens,
        )
        prompt, effective_k = assemble_prompt(parts, estimator, schema)
        completion = completer.complete(prompt)
        prediction = parse_prediction(completion, schema, test_id=inst.id)
        row = {
            "test_id": inst.id,
            "gold": schema.verbalize(inst.gold_label),
            "pred": schema.verbalize(prediction.label),
            "parse_status": prediction.parse_status,
            "effective_k": effective_k,
            "raw_completion": completion,
        }
        return row, selection_record(inst.id, config.strategy, config.k, demos)

    failure: Optional[str] = None
    try:
        with predictions_path.open("a", encoding="utf-8") as pred_fh, \
                (out / SELECTIONS_FILE).open("a", encoding="utf-8") as sel_fh:
            if config.workers > 1:
                with ThreadPoolExecutor(max_workers=config.workers) as pool:
                    results = pool.map(process, pending)
                    for row, sel in results:
                        effective_ks.append(row["effective_k"])
                        pred_fh.write(json.dumps(row, sort_keys=True,
                                                 ensure_ascii=False) + "\n")
                        sel_fh.write(json.dumps(sel, sort_keys=True) + "\n")
            else:
                for inst in pending:
                    row, sel = process(inst)
                    effective_ks.append(row["effective_k"])
                    pred_fh.write(json.dumps(row, sort_keys=True,
                                             ensure_ascii=False) + "\n")
                    sel_fh.write(json.dumps(sel, sort_keys=True) + "\n")
    except RelIclError as exc:
        failure = str(exc)

    manifest = {
        "kind": "run",
        "code_version": __version__,
        "template_version": TEMPLATE_VERSION,
        "estimator": config.estimator,
        "provider": config.llm.provider,
        "seed": config.seed,
        "config": config.to_dict(),
        "status": "failed" if failure else "complete",
        "error": failure,
        "counts": {
            "test": len(test),
            "resumed": len(done),
            "predicted": len(done) + len(effective_ks),
        },
        "effective_k": {
            "min": min(effective_ks) if effective_ks else None,
            "max": max(effective_ks) if effective_ks else None,
            "mean": (sum(effective_ks) / len(effective_ks)
                     if effective_ks else None),
        },
    }
    (out / MANIFEST_FILE).write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    if failure:
        raise DataError(f"run failed (partial outputs kept in {out}): {failure}")
    return out


def read_predictions(path: str | Path, schema: RelationSchema) -> PredictionSet:
    """Parse a predictions.jsonl file back into a scoreable PredictionSet."""
    by_verbalization = {schema.verbalize(lab): lab for lab in schema.all_labels()}
    pairs = []
    path = Path(path)
    if not path.exists():
        raise DataError(f"predictions file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            raw = json.loads(line)
            try:
                gold = by_verbalization[raw["gold"]]
                pred = by_verbalization[raw["pred"]]
            except KeyError as exc:
                raise DataError(f"{path}:{lineno}: unknown label {exc}") from exc
            pairs.append(PredPair(raw["test_id"], gold, pred,
                                  raw.get("parse_status", "exact")))
    return PredictionSet(tuple(pairs))


def cmd_sweep(config: RunConfig, strategies: list[str], ks: list[int],
              out_dir: str | Path) -> Path:
    """Grid over strategies x shot counts; cell failures are isolated."""
    if not strategies or not ks:
        raise UsageError("sweep needs at least one strategy and one k")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    schema = load_schema(config.schema_path)
    rows = []
    cells = []
    for strategy in strategies:
        for k in ks:
            cell_cfg = dataclasses.replace(config, strategy=strategy, k=k)
            cell_dir = out / "cells" / f"{strategy}_k{k}"
            try:
                cmd_run(cell_cfg, cell_dir)
                preds = read_predictions(cell_dir / PREDICTIONS_FILE, schema)
                report = score(preds, schema, config.setting)
                (cell_dir / REPORT_FILE).write_text(report_to_json(report),
                                                    encoding="utf-8")
                rows.append((strategy, k, report.micro_f1))
                cells.append({"strategy": strategy, "k": k,
                              "micro_f1": report.micro_f1, "error": None})
            except RelIclError as exc:
                logger.error("sweep cell %s k=%d failed: %s", strategy, k, exc)
                cells.append({"strategy": strategy, "k": k,
                              "micro_f1": None, "error": str(exc)})
    csv_lines = ["strategy,k,micro_f1"]
    for strategy, k, f1 in rows:
        csv_lines.append(f"{strategy},{k},{f1:.6f}")
    (out / "sweep.csv").write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
    (out / "sweep_manifest.json").write_text(
        json.dumps({"kind": "sweep", "code_version": __version__,
                    "config": config.to_dict(), "cells": cells},
                   sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 on usage errors, not argparse's 2
        raise UsageError(message)


def _add_llm_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("llm")
    group.add_argument("--llm-provider", dest="llm_provider",
                       choices=("mock_oracle", "mock_echo", "http"))
    group.add_argument("--llm-model-name", dest="llm_model_name")
    group.add_argument("--llm-temperature", dest="llm_temperature", type=float)
    group.add_argument("--llm-max-output-tokens", dest="llm_max_output_tokens",
                       type=int)
    group.add_argument("--llm-top-p", dest="llm_top_p", type=float)
    group.add_argument("--llm-frequency-penalty", dest="llm_frequency_penalty",
                       type=float)
    group.add_argument("--llm-presence-penalty", dest="llm_presence_penalty",
                       type=float)
    group.add_argument("--llm-input-budget-tokens",
                       dest="llm_input_budget_tokens", type=int)
    group.add_argument("--llm-endpoint", dest="llm_endpoint")
    group.add_argument("--llm-requests-per-minute",
                       dest="llm_requests_per_minute", type=float)
    group.add_argument("--llm-max-in-flight", dest="llm_max_in_flight", type=int)
    group.add_argument("--llm-max-attempts", dest="llm_max_attempts", type=int)
    group.add_argument("--llm-backoff-s", dest="llm_backoff_s", type=float)
    group.add_argument("--llm-timeout-s", dest="llm_timeout_s", type=float)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML run config")
    parser.add_argument("--train", dest="train_path")
    parser.add_argument("--test", dest="test_path")
    parser.add_argument("--schema", dest="schema_path")
    parser.add_argument("--dataset-name", dest="dataset_name")
    parser.add_argument("--strategy", choices=("random_balanced", "knn_sent",
                                               "knn_entprompt", "knn_ft"))
    parser.add_argument("--k", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--setting", choices=("with_null", "without_null"))
    parser.add_argument("--reasoning", action="store_const", const=True,
                        default=None)
    parser.add_argument("--no-reasoning", dest="reasoning",
                        action="store_const", const=False)
    parser.add_argument("--budget-tokens", dest="budget_tokens", type=int)
    parser.add_argument("--estimator", choices=sorted(ESTIMATORS))
    parser.add_argument("--train-vectors", dest="train_vectors")
    parser.add_argument("--test-vectors", dest="test_vectors")
    parser.add_argument("--cache-dir", dest="cache_dir")
    parser.add_argument("--workers", type=int)
    _add_llm_flags(parser)


_RUN_OVERRIDE_KEYS = (
    "train_path", "test_path", "schema_path", "dataset_name", "strategy", "k",
    "seed", "setting", "reasoning", "budget_tokens", "estimator",
    "train_vectors", "test_vectors", "cache_dir", "workers",
    "llm_provider", "llm_model_name", "llm_temperature",
    "llm_max_output_tokens", "llm_top_p", "llm_frequency_penalty",
    "llm_presence_penalty", "llm_input_budget_tokens", "llm_endpoint",
    "llm_requests_per_minute", "llm_max_in_flight", "llm_max_attempts",
    "llm_backoff_s", "llm_timeout_s",
)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {key: getattr(args, key, None) for key in _RUN_OVERRIDE_KEYS}
    if getattr(args, "manifest", None):
        manifest_path = Path(args.manifest)
        if not manifest_path.exists():
            raise UsageError(f"manifest not found: {manifest_path}")
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
        config = RunConfig.from_dict(doc["config"])
        for key, value in overrides.items():
            if value is None:
                continue
            if key.startswith("llm_"):
                config = dataclasses.replace(
                    config,
                    llm=dataclasses.replace(config.llm,
                                            **{key[len("llm_"):]: value}),
                )
            else:
                config = dataclasses.replace(config, **{key: value})
        return config
    return load_run_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="relicl",
                     description="Relation extraction via in-context learning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a dataset and report statistics")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--name", default="train")
    p.add_argument("--out", help="write the normalized JSONL here")

    p = sub.add_parser("sample-subset",
                       help="stratified test subset preserving label proportions")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("embed", help="embed a split under a regime")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--regime", choices=("sent", "entprompt"), required=True)
    p.add_argument("--provider", choices=("hash", "http"), default="hash")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--endpoint")
    p.add_argument("--out", required=True)

    p = sub.add_parser("index", help="validate a vector store and print stats")
    p.add_argument("--vectors", required=True)

    p = sub.add_parser("reason",
                       help="warm the reasoning cache for a run configuration")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    _add_run_flags(p)

    p = sub.add_parser("run", help="execute the full pipeline over a test split")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", help="reconstruct the config from a manifest")
    _add_run_flags(p)

    p = sub.add_parser("sweep", help="grid over strategies and shot counts")
    p.add_argument("--out", required=True)
    p.add_argument("--strategies", nargs="+", required=True)
    p.add_argument("--ks", nargs="+", type=int, required=True)
    _add_run_flags(p)

    p = sub.add_parser("eval", help="score a predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--setting", choices=("with_null", "without_null"),
                   default="with_null")
    p.add_argument("--out", help="write the report JSON here")
    p.add_argument("--confusion-csv", dest="confusion_csv")

    p = sub.add_parser("report", help="render a saved report")
    p.add_argument("--report", required=True)
    p.add_argument("--confusion-csv", dest="confusion_csv")

    return parser


def _cmd_ingest(args) -> int:
    schema = load_schema(args.schema)
    split = load_dataset(args.data, schema, name=args.name)
    hist = label_histogram(split)
    print(f"instances: {len(split)}")
    print(f"labels: {len(hist)}")
    print(f"null_fraction: {null_fraction(split):.4f}")
    for label in sorted(hist, key=lambda lab: (-hist[lab],
                                               schema.verbalize(lab))):
        print(f"  {schema.verbalize(label)}: {hist[label]}")
    if args.out:
        write_dataset(split, args.out)
        print(f"normalized dataset written to {args.out}")
    return 0


def _cmd_sample_subset(args) -> int:
    schema = load_schema(args.schema)
    split = load_dataset(args.data, schema, name="test")
    subset = sample_stratified_subset(split, args.n, args.seed)
    write_dataset(subset, args.out)
    hist = label_histogram(subset)
    print(f"subset of {len(subset)} written to {args.out}")
    for label in sorted(hist, key=lambda lab: (-hist[lab],
                                               schema.verbalize(lab))):
        print(f"  {schema.verbalize(label)}: {hist[label]}")
    return 0


def _cmd_embed(args) -> int:
    schema = load_schema(args.schema)
    split = load_dataset(args.data, schema, name="split")
    if args.provider == "hash":
        provider = HashProjectionProvider(dim=args.dim)
    else:
        provider = HttpEmbeddingProvider(dim=args.dim, endpoint=args.endpoint)
    store = embed_split(split, provider, args.regime, store_path=args.out)
    print(f"{len(store)} vectors (dim {store.dim}, regime {store.regime}) "
          f"in {args.out}")
    return 0


def _cmd_index(args) -> int:
    store = VectorStore.load(args.vectors)
    index = build_index(store)
    print(f"index over {len(index)} vectors, dim {index.dim}, "
          f"regime {index.regime}")
    return 0


def _cmd_reason(args) -> int:
    config = _config_from_args(args)
    config = dataclasses.replace(config, reasoning=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    schema, train, test, train_full, test_full = _load_splits(config)
    estimator = _estimator(config.estimator)
    index = None
    test_store = None
    if config.strategy != "random_balanced":
        train_store, test_store = _load_vector_stores(config, train, test,
                                                      train_full, test_full)
        index = build_index(train_store)
    reasoning_cfg = config.reasoning_llm or config.llm
    completer = Completer(reasoning_cfg,
                          cache=ResponseCache(Path(config.cache_dir) / "responses"),
                          estimator=estimator)
    reasoning_cache = ReasoningCache(Path(config.cache_dir) / "reasoning")
    records = []
    for inst in test.instances:
        request = SelectionRequest(
            test_instance=inst, k=config.k, strategy=config.strategy,
            seed=_per_instance_seed(config.seed, inst.id),
            shot_range=SHOT_RANGES.get(config.dataset_name.lower()),
        )
        if config.strategy == "random_balanced":
            demos = select_random_balanced(train, request)
        else:
            demos = select_knn(train, index, request, test_store.get(inst.id))
        induce_reasoning(demos, schema, completer.complete, reasoning_cache,
                         reasoning_cfg.provider)
        records.append(selection_record(inst.id, config.strategy, config.k,
                                        demos))
    with (out / SELECTIONS_FILE).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    print(f"reasoning cache warmed for {len(records)} test instances")
    return 0


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    out = cmd_run(config, args.out)
    schema = load_schema(config.schema_path)
    preds = read_predictions(out / PREDICTIONS_FILE, schema)
    report = score(preds, schema, config.setting)
    (out / REPORT_FILE).write_text(report_to_json(report), encoding="utf-8")
    print(report.to_table())
    print(f"outputs in {out}")
    return 0


def _cmd_sweep(args) -> int:
    config = _config_from_args(args)
    out = cmd_sweep(config, args.strategies, args.ks, args.out)
    print((out / "sweep.csv").read_text(encoding="utf-8").rstrip())
    return 0


def _cmd_eval(args) -> int:
    schema = load_schema(args.schema)
    preds = read_predictions(args.predictions, schema)
    report = score(preds, schema, args.setting)
    print(report.to_table())
    if args.out:
        Path(args.out).write_text(report_to_json(report), encoding="utf-8")
    if args.confusion_csv:
        Path(args.confusion_csv).write_text(
            confusion_to_csv(report.labels, report.confusion), encoding="utf-8"
        )
    return 0


def _cmd_report(args) -> int:
    doc = json.loads(Path(args.report).read_text(encoding="utf-8"))
    print(f"setting: {doc['setting']}")
    micro = doc["micro"]
    print(f"micro  P={micro['p']:.4f}  R={micro['r']:.4f}  F1={micro['f1']:.4f}")
    for name, s in doc["per_label"].items():
        print(f"  {name}: P={s['p']:.4f} R={s['r']:.4f} F1={s['f1']:.4f} "
              f"n={s['support']}")
    if doc.get("null_overprediction") is not None:
        print(f"NULL overprediction rate: {doc['null_overprediction']:.4f}")
    print(f"parse fallbacks: {doc['parse_fallback_count']}")
    if args.confusion_csv:
        Path(args.confusion_csv).write_text(
            confusion_to_csv(doc["labels"], doc["confusion"]), encoding="utf-8"
        )
    return 0


_HANDLERS = {
    "ingest": _cmd_ingest,
    "sample-subset": _cmd_sample_subset,
    "embed": _cmd_embed,
    "index": _cmd_index,
    "reason": _cmd_reason,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "eval": _cmd_eval,
    "report": _cmd_report,
}


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, BudgetError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
