"""NULL-aware scoring for relation extraction runs.

Two settings, mirroring the two ways the task is evaluated:

- "with_null" is the extraction setting: micro precision/recall/F1 are
  computed over non-NULL decisions only, so a correct NULL abstention is
  neither rewarded nor punished (TP: pred == gold != NULL; FP: pred not
  NULL and pred != gold; FN: gold not NULL and pred != gold).
- "without_null" assumes gold-NULL pairs were filtered upstream and scores
  plain micro over all pairs, which equals accuracy.

Reports carry per-label one-vs-rest rows, the full confusion matrix over
labels plus NULL, and the NULL-overprediction rate (the fraction of
gold-NULL pairs pushed into a pre-defined relation).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional, Sequence

from .corpus import DatasetSplit, RelationLabel, RelationSchema
from .errors import DataError

SETTINGS = ("with_null", "without_null")


@dataclass(frozen=True)
class PredPair:
    test_id: str
    gold: RelationLabel
    pred: RelationLabel
    parse_status: str = "exact"


@dataclass(frozen=True)
class PredictionSet:
    pairs: tuple[PredPair, ...]

    def __post_init__(self) -> None:
        ids = [p.test_id for p in self.pairs]
        if len(set(ids)) != len(ids):
            raise DataError("prediction set has duplicate test ids")

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def parse_fallback_count(self) -> int:
        return sum(1 for p in self.pairs if p.parse_status == "fallback_null")


@dataclass(frozen=True)
class LabelScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    setting: str
    micro_precision: float
    micro_recall: float
    micro_f1: float
    per_label: dict[str, LabelScores]
    labels: tuple[str, ...]
    confusion: tuple[tuple[int, ...], ...]
    null_overprediction_rate: Optional[float]
    parse_fallback_count: int
    degenerate: bool  # a micro denominator was 0/0 and reported as 0

    def to_json_dict(self) -> dict:
        return {
            "setting": self.setting,
            "micro": {
                "p": self.micro_precision,
                "r": self.micro_recall,
                "f1": self.micro_f1,
            },
            "per_label": {
                name: {
                    "p": s.precision,
                    "r": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                }
                for name, s in self.per_label.items()
            },
            "confusion": [list(row) for row in self.confusion],
            "labels": list(self.labels),
            "null_overprediction": self.null_overprediction_rate,
            "parse_fallback_count": self.parse_fallback_count,
            "degenerate": self.degenerate,
        }

    def to_table(self) -> str:
        lines = [
            f"setting: {self.setting}",
            f"micro  P={self.micro_precision:.4f}  R={self.micro_recall:.4f}  "
            f"F1={self.micro_f1:.4f}"
            + ("  (degenerate 0/0 reported as 0)" if self.degenerate else ""),
        ]
        width = max((len(name) for name in self.per_label), default=5)
        for name in self.labels:
            if name not in self.per_label:
                continue
            s = self.per_label[name]
            lines.append(
                f"{name:<{width}}  P={s.precision:.4f}  R={s.recall:.4f}  "
                f"F1={s.f1:.4f}  n={s.support}"
            )
        if self.null_overprediction_rate is not None:
            lines.append(
                f"NULL overprediction rate: {self.null_overprediction_rate:.4f}"
            )
        lines.append(f"parse fallbacks: {self.parse_fallback_count}")
        return "\n".join(lines)


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float, bool]:
    degenerate = (tp + fp == 0) or (tp + fn == 0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return precision, recall, f1, degenerate


def _validate(preds: PredictionSet, schema: RelationSchema) -> None:
    if not preds.pairs:
        raise DataError("cannot score an empty prediction set")
    valid = set(schema.all_labels())
    for pair in preds.pairs:
        for which, label in (("gold", pair.gold), ("pred", pair.pred)):
            if label not in valid:
                raise DataError(
                    f"{which} label {label} of pair {pair.test_id!r} is not in "
                    "the schema"
                )


def score(preds: PredictionSet, schema: RelationSchema,
          setting: str = "with_null") -> EvalReport:
    """Micro scores, per-label breakdown, confusion and NULL accounting."""
    if setting not in SETTINGS:
        raise DataError(f"unknown setting {setting!r}")
    _validate(preds, schema)
    if setting == "without_null":
        for pair in preds.pairs:
            if pair.gold.is_null:
                raise DataError(
                    "without_null scoring requires gold-NULL pairs to be "
                    f"filtered upstream (found {pair.test_id!r})"
                )
        correct = sum(1 for p in preds.pairs if p.pred == p.gold)
        total = len(preds.pairs)
        acc = correct / total
        micro_p, micro_r, micro_f1, degenerate = acc, acc, acc, False
    else:
        tp = sum(1 for p in preds.pairs
                 if p.pred == p.gold and not p.gold.is_null)
        fp = sum(1 for p in preds.pairs
                 if not p.pred.is_null and p.pred != p.gold)
        fn = sum(1 for p in preds.pairs
                 if not p.gold.is_null and p.pred != p.gold)
        micro_p, micro_r, micro_f1, degenerate = _prf(tp, fp, fn)

    verbalize = schema.verbalize
    label_axis = [verbalize(lab) for lab in schema.all_labels()]
    index = {name: i for i, name in enumerate(label_axis)}
    per_label: dict[str, LabelScores] = {}
    for lab in schema.all_labels():
        name = verbalize(lab)
        tp_l = sum(1 for p in preds.pairs if p.gold == lab and p.pred == lab)
        fp_l = sum(1 for p in preds.pairs if p.pred == lab and p.gold != lab)
        fn_l = sum(1 for p in preds.pairs if p.gold == lab and p.pred != lab)
        support = tp_l + fn_l
        if support == 0 and fp_l == 0:
            continue
        p_l, r_l, f1_l, _ = _prf(tp_l, fp_l, fn_l)
        per_label[name] = LabelScores(p_l, r_l, f1_l, support)

    matrix = [[0] * len(label_axis) for _ in label_axis]
    for pair in preds.pairs:
        matrix[index[verbalize(pair.gold)]][index[verbalize(pair.pred)]] += 1

    return EvalReport(
        setting=setting,
        micro_precision=micro_p,
        micro_recall=micro_r,
        micro_f1=micro_f1,
        per_label=per_label,
        labels=tuple(label_axis),
        confusion=tuple(tuple(row) for row in matrix),
        null_overprediction_rate=null_overprediction_rate(preds),
        parse_fallback_count=preds.parse_fallback_count,
        degenerate=degenerate,
    )


def confusion_matrix(preds: PredictionSet,
                     schema: RelationSchema) -> tuple[tuple[str, ...],
                                                      tuple[tuple[int, ...], ...]]:
    """(label axis, matrix) with cell[g][p] = count of gold g predicted p."""
    report = score(preds, schema, "with_null")
    return report.labels, report.confusion


def confusion_to_csv(labels: Sequence[str],
                     matrix: Sequence[Sequence[int]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["gold\\pred", *labels])
    for name, row in zip(labels, matrix):
        writer.writerow([name, *row])
    return buf.getvalue()


def null_overprediction_rate(preds: PredictionSet) -> Optional[float]:
    """Fraction of gold-NULL pairs predicted non-NULL; None without gold NULLs."""
    gold_null = [p for p in preds.pairs if p.gold.is_null]
    if not gold_null:
        return None
    wrong = sum(1 for p in gold_null if not p.pred.is_null)
    return wrong / len(gold_null)


def filter_null_setting(split: DatasetSplit) -> DatasetSplit:
    """Drop every gold-NULL instance; errors when nothing remains.

    Applied to both the retrieval pool and the test split when evaluating
    under the without_null setting.
    """
    kept = tuple(inst for inst in split.instances
                 if not inst.gold_label.is_null)
    if not kept:
        raise DataError(
            f"split {split.name!r} is empty after removing NULL instances"
        )
    return DatasetSplit(name=split.name, instances=kept, schema=split.schema)


def report_to_json(report: EvalReport) -> str:
    return json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n"
