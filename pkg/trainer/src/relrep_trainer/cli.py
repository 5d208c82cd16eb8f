"""Train an entity-marker relation encoder and export retrieval vectors.

    relrep train --train train.jsonl --dev dev.jsonl --schema schema.json \
        --out model_dir [--hidden 64 --layers 2 --heads 4 --lr 2e-5 ...]
    relrep export --model model_dir --data split.jsonl --out vectors.jsonl
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import torch

from .data import load_examples, load_schema
from .export import export_vectors, write_manifest
from .model import EncoderConfig, RelationClassifier
from .train import Hyperparameters, TrainedModel, train
from .vocab import Vocab


def save_model(trained: TrainedModel, out_dir: Path, encoder_name: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(trained.model.state_dict(), out_dir / "weights.pt")
    meta = {
        "encoder_name": encoder_name,
        "encoder": vars(trained.model.encoder.config),
        "vocab": trained.vocab.token_to_id,
        "schema": {
            "labels": list(trained.schema.labels),
            "null_name": trained.schema.null_name,
            "directional": trained.schema.directional,
        },
        "class_names": trained.class_names,
        "dev_metric": trained.dev_metric,
        "seed": trained.seed,
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2),
                                       encoding="utf-8")
    write_manifest(trained, encoder_name, out_dir / "manifest.json")


def load_model(model_dir: Path) -> TrainedModel:
    meta = json.loads((model_dir / "meta.json").read_text(encoding="utf-8"))
    from .data import Schema

    schema = Schema(
        labels=tuple(meta["schema"]["labels"]),
        null_name=meta["schema"]["null_name"],
        directional=meta["schema"]["directional"],
    )
    vocab = Vocab(meta["vocab"])
    config = EncoderConfig(**meta["encoder"])
    model = RelationClassifier(len(vocab), len(meta["class_names"]), config)
    model.load_state_dict(torch.load(model_dir / "weights.pt",
                                     weights_only=True))
    model.eval()
    return TrainedModel(model=model, vocab=vocab, schema=schema,
                        class_names=meta["class_names"],
                        dev_metric=meta["dev_metric"], seed=meta["seed"])


def cmd_train(args) -> int:
    schema = load_schema(args.schema)
    train_examples = load_examples(args.train)
    dev_examples = load_examples(args.dev) if args.dev else train_examples
    hp = Hyperparameters(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        encoder=EncoderConfig(hidden_size=args.hidden, num_layers=args.layers,
                              num_heads=args.heads, max_len=args.max_len,
                              dropout=args.dropout),
    )
    trained = train(train_examples, dev_examples, schema, hp)
    save_model(trained, Path(args.out), encoder_name="fresh-transformer")
    print(f"dev micro-F1 {trained.dev_metric:.4f}; model saved to {args.out}")
    return 0


def cmd_export(args) -> int:
    trained = load_model(Path(args.model))
    examples = load_examples(args.data)
    export_vectors(trained, examples, args.out, batch_size=args.batch_size)
    print(f"{len(examples)} vectors (dim {trained.model.rep_dim}) "
          f"written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relrep")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train")
    p.add_argument("--train", required=True)
    p.add_argument("--dev")
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lr", type=float, default=2e-5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--max-len", type=int, default=256)
    p.add_argument("--dropout", type=float, default=0.1)

    p = sub.add_parser("export")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=64)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        return cmd_train(args)
    return cmd_export(args)


if __name__ == "__main__":
    sys.exit(main())
