"""Trainer acceptance: marking round trip, export contracts, and a 1-NN
probe over exported vectors beating the majority-class baseline."""

import json
from collections import Counter

import numpy as np

from relrep_trainer.data import load_examples, load_schema
from relrep_trainer.export import export_vectors, read_vectors
from relrep_trainer.marking import demark, mark_entities
from relrep_trainer.model import EncoderConfig
from relrep_trainer.train import Hyperparameters, train

from conftest import (
    random_example,
    separable_records,
    write_records,
    write_schema,
)


def _report(criterion: str) -> None:
    print(f"PASS {criterion}")


def one_nn_accuracy(train_vecs, train_labels, test_vecs, test_labels):
    """Brute-force cosine 1-NN, the independent probe over exported vectors."""
    train_mat = np.stack(train_vecs)
    train_mat = train_mat / np.linalg.norm(train_mat, axis=1, keepdims=True)
    correct = 0
    for vec, want in zip(test_vecs, test_labels):
        q = vec / np.linalg.norm(vec)
        nearest = int(np.argmax(train_mat @ q))
        if train_labels[nearest] == want:
            correct += 1
    return correct / len(test_labels)


def test_criterion_10a_demarking_round_trip():
    rng = np.random.default_rng(77)
    for i in range(1000):
        ex = random_example(rng, f"acc-{i}")
        assert demark(mark_entities(ex)) == ex.tokens, f"instance {i}"
    _report("criterion 10a: de-marking round trip on 1,000 random instances")


def test_criterion_10bcd_train_export_probe(tmp_path):
    # A 200-example slice shaped like a 9-relation corpus with a NULL share,
    # split 200 train / 54 held out.
    labels = [f"R{i}" for i in range(9)]
    records = separable_records(labels, per_label=25, seed=2024,
                                null_count=29)
    assert len(records) == 254
    train_records, heldout_records = records[:200], records[200:]

    train_path = write_records(train_records, tmp_path / "train.jsonl")
    heldout_path = write_records(heldout_records, tmp_path / "heldout.jsonl")
    schema_path = write_schema(labels, tmp_path / "schema.json")

    schema = load_schema(schema_path)
    train_examples = load_examples(train_path)
    heldout_examples = load_examples(heldout_path)

    hidden = 32
    hp = Hyperparameters(
        learning_rate=3e-3, batch_size=32, epochs=12, seed=7,
        encoder=EncoderConfig(hidden_size=hidden, num_layers=1, num_heads=4,
                              max_len=64, dropout=0.0),
    )
    trained = train(train_examples, heldout_examples, schema, hp)

    train_out = tmp_path / "train_ft.jsonl"
    heldout_out = tmp_path / "heldout_ft.jsonl"
    train_reps = export_vectors(trained, train_examples, train_out)
    heldout_reps = export_vectors(trained, heldout_examples, heldout_out)

    # 10b: exported dimension is twice the encoder hidden size
    header = json.loads(train_out.read_text().splitlines()[0])
    assert header["dim"] == 2 * hidden
    _report("criterion 10b: export dim = 2 x hidden size")

    # 10c: write/read drift under 1e-6
    for path, examples, reps in ((train_out, train_examples, train_reps),
                                 (heldout_out, heldout_examples,
                                  heldout_reps)):
        dim, records_read = read_vectors(path)
        assert dim == 2 * hidden
        assert set(records_read) == {ex.id for ex in examples}
        for ex, row in zip(examples, reps):
            assert np.max(np.abs(records_read[ex.id] - row)) < 1e-6
    _report("criterion 10c: export/import value drift < 1e-6")

    # 10d: 1-NN over exported vectors beats the majority-class baseline
    train_labels = [schema.class_of(ex) for ex in train_examples]
    heldout_labels = [schema.class_of(ex) for ex in heldout_examples]
    majority_label, majority_count = \
        Counter(heldout_labels).most_common(1)[0]
    majority = majority_count / len(heldout_labels)
    accuracy = one_nn_accuracy(
        [records for records in train_reps], train_labels,
        [records for records in heldout_reps], heldout_labels,
    )
    assert accuracy > majority, (
        f"1-NN accuracy {accuracy:.3f} does not beat the majority baseline "
        f"{majority:.3f} ({majority_label})"
    )
    _report(
        f"criterion 10d: 1-NN accuracy {accuracy:.3f} beats majority "
        f"{majority:.3f}"
    )
