import numpy as np

from relrep_trainer.data import Example
from relrep_trainer.marking import demark, mark_entities

from conftest import example_record, examples_from_records, random_example


def example(tokens, subj_span, obj_span, subj_type=None, obj_type=None):
    rec = example_record("x", tokens, subj_span, obj_span, "r",
                         subj_type=subj_type, obj_type=obj_type)
    return examples_from_records([rec])[0]


class TestMarkEntities:
    def test_worked_example_typed(self):
        ex = example(["He", "has", "a", "sister", "Lisa", "."], (0, 1), (4, 5),
                     subj_type="PER", obj_type="PER")
        marked = mark_entities(ex)
        assert " ".join(marked.tokens) == (
            "[CLS] [SUB_PER] He [/SUB_PER] has a sister "
            "[OBJ_PER] Lisa [/OBJ_PER] . [SEP]"
        )
        assert marked.tokens[marked.subj_marker_idx] == "[SUB_PER]"
        assert marked.tokens[marked.obj_marker_idx] == "[OBJ_PER]"

    def test_untyped_markers(self):
        ex = example(["a", "met", "b"], (0, 1), (2, 3))
        marked = mark_entities(ex)
        assert " ".join(marked.tokens) == \
            "[CLS] [SUB] a [/SUB] met [OBJ] b [/OBJ] [SEP]"

    def test_object_before_subject(self):
        ex = example(["b", "met", "a"], (2, 3), (0, 1))
        marked = mark_entities(ex)
        assert " ".join(marked.tokens) == \
            "[CLS] [OBJ] b [/OBJ] met [SUB] a [/SUB] [SEP]"
        assert marked.tokens[marked.subj_marker_idx] == "[SUB]"

    def test_adjacent_spans_nest_correctly(self):
        ex = example(["a", "b"], (0, 1), (1, 2))
        marked = mark_entities(ex)
        assert list(marked.tokens) == [
            "[CLS]", "[SUB]", "a", "[/SUB]", "[OBJ]", "b", "[/OBJ]", "[SEP]"
        ]

    def test_exactly_one_of_each_marker(self):
        ex = example(["x", "y", "z", "w"], (1, 3), (3, 4), subj_type="ORG")
        marked = mark_entities(ex)
        for marker in ("[SUB_ORG]", "[/SUB_ORG]", "[OBJ]", "[/OBJ]",
                       "[CLS]", "[SEP]"):
            assert marked.tokens.count(marker) == 1

    def test_demark_recovers_tokens(self):
        ex = example(["a", "met", "b", "today"], (0, 1), (2, 3))
        assert demark(mark_entities(ex)) == ex.tokens

    def test_demark_with_marker_lookalike_context_token(self):
        # a context token that equals a marker string must survive de-marking
        ex = Example(id="adv", tokens=("[SUB]", "met", "b"),
                     subj_start=0, subj_end=1, subj_type=None,
                     obj_start=2, obj_end=3, obj_type=None,
                     label="r", direction=None)
        marked = mark_entities(ex)
        assert demark(marked) == ("[SUB]", "met", "b")

    def test_round_trip_on_1000_random_instances(self):
        rng = np.random.default_rng(2024)
        for i in range(1000):
            ex = random_example(rng, f"r{i}")
            marked = mark_entities(ex)
            assert demark(marked) == ex.tokens, f"instance {i}"
            assert marked.tokens[0] == "[CLS]"
            assert marked.tokens[-1] == "[SEP]"
