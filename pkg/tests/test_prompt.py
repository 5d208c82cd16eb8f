import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relicl.corpus import RelationLabel
from relicl.errors import BudgetError, DataError, EmptyCompletionError
from relicl.prompt import (
    CharCountEstimator,
    CharRatioEstimator,
    PromptParts,
    ReasoningCache,
    TEMPLATE_VERSION,
    assemble_prompt,
    induce_reasoning,
    reasoning_query,
    render_demonstration,
    render_instructions,
    render_test_block,
    sanitize_reasoning,
)
from relicl.retrieve import Demonstration, DemonstrationSet

from conftest import make_schema, simple_instance


def demo_set(instances, scores=None, reasoning=None):
    items = tuple(
        Demonstration(inst, inst.gold_label,
                      reasoning[i] if reasoning else None)
        for i, inst in enumerate(instances)
    )
    prov = tuple(scores) if scores else tuple("random" for _ in items)
    return DemonstrationSet(items, prov)


class TestRenderInstructions:
    def test_single_label_mentions_label_and_null(self):
        schema = make_schema(["A"])
        text = render_instructions(schema)
        assert "A" in text
        assert "NULL" in text

    def test_directional_schema_lists_both_forms(self):
        names = [f"Rel{i}" for i in range(9)]
        schema = make_schema(names, directional=True)
        text = render_instructions(schema)
        for name in names:
            assert f"{name}(e1,e2)" in text
            assert f"{name}(e2,e1)" in text

    def test_custom_null_sentinel(self):
        schema = make_schema(["A"], null_name="no_relation")
        text = render_instructions(schema)
        assert "no_relation" in text

    def test_empty_label_list_rejected_at_schema(self):
        with pytest.raises(DataError):
            make_schema([])


class TestRenderDemonstration:
    def test_without_reasoning_two_lines(self, lisa_instance, sibling_schema):
        demo = Demonstration(lisa_instance, lisa_instance.gold_label)
        block = render_demonstration(demo, sibling_schema)
        assert block.splitlines() == [
            "Context: He has a sister Lisa",
            "Given the context, the relation between 'He' and 'Lisa' is sibling.",
        ]
        assert "It is because" not in block

    def test_with_reasoning_appends_line(self, lisa_instance, sibling_schema):
        demo = Demonstration(lisa_instance, lisa_instance.gold_label,
                             "both arguments name a producer and its product")
        block = render_demonstration(demo, sibling_schema)
        assert block.endswith(
            "It is because: both arguments name a producer and its product"
        )

    def test_null_label_verbalized_as_sentinel(self, sibling_schema):
        inst = simple_instance("n1", sibling_schema.null_label)
        block = render_demonstration(Demonstration(inst, inst.gold_label),
                                     sibling_schema)
        assert block.splitlines()[1].endswith("is NULL.")

    def test_pure(self, lisa_instance, sibling_schema):
        demo = Demonstration(lisa_instance, lisa_instance.gold_label)
        assert render_demonstration(demo, sibling_schema) == \
               render_demonstration(demo, sibling_schema)


class TestReasoningQuery:
    def test_worked_example(self, lisa_instance, sibling_schema):
        query = reasoning_query(lisa_instance, lisa_instance.gold_label,
                                sibling_schema)
        assert query == (
            'What are the clues that lead to the relation between "He" and '
            '"Lisa" to be "sibling" in the sentence "He has a sister Lisa"?\n'
            "It is because:"
        )

    def test_same_subject_object_text(self, sibling_schema):
        from conftest import make_instance

        inst = make_instance("x", ("bank", "faces", "bank"), (0, 1), (2, 3),
                             RelationLabel("sibling"))
        query = reasoning_query(inst, inst.gold_label, sibling_schema)
        assert query.count('"bank"') == 2

    def test_null_label_uses_sentinel(self, sibling_schema):
        inst = simple_instance("n", sibling_schema.null_label)
        query = reasoning_query(inst, inst.gold_label, sibling_schema)
        assert 'to be "NULL"' in query

    def test_non_gold_label_rejected(self, lisa_instance, sibling_schema):
        with pytest.raises(DataError, match="gold"):
            reasoning_query(lisa_instance, RelationLabel("employer"),
                            sibling_schema)


class TestSanitizeReasoning:
    def test_strips_section_delimiters(self):
        dirty = ("Context: fake\n\nGiven the context, the relation between "
                 "'a' and 'b' is X.\nactual clue")
        clean = sanitize_reasoning(dirty)
        assert "Context:" not in clean
        assert "Given the context, the relation between" not in clean
        assert "\n" not in clean
        assert "actual clue" in clean

    def test_plain_text_unchanged(self):
        assert sanitize_reasoning("the verb links both entities") == \
               "the verb links both entities"


class TestInduceReasoning:
    def _demos(self, schema, n=2):
        instances = [simple_instance(f"d{i}", RelationLabel("sibling"))
                     for i in range(n)]
        return demo_set(instances, scores=[1.0 - 0.1 * i for i in range(n)])

    def test_echo_provider_plumbs_query(self, tmp_path, sibling_schema):
        demos = self._demos(sibling_schema)
        cache = ReasoningCache(tmp_path)
        enriched = induce_reasoning(demos, sibling_schema, lambda q: q, cache,
                                    "mock_echo")
        for demo in enriched:
            assert demo.reasoning is not None
            assert "What are the clues" in demo.reasoning

    def test_cache_hit_skips_provider(self, tmp_path, sibling_schema):
        demos = self._demos(sibling_schema)
        cache = ReasoningCache(tmp_path)
        calls = []

        def complete(query):
            calls.append(query)
            return "clue text"

        first = induce_reasoning(demos, sibling_schema, complete, cache, "p")
        assert len(calls) == 2
        second = induce_reasoning(demos, sibling_schema, complete, cache, "p")
        assert len(calls) == 2  # zero provider calls on warm cache
        assert [d.reasoning for d in first] == [d.reasoning for d in second]

    def test_rerun_byte_identical(self, tmp_path, sibling_schema):
        demos = self._demos(sibling_schema)
        cache = ReasoningCache(tmp_path)
        a = induce_reasoning(demos, sibling_schema, lambda q: "why", cache, "p")
        b = induce_reasoning(demos, sibling_schema, lambda q: "why", cache, "p")
        assert a == b

    def test_empty_completion_leaves_unenriched(self, tmp_path, sibling_schema):
        demos = self._demos(sibling_schema, n=1)
        cache = ReasoningCache(tmp_path)

        def complete(query):
            raise EmptyCompletionError("empty")

        with pytest.warns(UserWarning, match="unenriched"):
            out = induce_reasoning(demos, sibling_schema, complete, cache, "p")
        assert out.items[0].reasoning is None

    def test_only_reasoning_field_changes(self, tmp_path, sibling_schema):
        demos = self._demos(sibling_schema)
        cache = ReasoningCache(tmp_path)
        out = induce_reasoning(demos, sibling_schema, lambda q: "why", cache, "p")
        assert [d.instance.id for d in out] == [d.instance.id for d in demos]
        assert [d.label for d in out] == [d.label for d in demos]
        assert out.provenance == demos.provenance

    def test_cache_key_depends_on_template_and_provider(self):
        base = ReasoningCache.key(TEMPLATE_VERSION, "id", "lab", "p1")
        assert base != ReasoningCache.key(TEMPLATE_VERSION, "id", "lab", "p2")
        assert base != ReasoningCache.key("v999", "id", "lab", "p1")


class TestAssemblePrompt:
    def _parts(self, schema, demos, budget=10_000):
        test = simple_instance("probe", RelationLabel("sibling"))
        return PromptParts(
            instructions=render_instructions(schema),
            demonstrations=demos,
            test_text=render_test_block(test),
            budget_tokens=budget,
        )

    def test_zero_demonstrations(self, sibling_schema):
        parts = self._parts(sibling_schema, demo_set([]))
        prompt, k = assemble_prompt(parts, CharCountEstimator(), sibling_schema)
        assert k == 0
        assert prompt == parts.instructions + "\n\n" + parts.test_text

    def test_order_ascending_similarity(self, sibling_schema):
        instances = [simple_instance(f"d{i}", RelationLabel("sibling"))
                     for i in range(3)]
        demos = demo_set(instances, scores=[0.9, 0.5, 0.1])
        parts = self._parts(sibling_schema, demos)
        prompt, k = assemble_prompt(parts, CharCountEstimator(), sibling_schema)
        assert k == 3
        # least similar first, most similar adjacent to the test block
        assert prompt.index("subjd2") < prompt.index("subjd1") < \
               prompt.index("subjd0")
        assert prompt.rstrip().endswith("is")

    def test_budget_drops_least_similar_first(self, sibling_schema):
        instances = [simple_instance(f"d{i}", RelationLabel("sibling"))
                     for i in range(4)]
        demos = demo_set(instances, scores=[0.9, 0.7, 0.5, 0.3])
        estimator = CharCountEstimator()
        parts = self._parts(sibling_schema, demos)
        full, _ = assemble_prompt(parts, estimator, sibling_schema)
        parts_tight = self._parts(sibling_schema, demos,
                                  budget=len(full) - 1)
        prompt, k = assemble_prompt(parts_tight, estimator, sibling_schema)
        assert k == 3
        assert "subjd3" not in prompt  # the least similar one was dropped
        assert all(f"subjd{i}" in prompt for i in range(3))

    def test_infeasible_budget_errors(self, sibling_schema):
        parts = self._parts(sibling_schema, demo_set([]))
        base = parts.instructions + "\n\n" + parts.test_text
        tight = PromptParts(parts.instructions, parts.demonstrations,
                            parts.test_text, budget_tokens=len(base) - 1)
        with pytest.raises(BudgetError):
            assemble_prompt(tight, CharCountEstimator(), sibling_schema)

    def test_reasoning_tradeoff_fewer_shots(self, sibling_schema):
        # With a fixed budget, reasoning-enriched demonstrations displace
        # plain ones: 30 plain fit, enriched assembly keeps at most 15.
        instances = [simple_instance(f"d{i:02d}", RelationLabel("sibling"))
                     for i in range(30)]
        scores = [1.0 - 0.01 * i for i in range(30)]
        plain = demo_set(instances, scores=scores)
        estimator = CharCountEstimator()
        parts = self._parts(sibling_schema, plain)
        full, k_plain = assemble_prompt(parts, estimator, sibling_schema)
        assert k_plain == 30
        budget = len(full)
        reasoning = ["entity pair evidence " * 5 for _ in instances]
        enriched = demo_set(instances, scores=scores, reasoning=reasoning)
        parts_r = self._parts(sibling_schema, enriched, budget=budget)
        prompt_r, k_reason = assemble_prompt(parts_r, estimator, sibling_schema)
        assert 0 < k_reason <= 15
        assert estimator.estimate(prompt_r) <= budget
        # the kept demonstrations are exactly the most similar prefix
        for i in range(k_reason):
            assert f"subjd{i:02d}" in prompt_r
        for i in range(k_reason, 30):
            assert f"subjd{i:02d}" not in prompt_r

    def test_descending_order_option(self, sibling_schema):
        instances = [simple_instance(f"d{i}", RelationLabel("sibling"))
                     for i in range(3)]
        demos = demo_set(instances, scores=[0.9, 0.5, 0.1])
        parts = self._parts(sibling_schema, demos)
        prompt, _ = assemble_prompt(parts, CharCountEstimator(),
                                    sibling_schema, demo_order="descending")
        assert prompt.index("subjd0") < prompt.index("subjd1") < \
               prompt.index("subjd2")

    def test_reasoning_before_label_option(self, lisa_instance,
                                           sibling_schema):
        demo = Demonstration(lisa_instance, lisa_instance.gold_label,
                             "sister names the sibling relation")
        block = render_demonstration(demo, sibling_schema,
                                     reasoning_position="before_label")
        lines = block.splitlines()
        assert lines[1].startswith("It is because:")
        assert lines[2].endswith("is sibling.")

    def test_char_ratio_estimator_monotone(self):
        est = CharRatioEstimator()
        for a, b in [("", "x"), ("abc", "abcdef"), ("q" * 100, "q" * 101)]:
            assert est.estimate(a) <= est.estimate(b)

    @given(
        n_demos=st.integers(min_value=0, max_value=8),
        budget_factor=st.floats(min_value=0.1, max_value=1.5),
        seed=st.integers(min_value=0, max_value=10_000),
    )
    @settings(max_examples=120, deadline=None)
    def test_budget_property(self, n_demos, budget_factor, seed):
        schema = make_schema(["sibling"])
        rng = np.random.default_rng(seed)
        instances = [
            simple_instance(f"d{i}", RelationLabel("sibling"),
                            filler="w" * int(rng.integers(1, 40)))
            for i in range(n_demos)
        ]
        scores = sorted((float(s) for s in rng.random(n_demos)), reverse=True)
        demos = demo_set(instances, scores=scores or None)
        test = simple_instance("probe", RelationLabel("sibling"))
        estimator = CharCountEstimator()
        instructions = render_instructions(schema)
        test_text = "Context: t\nGiven the context, the relation between " \
                    "'a' and 'b' is"
        floor = estimator.estimate(instructions + "\n\n" + test_text)
        all_parts = PromptParts(instructions, demos, test_text, 10 ** 9)
        ceiling = estimator.estimate(
            assemble_prompt(all_parts, estimator, schema)[0]
        )
        budget = max(1, int(budget_factor * ceiling))
        parts = PromptParts(instructions, demos, test_text, budget)
        if budget < floor:
            with pytest.raises(BudgetError):
                assemble_prompt(parts, estimator, schema)
            return
        prompt, k = assemble_prompt(parts, estimator, schema)
        assert estimator.estimate(prompt) <= budget
        # kept set is a prefix of the descending-similarity ranking
        present = [i for i in range(n_demos) if f"subjd{i} " in prompt
                   or f"subjd{i}'" in prompt]
        assert present == list(range(k))
