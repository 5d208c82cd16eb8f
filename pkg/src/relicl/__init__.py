"""Relation extraction via in-context learning.

Pipeline: ingest a labeled corpus, embed it under one of three retrieval
regimes, select k demonstrations per test input (balanced-random or exact
cosine kNN), optionally enrich them with gold-label-induced reasoning,
assemble a budgeted prompt, complete it against a provider, and score the
predictions with NULL-aware micro-F1.
"""

__version__ = "0.1.0"

from .corpus import (
    DatasetSplit,
    EntityMention,
    REInstance,
    RelationLabel,
    RelationSchema,
    label_histogram,
    load_dataset,
    load_schema,
    sample_stratified_subset,
)
from .embed import (
    HashProjectionProvider,
    VectorStore,
    embed_split,
    entity_marked_text,
    entity_prompt_text,
    import_ft_vectors,
)
from .llm import Completer, LlmConfig, Prediction, parse_prediction
from .prompt import (
    PromptParts,
    assemble_prompt,
    induce_reasoning,
    reasoning_query,
    render_demonstration,
    render_instructions,
    render_test_block,
)
from .retrieve import (
    Demonstration,
    DemonstrationSet,
    KnnIndex,
    SelectionRequest,
    build_index,
    knn_query,
    select_knn,
    select_random_balanced,
)
from .scoring import (
    EvalReport,
    PredPair,
    PredictionSet,
    confusion_matrix,
    filter_null_setting,
    null_overprediction_rate,
    score,
)
