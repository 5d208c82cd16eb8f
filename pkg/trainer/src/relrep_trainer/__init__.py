"""Entity-marker relation encoder: fine-tuning and vector export."""

__version__ = "0.1.0"

from .data import Example, Schema, load_examples, load_schema
from .export import export_vectors, read_vectors, relation_reps
from .marking import MarkedSequence, demark, mark_entities
from .model import EncoderConfig, RelationClassifier
from .train import Hyperparameters, TrainedModel, train
from .vocab import Vocab, build_vocab
