"""Document encoder, label-graph encoder, attention, scoring and training."""

from .config import (
    CHANNEL_SECTIONS,
    CHANNELS,
    DEFAULT_LENGTHS,
    ModelConfig,
    coerce_model_fields,
    format_flat_config,
    load_flat_config,
    parse_flat_config,
)
from .text import EncodedCorpus, WordVocab, build_word_vocab, channel_text, encode_records, tokenize
from .network import (
    Graph,
    attend,
    batch_loss,
    encode_channel,
    forward,
    fuse_and_score,
    init_params,
    label_features,
)
from .labels import initial_embedding, label_matrix
from .training import TrainResult, predict, train, training_step
from .bundle import ModelBundle, VocabularyMismatch, load_bundle, save_bundle

__all__ = [
    "CHANNEL_SECTIONS",
    "CHANNELS",
    "DEFAULT_LENGTHS",
    "ModelConfig",
    "coerce_model_fields",
    "format_flat_config",
    "load_flat_config",
    "parse_flat_config",
    "EncodedCorpus",
    "WordVocab",
    "build_word_vocab",
    "channel_text",
    "encode_records",
    "tokenize",
    "Graph",
    "attend",
    "batch_loss",
    "encode_channel",
    "forward",
    "fuse_and_score",
    "init_params",
    "label_features",
    "initial_embedding",
    "label_matrix",
    "TrainResult",
    "predict",
    "train",
    "training_step",
    "ModelBundle",
    "VocabularyMismatch",
    "load_bundle",
    "save_bundle",
]
