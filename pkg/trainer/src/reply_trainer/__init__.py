"""Autoregressive reply-set suggestion model trained on bootstrapped data.

Each candidate-pool reply becomes one vocabulary token; the model decodes a
set of K replies token by token, every reply conditioned on the message and
the replies already in the set. Consumes the pool and bootstrap files emitted
by the `replyset` pipeline and produces predictions its evaluator scores
directly.
"""

from .data import TrainConfig, TrainingExample, build_training_sequences
from .model import ReplySetModel, bow_initialize
from .predict import predict_reply_sets
from .train import (
    EvalPoint,
    batch_loss,
    dataset_loss,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .vocab import ReplyVocabulary, WordTokenizer, build_vocabulary, load_pool_texts

__all__ = [
    "EvalPoint",
    "ReplySetModel",
    "ReplyVocabulary",
    "TrainConfig",
    "TrainingExample",
    "WordTokenizer",
    "batch_loss",
    "bow_initialize",
    "build_training_sequences",
    "build_vocabulary",
    "dataset_loss",
    "load_checkpoint",
    "load_pool_texts",
    "predict_reply_sets",
    "save_checkpoint",
    "train",
]

__version__ = "0.1.0"
