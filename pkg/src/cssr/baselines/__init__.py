"""Comparison methods: cross-validated EM-trained HMMs and context-tree VLMMs."""

from .hmm import (
    CrossValidation,
    DenseHmm,
    cross_validate,
    em_train,
    hmm_word_distribution,
    hmm_word_probabilities,
    log_likelihood,
    machine_to_hmm,
    random_dense_hmm,
)
from .vlmm import ContextTree, context_count, vlmm_learn, vlmm_to_machine

__all__ = [
    "ContextTree",
    "CrossValidation",
    "DenseHmm",
    "context_count",
    "cross_validate",
    "em_train",
    "hmm_word_distribution",
    "hmm_word_probabilities",
    "log_likelihood",
    "machine_to_hmm",
    "random_dense_hmm",
    "vlmm_learn",
    "vlmm_to_machine",
]
