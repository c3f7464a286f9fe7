# SPDX-License-Identifier: Apache-2.0
"""Job-title representation learning from job descriptions."""

from ._jdagg import (
    HashEncoderConfig,
    JdaggError,
    Model,
    __version__,
    average_precision_at_k,
    bidirectional_loss,
    cosine_matrix,
    detect_language,
    encode_segments,
    encode_sentence,
    generate_synthetic_corpus,
    load_model,
    max_pool,
    mean_pool,
    mrr,
    recall_at_k,
    segment_description,
    train,
    train_embedded,
)

__all__ = [
    "HashEncoderConfig",
    "JdaggError",
    "Model",
    "__version__",
    "average_precision_at_k",
    "bidirectional_loss",
    "cosine_matrix",
    "detect_language",
    "encode_segments",
    "encode_sentence",
    "generate_synthetic_corpus",
    "load_model",
    "max_pool",
    "mean_pool",
    "mrr",
    "recall_at_k",
    "segment_description",
    "train",
    "train_embedded",
]
