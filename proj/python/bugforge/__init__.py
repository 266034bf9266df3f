"""Single-token bug injection and detection.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from ._core import (
    BugforgeError,
    SubtokenModel,
    annotate,
    classification_accuracy,
    count_parameters,
    decode,
    encode,
    localization_accuracy,
    lr_schedule,
    make_length_batches,
    mutate,
    pointer_probabilities,
    replacement_distribution,
    tokenize,
    train_bpe,
)

__all__ = [
    "BugforgeError",
    "SubtokenModel",
    "annotate",
    "classification_accuracy",
    "count_parameters",
    "decode",
    "encode",
    "localization_accuracy",
    "lr_schedule",
    "make_length_batches",
    "mutate",
    "pointer_probabilities",
    "replacement_distribution",
    "tokenize",
    "train_bpe",
]

__version__ = "0.1.0"
