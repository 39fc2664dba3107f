"""One-hot inputs, k-hot targets, and thresholded decoding."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from lstm_formal.languages import Language, Sample, input_vocab, output_vocab

THRESHOLD = 0.5


def encode_input(lang: Language, symbol: str) -> np.ndarray:
    vocab = input_vocab(lang)
    if symbol not in vocab:
        raise ValueError(f"{symbol!r} is not an input symbol of {lang.value}")
    vec = np.zeros(len(vocab))
    vec[vocab.index(symbol)] = 1.0
    return vec


def encode_target(lang: Language, symbols: frozenset[str] | set[str]) -> np.ndarray:
    vocab = output_vocab(lang)
    if not symbols:
        raise ValueError("target set must be non-empty")
    unknown = set(symbols) - set(vocab)
    if unknown:
        raise ValueError(f"{sorted(unknown)} not in the output vocabulary of {lang.value}")
    return np.array([1.0 if s in symbols else 0.0 for s in vocab])


def decode_prediction(lang: Language, activations: Sequence[float]) -> frozenset[str]:
    vocab = output_vocab(lang)
    if len(activations) != len(vocab):
        raise ValueError(f"expected {len(vocab)} activations, got {len(activations)}")
    return frozenset(s for s, act in zip(vocab, activations) if act > THRESHOLD)


def sample_accepted(predicted: Sequence[frozenset[str]], targets: Sequence[frozenset[str]]) -> bool:
    if len(predicted) != len(targets):
        raise ValueError(f"length mismatch: {len(predicted)} predictions for {len(targets)} targets")
    return all(p == t for p, t in zip(predicted, targets))


def input_indices(sample: Sample) -> np.ndarray:
    """Input symbols as vocabulary indices (int64), the form the kernels consume."""
    vocab = input_vocab(sample.language)
    return np.array([vocab.index(s) for s in sample.input], dtype=np.int64)


def input_matrix(sample: Sample) -> np.ndarray:
    return np.stack([encode_input(sample.language, s) for s in sample.input]) if len(sample) else np.zeros((0, sample.language.order))


def target_matrix(sample: Sample) -> np.ndarray:
    if not len(sample):
        return np.zeros((0, sample.language.order + 1))
    return np.stack([encode_target(sample.language, t) for t in sample.targets])
