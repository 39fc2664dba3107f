import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lstm_formal.encoding import (
    decode_prediction,
    encode_input,
    encode_target,
    input_matrix,
    sample_accepted,
)
from lstm_formal.languages import END, Language, generate_sample, input_vocab, output_vocab

AB = frozenset("ab")


def test_encode_input():
    assert encode_input(Language.ANBN, "a").tolist() == [1, 0]
    assert encode_input(Language.ANBNCN, "c").tolist() == [0, 0, 1]
    with pytest.raises(ValueError):
        encode_input(Language.ANBN, END)
    with pytest.raises(ValueError):
        encode_input(Language.ANBN, "c")


@pytest.mark.parametrize("lang", list(Language))
def test_inputs_are_orthonormal(lang):
    m = np.stack([encode_input(lang, s) for s in input_vocab(lang)])
    assert np.array_equal(m @ m.T, np.eye(lang.order))


def test_encode_target():
    assert encode_target(Language.ANBN, AB).tolist() == [1, 1, 0]
    assert encode_target(Language.ANBN, {END}).tolist() == [0, 0, 1]
    assert encode_target(Language.ANBNCNDN, {"d"}).tolist() == [0, 0, 0, 1, 0]
    with pytest.raises(ValueError):
        encode_target(Language.ANBN, set())
    with pytest.raises(ValueError):
        encode_target(Language.ANBN, {"d"})


def test_decode_prediction():
    assert decode_prediction(Language.ANBN, [0.6, 0.4, 0.7]) == frozenset(["a", END])
    assert decode_prediction(Language.ANBN, [0.5, 0.5, 0.5]) == frozenset()
    assert decode_prediction(Language.ANBNCN, [0.9, 0.8, 0.1, 0.2]) == AB
    with pytest.raises(ValueError):
        decode_prediction(Language.ANBN, [0.9, 0.1])


def _nonempty_subsets(vocab):
    for r in range(1, len(vocab) + 1):
        yield from (frozenset(c) for c in itertools.combinations(vocab, r))


@pytest.mark.parametrize("lang", list(Language))
def test_round_trip_every_subset(lang):
    for ss in _nonempty_subsets(output_vocab(lang)):
        assert decode_prediction(lang, encode_target(lang, ss)) == ss


def test_sample_accepted():
    s = generate_sample(Language.ANBN, 3)
    assert sample_accepted(s.targets, s.targets)
    wrong = list(s.targets)
    wrong[0] = frozenset("a")
    assert not sample_accepted(wrong, s.targets)
    wrong[0] = frozenset(["a", "b", END])
    assert not sample_accepted(wrong, s.targets)
    with pytest.raises(ValueError):
        sample_accepted(s.targets[:-1], s.targets)


@given(st.sampled_from(list(Language)), st.integers(1, 30))
def test_targets_accept_themselves(lang, n):
    s = generate_sample(lang, n)
    assert sample_accepted(s.targets, s.targets)
    assert input_matrix(s).sum(axis=1).tolist() == [1.0] * len(s)
