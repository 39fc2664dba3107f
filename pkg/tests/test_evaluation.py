import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lstm_formal.evaluation import ErrorProfile, EvalConfig, accepts, evaluate, first_errors
from lstm_formal.languages import Language, generate_sample
from lstm_formal.lstm import LstmParameters, init_parameters


def stub(failing):
    failing = set(failing)
    calls = []

    def accept(n):
        calls.append(n)
        return n not in failing

    accept.calls = calls
    return accept


def test_planted_failures():
    assert evaluate(stub({3, 7, 8, 20, 31}), Language.ANBN).slots() == [3, 7, 8, 20, 31]


def test_always_failing():
    assert evaluate(stub(range(1, 10**4)), Language.ANBN).errors == (1, 2, 3, 4, 5)


def test_never_failing_is_censored():
    profile = evaluate(stub(()), Language.ANBN, EvalConfig(max_n=100))
    assert profile.errors == ()
    assert profile.censored == 5
    assert profile.slots() == [None] * 5


def test_partial_censoring():
    profile = evaluate(stub({4, 90, 150}), Language.ANBN, EvalConfig(max_n=100))
    assert profile.slots() == [4, 90, None, None, None]
    assert profile.e(2) == 90 and profile.e(3) is None


def test_k_one_is_shortest_failure():
    assert evaluate(stub({12, 40}), Language.ANBN, EvalConfig(k=1)).errors == (12,)


@settings(max_examples=50)
@given(st.sets(st.integers(1, 120), max_size=12), st.integers(1, 7), st.integers(1, 120))
def test_scan_semantics(failing, k, max_n):
    acc = stub(failing)
    profile = evaluate(acc, Language.ANBN, EvalConfig(k, max_n))
    assert list(profile.errors) == sorted(n for n in failing if n <= max_n)[:k]
    assert len(acc.calls) == len(set(acc.calls))
    assert acc.calls == sorted(acc.calls)
    assert all(n in failing for n in profile.errors)


def test_profile_invariants():
    with pytest.raises(ValueError):
        ErrorProfile((3, 3), 5, 100)
    with pytest.raises(ValueError):
        ErrorProfile((1, 2, 3), 2, 100)
    with pytest.raises(ValueError):
        EvalConfig(k=0)


def test_zero_model_rejects_everything():
    p = LstmParameters.zeros(2, 2)
    assert not accepts(p, Language.ANBN, 1)
    assert evaluate(p, Language.ANBN).errors == (1, 2, 3, 4, 5)


def test_language_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate(LstmParameters.zeros(2, 2), Language.ANBNCN)


def test_kernel_matches_plain_acceptance(briefly_trained_anbn):
    p = briefly_trained_anbn
    cfg = EvalConfig(k=5, max_n=150)
    expected = first_errors(lambda n: accepts(p, Language.ANBN, n), cfg)
    assert evaluate(p, Language.ANBN, cfg).errors == expected
    assert expected[0] > 10  # the comparison is not vacuous


@pytest.mark.parametrize("lang", list(Language))
def test_kernel_matches_plain_acceptance_on_random_models(lang):
    rng = np.random.default_rng(lang.order)
    for seed in range(15):
        p = init_parameters(lang.order, int(rng.integers(1, 6)), seed)
        p.flat *= rng.uniform(1, 8)
        cfg = EvalConfig(k=3, max_n=25)
        expected = first_errors(lambda n: accepts(p, lang, n), cfg)
        assert evaluate(p, lang, cfg).errors == expected


def test_evaluation_does_not_mutate(briefly_trained_anbn):
    p = briefly_trained_anbn
    before = p.checksum()
    evaluate(p, Language.ANBN)
    accepts(p, Language.ANBN, 30)
    assert p.checksum() == before


def test_accepts_is_deterministic(briefly_trained_anbn):
    assert [accepts(briefly_trained_anbn, Language.ANBN, n) for n in range(1, 60)] == [
        accepts(briefly_trained_anbn, Language.ANBN, n) for n in range(1, 60)
    ]
