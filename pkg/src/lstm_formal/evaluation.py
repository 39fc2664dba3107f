"""First-k-error generalization probe.

A frozen model is run on every member of the language in increasing n.
The first ``k`` values of n whose sample is rejected are recorded; if the
scan reaches ``max_n`` first, the remaining slots are censored.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numba import njit

from lstm_formal.encoding import decode_prediction, sample_accepted
from lstm_formal.languages import Language, generate_sample
from lstm_formal.lstm import LstmParameters, _sig, run_sequence


@dataclass(frozen=True)
class EvalConfig:
    k: int = 5
    max_n: int = 1000

    def __post_init__(self):
        if self.k < 1 or self.max_n < 1:
            raise ValueError(f"k and max_n must be >= 1, got k={self.k}, max_n={self.max_n}")


@dataclass(frozen=True)
class ErrorProfile:
    errors: tuple[int, ...]
    k: int
    max_n: int
    loss_at_eval: float | None = None

    def __post_init__(self):
        if len(self.errors) > self.k:
            raise ValueError("more errors than slots")
        if any(b <= a for a, b in zip(self.errors, self.errors[1:])):
            raise ValueError(f"error lengths must be strictly increasing: {self.errors}")

    @property
    def censored(self) -> int:
        return self.k - len(self.errors)

    def slots(self) -> list[int | None]:
        """e1..ek, with None for censored slots."""
        return list(self.errors) + [None] * self.censored

    def e(self, i: int) -> int | None:
        """1-based accessor: ``profile.e(1)`` is the shortest failing n."""
        return self.slots()[i - 1]


def accepts(p: LstmParameters, lang: Language, n: int) -> bool:
    sample = generate_sample(lang, n)
    outputs, _, _ = run_sequence(p, sample)
    predicted = [decode_prediction(lang, y) for y in outputs]
    return sample_accepted(predicted, sample.targets)


@njit(cache=True)
def _lstm_step(Wx, Wh, b, Wy, by, x, h, c, z, y):
    H = h.shape[0]
    for gi in range(4):
        for u in range(H):
            acc = Wx[gi, u, x] + b[gi, u]
            for v in range(H):
                acc += Wh[gi, u, v] * h[v]
            z[gi, u] = acc
    for u in range(H):
        c[u] = _sig(z[1, u]) * c[u] + _sig(z[0, u]) * math.tanh(z[2, u])
        h[u] = _sig(z[3, u]) * math.tanh(c[u])
    for j in range(y.shape[0]):
        acc = by[j]
        for u in range(H):
            acc += Wy[j, u] * h[u]
        y[j] = _sig(acc)


@njit(cache=True)
def _scan_kernel(Wx, Wh, b, Wy, by, order, max_n, k):
    """Ascending scan n = 1..max_n with early exit; returns the failing n values."""
    H = Wh.shape[1]
    D = Wy.shape[0]
    out = np.zeros(k, dtype=np.int64)
    found = 0
    h = np.zeros(H)
    c = np.zeros(H)
    hs = np.zeros(H)
    cs = np.zeros(H)
    z = np.zeros((4, H))
    y = np.zeros(D)
    prefix_ok = True
    for n in range(1, max_n + 1):
        # the a-prefix of sample n is shared with every longer sample
        if prefix_ok:
            _lstm_step(Wx, Wh, b, Wy, by, 0, h, c, z, y)
            for j in range(D):
                if (y[j] > 0.5) != (j < 2):
                    prefix_ok = False
        ok = prefix_ok
        if ok:
            for u in range(H):
                hs[u] = h[u]
                cs[u] = c[u]
            total = order * n
            for t in range(n, total):
                _lstm_step(Wx, Wh, b, Wy, by, t // n, hs, cs, z, y)
                target = (t + 1) // n if t + 1 < total else D - 1
                for j in range(D):
                    if (y[j] > 0.5) != (j == target):
                        ok = False
                        break
                if not ok:
                    break
        if not ok:
            out[found] = n
            found += 1
            if found == k:
                break
    return out[:found]


def first_errors(accept: Callable[[int], bool], cfg: EvalConfig) -> tuple[int, ...]:
    """Generic ascending scan over any acceptance predicate."""
    errors = []
    for n in range(1, cfg.max_n + 1):
        if not accept(n):
            errors.append(n)
            if len(errors) == cfg.k:
                break
    return tuple(errors)


def evaluate(
    model: LstmParameters | Callable[[int], bool],
    lang: Language,
    cfg: EvalConfig = EvalConfig(),
    loss_at_eval: float | None = None,
) -> ErrorProfile:
    """Error profile of a frozen network, or of any ``n -> accepted`` predicate."""
    if isinstance(model, LstmParameters):
        if model.d != lang.order:
            raise ValueError(f"model has input dimension {model.d} but {lang.value} needs {lang.order}")
        found = _scan_kernel(model.Wx, model.Wh, model.b, model.Wy, model.by, lang.order, cfg.max_n, cfg.k)
        errors = tuple(int(n) for n in found)
    else:
        errors = first_errors(model, cfg)
    return ErrorProfile(errors, cfg.k, cfg.max_n, loss_at_eval)
