"""Length distributions over a closed window of n values."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

UNIFORM = "uniform"
BETA_BINOMIAL = "beta-binomial"


@dataclass(frozen=True)
class LengthWindow:
    lo: int
    hi: int

    def __post_init__(self):
        if not (1 <= self.lo <= self.hi):
            raise ValueError(f"invalid length window [{self.lo}, {self.hi}]")

    @classmethod
    def parse(cls, text: str) -> "LengthWindow":
        lo, sep, hi = text.partition(":")
        if not sep:
            raise ValueError(f"window must look like LO:HI, got {text!r}")
        return cls(int(lo), int(hi))

    def __str__(self) -> str:
        return f"{self.lo}:{self.hi}"

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1


@dataclass(frozen=True)
class DistributionSpec:
    kind: str = UNIFORM
    alpha: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.kind == UNIFORM:
            if self.alpha is not None or self.beta is not None:
                raise ValueError("the uniform distribution takes no shape parameters")
        elif self.kind == BETA_BINOMIAL:
            if self.alpha is None or self.beta is None or not (self.alpha > 0 and self.beta > 0):
                raise ValueError(f"beta-binomial needs alpha > 0 and beta > 0, got {self.alpha}, {self.beta}")
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "DistributionSpec":
        """Accepts ``uniform``, a preset name, or ``beta-binomial:ALPHA,BETA``."""
        if text in PRESETS:
            return PRESETS[text]
        head, sep, params = text.partition(":")
        if head == BETA_BINOMIAL and sep:
            try:
                a, b = (float(v) for v in params.split(","))
            except ValueError:
                raise ValueError(f"expected beta-binomial:ALPHA,BETA, got {text!r}") from None
            return cls(BETA_BINOMIAL, a, b)
        raise ValueError(f"unknown distribution {text!r}; expected one of {', '.join(PRESETS)} or beta-binomial:A,B")

    def __str__(self) -> str:
        for name, spec in PRESETS.items():
            if spec == self:
                return name
        return f"{BETA_BINOMIAL}:{self.alpha!r},{self.beta!r}"


PRESETS = {
    "uniform": DistributionSpec(UNIFORM),
    "u-shaped": DistributionSpec(BETA_BINOMIAL, 0.25, 0.25),
    "right-tailed": DistributionSpec(BETA_BINOMIAL, 1.0, 5.0),
    "left-tailed": DistributionSpec(BETA_BINOMIAL, 5.0, 1.0),
}


def ln_beta(alpha: float, beta: float) -> float:
    if not (alpha > 0 and beta > 0):
        raise ValueError(f"ln_beta needs positive arguments, got {alpha}, {beta}")
    return float(gammaln(alpha) + gammaln(beta) - gammaln(alpha + beta))


def _ln_choose(N: int, x: int) -> float:
    return float(gammaln(N + 1) - gammaln(x + 1) - gammaln(N - x + 1))


def pmf(spec: DistributionSpec, window: LengthWindow, n: int) -> float:
    if not (window.lo <= n <= window.hi):
        return 0.0
    if spec.kind == UNIFORM:
        return 1.0 / window.size
    # the Beta-Binomial lives on {0..N}; shift it onto the window
    N, x = window.hi - window.lo, n - window.lo
    a, b = spec.alpha, spec.beta
    return math.exp(_ln_choose(N, x) + ln_beta(x + a, N - x + b) - ln_beta(a, b))


@lru_cache(maxsize=64)
def _cdf_table(spec: DistributionSpec, window: LengthWindow) -> np.ndarray:
    probs = np.array([pmf(spec, window, n) for n in range(window.lo, window.hi + 1)])
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    cdf.setflags(write=False)
    return cdf


def pmf_table(spec: DistributionSpec, window: LengthWindow) -> np.ndarray:
    """Probabilities for n = lo..hi, in order."""
    return np.array([pmf(spec, window, n) for n in range(window.lo, window.hi + 1)])


def sample_length(spec: DistributionSpec, window: LengthWindow, rng: np.random.Generator) -> int:
    cdf = _cdf_table(spec, window)
    u = rng.random()
    idx = int(np.searchsorted(cdf, u, side="right"))
    return window.lo + min(idx, len(cdf) - 1)


def sample_lengths(spec: DistributionSpec, window: LengthWindow, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorised ``sample_length``; consumes the generator identically to ``size`` scalar calls."""
    cdf = _cdf_table(spec, window)
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    return window.lo + np.minimum(idx, len(cdf) - 1)
