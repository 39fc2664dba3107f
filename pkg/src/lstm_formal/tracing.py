"""Hidden/cell-state traces on probe strings and a rank-correlation counter detector."""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from lstm_formal.encoding import decode_prediction
from lstm_formal.languages import SYMBOLS, Language, format_target_set, generate_sample
from lstm_formal.lstm import LstmParameters, run_sequence

UP, DOWN = "up", "down"
EMPTY_SET = "{}"


@dataclass(frozen=True)
class TraceRecord:
    t: int
    input_symbol: str
    h: np.ndarray
    c: np.ndarray
    predicted: frozenset[str]


@dataclass(frozen=True)
class PhaseSegmentation:
    boundaries: tuple[int, ...]
    length: int

    def __post_init__(self):
        bounds = (0,) + self.boundaries + (self.length,)
        if any(b <= a for a, b in zip(bounds, bounds[1:])):
            raise ValueError(f"boundaries {self.boundaries} must be strictly increasing inside (0, {self.length})")

    def phases(self) -> list[range]:
        bounds = (0,) + self.boundaries + (self.length,)
        return [range(a, b) for a, b in zip(bounds, bounds[1:])]


def phase_segmentation(lang: Language, n: int) -> PhaseSegmentation:
    return PhaseSegmentation(tuple(n * i for i in range(1, lang.order)), lang.order * n)


def segment_trace(trace: list[TraceRecord]) -> PhaseSegmentation:
    """Boundaries wherever the input symbol changes."""
    cuts = tuple(r.t for prev, r in zip(trace, trace[1:]) if r.input_symbol != prev.input_symbol)
    return PhaseSegmentation(cuts, len(trace))


def trace_sequence(p: LstmParameters, lang: Language, n: int) -> list[TraceRecord]:
    sample = generate_sample(lang, n)
    outputs, states, _ = run_sequence(p, sample)
    return [
        TraceRecord(t, sym, st.h, st.c, decode_prediction(lang, y))
        for t, (sym, st, y) in enumerate(zip(sample.input, states, outputs))
    ]


@dataclass(frozen=True)
class CounterUnit:
    unit: int
    directions: tuple[str | None, ...]
    rho: tuple[float, ...]


def detect_counters(
    trace: list[TraceRecord],
    seg: PhaseSegmentation,
    rho_min: float = 0.9,
    require_all_phases: bool = True,
) -> list[CounterUnit]:
    """Units whose cell state moves monotonically with time inside a phase.

    A phase counts for a unit when the Spearman correlation between its cell
    state and the timestep has magnitude at least ``rho_min``; the direction is
    the sign.  By default a unit is reported only if every phase qualifies;
    with ``require_all_phases=False`` one phase suffices and the others are
    reported as ``None``.
    """
    if not trace:
        raise ValueError("empty trace")
    cells = np.stack([r.c for r in trace])
    found = []
    for unit in range(cells.shape[1]):
        dirs, rhos = [], []
        for phase in seg.phases():
            series = cells[phase.start : phase.stop, unit]
            rho = 0.0
            if len(series) > 1 and np.ptp(series) > 0:
                rho = float(spearmanr(np.arange(len(series)), series).statistic)
            rhos.append(rho)
            dirs.append((UP if rho > 0 else DOWN) if abs(rho) >= rho_min else None)
        qualifies = all(dirs) if require_all_phases else any(dirs)
        if qualifies:
            found.append(CounterUnit(unit, tuple(dirs), tuple(rhos)))
    return found


def _render_set(ss: frozenset[str]) -> str:
    if not ss:
        return EMPTY_SET
    text = format_target_set(ss)
    return f"({text})" if len(ss) > 1 else text


def run_length(sets: list[frozenset[str]]) -> str:
    """Compact form such as ``(a/b)^5 b^4 ⊣``."""
    parts = []
    i = 0
    while i < len(sets):
        j = i
        while j < len(sets) and sets[j] == sets[i]:
            j += 1
        count = j - i
        parts.append(_render_set(sets[i]) + (f"^{count}" if count > 1 else ""))
        i = j
    return " ".join(parts)


_TOKEN = re.compile(r"^(\{\}|\([^()]+\)|[^\s^(){}]+)(?:\^(\d+))?$")


def expand_run_length(text: str) -> list[frozenset[str]]:
    out: list[frozenset[str]] = []
    for token in text.split():
        m = _TOKEN.match(token)
        if not m:
            raise ValueError(f"bad run-length token {token!r}")
        body, count = m.group(1), int(m.group(2) or 1)
        if body == EMPTY_SET:
            ss = frozenset()
        else:
            ss = frozenset(body.strip("()").split("/"))
            if not ss <= set(SYMBOLS):
                raise ValueError(f"unknown symbols in {token!r}")
        out.extend([ss] * count)
    return out


def probe_failure_mode(p: LstmParameters, lang: Language, n: int) -> str:
    return run_length([r.predicted for r in trace_sequence(p, lang, n)])


def trace_csv(trace: list[TraceRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "input", "unit", "h", "c"])
    for r in trace:
        for u in range(len(r.h)):
            w.writerow([r.t, r.input_symbol, u, repr(float(r.h[u])), repr(float(r.c[u]))])
    return buf.getvalue()


def predictions_csv(trace: list[TraceRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "input", "predicted_set"])
    for r in trace:
        w.writerow([r.t, r.input_symbol, format_target_set(r.predicted) if r.predicted else EMPTY_SET])
    return buf.getvalue()
