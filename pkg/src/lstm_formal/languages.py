"""The three counting languages and their next-symbol target sets.

Each string aⁿbⁿ[cⁿ[dⁿ]] is read one symbol at a time; the target at a
position is the set of symbols that may legally come next.  While reading
a's the next symbol is either another a or the first b; once a b has been
seen the rest of the string is determined by n.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

END = "⊣"
SYMBOLS = ("a", "b", "c", "d", END)


class Language(enum.Enum):
    ANBN = "anbn"
    ANBNCN = "anbncn"
    ANBNCNDN = "anbncndn"

    @property
    def order(self) -> int:
        """Number of distinct input symbols (2, 3 or 4)."""
        return {"anbn": 2, "anbncn": 3, "anbncndn": 4}[self.value]

    @classmethod
    def parse(cls, text: str) -> "Language":
        try:
            return cls(text.lower())
        except ValueError:
            choices = ", ".join(lang.value for lang in cls)
            raise ValueError(f"unknown language {text!r}; expected one of {choices}") from None

    @classmethod
    def from_input_dim(cls, d: int) -> "Language":
        for lang in cls:
            if lang.order == d:
                return lang
        raise ValueError(f"no language has an input vocabulary of size {d}")


def input_vocab(lang: Language) -> tuple[str, ...]:
    return SYMBOLS[: lang.order]


def output_vocab(lang: Language) -> tuple[str, ...]:
    return input_vocab(lang) + (END,)


def sequence_length(lang: Language, n: int) -> int:
    return lang.order * n


@dataclass(frozen=True)
class Sample:
    language: Language
    n: int
    input: tuple[str, ...]
    targets: tuple[frozenset[str], ...]

    def __len__(self) -> int:
        return len(self.input)


def generate_sample(lang: Language, n: int) -> Sample:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    vocab = input_vocab(lang)
    text = tuple(sym for sym in vocab for _ in range(n))
    targets = [frozenset("ab")] * n
    targets += [frozenset(nxt) for nxt in text[n + 1 :]]
    targets.append(frozenset(END))
    return Sample(lang, n, text, tuple(targets))


def format_target_set(ss: frozenset[str]) -> str:
    return "/".join(sym for sym in SYMBOLS if sym in ss)


def format_sample(sample: Sample) -> str:
    """Render as ``input<TAB>target-sets``, e.g. ``aabb\\ta/b a/b b ⊣``."""
    return "".join(sample.input) + "\t" + " ".join(format_target_set(t) for t in sample.targets)


def parse_sample_line(line: str, lang: Language) -> Sample:
    text, _, rest = line.rstrip("\n").partition("\t")
    targets = tuple(frozenset(part.split("/")) for part in rest.split(" "))
    if len(text) % lang.order:
        raise ValueError(f"input length {len(text)} is not a multiple of {lang.order}")
    return Sample(lang, len(text) // lang.order, tuple(text), targets)
