"""Block words: relabeled products of random blocks.

A word records only which factors in a product are the same block.  It is
stored as a tuple of ``(label, exponent)`` letters with labels numbered by
first occurrence, so ``X13 X31 X13 X34 X47 X74 X43 X31`` becomes
``1^3 2^1 3^2 2^1 1^1``.
"""

from __future__ import annotations

from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass
from itertools import groupby


class InvalidWordError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Word:
    letters: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.letters:
            raise InvalidWordError("empty word")
        seen = 0
        for i, (label, exponent) in enumerate(self.letters):
            if exponent < 1:
                raise InvalidWordError(f"non-positive exponent in letter {i}")
            if label > seen + 1 or label < 1:
                raise InvalidWordError("labels must appear in first-occurrence order")
            seen = max(seen, label)
            if i and self.letters[i - 1][0] == label:
                raise InvalidWordError("adjacent letters must carry distinct labels")

    @property
    def s(self) -> int:
        """Number of distinct blocks."""
        return max(label for label, _ in self.letters)

    @property
    def length(self) -> int:
        """Total number of factors ``P``."""
        return sum(e for _, e in self.letters)

    @property
    def powers(self) -> dict[int, int]:
        """Total exponent ``r_k`` of each label."""
        out: dict[int, int] = {}
        for label, e in self.letters:
            out[label] = out.get(label, 0) + e
        return out

    def positions(self) -> list[int]:
        """Label at every factor position, e.g. ``1^2 2^1`` -> ``[1, 1, 2]``."""
        return [label for label, e in self.letters for _ in range(e)]

    def __str__(self) -> str:
        return " ".join(f"{label}^{e}" for label, e in self.letters)

    @classmethod
    def parse(cls, text: str) -> Word:
        letters = []
        for tok in text.split():
            label, _, exp = tok.partition("^")
            letters.append((int(label), int(exp) if exp else 1))
        return cls(tuple(letters))


def canonical_word(labels: Sequence[Hashable]) -> Word:
    """Relabel block identifiers by first occurrence and merge runs into powers."""
    if len(labels) == 0:
        raise InvalidWordError("empty label sequence")
    names: dict[Hashable, int] = {}
    letters = []
    for key, run in groupby(labels):
        if key not in names:
            names[key] = len(names) + 1
        letters.append((names[key], sum(1 for _ in run)))
    return Word(tuple(letters))


def _relabel(letters: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    names: dict[int, int] = {}
    out = []
    for label, e in letters:
        if label not in names:
            names[label] = len(names) + 1
        out.append((names[label], e))
    return tuple(out)


def _key(letters):
    # larger powers first, then smaller labels
    return tuple((-e, label) for label, e in letters)


def cyclic_canonical_word(w: Word) -> Word:
    """Representative of the class of words with the same trace.

    The trace of a product of symmetric matrices is unchanged by cyclic
    rotation and by reversal, so all such variants are folded onto one
    representative: the variant whose powers read largest first (ties broken
    by smaller labels).  A run that wraps around the end is merged.
    """
    letters = list(w.letters)
    if len(letters) > 1 and letters[0][0] == letters[-1][0]:
        first, last = letters[0], letters.pop()
        letters[0] = (first[0], first[1] + last[1])
    n = len(letters)
    best = None
    for seq in (letters, letters[::-1]):
        for shift in range(n):
            cand = _relabel(seq[shift:] + seq[:shift])
            if best is None or _key(cand) < _key(best):
                best = cand
    return Word(best)


def is_crossing(w: Word) -> bool:
    """True when the position partition induced by the labels has a crossing.

    A crossing is a < b < c < e with positions a, c in one block and b, e in
    another.
    """
    pos = w.positions()
    spans: dict[int, list[int]] = {}
    for i, label in enumerate(pos):
        spans.setdefault(label, []).append(i)
    labels = sorted(spans)
    for i, x in enumerate(labels):
        for y in labels[i + 1:]:
            # Classes x and y cross iff the cyclic pattern of their positions,
            # restricted to the two classes, alternates more than twice.
            merged = sorted([(p, 0) for p in spans[x]] + [(p, 1) for p in spans[y]])
            tags = [t for _, t in merged]
            changes = sum(1 for a, b in zip(tags, tags[1:] + tags[:1]) if a != b)
            if changes > 2:
                return True
    return False
