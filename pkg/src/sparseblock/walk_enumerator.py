"""Exact enumeration of closed tree walks and the moment polynomials they give.

For an Erdos-Renyi skeleton in the N -> oo limit, (1/N) <Tr A^{2p}> is a
polynomial in the mean degree Z whose coefficients are traces of block
words.  Each closed walk of 2p steps on a tree with l edges contributes
Z^l times the trace of the product of its edge blocks.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .block_sampler import word_expectation_mc
from .words import Word, canonical_word, cyclic_canonical_word, is_crossing

MAX_HALF_ORDER = 6


class WordClass(str, Enum):
    NON_CROSSING = "NonCrossing"
    CROSSING = "Crossing"


@dataclass
class MomentPolynomial:
    """mu_{2p} as a sum of multiplicity * Z^z * tr(word)."""

    p: int
    terms: dict[tuple[int, Word], int] = field(default_factory=dict)

    def sorted_terms(self) -> list[tuple[int, Word, int]]:
        return sorted(
            ((z, w, m) for (z, w), m in self.terms.items()),
            key=lambda item: (item[0], -item[2], item[1].letters),
        )

    def z_totals(self) -> dict[int, int]:
        out: Counter[int] = Counter()
        for (z, _), m in self.terms.items():
            out[z] += m
        return dict(sorted(out.items()))

    def scalar_value(self, Z: float) -> float:
        """Value at d = 1 with every block equal to 1."""
        return sum(m * Z**z for (z, _), m in self.terms.items())

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "terms": [{"z": z, "word": str(w), "mult": m} for z, w, m in self.sorted_terms()],
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: dict) -> MomentPolynomial:
        terms = {}
        for item in data["terms"]:
            key = (int(item["z"]), Word.parse(item["word"]))
            terms[key] = terms.get(key, 0) + int(item["mult"])
        return cls(int(data["p"]), terms)


def enumerate_tree_walks(p: int) -> MomentPolynomial:
    """Enumerate all closed walks of length 2p on trees grown from a root.

    A step goes to the parent, to an existing child, or to a new child that
    takes the next unused vertex label, so every walk shape is produced
    once.  Terms are grouped by number of distinct edges and by the trace
    class of the edge word.
    """
    if not 1 <= p <= MAX_HALF_ORDER:
        raise ValueError(f"half order p must lie in [1, {MAX_HALF_ORDER}], got {p}")
    n_steps = 2 * p
    parent = [-1]
    children: list[list[int]] = [[]]
    depth = [0]
    edges: list[int] = []  # edge identified by its child vertex
    counts: Counter[tuple[int, Word]] = Counter()

    def visit(v: int, remaining: int) -> None:
        if remaining == 0:
            if v == 0:
                word = cyclic_canonical_word(canonical_word(edges))
                counts[(len(parent) - 1, word)] += 1
            return
        if depth[v] > remaining:
            return
        if parent[v] >= 0:
            edges.append(v)
            visit(parent[v], remaining - 1)
            edges.pop()
        for c in children[v]:
            edges.append(c)
            visit(c, remaining - 1)
            edges.pop()
        # a new vertex can only be left again if there is room to come back
        if depth[v] + 1 <= remaining - 1:
            c = len(parent)
            parent.append(v)
            children.append([])
            depth.append(depth[v] + 1)
            children[v].append(c)
            edges.append(c)
            visit(c, remaining - 1)
            edges.pop()
            children[v].pop()
            parent.pop()
            children.pop()
            depth.pop()

    visit(0, n_steps)
    return MomentPolynomial(p, dict(counts))


def classify_word(w: Word) -> WordClass:
    return WordClass.CROSSING if is_crossing(w) else WordClass.NON_CROSSING


def finite_rank_limit(mp: MomentPolynomial) -> tuple[int, ...]:
    """Integer coefficients (index = power of t) of the d -> oo limit.

    Crossing words vanish; every non-crossing word with s blocks tends to t^s.
    """
    coeffs = [0] * (mp.p + 1)
    for (z, w), m in mp.terms.items():
        if classify_word(w) is WordClass.NON_CROSSING:
            coeffs[w.s] += m
    return tuple(coeffs)


def evaluate_moment_polynomial(mp: MomentPolynomial, measure, Z: float, n_samples: int, seed=None):
    """Monte Carlo value of mu_{2p} at finite block dimension.

    Sums multiplicity * Z^z * (1/d) <tr word> over all terms; every word gets
    its own independent stream and the error bars add in quadrature.
    Returns ``(estimate, stderr)``.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    terms = mp.sorted_terms()
    children = ss.spawn(len(terms))
    total = 0.0
    var = 0.0
    for (z, w, m), child in zip(terms, children):
        est, err = word_expectation_mc(measure, w, n_samples, np.random.default_rng(child))
        scale = m * Z**z / measure.d
        total += scale * est
        var += (scale * err) ** 2
    return total, math.sqrt(var)
