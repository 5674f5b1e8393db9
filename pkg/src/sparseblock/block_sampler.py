"""Random d x d real symmetric blocks and Monte Carlo traces of block words.

Low-rank families are generated in factored form X = V V^T with V of shape
(d, r); traces of words are then evaluated on r x r Gram matrices, which
keeps rank-one estimates at large d cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .words import InvalidWordError, Word

CHUNK = 50_000


class InvalidMeasureError(ValueError):
    pass


class MeasureFamily(str, Enum):
    RANK_ONE_SPHERE = "RankOneSphere"
    RANK_ONE_BALL = "RankOneBall"
    RANK_ONE_GAUSS = "RankOneGauss"
    RANK_ONE_CUBE = "RankOneCube"
    RANK_R_ORTHOGONAL = "RankROrthogonal"
    RANK_R_INDEPENDENT = "RankRIndependent"
    FULL_FIXED_TRACE = "FullFixedTrace"
    FULL_BOUNDED_TRACE = "FullBoundedTrace"
    FULL_GAUSS = "FullGauss"

    @property
    def is_full(self) -> bool:
        return self.value.startswith("Full")

    @property
    def is_rank_one(self) -> bool:
        return self.value.startswith("RankOne")


@dataclass(frozen=True)
class BlockMeasure:
    d: int
    family: MeasureFamily = MeasureFamily.RANK_ONE_SPHERE
    rank: int | None = None
    radius: float = 1.0
    radii: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        fam = MeasureFamily(self.family)
        object.__setattr__(self, "family", fam)
        if int(self.d) != self.d or self.d < 1:
            raise InvalidMeasureError(f"block dimension must be a positive integer, got {self.d}")
        rank = self.rank
        if fam.is_rank_one:
            rank = 1 if rank is None else rank
            if rank != 1:
                raise InvalidMeasureError(f"{fam.value} has rank 1")
        elif fam.is_full:
            rank = self.d if rank is None else rank
            if rank != self.d:
                raise InvalidMeasureError(f"{fam.value} has rank d")
        elif rank is None:
            raise InvalidMeasureError(f"{fam.value} needs an explicit rank")
        if rank < 1 or rank > self.d:
            raise InvalidMeasureError(f"rank {rank} must lie in [1, d={self.d}]")
        object.__setattr__(self, "rank", int(rank))
        if not self.radius > 0:
            raise InvalidMeasureError("radius must be positive")
        if self.radii is not None:
            if fam is not MeasureFamily.RANK_R_INDEPENDENT:
                raise InvalidMeasureError("per-vector radii only apply to RankRIndependent")
            radii = tuple(float(r) for r in self.radii)
            if len(radii) != rank or any(not r > 0 for r in radii):
                raise InvalidMeasureError("radii must be r positive numbers")
            object.__setattr__(self, "radii", radii)

    @property
    def vector_radii(self) -> np.ndarray:
        if self.radii is not None:
            return np.asarray(self.radii)
        return np.full(self.rank, float(self.radius))


def _unit_vectors(rng, shape):
    v = rng.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-2, keepdims=True)


def sample_factors(m: BlockMeasure, n: int, rng: np.random.Generator) -> np.ndarray:
    """Factors V of shape (n, d, r) with X = V V^T, for the low-rank families."""
    fam, d, r, R = m.family, m.d, m.rank, m.radius
    if fam.is_full:
        raise InvalidMeasureError("full-rank families have no vector factors")
    if fam is MeasureFamily.RANK_ONE_SPHERE:
        return R * _unit_vectors(rng, (n, d, 1))
    if fam is MeasureFamily.RANK_ONE_BALL:
        radius = R * rng.random((n, 1, 1)) ** (1.0 / d)
        return radius * _unit_vectors(rng, (n, d, 1))
    if fam is MeasureFamily.RANK_ONE_GAUSS:
        return rng.standard_normal((n, d, 1)) * (R / math.sqrt(d))
    if fam is MeasureFamily.RANK_ONE_CUBE:
        return rng.uniform(-R, R, size=(n, d, 1))
    if fam is MeasureFamily.RANK_R_INDEPENDENT:
        return _unit_vectors(rng, (n, d, r)) * m.vector_radii[None, None, :]
    # RankROrthogonal: Gram-Schmidt on Gaussian columns, then norm R
    g = rng.standard_normal((n, d, r))
    for a in range(r):
        col = g[:, :, a]
        for b in range(a):
            prev = g[:, :, b]
            col -= np.sum(col * prev, axis=1, keepdims=True) * prev
        col /= np.linalg.norm(col, axis=1, keepdims=True)
    return R * g


def _gauss_symmetric(n, d, R, rng):
    g = rng.standard_normal((n, d, d)) * (R / math.sqrt(d))
    return (g + np.swapaxes(g, 1, 2)) / math.sqrt(2.0)


def sample_blocks(m: BlockMeasure, n: int, seed=None) -> np.ndarray:
    """n independent blocks, shape (n, d, d), exactly symmetric."""
    rng = np.random.default_rng(seed)
    fam, d, R = m.family, m.d, m.radius
    if not fam.is_full:
        v = sample_factors(m, n, rng)
        x = v @ np.swapaxes(v, 1, 2)
    else:
        x = _gauss_symmetric(n, d, R, rng)
        if fam is not MeasureFamily.FULL_GAUSS:
            sq = np.einsum("nij,nij->n", x, x) / d
            scale = R / np.sqrt(sq)
            if fam is MeasureFamily.FULL_BOUNDED_TRACE:
                scale = scale * rng.random(n) ** (1.0 / (d * (d + 1) / 2))
            x = x * scale[:, None, None]
    return (x + np.swapaxes(x, 1, 2)) / 2.0


def sample_block(m: BlockMeasure, seed=None) -> np.ndarray:
    return sample_blocks(m, 1, seed)[0]


def _matpow(a, k):
    out = None
    base = a
    while k:
        if k & 1:
            out = base if out is None else out @ base
        k >>= 1
        if k:
            base = base @ base
    return out


def word_traces(w: Word, blocks: dict[int, np.ndarray], factored: bool) -> np.ndarray:
    """tr(word) for every sample.

    ``blocks[label]`` holds either full blocks (n, d, d) or factors (n, d, r).
    """
    letters = list(w.letters)
    if factored:
        gram = {k: np.swapaxes(v, 1, 2) @ v for k, v in blocks.items()}
        if len(letters) == 1:
            k, e = letters[0]
            return np.trace(_matpow(gram[k], e), axis1=1, axis2=2)
        prod = None
        for i, (k, e) in enumerate(letters):
            nxt = letters[(i + 1) % len(letters)][0]
            link = np.swapaxes(blocks[k], 1, 2) @ blocks[nxt]
            if e > 1:
                link = _matpow(gram[k], e - 1) @ link
            prod = link if prod is None else prod @ link
        return np.trace(prod, axis1=1, axis2=2)
    prod = None
    for k, e in letters:
        term = _matpow(blocks[k], e)
        prod = term if prod is None else prod @ term
    return np.trace(prod, axis1=1, axis2=2)


def word_samples(m: BlockMeasure, w: Word, n_samples: int, seed=None) -> np.ndarray:
    """Per-sample tr(word) with s independent blocks per sample."""
    if w is None or not w.letters:
        raise InvalidWordError("empty word")
    rng = np.random.default_rng(seed)
    factored = not m.family.is_full
    out = np.empty(n_samples)
    for start in range(0, n_samples, CHUNK):
        n = min(CHUNK, n_samples - start)
        if factored:
            blocks = {k: sample_factors(m, n, rng) for k in range(1, w.s + 1)}
        else:
            blocks = {k: sample_blocks(m, n, rng) for k in range(1, w.s + 1)}
        out[start:start + n] = word_traces(w, blocks, factored)
    return out


def word_expectation_mc(m: BlockMeasure, w: Word, n_samples: int, seed=None) -> tuple[float, float]:
    """Monte Carlo <tr word> and its standard error."""
    if n_samples < 2:
        raise ValueError("need at least two samples")
    vals = word_samples(m, w, n_samples, seed)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples))


CROSSING_WORD = Word(((1, 2), (2, 2), (1, 2), (2, 2)))


def crossing_decay_probe(d_list, n_samples: int, seed=None, radius: float = 1.0):
    """<tr X1^2 X2^2 X1^2 X2^2> / R^16 for rank-one sphere blocks at each d.

    Returns a list of ``(d, estimate, stderr)``.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rows = []
    for d, child in zip(d_list, ss.spawn(len(d_list))):
        if d < 2:
            raise ValueError("crossing probe needs d >= 2")
        m = BlockMeasure(d, MeasureFamily.RANK_ONE_SPHERE, radius=radius)
        est, err = word_expectation_mc(m, CROSSING_WORD, n_samples, np.random.default_rng(child))
        rows.append((d, est / radius**16, err / radius**16))
    return rows


def loglog_slope(rows) -> float:
    d = np.log([r[0] for r in rows])
    y = np.log([r[1] for r in rows])
    return float(np.polyfit(d, y, 1)[0])
