"""Graph skeletons: Erdos-Renyi and random regular graphs."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class InvalidSpecError(ValueError):
    pass


class GraphFamily(str, Enum):
    ERDOS_RENYI = "ErdosRenyi"
    REGULAR = "Regular"


@dataclass(frozen=True)
class GraphSpec:
    n_vertices: int
    mean_degree: float
    family: GraphFamily = GraphFamily.ERDOS_RENYI

    def __post_init__(self):
        object.__setattr__(self, "family", GraphFamily(self.family))
        N, Z = self.n_vertices, self.mean_degree
        if int(N) != N or N < 1:
            raise InvalidSpecError(f"n_vertices must be a positive integer, got {N}")
        if Z < 0:
            raise InvalidSpecError(f"mean_degree must be nonnegative, got {Z}")
        if self.family is GraphFamily.ERDOS_RENYI:
            if Z > N:
                raise InvalidSpecError(f"edge probability Z/N = {Z / N} exceeds 1")
        else:
            if int(Z) != Z:
                raise InvalidSpecError("regular graphs need an integer degree")
            if Z >= N:
                raise InvalidSpecError(f"degree {Z} must be smaller than N = {N}")
            if (N * int(Z)) % 2:
                raise InvalidSpecError(f"N * Z = {N * int(Z)} must be even")


@dataclass(frozen=True)
class EdgeSet:
    """Simple undirected graph; ``edges`` is an (E, 2) int array of sorted
    pairs (i < j) in lexicographic order."""

    n_vertices: int
    edges: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            e = np.sort(e, axis=1)
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loop in edge set")
            if e.min() < 0 or e.max() >= self.n_vertices:
                raise ValueError("vertex index out of range")
            e = np.unique(e, axis=0)
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    def __len__(self):
        return len(self.edges)

    def __eq__(self, other):
        return (
            isinstance(other, EdgeSet)
            and self.n_vertices == other.n_vertices
            and np.array_equal(self.edges, other.edges)
        )

    def __hash__(self):
        return hash((self.n_vertices, self.edges.tobytes()))


def sample_er_edges(spec: GraphSpec, seed=None) -> EdgeSet:
    """Include each of the N(N-1)/2 pairs independently with probability Z/N."""
    if spec.family is not GraphFamily.ERDOS_RENYI:
        raise InvalidSpecError("sample_er_edges needs an ErdosRenyi spec")
    rng = np.random.default_rng(seed)
    N = spec.n_vertices
    prob = spec.mean_degree / N
    if not 0.0 <= prob <= 1.0:
        raise InvalidSpecError(f"edge probability {prob} outside [0, 1]")
    iu, ju = np.triu_indices(N, k=1)
    keep = rng.random(len(iu)) < prob
    return EdgeSet(N, np.column_stack([iu[keep], ju[keep]]))


def _pairing_attempt(N: int, Z: int, rng: np.random.Generator):
    edges: set[tuple[int, int]] = set()
    stubs = np.repeat(np.arange(N), Z)
    while len(stubs):
        rng.shuffle(stubs)
        leftover: list[int] = []
        for a, b in zip(stubs[::2].tolist(), stubs[1::2].tolist()):
            pair = (a, b) if a < b else (b, a)
            if a != b and pair not in edges:
                edges.add(pair)
            else:
                leftover += [a, b]
        if not leftover:
            break
        # give up when no admissible pair is left among the unmatched stubs
        nodes = sorted(set(leftover))
        if not any(
            (u, v) not in edges for i, u in enumerate(nodes) for v in nodes[i + 1:]
        ):
            return None
        stubs = np.array(leftover)
    return edges


def sample_regular_edges(spec: GraphSpec, seed=None) -> EdgeSet:
    """Random Z-regular simple graph by stub pairing.

    Stubs that would close a self-loop or a repeated edge are re-paired
    among themselves; an attempt that gets stuck is discarded and restarted.
    """
    if spec.family is not GraphFamily.REGULAR:
        raise InvalidSpecError("sample_regular_edges needs a Regular spec")
    rng = np.random.default_rng(seed)
    N, Z = spec.n_vertices, int(spec.mean_degree)
    if Z == 0:
        return EdgeSet(N, np.empty((0, 2), dtype=np.int64))
    while True:
        edges = _pairing_attempt(N, Z, rng)
        if edges is not None:
            return EdgeSet(N, np.array(sorted(edges), dtype=np.int64))


def sample_edges(spec: GraphSpec, seed=None) -> EdgeSet:
    if spec.family is GraphFamily.REGULAR:
        return sample_regular_edges(spec, seed)
    return sample_er_edges(spec, seed)


def vertex_degrees(e: EdgeSet) -> list[int]:
    return np.bincount(e.edges.ravel(), minlength=e.n_vertices).tolist()
