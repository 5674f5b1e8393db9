"""Block-sparse adjacency and Laplacian matrices on a graph skeleton."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .block_sampler import BlockMeasure, sample_blocks
from .graph_model import EdgeSet


class MatrixKind(str, Enum):
    ADJACENCY = "Adjacency"
    LAPLACIAN = "Laplacian"


@dataclass(frozen=True, eq=False)
class BlockSparseMatrix:
    """Symmetric (N d) x (N d) matrix stored by edge blocks.

    ``blocks[k]`` is the block X of edge ``edges[k] = (i, j)``; it sits at
    (i, j) and (j, i) for the adjacency and with a minus sign for the
    Laplacian, whose diagonal blocks are the sums of incident edge blocks.
    """

    n_vertices: int
    block_dim: int
    kind: MatrixKind
    edges: np.ndarray
    blocks: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kind", MatrixKind(self.kind))
        d = self.block_dim
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        blocks = np.asarray(self.blocks, dtype=float).reshape(-1, d, d)
        if len(edges) != len(blocks):
            raise ValueError("one block per edge required")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "blocks", blocks)

    @property
    def shape(self) -> tuple[int, int]:
        n = self.n_vertices * self.block_dim
        return n, n

    @property
    def diagonal(self) -> np.ndarray | None:
        """Diagonal blocks (N, d, d) of the Laplacian, None for the adjacency."""
        if self.kind is MatrixKind.ADJACENCY:
            return None
        diag = np.zeros((self.n_vertices, self.block_dim, self.block_dim))
        np.add.at(diag, self.edges[:, 0], self.blocks)
        np.add.at(diag, self.edges[:, 1], self.blocks)
        return diag

    def block(self, i: int, j: int) -> np.ndarray:
        d = self.block_dim
        if i == j:
            if self.kind is MatrixKind.ADJACENCY:
                return np.zeros((d, d))
            return self.diagonal[i]
        a, b = min(i, j), max(i, j)
        hit = np.nonzero((self.edges[:, 0] == a) & (self.edges[:, 1] == b))[0]
        if not len(hit):
            return np.zeros((d, d))
        x = self.blocks[hit[0]]
        return x if self.kind is MatrixKind.ADJACENCY else -x

    def to_dense(self) -> np.ndarray:
        N, d = self.n_vertices, self.block_dim
        out = np.zeros((N, d, N, d))
        sign = 1.0 if self.kind is MatrixKind.ADJACENCY else -1.0
        i, j = self.edges[:, 0], self.edges[:, 1]
        out[i, :, j, :] = sign * self.blocks
        out[j, :, i, :] = sign * self.blocks
        if self.kind is MatrixKind.LAPLACIAN:
            diag = self.diagonal
            idx = np.arange(N)
            out[idx, :, idx, :] = diag
        return out.reshape(N * d, N * d)

    def matvec(self, x) -> np.ndarray:
        N, d = self.n_vertices, self.block_dim
        x = np.asarray(x, dtype=float)
        if x.shape != (N * d,):
            raise ValueError(f"expected a vector of length {N * d}, got shape {x.shape}")
        xv = x.reshape(N, d)
        i, j = self.edges[:, 0], self.edges[:, 1]
        y = np.zeros((N, d))
        if self.kind is MatrixKind.ADJACENCY:
            np.add.at(y, i, np.einsum("eab,eb->ea", self.blocks, xv[j]))
            np.add.at(y, j, np.einsum("eab,eb->ea", self.blocks, xv[i]))
        else:
            # (L x)_i = sum_j X_ij (x_i - x_j): constant vectors map to zero exactly
            diff = xv[i] - xv[j]
            flow = np.einsum("eab,eb->ea", self.blocks, diff)
            np.add.at(y, i, flow)
            np.add.at(y, j, -flow)
        return y.ravel()

    def trace_of_square(self) -> float:
        """Tr(M^2) from the blocks alone."""
        off = 2.0 * np.einsum("eab,eab->", self.blocks, self.blocks)
        if self.kind is MatrixKind.ADJACENCY:
            return float(off)
        diag = self.diagonal
        return float(off + np.einsum("nab,nab->", diag, diag))

    # text snapshots -----------------------------------------------------

    def dumps(self) -> str:
        lines = [f"{self.n_vertices} {self.block_dim} {self.kind.value}"]
        for (i, j), x in zip(self.edges.tolist(), self.blocks):
            vals = " ".join(repr(float(v)) for v in x.ravel())
            lines.append(f"{i} {j} {vals}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> BlockSparseMatrix:
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        N, d, kind = int(rows[0][0]), int(rows[0][1]), rows[0][2]
        edges, blocks = [], []
        for row in rows[1:]:
            if len(row) != 2 + d * d:
                raise ValueError(f"block line has {len(row)} fields, expected {2 + d * d}")
            edges.append((int(row[0]), int(row[1])))
            blocks.append(np.array([float(v) for v in row[2:]]).reshape(d, d))
        return cls(N, d, kind, np.array(edges, dtype=np.int64).reshape(-1, 2), np.array(blocks).reshape(-1, d, d))

    @classmethod
    def load(cls, path) -> BlockSparseMatrix:
        return cls.loads(Path(path).read_text())


def _assemble(e: EdgeSet, m: BlockMeasure, seed, kind) -> BlockSparseMatrix:
    blocks = sample_blocks(m, len(e), seed)
    return BlockSparseMatrix(e.n_vertices, m.d, kind, e.edges.copy(), blocks)


def assemble_adjacency(e: EdgeSet, m: BlockMeasure, seed=None) -> BlockSparseMatrix:
    return _assemble(e, m, seed, MatrixKind.ADJACENCY)


def assemble_laplacian(e: EdgeSet, m: BlockMeasure, seed=None) -> BlockSparseMatrix:
    return _assemble(e, m, seed, MatrixKind.LAPLACIAN)


def assemble(e: EdgeSet, m: BlockMeasure, kind, seed=None) -> BlockSparseMatrix:
    return _assemble(e, m, seed, MatrixKind(kind))
