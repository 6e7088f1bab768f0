"""In-memory reference implementations.

Two independent paths live here. The dictionary-backed :class:`SparseMatrix`
kernels and the set-based :func:`brute_jaccard` / :func:`brute_truss` are
written straight from the textbook definitions and serve as test oracles.
The scipy-backed :func:`sparse_jaccard` and :func:`sparse_ktruss` compute the
same results at benchmark scale and play the main-memory baseline in
overhead comparisons: they build the whole result in memory and write only
that.
"""
from __future__ import annotations

import operator
import random
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .batch import EntryBatch, RowRange, as_key_bytes
from .errors import ParameterError
from .ops import BinaryOp, UnaryOp

__all__ = [
    "ShapeError", "SparseMatrix", "EdgeSet",
    "o_mxm", "o_ewise", "o_triu", "o_apply", "o_transpose", "o_nnz", "o_extract",
    "brute_jaccard", "brute_truss", "triangle_support",
    "sparse_adjacency", "sparse_jaccard", "sparse_ktruss",
]


class ShapeError(ParameterError):
    pass


_SCALAR: dict[str, Callable] = {
    "plus": operator.add, "times": operator.mul, "max": max, "min": min,
    "two_if_nonzero": lambda x, y: 2 if x != 0 and y != 0 else 0,
}


def _scalar(op) -> Callable:
    if isinstance(op, BinaryOp):
        if op.name in _SCALAR:
            return _SCALAR[op.name]
        return lambda x, y: op(np.asarray([x]), np.asarray([y]))[0].item()
    return op


@dataclass
class SparseMatrix:
    """A map ``(row, col) -> value`` with no explicit zeros.

    ``shape`` optionally lists the row and column key sets; when both
    operands of a product carry one, the inner dimensions must agree.
    """

    entries: dict = field(default_factory=dict)
    shape: tuple | None = None

    def __post_init__(self):
        self.entries = {(as_key_bytes(r), as_key_bytes(c)): v
                        for (r, c), v in self.entries.items() if v != 0}

    @classmethod
    def from_triples(cls, triples: Iterable, shape=None) -> "SparseMatrix":
        out: dict = {}
        for r, c, v in triples:
            out[(as_key_bytes(r), as_key_bytes(c))] = v
        return cls(out, shape)

    def triples(self) -> list[tuple[bytes, bytes, object]]:
        return [(r, c, v) for (r, c), v in sorted(self.entries.items())]

    def rows(self) -> dict:
        by_row: dict = defaultdict(dict)
        for (r, c), v in self.entries.items():
            by_row[r][c] = v
        return by_row

    def __eq__(self, other):
        return isinstance(other, SparseMatrix) and self.entries == other.entries

    def __len__(self):
        return len(self.entries)


def o_mxm(a: SparseMatrix, b: SparseMatrix, mul=operator.mul, add=operator.add) -> SparseMatrix:
    """``A·B`` under (``add``, ``mul``); only nonzero results are kept."""
    if a.shape is not None and b.shape is not None and set(a.shape[1]) != set(b.shape[0]):
        raise ShapeError("inner dimensions of the product differ")
    mul, add = _scalar(mul), _scalar(add)
    b_rows = b.rows()
    acc: dict = {}
    for (i, k), x in a.entries.items():
        for j, y in b_rows.get(k, {}).items():
            p = mul(x, y)
            acc[(i, j)] = add(acc[(i, j)], p) if (i, j) in acc else p
    shape = (a.shape[0], b.shape[1]) if a.shape and b.shape else None
    return SparseMatrix(acc, shape)


def o_ewise(a: SparseMatrix, b: SparseMatrix, op=operator.mul, union: bool = False) -> SparseMatrix:
    op = _scalar(op)
    out = {key: op(v, b.entries[key]) for key, v in a.entries.items() if key in b.entries}
    if union:
        for m in (a, b):
            for key, v in m.entries.items():
                if key not in out and not (key in a.entries and key in b.entries):
                    out[key] = v
    return SparseMatrix(out)


def o_triu(a: SparseMatrix, k: int = 1) -> SparseMatrix:
    """Entries strictly above the diagonal (``k=1``) or on and above it (``k=0``)."""
    keep = (lambda r, c: r < c) if k >= 1 else (lambda r, c: r <= c)
    return SparseMatrix({(r, c): v for (r, c), v in a.entries.items() if keep(r, c)})


def o_apply(a: SparseMatrix, f) -> SparseMatrix:
    if isinstance(f, UnaryOp):
        fn = lambda v: f(np.asarray([v]))[0].item()  # noqa: E731
    else:
        fn = f
    return SparseMatrix({key: fn(v) for key, v in a.entries.items()})


def o_transpose(a: SparseMatrix) -> SparseMatrix:
    shape = (a.shape[1], a.shape[0]) if a.shape else None
    return SparseMatrix({(c, r): v for (r, c), v in a.entries.items()}, shape)


def o_nnz(a: SparseMatrix) -> int:
    return len(a.entries)


def o_extract(a: SparseMatrix, row_ranges=None, col_ranges=None) -> SparseMatrix:
    def inside(key, ranges):
        if ranges is None:
            return True
        return any((r if isinstance(r, RowRange) else RowRange(*r)).contains(key) for r in ranges)
    return SparseMatrix({(r, c): v for (r, c), v in a.entries.items()
                         if inside(r, row_ranges) and inside(c, col_ranges)})


# ---------------------------------------------------------------------------
# graphs as edge sets


class EdgeSet:
    """Undirected simple-graph edges stored as ordered pairs ``(u, v)`` with u < v."""

    def __init__(self, pairs: Iterable = ()):
        edges = set()
        for u, v in pairs:
            u, v = as_key_bytes(u), as_key_bytes(v)
            if u == v:
                continue
            edges.add((u, v) if u < v else (v, u))
        self.edges = frozenset(edges)

    @classmethod
    def from_triples(cls, triples: Iterable) -> "EdgeSet":
        return cls((r, c) for r, c, *_ in triples)

    def neighbors(self) -> dict:
        nbrs: dict = defaultdict(set)
        for u, v in self.edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        return nbrs

    def triples(self) -> list[tuple[bytes, bytes, int]]:
        """Both directions of every edge, valued 1, in key order."""
        return sorted([(u, v, 1) for u, v in self.edges] + [(v, u, 1) for u, v in self.edges])

    def __eq__(self, other):
        return isinstance(other, EdgeSet) and self.edges == other.edges

    def __le__(self, other):
        return self.edges <= other.edges

    def __len__(self):
        return len(self.edges)

    def __iter__(self):
        return iter(sorted(self.edges))

    def __repr__(self):
        return f"EdgeSet({sorted(self.edges)!r})"


def brute_jaccard(edges: EdgeSet, exact: bool = False) -> dict:
    """|N(i) ∩ N(j)| / |N(i) ∪ N(j)| for every pair i < j sharing a neighbor."""
    nbrs = edges.neighbors()
    out = {}
    verts = sorted(nbrs)
    for x, i in enumerate(verts):
        for j in verts[x + 1:]:
            common = len(nbrs[i] & nbrs[j])
            if common:
                union = len(nbrs[i] | nbrs[j])
                out[(i, j)] = Fraction(common, union) if exact else common / union
    return out


def triangle_support(edges: EdgeSet) -> dict:
    """Number of triangles through each edge."""
    nbrs = edges.neighbors()
    return {(u, v): len(nbrs[u] & nbrs[v]) for u, v in edges.edges}


def brute_truss(edges: EdgeSet, k: int, rng: random.Random | None = None) -> EdgeSet:
    """Delete edges in fewer than k - 2 triangles until none remain to delete.

    Each round recomputes every support, then removes all failing edges; with
    ``rng`` the failing edges are removed one at a time in shuffled order.
    """
    if k < 3:
        raise ParameterError(f"k must be >= 3, got {k}")
    current = set(edges.edges)
    while True:
        support = triangle_support(EdgeSet(current))
        failing = [e for e in sorted(current) if support[e] < k - 2]
        if not failing:
            return EdgeSet(current)
        if rng is not None:
            rng.shuffle(failing)
        for e in failing:
            current.discard(e)


# ---------------------------------------------------------------------------
# scipy baseline


def sparse_adjacency(batch: EntryBatch):
    """``(csr, vertex_ids)`` for an adjacency batch; ids sorted."""
    ids, inv = np.unique(np.concatenate([batch.row, batch.qualifier]), return_inverse=True)
    n = len(batch)
    rows, cols = inv[:n], inv[n:]
    m = sp.csr_matrix((np.ones(n, dtype=np.int64), (rows, cols)), shape=(len(ids), len(ids)))
    m.sum_duplicates()
    m.data[:] = 1
    return m, ids


def _to_batch(m, ids) -> EntryBatch:
    coo = m.tocoo()
    out = EntryBatch.from_arrays(ids[coo.row], ids[coo.col], coo.data)
    return out.sorted()


def sparse_jaccard(batch: EntryBatch) -> EntryBatch:
    """Jaccard coefficients of the strict upper triangle, in key order."""
    if len(batch) == 0:
        return EntryBatch.empty(np.float64)
    a, ids = sparse_adjacency(batch)
    deg = np.asarray(a.sum(axis=1)).ravel().astype(np.float64)
    common = sp.triu(a @ a, k=1).tocoo()
    common.eliminate_zeros()
    j = common.data.astype(np.float64)
    vals = j / (deg[common.row] + deg[common.col] - j)
    return _to_batch(sp.coo_matrix((vals, (common.row, common.col)), shape=a.shape), ids)


def sparse_ktruss(batch: EntryBatch, k: int) -> EntryBatch:
    """The k-truss adjacency (both directions, valued 1), in key order."""
    if k < 3:
        raise ParameterError(f"k must be >= 3, got {k}")
    if len(batch) == 0:
        return EntryBatch.empty()
    a, ids = sparse_adjacency(batch)
    while True:
        support = (a @ a).multiply(a).tocsr()
        keep = (support >= k - 2).astype(np.int64).tocsr()
        keep.eliminate_zeros()
        if keep.nnz == a.nnz:
            return _to_batch(a, ids)
        a = keep
        if a.nnz == 0:
            return EntryBatch.empty()
