"""Jaccard coefficients and k-truss decomposition as fused kernel plans.

Both algorithms take an adjacency table: unweighted (every value 1),
undirected (symmetric) and free of self-loops.
"""
from __future__ import annotations

import itertools
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .batch import EntryBatch, _ranges
from .errors import (DataConsistencyError, NameConflictError, ParameterError, ResourceError,
                     ValidationError)
from .iterators import (ApplyIterator, BlockIterator, Combiner, FilterIterator,
                        IteratorDescriptor, drop_even, no_diagonal, register_iterator,
                        strict_lower, strict_upper, truss_threshold)
from .kernels import COMBINER_PRIORITY, Fusion, ensure_combiner, reduce_kernel, two_table
from .ops import PLUS, SET_ONE, TIMES, TWO_IF_NONZERO, BinaryOp
from .store import COMPACTION, SCAN, TabletStore
from .twotable import NnzCount, RowMultiply, cartesian, _groups

__all__ = [
    "AlgorithmMetrics", "validate_adjacency", "compute_degrees",
    "JaccardRowMultiply", "JaccardDegreeApply", "jaccard", "ktruss",
    "DEGREE_QUALIFIER", "MAX_DEGREE_VERTICES",
]

DEGREE_QUALIFIER = b"deg"
MAX_DEGREE_VERTICES = 10_000_000
APPLY_PRIORITY = 20


@dataclass
class AlgorithmMetrics:
    partial_products: int = 0
    entries_written: int = 0
    iterations: int = 0
    nnz_input: int = 0
    nnz_output: int = 0
    runtime_ms: float = 0.0
    per_iteration: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# adjacency checks and degrees


def _adjacency_problems(batch: EntryBatch, symmetric: bool = True) -> list[str]:
    problems = []
    if len(batch) == 0:
        return problems
    if np.any(batch.value != 1):
        i = int(np.flatnonzero(batch.value != 1)[0])
        problems.append(f"weighted entry {batch.key(i)[:3]} = {batch.value[i]} (expected 1)")
    loops = batch.row == batch.qualifier
    if loops.any():
        i = int(np.flatnonzero(loops)[0])
        problems.append(f"self-loop at {batch.row[i]!r}")
    if symmetric:
        t = batch.transposed().sorted()
        if (len(t) != len(batch) or np.any(t.row != batch.row)
                or np.any(t.qualifier != batch.qualifier)):
            problems.append("adjacency matrix is not symmetric")
    return problems


def validate_adjacency(store: TabletStore, table: str, strict: bool = True) -> EntryBatch:
    """Check that ``table`` is an unweighted, symmetric, loop-free adjacency.

    Raises :class:`ValidationError` in strict mode and warns otherwise.
    Returns the scanned entries.
    """
    batch = store.read(table)
    problems = _adjacency_problems(batch)
    if problems:
        msg = f"{table!r}: " + "; ".join(problems)
        if strict:
            raise ValidationError(msg)
        warnings.warn(msg, stacklevel=2)
    return batch


def compute_degrees(store: TabletStore, table: str, dest: str, strict: bool = True) -> str:
    """Write one ``(vertex, "deg", count)`` entry per non-empty row of ``table``."""
    batch = validate_adjacency(store, table, strict)
    store.create_table(dest, store.splits(table))
    if len(batch):
        starts = batch.row_starts()
        counts = np.diff(np.append(starts, len(batch)))
        rows = batch.row[starts]
        quals = np.full(len(rows), DEGREE_QUALIFIER, dtype="S3")
        store.write(dest, EntryBatch.from_arrays(rows, quals, counts.astype(np.int64)))
    return dest


# ---------------------------------------------------------------------------
# Jaccard


def _pairs_after(part: EntryBatch, mul: BinaryOp):
    """Pairs (x, y) of one row with x before y, for every row of ``part``."""
    if len(part) < 2:
        return
    starts = part.row_starts()
    ends = np.append(starts[1:], len(part))
    row_end = np.repeat(ends, np.diff(np.append(starts, len(part))))
    idx = np.arange(len(part), dtype=np.int64)
    rest = row_end - idx - 1
    ones = np.ones(len(part), dtype=np.int64)
    yield from cartesian(part, idx, ones, part, idx + 1, rest, mul)


class JaccardRowMultiply(RowMultiply):
    """Row function of the fused Jaccard multiply.

    ``a`` carries the strictly-lower part of each row (neighbors l < i) and
    ``b`` the strictly-upper part (neighbors u > i). For row i it emits the
    cross products l x u and the self products of each side. Self products
    come out only in the order that survives the strict-upper filter; the
    mirrored half would be dropped by that filter anyway.
    """

    def __init__(self, mul: BinaryOp = TIMES):
        self.mul = mul

    def multiply_row(self, row, a_row, b_row):
        return EntryBatch.concat(list(self.multiply(a_row, b_row, True)))

    def multiply(self, a, b, emit_unmatched):
        if len(a) and len(b):
            ra, sa, ca = _groups(a)
            rb, sb, cb = _groups(b)
            _, ia, ib = np.intersect1d(ra, rb, assume_unique=True, return_indices=True)
            yield from cartesian(a, sa[ia], ca[ia], b, sb[ib], cb[ib], self.mul)
        yield from _pairs_after(a, self.mul)
        yield from _pairs_after(b, self.mul)


class JaccardDegreeApply(BlockIterator):
    """Rewrite common-neighbor counts J(i,j) as J / (d_i + d_j - J).

    The whole degree table is loaded into memory when the iterator is
    built, so every lookup is a local join.
    """

    def __init__(self, store: TabletStore, degrees: str, max_vertices: int = MAX_DEGREE_VERTICES):
        self.degrees = degrees
        self.max_vertices = max_vertices
        d = store.read(degrees)
        if len(d) > max_vertices:
            raise ResourceError(f"degree table {degrees!r} has {len(d)} vertices, over the "
                                f"broadcast cap of {max_vertices}")
        self._vertex = d.row
        self._degree = d.value.astype(np.float64)

    def _lookup(self, keys: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self._vertex, keys)
        pos_c = np.minimum(pos, max(len(self._vertex) - 1, 0))
        found = (pos < len(self._vertex)) & (self._vertex[pos_c] == keys) if len(self._vertex) \
            else np.zeros(len(keys), dtype=bool)
        if not found.all():
            missing = keys[np.flatnonzero(~found)[0]]
            raise DataConsistencyError(f"no degree recorded for vertex {missing!r}")
        return self._degree[pos_c]

    def transform(self, block):
        if len(block) == 0:
            return block
        j = block.value.astype(np.float64)
        di = self._lookup(block.row)
        dj = self._lookup(block.qualifier)
        return block.with_values(j / (di + dj - j))

    def descriptor(self):
        return IteratorDescriptor("jaccard_degree", {"degrees": self.degrees,
                                                     "max_vertices": str(self.max_vertices)})


@register_iterator("jaccard_degree")
def _jaccard_degree(opts, env):
    return JaccardDegreeApply(env.store, opts["degrees"],
                              int(opts.get("max_vertices", MAX_DEGREE_VERTICES)))


def jaccard(store: TabletStore, table: str, degrees: str, dest: str, *,
            validate: bool = True, workers: int | None = None) -> tuple[str, AlgorithmMetrics]:
    """Jaccard coefficients of every vertex pair with a common neighbor.

    One fused multiply accumulates common-neighbor counts into the strict
    upper triangle of ``dest``; a scan-scope apply then divides by the size
    of the neighborhood union, so reads of ``dest`` return coefficients.
    """
    started = time.perf_counter()
    nnz_in = len(validate_adjacency(store, table)) if validate else 0
    store.create_table(dest, store.splits(table))
    fusion = Fusion(source_a=[FilterIterator(strict_lower)],
                    source_b=[FilterIterator(strict_upper)],
                    after_multiply=[FilterIterator(strict_upper)])
    res = two_table(store, table, table, dest, mode="row", row_fn=JaccardRowMultiply(),
                    emit_non_matching=True, fusion=fusion, dest_combiner=PLUS, workers=workers)
    store.attach_iterator(dest, SCAN, APPLY_PRIORITY,
                          IteratorDescriptor("jaccard_degree", {"degrees": degrees}))
    metrics = AlgorithmMetrics(
        partial_products=res.partial_products, entries_written=res.entries_written,
        iterations=1, nnz_input=nnz_in,
        nnz_output=reduce_kernel(store, dest, NnzCount(), workers=workers))
    metrics.runtime_ms = (time.perf_counter() - started) * 1000.0
    metrics.per_iteration.append({"partial_products": res.partial_products,
                                  "entries_written": res.entries_written,
                                  "nnz": metrics.nnz_output})
    return dest, metrics


# ---------------------------------------------------------------------------
# k-truss

_scratch_ids = itertools.count()


def _reset_iterators(store: TabletStore, table: str) -> None:
    for scope in (SCAN, COMPACTION):
        for priority, _ in store.iterators(table, scope):
            store.detach_iterator(table, scope, priority)


def ktruss(store: TabletStore, table: str, k: int, dest: str, *,
           inspect: Callable[[int, str, EntryBatch], None] | None = None,
           validate: bool = True, workers: int | None = None) -> tuple[str, AlgorithmMetrics]:
    """The k-truss of an adjacency table, written to ``dest``.

    Each pass clones A into B, adds A·A into B with ⊗ = 2 on nonzero pairs
    (diagonal filtered before write), so B holds 1 + 2t for an edge in t
    triangles and 2t for a non-edge. Compacting B through drop-even,
    the truss threshold and a set-to-one apply gives the next A. The loop
    stops when the entry count stops changing or reaches zero.

    ``inspect(iteration, a_table, b_odd)`` is called each pass with B after
    the drop-even step, before thresholding.
    """
    if int(k) != k or k < 3:
        raise ParameterError(f"k must be an integer >= 3, got {k!r}")
    k = int(k)
    started = time.perf_counter()
    if store.exists(dest):
        raise NameConflictError(f"table {dest!r} already exists")
    nnz_in = len(validate_adjacency(store, table)) if validate else 0
    tag = next(_scratch_ids)
    a_name, b_name = f"{dest}~truss{tag}~A", f"{dest}~truss{tag}~B"
    store.clone_table(table, a_name)
    _reset_iterators(store, a_name)
    metrics = AlgorithmMetrics(nnz_input=nnz_in)
    z = None  # the first pass always runs
    fusion = Fusion(after_multiply=[FilterIterator(no_diagonal)])
    while True:
        store.clone_table(a_name, b_name)
        _reset_iterators(store, b_name)
        ensure_combiner(store, b_name, PLUS)
        res = two_table(store, a_name, a_name, b_name, mode="row", op=TWO_IF_NONZERO,
                        fusion=fusion, workers=workers)
        if inspect is not None:
            inspect(metrics.iterations, a_name,
                    store.read(b_name, iterators=[FilterIterator(drop_even)]))
        for i, it in enumerate((FilterIterator(drop_even), FilterIterator(truss_threshold(k)),
                                ApplyIterator(SET_ONE))):
            store.attach_iterator(b_name, COMPACTION, COMBINER_PRIORITY + 1 + i, it)
        store.compact(b_name)
        z_new = reduce_kernel(store, b_name, NnzCount(), workers=workers)
        metrics.iterations += 1
        metrics.partial_products += res.partial_products
        metrics.entries_written += res.entries_written
        metrics.per_iteration.append({"partial_products": res.partial_products,
                                      "entries_written": res.entries_written, "nnz": z_new})
        store.delete_table(a_name)
        store.rename_table(b_name, a_name)
        if z_new == z or z_new == 0:
            break
        z = z_new
    store.clone_table(a_name, dest)
    store.delete_table(a_name)
    _reset_iterators(store, dest)
    metrics.nnz_output = z_new
    metrics.runtime_ms = (time.perf_counter() - started) * 1000.0
    return dest, metrics
