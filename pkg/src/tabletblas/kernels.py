"""GraphBLAS kernels as configurations of the store and two-table stacks.

Every kernel is synchronous: when it returns, all of its writes have been
ingested and are visible to scans. Kernels that multiply take the transpose
of the left operand explicitly (``a_t``) because the row-mode merge computes
``Aᵀ·B``; keep transpose tables with :func:`transpose_kernel` or the
``transpose`` flag of a write.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .batch import EntryBatch, RowRange, as_key_bytes
from .errors import CollisionError, ConfigurationError
from .iterators import (ApplyIterator, BlockIterator, Combiner, FilterIterator,
                        IteratorDescriptor, build_iterator, column_ranges, IteratorEnv)
from .ops import BinaryOp, PLUS, TIMES, UnaryOp, check_commutative
from .store import COMPACTION, SCAN, TabletStore
from .twotable import (NnzCount, OuterProduct, PartialResult, Reducer, RowMultiply,
                       StackCounters, merge_partial_results, remote_write,
                       two_table_ewise, two_table_row, with_iterators)

__all__ = [
    "Fusion", "KernelResult", "COMBINER_PRIORITY",
    "build_matrix", "extract_tuples", "table_mult", "ewise_add", "ewise_mult",
    "extract", "apply_kernel", "assign", "reduce_kernel", "transpose_kernel",
    "one_table", "two_table", "ensure_combiner", "prefix_rows",
]

COMBINER_PRIORITY = 10
APPLY_PRIORITY = 20


@dataclass
class Fusion:
    """Extra iterators spliced into a kernel's stacks.

    ``source_a`` and ``source_b`` run on each input stream after its
    scan-scope stack; ``after_multiply`` runs on the partial products before
    they are counted and written, so it must be entrywise.
    """

    source_a: Sequence = ()
    source_b: Sequence = ()
    after_multiply: Sequence = ()


@dataclass
class KernelResult:
    partial_products: int = 0
    entries_written: int = 0
    reduced: object = None
    runtime_ms: float = 0.0
    partials: list = field(default_factory=list)


def _built(store, table, iterators) -> list[BlockIterator]:
    env = IteratorEnv(store, table, SCAN)
    return [build_iterator(it, env) if isinstance(it, IteratorDescriptor) else it
            for it in iterators]


def ensure_combiner(store: TabletStore, table: str, op: BinaryOp) -> None:
    """Attach a ⊕ combiner at both scopes unless the table already has one."""
    if store.has_combiner(table):
        return
    for scope in (SCAN, COMPACTION):
        store.attach_iterator(table, scope, COMBINER_PRIORITY, Combiner(op))


def _prepare_dest(store, dest, like, combiner: BinaryOp | None):
    if dest is None:
        return
    store.ensure_table(dest, store.splits(like))
    if combiner is not None:
        ensure_combiner(store, dest, combiner)


def _fan_out(jobs: list[Callable[[], PartialResult]], workers: int | None) -> list[PartialResult]:
    if workers is None:
        workers = min(len(jobs), os.cpu_count() or 1)
    if workers <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: job(), jobs))


def _finish(store, results, reducer, started) -> KernelResult:
    pp = sum(r.partial_products for r in results)
    store.metrics.add(partial_products=pp)
    return KernelResult(
        partial_products=pp,
        entries_written=sum(r.entries_emitted for r in results),
        reduced=merge_partial_results(results, reducer),
        runtime_ms=(time.perf_counter() - started) * 1000.0,
        partials=sorted(results, key=lambda r: r.tablet_id),
    )


# ---------------------------------------------------------------------------
# generic plans


def one_table(store: TabletStore, table: str, dest: str | None, iterators: Sequence = (),
              row_ranges=None, transpose: bool = False, reducer: Reducer | None = None,
              dest_combiner: BinaryOp | None = None, workers: int | None = None) -> KernelResult:
    """Stream one table through ``iterators`` into ``dest`` and/or ``reducer``."""
    started = time.perf_counter()
    scans = store.tablet_scans(table, row_ranges)
    _prepare_dest(store, dest, table, dest_combiner)
    stack = _built(store, table, iterators)

    def job(scan):
        def run():
            stream = with_iterators(scan.stream, stack)
            return remote_write(stream.blocks(), store, dest, transpose, reducer, scan.index)
        return run

    results = _fan_out([job(s) for s in scans], workers)
    return _finish(store, results, reducer, started)


def two_table(store: TabletStore, a: str, b: str, dest: str | None, *, mode: str = "row",
              row_fn: RowMultiply | None = None, op: BinaryOp | None = None,
              emit_non_matching: bool = False, fusion: Fusion | None = None,
              transpose: bool = False, reducer: Reducer | None = None,
              dest_combiner: BinaryOp | None = None, workers: int | None = None) -> KernelResult:
    """Run a two-input stack once per tablet of ``b``.

    ``mode="row"`` treats ``a`` as the transpose side of a row-mode merge;
    ``mode="ewise"`` aligns entries on their full key. When ``a`` and ``b``
    name the same table, both inputs are independent copies of one snapshot
    and no remote source is opened.
    """
    if mode not in ("row", "ewise"):
        raise ConfigurationError(f"unknown two-table mode {mode!r}")
    started = time.perf_counter()
    fusion = fusion or Fusion()
    store._table(a)
    scans = store.tablet_scans(b)
    _prepare_dest(store, dest, b, dest_combiner)
    src_a = _built(store, a, fusion.source_a)
    src_b = _built(store, b, fusion.source_b)
    post = _built(store, dest or b, fusion.after_multiply)
    for it in post:
        if not it.entrywise:
            raise ConfigurationError(
                f"{type(it).__name__} needs sorted input and cannot be fused after a multiply")
    remote_a = None if a == b else store.tablet_scans(a)

    def job(scan):
        def run():
            b_stream = with_iterators(scan.stream, src_b)
            if remote_a is None:
                a_stream = with_iterators(scan.stream, src_a)
            else:
                a_stream = _restricted(remote_a, scan.extent, src_a)
            counters = StackCounters()
            if mode == "row":
                out = two_table_row(a_stream, b_stream, row_fn or OuterProduct(op or TIMES),
                                    emit_non_matching, post, counters, store.max_row_entries)
            else:
                out = two_table_ewise(a_stream, b_stream, op or TIMES, emit_non_matching,
                                      post, counters)
            return remote_write(out, store, dest, transpose, reducer, scan.index, counters)
        return run

    results = _fan_out([job(s) for s in scans], workers)
    return _finish(store, results, reducer, started)


def _restricted(scans, extent: RowRange, iterators):
    """Blocks of a remote table limited to one row extent."""
    def blocks():
        for s in scans:
            if _disjoint(s.extent, extent):
                continue
            stream = with_iterators(s.stream, iterators)
            stream.seek([extent])
            yield from stream.blocks()
    return blocks()


def _disjoint(x: RowRange, y: RowRange) -> bool:
    if x.end is not None and y.start is not None and x.end <= y.start:
        return True
    if y.end is not None and x.start is not None and y.end <= x.start:
        return True
    return False


# ---------------------------------------------------------------------------
# Table 1 kernels


def build_matrix(store: TabletStore, triples, dest: str, add: BinaryOp | None = None,
                 splits: Sequence = ()) -> str:
    """Write ``(row, col, value)`` triples into a new table.

    With ``add`` a ⊕ combiner sums colliding cells lazily; without it the
    newest write of a cell wins.
    """
    batch = triples if isinstance(triples, EntryBatch) else EntryBatch.from_triples(triples)
    if add is not None:
        check_commutative(add)
    store.create_table(dest, splits)
    if add is not None:
        ensure_combiner(store, dest, add)
    store.write(dest, batch)
    return dest


def extract_tuples(store: TabletStore, table: str) -> list[tuple[bytes, bytes, int | float]]:
    """Sorted ``(row, col, value)`` triples of a full combined scan."""
    return store.read(table).triples()


def table_mult(store: TabletStore, a_t: str, b: str, dest: str, mul: BinaryOp = TIMES,
               add: BinaryOp = PLUS, fusion: Fusion | None = None,
               workers: int | None = None) -> KernelResult:
    """Accumulate ``Aᵀ·B`` into ``dest`` under the semiring (``add``, ``mul``).

    Partial products are written unsummed; ``dest`` gets an ``add``
    combiner if it has none.
    """
    check_commutative(add)
    return two_table(store, a_t, b, dest, mode="row", op=mul, fusion=fusion,
                     dest_combiner=add, workers=workers)


def ewise_add(store: TabletStore, a: str, b: str, dest: str, add: BinaryOp = PLUS,
              workers: int | None = None) -> KernelResult:
    """Elementwise ⊕ over the union of the two key sets."""
    check_commutative(add)
    return two_table(store, a, b, dest, mode="ewise", op=add, emit_non_matching=True,
                     dest_combiner=add, workers=workers)


def ewise_mult(store: TabletStore, a: str, b: str, dest: str, mul: BinaryOp = TIMES,
               add: BinaryOp = PLUS, workers: int | None = None) -> KernelResult:
    """Elementwise ⊗ over the intersection of the two key sets."""
    check_commutative(add)
    return two_table(store, a, b, dest, mode="ewise", op=mul, dest_combiner=add,
                     workers=workers)


def extract(store: TabletStore, table: str, dest: str, row_ranges=None,
            col_ranges=None) -> KernelResult:
    """Copy the sub-matrix with rows in ``row_ranges`` and columns in ``col_ranges``.

    ``None`` means every row (column); an empty list selects nothing. Rows
    are selected by seeking, columns by a filter iterator.
    """
    rows = _as_ranges(row_ranges)
    cols = _as_ranges(col_ranges)
    if (rows is not None and not rows) or (cols is not None and not cols):
        _prepare_dest(store, dest, table, None)
        return KernelResult()
    iterators = [] if cols is None else [FilterIterator(column_ranges(cols))]
    return one_table(store, table, dest, iterators, row_ranges=rows)


def _as_ranges(ranges):
    if ranges is None:
        return None
    if isinstance(ranges, RowRange):
        return [ranges]
    return [r if isinstance(r, RowRange) else RowRange(*r) for r in ranges]


def apply_kernel(store: TabletStore, table: str, fn: UnaryOp | Callable, dest: str | None = None,
                 priority: int | None = None) -> KernelResult | None:
    """Apply ``fn`` to every value.

    With ``dest`` the result is materialized; without it ``fn`` is attached
    at scan scope of ``table`` so later reads see f(A) without a rewrite.
    """
    if dest is not None:
        return one_table(store, table, dest, [ApplyIterator(fn)])
    it = ApplyIterator(fn)
    if priority is None:
        used = {p for p, _ in store.iterators(table, SCAN)}
        priority = max(used | {APPLY_PRIORITY - 1}) + 1
    store.attach_iterator(table, SCAN, priority, it)
    return None


def assign(store: TabletStore, table: str, key_transform: Callable, dest: str) -> KernelResult:
    """Re-key entries with ``key_transform(row, col) -> (row, col)``.

    Colliding output keys are summed by the destination's combiner when it
    has one; otherwise they raise :class:`CollisionError`.
    """
    started = time.perf_counter()
    src = store.read(table)
    pairs = [key_transform(bytes(r), bytes(q))
             for r, q in zip(src.row.tolist(), src.qualifier.tolist())]
    rows = np.array([as_key_bytes(p[0], "row") for p in pairs] or [b""], dtype=bytes)[:len(pairs)]
    quals = np.array([as_key_bytes(p[1], "qualifier") for p in pairs] or [b""],
                     dtype=bytes)[:len(pairs)]
    out = EntryBatch(rows, src.family, quals, src.timestamp, src.value)
    store.ensure_table(dest, store.splits(table))
    if not store.has_combiner(dest):
        existing = store.read(dest)
        both = EntryBatch.concat([out, existing]).sorted()
        if len(both) > 1 and not both._key_changes().all():
            i = int(np.flatnonzero(~both._key_changes())[0])
            raise CollisionError(f"two entries map to key {both.key(i)[:3]}")
    receipt = store.write(dest, out)
    return KernelResult(entries_written=receipt.entries_written,
                        runtime_ms=(time.perf_counter() - started) * 1000.0)


def prefix_rows(prefix) -> Callable:
    """A key transform that prepends ``prefix`` to every row."""
    prefix = as_key_bytes(prefix, "prefix")
    return lambda row, col: (prefix + row, col)


def reduce_kernel(store: TabletStore, table: str, reducer: Reducer | None = None,
                  workers: int | None = None):
    """Fold every entry of ``table`` with ``reducer`` (entry count by default)."""
    reducer = reducer or NnzCount()
    return one_table(store, table, None, reducer=reducer, workers=workers).reduced


def transpose_kernel(store: TabletStore, table: str, dest: str,
                     workers: int | None = None) -> KernelResult:
    """Write ``table`` into ``dest`` with row and column swapped."""
    return one_table(store, table, dest, transpose=True, workers=workers)
