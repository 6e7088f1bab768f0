"""Two-input stream machinery: remote sources, row/ewise merges, remote writes.

A row-mode merge walks the transpose-side stream and the B-side stream in
lockstep by row and hands each aligned pair of rows to a
:class:`RowMultiply`; the default multiply emits the outer product of the
two rows, one partial product per pair of entries. Partial products come out
unsorted and go to :func:`remote_write`, which ingests them into a
destination table (where a ⊕ combiner sums them later) and optionally feeds
them to a :class:`Reducer`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .batch import EntryBatch, RowRange, _ranges
from .errors import ConfigurationError, InternalOrderError, ResourceError
from .iterators import BlockIterator, EntryStream, run_stack
from .ops import BinaryOp, TIMES

__all__ = [
    "StackCounters", "PartialResult", "RowMultiply", "OuterProduct",
    "remote_source", "self_source", "with_iterators",
    "two_table_row", "two_table_ewise", "remote_write",
    "Reducer", "NnzCount", "ValueSet", "ThresholdCount", "merge_partial_results",
]

CHUNK_PAIRS = 1 << 21


@dataclass
class StackCounters:
    partial_products: int = 0
    entries_emitted: int = 0


@dataclass
class PartialResult:
    """What one tablet's stack reports back to the client."""

    tablet_id: int
    state: object = None
    partial_products: int = 0
    entries_emitted: int = 0


# ---------------------------------------------------------------------------
# sources


def with_iterators(stream: EntryStream, iterators: Sequence[BlockIterator]) -> EntryStream:
    """A new stream over the same source, with ``iterators`` appended."""
    iterators = list(iterators)
    if not iterators:
        return stream.deep_copy()
    opener = stream._opener
    return EntryStream(lambda rngs: run_stack(opener(rngs), iterators), stream._ranges)


def remote_source(store, table: str, ranges=None, iterators: Sequence = ()) -> EntryStream:
    """Scan ``table`` from inside another table's stack."""
    return store.scan(table, ranges, iterators)


def self_source(store, table: str, ranges=None) -> tuple[EntryStream, EntryStream]:
    """Two independent streams over one snapshot of ``table``."""
    first = store.scan(table, ranges)
    return first, first.deep_copy()


# ---------------------------------------------------------------------------
# row alignment


def _whole_rows(blocks: Iterable[EntryBatch], side: str) -> Iterator[EntryBatch]:
    """Re-chunk so that no row spans two blocks; check row order on the way."""
    pending = None
    for block in blocks:
        if not len(block):
            continue
        rows = block.row
        if len(rows) > 1 and np.any(rows[1:] < rows[:-1]):
            raise InternalOrderError(f"{side} input is not sorted by row")
        if pending is not None:
            last = pending.row[-1]
            if rows[0] < last:
                raise InternalOrderError(
                    f"{side} input went backwards: {rows[0]!r} after {last!r}")
            if rows[0] == last:
                cut = int(np.searchsorted(pending.row, last, "left"))
                if cut:
                    yield pending[:cut]
                block = EntryBatch.concat([pending[cut:], block])
            else:
                yield pending
        pending = block
    if pending is not None:
        yield pending


def _align_rows(a_blocks, b_blocks) -> Iterator[tuple[EntryBatch, EntryBatch]]:
    """Pairs of parts covering the same rows, in row order."""
    a_it = _whole_rows(a_blocks, "transpose-side")
    b_it = _whole_rows(b_blocks, "B-side")
    a = next(a_it, None)
    b = next(b_it, None)
    empty = EntryBatch.empty()
    while a is not None or b is not None:
        if a is None:
            yield empty, b
            b = next(b_it, None)
        elif b is None:
            yield a, empty
            a = next(a_it, None)
        else:
            ha, hb = a.row[-1], b.row[-1]
            if ha == hb:
                yield a, b
                a, b = next(a_it, None), next(b_it, None)
            elif ha < hb:
                cut = int(np.searchsorted(b.row, ha, "right"))
                yield a, b[:cut]
                b = b[cut:]
                a = next(a_it, None)
            else:
                cut = int(np.searchsorted(a.row, hb, "right"))
                yield a[:cut], b
                a = a[cut:]
                b = next(b_it, None)


def _groups(part: EntryBatch):
    starts = part.row_starts()
    counts = np.diff(np.append(starts, len(part)))
    return part.row[starts], starts, counts


def cartesian(a: EntryBatch, a_starts, a_counts, b: EntryBatch, b_starts, b_counts,
              mul: BinaryOp, chunk: int = CHUNK_PAIRS) -> Iterator[EntryBatch]:
    """Outer products of paired row segments, ``a.qualifier x b.qualifier``.

    Segment ``i`` of ``a`` pairs with segment ``i`` of ``b``. Output keys
    are (A-side qualifier, B-side qualifier) with an empty family.
    """
    pairs = a_counts * b_counts
    keep = pairs > 0
    a_starts, a_counts, b_starts, b_counts, pairs = (
        a_starts[keep], a_counts[keep], b_starts[keep], b_counts[keep], pairs[keep])
    if len(pairs) == 0:
        return
    ends = np.cumsum(pairs)
    lo = 0
    while lo < len(pairs):
        base = ends[lo] - pairs[lo]
        hi = max(lo + 1, int(np.searchsorted(ends, base + chunk, "right")))
        sa, ca, sb, cb = a_starts[lo:hi], a_counts[lo:hi], b_starts[lo:hi], b_counts[lo:hi]
        a_entries = _ranges(sa, ca)
        partners = np.repeat(cb, ca)
        a_idx = np.repeat(a_entries, partners)
        b_idx = _ranges(np.repeat(sb, ca), partners)
        vals = mul(a.value[a_idx], b.value[b_idx])
        yield EntryBatch.from_arrays(a.qualifier[a_idx], b.qualifier[b_idx], vals)
        lo = hi


class RowMultiply:
    """How a row-mode merge turns two aligned rows into partial products.

    Subclasses override :meth:`multiply_row` (called once per row with the
    two sides' entries; either side may be empty for non-matching rows) or,
    for speed, :meth:`multiply` which receives whole aligned parts.
    """

    def multiply_row(self, row: bytes, a_row: EntryBatch, b_row: EntryBatch):
        raise NotImplementedError

    def multiply(self, a: EntryBatch, b: EntryBatch, emit_unmatched: bool) -> Iterator[EntryBatch]:
        ra, sa, ca = _groups(a)
        rb, sb, cb = _groups(b)
        rows = np.union1d(ra, rb) if emit_unmatched else np.intersect1d(ra, rb)
        ia = dict(zip(ra.tolist(), zip(sa.tolist(), ca.tolist())))
        ib = dict(zip(rb.tolist(), zip(sb.tolist(), cb.tolist())))
        empty = EntryBatch.empty()
        for r in rows.tolist():
            a_row = a[ia[r][0]:ia[r][0] + ia[r][1]] if r in ia else empty
            b_row = b[ib[r][0]:ib[r][0] + ib[r][1]] if r in ib else empty
            out = self.multiply_row(r, a_row, b_row)
            if out is None:
                continue
            if not isinstance(out, EntryBatch):
                out = EntryBatch.from_entries(
                    e if len(e) == 4 else (e[0], b"", e[1], e[2]) for e in out)
            if len(out):
                yield out


class OuterProduct(RowMultiply):
    """Default row multiply: every (A-side, B-side) pair of a matching row."""

    def __init__(self, mul: BinaryOp = TIMES):
        self.mul = mul

    def multiply_row(self, row, a_row, b_row):
        out = list(cartesian(a_row, np.array([0]), np.array([len(a_row)]),
                             b_row, np.array([0]), np.array([len(b_row)]), self.mul))
        return EntryBatch.concat(out)

    def multiply(self, a, b, emit_unmatched):
        if not len(a) or not len(b):
            return
        ra, sa, ca = _groups(a)
        rb, sb, cb = _groups(b)
        _, ia, ib = np.intersect1d(ra, rb, assume_unique=True, return_indices=True)
        yield from cartesian(a, sa[ia], ca[ia], b, sb[ib], cb[ib], self.mul)


def _check_entrywise(post: Sequence[BlockIterator]) -> list[BlockIterator]:
    post = list(post)
    for it in post:
        if not it.entrywise:
            raise ConfigurationError(
                f"{type(it).__name__} needs sorted input and cannot run on partial products")
    return post


def two_table_row(a_t, b, row_fn: RowMultiply | None = None, also_emit_non_matching: bool = False,
                  post: Sequence[BlockIterator] = (), counters: StackCounters | None = None,
                  max_row_entries: int | None = None) -> Iterator[EntryBatch]:
    """Row-mode merge of a transpose-side stream with a B-side stream.

    ``a_t`` holds the transpose of the left operand, so the default multiply
    yields the partial products of ``Aᵀ·B``. Output is unsorted. Entrywise
    ``post`` iterators run on the partial products before they are counted.
    """
    row_fn = row_fn or OuterProduct()
    post = _check_entrywise(post)
    counters = counters if counters is not None else StackCounters()
    a_blocks = a_t.blocks() if isinstance(a_t, EntryStream) else a_t
    b_blocks = b.blocks() if isinstance(b, EntryStream) else b
    for a_part, b_part in _align_rows(a_blocks, b_blocks):
        if not also_emit_non_matching and (not len(a_part) or not len(b_part)):
            continue
        if max_row_entries is not None and len(b_part) > max_row_entries:
            _, _, counts = _groups(b_part)
            if counts.max() > max_row_entries:
                raise ResourceError(
                    f"a B-side row holds {int(counts.max())} entries, over the "
                    f"buffer cap of {max_row_entries}")
        for out in row_fn.multiply(a_part, b_part, also_emit_non_matching):
            for it in post:
                out = it.transform(out)
            if len(out):
                counters.partial_products += len(out)
                yield out


def two_table_ewise(a, b, op: BinaryOp, emit_non_matching: bool = False,
                    post: Sequence[BlockIterator] = (), counters: StackCounters | None = None,
                    prune_zeros: bool = True) -> Iterator[EntryBatch]:
    """Element-wise merge aligned on (row, family, qualifier).

    Matching pairs become one entry ``op(a, b)``; with ``emit_non_matching``
    the unmatched entries of either side pass through unchanged. Each side
    must hold at most one version per key.
    """
    post = _check_entrywise(post)
    counters = counters if counters is not None else StackCounters()
    a_blocks = a.blocks() if isinstance(a, EntryStream) else a
    b_blocks = b.blocks() if isinstance(b, EntryStream) else b
    for a_part, b_part in _align_rows(a_blocks, b_blocks):
        if not len(a_part) or not len(b_part):
            if emit_non_matching:
                out = a_part if len(a_part) else b_part
                yield from _post(out, post)
            continue
        both = EntryBatch.concat([a_part, b_part])
        side = np.concatenate([np.zeros(len(a_part), bool), np.ones(len(b_part), bool)])
        order = both.sort_order()
        both, side = both[order], side[order]
        same = ~both._key_changes()
        hit = np.flatnonzero(same & ~side[:-1] & side[1:])
        matched = both[hit].with_values(op(both.value[hit], both.value[hit + 1]))
        if prune_zeros:
            matched = matched[matched.value != 0]
        for out in _post(matched, post):
            counters.partial_products += len(out)
            yield out
        if emit_non_matching:
            rest = np.ones(len(both), dtype=bool)
            rest[hit] = False
            rest[hit + 1] = False
            yield from _post(both[rest], post)


def _post(batch, post):
    for it in post:
        batch = it.transform(batch)
    if len(batch):
        yield batch


# ---------------------------------------------------------------------------
# writing and reducing


class Reducer:
    """A commutative monoid over entries.

    ``zero()`` is the identity, ``combine_entry`` sums in one entry and
    ``merge`` joins two partial states. ``combine_batch`` exists so built-in
    reducers can work a block at a time.
    """

    def zero(self):
        raise NotImplementedError

    def combine_entry(self, state, key, value):
        raise NotImplementedError

    def merge(self, left, right):
        raise NotImplementedError

    def combine_batch(self, state, batch: EntryBatch):
        for i in range(len(batch)):
            state = self.combine_entry(state, batch.key(i), batch.value[i].item())
        return state


class NnzCount(Reducer):
    def zero(self):
        return 0

    def combine_entry(self, state, key, value):
        return state + 1

    def combine_batch(self, state, batch):
        return state + len(batch)

    def merge(self, left, right):
        return left + right


class ValueSet(Reducer):
    """The set of distinct values."""

    def zero(self):
        return frozenset()

    def combine_entry(self, state, key, value):
        return state | {value}

    def combine_batch(self, state, batch):
        return state | frozenset(np.unique(batch.value).tolist())

    def merge(self, left, right):
        return left | right


@dataclass
class ThresholdCount(Reducer):
    """How many entries have a value strictly above ``threshold``."""

    threshold: float = 0

    def zero(self):
        return 0

    def combine_entry(self, state, key, value):
        return state + (value > self.threshold)

    def combine_batch(self, state, batch):
        return state + int(np.count_nonzero(batch.value > self.threshold))

    def merge(self, left, right):
        return left + right


def remote_write(blocks: Iterable[EntryBatch], store, dest: str | None, transpose: bool = False,
                 reducer: Reducer | None = None, tablet_id: int = 0,
                 counters: StackCounters | None = None) -> PartialResult:
    """Write every entry to ``dest`` (if given) and offer it to ``reducer``."""
    if dest is not None and not store.exists(dest):
        store._table(dest)  # raises NotFoundError
    state = reducer.zero() if reducer is not None else None
    emitted = 0
    for batch in blocks:
        if transpose:
            batch = batch.transposed()
        if dest is not None:
            store.write_batch(dest, batch)
        if reducer is not None:
            state = reducer.combine_batch(state, batch)
        emitted += len(batch)
    pp = counters.partial_products if counters is not None else 0
    if counters is not None:
        counters.entries_emitted += emitted
    return PartialResult(tablet_id, state, pp, emitted)


def merge_partial_results(results: Sequence[PartialResult], reducer: Reducer | None = None):
    """Client-side merge of per-tablet reducer states."""
    if reducer is None:
        return None
    state = reducer.zero()
    for r in results:
        state = reducer.merge(state, r.state)
    return state
