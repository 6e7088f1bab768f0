"""An in-process, BigTable-style sorted key-value store.

Tables are split into tablets by row. Each tablet keeps an unsorted
in-memory write buffer plus a tuple of immutable sorted runs, newest first.
Clones share runs, so cloning copies no entries. Iterators run lazily at
scan time and durably at compaction time.
"""
from __future__ import annotations

import copy
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .batch import EntryBatch, RowRange, as_key_bytes, normalize_ranges
from .errors import ConfigurationError, DataFormatError, NameConflictError, NotFoundError
from .iterators import (BlockIterator, Combiner, EntryStream, IteratorDescriptor, IteratorEnv,
                        Versioning, build_iterator, is_combiner, run_stack)

__all__ = ["SCAN", "COMPACTION", "SCOPES", "TabletStore", "WriteReceipt", "StoreMetrics",
           "TabletScan"]

SCAN = "scan"
COMPACTION = "compaction"
SCOPES = (SCAN, COMPACTION)

BLOCK_ENTRIES = 1 << 20
FLUSH_ENTRIES = 1 << 22
MAX_RUNS = 4


@dataclass(frozen=True)
class WriteReceipt:
    entries_written: int


class StoreMetrics:
    """Thread-safe counters for entries written and partial products."""

    def __init__(self):
        self._lock = threading.Lock()
        self.entries_written = 0
        self.partial_products = 0

    def add(self, entries_written=0, partial_products=0):
        with self._lock:
            self.entries_written += entries_written
            self.partial_products += partial_products

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return {"entries_written": self.entries_written,
                    "partial_products": self.partial_products}


class _Tablet:
    def __init__(self, start: bytes | None, end: bytes | None, runs=()):
        self.start = start
        self.end = end
        self.runs: tuple[EntryBatch, ...] = tuple(runs)
        self._memtable: list[EntryBatch] = []
        self._mem_count = 0
        self.lock = threading.RLock()

    @property
    def extent(self) -> RowRange:
        return RowRange(self.start, self.end)

    def append(self, batch: EntryBatch) -> None:
        with self.lock:
            self._memtable.append(batch)
            self._mem_count += len(batch)
            if self._mem_count >= FLUSH_ENTRIES:
                self._flush()

    def _flush(self) -> None:
        if not self._memtable:
            return
        # memtable batches are in write order; reversed gives newest-first ties
        pending = EntryBatch.concat(self._memtable)[::-1]
        self._memtable, self._mem_count = [], 0
        self.runs = (pending.sorted(),) + self.runs
        if len(self.runs) > MAX_RUNS:
            self._merge_runs()

    def _merge_runs(self) -> None:
        if len(self.runs) > 1:
            self.runs = (EntryBatch.concat(list(self.runs)).sorted(),)

    def snapshot(self) -> EntryBatch:
        """One sorted batch of everything stored; later writes are not seen."""
        with self.lock:
            self._flush()
            self._merge_runs()
            return self.runs[0] if self.runs else EntryBatch.empty()

    def replace(self, batch: EntryBatch) -> None:
        with self.lock:
            self._memtable, self._mem_count = [], 0
            self.runs = (batch,) if len(batch) else ()

    def clone(self) -> "_Tablet":
        with self.lock:
            self._flush()
            return _Tablet(self.start, self.end, self.runs)

    def raw_size(self) -> int:
        with self.lock:
            return self._mem_count + sum(len(r) for r in self.runs)


class _Table:
    def __init__(self, name: str, splits: Sequence[bytes]):
        self.name = name
        self.splits = tuple(splits)
        bounds = [None, *self.splits, None]
        self.tablets = [_Tablet(bounds[i], bounds[i + 1]) for i in range(len(self.splits) + 1)]
        self.iterators: dict[str, dict[int, IteratorDescriptor]] = {s: {} for s in SCOPES}
        self._split_array = np.array(self.splits, dtype=bytes) if self.splits else None

    def route(self, rows: np.ndarray) -> np.ndarray:
        if self._split_array is None:
            return np.zeros(len(rows), dtype=np.intp)
        return np.searchsorted(self._split_array, rows, side="right")

    def has_combiner(self) -> bool:
        return any(is_combiner(d) for scope in self.iterators.values() for d in scope.values())


def iter_blocks(batch: EntryBatch, ranges: Sequence[RowRange],
                block_entries: int = BLOCK_ENTRIES) -> Iterator[EntryBatch]:
    """Slice a sorted batch into row-aligned blocks restricted to ``ranges``."""
    if len(batch) == 0:
        return
    spans = sorted(r.bounds_in(batch.row) for r in ranges)
    merged: list[list[int]] = []
    for lo, hi in spans:
        if hi <= lo:
            continue
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    rows = batch.row
    for lo, hi in merged:
        pos = lo
        while pos < hi:
            cut = min(pos + block_entries, hi)
            if cut < hi:
                cut = pos + int(np.searchsorted(rows[pos:hi], rows[cut - 1], "right"))
            yield batch[pos:cut]
            pos = cut


@dataclass
class TabletScan:
    """One tablet's share of a scan, consumable by its own worker."""

    index: int
    extent: RowRange
    stream: EntryStream


class TabletStore:
    """A single-process store of named, tablet-partitioned sorted tables.

    Parameters
    ----------
    block_entries:
        Target size of the row-aligned blocks that flow through iterators.
    max_row_entries:
        Upper bound on the entries of one row buffered by a row-mode merge;
        exceeding it raises :class:`~tabletblas.errors.ResourceError`.
    """

    def __init__(self, block_entries: int = BLOCK_ENTRIES, max_row_entries: int = 1 << 24):
        self.block_entries = block_entries
        self.max_row_entries = max_row_entries
        self.metrics = StoreMetrics()
        self._tables: dict[str, _Table] = {}
        self._admin = threading.RLock()
        self._clock_lock = threading.Lock()
        self._clock = 0

    # -- administration -------------------------------------------------
    def _table(self, name: str) -> _Table:
        with self._admin:
            try:
                return self._tables[name]
            except KeyError:
                raise NotFoundError(f"table {name!r} does not exist") from None

    def exists(self, name: str) -> bool:
        with self._admin:
            return name in self._tables

    def tables(self) -> list[str]:
        with self._admin:
            return sorted(self._tables)

    def create_table(self, name: str, splits: Sequence = ()) -> str:
        splits = [as_key_bytes(s, "split point") for s in splits]
        if any(b <= a for a, b in zip(splits, splits[1:])):
            raise ConfigurationError(f"split points must be strictly ascending: {splits!r}")
        if any(not s for s in splits):
            raise ConfigurationError("split points must be non-empty")
        with self._admin:
            if name in self._tables:
                raise NameConflictError(f"table {name!r} already exists")
            self._tables[name] = _Table(name, splits)
        return name

    def ensure_table(self, name: str, splits: Sequence = ()) -> str:
        with self._admin:
            if name not in self._tables:
                self.create_table(name, splits)
        return name

    def clone_table(self, source: str, dest: str) -> str:
        """Copy-on-write clone: shares the source's sorted runs, writes nothing."""
        with self._admin:
            src = self._table(source)
            if dest in self._tables:
                raise NameConflictError(f"table {dest!r} already exists")
            out = _Table(dest, src.splits)
            out.tablets = [t.clone() for t in src.tablets]
            out.iterators = copy.deepcopy(src.iterators)
            self._tables[dest] = out
        return dest

    def delete_table(self, name: str) -> None:
        with self._admin:
            self._table(name)
            del self._tables[name]

    def rename_table(self, old: str, new: str) -> None:
        with self._admin:
            table = self._table(old)
            if new in self._tables:
                raise NameConflictError(f"table {new!r} already exists")
            del self._tables[old]
            table.name = new
            self._tables[new] = table

    def splits(self, name: str) -> tuple[bytes, ...]:
        return self._table(name).splits

    def num_tablets(self, name: str) -> int:
        return len(self._table(name).tablets)

    def tablet_extents(self, name: str) -> list[RowRange]:
        return [t.extent for t in self._table(name).tablets]

    # -- iterator configuration -----------------------------------------
    def attach_iterator(self, name: str, scope: str, priority: int,
                        descriptor: IteratorDescriptor | BlockIterator) -> None:
        if scope not in SCOPES:
            raise ConfigurationError(f"unknown scope {scope!r}; expected one of {SCOPES}")
        if isinstance(descriptor, BlockIterator):
            desc = descriptor.descriptor()
            if desc is None:
                raise ConfigurationError(f"{descriptor!r} has no serializable descriptor; "
                                         "register it with register_iterator first")
            descriptor = desc
        build_iterator(descriptor, IteratorEnv(self, name, scope))  # validate options early
        with self._admin:
            table = self._table(name)
            if priority in table.iterators[scope]:
                raise ConfigurationError(
                    f"priority {priority} already used at {scope} scope of {name!r}")
            table.iterators[scope][priority] = descriptor

    def detach_iterator(self, name: str, scope: str, priority: int) -> None:
        with self._admin:
            table = self._table(name)
            if table.iterators[scope].pop(priority, None) is None:
                raise NotFoundError(f"no iterator at priority {priority} in {scope} scope")

    def iterators(self, name: str, scope: str) -> list[tuple[int, IteratorDescriptor]]:
        with self._admin:
            return sorted(self._table(name).iterators[scope].items())

    def has_combiner(self, name: str) -> bool:
        return self._table(name).has_combiner()

    def _stack(self, table: _Table, scope: str, extra: Sequence = ()) -> list[BlockIterator]:
        # without any combiner only the newest version of a key is visible
        env = IteratorEnv(self, table.name, scope)
        stack: list[BlockIterator] = []
        folds = any(isinstance(it, Combiner) or
                    (isinstance(it, IteratorDescriptor) and is_combiner(it)) for it in extra)
        if not table.has_combiner() and not folds:
            stack.append(Versioning())
        stack.extend(build_iterator(d, env) for _, d in sorted(table.iterators[scope].items()))
        for it in extra:
            stack.append(build_iterator(it, env) if isinstance(it, IteratorDescriptor) else it)
        return stack

    # -- writes ---------------------------------------------------------
    def _stamp(self, n: int) -> np.ndarray:
        with self._clock_lock:
            start = self._clock + 1
            self._clock += n
        return np.arange(start, start + n, dtype=np.int64)

    def write(self, name: str, entries) -> WriteReceipt:
        """Write ``(row, family, qualifier, value)`` tuples or an EntryBatch."""
        batch = entries if isinstance(entries, EntryBatch) else EntryBatch.from_entries(entries)
        if len(batch) and ((batch.row == b"").any() or (batch.qualifier == b"").any()):
            raise DataFormatError("row and qualifier must be non-empty")
        return self.write_batch(name, batch)

    def write_batch(self, name: str, batch: EntryBatch) -> WriteReceipt:
        table = self._table(name)
        n = len(batch)
        if n == 0:
            return WriteReceipt(0)
        batch = EntryBatch(batch.row, batch.family, batch.qualifier, self._stamp(n), batch.value)
        if len(table.tablets) == 1:
            table.tablets[0].append(batch)
        else:
            where = table.route(batch.row)
            for t in np.unique(where).tolist():
                table.tablets[t].append(batch[where == t])
        self.metrics.add(entries_written=n)
        return WriteReceipt(n)

    # -- reads ----------------------------------------------------------
    def tablet_scans(self, name: str, ranges=None, iterators: Sequence = (),
                     raw: bool = False) -> list[TabletScan]:
        """Per-tablet streams over a snapshot taken now.

        Scan-scope iterators run first (after default versioning, when the
        table has no combiner), then ``iterators`` in the given order.
        ``raw`` bypasses every iterator, versioning included.
        """
        with self._admin:
            table = self._table(name)
            snaps = [(i, t.extent, t.snapshot()) for i, t in enumerate(table.tablets)]
        out = []
        for i, extent, snap in snaps:
            def opener(rngs, snap=snap, table=table):
                blocks = iter_blocks(snap, rngs, self.block_entries)
                if raw:
                    return blocks
                return run_stack(blocks, self._stack(table, SCAN, iterators))
            out.append(TabletScan(i, extent, EntryStream(opener, ranges)))
        return out

    def scan(self, name: str, ranges=None, iterators: Sequence = (), raw: bool = False) -> EntryStream:
        """A stream over the whole table, tablets in row order."""
        parts = self.tablet_scans(name, None, iterators, raw)

        def opener(rngs):
            for p in parts:
                yield from EntryStream(p.stream._opener, rngs).blocks()
        return EntryStream(opener, ranges)

    def read(self, name: str, ranges=None, iterators: Sequence = (), raw: bool = False) -> EntryBatch:
        return self.scan(name, ranges, iterators, raw).read_all()

    def raw_size(self, name: str) -> int:
        """Stored versions, before any combining."""
        return sum(t.raw_size() for t in self._table(name).tablets)

    # -- compaction -----------------------------------------------------
    def compact(self, name: str) -> None:
        """Rewrite every tablet through its compaction-scope stack."""
        with self._admin:
            table = self._table(name)
            for tablet in table.tablets:
                with tablet.lock:
                    snap = tablet.snapshot()
                    blocks = iter_blocks(snap, [RowRange()], self.block_entries)
                    out = EntryBatch.concat(list(run_stack(blocks, self._stack(table, COMPACTION))))
                    tablet.replace(out)

    # -- triple files ---------------------------------------------------
    def load_tsv(self, name: str, path) -> WriteReceipt:
        from .tsv import read_triples
        return self.write(name, read_triples(path))

    def dump_tsv(self, name: str, path) -> int:
        batch = self.read(name)
        Path(path).write_bytes(batch.render_tsv())
        return len(batch)
