"""Columnar blocks of key-value entries.

Every iterator in the package consumes and produces :class:`EntryBatch`
blocks rather than single entries. Keys are numpy fixed-width byte arrays
(``S`` dtype), which compare lexicographically, so sorting and range seeks
stay vectorized. Keys may not contain NUL bytes because ``S`` arrays strip
trailing NULs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, DataFormatError
from .values import encode_value, format_value, value_array

__all__ = ["Key", "Entry", "EntryBatch", "RowRange", "as_key_bytes"]


class Key(NamedTuple):
    row: bytes
    family: bytes
    qualifier: bytes
    timestamp: int

    def sort_key(self):
        """Tuple giving the store order: (row, family, qualifier) up, time down."""
        return (self.row, self.family, self.qualifier, -self.timestamp)


class Entry(NamedTuple):
    key: Key
    value: bytes

    @property
    def number(self):
        from .values import parse_value
        return parse_value(self.value)


def as_key_bytes(part, what="key") -> bytes:
    if isinstance(part, str):
        part = part.encode("utf-8")
    elif isinstance(part, (bytearray, np.bytes_)):
        part = bytes(part)
    elif not isinstance(part, bytes):
        raise DataFormatError(f"{what} must be bytes or str, got {type(part).__name__}")
    if b"\x00" in part:
        raise DataFormatError(f"{what} {part!r} contains a NUL byte")
    return part


def _key_column(parts: Sequence, what: str) -> np.ndarray:
    col = [as_key_bytes(p, what) for p in parts]
    if not col:
        return np.zeros(0, dtype="S1")
    return np.array(col, dtype=bytes)


def _empty_keys(n: int) -> np.ndarray:
    return np.zeros(n, dtype="S1")


def _ranges(starts: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Concatenate ``arange(s, s + l)`` for each (s, l) pair."""
    total = int(lengths.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    shift = np.repeat(starts - (np.cumsum(lengths) - lengths), lengths)
    return shift + np.arange(total, dtype=np.int64)


class EntryBatch:
    """A block of entries stored column-wise.

    ``row``, ``family`` and ``qualifier`` are ``S`` arrays, ``timestamp`` is
    int64 and ``value`` is int64 or float64. A batch may or may not be
    sorted; batches that flow between iterators are always sorted and never
    split a row across two blocks.
    """

    __slots__ = ("row", "family", "qualifier", "timestamp", "value")

    def __init__(self, row, family, qualifier, timestamp, value):
        self.row = row
        self.family = family
        self.qualifier = qualifier
        self.timestamp = timestamp
        self.value = value

    # -- construction ---------------------------------------------------
    @classmethod
    def empty(cls, value_dtype=np.int64) -> "EntryBatch":
        return cls(_empty_keys(0), _empty_keys(0), _empty_keys(0),
                   np.zeros(0, dtype=np.int64), np.zeros(0, dtype=value_dtype))

    @classmethod
    def from_entries(cls, entries: Iterable) -> "EntryBatch":
        """Build from ``(row, family, qualifier, value)`` tuples; timestamps 0."""
        entries = list(entries)
        for e in entries:
            if len(e) != 4:
                raise DataFormatError(f"expected (row, family, qualifier, value), got {e!r}")
        if not entries:
            return cls.empty()
        rows = _key_column([e[0] for e in entries], "row")
        fams = _key_column([e[1] for e in entries], "family")
        quals = _key_column([e[2] for e in entries], "qualifier")
        vals = value_array([e[3] for e in entries],
                           keys=[(e[0], e[1], e[2]) for e in entries])
        return cls(rows, fams, quals, np.zeros(len(entries), dtype=np.int64), vals)

    @classmethod
    def from_triples(cls, triples: Iterable) -> "EntryBatch":
        """Build from ``(row, qualifier, value)`` triples with an empty family."""
        triples = list(triples)
        for t in triples:
            if len(t) != 3:
                raise DataFormatError(f"expected (row, column, value), got {t!r}")
        return cls.from_entries((t[0], b"", t[1], t[2]) for t in triples)

    @classmethod
    def from_arrays(cls, row, qualifier, value, family=None) -> "EntryBatch":
        n = len(row)
        fam = _empty_keys(n) if family is None else family
        return cls(row, fam, qualifier, np.zeros(n, dtype=np.int64), np.asarray(value))

    @staticmethod
    def concat(batches: Sequence["EntryBatch"]) -> "EntryBatch":
        batches = [b for b in batches if len(b)]
        if not batches:
            return EntryBatch.empty()
        if len(batches) == 1:
            return batches[0]
        return EntryBatch(
            np.concatenate([b.row for b in batches]),
            np.concatenate([b.family for b in batches]),
            np.concatenate([b.qualifier for b in batches]),
            np.concatenate([b.timestamp for b in batches]),
            np.concatenate([b.value for b in batches]),
        )

    # -- basic access ---------------------------------------------------
    def __len__(self):
        return len(self.row)

    def __getitem__(self, idx) -> "EntryBatch":
        return EntryBatch(self.row[idx], self.family[idx], self.qualifier[idx],
                          self.timestamp[idx], self.value[idx])

    def with_values(self, value) -> "EntryBatch":
        return EntryBatch(self.row, self.family, self.qualifier, self.timestamp,
                          np.asarray(value))

    def transposed(self) -> "EntryBatch":
        return EntryBatch(self.qualifier, self.family, self.row, self.timestamp, self.value)

    def key(self, i: int) -> Key:
        return Key(bytes(self.row[i]), bytes(self.family[i]), bytes(self.qualifier[i]),
                   int(self.timestamp[i]))

    def entries(self) -> Iterator[Entry]:
        for i in range(len(self)):
            yield Entry(self.key(i), encode_value(self.value[i].item()))

    def triples(self) -> list[tuple[bytes, bytes, int | float]]:
        return [(bytes(r), bytes(q), v) for r, q, v in
                zip(self.row.tolist(), self.qualifier.tolist(), self.value.tolist())]

    def render_tsv(self) -> bytes:
        lines = [b"%s\t%s\t%s\n" % (r, q, format_value(v).encode())
                 for r, q, v in zip(self.row.tolist(), self.qualifier.tolist(),
                                    self.value.tolist())]
        return b"".join(lines)

    def __repr__(self):
        shown = ", ".join(f"({r!r},{f!r},{q!r},{t})={v}" for (r, f, q, t), v in
                          ((self.key(i), self.value[i]) for i in range(min(len(self), 4))))
        more = ", ..." if len(self) > 4 else ""
        return f"EntryBatch[{len(self)}]({shown}{more})"

    # -- ordering -------------------------------------------------------
    def packed_keys(self) -> np.ndarray:
        """(row, family, qualifier) packed into big-endian uint64 words.

        Returns an ``(n, w)`` array whose row-wise lexicographic order is the
        key order. The family column is left out when it is empty throughout.
        """
        n = len(self)
        cols = [self.row]
        if self.family.dtype.itemsize > 1 or self.family.view(np.uint8).any():
            cols.append(self.family)
        cols.append(self.qualifier)
        widths = [c.dtype.itemsize for c in cols]
        total = -(-sum(widths) // 8) * 8
        buf = np.zeros((n, total), dtype=np.uint8)
        at = 0
        for c, w in zip(cols, widths):
            if n:
                buf[:, at:at + w] = np.ascontiguousarray(c).view(np.uint8).reshape(n, w)
            at += w
        return buf.view(">u8").astype(np.uint64)

    def sort_order(self) -> np.ndarray:
        """Stable permutation into key order.

        Ties keep their input order, so callers pass entries of equal key
        newest-first to get the descending-timestamp tie order.
        """
        packed = self.packed_keys()
        if packed.shape[1] == 1:
            return np.argsort(packed[:, 0], kind="stable")
        return np.lexsort(packed.T[::-1])

    def sorted(self) -> "EntryBatch":
        if len(self) < 2:
            return self
        out = self[self.sort_order()]
        if not out._ties_newest_first():
            # fall back to an explicit timestamp key
            packed = self.packed_keys()
            order = np.lexsort(np.vstack([-self.timestamp[None, :], packed.T[::-1]]))
            out = self[order]
        return out

    def _ties_newest_first(self) -> bool:
        if len(self) < 2:
            return True
        same = ~self._key_changes()
        return not np.any(same & (self.timestamp[1:] > self.timestamp[:-1]))

    def _key_changes(self) -> np.ndarray:
        return ((self.row[1:] != self.row[:-1])
                | (self.family[1:] != self.family[:-1])
                | (self.qualifier[1:] != self.qualifier[:-1]))

    def key_starts(self) -> np.ndarray:
        """Start offsets of runs of equal (row, family, qualifier)."""
        if len(self) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(([0], np.flatnonzero(self._key_changes()) + 1))

    def row_starts(self) -> np.ndarray:
        if len(self) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(([0], np.flatnonzero(self.row[1:] != self.row[:-1]) + 1))


@dataclass(frozen=True)
class RowRange:
    """A range of row (or column) keys.

    ``start`` is inclusive; ``end`` is exclusive unless ``end_inclusive``.
    ``None`` means unbounded on that side.
    """

    start: bytes | None = None
    end: bytes | None = None
    end_inclusive: bool = False

    def __post_init__(self):
        for name in ("start", "end"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, as_key_bytes(v, "range bound"))
        if self.start is not None and self.end is not None:
            if self.start > self.end or (self.start == self.end and not self.end_inclusive):
                raise ConfigurationError(f"inverted or empty range [{self.start!r}, {self.end!r})")

    @classmethod
    def exact(cls, key) -> "RowRange":
        return cls(key, key, end_inclusive=True)

    @classmethod
    def everything(cls) -> "RowRange":
        return cls()

    def contains(self, key: bytes) -> bool:
        if self.start is not None and key < self.start:
            return False
        if self.end is not None:
            return key <= self.end if self.end_inclusive else key < self.end
        return True

    def bounds_in(self, keys: np.ndarray) -> tuple[int, int]:
        """Slice bounds of this range within a sorted ``S`` array."""
        lo = 0 if self.start is None else int(np.searchsorted(keys, self.start, "left"))
        if self.end is None:
            hi = len(keys)
        else:
            hi = int(np.searchsorted(keys, self.end, "right" if self.end_inclusive else "left"))
        return lo, max(lo, hi)

    def mask(self, keys: np.ndarray) -> np.ndarray:
        m = np.ones(len(keys), dtype=bool)
        if self.start is not None:
            m &= keys >= self.start
        if self.end is not None:
            m &= (keys <= self.end) if self.end_inclusive else (keys < self.end)
        return m


def normalize_ranges(ranges) -> list[RowRange]:
    """Sort ranges by start; ``None`` or an empty list means the full range."""
    if not ranges:
        return [RowRange()]
    out = [r if isinstance(r, RowRange) else RowRange(*r) for r in ranges]
    return sorted(out, key=lambda r: (r.start is not None, r.start or b""))
