"""Sorted entry streams and the single-input iterators that transform them.

An iterator takes an iterable of sorted, row-aligned :class:`EntryBatch`
blocks and yields transformed blocks. Stacks are plain lists of iterators
applied in order. Iterators that only look at one entry at a time
(``entrywise = True``) may also run on unsorted partial products, which is
how filters and applies get fused behind a multiply.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .batch import Entry, EntryBatch, Key, RowRange, normalize_ranges
from .errors import ConfigurationError, DataFormatError, IteratorFailure
from .ops import BinaryOp, UnaryOp, binary_op, unary_op
from .values import require_integral

__all__ = [
    "BlockIterator", "Combiner", "Versioning", "ApplyIterator", "FilterIterator",
    "Predicate", "strict_upper", "strict_lower", "no_diagonal", "drop_even",
    "truss_threshold", "column_ranges", "entry_predicate",
    "IteratorDescriptor", "IteratorEnv", "register_iterator", "build_iterator",
    "is_combiner", "run_stack", "EntryStream",
]


# ---------------------------------------------------------------------------
# descriptors


@dataclass(frozen=True)
class IteratorDescriptor:
    """Serializable name + string options naming a registered iterator."""

    name: str
    options: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        opts = dict(self.options)
        for k, v in opts.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise ConfigurationError(f"descriptor options must map str to str: {k!r}={v!r}")
        object.__setattr__(self, "options", opts)

    def __hash__(self):
        return hash((self.name, tuple(sorted(self.options.items()))))

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "options": self.options}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "IteratorDescriptor":
        data = json.loads(text)
        return cls(data["name"], data.get("options", {}))


@dataclass
class IteratorEnv:
    """What an iterator factory may see: the store, the table and the scope."""

    store: object = None
    table: str | None = None
    scope: str | None = None


_REGISTRY: dict[str, Callable[[Mapping[str, str], IteratorEnv], "BlockIterator"]] = {}
_COMBINERS: set[str] = set()


def register_iterator(name: str, factory=None, *, combiner: bool = False):
    """Register ``factory(options, env) -> BlockIterator`` under ``name``.

    Usable as a decorator. Set ``combiner`` for iterators that fold versions,
    which switches off the default newest-version-wins behavior of a table.
    """
    def deco(f):
        _REGISTRY[name] = f
        if combiner:
            _COMBINERS.add(name)
        return f
    return deco(factory) if factory is not None else deco


def is_combiner(descriptor: IteratorDescriptor) -> bool:
    return descriptor.name in _COMBINERS


def build_iterator(descriptor: IteratorDescriptor, env: IteratorEnv | None = None) -> "BlockIterator":
    try:
        factory = _REGISTRY[descriptor.name]
    except KeyError:
        raise ConfigurationError(f"no iterator registered as {descriptor.name!r}") from None
    return factory(descriptor.options, env or IteratorEnv())


# ---------------------------------------------------------------------------
# iterators


class BlockIterator:
    entrywise = True

    def apply(self, blocks: Iterable[EntryBatch]) -> Iterator[EntryBatch]:
        for block in blocks:
            out = self.transform(block)
            if len(out):
                yield out

    def transform(self, block: EntryBatch) -> EntryBatch:
        return block

    def descriptor(self) -> IteratorDescriptor | None:
        return None


def run_stack(blocks: Iterable[EntryBatch], stack: Sequence[BlockIterator]) -> Iterator[EntryBatch]:
    for it in stack:
        blocks = it.apply(blocks)
    return iter(blocks)


def _prune(block: EntryBatch, prune_zeros: bool) -> EntryBatch:
    if not prune_zeros or len(block) == 0:
        return block
    keep = block.value != 0
    return block if keep.all() else block[keep]


class Combiner(BlockIterator):
    """Fold consecutive versions of one (row, family, qualifier) with ⊕.

    The folded entry keeps the newest timestamp. Results equal to zero are
    dropped unless ``prune_zeros`` is off.
    """

    entrywise = False

    def __init__(self, op: BinaryOp, prune_zeros: bool = True):
        self.op = op
        self.prune_zeros = prune_zeros

    def transform(self, block):
        if len(block) < 2:
            return _prune(block, self.prune_zeros)
        starts = block.key_starts()
        if len(starts) == len(block):
            return _prune(block, self.prune_zeros)
        vals = self.op.reduce_groups(block.value, starts)
        out = block[starts].with_values(vals)
        return _prune(out, self.prune_zeros)

    def descriptor(self):
        opts = {"op": self.op.name, **self.op.options}
        if not self.prune_zeros:
            opts["prune_zeros"] = "false"
        return IteratorDescriptor("combiner", opts)


class Versioning(BlockIterator):
    """Keep only the newest version of each key."""

    entrywise = False

    def transform(self, block):
        if len(block) < 2:
            return block
        starts = block.key_starts()
        return block if len(starts) == len(block) else block[starts]

    def descriptor(self):
        return IteratorDescriptor("versioning")


class ApplyIterator(BlockIterator):
    """Replace each value by f(value); zero results are dropped by default.

    ``fn`` is a :class:`UnaryOp` (vectorized) or a plain callable taking
    ``(key, value)`` and returning the new value, evaluated per entry.
    """

    def __init__(self, fn, prune_zeros: bool = True):
        self.fn = fn
        self.prune_zeros = prune_zeros

    def transform(self, block):
        if len(block) == 0:
            return block
        if isinstance(self.fn, UnaryOp):
            try:
                vals = np.asarray(self.fn(block.value))
            except Exception as exc:
                raise self._locate(block, exc) from exc
        else:
            out = []
            for i in range(len(block)):
                try:
                    out.append(self.fn(block.key(i), block.value[i].item()))
                except Exception as exc:
                    raise IteratorFailure(f"apply function failed at {block.key(i)}: {exc}",
                                          block.key(i)) from exc
            vals = np.asarray(out)
            if vals.dtype == object:
                raise DataFormatError("apply function returned non-numeric values")
        return _prune(block.with_values(vals), self.prune_zeros)

    def _locate(self, block, exc):
        for i in range(len(block)):
            try:
                self.fn(block.value[i:i + 1])
            except Exception:  # noqa: BLE001
                return IteratorFailure(f"apply {self.fn.name} failed at {block.key(i)}: {exc}",
                                       block.key(i))
        return IteratorFailure(f"apply {self.fn.name} failed: {exc}")

    def descriptor(self):
        if not isinstance(self.fn, UnaryOp):
            return None
        opts = {"fn": self.fn.name, **self.fn.options}
        if not self.prune_zeros:
            opts["prune_zeros"] = "false"
        return IteratorDescriptor("apply", opts)


class Predicate:
    """A vectorized keep-condition over a block."""

    name = "predicate"

    def mask(self, block: EntryBatch) -> np.ndarray:
        raise NotImplementedError

    def options(self) -> dict[str, str] | None:
        return {"predicate": self.name}

    def __and__(self, other: "Predicate") -> "Predicate":
        return _All([self, other])

    def __repr__(self):
        return f"{type(self).__name__}({self.options()})"


class _KeyCompare(Predicate):
    def __init__(self, name, cmp):
        self.name = name
        self._cmp = cmp

    def mask(self, block):
        return self._cmp(block.row, block.qualifier)


strict_upper = _KeyCompare("strict_upper", lambda r, q: r < q)
strict_lower = _KeyCompare("strict_lower", lambda r, q: r > q)
no_diagonal = _KeyCompare("no_diagonal", lambda r, q: r != q)


class _DropEven(Predicate):
    name = "drop_even"

    def mask(self, block):
        return require_integral(block.value, "drop_even") % 2 != 0


drop_even = _DropEven()


class _TrussThreshold(Predicate):
    """Keep values v with (v - 1) / 2 >= k - 2."""

    name = "truss_threshold"

    def __init__(self, k: int):
        self.k = int(k)

    def mask(self, block):
        v = require_integral(block.value, "truss_threshold")
        return v - 1 >= 2 * (self.k - 2)

    def options(self):
        return {"predicate": self.name, "k": str(self.k)}


def truss_threshold(k: int) -> Predicate:
    return _TrussThreshold(k)


class _ColumnRanges(Predicate):
    name = "column_ranges"

    def __init__(self, ranges: Sequence[RowRange]):
        self.ranges = list(ranges)

    def mask(self, block):
        m = np.zeros(len(block), dtype=bool)
        for r in self.ranges:
            m |= r.mask(block.qualifier)
        return m

    def options(self):
        enc = [[None if r.start is None else r.start.decode("latin-1"),
                None if r.end is None else r.end.decode("latin-1"), r.end_inclusive]
               for r in self.ranges]
        return {"predicate": self.name, "ranges": json.dumps(enc)}


def column_ranges(ranges: Sequence[RowRange]) -> Predicate:
    return _ColumnRanges([r if isinstance(r, RowRange) else RowRange(*r) for r in ranges])


class _EntryPredicate(Predicate):
    name = "entry_predicate"

    def __init__(self, fn):
        self.fn = fn

    def mask(self, block):
        return np.fromiter((bool(self.fn(block.key(i), block.value[i].item()))
                            for i in range(len(block))), dtype=bool, count=len(block))

    def options(self):
        return None


def entry_predicate(fn: Callable[[Key, object], bool]) -> Predicate:
    """Wrap a per-entry ``fn(key, value) -> bool`` (not serializable)."""
    return _EntryPredicate(fn)


class _All(Predicate):
    name = "all"

    def __init__(self, parts):
        flat = []
        for p in parts:
            flat.extend(p.parts if isinstance(p, _All) else [p])
        self.parts = flat

    def mask(self, block):
        m = np.ones(len(block), dtype=bool)
        for p in self.parts:
            if not m.any():
                break
            m &= p.mask(block)
        return m

    def options(self):
        sub = [p.options() for p in self.parts]
        if any(s is None for s in sub):
            return None
        return {"predicate": self.name, "parts": json.dumps(sub)}


def predicate_from_options(opts: Mapping[str, str]) -> Predicate:
    kind = opts.get("predicate")
    if kind in ("strict_upper", "strict_lower", "no_diagonal", "drop_even"):
        return {"strict_upper": strict_upper, "strict_lower": strict_lower,
                "no_diagonal": no_diagonal, "drop_even": drop_even}[kind]
    if kind == "truss_threshold":
        return truss_threshold(int(opts["k"]))
    if kind == "column_ranges":
        ranges = [RowRange(None if s is None else s.encode("latin-1"),
                           None if e is None else e.encode("latin-1"), incl)
                  for s, e, incl in json.loads(opts["ranges"])]
        return column_ranges(ranges)
    if kind == "all":
        return _All([predicate_from_options(p) for p in json.loads(opts["parts"])])
    raise ConfigurationError(f"unknown filter predicate {kind!r}")


class FilterIterator(BlockIterator):
    """Pass only entries for which ``predicate`` holds."""

    def __init__(self, predicate: Predicate):
        self.predicate = predicate

    def transform(self, block):
        if len(block) == 0:
            return block
        keep = self.predicate.mask(block)
        return block if keep.all() else block[keep]

    def descriptor(self):
        opts = self.predicate.options()
        return None if opts is None else IteratorDescriptor("filter", opts)


def _flag(opts, name, default=True):
    return opts.get(name, "true" if default else "false").lower() not in ("false", "0", "no")


register_iterator("combiner",
                  lambda o, env: Combiner(binary_op(o["op"], o), _flag(o, "prune_zeros")),
                  combiner=True)
register_iterator("versioning", lambda o, env: Versioning())
register_iterator("apply", lambda o, env: ApplyIterator(unary_op(o["fn"], o),
                                                         _flag(o, "prune_zeros")))
register_iterator("filter", lambda o, env: FilterIterator(predicate_from_options(o)))


# ---------------------------------------------------------------------------
# the per-entry cursor


class EntryStream:
    """A seekable, sorted stream of entries.

    ``opener(ranges)`` returns the block iterator for a list of row ranges;
    :meth:`seek` re-opens it. Entries come out in key order between seeks.
    Bulk consumers call :meth:`blocks`; the cursor methods serve everything
    else.
    """

    def __init__(self, opener: Callable[[list[RowRange]], Iterable[EntryBatch]], ranges=None):
        self._opener = opener
        self.seek(ranges)

    def seek(self, ranges=None) -> None:
        if isinstance(ranges, RowRange):
            ranges = [ranges]
        self._ranges = normalize_ranges(ranges)
        self._source = None
        self._block = None
        self._pos = 0

    @property
    def _blocks(self):
        # opened lazily so that building a stack costs nothing until read
        if self._source is None:
            self._source = iter(self._opener(self._ranges))
        return self._source

    def _fill(self) -> bool:
        while self._block is None or self._pos >= len(self._block):
            nxt = next(self._blocks, None)
            if nxt is None:
                self._block = None
                return False
            self._block, self._pos = nxt, 0
        return True

    def has_next(self) -> bool:
        return self._fill()

    def peek_key(self) -> Key:
        if not self._fill():
            raise StopIteration("stream exhausted")
        return self._block.key(self._pos)

    def next_entry(self) -> Entry:
        if not self._fill():
            raise StopIteration("stream exhausted")
        b, i = self._block, self._pos
        self._pos += 1
        return next(b[i:i + 1].entries())

    def __iter__(self) -> Iterator[Entry]:
        for block in self.blocks():
            yield from block.entries()

    def blocks(self) -> Iterator[EntryBatch]:
        """Yield the remaining entries block by block."""
        if self._block is not None and self._pos < len(self._block):
            rest = self._block[self._pos:]
            self._block = None
            yield rest
        for block in self._blocks:
            if len(block):
                yield block

    def read_all(self) -> EntryBatch:
        return EntryBatch.concat(list(self.blocks()))

    def deep_copy(self) -> "EntryStream":
        """An independent stream over the same source, positioned at the start."""
        return EntryStream(self._opener, self._ranges)
