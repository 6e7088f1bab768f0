import numpy as np
import pytest

from tabletblas.batch import EntryBatch, Key, RowRange, normalize_ranges
from tabletblas.errors import ConfigurationError, DataFormatError


def test_from_triples_and_back():
    b = EntryBatch.from_triples([("r2", "c1", 3), ("r1", "c2", "4")])
    assert b.triples() == [(b"r2", b"c1", 3), (b"r1", b"c2", 4)]
    assert b.sorted().triples() == [(b"r1", b"c2", 4), (b"r2", b"c1", 3)]


def test_malformed_triples():
    with pytest.raises(DataFormatError):
        EntryBatch.from_triples([("r1", "c1")])
    with pytest.raises(DataFormatError):
        EntryBatch.from_triples([("r\x001", "c1", 1)])


def test_sort_order_uses_family_then_time():
    b = EntryBatch.from_entries([("r", "f2", "q", 1), ("r", "f1", "z", 2), ("r", "f1", "a", 3)])
    assert [bytes(f) + bytes(q) for f, q in zip(b.sorted().family, b.sorted().qualifier)] == \
        [b"f1a", b"f1z", b"f2q"]
    # ties put newer timestamps first even when input is oldest-first
    b = EntryBatch(np.array([b"r", b"r"]), np.array([b"", b""]), np.array([b"q", b"q"]),
                   np.array([1, 2]), np.array([10, 20]))
    s = b.sorted()
    assert s.timestamp.tolist() == [2, 1]


def test_long_keys_sort_lexicographically():
    rows = [b"a" * 12 + b"b", b"a" * 12, b"a" * 11 + b"z", b"b"]
    b = EntryBatch.from_triples([(r, "q", 1) for r in rows])
    assert [bytes(r) for r in b.sorted().row] == sorted(rows)


def test_key_sort_key():
    k1, k2 = Key(b"r", b"", b"q", 5), Key(b"r", b"", b"q", 9)
    assert sorted([k1, k2], key=Key.sort_key) == [k2, k1]


def test_transposed_and_tsv():
    b = EntryBatch.from_triples([("a", "b", 1), ("c", "d", 0.5)])
    assert b.transposed().triples() == [(b"b", b"a", 1), (b"d", b"c", 0.5)]
    assert b.render_tsv() == b"a\tb\t1\nc\td\t0.5\n"


def test_entries_encode_values():
    b = EntryBatch.from_triples([("a", "b", 2)])
    e = next(b.entries())
    assert e.value == b"2" and e.number == 2 and e.key.row == b"a"


def test_row_range():
    r = RowRange("r2", "r3")
    assert r.contains(b"r2") and not r.contains(b"r3")
    assert RowRange.exact("x").contains(b"x")
    keys = np.array([b"r1", b"r2", b"r25", b"r3", b"r4"])
    assert r.bounds_in(keys) == (1, 3)
    assert r.mask(keys).tolist() == [False, True, True, False, False]
    with pytest.raises(ConfigurationError):
        RowRange("b", "a")
    with pytest.raises(ConfigurationError):
        RowRange("a", "a")


def test_normalize_ranges():
    assert normalize_ranges(None) == [RowRange()]
    out = normalize_ranges([("m", None), (None, "c")])
    assert out[0].start is None and out[1].start == b"m"
