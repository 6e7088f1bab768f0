import threading

import pytest

from tabletblas import (COMPACTION, SCAN, Combiner, ConfigurationError, FilterIterator,
                        IteratorDescriptor, NameConflictError, NotFoundError, PLUS,
                        RowRange, TabletStore, strict_upper)
from tabletblas.errors import DataFormatError


def triples(store, name, **kw):
    return store.read(name, **kw).triples()


def test_create_table(store):
    store.create_table("A")
    assert store.num_tablets("A") == 1
    store.create_table("B", ["m"])
    assert store.num_tablets("B") == 2
    ext = store.tablet_extents("B")
    assert ext[0] == RowRange(None, b"m") and ext[1] == RowRange(b"m", None)
    with pytest.raises(ConfigurationError):
        store.create_table("C", ["b", "b"])
    with pytest.raises(NameConflictError):
        store.create_table("A")


def test_write_receipt_and_routing(store):
    store.create_table("T", ["m"])
    receipt = store.write("T", [("a", "", "c", 1), ("z", "", "c", 2), ("m", "", "c", 3)])
    assert receipt.entries_written == 3
    scans = store.tablet_scans("T")
    assert [s.stream.read_all().triples() for s in scans] == [
        [(b"a", b"c", 1)], [(b"m", b"c", 3), (b"z", b"c", 2)]]
    assert store.metrics.snapshot()["entries_written"] == 3


def test_versions_coexist_and_newest_wins(store):
    store.create_table("T")
    store.write("T", [("r1", "", "c1", "2")])
    store.write("T", [("r1", "", "c1", "3")])
    assert len(store.read("T", raw=True)) == 2
    assert triples(store, "T") == [(b"r1", b"c1", 3)]
    raw = store.read("T", raw=True)
    assert raw.timestamp[0] > raw.timestamp[1]


def test_scan_combiner(store):
    store.create_table("T")
    store.write("T", [("r1", "", "c1", 2), ("r1", "", "c1", 3)])
    assert triples(store, "T", iterators=[Combiner(PLUS)]) == [(b"r1", b"c1", 5)]


def test_scan_ranges(store):
    store.create_table("T", ["r3"])
    store.write("T", [(f"r{i}", "", "c", i) for i in range(1, 5)])
    assert triples(store, "T", ranges=[RowRange("r2", "r3")]) == [(b"r2", b"c", 2)]
    assert store.read("T", ranges=[]).triples() == triples(store, "T")
    store.create_table("E")
    assert len(store.read("E")) == 0


def test_write_rejects(store):
    store.create_table("T")
    with pytest.raises(DataFormatError):
        store.write("T", [("", "", "c", 1)])
    with pytest.raises(DataFormatError):
        store.write("T", [("r", "", "c", "")])
    with pytest.raises(NotFoundError):
        store.write("nope", [("r", "", "c", 1)])


def test_clone_is_copy_on_write(store):
    store.create_table("S", ["m"])
    store.write("S", [(f"{c}", "", "q", 1) for c in "abcdefxyz"])
    before = store.metrics.snapshot()["entries_written"]
    store.clone_table("S", "D")
    assert store.metrics.snapshot()["entries_written"] == before
    assert store.splits("D") == store.splits("S")
    assert triples(store, "D") == triples(store, "S")
    store.write("S", [("n", "", "q", 7)])
    store.write("D", [("o", "", "q", 8)])
    assert (b"n", b"q", 7) not in triples(store, "D")
    assert (b"o", b"q", 8) not in triples(store, "S")
    with pytest.raises(NotFoundError):
        store.clone_table("missing", "X")


def test_delete_rename(store):
    store.create_table("B")
    store.delete_table("B")
    with pytest.raises(NotFoundError):
        store.read("B")
    store.create_table("tmp")
    store.write("tmp", [("r", "", "c", 4)])
    store.rename_table("tmp", "A")
    assert triples(store, "A") == [(b"r", b"c", 4)]
    store.create_table("C")
    with pytest.raises(NameConflictError):
        store.rename_table("A", "C")
    with pytest.raises(NotFoundError):
        store.delete_table("tmp")


def test_compact(store):
    store.create_table("T")
    store.attach_iterator("T", COMPACTION, 10, Combiner(PLUS))
    store.write("T", [("r1", "", "c1", 2)])
    store.write("T", [("r1", "", "c1", 3)])
    store.compact("T")
    assert store.read("T", raw=True).triples() == [(b"r1", b"c1", 5)]
    store.compact("T")
    assert store.read("T", raw=True).triples() == [(b"r1", b"c1", 5)]


def test_compact_without_iterators_is_identity(store):
    store.create_table("T")
    store.write("T", [("b", "", "c", 1), ("a", "", "c", 2)])
    before = triples(store, "T")
    store.compact("T")
    assert triples(store, "T") == before


def test_attach_scan_scope_leaves_storage(store):
    store.create_table("T")
    store.attach_iterator("T", SCAN, 10, Combiner(PLUS))
    store.write("T", [("r", "", "c", 2), ("r", "", "c", 3)])
    assert triples(store, "T") == [(b"r", b"c", 5)]
    assert len(store.read("T", raw=True)) == 2
    with pytest.raises(ConfigurationError):
        store.attach_iterator("T", SCAN, 10, Combiner(PLUS))
    with pytest.raises(ConfigurationError):
        store.attach_iterator("T", "bogus", 11, Combiner(PLUS))


def test_compaction_filter_is_durable(store):
    store.create_table("T")
    store.write("T", [("a", "", "b", 1), ("b", "", "a", 1)])
    store.attach_iterator("T", COMPACTION, 5, FilterIterator(strict_upper))
    assert len(store.read("T")) == 2
    store.compact("T")
    assert store.read("T", raw=True).triples() == [(b"a", b"b", 1)]


def test_iterators_apply_in_priority_order(store):
    store.create_table("T")
    store.write("T", [("r", "", "c", 3)])
    store.attach_iterator("T", SCAN, 20, IteratorDescriptor("apply", {"fn": "offset", "amount": "1"}))
    store.attach_iterator("T", SCAN, 10, IteratorDescriptor("apply", {"fn": "scale", "factor": "2"}))
    assert triples(store, "T") == [(b"r", b"c", 7)]
    assert [p for p, _ in store.iterators("T", SCAN)] == [10, 20]


def test_snapshot_isolation_of_open_scan(store):
    store.create_table("T")
    store.write("T", [("a", "", "c", 1)])
    stream = store.scan("T")
    store.write("T", [("b", "", "c", 2)])
    assert stream.read_all().triples() == [(b"a", b"c", 1)]


def test_concurrent_writes(store):
    store.create_table("T", ["5"])

    def work(w):
        for i in range(50):
            store.write("T", [(f"{w}{i:02d}", "", "c", 1)])

    threads = [threading.Thread(target=work, args=(w,)) for w in range(10)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(store.read("T")) == 500
    ts = store.read("T", raw=True).timestamp
    assert len(set(ts.tolist())) == 500


def test_many_flushes_keep_newest(monkeypatch):
    import tabletblas.store as st
    monkeypatch.setattr(st, "FLUSH_ENTRIES", 4)
    monkeypatch.setattr(st, "MAX_RUNS", 2)
    s = TabletStore(block_entries=3)
    s.create_table("T")
    for v in range(1, 30):
        s.write("T", [(f"r{v % 5}", "", "c", v), ("x", "", "y", v)])
    got = dict(((r, c), v) for r, c, v in s.read("T").triples())
    assert got[(b"x", b"y")] == 29
    assert got[(b"r0", b"c")] == 25


def test_tsv_round_trip(store, tmp_path):
    path = tmp_path / "t.tsv"
    path.write_bytes(b"r1\tc1\t2\nr2\tc1\t0.5\n")
    store.create_table("T")
    assert store.load_tsv("T", path).entries_written == 2
    out = tmp_path / "o.tsv"
    assert store.dump_tsv("T", out) == 2
    assert out.read_bytes() == path.read_bytes()


def test_bad_tsv(store, tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_bytes(b"r1\tc1\n")
    store.create_table("T")
    with pytest.raises(DataFormatError):
        store.load_tsv("T", path)
