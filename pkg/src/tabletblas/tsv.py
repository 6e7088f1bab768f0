"""Triple files: ``row<TAB>qualifier<TAB>value`` lines, UTF-8, no header."""
from __future__ import annotations

from pathlib import Path

from .batch import EntryBatch
from .errors import DataFormatError


def parse_triples(data: bytes) -> EntryBatch:
    triples = []
    for lineno, line in enumerate(data.split(b"\n"), 1):
        if not line:
            continue
        parts = line.split(b"\t")
        if len(parts) != 3:
            raise DataFormatError(f"line {lineno}: expected 3 tab-separated fields, got {len(parts)}")
        triples.append(tuple(parts))
    return EntryBatch.from_triples(triples)


def read_triples(path) -> EntryBatch:
    return parse_triples(Path(path).read_bytes())


def write_triples(path, triples) -> int:
    batch = triples if isinstance(triples, EntryBatch) else EntryBatch.from_triples(triples)
    Path(path).write_bytes(batch.render_tsv())
    return len(batch)
