"""Power-law graph generation and the benchmark harness.

The generator is an unpermuted R-MAT sampler: each edge picks one quadrant
of the adjacency matrix per level of recursion, so low vertex ids collect
the highest degrees. Vertex ids are zero-padded decimal strings, which
makes the store's byte order agree with numeric order.
"""
from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .algorithms import compute_degrees, jaccard, ktruss
from .batch import EntryBatch
from .errors import DataConsistencyError, ParameterError, ResourceError
from .kernels import build_matrix, extract_tuples, reduce_kernel, table_mult
from .oracle import sparse_adjacency, sparse_jaccard, sparse_ktruss
from .store import TabletStore

__all__ = [
    "GenParams", "Metrics", "METRICS_HEADER", "ALGORITHMS", "ENGINES", "DEFAULT_PROBS",
    "generate", "symmetrize", "vertex_ids", "median_split", "max_scale",
    "run_experiment", "verify", "emit_metrics",
]

ALGORITHMS = ("jaccard", "ktruss", "mxm")
ENGINES = ("graphulo", "oracle")
DEFAULT_PROBS = (0.57, 0.19, 0.19, 0.05)
SCALE_CEILING = {"jaccard": 14, "ktruss": 13, "mxm": 14}

METRICS_HEADER = ["algorithm", "scale", "tablets", "engine", "nnz_input", "nnz_output",
                  "partial_products", "entries_written", "iterations", "runtime_ms", "overhead"]


@dataclass(frozen=True)
class GenParams:
    scale: int
    edges_per_vertex: int = 16
    seed: int = 0
    rmat_probs: tuple = DEFAULT_PROBS

    def __post_init__(self):
        if int(self.scale) != self.scale or self.scale < 1:
            raise ParameterError(f"scale must be an integer >= 1, got {self.scale!r}")
        if int(self.edges_per_vertex) != self.edges_per_vertex or self.edges_per_vertex < 1:
            raise ParameterError(f"edges per vertex must be >= 1, got {self.edges_per_vertex!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError(f"seed must be an unsigned integer, got {self.seed!r}")
        probs = tuple(float(p) for p in self.rmat_probs)
        if len(probs) != 4 or any(p <= 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise ParameterError(f"R-MAT probabilities must be 4 positive numbers summing to 1, "
                                 f"got {self.rmat_probs!r}")
        object.__setattr__(self, "rmat_probs", probs)

    @property
    def vertices(self) -> int:
        return 1 << self.scale

    @property
    def edges(self) -> int:
        return self.edges_per_vertex << self.scale


def vertex_ids(idx: np.ndarray, scale: int) -> np.ndarray:
    width = len(str((1 << scale) - 1))
    return np.char.zfill(idx.astype("U"), width).astype("S")


def generate(params: GenParams) -> EntryBatch:
    """``edges_per_vertex * 2**scale`` directed edges valued 1, in sampling order."""
    rng = np.random.default_rng(params.seed)
    a, b, c, _ = params.rmat_probs
    m = params.edges
    row = np.zeros(m, dtype=np.int64)
    col = np.zeros(m, dtype=np.int64)
    for _ in range(params.scale):
        u = rng.random(m)
        down = u >= a + b
        right = ((u >= a) & (u < a + b)) | (u >= a + b + c)
        row = (row << 1) | down
        col = (col << 1) | right
    return EntryBatch.from_arrays(vertex_ids(row, params.scale), vertex_ids(col, params.scale),
                                  np.ones(m, dtype=np.int64))


def symmetrize(raw: EntryBatch) -> EntryBatch:
    """Union with the transpose, duplicates merged, diagonal dropped; sorted."""
    both = EntryBatch.concat([raw, raw.transposed()])
    both = both[both.row != both.qualifier]
    if not len(both):
        return EntryBatch.empty()
    both = both.sorted()
    out = both[both.key_starts()]
    return out.with_values(np.ones(len(out), dtype=np.int64))


def median_split(batch: EntryBatch) -> list[bytes]:
    """One split point near the middle entry, for a two-tablet layout."""
    if not len(batch):
        return []
    rows = np.sort(batch.row)
    split = rows[len(rows) // 2]
    return [bytes(split)] if split > rows[0] else []


def max_scale(algorithm: str) -> int:
    env = os.environ.get("GRAPHBENCH_MAX_SCALE")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ParameterError(f"GRAPHBENCH_MAX_SCALE must be an integer, got {env!r}") from None
    return SCALE_CEILING[algorithm]


@dataclass
class Metrics:
    algorithm: str
    scale: int
    tablets: int
    engine: str
    nnz_input: int = 0
    nnz_output: int = 0
    partial_products: int = 0
    entries_written: int = 0
    iterations: int = 0
    runtime_ms: float = 0.0

    @property
    def oracle_entries_written(self) -> int:
        return self.nnz_output

    @property
    def overhead(self) -> float:
        return self.entries_written / self.nnz_output if self.nnz_output else math.nan

    def row(self) -> dict:
        out = asdict(self)
        out["overhead"] = self.overhead
        return out


def _check(algorithm, engine, tablets):
    if algorithm not in ALGORITHMS:
        raise ParameterError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    if engine not in ENGINES:
        raise ParameterError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    if tablets not in (1, 2):
        raise ParameterError(f"tablets must be 1 or 2, got {tablets!r}")


def run_experiment(algorithm: str, params: GenParams | None, tablets: int = 1,
                   engine: str = "graphulo", k: int = 3, *, inputs=None,
                   store: TabletStore | None = None, force: bool = False,
                   keep_result: list | None = None) -> Metrics:
    """Run one algorithm on one engine and report its metrics.

    The input is ``symmetrize(generate(params))`` unless ``inputs`` gives
    it directly: an adjacency batch, or for ``mxm`` a pair
    ``(a_t, b)`` of batches whose product ``a_tᵀ·b`` is computed. With
    ``keep_result`` the result triples are appended to that list.
    """
    _check(algorithm, engine, tablets)
    metrics = Metrics(algorithm, params.scale if params else 0, tablets, engine)
    if params is not None and params.scale > max_scale(algorithm) and not force:
        raise ResourceError(f"scale {params.scale} is above the {algorithm} ceiling of "
                            f"{max_scale(algorithm)}; set GRAPHBENCH_MAX_SCALE or force",
                            metrics)
    if inputs is None:
        if params is None:
            raise ParameterError("either params or inputs is required")
        inputs = symmetrize(generate(params))
    if algorithm == "mxm" and isinstance(inputs, EntryBatch):
        inputs = (inputs, inputs)
    first = inputs[0] if algorithm == "mxm" else inputs
    metrics.nnz_input = len(first)
    splits = median_split(first) if tablets == 2 else []
    store = store or TabletStore()
    try:
        if engine == "graphulo":
            result = _run_engine(store, algorithm, inputs, splits, k, metrics)
        else:
            result = _run_oracle(store, algorithm, inputs, splits, k, metrics)
    except MemoryError as exc:
        raise ResourceError(f"out of memory during {algorithm}: {exc}", metrics) from exc
    if keep_result is not None:
        keep_result.extend(result)
    return metrics


def _run_engine(store, algorithm, inputs, splits, k, metrics):
    if algorithm == "mxm":
        a_t, b = inputs
        build_matrix(store, a_t, "AT", splits=splits)
        build_matrix(store, b, "B", splits=splits)
        started = time.perf_counter()
        res = table_mult(store, "AT", "B", "C")
        metrics.runtime_ms = (time.perf_counter() - started) * 1000.0
        metrics.partial_products = res.partial_products
        metrics.entries_written = res.entries_written
        metrics.iterations = 1
        metrics.nnz_output = reduce_kernel(store, "C")
        return extract_tuples(store, "C")
    build_matrix(store, inputs, "A", splits=splits)
    if algorithm == "jaccard":
        compute_degrees(store, "A", "d")
        _, m = jaccard(store, "A", "d", "J", validate=False)
        out = "J"
    else:
        _, m = ktruss(store, "A", k, "T", validate=False)
        out = "T"
    metrics.partial_products = m.partial_products
    metrics.entries_written = m.entries_written
    metrics.iterations = m.iterations
    metrics.nnz_output = m.nnz_output
    metrics.runtime_ms = m.runtime_ms
    return extract_tuples(store, out)


def _run_oracle(store, algorithm, inputs, splits, k, metrics):
    started = time.perf_counter()
    if algorithm == "jaccard":
        result = sparse_jaccard(inputs)
    elif algorithm == "ktruss":
        result = sparse_ktruss(inputs, k)
    else:
        result = _sparse_mxm(*inputs)
    metrics.iterations = 1
    # the main-memory baseline writes its finished result and nothing else
    before = store.metrics.snapshot()["entries_written"]
    build_matrix(store, result, "R", splits=splits)
    metrics.runtime_ms = (time.perf_counter() - started) * 1000.0
    metrics.nnz_output = len(result)
    metrics.entries_written = store.metrics.snapshot()["entries_written"] - before
    return extract_tuples(store, "R")


def _sparse_mxm(a_t: EntryBatch, b: EntryBatch) -> EntryBatch:
    keys = np.unique(np.concatenate([a_t.row, a_t.qualifier, b.row, b.qualifier]))
    n = len(keys)

    def mat(batch):
        r = np.searchsorted(keys, batch.row)
        c = np.searchsorted(keys, batch.qualifier)
        return sp.csr_matrix((batch.value, (r, c)), shape=(n, n))
    prod = (mat(a_t).T @ mat(b)).tocoo()
    prod.eliminate_zeros()
    return EntryBatch.from_arrays(keys[prod.row], keys[prod.col], prod.data).sorted()


def verify(algorithm: str, params: GenParams | None, tablets: int = 1, k: int = 3,
           inputs=None, rel_tol: float = 1e-9) -> tuple[Metrics, Metrics]:
    """Run both engines on the same input and check that they agree."""
    if inputs is None:
        inputs = symmetrize(generate(params))
    got, want = [], []
    eng = run_experiment(algorithm, params, tablets, "graphulo", k, inputs=inputs, keep_result=got)
    ora = run_experiment(algorithm, params, tablets, "oracle", k, inputs=inputs, keep_result=want)
    if eng.nnz_output != ora.nnz_output:
        raise DataConsistencyError(f"{algorithm}: engine nnz {eng.nnz_output} != "
                                   f"oracle nnz {ora.nnz_output}")
    if [t[:2] for t in got] != [t[:2] for t in want]:
        raise DataConsistencyError(f"{algorithm}: engine and oracle key sets differ")
    gv = np.array([t[2] for t in got], dtype=np.float64)
    wv = np.array([t[2] for t in want], dtype=np.float64)
    if not np.allclose(gv, wv, rtol=rel_tol, atol=0.0):
        bad = int(np.flatnonzero(~np.isclose(gv, wv, rtol=rel_tol, atol=0.0))[0])
        raise DataConsistencyError(f"{algorithm}: value mismatch at {got[bad][:2]}: "
                                   f"{gv[bad]} vs {wv[bad]}")
    return eng, ora


def emit_metrics(rows: Iterable[Metrics], path, append: bool = False) -> Path:
    """Write metrics rows as CSV with a fixed header.

    With ``append`` rows go to the end of an existing file and the header
    is written only when the file is new or empty.
    """
    path = Path(path)
    header = not (append and path.exists() and path.stat().st_size > 0)
    with path.open("a" if append else "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(METRICS_HEADER)
        for m in rows:
            r = m.row()
            r["runtime_ms"] = f"{m.runtime_ms:.3f}"
            r["overhead"] = repr(m.overhead)
            w.writerow([r[h] for h in METRICS_HEADER])
    return path
