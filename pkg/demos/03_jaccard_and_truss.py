"""Jaccard coefficients and k-truss on a small graph, next to brute force."""
# %%
import random

from tabletblas import TabletStore, build_matrix, compute_degrees, extract_tuples, jaccard, ktruss
from tabletblas.oracle import EdgeSet, brute_jaccard, brute_truss

rng = random.Random(1)
ids = [f"{i:02d}" for i in range(30)]
edges = EdgeSet((ids[i], ids[j]) for i in range(30) for j in range(i + 1, 30) if rng.random() < 0.2)
print(len(edges), "edges")

store = TabletStore()
build_matrix(store, edges.triples(), "A", splits=["15"])

# %% [markdown]
# Jaccard: one fused multiply accumulates common-neighbor counts, and a
# scan-time apply divides by the union size using a broadcast degree table.

# %%
compute_degrees(store, "A", "deg")
_, m = jaccard(store, "A", "deg", "J")
got = {(r, c): v for r, c, v in extract_tuples(store, "J")}
want = brute_jaccard(edges)
print("pairs:", len(got), "max error:", max(abs(got[k] - want[k]) for k in want))
print("partial products:", m.partial_products, "overhead:", m.entries_written / m.nnz_output)

# %% [markdown]
# k-truss: repeat A + 2*(A*A) with the diagonal dropped, keep odd entries whose
# triangle count reaches k-2, reset them to one, until nothing changes.

# %%
for k in (3, 4, 5):
    _, m = ktruss(store, "A", k, f"T{k}")
    t = EdgeSet.from_triples(extract_tuples(store, f"T{k}"))
    print(k, len(t), "edges,", m.iterations, "passes, matches brute force:", t == brute_truss(edges, k))
