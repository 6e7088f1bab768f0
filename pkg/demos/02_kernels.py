"""GraphBLAS-style kernels over tables, checked against the in-memory oracle."""
# %%
from tabletblas import (FilterIterator, Fusion, TabletStore, build_matrix, ewise_add,
                        extract_tuples, no_diagonal, reduce_kernel, table_mult)
from tabletblas.oracle import SparseMatrix, o_mxm, o_transpose

store = TabletStore()

# %% [markdown]
# table_mult computes AT' * B as an outer product: each row key shared by the
# two inputs contributes the cross product of its entries.

# %%
at = [("r1", "c1", 2), ("r1", "c2", 3), ("r2", "c2", 5)]
b = [("r1", "c1", 1), ("r2", "c1", 4)]
build_matrix(store, at, "AT")
build_matrix(store, b, "B")
res = table_mult(store, "AT", "B", "C")
print(extract_tuples(store, "C"), "partial products:", res.partial_products)
print(o_mxm(o_transpose(SparseMatrix.from_triples(at)), SparseMatrix.from_triples(b)).triples())

# %% [markdown]
# Fusion: filter the diagonal before anything is written. On K4 every one of
# the 24 partial products lands off the diagonal.

# %%
k4 = [(str(i), str(j), 1) for i in range(1, 5) for j in range(1, 5) if i != j]
build_matrix(store, k4, "K4", splits=["3"])
res = table_mult(store, "K4", "K4", "K4sq", fusion=Fusion(after_multiply=[FilterIterator(no_diagonal)]))
print(res.partial_products, res.entries_written, reduce_kernel(store, "K4sq"))

# %%
ewise_add(store, "AT", "B", "U")
print(extract_tuples(store, "U"))
