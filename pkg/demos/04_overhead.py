"""Entries written by the in-store engine relative to an in-memory baseline.

The baseline writes only the final result, so the ratio is entries written
over result nnz. Jaccard stays near a constant factor; k-truss grows with
the graph because every pass rewrites A*A.
"""
# %%
from tabletblas.genbench import GenParams, run_experiment

for scale in (8, 9, 10):
    p = GenParams(scale)
    j = run_experiment("jaccard", p)
    t = run_experiment("ktruss", p, k=3)
    print(f"scale {scale}: jaccard {j.overhead:6.2f}x  3-truss {t.overhead:7.2f}x "
          f"({t.iterations} passes)")

# %% [markdown]
# The same numbers are available from the command line:
#
#     graphbench run --alg jaccard --scale 10 --metrics out.csv
#     graphbench verify --alg ktruss --scale 10 --tablets 2
