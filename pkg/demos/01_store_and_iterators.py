"""A tour of the tablet store: writes, splits, iterator stacks and compaction."""
# %%
from tabletblas import EntryBatch, FilterIterator, PLUS, SCAN, TabletStore, strict_upper
from tabletblas.kernels import ensure_combiner

store = TabletStore()
store.create_table("edges", splits=["m"])
print(store.tablet_extents("edges"))

# %% [markdown]
# Without a combiner the newest version of a key wins.

# %%
store.write("edges", EntryBatch.from_triples([("alice", "bob", 1), ("zoe", "yan", 2)]))
store.write("edges", EntryBatch.from_triples([("alice", "bob", 5)]))
print(store.read("edges").triples())

# %% [markdown]
# With a PLUS combiner, colliding writes are summed lazily: the raw tablet
# keeps every version until a compaction folds them.

# %%
store.create_table("counts")
ensure_combiner(store, "counts", PLUS)
for _ in range(3):
    store.write("counts", EntryBatch.from_triples([("a", "b", 1), ("b", "c", 2)]))
print("scan:", store.read("counts").triples())
print("raw entries before compaction:", store.raw_size("counts"))
store.compact("counts")
print("raw entries after compaction:", store.raw_size("counts"))

# %% [markdown]
# Scan-time iterators can be passed per read or attached to the table.

# %%
print(store.read("counts", iterators=[FilterIterator(strict_upper)]).triples())
store.attach_iterator("counts", SCAN, 30, FilterIterator(strict_upper))
print(store.iterators("counts", SCAN))
