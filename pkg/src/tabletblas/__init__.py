"""Sparse graph kernels computed inside a tablet-partitioned sorted store.

Tables hold ``(row, family, qualifier, timestamp) -> value`` entries split
into tablets by row. Kernels configure iterator stacks over those tables:
matrix multiply streams outer products into a destination table whose
combiner sums them lazily, and the Jaccard and k-truss algorithms are
built from fused kernels.
"""
from .batch import Entry, EntryBatch, Key, RowRange
from .errors import (CollisionError, ConfigurationError, DataConsistencyError,
                     DataFormatError, InternalOrderError, IteratorFailure, NameConflictError,
                     NotFoundError, ParameterError, ResourceError, TabletError, ValidationError)
from .iterators import (ApplyIterator, BlockIterator, Combiner, EntryStream, FilterIterator,
                        IteratorDescriptor, Versioning, build_iterator, column_ranges,
                        drop_even, entry_predicate, no_diagonal, register_iterator,
                        strict_lower, strict_upper, truss_threshold)
from .ops import (IDENTITY, MAX, MAX_PLUS, MIN, PLUS, PLUS_TIMES, SET_ONE, TIMES,
                  TWO_IF_NONZERO, BinaryOp, SemiringOps, UnaryOp)
from .store import COMPACTION, SCAN, TabletStore
from .twotable import (NnzCount, OuterProduct, PartialResult, Reducer, RowMultiply,
                       ThresholdCount, ValueSet, remote_source, remote_write, self_source,
                       two_table_ewise, two_table_row)
from .kernels import (Fusion, KernelResult, apply_kernel, assign, build_matrix, ewise_add,
                      ewise_mult, extract, extract_tuples, prefix_rows, reduce_kernel,
                      table_mult, transpose_kernel)
from .algorithms import AlgorithmMetrics, compute_degrees, jaccard, ktruss, validate_adjacency
from .genbench import GenParams, Metrics, emit_metrics, generate, run_experiment, symmetrize, verify

__version__ = "0.1.0"
