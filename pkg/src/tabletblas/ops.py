"""User-supplied value operations: the ⊗, ⊕ and f of a semiring.

Operations are vectorized over numpy arrays. Each carries a registry name so
iterator descriptors can refer to it in serialized form. Plain scalar Python
callables are accepted through :meth:`BinaryOp.from_scalar` and
:meth:`UnaryOp.from_scalar`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "BinaryOp", "UnaryOp", "SemiringOps",
    "PLUS", "TIMES", "MAX", "MIN", "TWO_IF_NONZERO",
    "IDENTITY", "SET_ONE", "scale", "offset",
    "PLUS_TIMES", "MAX_PLUS",
    "binary_op", "unary_op", "register_binary_op", "register_unary_op",
    "check_commutative",
]


def _numeric(arr) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.dtype != object:
        return arr
    items = arr.tolist()
    if all(isinstance(v, (int, np.integer)) and not isinstance(v, bool) for v in items):
        return np.array(items, dtype=np.int64)
    return np.array(items, dtype=np.float64)


class BinaryOp:
    """A binary value function, optionally backed by a numpy ufunc.

    When ``ufunc`` is given, group folds use ``ufunc.reduceat``; otherwise
    the fold is a Python loop over each group.
    """

    def __init__(self, name: str, func: Callable, ufunc: np.ufunc | None = None,
                 options: Mapping[str, str] | None = None):
        self.name = name
        self._func = func
        self.ufunc = ufunc
        self.options = dict(options or {})

    @classmethod
    def from_scalar(cls, name: str, fn: Callable) -> "BinaryOp":
        vec = np.frompyfunc(fn, 2, 1)
        return cls(name, lambda x, y: _numeric(vec(x, y)))

    def __call__(self, x, y):
        return self._func(x, y)

    def reduce_groups(self, values: np.ndarray, starts: np.ndarray) -> np.ndarray:
        """Fold ``values`` over the contiguous groups beginning at ``starts``."""
        if len(starts) == 0:
            return values[:0]
        if self.ufunc is not None:
            return self.ufunc.reduceat(values, starts)
        ends = np.append(starts[1:], len(values))
        out = []
        for s, e in zip(starts.tolist(), ends.tolist()):
            acc = values[s]
            for v in values[s + 1:e]:
                acc = self._func(np.asarray(acc), np.asarray(v))
            out.append(acc.item() if hasattr(acc, "item") else acc)
        return _numeric(np.array(out, dtype=object))

    def __repr__(self):
        return f"BinaryOp({self.name!r})"


class UnaryOp:
    def __init__(self, name: str, func: Callable,
                 options: Mapping[str, str] | None = None):
        self.name = name
        self._func = func
        self.options = dict(options or {})

    @classmethod
    def from_scalar(cls, name: str, fn: Callable) -> "UnaryOp":
        vec = np.frompyfunc(fn, 1, 1)
        return cls(name, lambda x: _numeric(vec(x)))

    def __call__(self, x):
        return self._func(x)

    def __repr__(self):
        return f"UnaryOp({self.name!r}, {self.options})"


def _two_if_nonzero(x, y):
    return np.where((np.asarray(x) != 0) & (np.asarray(y) != 0), 2, 0).astype(np.int64)


PLUS = BinaryOp("plus", np.add, np.add)
TIMES = BinaryOp("times", np.multiply, np.multiply)
MAX = BinaryOp("max", np.maximum, np.maximum)
MIN = BinaryOp("min", np.minimum, np.minimum)
# k-truss multiply: every pair of nonzero entries contributes exactly 2
TWO_IF_NONZERO = BinaryOp("two_if_nonzero", _two_if_nonzero)

IDENTITY = UnaryOp("identity", lambda x: x)
# zero norm: nonzero values become 1
SET_ONE = UnaryOp("set_one", lambda x: (np.asarray(x) != 0).astype(np.int64))


def scale(factor) -> UnaryOp:
    return UnaryOp("scale", lambda x: x * factor, {"factor": str(factor)})


def offset(amount) -> UnaryOp:
    return UnaryOp("offset", lambda x: x + amount, {"amount": str(amount)})


@dataclass(frozen=True)
class SemiringOps:
    """⊕ (``add``), ⊗ (``multiply``) and a unary ``apply`` f."""

    add: BinaryOp
    multiply: BinaryOp
    apply: UnaryOp = field(default=IDENTITY)


PLUS_TIMES = SemiringOps(PLUS, TIMES)
MAX_PLUS = SemiringOps(MAX, PLUS)


_BINARY: dict[str, Callable[[Mapping[str, str]], BinaryOp]] = {
    op.name: (lambda opts, op=op: op) for op in (PLUS, TIMES, MAX, MIN, TWO_IF_NONZERO)
}


def _num(text: str):
    from .values import parse_value
    return parse_value(text)


_UNARY: dict[str, Callable[[Mapping[str, str]], UnaryOp]] = {
    "identity": lambda opts: IDENTITY,
    "set_one": lambda opts: SET_ONE,
    "scale": lambda opts: scale(_num(opts["factor"])),
    "offset": lambda opts: offset(_num(opts["amount"])),
}


def register_binary_op(op: BinaryOp) -> BinaryOp:
    """Make ``op`` resolvable by name from iterator descriptors."""
    _BINARY[op.name] = lambda opts, op=op: op
    return op


def register_unary_op(name: str, factory: Callable[[Mapping[str, str]], UnaryOp]):
    _UNARY[name] = factory
    return factory


def binary_op(name: str, options: Mapping[str, str] | None = None) -> BinaryOp:
    try:
        return _BINARY[name](options or {})
    except KeyError:
        raise ConfigurationError(f"unknown binary operation {name!r}") from None


def unary_op(name: str, options: Mapping[str, str] | None = None) -> UnaryOp:
    try:
        return _UNARY[name](options or {})
    except KeyError as exc:
        raise ConfigurationError(f"unknown unary operation {name!r} ({exc})") from None


_SENTINELS = [(2, 3), (3, -7), (5, 11), (-4, 9), (1.5, 4.0)]


def check_commutative(op: BinaryOp) -> None:
    """Reject an obviously non-commutative ⊕ before it reaches a combiner.

    Combiners fold colliding versions in whatever order they meet them, so a
    ⊕ that depends on argument order gives results that vary with tablet
    layout and compaction timing.
    """
    for x, y in _SENTINELS:
        a = np.asarray([x]); b = np.asarray([y])
        try:
            xy, yx = op(a, b), op(b, a)
        except Exception:  # noqa: BLE001 - ops may reject floats
            continue
        if not np.array_equal(np.asarray(xy), np.asarray(yx)):
            raise ConfigurationError(
                f"⊕ operation {op.name!r} is not commutative: "
                f"{x}⊕{y}={np.asarray(xy)[0]} but {y}⊕{x}={np.asarray(yx)[0]}")
