"""Observation/action space descriptors with the standard Gym-style surface.

Each space declares shapes, dtypes, and bounds, and implements ``contains``.
They are self-contained structural equivalents of the de-facto standard
space classes, so agent libraries that only rely on those attributes work
unchanged.
"""

from __future__ import annotations

import numpy as np


class Space:
    def contains(self, x) -> bool:
        raise NotImplementedError

    def __contains__(self, x) -> bool:
        return self.contains(x)


class Box(Space):
    """Bounded (possibly unbounded) numeric array of fixed shape."""

    def __init__(self, low, high, shape, dtype=np.float64):
        self.shape = tuple(shape)
        self.dtype = np.dtype(dtype)
        self.low = np.broadcast_to(np.asarray(low, dtype=self.dtype), self.shape)
        self.high = np.broadcast_to(np.asarray(high, dtype=self.dtype), self.shape)

    def contains(self, x) -> bool:
        arr = np.asarray(x)
        if arr.shape != self.shape:
            return False
        if self.dtype == np.bool_:
            return bool(np.isin(arr, (0, 1)).all())
        arr = arr.astype(np.float64)
        return bool(
            np.isfinite(arr[np.isfinite(self.low.astype(np.float64))]).all()
            and (arr >= self.low).all()
            and (arr <= self.high).all()
        )

    def __repr__(self):
        return f"Box(shape={self.shape}, dtype={self.dtype})"


class Discrete(Space):
    """Integers in [start, start + n)."""

    def __init__(self, n: int, start: int = 0):
        self.n = int(n)
        self.start = int(start)
        self.shape = ()
        self.dtype = np.dtype(np.int64)

    def contains(self, x) -> bool:
        try:
            value = int(x)
        except (TypeError, ValueError):
            return False
        return self.start <= value < self.start + self.n

    def __repr__(self):
        return f"Discrete({self.n}, start={self.start})"


class TupleSpace(Space):
    """Fixed-length product of sub-spaces."""

    def __init__(self, spaces):
        self.spaces = tuple(spaces)

    def contains(self, x) -> bool:
        try:
            items = tuple(x)
        except TypeError:
            return False
        return len(items) == len(self.spaces) and all(
            s.contains(v) for s, v in zip(self.spaces, items)
        )

    def __repr__(self):
        return f"Tuple({', '.join(map(repr, self.spaces))})"


class Sequence(Space):
    """Variable-length sequence of elements from one sub-space.

    Also accepts a stacked array whose leading axis enumerates elements,
    which is how variable-population observations are delivered.
    """

    def __init__(self, item_space: Space):
        self.item_space = item_space

    def contains(self, x) -> bool:
        if isinstance(x, np.ndarray) and isinstance(self.item_space, Box):
            return (
                x.ndim == len(self.item_space.shape) + 1
                and x.shape[0] >= 1
                and all(self.item_space.contains(row) for row in x)
            )
        try:
            items = list(x)
        except TypeError:
            return False
        return len(items) >= 1 and all(self.item_space.contains(v) for v in items)

    def __repr__(self):
        return f"Sequence({self.item_space!r})"


class DictSpace(Space):
    """Named product of sub-spaces."""

    def __init__(self, spaces: dict):
        self.spaces = dict(spaces)

    def contains(self, x) -> bool:
        if not isinstance(x, dict) or set(x) != set(self.spaces):
            return False
        return all(self.spaces[k].contains(v) for k, v in x.items())

    def __getitem__(self, key):
        return self.spaces[key]

    def __repr__(self):
        inner = ", ".join(f"{k}: {v!r}" for k, v in self.spaces.items())
        return f"Dict({inner})"
