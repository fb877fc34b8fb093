"""Input validation helpers shared by the estimators."""
from __future__ import annotations

import numbers

import numpy as np

from .graph import Graph


def check_graph(X, n: int | None = None, name: str = "graph") -> Graph:
    """Coerce ``X`` to a :class:`Graph`.

    Accepts a ``Graph`` or a square adjacency array. ``n``, when given, is
    the required node count.
    """
    if isinstance(X, Graph):
        g = X
    else:
        try:
            g = Graph.from_adjacency(np.asarray(X))
        except (ValueError, TypeError) as exc:
            raise TypeError(
                f"{name} must be a Graph or a square adjacency matrix"
            ) from exc
    if n is not None and g.n != n:
        raise ValueError(f"{name} has {g.n} nodes, expected {n}")
    return g


def check_same_size(a: Graph, b: Graph) -> None:
    if a.n != b.n:
        raise ValueError(f"node counts differ: {a.n} != {b.n}")


def check_vector(theta, q: int, name: str = "theta") -> np.ndarray:
    """Return ``theta`` as a finite float vector of length ``q``."""
    v = np.asarray(theta, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1 or v.shape[0] != q:
        raise ValueError(f"{name} must have length {q}, got shape {np.shape(theta)}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries: {v}")
    return v


def check_probability(p, name: str, low_open=True, high_open=False) -> float:
    if not isinstance(p, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(p).__name__}")
    p = float(p)
    lo_ok = p > 0 if low_open else p >= 0
    hi_ok = p < 1 if high_open else p <= 1
    if not (lo_ok and hi_ok):
        lo = "(" if low_open else "["
        hi = ")" if high_open else "]"
        raise ValueError(f"{name}={p} outside {lo}0, 1{hi}")
    return p


def check_positive_int(v, name: str, minimum: int = 1) -> int:
    if isinstance(v, bool) or not isinstance(v, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {v!r}")
    if v < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {v}")
    return int(v)
