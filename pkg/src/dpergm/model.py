"""ERGM terms, sufficient statistics and exact normalising constants."""
from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .graph import Graph, all_dyad_states, dyad_pairs, n_dyads
from .validation import check_vector

EDGES, GWESP, GWDEGREE, NODEMATCH = range(4)


@dataclass(frozen=True)
class Edges:
    kind = EDGES

    @property
    def label(self):
        return "edges"


@dataclass(frozen=True)
class Gwesp:
    """Geometrically weighted edgewise shared partners with fixed decay."""

    decay: float = 0.5
    kind = GWESP

    def __post_init__(self):
        if not self.decay >= 0:
            raise ValueError(f"gwesp decay must be non-negative, got {self.decay}")

    @property
    def label(self):
        return f"gwesp({self.decay:g})"


@dataclass(frozen=True)
class Gwdegree:
    """Geometrically weighted degree with fixed decay."""

    decay: float = 0.5
    kind = GWDEGREE

    def __post_init__(self):
        if not self.decay >= 0:
            raise ValueError(f"gwdegree decay must be non-negative, got {self.decay}")

    @property
    def label(self):
        return f"gwdegree({self.decay:g})"


@dataclass(frozen=True)
class Nodematch:
    """Number of edges whose endpoints share the value of ``attr``."""

    attr: str
    kind = NODEMATCH

    @property
    def label(self):
        return f"nodematch({self.attr})"


_TERM_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\(\s*([^()]*?)\s*\))?\s*$")


def _parse_term(text: str):
    m = _TERM_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse model term {text!r}")
    name, arg = m.group(1).lower(), m.group(2)
    if name == "edges":
        if arg:
            raise ValueError("edges takes no argument")
        return Edges()
    if name in ("gwesp", "gwdegree", "popularity"):
        decay = 0.5 if not arg else float(arg)
        return Gwesp(decay) if name == "gwesp" else Gwdegree(decay)
    if name == "nodematch":
        if not arg:
            raise ValueError("nodematch needs an attribute name")
        return Nodematch(arg)
    raise ValueError(f"unknown model term {name!r}")


class ModelSpec:
    """Ordered list of ERGM terms defining the statistic vector.

    Build from term objects or from a formula string such as
    ``"edges + gwesp(0.5) + gwdegree(0.5) + nodematch(drug)"``.
    ``popularity`` is accepted as an alias of ``gwdegree``.
    """

    def __init__(self, terms):
        if isinstance(terms, str):
            terms = [_parse_term(t) for t in terms.split("+")]
        terms = tuple(terms)
        if not terms:
            raise ValueError("model needs at least one term")
        self.terms = terms

    @classmethod
    def parse(cls, formula: str) -> "ModelSpec":
        return cls(formula)

    @property
    def q(self) -> int:
        return len(self.terms)

    @property
    def labels(self) -> list[str]:
        return [t.label for t in self.terms]

    @property
    def attributes(self) -> list[str]:
        return list(dict.fromkeys(t.attr for t in self.terms if t.kind == NODEMATCH))

    def __str__(self):
        return " + ".join(self.labels)

    def __repr__(self):
        return f"ModelSpec({str(self)!r})"

    def __eq__(self, other):
        return isinstance(other, ModelSpec) and self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def validate(self, g: Graph) -> None:
        missing = [a for a in self.attributes if a not in g.covariates]
        if missing:
            raise KeyError(
                f"model references covariates {missing} absent from graph "
                f"(have {sorted(g.covariates)})"
            )

    def compile(self, g: Graph) -> "CompiledModel":
        """Flatten the terms into arrays the sampling kernels understand."""
        self.validate(g)
        attrs = self.attributes
        kinds = np.array([t.kind for t in self.terms], dtype=np.int64)
        decays = np.array([getattr(t, "decay", 0.0) for t in self.terms], dtype=float)
        attr_idx = np.array(
            [attrs.index(t.attr) if t.kind == NODEMATCH else -1 for t in self.terms],
            dtype=np.int64,
        )
        codes = np.zeros((max(len(attrs), 1), g.n), dtype=np.int64)
        for a, name in enumerate(attrs):
            codes[a] = g.covariate_codes(name)
        return CompiledModel(kinds, decays, attr_idx, codes)


@dataclass(frozen=True)
class CompiledModel:
    kinds: np.ndarray
    decays: np.ndarray
    attr_idx: np.ndarray
    codes: np.ndarray


def _gw(counts, decay):
    """``e^decay * sum(1 - (1 - e^-decay)^count)`` over the last axis."""
    r = 1.0 - math.exp(-decay)
    return math.exp(decay) * (1.0 - np.power(r, counts)).sum(axis=-1)


def stats_dyads(dyads, n: int, spec: ModelSpec, covariates=None) -> np.ndarray:
    """Statistics for one dyad vector or a ``(M, N)`` stack of them.

    Computed from scratch (matrix products), independently of the
    incremental change statistics used by the sampler.
    """
    D = np.atleast_2d(np.asarray(dyads, dtype=bool))
    rows, cols = dyad_pairs(n)
    A = np.zeros((D.shape[0], n, n), dtype=np.int64)
    A[:, rows, cols] = D
    A[:, cols, rows] = D
    out = np.empty((D.shape[0], spec.q))
    shared = None
    for t, term in enumerate(spec.terms):
        if term.kind == EDGES:
            out[:, t] = D.sum(axis=1)
        elif term.kind == GWESP:
            if shared is None:
                shared = np.einsum("mik,mkj->mij", A, A)[:, rows, cols]
            # edges with zero shared partners contribute nothing
            out[:, t] = _gw(np.where(D, shared, 0), term.decay)
        elif term.kind == GWDEGREE:
            out[:, t] = _gw(A.sum(axis=2), term.decay)
        else:
            vals = np.asarray((covariates or {})[term.attr])
            match = vals[rows] == vals[cols]
            out[:, t] = (D & match).sum(axis=1)
    return out if np.ndim(dyads) > 1 else out[0]


def stats(g: Graph, spec: ModelSpec) -> np.ndarray:
    """Sufficient statistic vector ``g(x)``."""
    spec.validate(g)
    return stats_dyads(g.dyads, g.n, spec, g.covariates)


def change_stats(g: Graph, d: int, spec: ModelSpec) -> np.ndarray:
    """Change in the statistics from adding dyad ``d`` (others held fixed)."""
    if not 0 <= d < g.n_dyads:
        raise IndexError(f"dyad index {d} out of range [0, {g.n_dyads})")
    cm = spec.compile(g)
    adj = g.adjacency().astype(np.int64)
    sp = adj @ adj
    deg = adj.sum(axis=1)
    rows, cols = dyad_pairs(g.n)
    out = np.empty(spec.q)
    _kernels.change_stats(
        adj, sp, deg, rows[d], cols[d], cm.kinds, cm.decays, cm.attr_idx, cm.codes, out
    )
    return out


def change_stats_all(g: Graph, spec: ModelSpec) -> np.ndarray:
    """``(N, q)`` matrix of :func:`change_stats` for every dyad."""
    cm = spec.compile(g)
    adj = g.adjacency().astype(np.int64)
    sp = adj @ adj
    deg = adj.sum(axis=1)
    rows, cols = dyad_pairs(g.n)
    out = np.empty((g.n_dyads, spec.q))
    for d in range(g.n_dyads):
        _kernels.change_stats(
            adj, sp, deg, rows[d], cols[d], cm.kinds, cm.decays, cm.attr_idx, cm.codes, out[d]
        )
    return out


def log_unnormalized(theta, s) -> float:
    """``theta . s``."""
    s = np.asarray(s, dtype=float)
    theta = check_vector(theta, s.shape[-1])
    return float(theta @ s)


# ---------------------------------------------------------------------------
# exhaustive enumeration for small graphs

MAX_ENUM_NODES = 5


def _cov_key(covariates):
    return tuple(sorted((k, tuple(v)) for k, v in (covariates or {}).items()))


@functools.lru_cache(maxsize=32)
def _enumerated(spec: ModelSpec, n: int, cov_key) -> tuple[np.ndarray, np.ndarray]:
    D = all_dyad_states(n)
    G = stats_dyads(D, n, spec, dict(cov_key))
    D.setflags(write=False)
    G.setflags(write=False)
    return D, G


def enumerate_graphs(spec: ModelSpec, n: int, covariates=None):
    """All graphs on ``n <= 5`` nodes and their statistics.

    Returns
    -------
    dyads : (2**N, N) bool array
    stats : (2**N, q) float array
    """
    if n > MAX_ENUM_NODES:
        raise ValueError(
            f"exact enumeration limited to n <= {MAX_ENUM_NODES} "
            f"({2**n_dyads(MAX_ENUM_NODES)} graphs), got n={n}"
        )
    missing = [a for a in spec.attributes if a not in (covariates or {})]
    if missing:
        raise KeyError(f"covariates {missing} required by the model are missing")
    return _enumerated(spec, n, _cov_key(covariates))


def log_normalizer_exact(theta, spec: ModelSpec, n: int, covariates=None) -> float:
    """``log sum_x exp(theta . g(x))`` by enumerating every graph on ``n`` nodes."""
    theta = check_vector(theta, spec.q)
    _, G = enumerate_graphs(spec, n, covariates)
    return float(logsumexp(G @ theta))


def exact_probabilities(theta, spec: ModelSpec, n: int, covariates=None) -> np.ndarray:
    """ERGM probability of every enumerated graph (row order of
    :func:`enumerate_graphs`)."""
    theta = check_vector(theta, spec.q)
    _, G = enumerate_graphs(spec, n, covariates)
    lp = G @ theta
    return np.exp(lp - logsumexp(lp))
