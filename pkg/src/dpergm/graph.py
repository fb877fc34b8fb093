"""Simple undirected graphs with categorical node covariates.

A graph on ``n`` nodes is stored as a boolean vector over its
``n(n-1)/2`` dyads. Dyads are the pairs ``(i, j)`` with ``i < j`` enumerated
in row-major order, i.e. the order of ``numpy.triu_indices(n, 1)``.
"""
from __future__ import annotations

import csv
import functools
import io
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


def n_dyads(n: int) -> int:
    return n * (n - 1) // 2


@functools.lru_cache(maxsize=64)
def _pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(n, 1)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def dyad_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Return the ``(rows, cols)`` endpoint arrays of all dyads, in index order."""
    return _pairs(n)


def dyad_index(i: int, j: int, n: int) -> int:
    """Flat index of the unordered pair ``{i, j}``."""
    if i == j:
        raise ValueError(f"self-loop ({i}, {j}) is not a dyad")
    if i > j:
        i, j = j, i
    if i < 0 or j >= n:
        raise IndexError(f"pair ({i}, {j}) out of range for n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def dyad_pair(k: int, n: int) -> tuple[int, int]:
    """Inverse of :func:`dyad_index`."""
    _check_dyad(k, n)
    rows, cols = _pairs(n)
    return int(rows[k]), int(cols[k])


def _check_dyad(k: int, n: int) -> None:
    if not 0 <= k < n_dyads(n):
        raise IndexError(f"dyad index {k} out of range [0, {n_dyads(n)})")


class Graph:
    """Immutable simple undirected graph with categorical covariates.

    Parameters
    ----------
    n : int
        Number of nodes, labelled ``0 .. n-1``.
    edges : iterable of (int, int), optional
        Unordered node pairs. Duplicates and either orientation are accepted;
        self-loops are rejected.
    covariates : mapping of str to sequence, optional
        Each value must have length ``n``; entries are stored as strings.
    """

    __slots__ = ("n", "_dyads", "covariates", "_degree")

    def __init__(
        self,
        n: int,
        edges: Iterable[tuple[int, int]] = (),
        covariates: Mapping[str, Sequence] | None = None,
    ):
        n = int(n)
        if n < 1:
            raise ValueError(f"node count must be positive, got {n}")
        bits = np.zeros(n_dyads(n), dtype=bool)
        for i, j in edges:
            bits[dyad_index(int(i), int(j), n)] = True
        self._init(n, bits, covariates)

    def _init(self, n, bits, covariates):
        self.n = n
        bits.setflags(write=False)
        self._dyads = bits
        cov = {}
        for name, values in (covariates or {}).items():
            values = tuple(str(v) for v in values)
            if len(values) != n:
                raise ValueError(
                    f"covariate {name!r} has length {len(values)}, expected {n}"
                )
            cov[str(name)] = values
        self.covariates = cov
        self._degree = None

    @classmethod
    def from_dyads(cls, n: int, dyads, covariates=None) -> "Graph":
        """Build a graph from a length ``n(n-1)/2`` 0/1 vector."""
        bits = np.asarray(dyads).astype(bool, copy=True).ravel()
        if bits.shape[0] != n_dyads(n):
            raise ValueError(
                f"dyad vector has length {bits.shape[0]}, expected {n_dyads(n)}"
            )
        g = cls.__new__(cls)
        g._init(int(n), bits, covariates)
        return g

    @classmethod
    def from_adjacency(cls, adjacency, covariates=None) -> "Graph":
        """Build a graph from a square matrix; any nonzero entry in either
        triangle is an edge and the diagonal is ignored."""
        a = np.asarray(adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency matrix must be square")
        a = (a != 0) | (a.T != 0)
        rows, cols = _pairs(a.shape[0])
        return cls.from_dyads(a.shape[0], a[rows, cols], covariates)

    @property
    def dyads(self) -> np.ndarray:
        """Read-only boolean dyad vector."""
        return self._dyads

    @property
    def n_dyads(self) -> int:
        return self._dyads.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self._dyads.sum())

    @property
    def edges(self) -> list[tuple[int, int]]:
        rows, cols = _pairs(self.n)
        idx = np.flatnonzero(self._dyads)
        return [(int(rows[k]), int(cols[k])) for k in idx]

    @property
    def degree(self) -> np.ndarray:
        if self._degree is None:
            rows, cols = _pairs(self.n)
            deg = np.bincount(rows[self._dyads], minlength=self.n)
            deg += np.bincount(cols[self._dyads], minlength=self.n)
            deg.setflags(write=False)
            self._degree = deg
        return self._degree

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.uint8)
        rows, cols = _pairs(self.n)
        a[rows, cols] = self._dyads
        a[cols, rows] = self._dyads
        return a

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self._dyads[dyad_index(i, j, self.n)])

    def dyad_state(self, d: int) -> int:
        _check_dyad(d, self.n)
        return int(self._dyads[d])

    def toggle(self, d: int) -> "Graph":
        _check_dyad(d, self.n)
        bits = self._dyads.copy()
        bits[d] = not bits[d]
        return self.with_dyads(bits)

    def with_dyads(self, dyads) -> "Graph":
        """Same node set and covariates, new edge set."""
        g = Graph.from_dyads(self.n, dyads)
        g.covariates = self.covariates
        return g

    def covariate_codes(self, name: str) -> np.ndarray:
        """Integer category codes for covariate ``name``."""
        if name not in self.covariates:
            raise KeyError(f"unknown covariate {name!r}; have {sorted(self.covariates)}")
        _, codes = np.unique(np.array(self.covariates[name], dtype=object), return_inverse=True)
        return codes.astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self._dyads, other._dyads)
            and self.covariates == other.covariates
        )

    def __hash__(self):
        return hash((self.n, self._dyads.tobytes()))

    def __repr__(self):
        cov = f", covariates={sorted(self.covariates)}" if self.covariates else ""
        return f"Graph(n={self.n}, m={self.n_edges}{cov})"


def empty_graph(n: int, covariates=None) -> Graph:
    return Graph(n, (), covariates)


def complete_graph(n: int, covariates=None) -> Graph:
    return Graph.from_dyads(n, np.ones(n_dyads(n), dtype=bool), covariates)


def hamming(a: Graph, b: Graph) -> int:
    """Number of dyads on which two graphs differ."""
    if a.n != b.n:
        raise ValueError(f"node counts differ: {a.n} != {b.n}")
    return int(np.count_nonzero(a.dyads != b.dyads))


def toggle(g: Graph, d: int) -> Graph:
    return g.toggle(d)


def dyad_state(g: Graph, d: int) -> int:
    return g.dyad_state(d)


def all_dyad_states(n: int) -> np.ndarray:
    """Every graph on ``n`` nodes as rows of a ``(2**N, N)`` boolean matrix.

    Row ``r`` has dyad ``k`` set iff bit ``k`` of ``r`` is set.
    """
    N = n_dyads(n)
    if N > 20:
        raise ValueError(f"refusing to enumerate 2**{N} graphs")
    codes = np.arange(2**N, dtype=np.int64)[:, None]
    return ((codes >> np.arange(N)) & 1).astype(bool)


# ---------------------------------------------------------------------------
# File formats


def _parse_pairs(text):
    n = None
    pairs = []
    for lineno, raw in enumerate(io.StringIO(text), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "n" and n is None and not pairs:
            if len(fields) != 2:
                raise ValueError(f"line {lineno}: malformed header {raw.strip()!r}")
            n = int(fields[1])
            continue
        if len(fields) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {raw.strip()!r}")
        pairs.append((fields[0], fields[1]))
    if n is None:
        raise ValueError("edge list has no 'n <count>' header line")
    return n, pairs


def read_covariates(path) -> tuple[list[str], dict[str, list[str]]]:
    """Read a delimited covariate table.

    The first column holds node labels and the header row names the
    remaining columns. Comma, tab and plain whitespace delimiters are
    recognised from the header line.

    Returns
    -------
    labels : list of str
    columns : dict of str to list of str
    """
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty covariate file")
    header = lines[0]
    if "," in header:
        rows = list(csv.reader(lines))
    elif "\t" in header:
        rows = list(csv.reader(lines, delimiter="\t"))
    else:
        rows = [ln.split() for ln in lines]
    names = [h.strip() for h in rows[0][1:]]
    labels, columns = [], {name: [] for name in names}
    for row in rows[1:]:
        if len(row) != len(names) + 1:
            raise ValueError(f"{path}: row {row!r} does not match header {rows[0]!r}")
        labels.append(row[0].strip())
        for name, value in zip(names, row[1:]):
            columns[name].append(value.strip())
    return labels, columns


def read_edgelist(path, covariates_path=None) -> tuple[Graph, list[str]]:
    """Read a graph from the edge-list format, optionally with covariates.

    Node labels may be arbitrary tokens. They are mapped to ``0 .. n-1`` in
    the order of the covariate table when one is given. Otherwise integer
    labels are taken as 0-based node ids, or 1-based when they lie in
    ``[1, n]`` and use ``n``; other tokens are numbered by first appearance.

    Returns
    -------
    graph : Graph
    labels : list of str
        ``labels[k]`` is the original label of node ``k``.
    """
    n, pairs = _parse_pairs(Path(path).read_text())
    columns = {}
    if covariates_path is not None:
        labels, columns = read_covariates(covariates_path)
        if len(labels) != n:
            raise ValueError(
                f"covariate table lists {len(labels)} nodes, edge list declares n={n}"
            )
    else:
        tokens = [t for p in pairs for t in p]
        if tokens and all(t.isdigit() for t in tokens):
            ids = [int(t) for t in tokens]
            if max(ids) < n:
                base = 0
            elif min(ids) >= 1 and max(ids) <= n:
                base = 1
            else:
                raise ValueError(f"integer node label {max(ids)} out of range for n={n}")
            labels = [str(k + base) for k in range(n)]
            pairs = [(str(int(a)), str(int(b))) for a, b in pairs]
        else:
            labels = list(dict.fromkeys(tokens))
            labels += [f"_node{k}" for k in range(len(labels), n)]
    index = {lab: k for k, lab in enumerate(labels)}
    if len(index) != len(labels):
        raise ValueError("duplicate node labels")
    if len(index) > n:
        raise ValueError(f"edge list mentions {len(index)} distinct nodes, header says n={n}")
    try:
        edges = [(index[a], index[b]) for a, b in pairs]
    except KeyError as exc:
        raise ValueError(f"edge list references unknown node {exc.args[0]!r}") from None
    return Graph(n, edges, columns), labels


def write_edgelist(g: Graph, path, comment: str | None = None) -> None:
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"n {g.n}")
    lines.extend(f"{i} {j}" for i, j in g.edges)
    Path(path).write_text("\n".join(lines) + "\n")


def write_covariates(g: Graph, path, labels: Sequence[str] | None = None) -> None:
    labels = list(labels) if labels is not None else [str(k) for k in range(g.n)]
    names = sorted(g.covariates)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", *names])
        for k in range(g.n):
            w.writerow([labels[k], *(g.covariates[c][k] for c in names)])


def read_adjacency_matrix(path) -> Graph:
    """Read a whitespace-separated square 0/1 (or tie-strength) matrix.

    Nonzero entries in either triangle become undirected edges. This is the
    layout of the published Teenage Friends and Lifestyle Study excerpts
    (``s50-network1.dat`` and friends).
    """
    a = np.loadtxt(path, ndmin=2)
    return Graph.from_adjacency(a)


def load_s50(
    network_path,
    covariate_paths: Mapping[str, str] | None = None,
    wave: int = 0,
    thresholds: Mapping[str, float] | None = None,
) -> Graph:
    """Assemble a graph from s50-style ``.dat`` files.

    Each covariate file is a matrix with one row per node and one column per
    wave; column ``wave`` is used. When a threshold is given for a covariate
    the value is dichotomised as ``"1"`` if it exceeds the threshold, else
    ``"0"``.
    """
    g = read_adjacency_matrix(network_path)
    cov = {}
    thresholds = thresholds or {}
    for name, p in (covariate_paths or {}).items():
        col = np.loadtxt(p, ndmin=2)[:, wave]
        if name in thresholds:
            cov[name] = ["1" if v > thresholds[name] else "0" for v in col]
        else:
            cov[name] = [f"{v:g}" for v in col]
    return Graph.from_dyads(g.n, g.dyads, cov)
