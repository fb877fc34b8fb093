"""Metropolis-Hastings sampling of graphs from an ERGM."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import _kernels
from .graph import Graph, dyad_pairs, empty_graph
from .model import ModelSpec, change_stats, stats, stats_dyads
from .validation import check_vector

PROPOSALS = ("tnt", "toggle")

# uniforms are drawn in blocks of at most this many steps
_BLOCK_STEPS = 1 << 20


@dataclass(frozen=True)
class SamplerConfig:
    """Monte Carlo settings.

    ``burn_in`` and ``interval`` default to ``10 N`` and ``N`` steps for a
    graph with ``N`` dyads when left as ``None``.
    """

    burn_in: int | None = None
    interval: int | None = None
    n_draws: int = 1000
    proposal: str = "tnt"
    edge_prob: float = 0.5
    seed: int | None = None
    debug: bool = False

    def __post_init__(self):
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.interval is not None and self.interval < 1:
            raise ValueError(f"interval must be >= 1, got {self.interval}")
        if self.n_draws < 1:
            raise ValueError(f"n_draws must be >= 1, got {self.n_draws}")
        if self.proposal not in PROPOSALS:
            raise ValueError(f"proposal must be one of {PROPOSALS}, got {self.proposal!r}")
        if self.proposal == "tnt" and not 0 < self.edge_prob < 1:
            raise ValueError(f"edge_prob must lie in (0, 1), got {self.edge_prob}")

    def resolved(self, N: int) -> "SamplerConfig":
        return replace(
            self,
            burn_in=10 * N if self.burn_in is None else self.burn_in,
            interval=N if self.interval is None else self.interval,
        )

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class SampleSet:
    """Retained draws of one or more chains.

    Attributes
    ----------
    stats : (M, q) array
    dyads : (M, N) bool array or None
        Retained graphs, kept when privacy weights are needed.
    theta : (q,) array
        Parameter the draws target.
    config : SamplerConfig
    final : Graph
        Last state of the (last) chain, useful as a warm start.
    acceptance_rate : float
    """

    stats: np.ndarray
    dyads: np.ndarray | None
    theta: np.ndarray
    config: SamplerConfig
    final: Graph
    acceptance_rate: float

    def __len__(self):
        return self.stats.shape[0]

    @classmethod
    def concatenate(cls, sets) -> "SampleSet":
        """Merge chains in the order given (callers sort by seed)."""
        sets = list(sets)
        dyads = None
        if all(s.dyads is not None for s in sets):
            dyads = np.concatenate([s.dyads for s in sets])
        steps = [len(s) for s in sets]
        rate = float(np.average([s.acceptance_rate for s in sets], weights=steps))
        return cls(
            np.concatenate([s.stats for s in sets]), dyads, sets[0].theta,
            sets[0].config, sets[-1].final, rate,
        )

    def to_table(self, path, labels) -> None:
        """Write one row per draw: draw index then the statistics."""
        with open(path, "w") as fh:
            fh.write(",".join(["draw", *labels]) + "\n")
            for k, row in enumerate(self.stats):
                fh.write(",".join([str(k), *(repr(float(v)) for v in row)]) + "\n")


class ChainState:
    """Mutable chain state owned by a single chain."""

    def __init__(self, g: Graph, spec: ModelSpec):
        self.n = g.n
        self.spec = spec
        self.model = spec.compile(g)
        self.covariates = g.covariates
        self.rows, self.cols = (np.ascontiguousarray(a, dtype=np.int64) for a in dyad_pairs(g.n))
        self.adj = g.adjacency().astype(np.int64)
        self.sp = self.adj @ self.adj
        self.deg = self.adj.sum(axis=1)
        N = g.n_dyads
        self.elist = np.zeros(N, dtype=np.int64)
        self.pos = np.full(N, -1, dtype=np.int64)
        idx = np.flatnonzero(g.dyads)
        self.elist[: idx.size] = idx
        self.pos[idx] = np.arange(idx.size)
        self.m = int(idx.size)
        self.cur = stats(g, spec).astype(float)

    def graph(self) -> Graph:
        d = self.adj[self.rows, self.cols].astype(bool)
        return Graph.from_dyads(self.n, d, self.covariates)

    def run(self, theta, uniforms, edge_prob, interval=0, out_stats=None,
            out_dyads=None, dyad_offset=None):
        cm = self.model
        if dyad_offset is None:
            dyad_offset = np.zeros(self.rows.shape[0])
        keep = out_dyads is not None
        if out_stats is None:
            out_stats = np.empty((0, self.spec.q))
        if out_dyads is None:
            out_dyads = np.empty((0, 0), dtype=np.bool_)
        self.m, acc = _kernels.run_chain(
            self.adj, self.sp, self.deg, self.elist, self.pos, self.m,
            self.rows, self.cols, theta, cm.kinds, cm.decays, cm.attr_idx,
            cm.codes, dyad_offset, self.cur, uniforms, float(edge_prob), int(interval),
            out_stats, out_dyads, keep,
        )
        return acc


def _edge_prob(cfg: SamplerConfig) -> float:
    return cfg.edge_prob if cfg.proposal == "tnt" else 0.0


def proposal_moves(g: Graph, theta, spec: ModelSpec, proposal="tnt", edge_prob=0.5):
    """Every dyad's proposal and acceptance probability from state ``g``.

    Returns ``(proposal_prob, accept_prob)``, each of length ``N``; the
    probability of moving to ``toggle(g, d)`` is their product. Used to
    build exact transition kernels on small graphs.
    """
    theta = check_vector(theta, spec.q)
    N, m = g.n_dyads, g.n_edges
    p = edge_prob if proposal == "tnt" else 0.0
    on = g.dyads
    prop = np.empty(N)
    acc = np.empty(N)
    for d in range(N):
        dot = float(theta @ change_stats(g, d, spec))
        log_ratio = -dot if on[d] else dot
        if p > 0:
            if on[d]:
                q_fwd = p / m + (1 - p) / N
                q_rev = (1 - p) / N if m > 1 else 1 / N
            else:
                q_fwd = (1 - p) / N if m > 0 else 1 / N
                q_rev = p / (m + 1) + (1 - p) / N
            log_ratio += math.log(q_rev / q_fwd)
        else:
            q_fwd = 1 / N
        prop[d] = q_fwd
        acc[d] = 1.0 if log_ratio >= 0 else math.exp(log_ratio)
    return prop, acc


def mh_step(g: Graph, theta, spec: ModelSpec, rng, proposal="tnt", edge_prob=0.5) -> Graph:
    """One Metropolis-Hastings transition from ``g``."""
    theta = check_vector(theta, spec.q)
    state = ChainState(g, spec)
    rng = np.random.default_rng(rng)
    state.run(theta, rng.random((1, 3)), edge_prob if proposal == "tnt" else 0.0)
    return state.graph()


def sample(
    theta0,
    spec: ModelSpec,
    start: Graph,
    cfg: SamplerConfig | None = None,
    keep_graphs: bool = False,
    dyad_offset=None,
) -> SampleSet:
    """Draw ``cfg.n_draws`` graphs from the ERGM at ``theta0``.

    Runs ``burn_in`` steps from ``start`` and then retains the state every
    ``interval`` steps. Deterministic given ``cfg.seed``. ``dyad_offset``
    tilts the target by a per-dyad log factor (see
    :func:`sample_conditional`).
    """
    cfg = (cfg or SamplerConfig()).resolved(start.n_dyads)
    theta0 = check_vector(theta0, spec.q)
    rng = np.random.default_rng(cfg.seed)
    state = ChainState(start, spec)
    ep = _edge_prob(cfg)
    M, q, N = cfg.n_draws, spec.q, start.n_dyads
    if dyad_offset is not None:
        dyad_offset = np.ascontiguousarray(dyad_offset, dtype=float)

    accepted = 0
    left = cfg.burn_in
    while left > 0:
        k = min(left, _BLOCK_STEPS)
        accepted += state.run(theta0, rng.random((k, 3)), ep, dyad_offset=dyad_offset)
        left -= k

    out_stats = np.empty((M, q))
    out_dyads = np.empty((M, N), dtype=np.bool_) if keep_graphs else None
    per_block = max(1, _BLOCK_STEPS // cfg.interval)
    done = 0
    while done < M:
        k = min(per_block, M - done)
        accepted += state.run(
            theta0, rng.random((k * cfg.interval, 3)), ep, cfg.interval,
            out_stats[done:done + k],
            None if out_dyads is None else out_dyads[done:done + k],
            dyad_offset,
        )
        done += k
    if cfg.debug:
        check = stats(state.graph(), spec)
        if not np.allclose(check, state.cur, atol=1e-8):
            raise AssertionError(f"incremental statistics drifted: {state.cur} vs {check}")
        if out_dyads is not None:
            full = stats_dyads(out_dyads, start.n, spec, start.covariates)
            if not np.allclose(full, out_stats, atol=1e-8):
                raise AssertionError("retained statistics disagree with recomputation")
    total = cfg.burn_in + M * cfg.interval
    return SampleSet(
        out_stats, out_dyads, theta0, cfg, state.graph(),
        accepted / total if total else 0.0,
    )


def privacy_offsets(y: Graph, params) -> np.ndarray:
    """Per-dyad ``log P(y_d | x_d = 1) - log P(y_d | x_d = 0)``."""
    table = params.log_table()
    yd = y.dyads.astype(int)
    with np.errstate(invalid="ignore"):
        return table[1, yd] - table[0, yd]


def sample_conditional(theta0, spec, y: Graph, params, cfg=None, keep_graphs=False) -> SampleSet:
    """Draw from ``P(X = x | Y = y)``, proportional to
    ``exp(theta0 . g(x)) P(y | x)``, starting at ``y``."""
    return sample(theta0, spec, y, cfg, keep_graphs, privacy_offsets(y, params))


def sample_chains(theta0, spec, start, cfg, seeds, keep_graphs=False) -> SampleSet:
    """Run one chain per seed and merge the draws in seed order."""
    sets = [
        sample(theta0, spec, start, replace(cfg, seed=s), keep_graphs)
        for s in sorted(seeds)
    ]
    return SampleSet.concatenate(sets)


def default_start(y: Graph | None, n: int | None = None) -> Graph:
    return y if y is not None else empty_graph(n)
