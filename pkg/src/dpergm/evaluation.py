"""Utility metrics for private fits: KL divergence, MSE, relative efficiency."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .graph import Graph, empty_graph
from .model import MAX_ENUM_NODES, ModelSpec, enumerate_graphs
from .sampler import SampleSet, SamplerConfig, sample
from .validation import check_vector

TABLE_COLUMNS = ("pi", "method", "metric", "parameter", "value", "lo", "hi")


def kl_exact(theta_x, theta_y, spec: ModelSpec, n: int, covariates=None) -> float:
    """``KL(P_theta_x || P_theta_y)`` by enumerating all graphs (``n <= 5``)."""
    theta_x = check_vector(theta_x, spec.q, "theta_x")
    theta_y = check_vector(theta_y, spec.q, "theta_y")
    _, G = enumerate_graphs(spec, n, covariates)
    lx = G @ theta_x
    ly = G @ theta_y
    lx = lx - logsumexp(lx)
    ly = ly - logsumexp(ly)
    return float(np.sum(np.exp(lx) * (lx - ly)))


def _batch_tau(v, n_batches=20):
    M = len(v)
    if M < 4 * n_batches or v.var() == 0:
        return 1.0
    b = M // n_batches
    means = v[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return max(1.0, b * means.var(ddof=1) / v.var())


def kl_from_sample(theta_x, theta_y, S: SampleSet) -> tuple[float, float]:
    """KL estimate and its Monte Carlo standard error from draws at ``theta_x``.

    ``KL = (theta_x - theta_y) . E_x[g] + log c(theta_y) / c(theta_x)``, with
    both terms estimated from the same draws.
    """
    q = S.stats.shape[1]
    d = check_vector(theta_y, q, "theta_y") - check_vector(theta_x, q, "theta_x")
    if not d.any():
        return 0.0, 0.0
    a = S.stats @ d
    M = len(a)
    log_w = a - logsumexp(a) + math.log(M)  # w_i / mean(w)
    kl = float(-a.mean() + logsumexp(a) - math.log(M))
    # delta method: influence of draw i is -a_i + w_i / mean(w)
    psi = -a + np.exp(log_w)
    se = float(np.sqrt(psi.var(ddof=1) * _batch_tau(psi) / M)) if M > 1 else math.inf
    return kl, se


def kl_divergence(
    theta_x,
    theta_y,
    spec: ModelSpec,
    graph: Graph | int,
    scfg: SamplerConfig | None = None,
    method: str = "auto",
    n_bridges: int = 1,
    return_se: bool = False,
):
    """``KL(P_theta_x || P_theta_y)`` between two fitted ERGMs.

    Parameters
    ----------
    graph : Graph or int
        Supplies the node count and covariates (a bare node count is enough
        for models without nodematch terms). Also the chain start.
    method : {"auto", "exact", "mcmc"}
        ``auto`` enumerates when ``n <= 5``.
    n_bridges : int
        Number of stages on the segment from ``theta_x`` to ``theta_y`` for
        the normalising-constant ratio; each stage is importance-sampled from
        its own chain. 1 is the plain single-sample estimate.
    return_se : bool
        Also return the Monte Carlo standard error (0 when exact).
    """
    g = empty_graph(graph) if isinstance(graph, int) else graph
    theta_x = check_vector(theta_x, spec.q, "theta_x")
    theta_y = check_vector(theta_y, spec.q, "theta_y")
    if method not in ("auto", "exact", "mcmc"):
        raise ValueError(f"unknown method {method!r}")
    if method == "exact" or (method == "auto" and g.n <= MAX_ENUM_NODES):
        kl = kl_exact(theta_x, theta_y, spec, g.n, g.covariates)
        return (kl, 0.0) if return_se else kl
    scfg = scfg or SamplerConfig()
    S = sample(theta_x, spec, g, scfg)
    kl, se = kl_from_sample(theta_x, theta_y, S)
    if n_bridges > 1:
        kl, se = _bridged(theta_x, theta_y, spec, g, scfg, S, n_bridges)
    return (kl, se) if return_se else kl


def _bridged(theta_x, theta_y, spec, g, scfg, S0, n_bridges):
    d = theta_y - theta_x
    mean_term = -float(S0.stats.mean(axis=0) @ d)
    var = 0.0
    log_ratio = 0.0
    S = S0
    for k in range(n_bridges):
        a = theta_x + d * k / n_bridges
        b = theta_x + d * (k + 1) / n_bridges
        if k > 0:
            seed = None if scfg.seed is None else int(
                np.random.SeedSequence(scfg.seed, spawn_key=(k,)).generate_state(1)[0]
            )
            S = sample(a, spec, g, replace(scfg, seed=seed))
        z = S.stats @ (b - a)
        M = len(z)
        log_ratio += float(logsumexp(z) - math.log(M))
        w = np.exp(z - logsumexp(z) + math.log(M))
        var += w.var(ddof=1) * _batch_tau(w) / M
    g0 = S0.stats @ d
    var += g0.var(ddof=1) * _batch_tau(g0) / len(g0)
    return mean_term + log_ratio, math.sqrt(var)


# ---------------------------------------------------------------------------
# replicate records and aggregate tables


@dataclass
class EvalRecord:
    pi: float
    replicate: int
    method: str
    kl: float
    sq_errors: np.ndarray
    theta: np.ndarray
    converged: bool = True
    kl_se: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_row(self, labels) -> dict:
        row = {
            "pi": self.pi, "replicate": self.replicate, "method": self.method,
            "converged": int(self.converged), "kl": self.kl, "kl_se": self.kl_se,
        }
        for k, lab in enumerate(labels):
            row[f"theta.{lab}"] = self.theta[k]
            row[f"sqerr.{lab}"] = self.sq_errors[k]
        row.update(self.meta)
        return row


def squared_errors(theta_hat, theta_ref) -> np.ndarray:
    return (np.asarray(theta_hat, float) - np.asarray(theta_ref, float)) ** 2


def _band(values, level=0.99):
    lo, hi = np.percentile(values, [50 * (1 - level), 50 * (1 + level)])
    return float(lo), float(hi)


def kl_table(records, level: float = 0.99) -> list[dict]:
    """Mean KL per (pi, method) with a percentile band over replicates."""
    groups = defaultdict(list)
    for r in records:
        if r.converged:
            groups[(r.pi, r.method)].append(r.kl)
    rows = []
    for (pi, method), vals in sorted(groups.items()):
        lo, hi = _band(vals, level)
        rows.append(dict(pi=pi, method=method, metric="kl", parameter="",
                         value=float(np.mean(vals)), lo=lo, hi=hi))
    return rows


def mse_table(records, theta_reference=None, labels=None, level: float = 0.99) -> list[dict]:
    """Mean squared error per (pi, method, parameter).

    Squared errors are recomputed against ``theta_reference`` when it is
    given, otherwise taken from the records. Unconverged records are skipped.
    """
    records = [r for r in records if r.converged]
    if not records:
        raise ValueError("no (converged) records to aggregate")
    q = len(records[0].theta)
    labels = labels or [f"theta{k + 1}" for k in range(q)]
    groups = defaultdict(list)
    for r in records:
        se = r.sq_errors if theta_reference is None else squared_errors(r.theta, theta_reference)
        groups[(r.pi, r.method)].append(se)
    rows = []
    for (pi, method), errs in sorted(groups.items()):
        errs = np.array(errs)
        for k, lab in enumerate(labels):
            lo, hi = _band(errs[:, k], level)
            rows.append(dict(pi=pi, method=method, metric="mse", parameter=lab,
                             value=float(errs[:, k].mean()), lo=lo, hi=hi))
    return rows


def relative_efficiency(mse_missing, mse_naive) -> list[dict]:
    """``100 * MSE[missing] / MSE[naive]`` per (pi, parameter).

    Inputs are :func:`mse_table` rows (other methods are ignored). Entries
    with zero naive MSE, or with no converged fits on one side, are ``nan``
    and flagged ``undefined`` in ``lo``.
    """
    def index(rows, method):
        return {(r["pi"], r["parameter"]): r["value"] for r in rows
                if r.get("method", method) == method}

    miss = index(mse_missing, "missing")
    naive = index(mse_naive, "naive")
    rows = []
    for key in sorted(set(miss) | set(naive), key=lambda k: (k[0], str(k[1]))):
        num, den = miss.get(key, math.nan), naive.get(key, math.nan)
        undefined = not (math.isfinite(num) and math.isfinite(den)) or den == 0
        value = math.nan if undefined else 100.0 * num / den
        rows.append(dict(pi=key[0], method="missing/naive", metric="relative_efficiency",
                         parameter=key[1], value=value,
                         lo="undefined" if undefined else "", hi=""))
    return rows


def write_table(rows, path, columns=TABLE_COLUMNS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore",
                           lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k, "")) for k in columns})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v
