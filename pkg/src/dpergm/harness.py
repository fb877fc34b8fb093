"""End-to-end experiment: release, fit both likelihoods, aggregate utility."""
from __future__ import annotations

import csv
import json
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .estimation import ConvergenceWarning, EstimationConfig, FitResult, derive_seed, fit
from .evaluation import (
    EvalRecord, kl_from_sample, kl_table, mse_table, relative_efficiency,
    squared_errors, write_table,
)
from .graph import Graph, read_edgelist, write_covariates, write_edgelist
from .model import ModelSpec
from .privacy import PrivacyParams, release
from .sampler import SamplerConfig, sample

SYNTHETIC_MODEL = (
    "edges + gwesp(0.5) + gwdegree(0.5) + nodematch(drug) + nodematch(sport) + nodematch(smoke)"
)
# sparse and mildly clustered: about 25 edges at n = 30, an average degree
# close to that of school friendship networks of this size
SYNTHETIC_THETA = (-3.9, 0.5, 0.0, 0.5, 0.5, 0.5)

# integer keys mixed into derived seeds
_RELEASE, _FIT, _KL, _REFERENCE, _SYNTH = range(5)
_METHOD_KEY = {"naive": 0, "missing": 1}


def synthetic_graph(n: int = 30, seed: int = 0, theta=SYNTHETIC_THETA,
                    model: str = SYNTHETIC_MODEL, burn_in: int | None = None) -> Graph:
    """Draw one graph from the ERGM at ``theta`` with binary covariates.

    Covariates named by the model's nodematch terms are i.i.d. fair coin
    flips ("0"/"1"). The graph is the state after ``burn_in`` steps
    (default ``500 N``) from the empty graph.
    """
    spec = ModelSpec(model)
    rng = np.random.default_rng(derive_seed(seed, _SYNTH))
    cov = {a: [str(v) for v in rng.integers(0, 2, n)] for a in spec.attributes}
    start = Graph(n, [], cov)
    cfg = SamplerConfig(n_draws=1, burn_in=burn_in or 500 * start.n_dyads,
                        seed=derive_seed(seed, _SYNTH, 1))
    return sample(theta, spec, start, cfg).final


def pi_key(pi: float) -> int:
    """Integer seed key for a flip probability (nanounits, so the grid can be
    extended without disturbing existing cells)."""
    return int(round(pi * 1e9))


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for :func:`run_experiment`.

    With ``graph`` unset, a synthetic ``synthetic_n``-node graph is drawn
    from the built-in model (``seed`` controls it).
    """

    graph: str | None = None
    covariates: str | None = None
    model: str = SYNTHETIC_MODEL
    pis: tuple = (0.005, 0.01, 0.02, 0.03)
    replicates: int = 10
    seed: int = 0
    workers: int = 1
    out: str | None = None
    synthetic_n: int = 30
    synthetic_theta: tuple = SYNTHETIC_THETA
    kl_draws: int = 5000
    band_level: float = 0.99
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    estimation: EstimationConfig = field(default_factory=EstimationConfig)

    def __post_init__(self):
        pis = tuple(float(p) for p in self.pis)
        object.__setattr__(self, "pis", pis)
        object.__setattr__(self, "synthetic_theta", tuple(float(t) for t in self.synthetic_theta))
        if not pis or any(not 0 < p < 0.5 for p in pis):
            raise ValueError(f"pi values must lie in (0, 0.5), got {pis}")
        if len(set(pis)) != len(pis):
            raise ValueError("duplicate pi values")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        for p in (self.graph, self.covariates):
            if p is not None and not Path(p).exists():
                raise FileNotFoundError(p)

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        """Build from dotted keys: ``experiment.*``, ``sampler.*``,
        ``estimation.*`` (values may be strings)."""
        groups = {"experiment": {}, "sampler": {}, "estimation": {}}
        for key, value in values.items():
            section, _, name = key.partition(".")
            if section not in groups or not name:
                raise KeyError(f"unknown config key {key!r}")
            groups[section][name] = value
        exp = _coerce(cls, groups["experiment"], skip=("sampler", "estimation"))
        exp["sampler"] = SamplerConfig(**_coerce(SamplerConfig, groups["sampler"]))
        exp["estimation"] = EstimationConfig(**_coerce(EstimationConfig, groups["estimation"]))
        return cls(**exp)

    def to_mapping(self) -> dict:
        out = {f"experiment.{k}": v for k, v in asdict(self).items()
               if k not in ("sampler", "estimation")}
        out.update({f"sampler.{k}": v for k, v in asdict(self.sampler).items()})
        out.update({f"estimation.{k}": v for k, v in asdict(self.estimation).items()})
        return out


def _coerce(cls, raw: dict, skip=()) -> dict:
    types = {f.name: f.type for f in fields(cls) if f.name not in skip}
    out = {}
    for name, value in raw.items():
        if name not in types:
            raise KeyError(f"unknown {cls.__name__} setting {name!r}")
        out[name] = _parse_value(name, value, str(types[name]))
    return out


def _parse_value(name, value, type_name):
    if not isinstance(value, str):
        return value
    v = value.strip()
    if v.lower() in ("none", "null", ""):
        return None
    if name in ("pis", "synthetic_theta"):
        return tuple(float(t) for t in v.replace(",", " ").split())
    if name == "theta0":
        return v if v == "mple" else tuple(float(t) for t in v.replace(",", " ").split())
    if type_name.startswith("int"):
        return int(v)
    if type_name.startswith("float"):
        return float(v)
    if type_name.startswith("bool"):
        return v.lower() in ("1", "true", "yes", "on")
    return v


def read_config(path) -> dict:
    """Parse ``key = value`` lines (``#`` comments, blank lines ignored)."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


# ---------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    original: Graph
    reference: FitResult
    records: list
    failures: dict
    kl: list
    mse: list
    relative_efficiency: list


def _cell(args):
    """Release one graph and fit one method. Picklable worker entry point."""
    x, spec, cfg, pi, rep, method = args
    params = PrivacyParams.symmetric(pi)
    rel_seed = derive_seed(cfg.seed, _RELEASE, pi_key(pi), rep)
    y = release(x, params, seed=rel_seed)
    fit_seed = derive_seed(cfg.seed, _FIT, pi_key(pi), rep, _METHOD_KEY[method])
    scfg = replace(cfg.sampler, seed=fit_seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        try:
            res = fit(y, spec, method, params, cfg.estimation, scfg)
        except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
            res = None
            err = f"{type(exc).__name__}: {exc}"
    meta = {"release_seed": rel_seed, "fit_seed": fit_seed, "edges_y": y.n_edges}
    if res is None:
        return pi, rep, method, None, meta | {"error": err}
    return pi, rep, method, res, meta


def _map(fn, tasks, workers):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentResult:
    """Run the full grid and aggregate.

    Fits the reference model on the original graph, then for every
    ``(pi, replicate)`` releases a graph and fits the naive and missing-data
    likelihoods. KL divergences from the reference fit all share one sample
    drawn at the reference estimate. Failed or unconverged fits are excluded
    from the aggregates and counted in ``failures``.
    """
    spec = ModelSpec(cfg.model)
    if cfg.graph is not None:
        x, _ = read_edgelist(cfg.graph, cfg.covariates)
    else:
        x = synthetic_graph(cfg.synthetic_n, cfg.seed, cfg.synthetic_theta, cfg.model)
    spec.validate(x)

    ref_cfg = replace(cfg.sampler, seed=derive_seed(cfg.seed, _REFERENCE))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        reference = fit(x, spec, "naive", None, cfg.estimation, ref_cfg)
    if not reference.converged:
        raise RuntimeError("reference fit on the original graph did not converge")
    theta_ref = reference.theta
    kl_cfg = replace(cfg.sampler, n_draws=cfg.kl_draws, seed=derive_seed(cfg.seed, _KL))
    S_ref = sample(theta_ref, spec, x, kl_cfg)

    tasks = [(x, spec, cfg, pi, rep, m)
             for pi in cfg.pis for rep in range(cfg.replicates) for m in ("naive", "missing")]
    outputs = _map(_cell, tasks, cfg.workers)
    outputs.sort(key=lambda o: (o[0], o[1], _METHOD_KEY[o[2]]))

    records, failures = [], {}
    for pi, rep, method, res, meta in outputs:
        ok = res is not None and res.converged
        if not ok:
            failures[(pi, method)] = failures.get((pi, method), 0) + 1
        theta = res.theta if res is not None else np.full(spec.q, np.nan)
        kl, kl_se = (kl_from_sample(theta_ref, theta, S_ref) if ok else (np.nan, np.nan))
        if res is not None:
            meta = meta | {"iterations": res.iterations}
        records.append(EvalRecord(pi, rep, method, kl, squared_errors(theta, theta_ref),
                                  theta, ok, kl_se, meta))
        if progress is not None:
            progress(records[-1])

    mse = mse_table(records, labels=spec.labels, level=cfg.band_level)
    result = ExperimentResult(
        cfg, x, reference, records, failures,
        kl_table(records, cfg.band_level), mse,
        relative_efficiency(mse, mse),
    )
    if cfg.out is not None:
        write_outputs(result, cfg.out)
    return result


def write_outputs(result: ExperimentResult, out) -> None:
    """Write records, aggregate tables, the reference fit and a summary."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    labels = result.reference.labels
    write_table(result.kl, out / "kl.csv")
    write_table(result.mse, out / "mse.csv")
    write_table(result.relative_efficiency, out / "relative_efficiency.csv")
    result.reference.write(out / "reference_fit.txt")
    write_edgelist(result.original, out / "original.edgelist")
    if result.original.covariates:
        write_covariates(result.original, out / "original_covariates.csv")

    rows = [r.to_row(labels) for r in result.records]
    columns = list(dict.fromkeys(k for row in rows for k in row))
    with open(out / "records.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in row.items()})

    summary = {
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in result.config.to_mapping().items()},
        "n_records": len(result.records),
        "failures": {f"{pi}:{m}": c for (pi, m), c in sorted(result.failures.items())},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def default_workers() -> int:
    return max(1, (os.cpu_count() or 1))
