import json
from dataclasses import replace

import numpy as np
import pytest

from dpergm.estimation import EstimationConfig, derive_seed
from dpergm.harness import (
    SYNTHETIC_MODEL, ExperimentConfig, pi_key, read_config, run_experiment, synthetic_graph,
)
from dpergm.model import ModelSpec, stats
from dpergm.sampler import SamplerConfig

SMALL = ExperimentConfig(
    model="edges + nodematch(a)", pis=(0.05, 0.1), replicates=3, seed=4, synthetic_n=10,
    synthetic_theta=(-1.0, 0.5), kl_draws=500, sampler=SamplerConfig(n_draws=400),
)


def test_synthetic_graph_reproducible():
    g = synthetic_graph(12, seed=3, theta=(-2.0, 0.3, 0, 0.5, 0.5, 0.5), burn_in=2000)
    h = synthetic_graph(12, seed=3, theta=(-2.0, 0.3, 0, 0.5, 0.5, 0.5), burn_in=2000)
    assert g == h and set(g.covariates) == {"drug", "sport", "smoke"}
    assert set(g.covariates["drug"]) <= {"0", "1"}
    assert stats(g, ModelSpec(SYNTHETIC_MODEL)).shape == (6,)


def test_pi_key_value_based():
    assert pi_key(0.01) == 10_000_000 and pi_key(0.005) == 5_000_000
    # extending the grid leaves existing cells' seeds alone
    assert derive_seed(0, 0, pi_key(0.02), 1) == derive_seed(0, 0, pi_key(0.020000000000000001), 1)


def test_config_file(tmp_path):
    (tmp_path / "c.cfg").write_text(
        "# experiment\nexperiment.pis = 0.01, 0.02\nexperiment.replicates = 4\n"
        "sampler.n_draws = 250  # short\nsampler.proposal = toggle\n"
        "estimation.theta0 = -1 0.5\nestimation.missing_strategy = conditional\n"
    )
    cfg = ExperimentConfig.from_mapping(read_config(tmp_path / "c.cfg"))
    assert cfg.pis == (0.01, 0.02) and cfg.replicates == 4
    assert cfg.sampler.n_draws == 250 and cfg.sampler.proposal == "toggle"
    assert cfg.estimation.theta0 == (-1.0, 0.5)
    assert cfg.estimation.missing_strategy == "conditional"
    back = ExperimentConfig.from_mapping({k: str(v) if v is not None else "none"
                                          for k, v in cfg.to_mapping().items()
                                          if not k.endswith(("pis", "synthetic_theta", "theta0"))})
    assert back.sampler == cfg.sampler


@pytest.mark.parametrize("mapping, exc", [
    ({"experiment.colour": "red"}, KeyError),
    ({"bogus.pis": "0.1"}, KeyError),
    ({"experiment.pis": "0.6"}, ValueError),
    ({"experiment.pis": "0.1 0.1"}, ValueError),
    ({"experiment.graph": "/nonexistent/graph.txt"}, FileNotFoundError),
    ({"sampler.n_draws": "0"}, ValueError),
])
def test_config_errors(mapping, exc):
    with pytest.raises(exc):
        ExperimentConfig.from_mapping(mapping)


def test_config_file_syntax(tmp_path):
    (tmp_path / "c.cfg").write_text("experiment.pis 0.1\n")
    with pytest.raises(ValueError):
        read_config(tmp_path / "c.cfg")


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    return run_experiment(replace(SMALL, out=str(out))), out


def test_small_run_structure(small_run):
    res, out = small_run
    assert len(res.records) == 2 * 3 * 2
    keys = [(r.pi, r.replicate, r.method) for r in res.records]
    assert keys == sorted(keys, key=lambda k: (k[0], k[1], k[2] == "missing"))
    assert {r["metric"] for r in res.kl} == {"kl"}
    assert len(res.mse) == 2 * 2 * 2 and len(res.relative_efficiency) == 2 * 2
    for name in ("kl.csv", "mse.csv", "relative_efficiency.csv", "records.csv",
                 "reference_fit.txt", "original.edgelist", "summary.json"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_records"] == 12
    assert (out / "kl.csv").read_text().splitlines()[0] == "pi,method,metric,parameter,value,lo,hi"


def test_small_run_deterministic_across_workers(small_run, tmp_path):
    res, out = small_run
    again = run_experiment(replace(SMALL, out=str(tmp_path), workers=2))
    for name in ("kl.csv", "mse.csv", "relative_efficiency.csv", "records.csv"):
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes()
    assert again.failures == res.failures


def test_cells_stable_when_grid_extends(small_run):
    res, _ = small_run
    wider = run_experiment(replace(SMALL, pis=(0.05, 0.1, 0.2), replicates=3))
    old = {(r.pi, r.replicate, r.method): r.theta for r in res.records}
    for r in wider.records:
        if (r.pi, r.replicate, r.method) in old:
            np.testing.assert_array_equal(r.theta, old[(r.pi, r.replicate, r.method)])


def test_failures_excluded(monkeypatch):
    import dpergm.harness as harness
    real = harness.fit

    def flaky(y, spec, method, params, ecfg, scfg):
        if method == "missing" and abs(params.pi - 0.1) < 1e-12:
            raise FloatingPointError("overflow")
        return real(y, spec, method, params, ecfg, scfg)

    monkeypatch.setattr(harness, "fit", flaky)
    res = run_experiment(replace(SMALL, pis=(0.05, 0.1), replicates=2))
    assert res.failures == {(0.1, "missing"): 2}
    assert all("error" in r.meta for r in res.records if not r.converged)
    assert not any(r["pi"] == 0.1 and r["method"] == "missing" for r in res.mse)
    assert all(r["lo"] == "undefined" for r in res.relative_efficiency if r["pi"] == 0.1)


def test_reference_failure_raises():
    cfg = replace(SMALL, estimation=EstimationConfig(max_iter=1, param_tol=1e-12, score_tol=1e-12))
    with pytest.raises(RuntimeError):
        run_experiment(cfg)
