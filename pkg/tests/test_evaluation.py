import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import expit, logit

from dpergm.evaluation import (
    TABLE_COLUMNS, EvalRecord, kl_divergence, kl_exact, kl_from_sample, kl_table,
    mse_table, relative_efficiency, squared_errors, write_table,
)
from dpergm.graph import Graph, n_dyads
from dpergm.model import ModelSpec
from dpergm.sampler import SamplerConfig, sample

EDGES = ModelSpec("edges")
GWESP = ModelSpec("edges + gwesp(0.5)")


def bernoulli_kl(a, b):
    p, q = expit(a), expit(b)
    return p * math.log(p / q) + (1 - p) * math.log((1 - p) / (1 - q))


def test_kl_edges_closed_form():
    kl = kl_exact([-1.0], [0.5], EDGES, 5)
    assert kl == pytest.approx(10 * bernoulli_kl(-1.0, 0.5), rel=1e-12)


def test_kl_zero_and_positive():
    assert kl_exact([0.2, 0.1], [0.2, 0.1], GWESP, 4) == pytest.approx(0.0, abs=1e-14)
    assert kl_exact([0.2, 0.1], [-0.2, 0.4], GWESP, 4) > 0
    S = sample([0.2, 0.1], GWESP, Graph(5, []), SamplerConfig(n_draws=20, seed=0))
    assert kl_from_sample([0.2, 0.1], [0.2, 0.1], S) == (0.0, 0.0)


def test_kl_mcmc_edges_closed_form():
    n = 30
    a, b = -2.5, -2.2
    kl, se = kl_divergence([a], [b], EDGES, n, SamplerConfig(n_draws=5000, seed=1),
                           method="mcmc", return_se=True)
    expect = n_dyads(n) * bernoulli_kl(a, b)
    assert 0 < se < 0.1 * expect
    assert abs(kl - expect) < 4 * se


@pytest.mark.parametrize("bridges", [1, 4])
def test_kl_mcmc_against_enumeration(bridges):
    tx, ty = np.array([-0.3, 0.2]), np.array([0.1, -0.1])
    exact = kl_exact(tx, ty, GWESP, 4)
    kl, se = kl_divergence(tx, ty, GWESP, 4, SamplerConfig(n_draws=20000, interval=20, seed=2),
                           method="mcmc", n_bridges=bridges, return_se=True)
    assert abs(kl - exact) < 4 * se + 1e-3


def test_kl_auto_uses_enumeration():
    kl, se = kl_divergence([0.0], [0.4], EDGES, 4, return_se=True)
    assert se == 0.0 and kl == pytest.approx(6 * bernoulli_kl(0.0, 0.4))
    with pytest.raises(ValueError):
        kl_divergence([0.0], [0.4], EDGES, 4, method="magic")


def _records(values):
    out = []
    for pi, method, rep, th in values:
        th = np.asarray(th, float)
        out.append(EvalRecord(pi, rep, method, float(th.sum()), squared_errors(th, [0, 0]), th))
    return out


RECS = _records([
    (0.01, "naive", 0, [1, 2]), (0.01, "naive", 1, [3, 0]),
    (0.01, "missing", 0, [1, 1]), (0.01, "missing", 1, [-1, 1]),
])


def test_mse_arithmetic():
    rows = {(r["method"], r["parameter"]): r["value"] for r in mse_table(RECS, labels=["a", "b"])}
    assert rows[("naive", "a")] == 5.0 and rows[("naive", "b")] == 2.0
    assert rows[("missing", "a")] == 1.0 and rows[("missing", "b")] == 1.0
    ref = mse_table(RECS, theta_reference=[1, 0], labels=["a", "b"])
    assert ref[0]["method"] == "missing" and ref[0]["value"] == 2.0


def test_relative_efficiency_values():
    mse = mse_table(RECS, labels=["a", "b"])
    re = {r["parameter"]: r["value"] for r in relative_efficiency(mse, mse)}
    assert re == {"a": 20.0, "b": 50.0}


@given(st.lists(st.floats(0.01, 10), min_size=2, max_size=6))
def test_relative_efficiency_identity(vals):
    rows = [dict(pi=0.01, method=m, parameter=f"p{k}", value=v)
            for m in ("naive", "missing") for k, v in enumerate(vals)]
    assert all(r["value"] == pytest.approx(100.0) for r in relative_efficiency(rows, rows))


def test_relative_efficiency_zero_naive_flagged():
    rows = [dict(pi=0.01, method="naive", parameter="a", value=0.0),
            dict(pi=0.01, method="missing", parameter="a", value=0.3)]
    (r,) = relative_efficiency(rows, rows)
    assert math.isnan(r["value"]) and r["lo"] == "undefined"


def test_relative_efficiency_unmatched_cells_undefined():
    a = [dict(pi=0.01, method="missing", parameter="a", value=1.0)]
    b = [dict(pi=0.02, method="naive", parameter="a", value=1.0)]
    rows = relative_efficiency(a, b)
    assert [r["pi"] for r in rows] == [0.01, 0.02]
    assert all(math.isnan(r["value"]) and r["lo"] == "undefined" for r in rows)


@given(st.permutations(range(4)))
def test_tables_invariant_to_record_order(perm):
    recs = [RECS[k] for k in perm]
    assert mse_table(recs) == mse_table(RECS)
    assert kl_table(recs) == kl_table(RECS)


def test_unconverged_records_excluded():
    bad = EvalRecord(0.01, 2, "naive", 99.0, np.array([1e6, 1e6]), np.array([1e3, 1e3]), False)
    assert mse_table(RECS + [bad]) == mse_table(RECS)
    assert kl_table(RECS + [bad]) == kl_table(RECS)
    with pytest.raises(ValueError):
        mse_table([bad])


def test_kl_table_band():
    rows = kl_table(RECS, level=0.5)
    naive = next(r for r in rows if r["method"] == "naive")
    assert naive["value"] == 3.0 and naive["lo"] <= naive["value"] <= naive["hi"]


def test_write_table(tmp_path):
    write_table(mse_table(RECS, labels=["a", "b"]), tmp_path / "t.csv")
    with open(tmp_path / "t.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == TABLE_COLUMNS and len(rows) == 4
    assert float(rows[0]["value"]) == 1.0


def test_record_row():
    row = RECS[0].to_row(["a", "b"])
    assert row["theta.b"] == 2.0 and row["sqerr.a"] == 1.0 and row["converged"] == 1


def test_kl_worked_example():
    kl = kl_exact([0.0], [logit(0.25)], EDGES, 5)
    expect = 10 * (0.5 * math.log(0.5 / 0.25) + 0.5 * math.log(0.5 / 0.75))
    assert kl == pytest.approx(expect, rel=1e-12) and kl == pytest.approx(1.438, abs=1e-3)


def test_kl_mcmc_three_nodes_within_3se():
    tx, ty = np.array([0.2, 0.3]), np.array([-0.4, 0.6])
    kl, se = kl_divergence(tx, ty, GWESP, 3, SamplerConfig(n_draws=20000, interval=30, seed=5),
                           method="mcmc", return_se=True)
    assert abs(kl - kl_exact(tx, ty, GWESP, 3)) < 3 * se
    assert kl > -3 * se


def test_mse_worked_examples():
    ref = np.array([1.0, 2.0])
    one = [EvalRecord(0.01, 0, "naive", 0.0, squared_errors(ref, ref), ref)]
    assert all(r["value"] == 0.0 for r in mse_table(one, ref))
    a = 0.3
    two = [EvalRecord(0.01, k, "naive", 0.0, np.zeros(2), ref + [s * a, 0.0])
           for k, s in enumerate((1, -1))]
    assert mse_table(two, ref)[0]["value"] == pytest.approx(a * a)
    rows = [dict(pi=0.01, method="missing", parameter="g", value=0.1),
            dict(pi=0.01, method="naive", parameter="g", value=1.0)]
    assert relative_efficiency(rows, rows)[0]["value"] == pytest.approx(10.0)


def test_single_replicate_band_collapses():
    (row,) = kl_table(RECS[:1])
    assert row["lo"] == row["value"] == row["hi"]
