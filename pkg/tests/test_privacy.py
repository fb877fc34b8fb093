import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from dpergm.graph import Graph, all_dyad_states, complete_graph, empty_graph, hamming
from dpergm.privacy import (
    PrivacyParams, RandomizedResponse, dyad_cell_counts, epsilon_general,
    epsilon_symmetric, log_conditional, log_conditional_dyads, pi_for_epsilon,
    read_sidecar, release, write_sidecar,
)

probs = st.floats(0.01, 0.99)


def test_epsilon_symmetric_values():
    assert epsilon_symmetric(1 / (1 + math.e)) == pytest.approx(1.0, abs=1e-12)
    assert epsilon_symmetric(0.475) == pytest.approx(math.log(0.525 / 0.475))
    assert pi_for_epsilon(1.0) == pytest.approx(0.268941, abs=1e-6)


@given(st.floats(1e-4, 0.4999))
def test_epsilon_pi_roundtrip(pi):
    assert pi_for_epsilon(epsilon_symmetric(pi)) == pytest.approx(pi, rel=1e-9)


@given(st.floats(0.001, 0.499), st.floats(0.001, 0.499))
def test_epsilon_monotone(a, b):
    if a < b:
        assert epsilon_symmetric(a) >= epsilon_symmetric(b)


@given(st.floats(0.01, 0.49))
def test_general_reduces_to_symmetric(pi):
    assert epsilon_general(1 - pi, 1 - pi) == pytest.approx(epsilon_symmetric(pi), rel=1e-12)


def test_epsilon_general_examples():
    assert epsilon_general(0.5, 0.5) == 0.0
    assert epsilon_general(1.0, 1.0) == math.inf
    assert epsilon_general(0.9, 0.6) == pytest.approx(math.log(max(0.9 / 0.4, 0.4 / 0.9, 0.1 / 0.6, 0.6 / 0.1)))


@pytest.mark.parametrize("pi", [0.0, 0.5, 0.7, -0.1])
def test_invalid_pi(pi):
    with pytest.raises(ValueError):
        PrivacyParams.symmetric(pi)


def test_invalid_retention():
    with pytest.raises(ValueError):
        PrivacyParams(1.2, 0.5)
    with pytest.raises(ValueError):
        PrivacyParams(0.0, 0.5)


def test_degenerate_warns():
    with pytest.warns(UserWarning):
        p = PrivacyParams(0.5, 0.5)
    assert p.degenerate and p.epsilon == 0.0


@pytest.mark.filterwarnings("ignore:p00 = p11 = 0.5")
@given(probs, probs)
def test_dp_by_enumeration_n3(p00, p11):
    params = PrivacyParams(p00, p11)
    D = all_dyad_states(3)
    worst = 0.0
    for y in D:
        lp = log_conditional_dyads(y, D, params)
        for a, b in itertools.combinations(range(len(D)), 2):
            if np.sum(D[a] != D[b]) == 1:
                worst = max(worst, abs(lp[a] - lp[b]))
    assert worst <= epsilon_general(p00, p11) + 1e-12
    assert worst == pytest.approx(epsilon_general(p00, p11), abs=1e-12)


def test_log_conditional_closed_form():
    x = Graph(4, [(0, 1), (1, 2)])
    y = Graph(4, [(0, 1), (2, 3)])
    pi = 0.1
    d = hamming(x, y)
    expect = d * math.log(pi) + (6 - d) * math.log(1 - pi)
    assert log_conditional(y, x, PrivacyParams.symmetric(pi)) == pytest.approx(expect)
    # asymmetric path: cell counts
    p = PrivacyParams(0.9, 0.7)
    c = dyad_cell_counts(y.dyads, x.dyads)
    expect = (c[0, 0] * math.log(0.9) + c[0, 1] * math.log(0.1)
              + c[1, 0] * math.log(0.3) + c[1, 1] * math.log(0.7))
    assert log_conditional(y, x, p) == pytest.approx(expect)


def test_log_conditional_normalised():
    x = Graph(3, [(0, 1)])
    p = PrivacyParams(0.8, 0.65)
    lp = log_conditional_dyads(all_dyad_states(3), x.dyads[None, :], p)
    assert np.exp(lp).sum() == pytest.approx(1.0)


def test_no_privacy_is_identity():
    x = Graph(6, [(0, 1), (2, 5), (3, 4)])
    y = release(x, PrivacyParams.none(), seed=1)
    assert y == x
    assert log_conditional(x, x, PrivacyParams.none()) == 0.0
    assert log_conditional(complete_graph(6), x, PrivacyParams.none()) == -math.inf


def test_release_flip_rate_binomial():
    n, pi = 60, 0.1
    x = empty_graph(n)
    y = release(x, PrivacyParams.symmetric(pi), seed=7)
    N = x.n_dyads
    assert sps.binomtest(hamming(x, y), N, pi).pvalue > 1e-3


def test_release_asymmetric_rates():
    x = Graph.from_dyads(40, np.arange(780) % 2 == 0)
    p = PrivacyParams(0.95, 0.6)
    y = release(x, p, seed=3)
    c = dyad_cell_counts(y.dyads, x.dyads)
    assert sps.binomtest(int(c[0, 1]), int(c[0].sum()), 0.05).pvalue > 1e-3
    assert sps.binomtest(int(c[1, 0]), int(c[1].sum()), 0.4).pvalue > 1e-3


def test_release_deterministic_and_keeps_covariates():
    x = Graph(5, [(0, 1)], {"a": list("xyxyx")})
    p = PrivacyParams.symmetric(0.3)
    assert release(x, p, seed=11) == release(x, p, seed=11)
    assert release(x, p, seed=11).covariates == x.covariates


def test_sidecar_roundtrip(tmp_path):
    p = PrivacyParams.from_epsilon(1.0)
    write_sidecar(tmp_path / "s.txt", p, seed=42, n=10)
    q, meta = read_sidecar(tmp_path / "s.txt")
    assert q == p
    assert float(meta["pi"]) == pytest.approx(0.2689, abs=1e-4)
    assert meta["seed"] == "42" and meta["dyads"] == "45"
    assert float(meta["epsilon"]) == pytest.approx(1.0)


def test_sidecar_missing_key(tmp_path):
    (tmp_path / "s.txt").write_text("p00 = 0.9\n")
    with pytest.raises(ValueError):
        read_sidecar(tmp_path / "s.txt")


def test_transformer_api():
    x = Graph(8, [(0, 1), (1, 2)])
    rr = RandomizedResponse(pi=0.2, random_state=0)
    assert rr.get_params()["pi"] == 0.2
    y = rr.fit(x).transform(x)
    assert isinstance(y, Graph) and rr.epsilon_ == pytest.approx(epsilon_symmetric(0.2))
    A = rr.transform(x.adjacency())
    assert isinstance(A, np.ndarray) and Graph.from_adjacency(A) == y
    with pytest.raises(ValueError):
        RandomizedResponse(pi=0.1, epsilon=1.0).fit(x)
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        RandomizedResponse(pi=0.1).transform(x)
