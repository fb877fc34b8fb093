"""scikit-learn style wrapper around the estimation routines."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .estimation import EstimationConfig, fit
from .model import ModelSpec, stats
from .privacy import PrivacyParams
from .sampler import SamplerConfig, sample
from .validation import check_graph


class ERGM(BaseEstimator):
    """Exponential random graph model fitted to one observed graph.

    Parameters
    ----------
    model : str
        Formula such as ``"edges + gwesp(0.5) + nodematch(drug)"``.
    method : {"naive", "missing", "exact", "exact_missing", "mple"}
        ``missing`` and ``exact_missing`` treat the input as a randomized
        response release and need ``pi`` or ``(p00, p11)``.
    pi, p00, p11 : float, optional
        Public release parameters.
    n_draws, burn_in, interval, proposal, edge_prob
        Sampler settings, see :class:`~dpergm.sampler.SamplerConfig`.
    max_iter, damping, tol, score_tol, ess_floor, final_rounds, missing_strategy, theta0
        Outer-loop settings, see :class:`~dpergm.estimation.EstimationConfig`
        (``tol`` is its ``param_tol``).
    random_state : int or None

    Attributes
    ----------
    coef_ : ndarray of shape (q,)
    stderr_ : ndarray of shape (q,) or None
    converged_ : bool
    result_ : FitResult
    feature_names_out_ : list of str
    """

    def __init__(self, model="edges", method="naive", pi=None, p00=None, p11=None,
                 n_draws=1000, burn_in=None, interval=None, proposal="tnt",
                 edge_prob=0.5, max_iter=60, damping=0.5, tol=1e-4, score_tol=2.0,
                 ess_floor=0.1, final_rounds=0, missing_strategy="auto", theta0="mple",
                 random_state=None):
        self.model = model
        self.method = method
        self.pi = pi
        self.p00 = p00
        self.p11 = p11
        self.n_draws = n_draws
        self.burn_in = burn_in
        self.interval = interval
        self.proposal = proposal
        self.edge_prob = edge_prob
        self.max_iter = max_iter
        self.damping = damping
        self.tol = tol
        self.score_tol = score_tol
        self.ess_floor = ess_floor
        self.final_rounds = final_rounds
        self.missing_strategy = missing_strategy
        self.theta0 = theta0
        self.random_state = random_state

    def _privacy(self):
        if self.pi is not None:
            if self.p00 is not None or self.p11 is not None:
                raise ValueError("give either pi or (p00, p11), not both")
            return PrivacyParams.symmetric(self.pi)
        if self.p00 is not None or self.p11 is not None:
            if self.p00 is None or self.p11 is None:
                raise ValueError("p00 and p11 must be given together")
            return PrivacyParams(self.p00, self.p11)
        return None

    def _configs(self):
        scfg = SamplerConfig(burn_in=self.burn_in, interval=self.interval,
                             n_draws=self.n_draws, proposal=self.proposal,
                             edge_prob=self.edge_prob, seed=self.random_state)
        ecfg = EstimationConfig(theta0=self.theta0, max_iter=self.max_iter,
                                damping=self.damping, param_tol=self.tol,
                                score_tol=self.score_tol, ess_floor=self.ess_floor,
                                final_rounds=self.final_rounds,
                                missing_strategy=self.missing_strategy)
        return scfg, ecfg

    def fit(self, X, y=None):
        """Fit to a :class:`~dpergm.graph.Graph` or a symmetric 0/1 matrix."""
        g = check_graph(X, name="X")
        spec = ModelSpec(self.model)
        scfg, ecfg = self._configs()
        res = fit(g, spec, self.method, self._privacy(), ecfg, scfg)
        self.spec_ = spec
        self.result_ = res
        self.coef_ = res.theta
        self.stderr_ = res.std_errors
        self.converged_ = res.converged
        self.feature_names_out_ = spec.labels
        self.n_nodes_ = g.n
        self.covariates_ = g.covariates
        self.graph_ = g
        return self

    def statistics(self, X) -> np.ndarray:
        """Sufficient statistics of ``X`` under this model."""
        return stats(check_graph(X, name="X"), ModelSpec(self.model))

    def sample(self, n_draws=100, random_state=None, keep_graphs=False):
        """Draw graphs from the fitted model, started at the fitted graph.

        Returns the :class:`~dpergm.sampler.SampleSet`.
        """
        check_is_fitted(self, "coef_")
        scfg, _ = self._configs()
        cfg = SamplerConfig(burn_in=scfg.burn_in, interval=scfg.interval,
                            n_draws=n_draws, proposal=scfg.proposal,
                            edge_prob=scfg.edge_prob, seed=random_state)
        return sample(self.coef_, self.spec_, self.graph_, cfg, keep_graphs)
