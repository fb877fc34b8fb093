"""Maximum likelihood estimation of ERGM parameters from a released graph.

Three families of estimators share one :class:`FitResult` type:

* ``fit_naive`` treats the released graph as if it were the true graph and
  maximises the Geyer-Thompson Monte Carlo approximation of the ERGM
  log-likelihood.
* ``fit_missing`` treats the true graph as missing and maximises the Monte
  Carlo approximation of ``log sum_x P(y | x) P(x; theta)``.
* ``fit_exact`` and ``fit_exact_missing`` maximise the same likelihoods
  computed exactly by enumerating every graph (``n <= 5``); they are the
  reference the stochastic fits are tested against.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import expit, logsumexp

from .graph import Graph
from .model import ModelSpec, change_stats_all, enumerate_graphs, stats
from .privacy import PrivacyParams, log_conditional_dyads
from .sampler import SampleSet, SamplerConfig, sample, sample_conditional
from .validation import check_graph, check_vector

METHODS = ("naive", "missing", "exact", "exact_missing", "mple")
MISSING_STRATEGIES = ("auto", "weighted", "conditional")


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EstimationConfig:
    """Outer-loop settings for the Monte Carlo MLE.

    Parameters
    ----------
    theta0 : "mple" or sequence of float
        Starting anchor.
    max_iter : int
        Maximum number of re-sampling iterations.
    damping : float
        Fraction of the way the anchor moves toward the current
        approximate maximiser on iterations that have not converged.
    param_tol : float
        Converged when the maximiser is this close to the anchor (max norm).
    score_tol : float
        Converged when the squared Mahalanobis norm of the estimated score at
        the anchor, divided by the dimension, falls below this value. The
        score covariance is the Monte Carlo covariance (batch-means corrected).
    ess_floor : float
        Minimum importance-sampling effective sample size, as a fraction of
        the number of draws, tolerated while moving away from the anchor.
    max_step : float
        Trust region: the largest change of any coordinate of the anchor in
        one iteration. Guards against directions the draws do not constrain
        (a statistic with no variance in the sample).
    divergence_bound : float
        The fit stops unconverged, reporting a likely nonexistent MLE, once
        any coordinate of the anchor exceeds this in absolute value.
    final_rounds : int
        Extra iterations after convergence, all anchored at the converged
        estimate with fresh draws. The returned estimate averages their
        maximisers with the converged one, and their spread is reported as
        ``mc_std_errors`` in the diagnostics. 0 returns the single maximiser.
    missing_strategy : {"auto", "weighted", "conditional"}
        How ``c(theta | y)`` is estimated in :func:`fit_missing`. ``weighted``
        reweights the unconditional draws by ``P(y | X_i)``; ``conditional``
        runs a second chain on ``P(X | Y = y)``; ``auto`` uses the weighted
        draws unless their effective sample size falls below the floor.
    """

    theta0: object = "mple"
    max_iter: int = 60
    damping: float = 0.5
    param_tol: float = 1e-4
    score_tol: float = 2.0
    ess_floor: float = 0.1
    max_step: float = 2.0
    divergence_bound: float = 50.0
    final_rounds: int = 0
    missing_strategy: str = "auto"

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if self.param_tol <= 0 or self.score_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.ess_floor < 1:
            raise ValueError(f"ess_floor must lie in (0, 1), got {self.ess_floor}")
        if self.max_step <= 0 or self.divergence_bound <= 0:
            raise ValueError("max_step and divergence_bound must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.final_rounds < 0:
            raise ValueError("final_rounds must be >= 0")
        if self.missing_strategy not in MISSING_STRATEGIES:
            raise ValueError(f"missing_strategy must be one of {MISSING_STRATEGIES}")
        if isinstance(self.theta0, str) and self.theta0 != "mple":
            raise ValueError(f"theta0 must be 'mple' or a vector, got {self.theta0!r}")


@dataclass
class FitResult:
    theta: np.ndarray
    std_errors: np.ndarray | None
    log_lik_ratio: float
    converged: bool
    iterations: int
    method: str
    labels: list[str]
    model: str
    n: int
    seed: int | None = None
    mc_settings: dict | None = None
    privacy: dict | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        """Flat, JSON-friendly dictionary."""
        rec = {
            "method": self.method,
            "model": self.model,
            "n": self.n,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "log_lik_ratio": float(self.log_lik_ratio),
            "seed": self.seed,
        }
        for k, lab in enumerate(self.labels):
            rec[f"estimate.{lab}"] = float(self.theta[k])
            rec[f"stderr.{lab}"] = (
                None if self.std_errors is None else float(self.std_errors[k])
            )
        for k, v in (self.privacy or {}).items():
            rec[f"privacy.{k}"] = v
        for k, v in (self.mc_settings or {}).items():
            rec[f"mc.{k}"] = v
        for k, v in self.diagnostics.items():
            rec[f"diag.{k}"] = _jsonable(v)
        return rec

    def to_line(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    def write(self, path) -> None:
        """Write as ``key = value`` lines (values JSON-encoded)."""
        rec = self.to_record()
        Path(path).write_text("".join(f"{k} = {json.dumps(v)}\n" for k, v in rec.items()))

    @classmethod
    def from_record(cls, rec: dict) -> "FitResult":
        spec = ModelSpec(rec["model"])
        labels = spec.labels
        theta = np.array([rec[f"estimate.{lab}"] for lab in labels], dtype=float)
        se = [rec.get(f"stderr.{lab}") for lab in labels]
        std = None if any(s is None for s in se) else np.array(se, dtype=float)
        pick = lambda prefix: {  # noqa: E731
            k[len(prefix):]: v for k, v in rec.items() if k.startswith(prefix)
        }
        return cls(
            theta, std, rec["log_lik_ratio"], rec["converged"], rec["iterations"],
            rec["method"], labels, rec["model"], rec["n"], rec.get("seed"),
            pick("mc.") or None, pick("privacy.") or None, pick("diag."),
        )

    @classmethod
    def read(cls, path) -> "FitResult":
        rec = {}
        for raw in Path(path).read_text().splitlines():
            if not raw.strip():
                continue
            key, _, value = raw.partition("=")
            rec[key.strip()] = json.loads(value.strip())
        return cls.from_record(rec)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def derive_seed(seed, *keys) -> int:
    """Deterministic 32-bit child seed from ``seed`` and integer ``keys``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1)[0])


def _entropy(seed):
    return np.random.SeedSequence(seed).entropy


# ---------------------------------------------------------------------------
# maximum pseudo-likelihood


def fit_mple(y: Graph, spec: ModelSpec, max_iter: int = 100, tol: float = 1e-10) -> FitResult:
    """Maximum pseudo-likelihood by iteratively reweighted least squares.

    On separation (the pseudo-likelihood has no finite maximiser) the result
    has ``converged=False`` and a zero parameter vector.
    """
    y = check_graph(y, name="y")
    X = change_stats_all(y, spec)
    z = y.dyads.astype(float)
    beta = np.zeros(spec.q)
    message = None
    converged = False
    if z.all() or not z.any():
        message = "separation: released graph is empty or complete"
    else:
        for it in range(1, max_iter + 1):
            p = expit(X @ beta)
            w = p * (1 - p)
            H = X.T @ (X * w[:, None])
            grad = X.T @ (z - p)
            step, *_ = np.linalg.lstsq(H, grad, rcond=None)
            beta = beta + step
            if np.max(np.abs(beta)) > 50:
                message = "separation: pseudo-likelihood diverges"
                break
            if np.max(np.abs(step)) < tol:
                converged = True
                break
        else:
            message = "IRLS did not converge"
        if converged and np.linalg.matrix_rank(H) < spec.q:
            converged, message = False, "pseudo-likelihood is flat in some direction"
    se = None
    if converged:
        se = np.sqrt(np.diag(np.linalg.inv(H)))
    else:
        warnings.warn(f"MPLE failed ({message}); falling back to zeros", ConvergenceWarning,
                      stacklevel=2)
        beta = np.zeros(spec.q)
    return FitResult(
        beta, se, 0.0, converged, it if z.any() and not z.all() else 0, "mple",
        spec.labels, str(spec), y.n, diagnostics={"message": message} if message else {},
    )


def mple(y: Graph, spec: ModelSpec) -> np.ndarray:
    """Maximum pseudo-likelihood estimate (zeros, with a warning, on separation)."""
    return fit_mple(y, spec).theta


# ---------------------------------------------------------------------------
# normalising-constant ratios


def _log_mean_exp(a) -> float:
    return float(logsumexp(a) - math.log(len(a)))


def log_ratio_naive(theta, theta0, S: SampleSet) -> float:
    """``log c(theta) / c(theta0)`` estimated from draws at ``theta0``.

    Uses ``c(theta) / c(theta0) = E_theta0[exp((theta - theta0) . g(X))]``.
    """
    q = S.stats.shape[1]
    theta = check_vector(theta, q)
    theta0 = check_vector(theta0, q, "theta0")
    d = theta - theta0
    if not d.any():
        return 0.0
    return _log_mean_exp(S.stats @ d)


def privacy_log_weights(S: SampleSet, y: Graph, params: PrivacyParams) -> np.ndarray:
    """``log P(y | X_i)`` for every retained graph of ``S``."""
    if S.dyads is None:
        raise ValueError("sample set does not retain graphs; sample with keep_graphs=True")
    if S.dyads.shape[1] != y.n_dyads:
        raise ValueError(
            f"sampled graphs have {S.dyads.shape[1]} dyads, released graph {y.n_dyads}"
        )
    return log_conditional_dyads(y.dyads, S.dyads, params)


def log_ratio_missing(theta, theta0, S: SampleSet, y: Graph, params: PrivacyParams,
                      log_weights=None) -> float:
    """``log c(theta | y) / c(theta0)`` from draws at ``theta0``, where
    ``c(theta | y) = sum_x exp(theta . g(x)) P(y | x)``.

    ``log_weights`` may carry precomputed :func:`privacy_log_weights`.
    """
    q = S.stats.shape[1]
    theta = check_vector(theta, q)
    theta0 = check_vector(theta0, q, "theta0")
    lw = privacy_log_weights(S, y, params) if log_weights is None else log_weights
    return _log_mean_exp(S.stats @ (theta - theta0) + lw)


# ---------------------------------------------------------------------------
# Monte Carlo objective


class _Moments(NamedTuple):
    lme: float
    mean: np.ndarray
    cov: np.ndarray
    ess: float


def _moments(G, logits) -> _Moments:
    finite = np.isfinite(logits)
    if not finite.any():
        q = G.shape[1]
        return _Moments(-math.inf, np.full(q, np.nan), np.full((q, q), np.nan), 0.0)
    lse = logsumexp(logits)
    w = np.exp(logits - lse)
    mean = w @ G
    C = G - mean
    cov = (C * w[:, None]).T @ C
    return _Moments(float(lse - math.log(len(logits))), mean, cov, float(1.0 / np.sum(w * w)))


class _Eval(NamedTuple):
    value: float
    grad: np.ndarray
    num: _Moments
    den: _Moments

    @property
    def hess(self):
        return self.num.cov - self.den.cov


class _GeyerThompson:
    """Approximate ``l(theta) - l(theta0)`` from draws at ``theta0``.

    ``l(theta) = log sum_x w(x) e^{theta.g(x)} - log sum_x e^{theta.g(x)}``.
    The numerator is represented by statistics ``num_stats`` with log base
    weights ``num_logw`` (a single row ``g(y)`` for the naive likelihood),
    the denominator by unconditional draws ``den_stats``.
    """

    def __init__(self, theta0, num_stats, num_logw, den_stats):
        self.theta0 = np.asarray(theta0, float)
        self.num_stats = np.atleast_2d(num_stats)
        self.num_logw = np.asarray(num_logw, float)
        self.den_stats = den_stats
        self.num_is_mc = self.num_stats.shape[0] > 1
        self._offset = 0.0
        ev0 = self(self.theta0)
        self._offset = ev0.value
        # fixed base weights cost ESS before any step; only the tilt counts
        self._num_ess0 = ev0.num.ess

    def __call__(self, theta) -> _Eval:
        d = theta - self.theta0
        num = _moments(self.num_stats, self.num_stats @ d + self.num_logw)
        den = _moments(self.den_stats, self.den_stats @ d)
        return _Eval(num.lme - den.lme - self._offset, num.mean - den.mean, num, den)

    def ess_ok(self, ev: _Eval, floor: float) -> bool:
        ok = ev.den.ess >= floor * self.den_stats.shape[0]
        if self.num_is_mc:
            ok = ok and ev.num.ess >= floor * self._num_ess0
        return ok


def _ascent_direction(grad, hess, fallback):
    try:
        L = np.linalg.cholesky(-hess)
        return np.linalg.solve(L.T, np.linalg.solve(L, grad)), "newton"
    except np.linalg.LinAlgError:
        pass
    # information of the unconditional model is positive semi-definite
    ridge = 1e-8 * max(np.trace(fallback), 1e-12)
    A = fallback + ridge * np.eye(len(grad))
    return np.linalg.lstsq(A, grad, rcond=None)[0], "scoring"


def _maximize(obj: _GeyerThompson, floor: float, radius: float = math.inf,
              max_steps: int = 100):
    """Damped Newton ascent of the approximate objective inside the region
    where importance weights keep an effective sample size above ``floor``
    and no coordinate moves more than ``radius`` from the anchor.

    Returns ``(theta, eval, limited)``; ``limited`` is set when either
    constraint stopped the ascent.
    """
    theta = obj.theta0.copy()
    ev = obj(theta)
    limited = False
    for _ in range(max_steps):
        direction, _ = _ascent_direction(ev.grad, ev.hess, ev.den.cov)
        step = 1.0
        accepted = False
        while step > 1e-8:
            cand = theta + step * direction
            if np.max(np.abs(cand - obj.theta0)) > radius:
                limited = True
                step *= 0.5
                continue
            cev = obj(cand)
            if not obj.ess_ok(cev, floor):
                limited = True
            elif np.isfinite(cev.value) and cev.value >= ev.value - 1e-12:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        moved = np.max(np.abs(cand - theta))
        theta, ev = cand, cev
        if limited or moved < 1e-10:
            break
    return theta, ev, limited


def _batch_inflation(G, n_batches: int = 20) -> np.ndarray:
    """Per-statistic ratio of long-run to marginal variance (>= 1)."""
    M = G.shape[0]
    if M < 4 * n_batches:
        return np.ones(G.shape[1])
    b = M // n_batches
    means = G[: b * n_batches].reshape(n_batches, b, -1).mean(axis=1)
    var = G.var(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        tau = b * means.var(axis=0, ddof=1) / var
    return np.where(np.isfinite(tau), np.maximum(tau, 1.0), 1.0)


def _score_statistic(obj: _GeyerThompson, ev0: _Eval) -> float:
    """Squared Mahalanobis norm of the score at the anchor over the dimension."""
    q = len(ev0.grad)
    t = np.sqrt(_batch_inflation(obj.den_stats))
    V = ev0.den.cov * np.outer(t, t) / obj.den_stats.shape[0]
    if obj.num_is_mc:
        t = np.sqrt(_batch_inflation(obj.num_stats))
        V = V + ev0.num.cov * np.outer(t, t) / max(ev0.num.ess, 1.0)
    return float(ev0.grad @ np.linalg.pinv(V) @ ev0.grad) / q


def _initial_theta(y, spec, ecfg):
    if isinstance(ecfg.theta0, str):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            res = fit_mple(y, spec)
        return res.theta, res.converged
    return check_vector(ecfg.theta0, spec.q, "theta0").copy(), True


def _inverse_information(info):
    """Inverse of a (possibly noisy) information matrix, ridge-damped until
    positive definite. Returns ``(inverse, ridge)``."""
    info = 0.5 * (info + info.T)
    scale = max(float(np.max(np.abs(np.diag(info)))), 1e-12)
    ridge = 0.0
    for _ in range(30):
        try:
            np.linalg.cholesky(info + ridge * np.eye(len(info)))
            return np.linalg.inv(info + ridge * np.eye(len(info))), ridge
        except np.linalg.LinAlgError:
            ridge = scale * 1e-8 if ridge == 0 else ridge * 10
    return np.full_like(info, np.nan), ridge


def _mc_fit(y, spec, ecfg, scfg, draw, method, privacy=None):
    """Shared outer loop for the Monte Carlo estimators.

    ``draw(theta0, iteration, seed)`` returns ``(num_stats, num_logw,
    den_stats, info)`` for the anchor ``theta0``.
    """
    ecfg = ecfg or EstimationConfig()
    scfg = (scfg or SamplerConfig()).resolved(y.n_dyads)
    seed = _entropy(scfg.seed)
    theta0, start_ok = _initial_theta(y, spec, ecfg)
    history = []
    converged = False
    message = "Monte Carlo MLE did not converge (possible degeneracy)"
    obj = ev = None
    theta = theta0
    it = 0
    for it in range(1, ecfg.max_iter + 1):
        num_stats, num_logw, den_stats, info = draw(theta0, it, seed)
        obj = _GeyerThompson(theta0, num_stats, num_logw, den_stats)
        ev0 = obj(theta0)
        if not np.any(np.ptp(den_stats, axis=0) > 0):
            message = "sampler produced identical draws; the anchor is degenerate"
            break
        theta, ev, limited = _maximize(obj, ecfg.ess_floor, ecfg.max_step)
        score = _score_statistic(obj, ev0)
        step = float(np.max(np.abs(theta - theta0)))
        history.append({"iteration": it, "theta0": theta0.tolist(), "step": step,
                        "score_stat": score, "ess_limited": limited, **info})
        if not np.all(np.isfinite(theta)):
            message = "non-finite estimate"
            break
        if np.max(np.abs(theta)) > ecfg.divergence_bound:
            message = "estimate diverging; the MLE may not exist"
            break
        if not limited and (step < ecfg.param_tol or score < ecfg.score_tol):
            converged = True
            break
        theta0 = theta if limited else theta0 + ecfg.damping * (theta - theta0)

    diagnostics = {"history": history, "mple_converged": start_ok}
    if converged and ecfg.final_rounds:
        anchor = theta
        estimates = [theta]
        for _ in range(ecfg.final_rounds):
            it += 1
            num_stats, num_logw, den_stats, info = draw(anchor, it, seed)
            obj = _GeyerThompson(anchor, num_stats, num_logw, den_stats)
            est, _, limited = _maximize(obj, ecfg.ess_floor, ecfg.max_step)
            estimates.append(est)
            history.append({"iteration": it, "theta0": anchor.tolist(),
                            "step": float(np.max(np.abs(est - anchor))),
                            "score_stat": _score_statistic(obj, obj(anchor)),
                            "ess_limited": limited, "final_round": True, **info})
        estimates = np.array(estimates)
        theta = estimates.mean(axis=0)
        ev = obj(theta)
        diagnostics["mc_std_errors"] = (estimates.std(axis=0, ddof=1)
                                        / math.sqrt(len(estimates))).tolist()
    std = None
    if converged:
        if method == "naive":
            info_matrix = ev.den.cov
        else:
            info_matrix = -_numeric_hessian(obj, theta)
        inv, ridge = _inverse_information(info_matrix)
        std = np.sqrt(np.clip(np.diag(inv), 0, None))
        diagnostics["hessian_ridge"] = ridge
        diagnostics["ess"] = ev.den.ess
    else:
        diagnostics["message"] = message
        warnings.warn(diagnostics["message"], ConvergenceWarning, stacklevel=3)
    return FitResult(
        theta, std, float(ev.value) if ev is not None else math.nan, converged, it,
        method, spec.labels, str(spec), y.n, seed, scfg.as_dict() | {"seed": seed},
        privacy, diagnostics,
    )


def _numeric_hessian(obj: _GeyerThompson, theta, rel_step: float = 1e-4):
    """Central differences of the analytic gradient; all evaluations reuse
    the same draws."""
    q = len(theta)
    H = np.empty((q, q))
    for k in range(q):
        h = rel_step * max(1.0, abs(theta[k]))
        e = np.zeros(q)
        e[k] = h
        H[:, k] = (obj(theta + e).grad - obj(theta - e).grad) / (2 * h)
    return 0.5 * (H + H.T)


def _chain_cfg(scfg, seed, it, chain):
    return replace(scfg, seed=derive_seed(seed, it, chain))


def fit_naive(y: Graph, spec: ModelSpec, ecfg: EstimationConfig | None = None,
              scfg: SamplerConfig | None = None) -> FitResult:
    """Monte Carlo MLE that ignores the privacy mechanism.

    Iterates: sample at the anchor, maximise the approximate log-likelihood
    ``(theta - theta0) . g(y) - log c(theta) / c(theta0)``, move the anchor.
    """
    y = check_graph(y, name="y")
    spec.validate(y)
    gy = stats(y, spec)
    scfg = (scfg or SamplerConfig()).resolved(y.n_dyads)

    def draw(theta0, it, seed):
        S = sample(theta0, spec, y, _chain_cfg(scfg, seed, it, 0))
        return gy[None, :], np.zeros(1), S.stats, {"acceptance": S.acceptance_rate}

    return _mc_fit(y, spec, ecfg, scfg, draw, "naive")


def fit_missing(y: Graph, spec: ModelSpec, params: PrivacyParams,
                ecfg: EstimationConfig | None = None,
                scfg: SamplerConfig | None = None) -> FitResult:
    """Monte Carlo MLE of the missing-data likelihood ``c(theta | y) / c(theta)``.

    Both constants are estimated at every iteration from draws at the
    current anchor, with the same unconditional draws used for
    ``c(theta)`` throughout. See :class:`EstimationConfig` for how
    ``c(theta | y)`` is estimated.
    """
    y = check_graph(y, name="y")
    spec.validate(y)
    ecfg = ecfg or EstimationConfig()
    scfg = (scfg or SamplerConfig()).resolved(y.n_dyads)
    strategy = ecfg.missing_strategy

    def draw(theta0, it, seed):
        keep = strategy != "conditional"
        S = sample(theta0, spec, y, _chain_cfg(scfg, seed, it, 0), keep_graphs=keep)
        info = {"acceptance": S.acceptance_rate}
        if keep:
            lw = privacy_log_weights(S, y, params)
            ess = _moments(S.stats, lw).ess
            info["privacy_weight_ess"] = ess
            if strategy == "weighted" or ess >= ecfg.ess_floor * len(S):
                info["strategy"] = "weighted"
                return S.stats, lw, S.stats, info
        C = sample_conditional(theta0, spec, y, params, _chain_cfg(scfg, seed, it, 1))
        info["strategy"] = "conditional"
        info["conditional_acceptance"] = C.acceptance_rate
        return C.stats, np.zeros(len(C)), S.stats, info

    privacy = {"p00": params.p00, "p11": params.p11, "epsilon": params.epsilon}
    return _mc_fit(y, spec, ecfg, scfg, draw, "missing", privacy)


# ---------------------------------------------------------------------------
# exact oracles


def _exact_loglik(theta, G, gy, lw):
    """Exact log-likelihood with gradient and Hessian.

    Naive when ``lw`` is None, else the missing-data likelihood with
    ``lw[x] = log P(y | x)`` over the enumerated graphs.
    """
    eta = G @ theta
    log_c = logsumexp(eta)
    p = np.exp(eta - log_c)
    mean_p = p @ G
    cov_p = (G - mean_p).T @ ((G - mean_p) * p[:, None])
    if lw is None:
        return float(theta @ gy - log_c), gy - mean_p, -cov_p, cov_p
    post_logits = eta + lw
    log_cy = logsumexp(post_logits)
    r = np.exp(post_logits - log_cy)
    mean_r = r @ G
    cov_r = (G - mean_r).T @ ((G - mean_r) * r[:, None])
    return float(log_cy - log_c), mean_r - mean_p, cov_r - cov_p, cov_p


def _fit_enumerated(y, spec, params, max_iter=500, grad_tol=1e-11, bound=50.0, flat_tol=1e-8):
    D, G = enumerate_graphs(spec, y.n, y.covariates)
    gy = stats(y, spec)
    lw = None if params is None else log_conditional_dyads(y.dyads, D, params)
    theta = np.zeros(spec.q)
    val, grad, hess, cov_p = _exact_loglik(theta, G, gy, lw)
    val0 = val
    trace = [val]
    converged = False
    message = None
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(grad)) < grad_tol:
            converged = True
            break
        direction, _ = _ascent_direction(grad, hess, cov_p)
        step = 1.0
        while step > 1e-12:
            cand = theta + step * direction
            cval, cgrad, chess, ccov = _exact_loglik(cand, G, gy, lw)
            if cval >= val:
                break
            step *= 0.5
        else:
            # no ascent possible at machine precision: a stationary point
            converged = np.max(np.abs(grad)) < 1e-7
            break
        theta, val, grad, hess, cov_p = cand, cval, cgrad, chess, ccov
        trace.append(val)
        if np.linalg.norm(theta) > bound:
            message = "MLE does not exist: likelihood increases without bound"
            break
    if converged and np.linalg.eigvalsh(-hess).min() < flat_tol:
        # the missing-data score decays toward the boundary, so a tiny
        # gradient alone does not certify an interior maximum
        converged = False
        message = "MLE does not exist: likelihood flattens toward the boundary"
    diagnostics = {"trace": trace}
    std = None
    if converged:
        inv, _ = _inverse_information(-hess)
        std = np.sqrt(np.clip(np.diag(inv), 0, None))
    else:
        message = message or "exact Newton iterations exhausted"
        diagnostics["message"] = message
        diagnostics["divergence_direction"] = (theta / np.linalg.norm(theta)).tolist()
    privacy = None if params is None else {"p00": params.p00, "p11": params.p11,
                                           "epsilon": params.epsilon}
    return FitResult(
        theta, std, val - val0, converged, it,
        "exact" if params is None else "exact_missing",
        spec.labels, str(spec), y.n, None, None, privacy, diagnostics,
    )


def fit_exact(y: Graph, spec: ModelSpec) -> FitResult:
    """Exact MLE by enumerating every graph on ``y.n <= 5`` nodes."""
    y = check_graph(y, name="y")
    return _fit_enumerated(y, spec, None)


def fit_exact_missing(y: Graph, spec: ModelSpec, params: PrivacyParams) -> FitResult:
    """Exact missing-data MLE by enumeration (``y.n <= 5``)."""
    y = check_graph(y, name="y")
    return _fit_enumerated(y, spec, params)


def exact_loglik(theta, y: Graph, spec: ModelSpec, params: PrivacyParams | None = None) -> float:
    """Exact (missing-data, when ``params`` is given) log-likelihood."""
    D, G = enumerate_graphs(spec, y.n, y.covariates)
    lw = None if params is None else log_conditional_dyads(y.dyads, D, params)
    return _exact_loglik(check_vector(theta, spec.q), G, stats(y, spec), lw)[0]


def fit(y, spec, method="naive", params=None, ecfg=None, scfg=None) -> FitResult:
    """Dispatch on ``method``."""
    if method == "naive":
        return fit_naive(y, spec, ecfg, scfg)
    if method == "missing":
        if params is None:
            raise ValueError("missing-data fit requires privacy parameters")
        return fit_missing(y, spec, params, ecfg, scfg)
    if method == "exact":
        return fit_exact(y, spec)
    if method == "exact_missing":
        if params is None:
            raise ValueError("missing-data fit requires privacy parameters")
        return fit_exact_missing(y, spec, params)
    if method == "mple":
        return fit_mple(y, spec)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
