"""Dyad-level randomized response and its edge-DP accounting."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .graph import Graph
from .validation import check_graph, check_probability, check_same_size


def epsilon_general(p00: float, p11: float) -> float:
    """Edge-DP level of randomized response with retention probabilities
    ``p00`` (non-edges) and ``p11`` (edges).

    Returns ``inf`` when either probability is 1.
    """
    p00 = check_probability(p00, "p00")
    p11 = check_probability(p11, "p11")
    num = (p00, 1 - p11, 1 - p00, p11)
    den = (1 - p11, p00, p11, 1 - p00)
    ratios = []
    for a, b in zip(num, den):
        if b == 0:
            return math.inf
        ratios.append(a / b)
    # max of (r, 1/r) pairs is >= 1, so the log is never negative
    return max(0.0, math.log(max(ratios)))


def epsilon_symmetric(pi: float) -> float:
    """``-log(pi / (1 - pi))`` for flip probability ``pi`` in (0, 1/2)."""
    pi = _check_pi(pi)
    return -math.log(pi / (1 - pi))


def pi_for_epsilon(epsilon: float) -> float:
    """Flip probability giving ``epsilon``-edge DP in the symmetric mechanism."""
    epsilon = float(epsilon)
    if not epsilon > 0 or math.isinf(epsilon):
        raise ValueError(f"epsilon must be positive and finite, got {epsilon}")
    return 1.0 / (1.0 + math.exp(epsilon))


def _check_pi(pi) -> float:
    pi = float(pi)
    if not 0 < pi < 0.5:
        raise ValueError(
            f"flip probability pi={pi} outside (0, 1/2); pi >= 0.5 destroys "
            "or reverses the graph and pi = 0 is no release mechanism at all"
        )
    return pi


@dataclass(frozen=True)
class PrivacyParams:
    """Retention probabilities of the randomized response mechanism.

    ``p00`` is the probability that a non-edge is reported as a non-edge,
    ``p11`` the probability that an edge is reported as an edge. Use
    :meth:`symmetric` or :meth:`from_epsilon` for the single flip probability
    form.
    """

    p00: float
    p11: float

    def __post_init__(self):
        object.__setattr__(self, "p00", check_probability(self.p00, "p00"))
        object.__setattr__(self, "p11", check_probability(self.p11, "p11"))
        if self.degenerate:
            warnings.warn(
                "p00 = p11 = 0.5: released graph carries no information (epsilon = 0)",
                stacklevel=3,
            )

    @classmethod
    def symmetric(cls, pi: float) -> "PrivacyParams":
        pi = _check_pi(pi)
        return cls(1.0 - pi, 1.0 - pi)

    @classmethod
    def from_epsilon(cls, epsilon: float) -> "PrivacyParams":
        return cls.symmetric(pi_for_epsilon(epsilon))

    @classmethod
    def none(cls) -> "PrivacyParams":
        """The identity mechanism (no privacy)."""
        return cls(1.0, 1.0)

    @property
    def is_symmetric(self) -> bool:
        return self.p00 == self.p11

    @property
    def pi(self) -> float | None:
        """Flip probability for symmetric parameters, else ``None``."""
        return 1.0 - self.p00 if self.is_symmetric else None

    @property
    def epsilon(self) -> float:
        return epsilon_general(self.p00, self.p11)

    @property
    def degenerate(self) -> bool:
        return self.p00 == 0.5 and self.p11 == 0.5

    def log_table(self) -> np.ndarray:
        """``log P(y_ij = b | x_ij = a)`` indexed ``[a, b]``."""
        with np.errstate(divide="ignore"):
            return np.log(
                np.array([[self.p00, 1 - self.p00], [1 - self.p11, self.p11]])
            )


def release(x: Graph, params: PrivacyParams, seed=None) -> Graph:
    """Release ``x`` through randomized response.

    Every dyad is reported truthfully with probability ``p11`` if it is an
    edge and ``p00`` otherwise, independently. Covariates are copied.
    ``seed`` is anything accepted by :func:`numpy.random.default_rng`.
    """
    rng = np.random.default_rng(seed)
    u = rng.random(x.n_dyads)
    keep = np.where(x.dyads, u < params.p11, u < params.p00)
    return x.with_dyads(x.dyads ^ ~keep)


def dyad_cell_counts(y_dyads: np.ndarray, x_dyads: np.ndarray) -> np.ndarray:
    """Counts of ``(x, y)`` dyad states ``[[n00, n01], [n10, n11]]``.

    ``x_dyads`` may be a single vector or a ``(M, N)`` stack, giving an
    ``(M, 2, 2)`` result.
    """
    x = np.asarray(x_dyads, dtype=bool)
    y = np.asarray(y_dyads, dtype=bool)
    n11 = np.count_nonzero(x & y, axis=-1)
    n10 = np.count_nonzero(x & ~y, axis=-1)
    n01 = np.count_nonzero(~x & y, axis=-1)
    n00 = x.shape[-1] - n11 - n10 - n01
    return np.stack([np.stack([n00, n01], -1), np.stack([n10, n11], -1)], -2)


def log_conditional_dyads(y_dyads, x_dyads, params: PrivacyParams) -> np.ndarray:
    """Vectorised ``log P(Y = y | X = x)`` over stacked ``x`` dyad vectors."""
    counts = dyad_cell_counts(y_dyads, x_dyads)
    table = params.log_table()
    # 0 * log(0) must vanish: only cells that actually occur contribute
    with np.errstate(invalid="ignore"):
        terms = np.where(counts > 0, counts * table, 0.0)
    return terms.sum(axis=(-2, -1))


def log_conditional(y: Graph, x: Graph, params: PrivacyParams) -> float:
    """Log-probability that the mechanism turns ``x`` into ``y``."""
    check_same_size(x, y)
    if params.is_symmetric:
        pi = params.pi
        delta = int(np.count_nonzero(x.dyads != y.dyads))
        same = x.n_dyads - delta
        out = 0.0
        if delta:
            out += -math.inf if pi == 0 else delta * math.log(pi)
        if same:
            out += same * math.log1p(-pi)
        return out
    return float(log_conditional_dyads(y.dyads, x.dyads, params))


# ---------------------------------------------------------------------------
# metadata sidecar


def write_sidecar(path, params: PrivacyParams, seed, n: int, **extra) -> None:
    """Write the public release parameters as ``key = value`` lines."""
    items = {
        "p00": repr(params.p00),
        "p11": repr(params.p11),
        "pi": repr(params.pi) if params.is_symmetric else "",
        "epsilon": repr(params.epsilon),
        "seed": str(seed),
        "n": str(n),
        "dyads": str(n * (n - 1) // 2),
    }
    items.update({k: str(v) for k, v in extra.items()})
    Path(path).write_text("".join(f"{k} = {v}\n" for k, v in items.items()))


def read_sidecar(path) -> tuple[PrivacyParams, dict[str, str]]:
    meta = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}: malformed line {raw!r}")
        meta[key.strip()] = value.strip()
    try:
        params = PrivacyParams(float(meta["p00"]), float(meta["p11"]))
    except KeyError as exc:
        raise ValueError(f"{path}: missing key {exc.args[0]!r}") from None
    return params, meta


class RandomizedResponse(TransformerMixin, BaseEstimator):
    """Transformer that releases graphs under edge differential privacy.

    Exactly one of ``pi``, ``epsilon`` or the pair ``(p00, p11)`` must be
    set. ``transform`` accepts a :class:`Graph` or an adjacency matrix and
    returns the same kind of object.

    Parameters
    ----------
    pi : float, optional
        Symmetric flip probability in (0, 1/2).
    epsilon : float, optional
        Target privacy level; converted to ``pi``.
    p00, p11 : float, optional
        Retention probabilities of non-edges and edges.
    random_state : int, Generator or None
        An integer seed makes every ``transform`` call reproducible.
    """

    def __init__(self, pi=None, epsilon=None, p00=None, p11=None, random_state=None):
        self.pi = pi
        self.epsilon = epsilon
        self.p00 = p00
        self.p11 = p11
        self.random_state = random_state

    def _params(self) -> PrivacyParams:
        given = [self.pi is not None, self.epsilon is not None,
                 self.p00 is not None or self.p11 is not None]
        if sum(given) != 1:
            raise ValueError("set exactly one of pi, epsilon, or (p00, p11)")
        if self.pi is not None:
            return PrivacyParams.symmetric(self.pi)
        if self.epsilon is not None:
            return PrivacyParams.from_epsilon(self.epsilon)
        if self.p00 is None or self.p11 is None:
            raise ValueError("p00 and p11 must be given together")
        return PrivacyParams(self.p00, self.p11)

    def fit(self, X=None, y=None):
        self.params_ = self._params()
        self.epsilon_ = self.params_.epsilon
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        g = check_graph(X, name="X")
        out = release(g, self.params_, self.random_state)
        return out if isinstance(X, Graph) else out.adjacency()
