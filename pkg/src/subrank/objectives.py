"""Set-function families used in the experiments.

Each instance is an oracle: it has ``.n`` and is callable on a mask.  ``table()``
materializes it for cone and metric analysis.  Dense algebra is float64 numpy.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .lattice import SetFunctionTable, bit_matrix, check_n, elements_of, popcounts


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.PCG64(seed))


def _index(mask: int) -> np.ndarray:
    return np.array([e - 1 for e in elements_of(mask)], dtype=np.int64)


class Objective:
    n: int
    family: str = "generic"

    def __call__(self, mask: int) -> float:
        raise NotImplementedError

    def table(self) -> SetFunctionTable:
        check_n(self.n)
        return SetFunctionTable.from_callable(self.n, self)

    def metadata(self) -> dict:
        return {"family": self.family, "n": self.n}


@dataclass(eq=False)
class DeterminantalInstance(Objective):
    """``f(S) = det(I + sigma^-2 Sigma_S)``; ``f(0) = 1`` unless ``normalize``."""

    Sigma: np.ndarray
    sigma: float = 1.0
    normalize: bool = False
    family: str = field(default="det", init=False)

    def __post_init__(self):
        S = np.asarray(self.Sigma, dtype=np.float64)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError("Sigma must be square")
        if not np.allclose(S, S.T, atol=1e-12 * max(1.0, np.abs(S).max())):
            raise ValueError("Sigma must be symmetric")
        np.linalg.cholesky(S)  # LinAlgError if not PD
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        self.Sigma = S
        self._scaled = S / self.sigma ** 2

    @property
    def n(self) -> int:
        return self.Sigma.shape[0]

    def __call__(self, mask: int) -> float:
        idx = _index(mask)
        if idx.size == 0:
            val = 1.0
        else:
            sign, logdet = np.linalg.slogdet(np.eye(idx.size) + self._scaled[np.ix_(idx, idx)])
            if sign <= 0:
                raise np.linalg.LinAlgError("determinant is not positive")
            val = float(np.exp(logdet))
        return val - 1.0 if self.normalize else val

    def metadata(self):
        return {**super().metadata(), "sigma": self.sigma, "normalize": self.normalize}


@dataclass(eq=False)
class BayesianAOptInstance(Objective):
    """Variance reduction ``d/beta^2 - tr(posterior covariance)`` for observing columns of ``X``.

    Evaluated in the ``|S| x |S|`` Woodbury form
    ``(c / beta^2) tr((I + c G)^-1 G)`` with ``G = X_S^T X_S`` and ``c = (beta sigma)^-2``.
    """

    X: np.ndarray
    beta: float = 1.0
    sigma: float = 1.0
    family: str = field(default="bayes", init=False)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape[0] < 1:
            raise ValueError("X must be a d x n matrix with d >= 1")
        if self.beta <= 0 or self.sigma <= 0:
            raise ValueError("beta and sigma must be positive")
        self._c = (self.beta * self.sigma) ** -2
        self._gram = self.X.T @ self.X

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def d(self) -> int:
        return self.X.shape[0]

    def __call__(self, mask: int) -> float:
        idx = _index(mask)
        if idx.size == 0:
            return 0.0
        G = self._gram[np.ix_(idx, idx)]
        M = np.eye(idx.size) + self._c * G
        return float(self._c / self.beta ** 2 * np.trace(np.linalg.solve(M, G)))

    def direct(self, mask: int) -> float:
        """The ``d x d`` formula, for cross-checking."""
        XS = self.X[:, _index(mask)]
        inner = np.eye(self.d) + self._c * XS @ XS.T
        return float((self.d - np.trace(np.linalg.inv(inner))) / self.beta ** 2)

    def metadata(self):
        return {**super().metadata(), "d": self.d, "beta": self.beta, "sigma": self.sigma}


@dataclass(eq=False)
class ColumnSubsetInstance(Objective):
    """``g(S) = ||P_S A||_F^2`` with ``P_S`` the projector onto the span of ``A_S``.

    ``residual(S) = ||A||_F^2 - g(S)`` is the minimization form.
    """

    A: np.ndarray
    family: str = field(default="col", init=False)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        if self.A.ndim != 2:
            raise ValueError("A must be a matrix")
        self._total = float(np.sum(self.A ** 2))

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def projection(self, mask: int) -> np.ndarray:
        idx = _index(mask)
        if idx.size == 0:
            return np.zeros_like(self.A)
        AS = self.A[:, idx]
        W, *_ = np.linalg.lstsq(AS, self.A, rcond=None)
        return AS @ W

    def __call__(self, mask: int) -> float:
        return float(np.sum(self.projection(mask) ** 2))

    def residual(self, mask: int) -> float:
        return self._total - self(mask)

    def residual_table(self) -> SetFunctionTable:
        return SetFunctionTable.from_callable(self.n, self.residual)


@dataclass(eq=False)
class CoverageInstance(Objective):
    """``f(S) = |union of sets[e] for e in S|``, optionally weighted."""

    sets: tuple
    weights: dict | None = None
    family: str = field(default="coverage", init=False)

    def __post_init__(self):
        self.sets = tuple(frozenset(s) for s in self.sets)

    @property
    def n(self) -> int:
        return len(self.sets)

    def __call__(self, mask: int) -> float:
        covered = set()
        for e in elements_of(mask):
            covered |= self.sets[e - 1]
        if self.weights is None:
            return float(len(covered))
        return float(sum(self.weights.get(x, 1.0) for x in covered))


class TableObjective(Objective):
    """Wrap a table so it can be handed to the oracle-based optimizers."""

    family = "table"

    def __init__(self, f: SetFunctionTable, family: str = "table"):
        self._f = f
        self.family = family

    @property
    def n(self) -> int:
        return self._f.n

    def __call__(self, mask: int) -> float:
        return self._f(mask)

    def table(self) -> SetFunctionTable:
        return self._f


class CachedObjective(Objective):
    """Memoizes a (pure) oracle; the optimizers hit the same sets repeatedly."""

    def __init__(self, base, maxsize: int | None = 1 << 20):
        self.base = base
        self.family = getattr(base, "family", "generic")
        self._call = lru_cache(maxsize=maxsize)(base.__call__)

    @property
    def n(self) -> int:
        return self.base.n

    def __call__(self, mask: int) -> float:
        return self._call(int(mask))

    def cache_info(self):
        return self._call.cache_info()

    def metadata(self):
        meta = getattr(self.base, "metadata", None)
        return meta() if meta else super().metadata()


# -- generators -------------------------------------------------------------------

def make_determinantal(n: int, d: int | None = None, sigma: float = 0.1, seed=0,
                       normalize: bool = False) -> DeterminantalInstance:
    """``Sigma = X X^T`` for a standard Gaussian ``X`` of shape ``n x d`` (``d >= n``, default ``n``)."""
    d = n if d is None else d
    if d < n:
        raise ValueError("need d >= n for a positive-definite kernel")
    X = _rng(seed).standard_normal((n, d))
    return DeterminantalInstance(X @ X.T, sigma, normalize)


def make_bayesian(n: int, d: int = 60, beta: float = 1.0, sigma: float = 0.01, seed=0) -> BayesianAOptInstance:
    return BayesianAOptInstance(_rng(seed).standard_normal((d, n)), beta, sigma)


def make_column_subset(n: int, d: int = 60, seed=0) -> ColumnSubsetInstance:
    return ColumnSubsetInstance(_rng(seed).standard_normal((d, n)))


def column_subset_from_csv(path) -> ColumnSubsetInstance:
    return ColumnSubsetInstance(np.loadtxt(path, delimiter=",", ndmin=2))


def random_monotone(n: int, seed=0) -> SetFunctionTable:
    """Sorted uniforms handed out level by level, ascending mask order within a level."""
    check_n(n)
    vals = np.sort(_rng(seed).random(1 << n))
    order = np.lexsort((np.arange(1 << n), popcounts(n)))
    out = np.empty(1 << n)
    out[order] = vals
    return SetFunctionTable(n, out)


def concave_of_modular(weights, power: float = 0.5) -> SetFunctionTable:
    """``(w . 1_S) ** power``; submodular monotone for non-negative ``w`` and ``power <= 1``."""
    w = np.asarray(weights, dtype=np.float64)
    n = len(w)
    return SetFunctionTable(n, (bit_matrix(n) @ w) ** power)


def random_coverage(n: int, universe: int = 12, p: float = 0.3, seed=0) -> CoverageInstance:
    rng = _rng(seed)
    return CoverageInstance(tuple({x for x in range(universe) if rng.random() < p} for _ in range(n)))


# Hyperparameters per experiment stage.
PRESETS = {
    "curves": {
        "det": dict(d="n", sigma=0.1),
        "bayes": dict(d=60, beta=0.1, sigma=0.1),
        "col": dict(d=20),
    },
    "approx": {
        "det": dict(d="2n", sigma=0.1),
        "bayes": dict(d=60, beta=1.0, sigma=0.01),
        "col": dict(d=60),
    },
    "split": {
        "det": dict(d="2n", sigma=0.1),
        "bayes": dict(d=60, beta=1.0, sigma=0.01),
        "col": dict(d=40),
    },
    "large": {
        "det": dict(d="n", sigma=1.0),
        "bayes": dict(d=60, beta=0.1, sigma=0.1),
    },
}

FAMILIES = ("det", "bayes", "col", "random")


def make_instance(family: str, n: int, seed=0, preset: str = "split", **overrides):
    """Build one instance of ``family`` with preset hyperparameters.

    Returns an oracle for det/bayes/col and a ``SetFunctionTable`` for random.
    """
    if family == "random":
        return random_monotone(n, seed)
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    try:
        params = dict(PRESETS[preset][family])
    except KeyError:
        raise ValueError(f"preset {preset!r} has no {family!r} entry") from None
    params.update({k: v for k, v in overrides.items() if v is not None})
    if isinstance(params.get("d"), str):
        params["d"] = {"n": n, "2n": 2 * n}[params["d"]]
    if family == "det":
        return make_determinantal(n, params["d"], params["sigma"], seed, params.get("normalize", False))
    if family == "bayes":
        return make_bayesian(n, params["d"], params["beta"], params["sigma"], seed)
    return make_column_subset(n, params["d"], seed)
