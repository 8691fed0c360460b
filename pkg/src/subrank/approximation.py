"""Least-squares projection onto ``L_xi`` by Project and Forget, quadratic case.

The objective is ``0.5 * ||x - f||^2`` started from ``x = f``.  Every row is
kept in the oriented form ``u . x >= 0`` with ``u = xi_ij * A^(ij)_z`` and
``||u||^2 = 4``.  A Bregman step on row ``u`` moves ``x`` by ``-c * u`` and the
row's dual by ``-c``, where ``c = min(z_row, (u . x) / 4)``.  As a result
``x = f + sum z_row * u`` holds exactly at every iterate.

Dual corrections are indexed by flat row id ``pair * 2**(n-2) + position``, so
a row that is forgotten and later re-added keeps its history.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .cones import XiPattern, _row_masks
from .errors import DomainError
from .lattice import SetFunctionTable, masks_of_size


@njit(cache=True)
def _row_value(x, rm, p, k):
    return x[rm[p, 0, k]] + x[rm[p, 1, k]] - x[rm[p, 2, k]] - x[rm[p, 3, k]]


@njit(cache=True)
def _scan_all(x, rm, signs, tol, out):
    """Write violated flat ids to ``out``; return (count, max violation)."""
    K = rm.shape[2]
    cnt = 0
    worst = 0.0
    for p in range(rm.shape[0]):
        s = signs[p]
        if s == 0:
            continue
        for k in range(K):
            v = s * _row_value(x, rm, p, k)
            if -v > worst:
                worst = -v
            if v < -tol:
                out[cnt] = p * K + k
                cnt += 1
    return cnt, worst


@njit(cache=True)
def _scan_some(x, rm, signs, cand, tol, out):
    K = rm.shape[2]
    cnt = 0
    for q in cand:
        p = q // K
        if signs[p] * _row_value(x, rm, p, q % K) < -tol:
            out[cnt] = q
            cnt += 1
    return cnt


@njit(cache=True)
def _project_pass(x, z, rows, rm, signs):
    """One Bregman step per listed row, in order; returns the step count."""
    K = rm.shape[2]
    for q in rows:
        p = q // K
        k = q % K
        s = signs[p]
        theta = s * _row_value(x, rm, p, k) * 0.25
        c = theta if theta < z[q] else z[q]
        if c == 0.0:
            continue
        d = c * s
        x[rm[p, 0, k]] -= d
        x[rm[p, 1, k]] -= d
        x[rm[p, 2, k]] += d
        x[rm[p, 3, k]] += d
        z[q] -= c
    return rows.shape[0]


@dataclass
class ProjectionOptions:
    oracle: str = "deterministic"
    samples_per_pair: int | None = None   # None means 5n
    tol_violation: float = 1e-8
    tol_step: float = 1e-10
    max_iterations: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.oracle not in ("deterministic", "random"):
            raise ValueError(f"unknown oracle {self.oracle!r}")
        if not (self.tol_violation > 0 and self.tol_step > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.samples_per_pair is not None and self.samples_per_pair < 1:
            raise ValueError("samples_per_pair must be positive")


@dataclass
class ProjectionState:
    x: np.ndarray
    z: np.ndarray
    active: np.ndarray
    iteration: int = 0


@dataclass
class ProjectionReport:
    iterations: int
    projections: int
    max_violation: float
    distance: float
    converged: bool
    active_constraints: int
    state: ProjectionState = field(repr=False, default=None)


def _merge(active: np.ndarray, new: np.ndarray, member: np.ndarray) -> np.ndarray:
    """``L`` followed by the rows of ``new`` not already in it."""
    fresh = new[~member[new]]
    member[fresh] = True
    return np.concatenate((active, fresh)) if fresh.size else active


class _Oracle:
    def __init__(self, n, signs, opts: ProjectionOptions):
        self.rm = _row_masks(n)
        self.signs = signs
        self.tol = opts.tol_violation
        K = self.rm.shape[2]
        self.buf = np.empty(self.rm.shape[0] * K, dtype=np.int64)
        budget = opts.samples_per_pair if opts.samples_per_pair is not None else 5 * n
        self.k = min(budget, K)
        self.random = opts.oracle == "random" and self.k < K
        self.live = np.flatnonzero(signs)
        self.rng = np.random.Generator(np.random.PCG64(opts.seed))

    def full(self, x):
        cnt, worst = _scan_all(x, self.rm, self.signs, self.tol, self.buf)
        return self.buf[:cnt].copy(), worst

    def __call__(self, x):
        if not self.random:
            return self.full(x)[0]
        K = self.rm.shape[2]
        keys = self.rng.random((self.live.size, K))
        pick = np.argpartition(keys, self.k - 1, axis=1)[:, :self.k]
        cand = (self.live[:, None] * K + np.sort(pick, axis=1)).ravel()
        cnt = _scan_some(x, self.rm, self.signs, cand, self.tol, self.buf)
        return self.buf[:cnt].copy()


def violated_oracle(x, xi: XiPattern, opts: ProjectionOptions | None = None, rng=None) -> list[tuple[int, int]]:
    """Violated rows of ``L_xi`` at ``x`` as ``(pair position, z mask)`` tuples.

    ``rng`` overrides the generator seeded from ``opts.seed`` (random oracle only).
    """
    opts = opts or ProjectionOptions()
    x = np.ascontiguousarray(x.values if isinstance(x, SetFunctionTable) else x, dtype=np.float64)
    if x.shape[0] != 1 << xi.n:
        raise ValueError("iterate length does not match xi")
    if xi.n < 2:
        return []
    orc = _Oracle(xi.n, xi.as_array(), opts)
    if rng is not None:
        orc.rng = rng
    ids = orc(x)
    K = orc.rm.shape[2]
    return [(int(q // K), int(orc.rm[q // K, 0, q % K])) for q in ids]


def project_onto_cone(f: SetFunctionTable, xi: XiPattern, opts: ProjectionOptions | None = None):
    """Approximate Euclidean projection of ``f`` onto ``L_xi``.

    Returns ``(g, report)``.  Tolerances are relative to ``max |f|``;
    ``report.max_violation`` is in the units of ``f``.  A run that hits
    ``max_iterations`` still returns its last iterate, with ``report.converged`` False.
    """
    opts = opts or ProjectionOptions()
    if xi.n != f.n:
        raise ValueError("pattern and function disagree on n")
    x = f.values.copy()
    if f.n < 2 or not any(xi.xi):
        return SetFunctionTable(f.n, x), ProjectionReport(0, 0, 0.0, 0.0, True, 0,
                                                          ProjectionState(x, np.zeros(0), np.zeros(0, np.int64)))
    # P(c f) = c P(f) for c > 0, so tolerances act on f scaled to max |f| = 1
    scale = float(np.max(np.abs(x)))
    if scale == 0.0:
        return SetFunctionTable(f.n, x), ProjectionReport(0, 0, 0.0, 0.0, True, 0,
                                                          ProjectionState(x, np.zeros(0), np.zeros(0, np.int64)))
    x /= scale
    signs = xi.as_array()
    orc = _Oracle(f.n, signs, opts)
    rm = orc.rm
    z = np.zeros(orc.buf.shape[0])
    member = np.zeros(z.shape[0], dtype=bool)
    active = np.zeros(0, dtype=np.int64)
    steps = 0
    converged = False
    it = 0
    while it < opts.max_iterations:
        it += 1
        prev = x.copy()
        work = _merge(active, orc(x), member)
        steps += _project_pass(x, z, work, rm, signs)
        keep = z[work] > 0.0
        member[work[~keep]] = False
        active = work[keep]
        _, worst = orc.full(x)
        if worst <= opts.tol_violation and np.max(np.abs(x - prev)) <= opts.tol_step:
            converged = True
            break
    # polish: one deterministic sweep certifies the returned point
    bad, worst = orc.full(x)
    if bad.size:
        work = _merge(active, bad, member)
        steps += _project_pass(x, z, bad, rm, signs)
        active = work[z[work] > 0.0]
        _, worst = orc.full(x)
    x *= scale
    z *= scale
    g = SetFunctionTable(f.n, x)
    state = ProjectionState(x.copy(), z, active, it)
    dist = float(np.linalg.norm(x - f.values))
    return g, ProjectionReport(it, steps, float(worst) * scale, dist, converged, int(active.size), state)


@dataclass
class ApproximationResult:
    g: SetFunctionTable
    B: int
    rel_error: float
    converged: bool
    iterations: int
    errors: dict[int, float]

    def __iter__(self):
        return iter((self.g, self.B, self.rel_error))


def best_elementary_rank_r_approximation(f: SetFunctionTable, r: int,
                                         opts: ProjectionOptions | None = None) -> ApproximationResult:
    """Best projection onto a cone sum of elementary rank ``r + 1``.

    For each ``|B| = r`` the cone keeps only pairs disjoint from ``B``, oriented
    submodular.  Ties in relative error go to the smallest ``B``.  ``converged``
    is False if any candidate projection failed to converge.
    """
    n = f.n
    if not 0 <= r <= max(n - 1, 0):
        raise DomainError(f"rank parameter r={r} outside 0..{n - 1}")
    norm = float(np.linalg.norm(f.values))
    best = None
    errors = {}
    all_ok = True
    total_it = 0
    for B in masks_of_size(n, r):
        g, rep = project_onto_cone(f, XiPattern.elementary_sum(n, B), opts)
        all_ok &= rep.converged
        total_it += rep.iterations
        rel = rep.distance / norm if norm > 0 else 0.0
        errors[B] = rel
        if best is None or rel < best[2]:
            best = (g, B, rel)
    return ApproximationResult(best[0], best[1], best[2], all_ok, total_it, errors)


def relative_error_curve(f: SetFunctionTable, opts: ProjectionOptions | None = None) -> list[float]:
    """``rel_error`` of the best approximation at each ``r = 0..n-1``."""
    return [best_elementary_rank_r_approximation(f, r, opts).rel_error for r in range(max(f.n, 1))]


def kkt_residuals(f: SetFunctionTable, g: SetFunctionTable, xi: XiPattern, state: ProjectionState):
    """``(complementarity, stationarity)`` residuals of a finished projection.

    Complementarity is the largest ``|u . g|`` over rows with positive dual;
    stationarity is ``||g - f - sum z u||_inf``.
    """
    if f.n < 2 or state.z.size == 0:
        return 0.0, float(np.max(np.abs(g.values - f.values), initial=0.0))
    rm = _row_masks(f.n)
    K = rm.shape[2]
    signs = xi.as_array()
    recon = f.values.copy()
    comp = 0.0
    for q in np.flatnonzero(state.z > 0):
        p, k = divmod(int(q), K)
        s = signs[p]
        zq = state.z[q]
        recon[rm[p, 0, k]] += zq * s
        recon[rm[p, 1, k]] += zq * s
        recon[rm[p, 2, k]] -= zq * s
        recon[rm[p, 3, k]] -= zq * s
        comp = max(comp, abs(s * _row_value(g.values, rm, p, k)))
    return comp, float(np.max(np.abs(g.values - recon)))


def num_rows(xi: XiPattern) -> int:
    """Constraint count of ``L_xi``."""
    return sum(1 for v in xi.xi if v) * (1 << (xi.n - 2)) if xi.n >= 2 else 0


__all__ = [
    "ProjectionOptions", "ProjectionState", "ProjectionReport", "ApproximationResult",
    "project_onto_cone", "violated_oracle", "best_elementary_rank_r_approximation",
    "relative_error_curve", "kkt_residuals", "num_rows",
]
