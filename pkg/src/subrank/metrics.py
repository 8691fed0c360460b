"""Curvature and submodularity-ratio quantities, plus the guarantee formulas they feed.

Every metric here is an exact exponential sweep guarded by ``METRIC_MAX_N``.
Terms whose denominator is at most ``eps = 1e-12 * max(1, max|f|)`` are skipped.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import SizeGuardError, UndefinedValueError
from .lattice import (SetFunctionTable, bit, bit_matrix, is_monotone, masks_of_size,
                      popcounts, restrict, submasks)

METRIC_MAX_N = 12
SPLIT_METRIC_MAX_N = 10


def _guard(n: int, cap: int = METRIC_MAX_N, what: str = "metric"):
    if n > cap:
        raise SizeGuardError(f"exact {what} sweep refused for n={n} > {cap}")


def _eps(f: SetFunctionTable) -> float:
    v = f.values
    return 1e-12 * max(1.0, float(np.max(np.abs(v)))) if v.size else 1e-12


def total_curvature(f: SetFunctionTable) -> float:
    """``max over e with f(e) > f(0) of 1 - D(e | V - e) / D(e | 0)``; 0 when no such e."""
    v = f.values
    full = (1 << f.n) - 1
    best = None
    for e in range(1, f.n + 1):
        b = bit(e)
        first = v[b] - v[0]
        if first <= 0:
            continue
        last = v[full] - v[full & ~b]
        val = (first - last) / first
        best = val if best is None else max(best, val)
    return 0.0 if best is None else float(best)


def submodularity_ratio(f: SetFunctionTable, X: int | None = None, m: int | None = None) -> float:
    """Exact ``gamma_{X,m}`` over ``T <= X`` and disjoint nonempty ``S`` with ``|S| <= m``.

    Clamped at 0; capped at 1 when ``f`` is monotone.  Returns 1 if no term has
    a positive denominator.
    """
    n = f.n
    _guard(n)
    N = 1 << n
    X = N - 1 if X is None else X
    m = n if m is None else m
    v = f.values
    eps = _eps(f)
    bits = bit_matrix(n).astype(np.float64)          # (N, n)
    sizes = popcounts(n)
    masks = np.arange(N, dtype=np.int64)
    s_ok = (sizes >= 1) & (sizes <= m)
    Ts = np.array(list(submasks(X)), dtype=np.int64)
    best = np.inf
    block = max(1, (1 << 20) // N)
    singles = np.array([bit(e) for e in range(1, n + 1)], dtype=np.int64)
    for s in range(0, Ts.size, block):
        T = Ts[s:s + block]
        gains = v[T[:, None] | singles[None, :]] - v[T][:, None]   # (b, n), zero on e in T
        num = gains @ bits.T                                       # (b, N)
        den = v[T[:, None] | masks[None, :]] - v[T][:, None]
        ok = s_ok[None, :] & ((T[:, None] & masks[None, :]) == 0) & (den > eps)
        if ok.any():
            best = min(best, float(np.min(num[ok] / den[ok])))
    if not np.isfinite(best):
        return 1.0
    best = max(best, 0.0)
    if is_monotone(f):
        best = min(best, 1.0)
    return best


def _gains_excluding(f: SetFunctionTable, e: int) -> np.ndarray:
    """``d[M] = f(M + e) - f(M)`` on masks without ``e``; NaN where ``e`` is in ``M``."""
    v = f.values
    b = bit(e)
    masks = np.arange(1 << f.n, dtype=np.int64)
    d = np.full(1 << f.n, np.nan)
    lo = masks[(masks & b) == 0]
    d[lo] = v[lo | b] - v[lo]
    return d


def _mask_transform(arr: np.ndarray, n: int, skip_bit: int, superset: bool) -> np.ndarray:
    """Min over supersets (or subsets) along every bit but ``skip_bit``."""
    out = arr.copy()
    for k in range(n):
        if k == skip_bit:
            continue
        view = out.reshape(-1, 2, 1 << k)
        if superset:
            np.minimum(view[:, 0, :], view[:, 1, :], out=view[:, 0, :])
        else:
            np.minimum(view[:, 1, :], view[:, 0, :], out=view[:, 1, :])
    return out


def _curvature_sweep(f: SetFunctionTable, superset: bool) -> float:
    n = f.n
    _guard(n)
    eps = _eps(f)
    worst = 0.0
    for e in range(1, n + 1):
        d = _gains_excluding(f, e)
        # +inf on masks containing e keeps them out of every min
        filled = np.where(np.isnan(d), np.inf, d)
        ext = _mask_transform(filled, n, e - 1, superset)
        ok = ~np.isnan(d) & (d > eps)
        if ok.any():
            worst = max(worst, float(np.max(1.0 - ext[ok] / d[ok])))
    return min(max(worst, 0.0), 1.0)


def generalized_curvature(f: SetFunctionTable) -> float:
    """Smallest ``alpha`` with ``D(e | M + T) >= (1 - alpha) D(e | M)`` for all ``M <= M + T``, ``e`` outside."""
    return _curvature_sweep(f, superset=True)


def generalized_inverse_curvature(f: SetFunctionTable) -> float:
    """Smallest ``alpha~`` with ``D(e | M) >= (1 - alpha~) D(e | M + T)``."""
    return _curvature_sweep(f, superset=False)


def curvature_wrt(f: SetFunctionTable, X: int) -> float:
    v = f.values
    elems = [e for e in range(1, f.n + 1) if X & bit(e)]
    den = sum(v[bit(e)] for e in elems)
    if den <= 0:
        raise UndefinedValueError("curvature_wrt needs sum of singleton values > 0 over X")
    num = sum(v[X] - v[X & ~bit(e)] for e in elems)
    return float(1.0 - num / den)


def _split_extremes(f: SetFunctionTable, r: int, metric, outer_min: bool):
    n = f.n
    _guard(n, SPLIT_METRIC_MAX_N, "split metric")
    if r < 0:
        raise ValueError("r must be non-negative")
    best, best_B = None, 0
    for k in range(min(r, n) + 1):
        for B in masks_of_size(n, k):
            vals = [metric(restrict(f, A, B)) for A in submasks(B)]
            inner = max(vals) if outer_min else min(vals)
            if best is None or (inner < best if outer_min else inner > best):
                best, best_B = inner, B
    return float(best), best_B


def alpha_r(f: SetFunctionTable, r: int, with_witness: bool = False):
    """``min over |B| <= r`` of the worst generalized curvature across ``A <= B``."""
    val, B = _split_extremes(f, r, generalized_curvature, outer_min=True)
    return (val, B) if with_witness else val


def gamma_r(f: SetFunctionTable, r: int, with_witness: bool = False):
    """``max over |B| <= r`` of the smallest submodularity ratio across ``A <= B``."""
    val, B = _split_extremes(f, r, submodularity_ratio, outer_min=False)
    return (val, B) if with_witness else val


def split_total_curvature(f: SetFunctionTable, B: int) -> float:
    """Largest total curvature among the normalized pieces ``f_{A,B}``."""
    return max(total_curvature(restrict(f, A, B).normalized()) for A in submasks(B))


@dataclass(frozen=True)
class MetricReport:
    total_curvature: float
    generalized_curvature: float
    submodularity_ratio: float
    inverse_curvature: float
    curvature_wrt: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def metric_report(f: SetFunctionTable, X: int | None = None) -> MetricReport:
    X = (1 << f.n) - 1 if X is None else X
    try:
        c = curvature_wrt(f, X)
    except UndefinedValueError:
        c = None
    return MetricReport(total_curvature(f), generalized_curvature(f), submodularity_ratio(f),
                        generalized_inverse_curvature(f), c)


# -- guarantee formulas ---------------------------------------------------------

def bound_bian(alpha: float, gamma: float) -> float:
    """``(1 - exp(-alpha gamma)) / alpha``, equal to ``gamma`` at ``alpha = 0``."""
    if alpha < 0 or alpha > 1:
        raise ValueError("alpha must lie in [0, 1]")
    if alpha == 0:
        return float(gamma)
    return float(-math.expm1(-alpha * gamma) / alpha)


def bound_ratio_curvature(gamma_g: float, size_xstar: int, c_hat: float) -> float:
    """Ratio-minimization factor from curvature of ``f`` at the optimum."""
    if gamma_g <= 0:
        raise UndefinedValueError("submodularity ratio of g must be positive")
    k = size_xstar
    return float(k / (1 + (k - 1) * (1 - c_hat)) / gamma_g)


def bound_ratio_generalized_curvature(gamma_g: float, size_xstar: int, alpha_f: float, inv_alpha_f: float) -> float:
    """Same form with ``(1 - alpha)(1 - alpha~)`` in place of ``1 - c_hat``."""
    if gamma_g <= 0:
        raise UndefinedValueError("submodularity ratio of g must be positive")
    k = size_xstar
    return float(k / (1 + (k - 1) * (1 - alpha_f) * (1 - inv_alpha_f)) / gamma_g)


def bound_ratio_submodular(alpha_hat_f: float) -> float:
    """``1 / (1 - exp(alpha_hat - 1))``; infinite at ``alpha_hat = 1``."""
    d = -math.expm1(alpha_hat_f - 1.0)
    return math.inf if d <= 0 else float(1.0 / d)


# prior-work guarantees, for comparison tables
def bound_greedy_submodular() -> float:
    return float(-math.expm1(-1.0))


def bound_sviridenko(alpha_hat: float) -> float:
    return float(1.0 - alpha_hat / math.e)


def bound_chen(gamma: float) -> float:
    return float((1.0 + 1.0 / gamma) ** -2)


def bound_gatmiry_gamma(gamma: float, rho: float) -> float:
    return float(0.4 * gamma ** 2 / (math.sqrt(rho * gamma) + 1.0))


def bound_gatmiry_alpha(alpha: float) -> float:
    return 0.0 if alpha >= 1 else float(1.0 / (1.0 + 1.0 / (1.0 - alpha)))
