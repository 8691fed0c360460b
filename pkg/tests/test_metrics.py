import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subrank.cones import XiPattern, cone_membership
from subrank.errors import SizeGuardError, UndefinedValueError
from subrank.lattice import SetFunctionTable, bit, is_monotone, modular_from_weights, popcounts, restrict, submasks
from subrank.metrics import (alpha_r, bound_bian, bound_chen, bound_gatmiry_alpha, bound_greedy_submodular,
                             bound_ratio_submodular, bound_ratio_curvature, bound_ratio_generalized_curvature, bound_sviridenko,
                             curvature_wrt, gamma_r, generalized_curvature, generalized_inverse_curvature,
                             metric_report, split_total_curvature, submodularity_ratio, total_curvature)
from subrank.objectives import CoverageInstance, concave_of_modular, random_monotone

COV = CoverageInstance(({"a", "b"}, {"b", "c"}, {"d"})).table()


def sq(n, sign=1.0):
    return SetFunctionTable(n, sign * popcounts(n).astype(float) ** 2)


# -- brute-force oracles, straight triple loops ----------------------------------

def bf_gamma(f, X=None, m=None):
    n, v = f.n, f.values
    X = (1 << n) - 1 if X is None else X
    m = n if m is None else m
    eps = 1e-12 * max(1.0, np.abs(v).max())
    best = math.inf
    for T in submasks(X):
        for S in range(1, 1 << n):
            if S & T or bin(S).count("1") > m:
                continue
            den = v[S | T] - v[T]
            if den <= eps:
                continue
            num = sum(v[T | bit(e)] - v[T] for e in range(1, n + 1) if S & bit(e))
            best = min(best, num / den)
    if best == math.inf:
        return 1.0
    best = max(best, 0.0)
    return min(best, 1.0) if is_monotone(f) else best


def bf_alpha(f, inverse=False):
    n, v = f.n, f.values
    eps = 1e-12 * max(1.0, np.abs(v).max())
    worst = 0.0
    for e in range(1, n + 1):
        b = bit(e)
        for M in range(1 << n):
            if M & b:
                continue
            for S in range(1 << n):
                if S & b or (S & M) != M:
                    continue
                small, big = v[M | b] - v[M], v[S | b] - v[S]
                ref, other = (big, small) if inverse else (small, big)
                if ref > eps:
                    worst = max(worst, 1 - other / ref)
    return min(worst, 1.0)


# -- frozen examples ------------------------------------------------------------

def test_total_curvature_examples():
    assert total_curvature(modular_from_weights([1, 2, 3])) == 0
    assert total_curvature(COV) == pytest.approx(0.5)
    assert total_curvature(sq(3)) == pytest.approx(-4.0)
    assert total_curvature(SetFunctionTable(2, [0, 0, 0, 1])) == 0


def test_gamma_examples():
    assert submodularity_ratio(sq(2)) == pytest.approx(0.5)
    assert submodularity_ratio(modular_from_weights([1, 2, 3])) == pytest.approx(1.0)
    assert submodularity_ratio(COV) == 1.0
    assert submodularity_ratio(SetFunctionTable(2, [0, 0, 0, 0])) == 1.0
    assert submodularity_ratio(sq(2), m=1) == 1.0
    with pytest.raises(SizeGuardError):
        submodularity_ratio(SetFunctionTable(13, np.zeros(1 << 13)))


def test_alpha_examples():
    assert generalized_curvature(sq(4)) == 0
    assert generalized_inverse_curvature(COV) == 0
    mod = modular_from_weights([1, 0.5, 2])
    assert generalized_curvature(mod) == 0 and submodularity_ratio(mod) == 1
    # coverage: element 2 loses half its gain once 1 is present
    assert generalized_curvature(COV) == pytest.approx(0.5)


def test_curvature_wrt_examples():
    assert curvature_wrt(COV, 0b111) == pytest.approx(0.4)
    assert curvature_wrt(modular_from_weights([1, 2, 3]), 0b101) == pytest.approx(0.0)
    assert curvature_wrt(COV, bit(2)) == pytest.approx(0.0)
    with pytest.raises(UndefinedValueError):
        curvature_wrt(SetFunctionTable(2, [0, 0, 0, 1]), 0b11)


def test_metric_report():
    rep = metric_report(COV)
    assert rep.curvature_wrt == pytest.approx(0.4)
    assert rep.to_dict()["submodularity_ratio"] == 1.0
    assert metric_report(SetFunctionTable(2, [0, 0, 0, 1])).curvature_wrt is None


@pytest.mark.parametrize("seed", range(12))
def test_metrics_match_brute_force(seed):
    n = 3 + seed % 3
    f = random_monotone(n, seed)
    assert submodularity_ratio(f) == pytest.approx(bf_gamma(f), abs=1e-12)
    assert submodularity_ratio(f, X=0b101, m=2) == pytest.approx(bf_gamma(f, 0b101, 2), abs=1e-12)
    assert generalized_curvature(f) == pytest.approx(bf_alpha(f), abs=1e-12)
    assert generalized_inverse_curvature(f) == pytest.approx(bf_alpha(f, inverse=True), abs=1e-12)


def test_metrics_match_brute_force_structured():
    for f in (COV, sq(3), concave_of_modular([1, 2, 0.5, 3]), concave_of_modular([1, 1, 2], 2.0)):
        assert submodularity_ratio(f) == pytest.approx(bf_gamma(f), abs=1e-12)
        assert generalized_curvature(f) == pytest.approx(bf_alpha(f), abs=1e-12)
        assert generalized_inverse_curvature(f) == pytest.approx(bf_alpha(f, True), abs=1e-12)


# -- cross-module consistency ---------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2 ** 31), st.sampled_from([0.3, 0.5, 1.0, 1.7, 2.5, None]))
def test_gamma_one_iff_submodular(n, seed, power):
    if power is None:
        f = random_monotone(n, seed)
    else:
        f = concave_of_modular(np.random.default_rng(seed).uniform(0.1, 2, n), power)
    sub = cone_membership(f, XiPattern.submodular(n), tol=1e-12)
    assert (submodularity_ratio(f) >= 1 - 1e-12) == sub


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2 ** 31), st.sampled_from([0.5, 1.0, 1.5, 3.0]))
def test_alpha_zero_iff_supermodular(n, seed, power):
    w = np.random.default_rng(seed).uniform(0.1, 2, n)
    f = concave_of_modular(w, power)
    sup = cone_membership(f, XiPattern.supermodular(n), tol=1e-12)
    assert (generalized_curvature(f) <= 1e-12) == sup


def test_submodular_gives_zero_inverse_curvature():
    for seed in range(10):
        f = concave_of_modular(np.random.default_rng(seed).uniform(0.1, 3, 5), 0.5)
        assert generalized_inverse_curvature(f) <= 1e-12
        assert submodularity_ratio(f) == 1.0


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 6), st.integers(0, 2 ** 31))
def test_restricted_metrics_improve(n, seed):
    f = random_monotone(n, seed)
    g, a = submodularity_ratio(f), generalized_curvature(f)
    rng = np.random.default_rng(seed)
    for _ in range(4):
        B = int(rng.integers(1, 1 << n))
        A = int(rng.integers(0, 1 << n)) & B
        h = restrict(f, A, B)
        if h.n == 0:
            continue
        assert submodularity_ratio(h) >= g - 1e-9
        assert generalized_curvature(h) <= a + 1e-9


def test_split_metrics_monotone_in_r():
    for seed in range(3):
        f = random_monotone(6, seed)
        a = [alpha_r(f, r) for r in range(4)]
        g = [gamma_r(f, r) for r in range(4)]
        assert all(y <= x + 1e-12 for x, y in zip(a, a[1:]))
        assert all(y >= x - 1e-12 for x, y in zip(g, g[1:]))
        assert a[0] == generalized_curvature(f) and g[0] == submodularity_ratio(f)


def test_gamma_r_one_at_elementary_rank():
    # |S|^2 splits into submodular pieces once n-1 elements are fixed
    f = sq(4)
    val, B = gamma_r(f, 3, with_witness=True)
    assert val == 1.0 and bin(B).count("1") == 3
    assert gamma_r(f, 2) < 1.0
    with pytest.raises(SizeGuardError):
        alpha_r(SetFunctionTable(11, np.zeros(1 << 11)), 1)


def test_split_total_curvature():
    assert split_total_curvature(COV, 0) == pytest.approx(total_curvature(COV))
    # fixing element 1 leaves 2 and 3 disjoint inside each piece
    assert split_total_curvature(COV, bit(1)) == pytest.approx(0.0)


# -- closed-form guarantees -----------------------------------------------------

def test_bound_values():
    assert bound_bian(0, 1) == 1
    assert bound_bian(1e-9, 1) == pytest.approx(1.0, abs=1e-8)
    assert bound_bian(1, 1) == pytest.approx(1 - math.exp(-1))
    assert bound_ratio_submodular(0) == pytest.approx(1 / (1 - math.exp(-1)))
    assert bound_ratio_submodular(1) == math.inf
    assert bound_greedy_submodular() == pytest.approx(0.6321205588)
    assert bound_sviridenko(0) == 1
    assert bound_chen(1) == pytest.approx(0.25)
    assert bound_gatmiry_alpha(0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        bound_bian(1.5, 1)


def test_ratio_bounds():
    # modular f: c_hat = 0 and the bound is 1 / gamma_g
    assert bound_ratio_curvature(1.0, 4, 0.0) == pytest.approx(1.0)
    assert bound_ratio_curvature(0.5, 3, 1.0) == pytest.approx(6.0)
    assert bound_ratio_generalized_curvature(1.0, 4, 0.0, 0.0) == pytest.approx(1.0)
    assert bound_ratio_generalized_curvature(1.0, 3, 1.0, 0.0) == pytest.approx(3.0)
    with pytest.raises(UndefinedValueError):
        bound_ratio_curvature(0.0, 2, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 1), st.floats(0, 1))
def test_bian_between_gamma_and_greedy_bound(alpha, gamma):
    b = bound_bian(alpha, gamma)
    assert b <= gamma + 1e-12
    assert b >= (1 - math.exp(-gamma)) - 1e-12
