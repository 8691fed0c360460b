import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import nnls

from subrank.approximation import (ProjectionOptions, best_elementary_rank_r_approximation,
                                   kkt_residuals, num_rows, project_onto_cone, relative_error_curve,
                                   violated_oracle)
from subrank.cones import XiPattern, cone_membership, imset_matrix, imset_values, pairs
from subrank.errors import DomainError
from subrank.lattice import SetFunctionTable, popcounts
from subrank.objectives import make_instance


def signed_rows(xi: XiPattern) -> np.ndarray:
    blocks = [s * imset_matrix(xi.n, p.i, p.j) for p, s in zip(pairs(xi.n), xi.xi) if s]
    return np.vstack(blocks) if blocks else np.zeros((0, 1 << xi.n))


def nnls_projection(f: SetFunctionTable, xi: XiPattern) -> np.ndarray:
    """Moreau split: f = P_K f + P_polar f with the polar cone spanned by -U^T."""
    U = signed_rows(xi).astype(float)
    lam, _ = nnls(U.T, -f.values, maxiter=50 * U.shape[0])
    return f.values + U.T @ lam


def gauss(n, seed):
    return SetFunctionTable(n, np.random.default_rng(seed).standard_normal(1 << n))


def random_xi(n, rng):
    return XiPattern(n, tuple(int(v) for v in rng.integers(-1, 2, len(pairs(n)))))


def test_closed_form_n2():
    f = SetFunctionTable(2, [0, 1, 1, 4])
    g, rep = project_onto_cone(f, XiPattern.submodular(2))
    assert np.max(np.abs(g.values - [-0.5, 1.5, 1.5, 3.5])) <= 1e-8
    assert rep.distance == pytest.approx(1.0, abs=1e-8)
    assert rep.converged


def test_member_unchanged():
    f = SetFunctionTable(3, -popcounts(3).astype(float) ** 2)
    g, rep = project_onto_cone(f, XiPattern.submodular(3))
    assert g == f and rep.projections == 0


def test_zero_pattern_is_identity():
    f = gauss(4, 1)
    g, rep = project_onto_cone(f, XiPattern.zeros(4))
    assert g == f and rep.iterations == 0


def test_deterministic_oracle_examples():
    xi = XiPattern.submodular(2)
    assert violated_oracle(SetFunctionTable(2, [0, 1, 1, 4]), xi) == [(0, 0)]
    assert violated_oracle(SetFunctionTable(2, [0, 1, 1, 1]), xi) == []


def test_random_oracle_full_budget_equals_deterministic():
    f = gauss(5, 3)
    xi = XiPattern.submodular(5)
    det = violated_oracle(f, xi)
    rnd = violated_oracle(f, xi, ProjectionOptions(oracle="random", samples_per_pair=8, seed=4))
    assert rnd == det
    partial = violated_oracle(f, xi, ProjectionOptions(oracle="random", samples_per_pair=3, seed=4))
    assert set(partial) <= set(det)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_matches_nnls_oracle(n):
    rng = np.random.default_rng(n)
    for _ in range(8):
        f = SetFunctionTable(n, rng.standard_normal(1 << n))
        xi = random_xi(n, rng)
        g, rep = project_onto_cone(f, xi)
        assert rep.converged
        assert np.max(np.abs(g.values - nnls_projection(f, xi))) < 1e-6


def test_random_oracle_converges_to_same_point():
    f = gauss(6, 9)
    xi = XiPattern.submodular(6)
    g1, _ = project_onto_cone(f, xi)
    g2, rep = project_onto_cone(f, xi, ProjectionOptions(oracle="random", samples_per_pair=3, seed=1))
    assert rep.converged
    assert np.max(np.abs(g1.values - g2.values)) < 1e-6
    # polish sweep certifies feasibility
    assert cone_membership(g2, xi, tol=1e-8)


def test_reproducible():
    f = gauss(5, 2)
    xi = XiPattern.submodular(5)
    a, _ = project_onto_cone(f, xi)
    b, _ = project_onto_cone(f, xi)
    assert a.values.tobytes() == b.values.tobytes()
    o = ProjectionOptions(oracle="random", samples_per_pair=2, seed=11)
    c, _ = project_onto_cone(f, xi, o)
    d, _ = project_onto_cone(f, xi, o)
    assert c.values.tobytes() == d.values.tobytes()


def test_scale_invariance():
    f = gauss(4, 5)
    xi = XiPattern.submodular(4)
    g, _ = project_onto_cone(f, xi)
    h, rep = project_onto_cone(f * 1e9, xi)
    assert rep.converged
    assert np.max(np.abs(h.values / 1e9 - g.values)) < 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 5), st.integers(0, 2 ** 31))
def test_kkt_and_idempotence(n, seed):
    rng = np.random.default_rng(seed)
    f = SetFunctionTable(n, rng.standard_normal(1 << n))
    xi = random_xi(n, rng)
    g, rep = project_onto_cone(f, xi)
    assert rep.converged
    assert np.min(imset_values(g) * xi.as_array()[:, None], initial=0.0) >= -1e-6
    comp, stat = kkt_residuals(f, g, xi, rep.state)
    assert comp <= 1e-6 and stat <= 1e-9
    assert np.all(rep.state.z >= 0)
    g2, _ = project_onto_cone(g, xi)
    assert np.max(np.abs(g2.values - g.values)) <= 1e-7


def test_non_convergence_reported():
    f = gauss(6, 0)
    g, rep = project_onto_cone(f, XiPattern.submodular(6), ProjectionOptions(max_iterations=2))
    assert not rep.converged and rep.iterations == 2
    assert g.n == 6


def test_options_validation():
    with pytest.raises(ValueError):
        ProjectionOptions(oracle="psychic")
    with pytest.raises(ValueError):
        ProjectionOptions(tol_violation=0)


def test_num_rows():
    assert num_rows(XiPattern.submodular(4)) == 24
    assert num_rows(XiPattern.elementary_sum(4, 1)) == 12


def test_best_rank_submodular_r0():
    f = SetFunctionTable(4, -popcounts(4).astype(float) ** 2)
    res = best_elementary_rank_r_approximation(f, 0)
    assert res.rel_error == 0 and res.B == 0 and res.g == f


def test_best_rank_exact_at_true_rank():
    # |S|^2 has elementary rank n: zero error once r = n - 1
    f = SetFunctionTable(4, popcounts(4).astype(float) ** 2)
    res = best_elementary_rank_r_approximation(f, 3)
    assert res.rel_error <= 1e-9
    assert best_elementary_rank_r_approximation(f, 2).rel_error > 1e-3


def test_best_rank_ties_smallest_B():
    f = SetFunctionTable(3, popcounts(3).astype(float) ** 2)
    res = best_elementary_rank_r_approximation(f, 1)
    # symmetric function: all B tie
    assert res.B == 1
    assert len(set(round(v, 9) for v in res.errors.values())) == 1


def test_best_rank_bad_r():
    with pytest.raises(DomainError):
        best_elementary_rank_r_approximation(gauss(3, 0), 3)


@pytest.mark.parametrize("family", ["det", "col", "random"])
def test_error_curve_non_increasing(family):
    inst = make_instance(family, 5, seed=3, preset="approx")
    f = inst if isinstance(inst, SetFunctionTable) else inst.table()
    curve = relative_error_curve(f)
    assert all(b <= a + 1e-7 for a, b in zip(curve, curve[1:]))
    assert curve[-1] <= 1e-9
