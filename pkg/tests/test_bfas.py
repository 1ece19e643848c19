"""Exact solver tests. The derived expectations come from a dense spherical
grid plus local polish, and from the multistart SLSQP oracle; neither shares
code with the solver."""

import itertools

import numpy as np
import pytest
from scipy.optimize import minimize

from conesv import bfas
from conesv.cones import make_cone, orthant, schur_cone
from conesv.errors import PreprocessingRequired
from conesv.instance import SVInstance, kkt_residual

from _oracles import oracle_min_sv

# ---------------------------------------------------------------- oracles


def sphere_grid_orthant(n, count):
    """Deterministic spread of ~count points on the nonnegative unit sphere."""
    rng = np.random.default_rng(12345)
    Z = np.abs(rng.standard_normal((count, n)))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    return Z


def oracle_psv_grid_polish(A):
    """Dense two-sphere grid search followed by local polish (PSV case)."""
    m, n = A.shape
    U = sphere_grid_orthant(m, 1000)
    V = sphere_grid_orthant(n, 1000)
    vals = U @ A @ V.T
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    u0, v0 = U[i], V[j]

    def fun(w):
        return float(w[:m] @ A @ w[m:])

    cons = [
        {"type": "eq", "fun": lambda w: float(w[:m] @ w[:m]) - 1.0},
        {"type": "eq", "fun": lambda w: float(w[m:] @ w[m:]) - 1.0},
    ]
    res = minimize(fun, np.concatenate([u0, v0]), bounds=[(0.0, None)] * (m + n),
                   constraints=cons, method="SLSQP",
                   options={"maxiter": 500, "ftol": 1e-14})
    u = np.clip(res.x[:m], 0.0, None)
    v = np.clip(res.x[m:], 0.0, None)
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    return min(float(u @ A @ v), float(vals[i, j]))


def angle_of(lam):
    return float(np.arccos(np.clip(lam, -1.0, 1.0)) / np.pi)


# ------------------------------------------------------------ paper values


def test_bfas_schur_orthant_5():
    inst = SVInstance(np.eye(5), schur_cone(5), orthant(5))
    sol = bfas.solve_bfas(inst)
    assert sol.status == "ExactGlobal"
    assert angle_of(sol.lam) == pytest.approx(0.852416, abs=1e-5)
    assert sol.kkt_residual <= 1e-7


def test_bfas_schur_schur_5():
    inst = SVInstance(np.eye(5), schur_cone(5), schur_cone(5))
    sol = bfas.solve_bfas(inst)
    assert sol.status == "ExactGlobal"
    assert angle_of(sol.lam) == pytest.approx(0.800000, abs=1e-6)


# ---------------------------------------------------------- derived oracles


@pytest.mark.parametrize("seed", range(6))
def test_bfas_psv_vs_grid_oracle(seed):
    rng = np.random.default_rng(800 + seed)
    A = rng.standard_normal((3, 3))
    inst = SVInstance(A, orthant(3), orthant(3))
    if np.min(inst.cross) >= 0.0:
        pytest.skip("nonnegative draw is preprocessing territory")
    sol = bfas.solve_bfas(inst)
    lam_o = oracle_psv_grid_polish(A)
    assert sol.lam == pytest.approx(lam_o, abs=1e-4)
    assert sol.status == "ExactGlobal"


@pytest.mark.parametrize("seed", range(6))
def test_bfas_general_cones_vs_slsqp_oracle(seed):
    rng = np.random.default_rng(900 + seed)
    P = make_cone(rng.standard_normal((4, 4)))
    Q = make_cone(rng.standard_normal((3, 4)))
    A = rng.standard_normal((4, 3))
    inst = SVInstance(A, P, Q)
    if np.min(inst.cross) >= 0.0:
        pytest.skip("nonnegative draw")
    sol = bfas.solve_bfas(inst)
    lam_o, _, _ = oracle_min_sv(A, P, Q, starts=120, seed=seed)
    # oracle may miss the global optimum; solver must never be worse
    assert sol.lam <= lam_o + 1e-6
    assert sol.kkt_residual <= 1e-7


# ------------------------------------------------------- eval_support_pair


def test_eval_singleton_negative():
    # MA instance with one pair of generators at an obtuse angle
    g = np.array([1.0, 0.0])
    h = np.array([-1.0, 1.0]) / np.sqrt(2.0)
    inst = SVInstance(np.eye(2), make_cone(g[:, None]), make_cone(h[:, None]))
    pair = bfas.SupportPair(I=(0,), J=(0,))
    cand = bfas.eval_support_pair(inst, pair, 0.0)
    assert cand is not None
    assert cand.mu == pytest.approx(-abs(g @ h))
    assert np.allclose(cand.u, g, atol=1e-12)
    assert np.allclose(cand.v, h, atol=1e-12)


def test_eval_singleton_positive_is_infeasible():
    g = np.array([1.0, 0.0])
    h = np.array([1.0, 1.0]) / np.sqrt(2.0)
    inst = SVInstance(np.eye(2), make_cone(g[:, None]), make_cone(h[:, None]))
    # rho = cos^2 > 0 survives the prune at incumbent 0, but the stacked
    # eigenvector has mixed signs
    cand = bfas.eval_support_pair(inst, bfas.SupportPair(I=(0,), J=(0,)), 0.0)
    assert cand is None


def test_eval_prunes_on_incumbent():
    g = np.array([1.0, 0.0])
    h = np.array([-1.0, 1.0]) / np.sqrt(2.0)
    inst = SVInstance(np.eye(2), make_cone(g[:, None]), make_cone(h[:, None]))
    # |<g,h>| = 0.707 < 0.9: with incumbent -0.9 the pair must be pruned
    cand = bfas.eval_support_pair(inst, bfas.SupportPair(I=(0,), J=(0,)), -0.9)
    assert cand is None


def test_eval_rank_deficient_skipped():
    # two P-generators that are conically dependent within the support
    G = np.array([[1.0, -1.0], [0.0, 0.0], [0.0, 0.0]])
    H = np.eye(3)
    A = -np.eye(3)
    inst = SVInstance(A, make_cone(G), make_cone(H))
    cand = bfas.eval_support_pair(inst, bfas.SupportPair(I=(0, 1), J=(0,)), 0.0)
    assert cand is None


# ---------------------------------------------------------- feasibility_check


def test_feasibility_axis():
    V = np.array([[1.0], [0.0]])
    z = bfas.feasibility_check(V, 2)
    assert z is not None
    assert np.allclose(z, [1.0, 0.0], atol=1e-9)


def test_feasibility_mixed_sign_span():
    V = np.array([[1.0], [-1.0]]) / np.sqrt(2.0)
    assert bfas.feasibility_check(V, 2) is None


@pytest.mark.parametrize("seed", range(5))
def test_feasibility_planted_positive(seed):
    rng = np.random.default_rng(1000 + seed)
    d = 6
    pos = rng.random(d) + 0.2
    noise = rng.standard_normal((d, 2))
    V = np.linalg.qr(np.column_stack([pos, noise]))[0]
    z = bfas.feasibility_check(V, d)
    assert z is not None
    assert np.min(z) >= 0
    assert abs(z.sum() - 1.0) <= 1e-9
    assert np.linalg.norm((V @ V.T - np.eye(d)) @ z) <= 1e-7


def test_feasibility_multiplicity_two_sweep():
    # 2-D eigenspace handled by feasibility must agree with a direct sweep
    # over eigenspace directions
    rng = np.random.default_rng(40)
    pos = rng.random(5) + 0.5
    other = rng.standard_normal(5)
    V = np.linalg.qr(np.column_stack([pos, other]))[0]
    z = bfas.feasibility_check(V, 5)
    # sweep: some direction cos(t) V1 + sin(t) V2 must be one-signed
    ts = np.linspace(0, 2 * np.pi, 100_000)
    dirs = np.outer(np.cos(ts), V[:, 0]) + np.outer(np.sin(ts), V[:, 1])
    one_signed = np.any(np.all(dirs >= -1e-12, axis=1))
    assert (z is not None) == bool(one_signed)


# ------------------------------------------------------------ solver gates


def test_bfas_requires_preprocessing():
    inst = SVInstance(np.array([[1.0, 2.0], [3.0, 4.0]]), orthant(2), orthant(2))
    with pytest.raises(PreprocessingRequired):
        bfas.solve_bfas(inst)


def test_bfas_time_limit_bound_pair():
    rng = np.random.default_rng(41)
    A = rng.standard_normal((7, 7))
    inst = SVInstance(A, orthant(7), orthant(7))
    if np.min(inst.cross) >= 0.0:
        pytest.skip("nonnegative draw")
    sol = bfas.solve_bfas(inst, time_limit=0.0)
    assert sol.status == "BoundPair"
    assert sol.lower == pytest.approx(-inst.norm)
    assert sol.upper == sol.lam
    assert sol.lower - 1e-12 <= sol.lam <= np.min(inst.cross) + 1e-8


def test_bfas_incumbent_monotone_and_progress():
    rng = np.random.default_rng(42)
    A = rng.standard_normal((5, 4))
    inst = SVInstance(A, orthant(5), orthant(4))
    seen = []
    sol = bfas.solve_bfas(inst, progress=lambda done, lam, el: seen.append((done, lam)))
    assert seen, "progress callback never fired"
    lams = [s[1] for s in seen]
    assert all(b <= a + 1e-15 for a, b in zip(lams, lams[1:]))
    assert seen[-1][1] == pytest.approx(sol.lam)


# ------------------------------------------------------------- determinism


def test_bfas_thread_count_invariance():
    rng = np.random.default_rng(43)
    A = rng.standard_normal((5, 5))
    inst = SVInstance(A, orthant(5), orthant(5))
    if np.min(inst.cross) >= 0.0:
        pytest.skip("nonnegative draw")
    sols = [bfas.solve_bfas(inst, parallel=k) for k in (1, 2, 8)]
    assert sols[0].lam == sols[1].lam == sols[2].lam
    assert np.array_equal(sols[0].u, sols[1].u) and np.array_equal(sols[1].u, sols[2].u)
    assert np.array_equal(sols[0].v, sols[1].v) and np.array_equal(sols[1].v, sols[2].v)
    assert sols[0].support_I == sols[1].support_I == sols[2].support_I
    assert sols[0].support_J == sols[1].support_J == sols[2].support_J


@pytest.mark.parametrize("seed", range(8))
def test_bfas_subset_prune_ab(seed):
    rng = np.random.default_rng(1100 + seed)
    A = rng.standard_normal((3, 4))
    inst = SVInstance(A, orthant(3), orthant(4))
    if np.min(inst.cross) >= 0.0:
        pytest.skip("nonnegative draw")
    on = bfas.solve_bfas(inst, enable_subset_prune=True)
    off = bfas.solve_bfas(inst, enable_subset_prune=False)
    assert on.lam == pytest.approx(off.lam, abs=1e-10)
    assert on.support_I == off.support_I and on.support_J == off.support_J


def test_subset_prune_empty_history():
    assert not bfas.subset_prune([], ((0,), (1,)))


def test_subset_prune_detects_containment():
    hist = [((0, 1), (2, 3))]
    assert bfas.subset_prune(hist, ((0,), (2,)))
    assert not bfas.subset_prune(hist, ((0, 2), (2,)))


# ----------------------------------------------------------- cross checks


def test_bfas_reduction_consistency():
    # solving directly and through the MA reduction agree
    from conesv.instance import reduce_to_ma

    rng = np.random.default_rng(44)
    A = rng.standard_normal((4, 3))
    inst = SVInstance(A, orthant(4), orthant(3))
    if np.min(inst.cross) >= 0.0:
        pytest.skip("nonnegative draw")
    direct = bfas.solve_bfas(inst)
    ma, scale, back = reduce_to_ma(inst)
    lifted = bfas.solve_bfas(ma)
    assert direct.lam == pytest.approx(scale * lifted.lam, abs=1e-8)
    u, v = back(lifted.u, lifted.v)
    assert kkt_residual(inst, u, v) <= 1e-6


def test_bfas_scaling_equivariance():
    rng = np.random.default_rng(45)
    A = rng.standard_normal((4, 4))
    inst = SVInstance(A, orthant(4), orthant(4))
    if np.min(inst.cross) >= 0.0:
        pytest.skip("nonnegative draw")
    s1 = bfas.solve_bfas(inst)
    s2 = bfas.solve_bfas(SVInstance(3.0 * A, orthant(4), orthant(4)))
    assert s2.lam == pytest.approx(3.0 * s1.lam, abs=1e-8)
    assert np.allclose(s1.u, s2.u, atol=1e-8)
    assert np.allclose(s1.v, s2.v, atol=1e-8)
    assert s1.support_I == s2.support_I and s1.support_J == s2.support_J


def test_bfas_critical_values_contain_optimum():
    rng = np.random.default_rng(46)
    A = rng.standard_normal((4, 4))
    inst = SVInstance(A, orthant(4), orthant(4))
    if np.min(inst.cross) >= 0.0:
        pytest.skip("nonnegative draw")
    sol = bfas.solve_bfas(inst)
    if sol.critical_values:
        assert sol.critical_values[0] == pytest.approx(sol.lam)
