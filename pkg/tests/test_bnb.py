"""Branch-and-bound solver tests.

Derived expectations come from the exhaustive support-enumeration oracle
and multistart SLSQP (tests/_oracles.py), neither of which shares code with
the solver. Envelope and cut validity are checked by direct sampling
against the node LP data, not through the solver's own bookkeeping.
"""

import csv
import itertools

import numpy as np
import pytest

from conesv import bnb
from conesv.bnb import (BilinearNode, ball_coord_bounds, build_relaxation,
                        export_miqcp, node_lp_data, parse_miqcp, solve_bnb,
                        variable_bounds)
from conesv.cones import make_cone, orthant, schur_cone
from conesv.errors import NotPointed, PreprocessingRequired
from conesv.instance import (SVInstance, check_extreme_case,
                             check_nonnegative_case)

from _oracles import oracle_min_sv, oracle_support_enum


def angle_of(lam):
    return float(np.arccos(np.clip(lam, -1.0, 1.0)) / np.pi)


def random_orthant_instance(rng):
    m, n = int(rng.integers(2, 5)), int(rng.integers(2, 5))
    A = rng.standard_normal((m, n))
    if A.min() >= 0.0:
        A[rng.integers(m), rng.integers(n)] = -float(rng.uniform(0.5, 1.5))
    return SVInstance(A, orthant(m), orthant(n))


def preprocessed_away(inst):
    return (check_nonnegative_case(inst).kind is not None
            or check_extreme_case(inst).kind is not None)


# ------------------------------------------------------------- box bounds


class TestVariableBounds:
    def test_orthant_is_unit_box(self):
        B = variable_bounds(orthant(4))
        assert np.allclose(B, 1.0, atol=1e-8)

    def test_rotated_two_generator_cone(self):
        # generators (e1+e2)/sqrt2 and (e1-e2)/sqrt2: the box constraints
        # -1 <= (x1 +- x2)/sqrt2 <= 1 have their x1-max at the vertex
        # (sqrt2, 0), and symmetrically for x2
        r = 1.0 / np.sqrt(2.0)
        K = make_cone(np.array([[r, r], [r, -r]]))
        B = variable_bounds(K)
        assert np.allclose(B, np.sqrt(2.0), atol=1e-7)

    def test_line_cone_rejected(self):
        K = make_cone(np.array([[1.0, -1.0], [0.0, 0.0]]))
        with pytest.raises(NotPointed):
            variable_bounds(K)

    def test_ball_bounds_orthant(self):
        B = ball_coord_bounds(orthant(5))
        assert np.allclose(B, 1.0, atol=1e-8)

    def test_ball_bounds_enclose_samples(self):
        rng = np.random.default_rng(5)
        r = 1.0 / np.sqrt(2.0)
        K = make_cone(np.array([[r, r], [r, -r]]))
        B = ball_coord_bounds(K)
        for _ in range(500):
            x = rng.uniform(0.0, 2.0, size=2)
            nx = np.linalg.norm(K.generators @ x)
            if nx > 1.0:
                x /= nx
            assert np.all(x <= B + 1e-9)


# ----------------------------------------------------------------- guards


def test_nonnegative_instance_rejected():
    A = np.array([[1.0, 0.5], [0.25, 2.0]])
    inst = SVInstance(A, orthant(2), orthant(2))
    with pytest.raises(PreprocessingRequired):
        solve_bnb(inst)


# ------------------------------------------------------------ paper value


def test_schur5_orthant5_table_value():
    inst = SVInstance(np.eye(5), schur_cone(5), orthant(5))
    sol = solve_bnb(inst, gap_tol=1e-6, time_limit=60.0)
    assert sol.status == "ExactGlobal"
    assert abs(angle_of(sol.lam) - 0.852416) < 1e-5
    assert sol.kkt_residual < 1e-7


# --------------------------------------------------- biclique desk example


def test_biclique_two_by_two():
    M = np.array([[1.0, -2.0], [-2.0, 1.0]])
    lam_o, I_o, J_o, crits = oracle_support_enum(-M)
    # the enumeration oracle settles the ground truth over all 9 faces
    assert abs(lam_o + 1.0) < 1e-12
    assert len(I_o) == 1 and len(J_o) == 1 and I_o[0] == J_o[0]

    inst = SVInstance(-M, orthant(2), orthant(2))
    sol = solve_bnb(inst, gap_tol=1e-6, time_limit=30.0)
    assert sol.status == "ExactGlobal"
    assert abs(sol.lam + 1.0) < 1e-9
    # optimum sits on a diagonal generator pair
    i = int(np.argmax(sol.u))
    assert sol.u[i] > 1.0 - 1e-6 and sol.v[i] > 1.0 - 1e-6


# ------------------------------------------------- agreement with the rest


@pytest.mark.parametrize("seed", range(10))
def test_matches_bfas_and_oracle(seed):
    from conesv.bfas import solve_bfas

    rng = np.random.default_rng(900 + seed)
    inst = random_orthant_instance(rng)
    while preprocessed_away(inst):
        inst = random_orthant_instance(rng)
    ref = solve_bfas(inst)
    sol = solve_bnb(inst, gap_tol=1e-6, time_limit=30.0)
    assert sol.status == "ExactGlobal"
    assert abs(sol.lam - ref.lam) < 1e-6
    got = oracle_min_sv(inst.A, inst.P, inst.Q, starts=40, seed=seed)
    assert sol.lam <= got[0] + 1e-7


# ------------------------------------------------ relaxation validity


def test_mccormick_rows_hold_on_samples():
    rng = np.random.default_rng(77)
    A = rng.standard_normal((4, 3))
    A[0, 0] = -abs(A[0, 0]) - 0.5
    inst = SVInstance(A, orthant(4), orthant(3))
    rel = build_relaxation(inst)
    p, q = inst.P.count, inst.Q.count
    Bx = np.minimum(variable_bounds(inst.P), ball_coord_bounds(inst.P))
    By = np.minimum(variable_bounds(inst.Q), ball_coord_bounds(inst.Q))
    node = BilinearNode(x_lo=np.zeros(p), x_hi=Bx,
                        y_lo=np.zeros(q), y_hi=By,
                        lower_bound=-np.inf, depth=0,
                        cuts_x=[inst.P.generators[:, i].copy() for i in range(p)],
                        cuts_y=[inst.Q.generators[:, j].copy() for j in range(q)])
    c, A_ub, b_ub, bounds, A_eq, b_eq = node_lp_data(rel, node, p, q)
    G, H = inst.P.generators, inst.Q.generators

    d = rel.coeff.size
    da = rel.amb_coeff.size
    w0, u0 = p + q, p + q + d
    v0, W0 = u0 + inst.m, u0 + inst.m + inst.n

    for _ in range(10_000):
        x = rng.uniform(0.0, 1.0, size=p) * Bx
        y = rng.uniform(0.0, 1.0, size=q) * By
        # scale into the balls; lower box edges are zero so scaling stays in
        x /= max(1.0, float(np.linalg.norm(G @ x)))
        y /= max(1.0, float(np.linalg.norm(H @ y)))
        u, v = G @ x, H @ y
        z = np.empty(c.size)
        z[:p], z[p:p + q] = x, y
        z[w0:u0] = x[rel.idx_i] * y[rel.idx_j]
        z[u0:v0], z[v0:W0] = u, v
        z[W0:] = u[rel.amb_i] * v[rel.amb_j]
        assert float(np.max(A_ub @ z - b_ub)) <= 1e-7
        assert float(np.max(np.abs(A_eq @ z - b_eq))) <= 1e-9
        for l, (lo, hi) in enumerate(bounds):
            assert z[l] >= (lo if lo is not None else -np.inf) - 1e-12
            assert z[l] <= (hi if hi is not None else np.inf) + 1e-12


def test_kelley_cuts_valid_at_optimum():
    inst = SVInstance(np.eye(5), schur_cone(5), orthant(5))
    sol = solve_bnb(inst, gap_tol=1e-6, time_limit=60.0)
    # archive rows a satisfy a'x <= 1 on the ball section; in particular at
    # the returned optimum's own coordinates
    from conesv.cones import project_cone

    _, x = project_cone(inst.P, sol.u, warm=False)
    _, y = project_cone(inst.Q, sol.v, warm=False)
    for a in sol.cuts_x:
        assert float(a @ x) <= 1.0 + 1e-7
    for a in sol.cuts_y:
        assert float(a @ y) <= 1.0 + 1e-7


# ------------------------------------------------------------- node log


def test_node_log_monotone(tmp_path):
    path = tmp_path / "nodes.csv"
    inst = SVInstance(np.eye(6), schur_cone(6), orthant(6))
    sol = solve_bnb(inst, gap_tol=1e-6, time_limit=60.0, node_log=str(path))
    rows = sol.node_rows
    assert rows, "every run logs at least the root"
    bounds = [r[1] for r in rows]
    incs = [r[2] for r in rows]
    for k in range(1, len(rows)):
        assert bounds[k] >= bounds[k - 1] - 1e-9
        assert incs[k] <= incs[k - 1] + 1e-12
    for b, i in zip(bounds, incs):
        assert b <= i + 1e-9

    with open(path) as fh:
        got = list(csv.reader(fh))
    assert got[0] == ["node", "bound", "incumbent", "depth", "time"]
    assert len(got) == len(rows) + 1
    # repr round-trip keeps the floats exact
    assert [float(r[1]) for r in got[1:]] == bounds


def test_time_limit_yields_bound_pair():
    inst = SVInstance(np.eye(10), schur_cone(10), schur_cone(10))
    sol = solve_bnb(inst, gap_tol=1e-6, time_limit=1.5)
    assert sol.status == "BoundPair"
    assert np.isfinite(sol.lower) and np.isfinite(sol.upper)
    assert sol.lower <= sol.upper + 1e-12
    assert sol.upper == sol.lam
    # the bracket really contains the schur/schur closed-form value
    assert sol.lower - 1e-9 <= -np.cos(np.pi / 10.0) <= sol.upper + 1e-9


# --------------------------------------------------------------- export


def test_export_identity_term_count(tmp_path):
    path = tmp_path / "model.lp"
    inst = SVInstance(-np.eye(2), orthant(2), orthant(2))
    export_miqcp(inst, str(path))
    model = parse_miqcp(str(path))
    # one bilinear term per nonzero of A
    assert int(np.count_nonzero(model["A"])) == 2


def test_export_single_nonzero(tmp_path):
    path = tmp_path / "model.lp"
    A = np.zeros((3, 2))
    A[2, 0] = -0.75
    inst = SVInstance(A, orthant(3), orthant(2))
    export_miqcp(inst, str(path))
    text = path.read_text()
    obj = next(ln for ln in text.splitlines() if "obj:" in ln)
    assert obj.count("*") == 1
    model = parse_miqcp(str(path))
    assert np.array_equal(model["A"], A)


@pytest.mark.parametrize("seed", range(4))
def test_export_round_trip_bit_exact(tmp_path, seed):
    rng = np.random.default_rng(400 + seed)
    m, n = int(rng.integers(2, 5)), int(rng.integers(2, 5))
    A = rng.standard_normal((m, n))
    A[0, 0] = -1.0 / 3.0   # not exactly representable in decimal
    K = make_cone(rng.standard_normal((m, m + 1)))
    L = make_cone(rng.standard_normal((n, n + 1)))
    inst = SVInstance(A, K, L)
    path = tmp_path / "model.lp"
    export_miqcp(inst, str(path))
    model = parse_miqcp(str(path))
    assert np.array_equal(model["A"], A)
    assert np.array_equal(model["G"], K.generators)
    assert np.array_equal(model["H"], L.generators)
    assert int(np.count_nonzero(model["A"])) == int(np.count_nonzero(A))
