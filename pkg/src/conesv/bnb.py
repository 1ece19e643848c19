"""Spatial branch-and-bound for the cone-constrained bilinear minimum.

In generator coordinates the problem reads min x'Cy over x, y >= 0 with
||Gx|| <= 1, ||Hy|| <= 1; the inequality form is exact because preprocessing
certifies a negative optimum, which drives both norms to one at optimality.
Every nonzero of C gets an auxiliary variable w_k standing for the product
x_{i_k} y_{j_k}. A node's lower bound is an LP over the four-plane product
envelopes of its box plus an outer approximation of the two norm balls by
supporting halfspaces, grown on demand at violating witnesses. Upper bounds
come from polishing LP witnesses with plain alternating minimization.
Best-bound-first search, splitting the side with the worst product mismatch,
closes the gap.
"""

import csv
import heapq
import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numerics as nm
from .cones import project_cone
from .eao import _fixed_point_polish
from .errors import (InvalidInput, NotPointed, NumericalFailure,
                     PreprocessingRequired)
from .instance import (STATUS_BOUND_PAIR, STATUS_EXACT, Solution,
                       kkt_residual)

log = logging.getLogger("conesv.bnb")

BALL_TOL = 1e-8      # witnesses may overshoot the unit balls by this much
KELLEY_ROUNDS = 100  # cut rounds per node before splitting regardless
MAX_CUTS = 100000    # safety valve only; a tight cap starves separation and
                     # the node bounds stall wherever the pool stops growing


def variable_bounds(K):
    """Per-coordinate upper bounds B_i = max x_i over x >= 0, -e <= Gx <= e.

    Any x with ||Gx|| <= 1 satisfies those row constraints, so [0, B] is a
    valid enclosure for the solver's coordinates. Pointedness makes every
    B_i finite: a recession direction would mean x >= 0, Gx = 0, x != 0.
    """
    if not K.pointed:
        raise NotPointed("variable_bounds: cone contains a line")
    G = K.generators
    d, p = G.shape
    A_ub = np.vstack([G, -G])
    b_ub = np.ones(2 * d)
    B = np.empty(p)
    c = np.zeros(p)
    for i in range(p):
        c[:] = 0.0
        c[i] = -1.0
        _, obj, status = nm.lp_solve(c, A_ub, b_ub, [(0.0, None)] * p)
        if status != nm.LP_OPTIMAL:
            raise NotPointed("variable_bounds: unbounded coordinate")
        B[i] = -obj
    # absorb the LP's feasibility slack so the box never cuts off a
    # boundary optimum
    return B * (1.0 + 1e-9) + 1e-12


def ball_coord_bounds(K):
    """Exact per-coordinate bounds over the ball section: max x_i subject
    to x >= 0, ||Gx|| <= 1.

    Writing x = t e_i + s with s >= 0 gives ||Gx|| >= t * dist(-g_i, K),
    with equality at the distance minimizer, so the maximum is the
    reciprocal distance. Pointedness keeps the distance positive (zero
    would put -g_i inside the cone, a line).
    """
    G = K.generators
    B = np.empty(G.shape[1])
    for i in range(G.shape[1]):
        pnt, _ = project_cone(K, -G[:, i], warm=False)
        rho = float(np.linalg.norm(G[:, i] + pnt))
        if rho <= 1e-12:
            raise NotPointed("ball_coord_bounds: cone contains a line")
        B[i] = 1.0 / rho
    return B * (1.0 + 1e-9) + 1e-12


@dataclass
class McCormickRelaxation:
    """Product-variable layout plus the shared ball cut pools.

    One w_k per nonzero of C (the sign does not matter for the envelope).
    Cut rows a satisfy a @ x <= 1 for every ||Gx|| <= 1, being supporting
    halfspaces of the ball; the pools start with the gram rows, the planes
    touching at the generator directions. The pools archive every cut the
    run generated; each node's LP only carries the subset relevant to its
    own box, or LP sizes grow with the tree instead of the dimension.
    """

    C: np.ndarray
    idx_i: np.ndarray
    idx_j: np.ndarray
    coeff: np.ndarray
    cuts_x: list
    cuts_y: list
    sigma: float = np.inf
    G: Optional[np.ndarray] = None
    H: Optional[np.ndarray] = None
    amb_i: Optional[np.ndarray] = None
    amb_j: Optional[np.ndarray] = None
    amb_coeff: Optional[np.ndarray] = None


def build_relaxation(inst):
    C = inst.cross
    ii, jj = np.nonzero(C)
    if ii.size == 0:
        raise InvalidInput("build_relaxation: C has no nonzero entries")
    ai, aj = np.nonzero(inst.A)
    return McCormickRelaxation(
        C=C, idx_i=ii, idx_j=jj, coeff=np.ascontiguousarray(C[ii, jj], dtype=float),
        cuts_x=[row.copy() for row in inst.P.gram()],
        cuts_y=[row.copy() for row in inst.Q.gram()],
        sigma=float(inst.norm),
        G=inst.P.generators, H=inst.Q.generators,
        amb_i=ai, amb_j=aj,
        amb_coeff=np.ascontiguousarray(inst.A[ai, aj], dtype=float),
    )


def _ambient_box(G, xl, xu):
    """Interval image of the box under G, clipped to the unit cube.

    Row by row, u_i = sum_k G_ik x_k ranges over the sum of the per-term
    intervals; the ball then caps every ambient coordinate at +-1. Returns
    None when the clip empties a coordinate (the box misses the ball).
    """
    lo = np.minimum(G * xl, G * xu).sum(axis=1)
    hi = np.maximum(G * xl, G * xu).sum(axis=1)
    lo = np.maximum(lo, -1.0)
    hi = np.minimum(hi, 1.0)
    if np.any(lo > hi):
        return None
    return lo, hi


def _box_norm_range(lo, hi):
    """Range of ||u|| over an interval box (coordinates independent)."""
    hi2 = np.maximum(lo * lo, hi * hi)
    lo2 = np.where((lo <= 0.0) & (hi >= 0.0), 0.0, np.minimum(lo * lo, hi * hi))
    return float(np.sqrt(lo2.sum())), float(np.sqrt(hi2.sum()))


@dataclass
class BilinearNode:
    x_lo: np.ndarray
    x_hi: np.ndarray
    y_lo: np.ndarray
    y_hi: np.ndarray
    lower_bound: float
    depth: int
    witness: Optional[tuple] = None  # (x, y, w) from the node LP
    node_id: int = -1
    cuts_x: Optional[list] = None    # ball cuts live on nodes: children
    cuts_y: Optional[list] = None    # inherit, and stale rows get pruned


def _prune_cuts(cuts, lo, hi):
    """Drop cut rows already implied by the box.

    max of a @ x over the box is sum_i max(a_i lo_i, a_i hi_i); when that
    peak is <= 1 the halfspace cannot separate anything in the box.
    """
    kept = []
    for a in cuts:
        if float(np.maximum(a * lo, a * hi).sum()) > 1.0:
            kept.append(a)
    return kept


def _envelope_rows(A, b, r0, ci, cj, ck, XL, XU, YL, YU):
    """Four McCormick planes per product, written in place from row r0.

    Envelope of w = x y on the box [xl, xu] x [yl, yu]:

        w >= yl x + xl y - xl yl      w <= yu x + xl y - xl yu
        w >= yu x + xu y - xu yu      w <= yl x + xu y - xu yl
    """
    d = ck.size
    r = r0 + np.arange(d)
    A[r, ci] = YL
    A[r, cj] = XL
    A[r, ck] = -1.0
    b[r] = XL * YL
    A[d + r, ci] = YU
    A[d + r, cj] = XU
    A[d + r, ck] = -1.0
    b[d + r] = XU * YU
    A[2 * d + r, ci] = -YU
    A[2 * d + r, cj] = -XL
    A[2 * d + r, ck] = 1.0
    b[2 * d + r] = -XL * YU
    A[3 * d + r, ci] = -YL
    A[3 * d + r, cj] = -XU
    A[3 * d + r, ck] = 1.0
    b[3 * d + r] = -XU * YL
    return r0 + 4 * d


def node_lp_data(rel, node, p, q):
    """Assemble the node LP over [x, y, w, u, v, W].

    w carries one product per nonzero of C = G'AH with envelopes over the
    generator box; u = Gx and v = Hy (equality rows) add the ambient view,
    where W carries one product per nonzero of A with envelopes over the
    interval image of the box clipped to the unit cube. One equality ties
    the two bilinear forms (x'Cy = u'Av at every true point), so the
    objective on w inherits whichever envelope family is tighter; for
    ill-conditioned generator sets the ambient one wins by far. Cut rows
    live on u and v, where the balls are round. Returns None when the
    interval image already misses a unit ball (no feasible pair in the
    box).
    """
    d = rel.coeff.size
    da = rel.amb_coeff.size
    m, n = rel.G.shape[0], rel.H.shape[0]
    w0 = p + q
    u0 = w0 + d
    v0 = u0 + m
    W0 = v0 + n
    nv = W0 + da
    ub_ = _ambient_box(rel.G, node.x_lo, node.x_hi)
    vb_ = _ambient_box(rel.H, node.y_lo, node.y_hi)
    if ub_ is None or vb_ is None:
        return None
    ul, uh = ub_
    vl, vh = vb_
    XL = node.x_lo[rel.idx_i]
    XU = node.x_hi[rel.idx_i]
    YL = node.y_lo[rel.idx_j]
    YU = node.y_hi[rel.idx_j]
    UL = ul[rel.amb_i]
    UH = uh[rel.amb_i]
    VL = vl[rel.amb_j]
    VH = vh[rel.amb_j]
    ncut = len(node.cuts_x) + len(node.cuts_y)
    nrow = 4 * d + 4 * da + ncut + 1
    A = np.zeros((nrow, nv))
    b = np.empty(nrow)
    at = _envelope_rows(A, b, 0, rel.idx_i, p + rel.idx_j, u0 - d + np.arange(d),
                        XL, XU, YL, YU)
    at = _envelope_rows(A, b, at, u0 + rel.amb_i, v0 + rel.amb_j,
                        W0 + np.arange(da), UL, UH, VL, VH)
    if node.cuts_x:
        A[at:at + len(node.cuts_x), u0:v0] = node.cuts_x
        at += len(node.cuts_x)
    if node.cuts_y:
        A[at:at + len(node.cuts_y), v0:W0] = node.cuts_y
        at += len(node.cuts_y)
    b[4 * d + 4 * da:] = 1.0
    # floor row: u'Av >= -sigma on the unit balls
    A[-1, W0:] = -rel.amb_coeff
    b[-1] = rel.sigma
    # equalities: u = Gx, v = Hy, and the two product forms agree
    Aeq = np.zeros((m + n + 1, nv))
    beq = np.zeros(m + n + 1)
    Aeq[:m, :p] = -rel.G
    Aeq[np.arange(m), u0 + np.arange(m)] = 1.0
    Aeq[m:m + n, p:w0] = -rel.H
    Aeq[m + np.arange(n), v0 + np.arange(n)] = 1.0
    Aeq[-1, w0:u0] = rel.coeff
    Aeq[-1, W0:] = -rel.amb_coeff
    corners = np.stack([UL * VL, UL * VH, UH * VL, UH * VH])
    bounds = (list(zip(node.x_lo, node.x_hi)) + list(zip(node.y_lo, node.y_hi))
              + list(zip(XL * YL, XU * YU))
              + list(zip(ul, uh)) + list(zip(vl, vh))
              + list(zip(corners.min(axis=0), corners.max(axis=0))))
    c = np.zeros(nv)
    c[w0:u0] = rel.coeff
    return c, A, b, bounds, Aeq, beq


def _add_cut(pool, row):
    if len(pool) >= MAX_CUTS:
        return False
    for old in pool[-64:]:
        if np.allclose(old, row, rtol=0.0, atol=1e-12):
            return False
    pool.append(row)
    return True


def _bound_node(inst, rel, node, fathom=None, max_rounds=KELLEY_ROUNDS):
    """LP bound with on-demand ball cuts.

    Returns (kind, bound, witness); kind "ok" means a valid lower bound,
    "infeasible" proves the box holds no feasible pair, "fail" signals an
    LP breakdown (the caller keeps the parent bound). New cuts land on the
    node (children inherit them) and in the shared archive. The loop stops
    early once the value crosses ``fathom`` (the node dies anyway), the
    witness reaches the balls, or the value stagnates; polishing the ball
    to BALL_TOL can take unbounded rounds in dimension >= 3, and branching
    tightens boxes faster than crawling cuts do.
    """
    G, H = inst.P.generators, inst.Q.generators
    p, q = G.shape[1], H.shape[1]
    m, n = G.shape[0], H.shape[0]
    # a negative optimum pins both norms to one, so boxes whose ambient
    # image misses the unit sphere cannot hold the optimum: drop them
    ub_ = _ambient_box(G, node.x_lo, node.x_hi)
    vb_ = _ambient_box(H, node.y_lo, node.y_hi)
    if ub_ is None or vb_ is None:
        return "infeasible", None, None
    nlo, nhi = _box_norm_range(*ub_)
    if nhi < 1.0 - 1e-12 or nlo > 1.0 + BALL_TOL:
        return "infeasible", None, None
    nlo, nhi = _box_norm_range(*vb_)
    if nhi < 1.0 - 1e-12 or nlo > 1.0 + BALL_TOL:
        return "infeasible", None, None
    node.cuts_x = _prune_cuts(node.cuts_x, ub_[0], ub_[1])
    node.cuts_y = _prune_cuts(node.cuts_y, vb_[0], vb_[1])
    d = rel.coeff.size
    obj, wit = None, None
    prev = None
    for _ in range(max_rounds):
        data = node_lp_data(rel, node, p, q)
        if data is None:
            return "infeasible", None, None
        c, A, b, bounds, Aeq, beq = data
        try:
            z, obj, status = nm.lp_solve(c, A, b, bounds, Aeq, beq)
        except NumericalFailure:
            return "fail", None, None
        if status == nm.LP_INFEASIBLE:
            return "infeasible", None, None
        if status != nm.LP_OPTIMAL:
            return "fail", None, None
        x, y, w = z[:p], z[p:p + q], z[p + q:p + q + d]
        wit = (x, y, w)
        gx = z[p + q + d:p + q + d + m]
        hy = z[p + q + d + m:p + q + d + m + n]
        ngx, nhy = float(np.linalg.norm(gx)), float(np.linalg.norm(hy))
        added = False
        if ngx > 1.0 + BALL_TOL:
            node.cuts_x.append(gx / ngx)
            _add_cut(rel.cuts_x, G.T @ (gx / ngx))
            added = True
        if nhy > 1.0 + BALL_TOL:
            node.cuts_y.append(hy / nhy)
            _add_cut(rel.cuts_y, H.T @ (hy / nhy))
            added = True
        if not added:
            break
        if fathom is not None and obj >= fathom:
            break
        if prev is not None and obj - prev <= 1e-7 * max(1.0, abs(obj)):
            break
        prev = obj
    return "ok", float(obj), wit


def _polish(inst, u_raw, v_raw, incumbent):
    """Alternating descent from a candidate pair; keeps the better of the
    polished value and the incumbent triple (lam, u, v)."""
    nu, nv = float(np.linalg.norm(u_raw)), float(np.linalg.norm(v_raw))
    if nu <= 1e-9 or nv <= 1e-9:
        return incumbent
    u, v, _ = _fixed_point_polish(inst, u_raw / nu, v_raw / nv)
    lam = float(u @ inst.A @ v)
    if lam < incumbent[0]:
        return (lam, u, v)
    return incumbent


def _copy_node(node):
    return BilinearNode(
        x_lo=node.x_lo.copy(), x_hi=node.x_hi.copy(),
        y_lo=node.y_lo.copy(), y_hi=node.y_hi.copy(),
        lower_bound=node.lower_bound, depth=node.depth + 1,
        cuts_x=list(node.cuts_x), cuts_y=list(node.cuts_y),
    )


def split_node(node, rel):
    """Bisect the box side with the worst product mismatch at the witness.

    The split point is the witness coordinate clamped to the middle 40% of
    the interval, on the longer of the two sides involved. Without a
    witness (an LP failure upstream) the largest box rectangle splits at
    its midpoint. Returns [] only when every product side is degenerate.
    """
    xw = yw = None
    if node.witness is not None:
        xw, yw, w = node.witness
        key = -np.abs(w - xw[rel.idx_i] * yw[rel.idx_j])
        if key.min() > -1e-14:
            # envelope exact at the witness everywhere: mismatch cannot
            # guide the split, fall back to the largest box rectangle
            xw = yw = None
            key = None
    else:
        key = None
    if key is None:
        key = -((node.x_hi[rel.idx_i] - node.x_lo[rel.idx_i])
                * (node.y_hi[rel.idx_j] - node.y_lo[rel.idx_j]))
    for k in np.argsort(key):
        i, j = int(rel.idx_i[k]), int(rel.idx_j[k])
        xlen = float(node.x_hi[i] - node.x_lo[i])
        ylen = float(node.y_hi[j] - node.y_lo[j])
        if max(xlen, ylen) <= 0.0:
            continue
        if xlen >= ylen:
            lo = float(node.x_lo[i])
            t = float(xw[i]) if xw is not None else lo + 0.5 * xlen
            t = float(np.clip(t, lo + 0.3 * xlen, lo + 0.7 * xlen))
            a, bnode = _copy_node(node), _copy_node(node)
            a.x_hi[i] = t
            bnode.x_lo[i] = t
        else:
            lo = float(node.y_lo[j])
            t = float(yw[j]) if yw is not None else lo + 0.5 * ylen
            t = float(np.clip(t, lo + 0.3 * ylen, lo + 0.7 * ylen))
            a, bnode = _copy_node(node), _copy_node(node)
            a.y_hi[j] = t
            bnode.y_lo[j] = t
        return [a, bnode]
    return []


def _tighten_box(inst, rel, node, cutoff, passes=2):
    """Optimality-based tightening of a node box.

    Maximizes and minimizes each coordinate over the node LP with the extra
    row (objective) <= cutoff. Any feasible pair beating the incumbent
    survives, so shrinking the box to the LP's reach keeps every candidate
    optimum while tightening all later envelopes. Runs a couple of passes
    because tighter boxes sharpen the envelope rows themselves.
    """
    p, q = node.x_lo.size, node.y_lo.size
    for _ in range(passes):
        data = node_lp_data(rel, node, p, q)
        if data is None:
            return node
        c, A, b, bounds, Aeq, beq = data
        A = np.vstack([A, c[None, :]])
        b = np.append(b, cutoff)
        changed = False
        for l in range(p + q):
            e = np.zeros(c.size)
            e[l] = -1.0
            try:
                _, hi_neg, status = nm.lp_solve(e, A, b, bounds, Aeq, beq)
                if status != nm.LP_OPTIMAL:
                    continue
                _, lo, status2 = nm.lp_solve(-e, A, b, bounds, Aeq, beq)
                if status2 != nm.LP_OPTIMAL:
                    continue
            except NumericalFailure:
                continue
            hi = -hi_neg * (1.0 + 1e-9) + 1e-12
            lo = max(0.0, lo * (1.0 - 1e-9) - 1e-12)
            if l < p:
                if hi < node.x_hi[l]:
                    node.x_hi[l] = hi
                    changed = True
                if lo > node.x_lo[l]:
                    node.x_lo[l] = lo
                    changed = True
            else:
                if hi < node.y_hi[l - p]:
                    node.y_hi[l - p] = hi
                    changed = True
                if lo > node.y_lo[l - p]:
                    node.y_lo[l - p] = lo
                    changed = True
        if not changed:
            break
    return node


def _write_node_log(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "bound", "incumbent", "depth", "time"])
        for r in rows:
            w.writerow([r[0], repr(float(r[1])), repr(float(r[2])), r[3],
                        repr(float(r[4]))])


def _dual_floor(inst, need, Bx, By, time_budget=2.0):
    """Certified floor on the bilinear minimum from a spectral shift.

    Any N with G'NH >= 0 entrywise has u'Nv >= 0 on the cone sections, so
    <u, Av> >= -sigma_max(A - N). Minimizing that norm over the feasible
    shifts is convex; projected subgradient descent does it, with two
    touches for the spectral kinks: the step direction blends the top
    dyads through a softmax whose width tracks the step size (a lone
    top dyad zigzags when the optimum has a multiple leading value), and
    heavy-ball momentum averages out what zigzag remains. Projection onto
    the feasible shifts is an NNLS over the generator outer products,
    warm-started on its own support across iterations.

    Returns a floor that stays valid under the NNLS tolerance: the
    constraint dust -min(G'NH) is charged at the largest coordinate mass
    any section point can carry. Stops early once the floor reaches
    ``need``; gives up (returns None) when the generator product space is
    too large for the dense gram.
    """
    A = inst.A
    G, H = inst.P.generators, inst.Q.generators
    p, q = G.shape[1], H.shape[1]
    if p * q > 4096:
        return None
    dust_scale = float(Bx.sum() * By.sum())
    gram = np.kron(H.T @ H, G.T @ G)
    sup = None

    def project(M):
        nonlocal sup
        rhs = -(G.T @ M @ H).ravel(order="F")
        mu, sup = nm.nnls_gram_warm(gram, rhs, support=sup)
        return M + G @ mu.reshape((p, q), order="F") @ H.T

    best = np.inf       # certified floor value, monotone
    raw_best = np.inf   # plain sigma_max(A - N), drives the schedule
    restart = None

    def consider(N, s0):
        nonlocal best, raw_best, restart
        raw_best = s0
        restart = N
        dust = max(0.0, -float((G.T @ N @ H).min()))
        val = s0 + dust * dust_scale
        if val < best:
            best = val

    sA = float(inst.norm)
    t0 = time.perf_counter()
    N = project(np.zeros_like(A))
    consider(N, float(np.linalg.svd(A - N, compute_uv=False)[0]))
    eta = 0.3 * sA
    for _ in range(60):
        if best <= need:
            break
        mu = float(np.clip(eta, 1e-9 * sA, 1e-3 * sA))
        mom = np.zeros_like(A)
        for k in range(400):
            U, s, Vt = np.linalg.svd(A - N, full_matrices=False)
            s0 = float(s[0])
            if s0 < raw_best:
                consider(N, s0)
                if best <= need:
                    return best
            w = np.exp((s - s0) / mu)
            w /= w.sum()
            D = (U * w) @ Vt
            mom = D + 0.7 * mom
            N = project(N + eta * mom / max(float(np.linalg.norm(mom)), 1e-12))
            if (k & 63) == 0 and time.perf_counter() - t0 > time_budget:
                return best
        eta *= 0.7
        N = restart
    return best


def solve_bnb(inst, gap_tol=1e-6, time_limit=None, node_log=None,
              warm_start=None):
    """Globally minimize <u, Av> over the unit cone sections by spatial
    branch-and-bound.

    Requires preprocessing to have run: G'AH must have a negative entry
    (the nonnegative case has a closed form and would also break the
    inequality reformulation). Returns ExactGlobal once the remaining gap
    is below gap_tol * max(1, |incumbent|); hitting time_limit instead
    yields BoundPair with .lower and .upper set. ``warm_start`` seeds the
    incumbent from a known feasible Solution. ``node_log``, when a path,
    receives one CSV row per expanded node (id, bound, incumbent, depth,
    time); the same rows are attached to the result as .node_rows.
    """
    t0 = time.perf_counter()
    if np.min(inst.cross) >= 0.0:
        raise PreprocessingRequired("G'AH is nonnegative; use check_nonnegative_case")
    p, q = inst.P.count, inst.Q.count
    Bx = np.minimum(variable_bounds(inst.P), ball_coord_bounds(inst.P))
    By = np.minimum(variable_bounds(inst.Q), ball_coord_bounds(inst.Q))
    rel = build_relaxation(inst)

    # incumbent: polished min-entry generator pair, and any caller seed
    i0, j0 = np.unravel_index(int(np.argmin(inst.cross)), inst.cross.shape)
    inc = (np.inf, None, None)
    inc = _polish(inst, inst.P.generators[:, i0], inst.Q.generators[:, j0], inc)
    if warm_start is not None:
        inc = _polish(inst, warm_start.u, warm_start.v, inc)
    # supporting planes at the incumbent pair: the optimum's own cuts
    _add_cut(rel.cuts_x, inst.P.generators.T @ inc[1])
    _add_cut(rel.cuts_y, inst.Q.generators.T @ inc[2])
    # node cut rows act on the ambient coordinates; seed with the planes
    # touching at the generator directions plus the incumbent directions
    seed_x = [inst.P.generators[:, i].copy() for i in range(p)] + [inc[1].copy()]
    seed_y = [inst.Q.generators[:, j].copy() for j in range(q)] + [inc[2].copy()]

    # product envelopes alone flatten near the optimum on structured cones,
    # so sharpen the spectral floor first: a feasible shift certifies
    # min >= -sigma(A - N), usually within a whisker of the incumbent, and
    # the floor row then carries that bound into every node LP. Chasing it
    # below the fathom threshold makes root-level certification the norm.
    slack = 0.4 * gap_tol * max(1.0, abs(inc[0]))
    budget = 2.0 if time_limit is None else min(2.0, 0.25 * time_limit)
    floor = _dual_floor(inst, abs(inc[0]) + slack, Bx, By, time_budget=budget)
    if floor is not None:
        rel.sigma = min(rel.sigma, floor)

    heap = []
    rows = []
    seq = 0
    next_id = 0

    def admit(node, parent_bound):
        nonlocal inc, seq, next_id
        fathom = inc[0] - 0.5 * gap_tol * max(1.0, abs(inc[0]))
        rounds = KELLEY_ROUNDS if node.depth == 0 else 8
        kind, val, wit = _bound_node(inst, rel, node, fathom=fathom,
                                     max_rounds=rounds)
        if kind == "infeasible":
            return
        if kind == "fail":
            # keep the parent's bound (still valid) and re-split on pop
            node.lower_bound = parent_bound
            node.witness = None
        else:
            node.lower_bound = max(parent_bound, val)
            node.witness = wit
            # polish only witnesses whose bilinear value challenges the
            # incumbent; others cannot improve it
            wit_val = float(wit[0] @ rel.C @ wit[1])
            if wit_val < inc[0] + 1e-9 * max(1.0, abs(inc[0])):
                inc = _polish(inst, inst.P.generators @ wit[0],
                              inst.Q.generators @ wit[1], inc)
        if node.lower_bound < inc[0] - gap_tol * max(1.0, abs(inc[0])):
            node.node_id = next_id
            next_id += 1
            heapq.heappush(heap, (node.lower_bound, -node.depth, seq, node))
            seq += 1

    root = BilinearNode(x_lo=np.zeros(p), x_hi=Bx, y_lo=np.zeros(q), y_hi=By,
                        lower_bound=-np.inf, depth=0,
                        cuts_x=seed_x, cuts_y=seed_y)
    # settle the ball approximation once, then shrink the root box around
    # the set of incumbent-beating points
    _bound_node(inst, rel, root)
    cutoff = inc[0] + 1e-12 * max(1.0, abs(inc[0]))
    _tighten_box(inst, rel, root, cutoff)
    # the heap orders nodes by their own LP values; -sigma only clamps the
    # reported global bound, never the keys, or ties flatten the ordering
    sigma = float(rel.sigma)
    admit(root, -np.inf)
    if not heap and root.lower_bound > -np.inf:
        # certified at the root: no pops will happen, log the root itself
        rows.append((0, max(root.lower_bound, -sigma), inc[0], 0,
                     time.perf_counter() - t0))

    interrupted = False
    while heap:
        lb = heap[0][0]
        scale = max(1.0, abs(inc[0]))
        if lb >= inc[0] - gap_tol * scale:
            break  # no open node can improve: certified
        if time_limit is not None and time.perf_counter() - t0 > time_limit:
            interrupted = True
            break
        _, _, _, node = heapq.heappop(heap)
        rows.append((node.node_id, max(node.lower_bound, -sigma), inc[0],
                     node.depth, time.perf_counter() - t0))
        if node.depth <= 2:
            # shallow boxes pay for optimality-based tightening many times
            # over; the cutoff row uses the freshest incumbent
            _tighten_box(inst, rel, node,
                         inc[0] + 1e-12 * max(1.0, abs(inc[0])), passes=1)
        kids = split_node(node, rel)
        if not kids:
            log.warning("node %d: degenerate box, dropped within gap", node.node_id)
            continue
        for kid in kids:
            admit(kid, node.lower_bound)

    lam_inc, u, v = inc
    exact = not interrupted
    sol = Solution(u=u, v=v, lam=float(u @ inst.A @ v),
                   status=STATUS_EXACT if exact else STATUS_BOUND_PAIR,
                   wall_time=time.perf_counter() - t0)
    if not exact:
        sol.lower = float(max(heap[0][0], -sigma)) if heap else float(-sigma)
        sol.upper = sol.lam
    sol.kkt_residual = kkt_residual(inst, u, v)
    sol.node_rows = rows
    sol.cuts_x = list(rel.cuts_x)
    sol.cuts_y = list(rel.cuts_y)
    if node_log is not None:
        _write_node_log(node_log, rows)
    return sol


# ------------------------------------------------------------ model export


def _fmt(x):
    return format(float(x), ".17g")


def _join_terms(terms):
    parts = []
    for c, name in terms:
        mag = f"{_fmt(abs(c))} {name}"
        if not parts:
            parts.append(f"- {mag}" if c < 0 else mag)
        else:
            parts.append(("- " if c < 0 else "+ ") + mag)
    return " ".join(parts)


def export_miqcp(inst, path):
    """Write the unit-ball model as LP-format text.

    Layout: a bilinear objective over the nonzeros of A (coefficients
    doubled inside the conventional [ ... ] / 2 bracket), equalities tying
    u = Gx and v = Hy, one quadratic ball constraint per side, and free
    declarations for the ambient variables (x, y default to nonnegative).
    Coefficients print with 17 significant digits, so a reader recovers
    them bit for bit.
    """
    A = inst.A
    G, H = inst.P.generators, inst.Q.generators
    m, n = A.shape
    lines = ["\\ cone-constrained singular value model", "Minimize"]
    obj = [(2.0 * A[i, j], f"u{i + 1} * v{j + 1}")
           for i in range(m) for j in range(n) if A[i, j] != 0.0]
    lines.append(" obj: [ " + _join_terms(obj) + " ] / 2")
    lines.append("Subject To")
    for i in range(m):
        row = [(1.0, f"u{i + 1}")]
        row += [(-G[i, l], f"x{l + 1}") for l in range(G.shape[1]) if G[i, l] != 0.0]
        lines.append(f" defu{i + 1}: " + _join_terms(row) + " = 0")
    for j in range(n):
        row = [(1.0, f"v{j + 1}")]
        row += [(-H[j, l], f"y{l + 1}") for l in range(H.shape[1]) if H[j, l] != 0.0]
        lines.append(f" defv{j + 1}: " + _join_terms(row) + " = 0")
    lines.append(" ballu: [ " + " + ".join(f"u{i + 1} ^ 2" for i in range(m))
                 + " ] <= 1")
    lines.append(" ballv: [ " + " + ".join(f"v{j + 1} ^ 2" for j in range(n))
                 + " ] <= 1")
    lines.append("Bounds")
    lines += [f" u{i + 1} free" for i in range(m)]
    lines += [f" v{j + 1} free" for j in range(n)]
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_miqcp(path):
    """Re-read a model written by export_miqcp.

    Returns {"A": ..., "G": ..., "H": ...} with every coefficient equal,
    bit for bit, to what the writer was given.
    """
    with open(path) as fh:
        raw = [ln.strip() for ln in fh
               if ln.strip() and not ln.lstrip().startswith("\\")]
    try:
        obj_line = next(ln for ln in raw if ln.startswith("obj:"))
    except StopIteration:
        raise InvalidInput("parse_miqcp: no objective line")
    if not any(ln.startswith("ballu:") for ln in raw) or \
            not any(ln.startswith("ballv:") for ln in raw):
        raise InvalidInput("parse_miqcp: missing ball constraints")

    def lin_terms(body):
        toks = body.split()
        out = []
        sign = 1.0
        k = 0
        while k < len(toks):
            if toks[k] in ("+", "-"):
                sign = 1.0 if toks[k] == "+" else -1.0
                k += 1
                continue
            out.append((sign * float(toks[k]), toks[k + 1]))
            sign = 1.0
            k += 2
        return out

    body = obj_line[obj_line.index("[") + 1:obj_line.index("]")]
    toks = body.replace("*", " ").split()
    obj_terms = []
    sign = 1.0
    k = 0
    while k < len(toks):
        if toks[k] in ("+", "-"):
            sign = 1.0 if toks[k] == "+" else -1.0
            k += 1
            continue
        obj_terms.append((sign * float(toks[k]), toks[k + 1], toks[k + 2]))
        sign = 1.0
        k += 3

    defu = {}
    defv = {}
    for ln in raw:
        if not (ln.startswith("defu") or ln.startswith("defv")):
            continue
        name, rest = ln.split(":", 1)
        body = rest.split("=", 1)[0]
        (defu if name.startswith("defu") else defv)[int(name[4:])] = lin_terms(body)

    m, n = len(defu), len(defv)
    p = max((int(nm_[1:]) for terms in defu.values() for _, nm_ in terms
             if nm_.startswith("x")), default=0)
    q = max((int(nm_[1:]) for terms in defv.values() for _, nm_ in terms
             if nm_.startswith("y")), default=0)
    A = np.zeros((m, n))
    for c, un, vn in obj_terms:
        A[int(un[1:]) - 1, int(vn[1:]) - 1] = c / 2.0
    G = np.zeros((m, p))
    for i, terms in defu.items():
        for c, nm_ in terms:
            if nm_.startswith("x"):
                G[i - 1, int(nm_[1:]) - 1] = -c
    H = np.zeros((n, q))
    for j, terms in defv.items():
        for c, nm_ in terms:
            if nm_.startswith("y"):
                H[j - 1, int(nm_[1:]) - 1] = -c
    return {"A": A, "G": G, "H": H}
