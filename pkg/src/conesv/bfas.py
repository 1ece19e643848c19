"""Brute-force active-set solver.

Every locally optimal pair restricts to a support pair (I, J) of generator
indices on which the problem becomes an unconstrained singular-value
problem; the optimal support size is bounded by m + n - r. The solver
enumerates support pairs in increasing cardinality, computes for each the
candidate value mu = -sqrt(rho) from a restricted symmetric eigenproblem,
tests sign-feasibility of the eigenvector, and keeps the best globally
certified pair.

Enumeration runs in fixed-size waves. Within a wave every pair is evaluated
against the incumbent frozen at the wave start, and results are merged in
enumeration order afterwards. The prune (rho <= lambda^2 + 1e-12) is
monotone in the incumbent, so freezing it cannot lose an improving
candidate; this makes the returned solution bit-identical for any thread
count, including sequential runs.
"""

import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numerics as nm
from .errors import NumericalFailure, PreprocessingRequired
from .instance import (EXACT_KKT_TOL, STATUS_BOUND_PAIR, STATUS_EXACT,
                       Solution, kkt_residual)

log = logging.getLogger("conesv.bfas")

WAVE_SIZE = 1024
IMPROVE_EPS = 1e-12
PRUNE_EPS = 1e-12
EIG_CLUSTER_REL = 1e-9
RANK_EPS = 1e-10


@dataclass
class SupportPair:
    I: tuple
    J: tuple
    G_bar: Optional[np.ndarray] = None
    H_bar: Optional[np.ndarray] = None
    mu: Optional[float] = None
    feasible: bool = False
    z_bar: Optional[np.ndarray] = None


@dataclass
class Candidate:
    mu: float
    u: np.ndarray
    v: np.ndarray
    pair: SupportPair


def _inv_sqrt_psd(N):
    """Inverse square root of a posdef gram matrix, or None when it is
    numerically rank deficient (the pair is then skipped)."""
    eigs, Q = np.linalg.eigh(N)
    if eigs[0] <= RANK_EPS * max(eigs[-1], 1e-300):
        return None
    return (Q / np.sqrt(eigs)) @ Q.T


def feasibility_check(V, dim):
    """Search for z >= 0, e'z = 1 with (VV' - I)z ~ 0, i.e. a nonnegative
    vector inside span(V).

    Minimizes the max row violation by LP, then accepts iff the euclidean
    optimum is <= 1e-7. Returns z or None.
    """
    M = V @ V.T - np.eye(dim)
    # variables (z, t): minimize t subject to +-(Mz) <= t, sum z = 1
    c = np.zeros(dim + 1)
    c[-1] = 1.0
    ones_row = np.ones((1, dim + 1))
    ones_row[0, -1] = 0.0
    A_ub = np.vstack([
        np.hstack([M, -np.ones((dim, 1))]),
        np.hstack([-M, -np.ones((dim, 1))]),
        ones_row,
        -ones_row,
    ])
    b_ub = np.concatenate([np.zeros(2 * dim), [1.0, -1.0]])
    sol, _, status = nm.lp_solve(c, A_ub, b_ub, [(0.0, None)] * dim + [(0.0, None)])
    if status != nm.LP_OPTIMAL:
        return None
    z = sol[:dim]
    s = z.sum()
    if s <= 1e-12:
        return None
    z = z / s
    if np.linalg.norm(M @ z) > 1e-7:
        return None
    return z


def eval_support_pair(inst, pair, incumbent_lam):
    """Evaluate one support pair against the incumbent value.

    Returns None (skip: rank-deficient support, pruned by rho <= lambda^2,
    or sign-infeasible eigenvector) or a Candidate carrying mu = -sqrt(rho)
    and the normalized pair. The candidate satisfies the restricted
    stationarity system by construction; global criticality is the caller's
    KKT gate.
    """
    I, J = pair.I, pair.J
    li, lj = len(I), len(J)
    ix, jx = list(I), list(J)
    C = inst.cross[np.ix_(ix, jx)]
    NG = inst.P.gram()[np.ix_(ix, ix)]
    NH = inst.Q.gram()[np.ix_(jx, jx)]
    NGi = _inv_sqrt_psd(NG)
    if NGi is None:
        return None
    NHi = _inv_sqrt_psd(NH)
    if NHi is None:
        return None
    B = NGi @ C @ NHi
    # rho from the smaller symmetric similarity
    if li <= lj:
        S = B @ B.T
    else:
        S = B.T @ B
    eigs, Q = np.linalg.eigh(S)
    rho = float(eigs[-1])
    if rho <= incumbent_lam * incumbent_lam + PRUNE_EPS:
        return None
    mu = -float(np.sqrt(rho))
    cluster = eigs >= rho * (1.0 - EIG_CLUSTER_REL)
    Qc = Q[:, cluster]
    if li <= lj:
        Ux = NGi @ Qc                       # x-side eigenvectors of A_y A_x
        Uy = (NHi @ (B.T @ Qc)) / mu        # paired y-side, A_x xbar / mu
    else:
        Uy = NHi @ Qc                       # y-side eigenvectors of A_x A_y
        Ux = (NGi @ (B @ Qc)) / mu
    W = np.vstack([Uy, Ux])                 # stacked [ybar; xbar]
    k = W.shape[1]
    if k == 1:
        w = W[:, 0]
        scale = float(np.max(np.abs(w)))
        if scale <= 0.0:
            return None
        wn = w / scale
        if np.all(wn >= -1e-9):
            z = np.clip(wn, 0.0, None)
        elif np.all(wn <= 1e-9):
            z = np.clip(-wn, 0.0, None)
        else:
            return None
    else:
        V = nm.orth_basis(W)
        z = feasibility_check(V, lj + li)
        if z is None:
            return None
    ybar, xbar = z[:lj], z[lj:]
    u_raw = inst.P.generators[:, ix] @ xbar
    v_raw = inst.Q.generators[:, jx] @ ybar
    nu, nv = np.linalg.norm(u_raw), np.linalg.norm(v_raw)
    if nu <= 1e-12 or nv <= 1e-12:
        return None
    pair.mu = mu
    pair.feasible = True
    pair.z_bar = z
    return Candidate(mu=mu, u=u_raw / nu, v=v_raw / nv, pair=pair)


def _enumerate_supports(p, q, bound):
    """Canonical order: total cardinality ascending, then |I| ascending,
    then lexicographic I, then lexicographic J. Cardinality-2 pairs are the
    min-entry seed's job."""
    for s in range(3, bound + 1):
        for ki in range(max(1, s - q), min(p, s - 1) + 1):
            kj = s - ki
            for I in itertools.combinations(range(p), ki):
                for J in itertools.combinations(range(q), kj):
                    yield (I, J)


def _is_subset_pair(inner, outer):
    return set(inner[0]) <= set(outer[0]) and set(inner[1]) <= set(outer[1])


def subset_prune(pair_history, pair):
    """Optional feature flag: skip a pair contained in a recorded dominated
    superset. With cardinality-ascending enumeration strict subsets are
    visited before their supersets, so this fires only in replays; kept for
    contract completeness and measured honestly in tests."""
    return any(_is_subset_pair(pair, sup) for sup in pair_history)


@dataclass
class _Incumbent:
    lam: float
    u: np.ndarray
    v: np.ndarray
    I: list
    J: list
    certified: bool


def _seed_incumbent(inst):
    """Seed with the least entry of G'AH and its generator pair. The pair is
    feasible but not necessarily critical; if the lexicographically first
    minimizer fails certification, scan the remaining exact minimizers."""
    C = inst.cross
    lam0 = float(np.min(C))
    order = np.argwhere(C == lam0)
    best = None
    for i, j in order:
        u = inst.P.generators[:, i].copy()
        v = inst.Q.generators[:, j].copy()
        certified = kkt_residual(inst, u, v) <= EXACT_KKT_TOL
        if best is None:
            best = _Incumbent(lam0, u, v, [int(i)], [int(j)], certified)
        if certified:
            if best.certified is False:
                best = _Incumbent(lam0, u, v, [int(i)], [int(j)], True)
            break
    return best


def solve_bfas(inst, time_limit=None, parallel=1, progress=None,
               enable_subset_prune=False):
    """Exact enumeration solver.

    Requires preprocessing to have run: G'AH must have a negative entry and
    the optimum must differ from -||A||. Returns a Solution with status
    ExactGlobal when enumeration completes, or BoundPair(lower=-||A||,
    upper=best found) when the time limit interrupts it or a support pair
    had to be skipped on a numerical failure.

    ``progress``, if given, is called as progress(pairs_done, incumbent_lam,
    elapsed_seconds) after every wave.
    """
    t0 = time.perf_counter()
    if np.min(inst.cross) >= 0.0:
        raise PreprocessingRequired("G'AH is nonnegative; use check_nonnegative_case")
    parallel = max(1, int(parallel))
    bound_card = inst.m + inst.n - inst.spectral.multiplicity_r
    inc = _seed_incumbent(inst)
    downgraded = False
    interrupted = False
    pairs_done = 0
    history = []
    criticals = []

    def eval_one(ij):
        pair = SupportPair(I=ij[0], J=ij[1])
        if enable_subset_prune and subset_prune(history, ij):
            return None
        try:
            return eval_support_pair(inst, pair, frozen_prune)
        except (np.linalg.LinAlgError, NumericalFailure) as exc:
            log.warning("support pair %s skipped: %s", ij, exc)
            return "error"

    stream = _enumerate_supports(inst.P.count, inst.Q.count, bound_card)
    pool = ThreadPoolExecutor(max_workers=parallel) if parallel > 1 else None
    try:
        while True:
            wave = list(itertools.islice(stream, WAVE_SIZE))
            if not wave:
                break
            # while the incumbent pair is uncertified, equal-value candidates
            # must survive the prune, so pruning is suspended
            frozen_prune = inc.lam if inc.certified else 0.0
            if pool is not None:
                results = list(pool.map(eval_one, wave, chunksize=64))
            else:
                results = [eval_one(ij) for ij in wave]
            # merge in enumeration order against the live incumbent
            for ij, cand in zip(wave, results):
                if isinstance(cand, str):
                    downgraded = True
                    continue
                if cand is None:
                    continue
                improving = cand.mu < inc.lam - IMPROVE_EPS
                matching = (not inc.certified) and cand.mu <= inc.lam + IMPROVE_EPS
                if not (improving or matching):
                    if enable_subset_prune:
                        history.append(ij)
                    continue
                if kkt_residual(inst, cand.u, cand.v) > EXACT_KKT_TOL:
                    continue
                criticals.append(float(cand.mu))
                inc = _Incumbent(cand.mu, cand.u, cand.v,
                                 list(ij[0]), list(ij[1]), True)
                if enable_subset_prune:
                    history.append(ij)
            pairs_done += len(wave)
            elapsed = time.perf_counter() - t0
            if progress is not None:
                progress(pairs_done, inc.lam, elapsed)
            if time_limit is not None and elapsed > time_limit:
                interrupted = True
                break
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    exact = not (interrupted or downgraded)
    sol = Solution(
        u=inc.u, v=inc.v, lam=inc.lam,
        status=STATUS_EXACT if exact else STATUS_BOUND_PAIR,
        support_I=inc.I, support_J=inc.J,
        wall_time=time.perf_counter() - t0,
    )
    if not exact:
        sol.lower = -float(inst.norm)
        sol.upper = inc.lam
    sol.kkt_residual = kkt_residual(inst, sol.u, sol.v)
    sol.critical_values = sorted(set(criticals))
    return sol
