"""Extrapolated alternating optimization.

Each half-step solves the sphere-constrained linear subproblem over one
cone exactly (projection of the negated cost, falling back to the best
extreme ray), with momentum on the other block's iterate. When the
objective increases, the step is rolled back and one un-extrapolated step
is taken before the momentum coefficient restarts from a reduced value.

Works over polyhedral instances and over pure cone-oracle pairs (the
matrix-cone studies), which carry no generator representation.
"""

import csv
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cones import ConeOracle, cone_as_oracle
from .errors import InvalidInput, NoImprovingDirection
from .instance import STATUS_HEURISTIC, SVInstance, Solution, kkt_residual


@dataclass
class EAOConfig:
    K: int = 500
    delta: float = 1e-6
    beta0: float = 0.5
    eta: float = 2.0
    gamma: float = 1.05
    restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise InvalidInput("EAOConfig: K must be >= 1")
        if self.delta <= 0:
            raise InvalidInput("EAOConfig: delta must be positive")
        if not (self.eta > self.gamma > 1.0):
            raise InvalidInput("EAOConfig: need eta > gamma > 1")
        if not (0.0 <= self.beta0 <= 1.0):
            raise InvalidInput("EAOConfig: beta0 must be in [0, 1]")
        if self.restarts < 1:
            raise InvalidInput("EAOConfig: restarts must be >= 1")


@dataclass
class OracleInstance:
    """Oracle-only problem: minimize <u, Av> with A defaulting to identity.
    Used for cones without generator form (PSD, nonnegative symmetric)."""

    P: ConeOracle
    Q: ConeOracle
    A: Optional[np.ndarray] = None

    @property
    def m(self):
        return self.P.dim if self.A is None else self.A.shape[0]

    @property
    def n(self):
        return self.Q.dim if self.A is None else self.A.shape[1]


@dataclass
class EAOTrace:
    e: np.ndarray          # objective after each iteration (1-indexed e_k)
    beta: np.ndarray       # momentum coefficient used at each iteration
    restarted: np.ndarray  # True where the rollback branch fired


def trace_to_csv(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "e_k", "beta", "restarted"])
        for k in range(len(trace.e)):
            w.writerow([k + 1, repr(float(trace.e[k])), repr(float(trace.beta[k])),
                        int(trace.restarted[k])])


def sphere_linmin(oracle, c):
    """Exact minimizer of <x, c> over unit vectors x in the cone.

    The projection of -c, when nonzero, is the minimizer (negative value);
    otherwise the minimum over the unit cross-section is attained on an
    extreme ray and the oracle's extreme search takes over.
    """
    c = np.asarray(c, dtype=float)
    p = oracle.project(-c)
    nrm = np.linalg.norm(p)
    if nrm > 1e-12:
        return p / nrm
    try:
        return oracle.best_generator(c)
    except NoImprovingDirection:
        if oracle.extreme_linmin is None:
            raise
        return oracle.extreme_linmin(c)


def _parts(inst):
    if isinstance(inst, SVInstance):
        A = inst.A
        return (lambda v: A @ v), (lambda u: A.T @ u), \
            cone_as_oracle(inst.P), cone_as_oracle(inst.Q)
    if isinstance(inst, OracleInstance):
        if inst.A is None:
            return (lambda v: v), (lambda u: u), inst.P, inst.Q
        A = inst.A
        return (lambda v: A @ v), (lambda u: A.T @ u), inst.P, inst.Q
    raise InvalidInput("eao: expected SVInstance or OracleInstance")


def eao_run(inst, v0, cfg=None):
    """One run from the initial direction v0 (a unit vector of Q's ambient
    space). Returns (Solution with status Heuristic, EAOTrace).

    The iteration follows the extrapolated scheme literally, including its
    loop guard: continue while the last step moved either block by at least
    delta, or a rollback just fired, or (after a three-iteration grace) the
    relative objective decrease is at least delta. For negative objectives
    the relative-decrease clause always holds, so runs use the full budget.
    """
    cfg = cfg or EAOConfig()
    Av, ATu, P_or, Q_or = _parts(inst)
    t0 = time.perf_counter()

    u = np.zeros(P_or.dim)
    v = np.zeros(Q_or.dim)
    u_p = u
    v_p = v
    v_e = np.asarray(v0, dtype=float)
    beta = cfg.beta0
    beta_p = beta
    rs = 0
    e = []
    betas = []
    restarts = []
    best = None  # (e_k, u, v)

    k = 1
    while k <= cfg.K:
        if k > 1:
            moved = (np.linalg.norm(u - u_p) >= cfg.delta
                     or np.linalg.norm(v - v_p) >= cfg.delta)
            decreasing = (k <= 3 or e[-2] - e[-1] >= cfg.delta * e[-2])
            if not (rs == 1 or moved or decreasing):
                break
        u_p = u
        u = sphere_linmin(P_or, Av(v_e))
        u_e = u + beta * (u - u_p)
        v_p = v
        v = sphere_linmin(Q_or, ATu(u_e))
        v_e = v + beta * (v - v_p)
        e_k = float(u @ Av(v))
        rs = 0
        used_beta = beta
        restarted = False
        if k >= 2 and e_k > e[-1] and beta > 0.0:
            u = u_p
            v = v_p
            v_e = v_p
            beta_p = beta / cfg.eta
            beta = 0.0
            rs = 1
            restarted = True
            e_k = e[-1]
        else:
            beta = min(1.0, cfg.gamma * beta_p)
            beta_p = beta
        e.append(e_k)
        betas.append(used_beta)
        restarts.append(restarted)
        if not restarted and (best is None or e_k < best[0]):
            best = (e_k, u.copy(), v.copy())
        k += 1

    lam, ub, vb = best
    sol = Solution(u=ub, v=vb, lam=lam, status=STATUS_HEURISTIC,
                   wall_time=time.perf_counter() - t0)
    if isinstance(inst, SVInstance):
        sol.kkt_residual = kkt_residual(inst, ub, vb)
    trace = EAOTrace(e=np.asarray(e), beta=np.asarray(betas),
                     restarted=np.asarray(restarts, dtype=bool))
    return sol, trace


def _fixed_point_polish(inst, u, v, max_steps=100):
    """Plain alternating minimization (no momentum) until a fixed point.
    Monotone, so emitted heuristics are critical pairs to float precision."""
    Av, ATu, P_or, Q_or = _parts(inst)
    e_prev = float(u @ Av(v))
    for _ in range(max_steps):
        u = sphere_linmin(P_or, Av(v))
        v = sphere_linmin(Q_or, ATu(u))
        e_now = float(u @ Av(v))
        if e_prev - e_now <= 1e-14 * max(1.0, abs(e_prev)):
            e_prev = min(e_prev, e_now)
            break
        e_prev = e_now
    return u, v, e_prev


def multistart_eao(inst, cfg=None, time_budget=None, stop_value=None):
    """Best of seeded random restarts.

    Each restart r draws its own generator seeded by (cfg.seed, r): a
    Gaussian u0 defines v0 as the exact response of Q to u0, and one
    eao_run follows. The best value wins, ties to the earliest restart.
    Stops early when time_budget (seconds) is exhausted or the incumbent
    reaches stop_value.
    """
    cfg = cfg or EAOConfig()
    Av, ATu, P_or, Q_or = _parts(inst)
    t0 = time.perf_counter()
    best_sol = None
    runs = 0
    for r in range(cfg.restarts):
        rng = np.random.default_rng((cfg.seed, r))
        u0 = rng.standard_normal(P_or.dim)
        nrm = np.linalg.norm(u0)
        if nrm > 0:
            u0 /= nrm
        v0 = sphere_linmin(Q_or, ATu(u0))
        sol, _ = eao_run(inst, v0, cfg)
        runs += 1
        if best_sol is None or sol.lam < best_sol.lam:
            best_sol = sol
        if stop_value is not None and best_sol.lam <= stop_value:
            break
        if time_budget is not None and time.perf_counter() - t0 > time_budget:
            break
    u, v, lam = _fixed_point_polish(inst, best_sol.u, best_sol.v)
    out = Solution(u=u, v=v, lam=lam, status=STATUS_HEURISTIC,
                   wall_time=time.perf_counter() - t0)
    if isinstance(inst, SVInstance):
        out.kkt_residual = kkt_residual(inst, u, v)
    out.restarts_used = runs
    return out
