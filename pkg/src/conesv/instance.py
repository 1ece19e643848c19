"""Problem model, polynomial-time preprocessing, the reduction of the
general problem to a maximal-angle problem, and KKT certification.

The object of study: given an m x n matrix A and polyhedral cones P, Q,
minimize <u, Av> over unit u in P and unit v in Q. Preprocessing settles
two cases exactly: a nonnegative cross matrix (the optimum is its least
entry, attained at a generator pair) and the extreme value -||A|| (attained
iff a top singular pair can be matched by cone directions, checkable by
linear programming).
"""

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import numerics as nm
from .cones import PolyhedralCone, make_cone, project_cone
from .errors import InvalidInput

HEURISTIC_KKT_TOL = 1e-6
EXACT_KKT_TOL = 1e-7


@dataclass
class SVInstance:
    """Immutable problem data with cached spectral quantities."""

    A: np.ndarray
    P: PolyhedralCone
    Q: PolyhedralCone
    _spectral: Optional[nm.SpectralData] = field(default=None, repr=False)
    _cross: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.A = nm.as_matrix(self.A, "A")
        m, n = self.A.shape
        if self.P.dim != m or self.Q.dim != n:
            raise InvalidInput(
                f"cone dims ({self.P.dim}, {self.Q.dim}) do not match A shape {m}x{n}"
            )

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def spectral(self):
        if self._spectral is None:
            object.__setattr__(self, "_spectral", nm.svd_spectral(self.A))
        return self._spectral

    @property
    def norm(self):
        return self.spectral.sigma_max

    @property
    def cross(self):
        """G'AH, the bilinear form in generator coordinates."""
        if self._cross is None:
            val = self.P.generators.T @ self.A @ self.Q.generators
            object.__setattr__(self, "_cross", np.ascontiguousarray(val))
        return self._cross


STATUS_EXACT = "ExactGlobal"
STATUS_BOUND_PAIR = "BoundPair"
STATUS_HEURISTIC = "Heuristic"


@dataclass
class Solution:
    u: np.ndarray
    v: np.ndarray
    lam: float
    status: str
    kkt_residual: float = np.nan
    support_I: Optional[list] = None
    support_J: Optional[list] = None
    wall_time: Optional[float] = None
    # only for status == BoundPair
    lower: Optional[float] = None
    upper: Optional[float] = None
    # by-product: certified critical values visited (exact solvers)
    critical_values: Optional[list] = None


@dataclass
class PreprocessOutcome:
    kind: Optional[str]  # "NonnegativeCase" | "ExtremeCase" | None
    certificate: Optional[Solution] = None


def check_nonnegative_case(inst, tol=0.0):
    """If every entry of G'AH is >= -tol the optimum is the least entry,
    attained at the corresponding generator pair (lexicographically first
    minimizer). Returns PreprocessOutcome(kind=None) otherwise."""
    C = inst.cross
    if np.min(C) < -tol:
        return PreprocessOutcome(kind=None)
    # first minimizer in row-major order
    i, j = np.unravel_index(int(np.argmin(C)), C.shape)
    u = inst.P.generators[:, i].copy()
    v = inst.Q.generators[:, j].copy()
    lam = float(u @ inst.A @ v)
    sol = Solution(u=u, v=v, lam=lam, status=STATUS_EXACT,
                   support_I=[int(i)], support_J=[int(j)])
    sol.kkt_residual = kkt_residual(inst, u, v)
    return PreprocessOutcome(kind="NonnegativeCase", certificate=sol)


def _extreme_lp(M, d_row, box=1e6, row_eps=1e-9):
    """Feasibility: M z ~ 0 (rows within row_eps), d_row' z = 1, 0<=z<=box."""
    k = M.shape[1]
    A_ub = np.vstack([M, -M, d_row[None, :], -d_row[None, :]])
    b_ub = np.concatenate([
        np.full(M.shape[0], row_eps),
        np.full(M.shape[0], row_eps),
        [1.0 + 1e-9],
        [-(1.0 - 1e-9)],
    ])
    z, _, status = nm.lp_solve(np.zeros(k), A_ub, b_ub, [(0.0, box)] * k)
    if status != nm.LP_OPTIMAL:
        return None
    return z


def check_extreme_case(inst, mode="deterministic"):
    """Decide whether the optimum equals -||A||.

    That happens iff some nonnegative combination of cone generators matches
    a top singular pair with opposite sign: stacking [v; u], the vector
    blockdiag(H, G) z must lie in the span W of the stacked singular bases
    [V; -U]. Feasibility of the resulting least-squares system is tested per
    normalization direction p: deterministic mode sweeps every canonical p
    with both signs, randomized mode draws one Gaussian p (both signs).

    Any candidate is accepted only after reconstruction: the pair must
    satisfy Av = -||A|| u to certification tolerance.
    """
    if isinstance(mode, tuple):
        mode, seed = mode
    else:
        seed = 0
    sd = inst.spectral
    sigma = sd.sigma_max
    if sigma <= 0.0:
        return PreprocessOutcome(kind=None)
    m, n = inst.A.shape
    # stacked subspace: v-block on top to match blockdiag(H, G)
    W = nm.orth_basis(np.vstack([sd.right_basis, -sd.left_basis]))
    H = inst.Q.generators
    G = inst.P.generators
    q, p_ = H.shape[1], G.shape[1]
    D = np.zeros((n + m, q + p_))
    D[:n, :q] = H
    D[n:, q:] = G
    M = D - W @ (W.T @ D)  # (I - WW')D

    if mode == "deterministic":
        directions = [np.eye(n + m)[:, i] for i in range(n + m)]
    elif mode == "randomized":
        rng = np.random.default_rng(seed)
        directions = [rng.standard_normal(n + m)]
    else:
        raise InvalidInput(f"check_extreme_case: unknown mode {mode!r}")

    for pvec in directions:
        d_row = pvec @ D
        for sgn in (1.0, -1.0):
            z = _extreme_lp(M, sgn * d_row)
            if z is None:
                continue
            Dz = D @ z
            resid = np.linalg.norm(M @ z)
            if resid > 1e-7 * max(1.0, np.linalg.norm(Dz)):
                continue
            v_raw = H @ z[:q]
            u_raw = G @ z[q:]
            nu, nv = np.linalg.norm(u_raw), np.linalg.norm(v_raw)
            if nu <= 1e-9 or nv <= 1e-9:
                continue
            u = u_raw / nu
            v = v_raw / nv
            # reconstruction gate: the pair must realize the extreme value
            if np.linalg.norm(inst.A @ v + sigma * u) > 1e-6 * max(1.0, sigma):
                continue
            sol = Solution(u=u, v=v, lam=float(u @ inst.A @ v), status=STATUS_EXACT)
            sol.kkt_residual = kkt_residual(inst, u, v)
            if sol.kkt_residual > HEURISTIC_KKT_TOL:
                continue
            return PreprocessOutcome(kind="ExtremeCase", certificate=sol)
    return PreprocessOutcome(kind=None)


def reduce_to_ma(inst):
    """Reduce a general instance to a maximal-angle instance (A = identity).

    Requires m >= n; instances with m < n are transposed first (cones swap).
    With the normalized matrix B = A/||A||, the defect I - B'B is PSD and
    factors as LL'. Lifting rows by the rank of L embeds both cones in a
    common space where B acts isometrically:

        lifted P generators: [g; 0]        (norms preserved)
        lifted Q generators: [Bh; L'h]     (norms preserved since ||Bh||^2
                                            + ||L'h||^2 = ||h||^2)

    Optimal values satisfy lambda*(inst) = ||A|| * lambda*(ma_inst). Returns
    (ma_inst, scale, back_map) where back_map recovers (u, v) on the
    original instance from a lifted pair.
    """
    sigma = inst.spectral.sigma_max
    if sigma <= 0.0:
        raise InvalidInput("reduce_to_ma: A must be nonzero")
    transposed = inst.m < inst.n
    if transposed:
        A = inst.A.T / sigma
        G = inst.Q.generators  # P-side of the transposed problem
        H = inst.P.generators
    else:
        A = inst.A / sigma
        G = inst.P.generators
        H = inst.Q.generators
    m, n = A.shape
    L, s = nm.psd_cholesky_rank(np.eye(n) - A.T @ A, tol=1e-9)
    liftedG = np.vstack([G, np.zeros((s, G.shape[1]))])
    liftedH = np.vstack([A @ H, L.T @ H])
    ma_inst = SVInstance(np.eye(m + s), make_cone(liftedG), make_cone(liftedH))

    def back_map(x, y):
        u = x[:m].copy()
        v = A.T @ y[:m] + L @ y[m:]
        if transposed:
            return v, u
        return u, v

    return ma_inst, float(sigma), back_map


def kkt_residual(inst, u, v):
    """Worst violation of the first-order system at the pair (u, v).

    With x, y the cone coefficients of u, v and lambda = <u, Av>, a critical
    pair satisfies the complementarity system

        0 <= x  perp  G'AHy - lambda G'Gx  >= 0
        0 <= y  perp  H'A'Gx - lambda H'Hy >= 0      ||Gx|| = ||Hy|| = 1.

    Returned is the max over: representation errors ||Gx - u||, ||Hy - v||,
    norm deviations, negative parts of the two gradient blocks, and the two
    complementarity products. Zero exactly at critical pairs.
    """
    u = nm.as_vector(u, "u")
    v = nm.as_vector(v, "v")
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if not (0.5 <= nu <= 2.0 and 0.5 <= nv <= 2.0):
        raise InvalidInput("kkt_residual: u, v norms must lie in [0.5, 2]")
    un, vn = u / nu, v / nv
    _, x = project_cone(inst.P, un, warm=False)
    _, y = project_cone(inst.Q, vn, warm=False)
    G, H = inst.P.generators, inst.Q.generators
    lam = float(un @ inst.A @ vn)
    cx = inst.cross @ y - lam * (inst.P.gram() @ x)
    cy = inst.cross.T @ x - lam * (inst.Q.gram() @ y)
    terms = [
        float(np.linalg.norm(G @ x - un)),
        float(np.linalg.norm(H @ y - vn)),
        abs(nu - 1.0),
        abs(nv - 1.0),
        max(0.0, -float(np.min(cx))),
        abs(float(x @ cx)),
        max(0.0, -float(np.min(cy))),
        abs(float(y @ cy)),
    ]
    return max(terms)


def saddle_cardinality_bound(inst):
    """Upper bound m + n - r on |I| + |J| over optimal support pairs, where
    r is the multiplicity of the top singular value. Valid for optima away
    from -||A|| and the nonnegative case, which preprocessing removes."""
    return inst.m + inst.n - inst.spectral.multiplicity_r


def certify(inst, sol, exact):
    """Central gate: recompute and store the KKT residual, enforce the
    emission tolerance (1e-7 exact, 1e-6 heuristic)."""
    sol.kkt_residual = kkt_residual(inst, sol.u, sol.v)
    tol = EXACT_KKT_TOL if exact else HEURISTIC_KKT_TOL
    return sol.kkt_residual <= tol
