"""Dense linear-algebra and convex-subproblem kernels shared by all solvers.

Everything here is a pure function on immutable inputs. The two hot kernels
(gram-matrix NNLS, simplex projection) dispatch through ``conesv._accel``,
which selects a numba-compiled or pure-numpy backend via CONESV_NUMBA.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ._accel import nnls_gram, nnls_gram_banded, project_simplex_kernel
from .errors import InvalidInput, NotPSD, NumericalFailure, RankDeficient

DEFAULT_RANK_TOL = 1e-9

LP_OPTIMAL = "optimal"
LP_INFEASIBLE = "infeasible"
LP_UNBOUNDED = "unbounded"


def as_matrix(A, name="matrix"):
    """Coerce to a 2-D float64 array, rejecting empty or non-finite input."""
    M = np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise InvalidInput(f"{name}: expected a nonempty 2-D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInput(f"{name}: entries must be finite")
    return M


def as_vector(v, name="vector"):
    w = np.asarray(v, dtype=float).ravel()
    if w.size < 1:
        raise InvalidInput(f"{name}: expected a nonempty vector")
    if not np.all(np.isfinite(w)):
        raise InvalidInput(f"{name}: entries must be finite")
    return w


@dataclass(frozen=True)
class SpectralData:
    """Spectral norm data of a matrix.

    sigma_max is the largest singular value, multiplicity_r the number of
    singular values within rank_tol*sigma_max of it, and left_basis /
    right_basis hold orthonormal bases of the corresponding singular
    subspaces (one column per clustered singular value).
    """

    sigma_max: float
    multiplicity_r: int
    left_basis: np.ndarray
    right_basis: np.ndarray


def svd_spectral(A, rank_tol=DEFAULT_RANK_TOL):
    """Spectral norm, its numerical multiplicity, and the singular bases."""
    A = as_matrix(A, "A")
    if not 0.0 < rank_tol <= 1e-4:
        raise InvalidInput("rank_tol must lie in (0, 1e-4]")
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    smax = float(s[0])
    r = int(np.count_nonzero(smax - s <= rank_tol * smax))
    return SpectralData(smax, r, U[:, :r].copy(), Vh[:r].T.copy())


def sym_eig(S):
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending."""
    S = as_matrix(S, "S")
    if S.shape[0] != S.shape[1]:
        raise InvalidInput("sym_eig: matrix must be square")
    nrm = float(np.linalg.norm(S))
    if np.linalg.norm(S - S.T) > 1e-12 * max(1.0, nrm):
        raise InvalidInput("sym_eig: matrix is not symmetric within tolerance")
    eigs, Q = np.linalg.eigh(0.5 * (S + S.T))
    return eigs, Q


def pinv_full_rank(M, rank_tol=DEFAULT_RANK_TOL):
    """Left pseudo-inverse (M'M)^{-1} M' of a full-column-rank matrix."""
    M = as_matrix(M, "M")
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    rank = int(np.count_nonzero(s > rank_tol * s[0])) if s[0] > 0 else 0
    if rank < M.shape[1]:
        raise RankDeficient(
            f"matrix has numerical rank {rank} < {M.shape[1]} columns", rank=rank
        )
    return (Vh.T / s) @ U.T


def psd_cholesky_rank(S, tol=DEFAULT_RANK_TOL):
    """Rank-revealing factorization S = L L' of a PSD matrix.

    Uses an eigendecomposition clamp (columns of L are sqrt-scaled
    eigenvectors), which stays well behaved for nearly singular S.
    Returns (L, rank) where L has one column per eigenvalue above
    tol*||S||.
    """
    eigs, Q = sym_eig(S)
    # scale floor of 1 so that S ~ machine-epsilon noise yields rank 0
    nrm = max(1.0, float(np.max(np.abs(eigs)))) if eigs.size else 1.0
    if np.any(eigs < -tol * nrm):
        raise NotPSD(f"eigenvalue {eigs.min():.3e} below -tol*scale = {-tol * nrm:.3e}")
    keep = eigs > tol * nrm
    L = Q[:, keep] * np.sqrt(eigs[keep])
    return L, int(np.count_nonzero(keep))


def nnls(M, b):
    """Nonnegative least squares: minimize ||Mx - b|| over x >= 0.

    Active-set method on the normal equations with a 10*max(rows, cols)
    iteration cap. Returns (x, residual). At the solution the gradient
    M'(Mx - b) is nonnegative up to 1e-8 and complementary to x.
    """
    M = as_matrix(M, "M")
    b = as_vector(b, "b")
    if b.size != M.shape[0]:
        raise InvalidInput("nnls: b length must match row count")
    gram = np.ascontiguousarray(M.T @ M)
    atb = M.T @ b
    x, _ = nnls_gram_warm(gram, atb)
    return x, float(np.linalg.norm(M @ x - b))


def nnls_gram_warm(gram, atb, support=None, max_add=None, bandwidth=None):
    """NNLS given the gram matrix M'M and cross term M'b directly.

    ``support`` warm-starts the active-set method with a previous passive
    mask; the returned mask can seed the next call. This is the form used by
    repeated projections onto a fixed cone. ``bandwidth`` is the gram's band
    width when known; small bands (chain-like generator families) route to a
    banded-Cholesky kernel whose passes cost O(k*bw^2) instead of O(k^3).
    """
    atb = np.ascontiguousarray(atb, dtype=float)
    n = atb.shape[0]
    if support is None:
        support = np.zeros(n, dtype=bool)
    if max_add is None:
        max_add = 10 * n
    wtol = 1e-11 * max(1.0, float(np.max(np.abs(atb))))
    dtol = 1e-13 * max(1.0, float(np.max(np.diag(gram))))
    if bandwidth is not None and 4 * (bandwidth + 1) <= n:
        return nnls_gram_banded(gram, atb, support, max_add, wtol, dtol, bandwidth)
    return nnls_gram(gram, atb, support, max_add, wtol, dtol)


def project_simplex(v):
    """Euclidean projection onto the probability simplex."""
    v = as_vector(v, "v")
    return project_simplex_kernel(np.ascontiguousarray(v))


def lp_solve(c, A_ub=None, b_ub=None, bounds=None, A_eq=None, b_eq=None):
    """Solve min c'x s.t. A_ub x <= b_ub, A_eq x = b_eq, box bounds.

    Returns (x, objective, status) with status one of "optimal",
    "infeasible", "unbounded"; x and objective are None unless optimal.
    """
    res = lp_solve_detail(c, A_ub, b_ub, bounds, A_eq, b_eq)
    if res.status == 0:
        return res.x, float(res.fun), LP_OPTIMAL
    if res.status == 2:
        return None, None, LP_INFEASIBLE
    return None, None, LP_UNBOUNDED


def lp_solve_detail(c, A_ub=None, b_ub=None, bounds=None, A_eq=None, b_eq=None):
    """LP solve returning the full result (duals included) for bound work."""
    c = as_vector(c, "c")
    if bounds is None:
        bounds = [(0.0, None)] * c.size
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if res.status in (1, 4):
        raise NumericalFailure(f"LP solver failed: {res.message}")
    return res


def orth_basis(M, tol=DEFAULT_RANK_TOL):
    """Orthonormal basis of the numerical column span of M."""
    M = as_matrix(M, "M")
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        return np.zeros((M.shape[0], 0))
    rank = int(np.count_nonzero(s > tol * s[0]))
    return U[:, :rank].copy()
