"""Polyhedral cones given by finitely many unit generators.

A cone is the set of nonnegative combinations of the columns of its
generator matrix. Generators are stored unit-norm with duplicates removed.
Projections run through nonnegative least squares on the gram matrix, which
lets repeated projections onto the same cone reuse both the gram matrix and
the previous active set.

Matrix cones (positive semidefinite, entrywise-nonnegative symmetric) have
no finite generator list; they are represented by a ConeOracle pairing a
projection map with a best-extreme-direction map, over symmetric matrices
flattened so the euclidean inner product equals the Frobenius one.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import numerics as nm
from .errors import InvalidGenerator, InvalidInput, NoImprovingDirection

DEDUPE_COS = 1.0 - 1e-12


@dataclass
class PolyhedralCone:
    """Cone spanned by the unit columns of ``generators``."""

    generators: np.ndarray  # (ambient_dim, num_gens), unit columns
    pointed: bool
    label: str = ""
    is_orthant: bool = False
    _gram: Optional[np.ndarray] = field(default=None, repr=False)
    _warm: Optional[np.ndarray] = field(default=None, repr=False)
    _memo: Optional[tuple] = field(default=None, repr=False)
    _band: Optional[int] = field(default=None, repr=False)

    @property
    def dim(self):
        return self.generators.shape[0]

    @property
    def count(self):
        return self.generators.shape[1]

    def gram(self):
        if self._gram is None:
            G = self.generators
            self._gram = np.ascontiguousarray(G.T @ G)
        return self._gram

    def gram_bandwidth(self):
        """Largest |i-j| with gram[i,j] exactly nonzero (chain-structured
        generator families give small bands, which speeds up projections)."""
        if self._band is None:
            i, j = np.nonzero(self.gram())
            self._band = int(np.max(np.abs(i - j))) if i.size else 0
        return self._band


def _pointed_lp(G):
    """Pointedness test. The cone contains a line iff some nonnegative,
    nontrivial combination of unit generators cancels: max e'x subject to
    Gx = 0 (as +-1e-9 inequality pairs), 0 <= x <= 1. Optimum <= 1e-6 means
    only the trivial combination exists."""
    d, k = G.shape
    eps = 1e-9
    A_ub = np.vstack([G, -G])
    b_ub = np.full(2 * d, eps)
    x, obj, status = nm.lp_solve(-np.ones(k), A_ub, b_ub, [(0.0, 1.0)] * k)
    if status != nm.LP_OPTIMAL:
        # the feasible set is a box slice, so this should not happen; play
        # safe and report not pointed only on solid evidence
        return True
    return -obj <= 1e-6


def make_cone(raw_generators, label=""):
    """Build a cone from a (dim, count) generator matrix.

    Columns are normalized to unit length. Duplicate columns, cosine within
    1e-12 of 1, are dropped keeping the first occurrence. Zero columns are
    an error. Pointedness is computed once and cached.
    """
    G = nm.as_matrix(raw_generators, "generators")
    norms = np.linalg.norm(G, axis=0)
    if np.any(norms <= 1e-14):
        raise InvalidGenerator("zero generator column")
    G = G / norms
    keep = []
    for j in range(G.shape[1]):
        dup = any(float(G[:, j] @ G[:, i]) >= DEDUPE_COS for i in keep)
        if not dup:
            keep.append(j)
    G = np.ascontiguousarray(G[:, keep])
    return PolyhedralCone(G, pointed=_pointed_lp(G), label=label,
                          is_orthant=_looks_like_orthant(G))


def _looks_like_orthant(G):
    d, k = G.shape
    if d != k:
        return False
    cols = set()
    for j in range(k):
        nz = np.nonzero(G[:, j])[0]
        if nz.size != 1 or G[nz[0], j] != 1.0:
            return False
        cols.add(int(nz[0]))
    return len(cols) == d


def orthant(n):
    """The nonnegative orthant of dimension n."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidInput("orthant: n must be a positive integer")
    n = int(n)
    return PolyhedralCone(np.eye(n), pointed=True, label=f"orthant({n})", is_orthant=True)


def schur_cone(n):
    """Cone generated by the n-1 unit difference directions (e_i - e_{i+1})/sqrt(2)."""
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidInput("schur_cone: n must be an integer >= 2")
    n = int(n)
    G = np.zeros((n, n - 1))
    for i in range(n - 1):
        G[i, i] = 1.0
        G[i + 1, i] = -1.0
    G /= np.sqrt(2.0)
    # full column rank, hence pointed; skip the LP
    return PolyhedralCone(np.ascontiguousarray(G), pointed=True, label=f"schur({n})")


def project_cone(K, z, warm=True):
    """Euclidean projection of z onto the cone.

    Returns (point, coeffs) with point = generators @ coeffs and coeffs >= 0.
    ``warm=True`` reuses the active set from the previous projection onto
    this cone object, which is what makes alternating methods cheap.
    """
    z = nm.as_vector(z, "z")
    if z.size != K.dim:
        raise InvalidInput("project_cone: dimension mismatch")
    if K.is_orthant:
        coeffs = np.clip(z, 0.0, None)
        return coeffs.copy(), coeffs
    if warm and K._memo is not None and np.array_equal(K._memo[0], z):
        # alternating schemes settle on a fixed point and then ask for the
        # same projection over and over; answering from the memo turns those
        # tail iterations into O(dim) work
        return K._memo[1].copy(), K._memo[2].copy()
    atb = K.generators.T @ z
    support = K._warm if (warm and K._warm is not None) else None
    coeffs, sup = nm.nnls_gram_warm(
        K.gram(), atb, support=support, bandwidth=K.gram_bandwidth()
    )
    K._warm = sup
    point = K.generators @ coeffs
    K._memo = (z.copy(), point.copy(), coeffs.copy())
    return point, coeffs


def is_pointed(K):
    """True if the cone contains no line (recomputes, ignoring the cache)."""
    return _pointed_lp(K.generators)


def ray_subproblem(A, z, K):
    """Minimize <z, A v> over unit vectors v in the cone K.

    If the projection of -A'z onto K is nonzero, the minimizer is that
    projection normalized; otherwise every cone direction has nonnegative
    inner product and the best single generator is optimal.
    Returns (v, value).
    """
    A = nm.as_matrix(A, "A")
    z = nm.as_vector(z, "z")
    if A.shape[0] != z.size or A.shape[1] != K.dim:
        raise InvalidInput("ray_subproblem: shape mismatch")
    c = A.T @ z
    p, _ = project_cone(K, -c)
    nrm = np.linalg.norm(p)
    if nrm > 1e-12:
        v = p / nrm
        return v, float(c @ v)
    vals = K.generators.T @ c
    j = int(np.argmin(vals))
    return K.generators[:, j].copy(), float(vals[j])


# -------------------------------------------------------------- oracle form


@dataclass
class ConeOracle:
    """Projection plus best-extreme-direction access to a cone.

    project(z) -> nearest cone point. best_generator(c) -> extreme unit
    element minimizing <., c>, raising NoImprovingDirection when the cone
    sees only nonnegative inner products with c. extreme_linmin(c), when
    set, is the total variant: the exact minimizer over extreme unit
    elements even at nonnegative cost (linear minimization over the unit
    cross-section is always attained on an extreme ray).
    """

    dim: int
    project: Callable[[np.ndarray], np.ndarray]
    best_generator: Callable[[np.ndarray], np.ndarray]
    descriptor: str = ""
    extreme_linmin: Optional[Callable[[np.ndarray], np.ndarray]] = None


def cone_as_oracle(K):
    """Wrap a PolyhedralCone in the oracle interface."""

    def _project(z):
        p, _ = project_cone(K, z)
        return p

    def _best_generator(c):
        vals = K.generators.T @ np.asarray(c, dtype=float)
        return K.generators[:, int(np.argmin(vals))].copy()

    return ConeOracle(dim=K.dim, project=_project, best_generator=_best_generator,
                      descriptor=K.label or "polyhedral",
                      extreme_linmin=_best_generator)


def sym_dim(n):
    return n * (n + 1) // 2


def sym_flatten(S):
    """Flatten a symmetric n x n matrix to a length n(n+1)/2 vector.

    Off-diagonal entries are scaled by sqrt(2) so the euclidean inner
    product of two flattened matrices equals their Frobenius inner product.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    iu = np.triu_indices(n)
    w = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return S[iu] * w


def sym_unflatten(v, n):
    v = np.asarray(v, dtype=float)
    if v.size != sym_dim(n):
        raise InvalidInput("sym_unflatten: length mismatch")
    iu = np.triu_indices(n)
    w = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    S = np.zeros((n, n))
    S[iu] = v / w
    return S + S.T - np.diag(np.diag(S))


def psd_oracle(n):
    """Oracle for the cone of n x n positive semidefinite matrices,
    in flattened coordinates.

    project clamps negative eigenvalues to zero. best_generator(C) is the
    normalized negative-semidefinite part of sym(C): with C = Q L Q', keep
    the negative eigenvalues, flip the sign, normalize in Frobenius norm.
    """
    if n < 1:
        raise InvalidInput("psd_oracle: n must be >= 1")

    def _project(z):
        S = sym_unflatten(z, n)
        eigs, Q = nm.sym_eig(S)
        pos = np.clip(eigs, 0.0, None)
        return sym_flatten((Q * pos) @ Q.T)

    def _best_generator(c):
        C = sym_unflatten(c, n)
        eigs, Q = nm.sym_eig(C)
        neg = np.clip(eigs, None, 0.0)
        nrm = np.linalg.norm(neg)
        if nrm <= 1e-14:
            raise NoImprovingDirection("cost has no negative-semidefinite part")
        X = (Q * (-neg / nrm)) @ Q.T
        return sym_flatten(X)

    def _extreme_linmin(c):
        # rank-one projector of the least eigenpair: exact argmin over
        # extreme rays whatever the sign of the spectrum
        C = sym_unflatten(c, n)
        _, Q = nm.sym_eig(C)
        q = Q[:, 0]
        return sym_flatten(np.outer(q, q))

    return ConeOracle(dim=sym_dim(n), project=_project, best_generator=_best_generator,
                      descriptor=f"psd({n})", extreme_linmin=_extreme_linmin)


def nonneg_sym_oracle(n):
    """Oracle for symmetric n x n matrices with nonnegative entries,
    in flattened coordinates.

    project takes the entrywise positive part; best_generator(C) is the
    normalized entrywise negative part -min(C, 0).
    """
    if n < 1:
        raise InvalidInput("nonneg_sym_oracle: n must be >= 1")

    def _project(z):
        S = sym_unflatten(z, n)
        return sym_flatten(np.clip(S, 0.0, None))

    def _best_generator(c):
        C = sym_unflatten(c, n)
        Xneg = -np.clip(C, None, 0.0)
        nrm = np.linalg.norm(Xneg)
        if nrm <= 1e-14:
            raise NoImprovingDirection("cost has no negative entry")
        return sym_flatten(Xneg / nrm)

    def _extreme_linmin(c):
        # extreme rays are single-entry symmetric patterns; compare the unit
        # diagonal elements E_ii (cost c_ii) with the unit off-diagonal
        # pairs (E_ij+E_ji)/sqrt(2) (cost sqrt(2) c_ij)
        C = sym_unflatten(c, n)
        scaled = C * np.sqrt(2.0)
        np.fill_diagonal(scaled, np.diag(C))
        iu = np.triu_indices(n)
        flat_costs = scaled[iu]
        k = int(np.argmin(flat_costs))
        i, j = int(iu[0][k]), int(iu[1][k])
        X = np.zeros((n, n))
        if i == j:
            X[i, i] = 1.0
        else:
            X[i, j] = X[j, i] = 1.0 / np.sqrt(2.0)
        return sym_flatten(X)

    return ConeOracle(dim=sym_dim(n), project=_project, best_generator=_best_generator,
                      descriptor=f"nonneg_sym({n})", extreme_linmin=_extreme_linmin)
