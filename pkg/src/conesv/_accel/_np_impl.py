"""Pure-numpy reference implementations of the hot kernels.

Semantics (pivot selection, tolerances, tie-breaking) are kept in lockstep
with ``_nb_impl``; only the inner linear algebra differs (LAPACK full solves
here, incremental Cholesky there).
"""

import numpy as np

from ._banded import nnls_gram_banded  # noqa: F401  (re-exported kernel)


def project_simplex_kernel(v):
    """Euclidean projection onto the probability simplex (sort-threshold)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    js = np.arange(1.0, u.size + 1.0)
    cond = u + (1.0 - css) / js > 0.0
    rho = int(np.nonzero(cond)[0][-1]) + 1
    tau = (css[rho - 1] - 1.0) / rho
    return np.maximum(v - tau, 0.0)


def _solve_passive(Q, c, idx, dtol):
    """Solve the passive-set normal system; None when not PD enough."""
    QPP = Q[np.ix_(idx, idx)]
    try:
        L = np.linalg.cholesky(QPP)
    except np.linalg.LinAlgError:
        return None
    if idx.size and float(np.min(np.diag(L))) ** 2 <= dtol:
        return None
    return np.linalg.solve(QPP, c[idx])


def nnls_gram(Q, c, support, max_add, wtol, dtol):
    """Minimize 0.5 x'Qx - c'x over x >= 0 for Q = M'M, c = M'b.

    Active-set method on the normal equations. ``support`` is a warm-start
    passive mask (may be all False); the returned mask is the final passive
    set, reusable as the next call's warm start. ``max_add`` caps the number
    of columns entering the passive set; ``wtol`` is the absolute dual
    feasibility tolerance; ``dtol`` the Cholesky pivot floor.
    """
    n = c.shape[0]
    x = np.zeros(n)
    inP = np.zeros(n, dtype=bool)
    banned = np.zeros(n, dtype=bool)

    # Warm start: admit the given support (index order), then trim until the
    # passive solve is componentwise positive.
    if support.any():
        inP[:] = support
        while inP.any():
            idx = np.nonzero(inP)[0]
            z = _solve_passive(Q, c, idx, dtol)
            if z is None:
                inP[idx[-1]] = False
                continue
            t = int(np.argmin(z))
            if z[t] > 0.0:
                x[idx] = z
                break
            inP[idx[t]] = False

    adds = 0
    while True:
        w = c - Q @ x
        w[inP] = -np.inf
        w[banned] = -np.inf
        jbest = int(np.argmax(w))
        if not np.isfinite(w[jbest]) or w[jbest] <= wtol or adds >= max_add:
            break
        inP[jbest] = True
        adds += 1
        while True:
            idx = np.nonzero(inP)[0]
            if idx.size == 0:
                x[:] = 0.0
                break
            z = _solve_passive(Q, c, idx, dtol)
            if z is None:
                jbad = jbest if inP[jbest] else int(idx[-1])
                inP[jbad] = False
                banned[jbad] = True
                x[jbad] = 0.0
                continue
            if z.min() > 0.0:
                x[:] = 0.0
                x[idx] = z
                break
            xP = x[idx]
            neg = z <= 0.0
            den = xP[neg] - z[neg]
            ratios = np.where(den > 0.0, xP[neg] / np.where(den > 0.0, den, 1.0), 0.0)
            alpha = float(ratios.min())
            xP = xP + alpha * (z - xP)
            x[:] = 0.0
            x[idx] = xP
            drop = idx[xP <= 1e-14]
            inP[drop] = False
            x[drop] = 0.0
    return x, inP
