"""numba-compiled hot kernels.

Same active-set algorithm as ``_np_impl`` (pivot rules, tolerances,
tie-breaks identical); the passive-set normal system is maintained through
an incremental Cholesky factor so that warm-started calls cost O(k^2)
instead of O(k^3).
"""

import numpy as np
from numba import njit

from . import _banded

nnls_gram_banded = njit(cache=True)(_banded.nnls_gram_banded)


@njit(cache=True)
def project_simplex_kernel(v):
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = 0.0
    rho = 1
    cssr = u[0]
    for j in range(n):
        css += u[j]
        if u[j] + (1.0 - css) / (j + 1.0) > 0.0:
            rho = j + 1
            cssr = css
    tau = (cssr - 1.0) / rho
    out = np.empty(n)
    for i in range(n):
        d = v[i] - tau
        out[i] = d if d > 0.0 else 0.0
    return out


@njit(cache=True)
def _chol_full(Q, order, k, L, dtol):
    for i in range(k):
        oi = order[i]
        for j in range(i + 1):
            oj = order[j]
            s = Q[oi, oj]
            for t in range(j):
                s -= L[i, t] * L[j, t]
            if i == j:
                if s <= dtol:
                    return False
                L[i, i] = np.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    return True


@njit(cache=True)
def _chol_append(Q, order, k, L, j, dtol):
    for t in range(k):
        ot = order[t]
        s = Q[ot, j]
        for r in range(t):
            s -= L[t, r] * L[k, r]
        L[k, t] = s / L[t, t]
    d = Q[j, j]
    for r in range(k):
        d -= L[k, r] * L[k, r]
    if d <= dtol:
        return False
    L[k, k] = np.sqrt(d)
    return True


@njit(cache=True)
def _solve_chol(L, k, rhs, z):
    for i in range(k):
        s = rhs[i]
        for t in range(i):
            s -= L[i, t] * z[t]
        z[i] = s / L[i, i]
    for i in range(k - 1, -1, -1):
        s = z[i]
        for t in range(i + 1, k):
            s -= L[t, i] * z[t]
        z[i] = s / L[i, i]


@njit(cache=True)
def nnls_gram(Q, c, support, max_add, wtol, dtol):
    n = c.shape[0]
    x = np.zeros(n)
    inP = np.zeros(n, dtype=np.bool_)
    banned = np.zeros(n, dtype=np.bool_)
    order = np.empty(n, dtype=np.int64)
    L = np.zeros((n, n))
    zbuf = np.empty(n)
    rhs = np.empty(n)
    k = 0

    # Warm start: admit the given support in index order, then trim until
    # the passive solve is componentwise positive.
    for j in range(n):
        if support[j]:
            if _chol_append(Q, order, k, L, j, dtol):
                order[k] = j
                inP[j] = True
                k += 1
    while k > 0:
        for i in range(k):
            rhs[i] = c[order[i]]
        _solve_chol(L, k, rhs, zbuf)
        tmin = 0
        zmin = zbuf[0]
        for i in range(1, k):
            if zbuf[i] < zmin:
                zmin = zbuf[i]
                tmin = i
        if zmin > 0.0:
            for i in range(k):
                x[order[i]] = zbuf[i]
            break
        inP[order[tmin]] = False
        for t in range(tmin, k - 1):
            order[t] = order[t + 1]
        k -= 1
        while k > 0 and not _chol_full(Q, order, k, L, dtol):
            jbad = order[k - 1]
            inP[jbad] = False
            k -= 1

    adds = 0
    while True:
        best = -1.0
        jbest = -1
        for j in range(n):
            if inP[j] or banned[j]:
                continue
            s = c[j]
            for i in range(k):
                s -= Q[j, order[i]] * x[order[i]]
            if jbest < 0 or s > best:
                best = s
                jbest = j
        if jbest < 0 or best <= wtol or adds >= max_add:
            break
        if not _chol_append(Q, order, k, L, jbest, dtol):
            banned[jbest] = True
            continue
        order[k] = jbest
        inP[jbest] = True
        k += 1
        adds += 1
        while True:
            if k == 0:
                for j in range(n):
                    x[j] = 0.0
                break
            for i in range(k):
                rhs[i] = c[order[i]]
            _solve_chol(L, k, rhs, zbuf)
            zmin = zbuf[0]
            for i in range(1, k):
                if zbuf[i] < zmin:
                    zmin = zbuf[i]
            if zmin > 0.0:
                for j in range(n):
                    x[j] = 0.0
                for i in range(k):
                    x[order[i]] = zbuf[i]
                break
            alpha = 1.0e300
            for i in range(k):
                if zbuf[i] <= 0.0:
                    xi = x[order[i]]
                    den = xi - zbuf[i]
                    r = xi / den if den > 0.0 else 0.0
                    if r < alpha:
                        alpha = r
            for i in range(k):
                oi = order[i]
                x[oi] = x[oi] + alpha * (zbuf[i] - x[oi])
            i = k - 1
            while i >= 0:
                if x[order[i]] <= 1e-14:
                    x[order[i]] = 0.0
                    inP[order[i]] = False
                    for t in range(i, k - 1):
                        order[t] = order[t + 1]
                    k -= 1
                i -= 1
            while k > 0 and not _chol_full(Q, order, k, L, dtol):
                jbad = order[k - 1]
                inP[jbad] = False
                banned[jbad] = True
                x[jbad] = 0.0
                k -= 1
    return x, inP
