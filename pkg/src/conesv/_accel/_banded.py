"""Banded-gram NNLS kernel, one flat function so numba can compile it as-is.

Chain-structured generator sets (difference directions, path graphs) give
gram matrices with small bandwidth, and every principal submatrix of a
banded matrix is again banded after compressing the kept indices. The
active-set passes then cost O(k * bw^2) instead of O(k^3).

Pivot selection, tolerances and tie-breaks mirror ``_np_impl.nnls_gram``;
the two must stay in lockstep or warm starts stop being interchangeable.
``_np_impl`` imports this function as plain Python, ``_nb_impl`` wraps it
in ``njit``. No helper calls, no closures.
"""

import numpy as np


def nnls_gram_banded(Q, c, support, max_add, wtol, dtol, bw):
    n = c.shape[0]
    x = np.zeros(n)
    inP = np.zeros(n, dtype=np.bool_)
    banned = np.zeros(n, dtype=np.bool_)
    idx = np.empty(n, dtype=np.int64)
    Lb = np.zeros((bw + 1, n))
    ybuf = np.empty(n)
    zbuf = np.empty(n)

    for j in range(n):
        if support[j]:
            inP[j] = True

    # ---- warm-start trim: solve on the given support, drop nonpositive ----
    while True:
        k = 0
        for j in range(n):
            if inP[j]:
                idx[k] = j
                k += 1
        if k == 0:
            break
        # banded Cholesky of the compressed passive gram, lower storage
        fail = -1
        for col in range(k):
            jc = idx[col]
            s = Q[jc, jc]
            d0 = bw if bw < col else col
            for d in range(1, d0 + 1):
                s -= Lb[d, col - d] * Lb[d, col - d]
            if s <= dtol:
                fail = col
                break
            Lb[0, col] = np.sqrt(s)
            for r in range(1, bw + 1):
                if col + r >= k:
                    break
                jr = idx[col + r]
                dj = jr - jc
                s = Q[jr, jc] if dj <= bw else 0.0
                t0 = col + r - bw
                if t0 < 0:
                    t0 = 0
                for t in range(t0, col):
                    s -= Lb[col + r - t, t] * Lb[col - t, t]
                Lb[r, col] = s / Lb[0, col]
        if fail >= 0:
            inP[idx[k - 1]] = False
            continue
        for i in range(k):
            s = c[idx[i]]
            d0 = bw if bw < i else i
            for d in range(1, d0 + 1):
                s -= Lb[d, i - d] * ybuf[i - d]
            ybuf[i] = s / Lb[0, i]
        for i in range(k - 1, -1, -1):
            s = ybuf[i]
            for d in range(1, bw + 1):
                if i + d >= k:
                    break
                s -= Lb[d, i] * zbuf[i + d]
            zbuf[i] = s / Lb[0, i]
        tmin = 0
        zmin = zbuf[0]
        for i in range(1, k):
            if zbuf[i] < zmin:
                zmin = zbuf[i]
                tmin = i
        if zmin > 0.0:
            for i in range(k):
                x[idx[i]] = zbuf[i]
            break
        inP[idx[tmin]] = False

    # ---- main active-set loop ----
    adds = 0
    while True:
        best = 0.0
        jbest = -1
        for j in range(n):
            if inP[j] or banned[j]:
                continue
            s = c[j]
            t0 = j - bw
            if t0 < 0:
                t0 = 0
            t1 = j + bw + 1
            if t1 > n:
                t1 = n
            for t in range(t0, t1):
                s -= Q[j, t] * x[t]
            if jbest < 0 or s > best:
                best = s
                jbest = j
        if jbest < 0 or best <= wtol or adds >= max_add:
            break
        inP[jbest] = True
        adds += 1
        while True:
            k = 0
            for j in range(n):
                if inP[j]:
                    idx[k] = j
                    k += 1
            if k == 0:
                for j in range(n):
                    x[j] = 0.0
                break
            fail = -1
            for col in range(k):
                jc = idx[col]
                s = Q[jc, jc]
                d0 = bw if bw < col else col
                for d in range(1, d0 + 1):
                    s -= Lb[d, col - d] * Lb[d, col - d]
                if s <= dtol:
                    fail = col
                    break
                Lb[0, col] = np.sqrt(s)
                for r in range(1, bw + 1):
                    if col + r >= k:
                        break
                    jr = idx[col + r]
                    dj = jr - jc
                    s = Q[jr, jc] if dj <= bw else 0.0
                    t0 = col + r - bw
                    if t0 < 0:
                        t0 = 0
                    for t in range(t0, col):
                        s -= Lb[col + r - t, t] * Lb[col - t, t]
                    Lb[r, col] = s / Lb[0, col]
            if fail >= 0:
                jbad = jbest if inP[jbest] else idx[k - 1]
                inP[jbad] = False
                banned[jbad] = True
                x[jbad] = 0.0
                continue
            for i in range(k):
                s = c[idx[i]]
                d0 = bw if bw < i else i
                for d in range(1, d0 + 1):
                    s -= Lb[d, i - d] * ybuf[i - d]
                ybuf[i] = s / Lb[0, i]
            for i in range(k - 1, -1, -1):
                s = ybuf[i]
                for d in range(1, bw + 1):
                    if i + d >= k:
                        break
                    s -= Lb[d, i] * zbuf[i + d]
                zbuf[i] = s / Lb[0, i]
            zmin = zbuf[0]
            for i in range(1, k):
                if zbuf[i] < zmin:
                    zmin = zbuf[i]
            if zmin > 0.0:
                for j in range(n):
                    x[j] = 0.0
                for i in range(k):
                    x[idx[i]] = zbuf[i]
                break
            alpha = 1.0e300
            for i in range(k):
                if zbuf[i] <= 0.0:
                    xi = x[idx[i]]
                    den = xi - zbuf[i]
                    r = xi / den if den > 0.0 else 0.0
                    if r < alpha:
                        alpha = r
            for i in range(k):
                oi = idx[i]
                x[oi] = x[oi] + alpha * (zbuf[i] - x[oi])
            for i in range(k - 1, -1, -1):
                if x[idx[i]] <= 1e-14:
                    x[idx[i]] = 0.0
                    inP[idx[i]] = False
    return x, inP
