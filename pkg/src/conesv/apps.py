"""Benchmark generators and reconstructions.

Four experiment families: the Schur-cone benchmarks with closed-form
optima, planted-biclique instances recovered through rank-one cone
approximation, the odd-dimension circulant reduction (a small dense
matrix whose Pareto singular value problem encodes the maximal angle
between circulant PSD and circulant nonnegative matrices), and the
matrix-cone angle study driven by projection oracles. Also houses the
edge-list graph reader and the CSV table emitters used by the CLI
benchmark command.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .bfas import solve_bfas
from .bnb import solve_bnb
from .cones import (nonneg_sym_oracle, orthant, psd_oracle, schur_cone,
                    sym_unflatten)
from .eao import EAOConfig, OracleInstance, multistart_eao
from .errors import InvalidInput
from .instance import SVInstance
from .srpl import multistart_srpl, preset


def angle_of(lam):
    """Angle in radians for a cosine value, clamped into [-1, 1]."""
    return float(np.arccos(np.clip(lam, -1.0, 1.0)))


# ------------------------------------------------------------- Schur cones


@dataclass
class GroundTruth:
    lam: float
    u: np.ndarray
    v: np.ndarray


def gen_schur_orthant(n):
    """Identity over (Schur cone, orthant) in dimension n, with the known
    optimum.

    The least value is -sqrt(1 - 1/n), attained only by the antipodal
    pair u = sqrt(n/(n-1)) (e/n - e_n), v = e_n; both halves are returned
    for certification tests.
    """
    if n < 2:
        raise InvalidInput("gen_schur_orthant: n must be >= 2")
    inst = SVInstance(np.eye(n), schur_cone(n), orthant(n))
    u = np.full(n, 1.0 / n)
    u[-1] -= 1.0
    u *= np.sqrt(n / (n - 1.0))
    v = np.zeros(n)
    v[-1] = 1.0
    return inst, GroundTruth(lam=-np.sqrt(1.0 - 1.0 / n), u=u, v=v)


def gen_schur_schur(n):
    """Identity over (Schur cone, Schur cone); the optimal value is
    cos((n-1) pi / n). Returns (instance, that value)."""
    if n < 2:
        raise InvalidInput("gen_schur_schur: n must be >= 2")
    inst = SVInstance(np.eye(n), schur_cone(n), schur_cone(n))
    return inst, float(np.cos((n - 1.0) * np.pi / n))


# --------------------------------------------------------------- bicliques


@dataclass
class BicliqueInstance:
    """Penalized biadjacency matrix M = B - (ee' - B) d.

    Every present edge contributes +1, every absent one -d; with
    d >= max(m, n) the best nonnegative rank-one approximation of M
    selects a maximal all-ones block of B.
    """

    B: np.ndarray
    d: float
    M: np.ndarray = field(init=False)

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        if self.B.ndim != 2 or self.B.size == 0:
            raise InvalidInput("BicliqueInstance: B must be a nonempty matrix")
        if not np.all((self.B == 0.0) | (self.B == 1.0)):
            raise InvalidInput("BicliqueInstance: B must be 0/1")
        if self.d < max(self.B.shape):
            raise InvalidInput("BicliqueInstance: need d >= max(m, n)")
        self.M = np.where(self.B == 1.0, 1.0, -float(self.d))

    def problem(self):
        """The Pareto singular value instance PSV(-M) whose optimum
        lands on the planted block."""
        m, n = self.M.shape
        return SVInstance(-self.M, orthant(m), orthant(n))


def gen_biclique(m, n, density, planted_rows, planted_cols, seed=0):
    """Bernoulli(density) bipartite graph with a planted all-ones block.

    Row and column subsets of the requested sizes are drawn without
    replacement from the same seeded generator as the background graph,
    so a fixed seed reproduces B bit-exactly. d defaults to max(m, n).
    """
    if m < 1 or n < 1:
        raise InvalidInput("gen_biclique: m, n must be >= 1")
    if not (0.0 <= density <= 1.0):
        raise InvalidInput("gen_biclique: density must be in [0, 1]")
    if not (0 <= planted_rows <= m and 0 <= planted_cols <= n):
        raise InvalidInput("gen_biclique: planted block exceeds the graph")
    rng = np.random.default_rng(seed)
    B = (rng.random((m, n)) < density).astype(float)
    rows = rng.choice(m, size=planted_rows, replace=False)
    cols = rng.choice(n, size=planted_cols, replace=False)
    B[np.ix_(rows, cols)] = 1.0
    return BicliqueInstance(B=B, d=float(max(m, n)))


def extract_biclique(binst, sol, threshold=1e-6):
    """Read a biclique out of a solver pair for PSV(-M).

    rows, cols are the 0-indexed supports of u and v above threshold
    times the largest entry. valid reports whether B restricted to them
    is all ones (and both sides nonempty); a failed extraction only
    flips that flag. edge_estimate is round(lam^2): for an all-ones
    k x l block the optimal value is -sqrt(k l), so the square recovers
    the edge count.
    """
    u = np.asarray(sol.u, dtype=float)
    v = np.asarray(sol.v, dtype=float)
    rows = np.flatnonzero(u > threshold * max(float(u.max()), 0.0))
    cols = np.flatnonzero(v > threshold * max(float(v.max()), 0.0))
    valid = bool(rows.size and cols.size
                 and np.all(binst.B[np.ix_(rows, cols)] == 1.0))
    return tuple(map(int, rows)), tuple(map(int, cols)), \
        int(round(float(sol.lam) ** 2)), valid


def read_edge_list(path):
    """Load a bipartite edge list: a "m n" header line, then one "u v"
    edge per line, 1-indexed. Blank lines and '#' comments are skipped.
    Returns the m x n binary biadjacency matrix."""
    B = None
    m = n = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            s = raw.split("#", 1)[0].strip()
            if not s:
                continue
            parts = s.split()
            try:
                a, b = (int(t) for t in parts)
            except ValueError:
                raise InvalidInput(f"{path}:{lineno}: expected two integers")
            if B is None:
                if a < 1 or b < 1:
                    raise InvalidInput(f"{path}:{lineno}: bad dimensions")
                m, n = a, b
                B = np.zeros((m, n))
            elif 1 <= a <= m and 1 <= b <= n:
                B[a - 1, b - 1] = 1.0
            else:
                raise InvalidInput(
                    f"{path}:{lineno}: edge ({a}, {b}) outside {m} x {n}")
    if B is None:
        raise InvalidInput(f"{path}: no header line found")
    return B


# ------------------------------------------------------ circulant reduction


@dataclass
class CirculantReduction:
    """m x m reduction matrix for odd n = 1 + 2m, entries
    (2/sqrt(n)) cos(2 pi i j / n) with i, j running from 1 to m."""

    n: int
    m: int
    M: np.ndarray

    def problem(self):
        return SVInstance(self.M, orthant(self.m), orthant(self.m))


def gen_circulant(n):
    if n % 2 == 0:
        raise InvalidInput("gen_circulant: n must be odd")
    if n < 3:
        raise InvalidInput("gen_circulant: n must be >= 3")
    m = (n - 1) // 2
    idx = np.arange(1, m + 1)
    M = (2.0 / np.sqrt(n)) * np.cos(2.0 * np.pi * np.outer(idx, idx) / n)
    return CirculantReduction(n=n, m=m, M=M)


def reconstruct_circulant(red, sol):
    """Assemble the matrix pair behind a reduction solution.

    The x block scales to the circulant coefficients a = sqrt(2n) x and
    the y block to the eigenvalues lam = sqrt(2) y; both get mirrored
    (a_k = a_{n-k+2}, lam_j = lam_{n-j+2}) around a zero head. N is the
    symmetric circulant with that first row; P is synthesized from the
    eigenvalue vector through the unitary DFT basis, so it is PSD by
    construction whenever y >= 0. Returns (P, N, angle) with the angle
    of the normalized Frobenius inner product.
    """
    n, m = red.n, red.m
    x = np.clip(np.asarray(sol.u, dtype=float), 0.0, None)
    y = np.clip(np.asarray(sol.v, dtype=float), 0.0, None)
    if x.shape != (m,) or y.shape != (m,):
        raise InvalidInput("reconstruct_circulant: solution size mismatch")
    a = np.sqrt(2.0 * n) * x
    lam = np.sqrt(2.0) * y

    row = np.zeros(n)
    row[1:m + 1] = a
    row[m + 1:] = a[::-1]
    # row i of a circulant is the first row cyclically shifted right i times
    N = np.stack([np.roll(row, i) for i in range(n)])

    spec = np.zeros(n)
    spec[1:m + 1] = lam
    spec[m + 1:] = lam[::-1]
    k = np.arange(n)
    F = np.exp(2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)
    P = np.real((F * spec) @ F.conj().T)
    P = 0.5 * (P + P.T)

    c = float(np.trace(P @ N))
    den = float(np.linalg.norm(P) * np.linalg.norm(N))
    if den <= 0.0:
        raise InvalidInput("reconstruct_circulant: zero solution block")
    return P, N, angle_of(c / den)


# -------------------------------------------------------- matrix-cone study


def ma_psd_nn(n, cfg=None):
    """Maximal angle between the PSD cone and the nonnegative symmetric
    cone by multistart alternating optimization over projection oracles.

    Works in flattened symmetric coordinates; the returned Solution
    additionally carries P_mat, N_mat (unflattened unit-Frobenius pair)
    and angle (radians).
    """
    if n < 2:
        raise InvalidInput("ma_psd_nn: n must be >= 2")
    inst = OracleInstance(P=psd_oracle(n), Q=nonneg_sym_oracle(n))
    sol = multistart_eao(inst, cfg)
    sol.P_mat = sym_unflatten(sol.u, n)
    sol.N_mat = sym_unflatten(sol.v, n)
    sol.angle = angle_of(sol.lam)
    return sol


# ------------------------------------------------------------ CSV emitters


def _pi_str(angle):
    # tables report angles as multiples of pi, six decimals
    return f"{angle / np.pi:.6f}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _timed(solver, inst, time_limit):
    t0 = time.perf_counter()
    sol = solver(inst, time_limit=time_limit)
    return angle_of(sol.lam), time.perf_counter() - t0


def table_schur_orthant(ns, path, time_limit=60.0):
    """Angle/time table over (Schur cone, orthant): closed-form optimum
    beside both exact solvers. Returns the rows written."""
    rows = []
    for n in ns:
        inst, truth = gen_schur_orthant(n)
        bf, bf_s = _timed(solve_bfas, inst, time_limit)
        bb, bb_s = _timed(solve_bnb, inst, time_limit)
        rows.append([n, _pi_str(angle_of(truth.lam)),
                     _pi_str(bf), f"{bf_s:.3f}", _pi_str(bb), f"{bb_s:.3f}"])
    _write_csv(path, ["n", "exact", "bfas", "bfas_s", "bnb", "bnb_s"], rows)
    return rows


def table_schur_schur(ns, path, time_limit=60.0):
    """Same layout for the Schur cone against itself."""
    rows = []
    for n in ns:
        inst, lam = gen_schur_schur(n)
        bf, bf_s = _timed(solve_bfas, inst, time_limit)
        bb, bb_s = _timed(solve_bnb, inst, time_limit)
        rows.append([n, _pi_str(angle_of(lam)),
                     _pi_str(bf), f"{bf_s:.3f}", _pi_str(bb), f"{bb_s:.3f}"])
    _write_csv(path, ["n", "exact", "bfas", "bfas_s", "bnb", "bnb_s"], rows)
    return rows


def table_circulant(ns, path, time_limit=60.0):
    """Exact-solver table for the circulant reduction (no closed form;
    the certified solver values stand in for the exact row)."""
    rows = []
    for n in ns:
        inst = gen_circulant(n).problem()
        bf, bf_s = _timed(solve_bfas, inst, time_limit)
        bb, bb_s = _timed(solve_bnb, inst, time_limit)
        rows.append([n, _pi_str(bf), f"{bf_s:.3f}", _pi_str(bb), f"{bb_s:.3f}"])
    _write_csv(path, ["n", "bfas", "bfas_s", "bnb", "bnb_s"], rows)
    return rows


def table_circulant_budget(ns, path, budget=10.0, seed=0):
    """Heuristic table for the circulant reduction: best of restarts
    within a per-dimension time budget for each heuristic."""
    rows = []
    cap = 10 ** 6  # restart count never binds before the budget does
    for n in ns:
        inst = gen_circulant(n).problem()
        t0 = time.perf_counter()
        ea = multistart_eao(inst, EAOConfig(restarts=cap, seed=seed),
                            time_budget=budget)
        ea_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        sr = multistart_srpl(inst, preset("circulant", restarts=cap, seed=seed),
                             time_budget=budget)
        sr_s = time.perf_counter() - t0
        rows.append([n, _pi_str(angle_of(ea.lam)), f"{ea_s:.3f}",
                     _pi_str(angle_of(sr.lam)), f"{sr_s:.3f}"])
    _write_csv(path, ["n", "eao", "eao_s", "srpl", "srpl_s"], rows)
    return rows
