"""Bounded-variable revised simplex (two phases, sparse LU basis with eta updates).

Pricing is Dantzig's largest reduced cost. After a run of degenerate pivots the solver
switches to Bland's smallest-index rule, which cannot cycle, and returns to Dantzig as soon
as the objective moves again.
"""
from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import SolverError
from .model import EQ, GE, INFEASIBLE, LE, OPTIMAL, UNBOUNDED, LinearProgram, LpSolution

DUAL_TOL = 1e-9
PIVOT_TOL = 1e-7
FEAS_TOL = 1e-9
CHECK_TOL = 1e-7
REFACTOR_EVERY = 50
DEGENERATE_RUN = 40
SUSPECT_PIVOT = 1e-3


class _Unbounded(Exception):
    pass


def _column(A: sp.csc_matrix, j: int) -> np.ndarray:
    out = np.zeros(A.shape[0])
    lo, hi = A.indptr[j], A.indptr[j + 1]
    out[A.indices[lo:hi]] = A.data[lo:hi]
    return out


class _Tableau:
    """Basis kept as a sparse LU factorization plus a product-form eta file."""

    def __init__(self, A, b, upper, basis):
        self.A = sp.csc_matrix(A)
        self.AT = self.A.T.tocsr()
        self.b = b
        self.u = upper
        self.m, self.n = A.shape
        self.basis = np.array(basis, dtype=np.int64)
        self.is_basic = np.zeros(self.n, dtype=bool)
        self.is_basic[self.basis] = True
        self.at_upper = np.zeros(self.n, dtype=bool)
        self.x = np.zeros(self.n)
        self.iterations = 0
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis].tocsc()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                self.lu = splu(B, permc_spec="COLAMD")
        except RuntimeError:
            raise SolverError("basis matrix became singular") from None
        self.etas = []
        nonbasic = ~self.is_basic
        xN = np.where(self.at_upper, self.u, 0.0) * nonbasic
        self.x = xN
        self.x[self.basis] = self.ftran(self.b - self.A @ xN)

    def ftran(self, a):
        w = self.lu.solve(np.asarray(a, dtype=float))
        for r, alpha in self.etas:
            wr = w[r] / alpha[r]
            w -= alpha * wr
            w[r] = wr
        return w

    def btran(self, c):
        v = np.array(c, dtype=float)
        for r, alpha in reversed(self.etas):
            v[r] = (v[r] - (v @ alpha - v[r] * alpha[r])) / alpha[r]
        return self.lu.solve(v, trans="T")

    def pivot(self, r, q, alpha):
        leaving = self.basis[r]
        self.is_basic[leaving] = False
        self.is_basic[q] = True
        self.basis[r] = q
        self.etas.append((r, alpha))
        if len(self.etas) >= REFACTOR_EVERY:
            self.refactor()

    def run(self, cost, allowed, max_iter):
        bland = False
        degenerate = 0
        while True:
            if self.iterations >= max_iter:
                raise SolverError(f"iteration limit {max_iter} reached")
            y = self.btran(cost[self.basis])
            d = cost - self.AT @ y
            eligible = allowed & ~self.is_basic & (self.u > 0)
            up = eligible & ~self.at_upper & (d > DUAL_TOL)
            down = eligible & self.at_upper & (d < -DUAL_TOL)
            cand = np.flatnonzero(up | down)
            if cand.size == 0:
                return
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            sigma = 1.0 if up[q] else -1.0
            alpha = self.ftran(_column(self.A, q))
            delta = -sigma * alpha
            xb = np.maximum(self.x[self.basis], 0.0)
            ub = self.u[self.basis]

            dec = delta < -PIVOT_TOL
            inc = (delta > PIVOT_TOL) & np.isfinite(ub)
            ratios = np.full(self.m, np.inf)
            ratios[dec] = xb[dec] / -delta[dec]
            ratios[inc] = np.maximum(ub[inc] - xb[inc], 0.0) / delta[inc]
            theta_flip = self.u[q]
            if bland:
                theta = ratios.min(initial=np.inf)
                r = -1
                if theta < theta_flip:
                    ties = np.flatnonzero(ratios <= theta + 1e-12)
                    r = int(ties[np.argmin(self.basis[ties])])
            else:
                # Harris: relax bounds by FEAS_TOL, then take the largest pivot among the blocking rows
                relaxed = np.full(self.m, np.inf)
                relaxed[dec] = (xb[dec] + FEAS_TOL) / -delta[dec]
                relaxed[inc] = (np.maximum(ub[inc] - xb[inc], 0.0) + FEAS_TOL) / delta[inc]
                bound = relaxed.min(initial=np.inf)
                r = -1
                theta = np.inf
                if bound < theta_flip:
                    rows = np.flatnonzero(ratios <= bound)
                    r = int(rows[np.argmax(np.abs(delta[rows]))])
                    theta = ratios[r]
            if r < 0 and not np.isfinite(theta_flip):
                raise _Unbounded()
            if r >= 0 and self.etas and abs(alpha[r]) < SUSPECT_PIVOT * np.abs(alpha).max():
                # small pivot computed through the eta file: refresh the factor and price again
                self.refactor()
                continue
            self.iterations += 1
            if r < 0:
                theta = theta_flip
                self.x[self.basis] += theta * delta
                self.at_upper[q] = not self.at_upper[q]
                self.x[q] = self.u[q] if self.at_upper[q] else 0.0
            else:
                leaving = self.basis[r]
                to_upper = delta[r] > 0
                self.x[self.basis] += theta * delta
                self.x[q] += sigma * theta
                self.x[leaving] = self.u[leaving] if to_upper else 0.0
                self.at_upper[leaving] = bool(to_upper)
                self.at_upper[q] = False
                self.pivot(r, q, alpha)
            if theta <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False


class SimplexSolver:
    """Reference LP solver. Deterministic: identical input gives identical output."""

    def __init__(self, max_iter: int | None = None):
        self.max_iter = max_iter

    def solve(self, lp: LinearProgram) -> LpSolution:
        keys = tuple(lp.keys)
        lo = np.array(lp.lo, dtype=float)
        hi = np.array(lp.hi, dtype=float)
        if np.any(lo > hi) or np.any(hi == -np.inf) or np.any(lo == np.inf):
            return LpSolution(INFEASIBLE, None, None, keys, 0, "a variable has lower bound above upper bound")
        A0, senses, b0 = lp.sparse_matrix()
        c0 = np.array(lp.objective, dtype=float)
        m, n0 = A0.shape

        # column substitution: x_j = shift_j + sum(sign * z)
        cols, signs, uppers = [], [], []
        shift = np.zeros(n0)
        for j in range(n0):
            if np.isfinite(lo[j]):
                shift[j] = lo[j]
                cols.append(j), signs.append(1.0), uppers.append(hi[j] - lo[j])
            elif np.isfinite(hi[j]):
                shift[j] = hi[j]
                cols.append(j), signs.append(-1.0), uppers.append(np.inf)
            else:
                cols.append(j), signs.append(1.0), uppers.append(np.inf)
                cols.append(j), signs.append(-1.0), uppers.append(np.inf)
        cols = np.array(cols, dtype=np.int64)
        signs = np.array(signs)
        uppers = np.array(uppers)
        Az = (A0.tocsc()[:, cols] @ sp.diags(signs)).tocsc()
        cz = c0[cols] * signs
        b = b0 - A0 @ shift

        slack_rows = np.flatnonzero(senses != EQ)
        slack_sign = np.where(senses[slack_rows] == LE, 1.0, -1.0)
        ns = slack_rows.size
        S = sp.csc_matrix((slack_sign, (slack_rows, np.arange(ns))), shape=(m, ns))
        flip = b < 0
        row_sign = sp.diags(np.where(flip, -1.0, 1.0))
        Az = (row_sign @ Az).tocsc()
        S = (row_sign @ S).tocsc()
        b = np.abs(b)
        nz = Az.shape[1]

        basis = np.full(m, -1, dtype=np.int64)
        s_sign = np.where(flip[slack_rows], -slack_sign, slack_sign)
        ok = s_sign > 0
        basis[slack_rows[ok]] = nz + np.flatnonzero(ok)
        need_art = np.flatnonzero(basis < 0)
        Art = sp.csc_matrix((np.ones(need_art.size), (need_art, np.arange(need_art.size))),
                            shape=(m, need_art.size))
        basis[need_art] = nz + ns + np.arange(need_art.size)
        A = sp.hstack([Az, S, Art], format="csc")
        n = A.shape[1]
        upper = np.concatenate([uppers, np.full(ns, np.inf), np.full(need_art.size, np.inf)])
        is_art = np.zeros(n, dtype=bool)
        is_art[nz + ns:] = True
        max_iter = self.max_iter or 50 * (m + n) + 1000

        if m == 0:
            if np.any((cz > 0) & ~np.isfinite(uppers)):
                return LpSolution(UNBOUNDED, None, None, keys, 0, "objective unbounded above")
            z = np.where(cz > 0, uppers, 0.0)
            x = shift.copy()
            np.add.at(x, cols, signs * z)
            return LpSolution(OPTIMAL, x, float(c0 @ x), keys, 0, "")

        tab = _Tableau(A, b, upper, basis)
        if need_art.size:
            phase1 = -is_art.astype(float)
            tab.run(phase1, np.ones(n, dtype=bool), max_iter)
            infeas = float(tab.x[is_art].sum())
            if infeas > FEAS_TOL * (1.0 + np.abs(b).max(initial=0.0)):
                return LpSolution(INFEASIBLE, None, None, keys, tab.iterations,
                                  f"phase 1 ended with artificial mass {infeas:.3g}")
            self._drive_out_artificials(tab, is_art)
            tab.u[is_art] = 0.0
            tab.x[is_art & ~tab.is_basic] = 0.0

        cost = np.concatenate([cz, np.zeros(n - nz)])
        try:
            tab.run(cost, ~is_art, max_iter)
        except _Unbounded:
            return LpSolution(UNBOUNDED, None, None, keys, tab.iterations, "objective unbounded above")
        tab.refactor()

        z = np.clip(tab.x[:nz], 0.0, uppers)
        x = shift.copy()
        np.add.at(x, cols, signs * z)
        worst = lp.max_violation(x)
        if worst > CHECK_TOL:
            raise SolverError(f"final point violates constraints by {worst:.3g}: "
                              f"{max(lp.violations(x), key=lambda t: t[1])[0]}")
        return LpSolution(OPTIMAL, x, float(c0 @ x), keys, tab.iterations, "")

    @staticmethod
    def _drive_out_artificials(tab: _Tableau, is_art: np.ndarray) -> None:
        for r in range(tab.m):
            if not is_art[tab.basis[r]]:
                continue
            e = np.zeros(tab.m)
            e[r] = 1.0
            row = tab.AT @ tab.btran(e)
            row[is_art | tab.is_basic] = 0.0
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > 1e-7:
                alpha = tab.ftran(_column(tab.A, j))
                leaving = tab.basis[r]
                tab.x[leaving] = 0.0
                tab.pivot(r, j, alpha)
        tab.refactor()
