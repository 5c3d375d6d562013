"""Dense two-phase tableau simplex for  max c @ x  s.t.  A @ x <= b, x >= 0.

Every LP in the package goes through here: last-stage matching LPs, the
offline benchmarks, the rounding LPs and the linear oracles of the
Frank-Wolfe solver.  Besides the optimal vertex the solver returns one dual
multiplier per row, recomputed from the final basis so that they are accurate
to machine precision rather than to tableau drift.

Pricing is Dantzig's rule; after a streak of degenerate pivots the solver
switches to Bland's rule until progress resumes, which rules out cycling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EPS_LP = 1e-8
PIVOT_TOL = 1e-10
OPT_TOL = 1e-11
DEGENERATE_STREAK = 50
LOOKAHEAD = 30

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class SolverError(RuntimeError):
    """Numerical breakdown: pivot budget exhausted or residuals out of tolerance."""


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(b.size, c.size)
        if A.shape != (b.size, c.size):
            raise ValueError(f"inconsistent LP shapes: A {A.shape}, b {b.shape}, c {c.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = float("nan")
    pivots: int = 0
    residuals: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class Tableau:
    """A feasible tableau for a fixed polytope {A x <= b, x >= 0}.

    Phase 1 runs at construction.  ``optimize(c)`` can then be called
    repeatedly with different objectives; each call warm-starts from the
    previous optimal basis, which is what the Frank-Wolfe oracle needs.
    """

    def __init__(self, A, b, max_pivots: int | None = None):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float).reshape(-1)
        m, n = A.shape
        self.A, self.b = A, b
        self.m, self.n = m, n
        self.max_pivots = max_pivots if max_pivots is not None else 50 * (m + n) + 50
        self.pivots = 0
        self.feasible = True

        neg = np.flatnonzero(b < 0)
        n_art = neg.size
        width = n + m + n_art
        T = np.zeros((m + 1, width + 1))
        T[:m, :n] = A
        T[:m, n:n + m] = np.eye(m)
        T[:m, -1] = b
        basis = np.arange(n, n + m)
        if n_art:
            T[neg, :] *= -1.0
            T[neg, n + m + np.arange(n_art)] = 1.0
            basis[neg] = n + m + np.arange(n_art)
            # phase 1: maximize minus the sum of artificials
            T[m, :] = T[neg, :].sum(axis=0)
            T[m, n + m:width] = 0.0
        self.T, self.basis = T, basis
        if n_art:
            self._run(width)
            if T[m, -1] > EPS_LP * (1.0 + np.abs(b).max()):
                self.feasible = False
                return
            self._drive_out_artificials(n + m)
            self.T = np.delete(self.T, np.arange(n + m, width), axis=1)

    # -- pivoting ---------------------------------------------------------

    def _pivot(self, r: int, q: int):
        T = self.T
        T[r] /= T[r, q]
        col = T[:, q].copy()
        col[r] = 0.0
        rows = np.flatnonzero(col)
        # tableaus of flow-type LPs are sparse, so only touch rows that change
        if rows.size < 0.5 * T.shape[0]:
            T[rows] -= col[rows, None] * T[r]
        else:
            T -= np.outer(col, T[r])
        T[:, q] = 0.0
        T[r, q] = 1.0
        self.basis[r] = q
        self.pivots += 1

    def _ratio(self, q: int):
        col = self.T[:self.m, q]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            return None, None, 0.0
        ratios = np.maximum(self.T[rows, -1], 0.0) / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * (1.0 + best)]
        return ties, col, best

    def _run(self, ncols: int) -> str:
        """Primal simplex on the first ``ncols`` columns; objective row is last."""
        T, m = self.T, self.m
        streak = 0
        # the budget is per call: a warm-started tableau may serve many objectives
        start = self.pivots
        while True:
            if self.pivots - start > self.max_pivots:
                raise SolverError(f"pivot budget {self.max_pivots} exhausted")
            d = T[m, :ncols]
            cand = np.flatnonzero(d > OPT_TOL)
            if cand.size == 0:
                return OPTIMAL
            if streak >= DEGENERATE_STREAK:
                # Bland: lowest eligible column, lowest basic index among tied rows
                q = int(cand[0])
                ties, col, best = self._ratio(q)
                if ties is None:
                    return UNBOUNDED
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                # Dantzig pricing with a short look-ahead: among the best-priced
                # columns take the one with the largest actual improvement, which
                # avoids most degenerate pivots on flow-type LPs
                dc = d[cand]
                top = cand[np.lexsort((cand, -dc))[:LOOKAHEAD]]
                q, ties, col, best, gain = -1, None, None, 0.0, -1.0
                for qq in top:
                    tt, cc, bb = self._ratio(int(qq))
                    if tt is None:
                        return UNBOUNDED
                    g = d[qq] * bb
                    if g > gain * (1.0 + 1e-12) + 1e-15:
                        q, ties, col, best, gain = int(qq), tt, cc, bb, g
                if q < 0:
                    q = int(top[0])
                    ties, col, best = self._ratio(q)
                r = int(ties[np.argmax(col[ties])])
            streak = streak + 1 if best <= 1e-12 else 0
            self._pivot(r, q)

    def _drive_out_artificials(self, n_real: int):
        for r in range(self.m):
            if self.basis[r] >= n_real:
                row = self.T[r, :n_real]
                q = int(np.argmax(np.abs(row)))
                if abs(row[q]) <= PIVOT_TOL:
                    raise SolverError("degenerate artificial cannot leave the basis")
                self._pivot(r, q)

    # -- objective handling ----------------------------------------------

    def optimize(self, c) -> LpSolution:
        if not self.feasible:
            return LpSolution(INFEASIBLE, pivots=self.pivots)
        c = np.asarray(c, dtype=float).reshape(-1)
        m, n = self.m, self.n
        cfull = np.concatenate([c, np.zeros(m)])
        T = self.T
        cb = cfull[self.basis]
        T[m, :n + m] = cfull - cb @ T[:m, :n + m]
        T[m, -1] = -(cb @ T[:m, -1])
        start = self.pivots
        status = self._run(n + m)
        if status != OPTIMAL:
            return LpSolution(status, pivots=self.pivots - start)
        return self._extract(cfull, self.pivots - start)

    def _extract(self, cfull, pivots) -> LpSolution:
        m, n = self.m, self.n
        A, b = self.A, self.b
        xfull = np.zeros(n + m)
        xb = self.T[:m, -1].copy()
        y = None
        if m:
            B = np.hstack([A, np.eye(m)])[:, self.basis]
            try:
                xb_ref = np.linalg.solve(B, b)
                y = np.linalg.solve(B.T, cfull[self.basis])
                if np.all(np.isfinite(xb_ref)) and np.abs(xb_ref - xb).max() < 1e-6:
                    xb = xb_ref
                else:
                    y = None
            except np.linalg.LinAlgError:
                y = None
            if y is None:
                y = -self.T[m, n:n + m]
        xfull[self.basis] = xb
        x = xfull[:n]
        scale_b = 1.0 + (np.abs(b).max() if m else 0.0)
        scale_c = 1.0 + (np.abs(cfull).max() if cfull.size else 0.0)
        x[np.abs(x) < 1e-13 * scale_b] = 0.0
        if m:
            y[np.abs(y) < 1e-13 * scale_c] = 0.0
        else:
            y = np.zeros(0)
        c = cfull[:n]
        obj = float(c @ x)
        res = _residuals(A, b, c, x, y)
        if (res["primal"] > EPS_LP * scale_b or res["dual"] > EPS_LP * scale_c
                or res["gap"] > EPS_LP * (1.0 + abs(obj)) * scale_c):
            raise SolverError(f"residuals out of tolerance: {res}")
        x = np.maximum(x, 0.0)
        y = np.maximum(y, 0.0)
        return LpSolution(OPTIMAL, x, y, obj, pivots, res)


def _residuals(A, b, c, x, y) -> dict:
    primal = max(0.0, float((A @ x - b).max(initial=0.0)), float((-x).max(initial=0.0)))
    red = A.T @ y - c if y.size else -c
    dual = max(0.0, float((-red).max(initial=0.0)), float((-y).max(initial=0.0)))
    gap = abs(float(c @ x) - float(b @ y))
    slack = b - A @ x
    comp = float(np.abs(slack * y).max(initial=0.0)) if y.size else 0.0
    comp = max(comp, float(np.abs(red * x).max(initial=0.0)))
    return {"primal": primal, "dual": dual, "gap": gap, "complementarity": comp}


def solve(lp: LinearProgram, max_pivots: int | None = None) -> LpSolution:
    """Solve ``lp`` to optimality (or report infeasible / unbounded)."""
    tab = Tableau(lp.A, lp.b, max_pivots=max_pivots)
    sol = tab.optimize(lp.c)
    sol.pivots = tab.pivots
    return sol


def linprog_max(c, A, b) -> LpSolution:
    return solve(LinearProgram(c, A, b))
