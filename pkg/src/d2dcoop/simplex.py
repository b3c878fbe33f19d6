"""Dense bounded-variable linear programming by two-phase primal simplex.

Solves

    minimize    c . x
    subject to  A_eq x  = b_eq
                A_ub x <= b_ub
                lb <= x <= ub

with finite lower bounds and possibly infinite upper bounds.  Bland's
smallest-index rule is used for both the entering and the leaving choice,
which rules out cycling; an iteration cap converts any pathological run
into a hard error instead of a silent wrong answer.

Problem sizes here are tiny (tens of rows), so each iteration re-solves the
basis system densely rather than maintaining a factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_PIVOT_TOL = 1e-10
_RATIO_TIE_TOL = 1e-12


class SimplexCycleError(RuntimeError):
    """Iteration cap exceeded: the solve is aborted rather than trusted."""


@dataclass
class LpProblem:
    """Bounded-variable LP in the form described in the module docstring."""

    c: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.a_eq = (np.zeros((0, n)) if self.a_eq is None
                     else np.asarray(self.a_eq, dtype=float).reshape(-1, n))
        self.b_eq = (np.zeros(0) if self.b_eq is None
                     else np.asarray(self.b_eq, dtype=float).ravel())
        self.a_ub = (np.zeros((0, n)) if self.a_ub is None
                     else np.asarray(self.a_ub, dtype=float).reshape(-1, n))
        self.b_ub = (np.zeros(0) if self.b_ub is None
                     else np.asarray(self.b_ub, dtype=float).ravel())
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float).ravel()
        self.ub = np.ones(n) if self.ub is None else np.asarray(self.ub, dtype=float).ravel()
        if self.a_eq.shape[0] != self.b_eq.size or self.a_ub.shape[0] != self.b_ub.size:
            raise ValueError("constraint matrix/rhs dimensions disagree")
        if self.lb.size != n or self.ub.size != n:
            raise ValueError("bound vectors must match the variable count")
        if not np.isfinite(self.lb).all():
            raise ValueError("lower bounds must be finite")
        if (self.ub < self.lb).any():
            raise ValueError("upper bounds must dominate lower bounds")

    @property
    def n_vars(self) -> int:
        return self.c.size


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0


# variable states in the working arrays
_AT_LOWER, _AT_UPPER, _BASIC = 0, 1, 2


class _Tableau:
    """Working state shared by the two phases."""

    def __init__(self, A, b, lo, hi, itercap):
        self.A, self.b, self.lo, self.hi = A, b, lo, hi
        self.m, self.k = A.shape
        self.x = lo.copy()
        self.state = np.full(self.k, _AT_LOWER, dtype=int)
        self.basis: list[int] = []
        self.itercap = itercap
        self.iterations = 0

    def run(self, cost, tol):
        """Minimize cost over the current basis; returns OPTIMAL or UNBOUNDED."""
        A, lo, hi = self.A, self.lo, self.hi
        while True:
            self.iterations += 1
            if self.iterations > self.itercap:
                raise SimplexCycleError(
                    f"simplex exceeded {self.itercap} iterations")
            B = A[:, self.basis]
            y = np.linalg.solve(B.T, cost[self.basis]) if self.m else np.zeros(0)
            reduced = cost - A.T @ y if self.m else cost.copy()
            entering = -1
            for j in range(self.k):
                if self.state[j] == _BASIC or hi[j] - lo[j] <= _PIVOT_TOL:
                    continue
                d = reduced[j]
                if (self.state[j] == _AT_LOWER and d < -tol) or \
                   (self.state[j] == _AT_UPPER and d > tol):
                    entering = j
                    break
            if entering < 0:
                return OPTIMAL
            direction = 1.0 if self.state[entering] == _AT_LOWER else -1.0
            w = np.linalg.solve(B, A[:, entering]) if self.m else np.zeros(0)

            # step limits: entering variable's own range, plus each basic bound
            limits = [(hi[entering] - lo[entering], entering)]
            for r in range(self.m):
                delta = -direction * w[r]  # per-unit change of basic var r
                bi = self.basis[r]
                if delta > _PIVOT_TOL:
                    if np.isfinite(hi[bi]):
                        limits.append(((hi[bi] - self.x[bi]) / delta, bi))
                elif delta < -_PIVOT_TOL:
                    limits.append(((self.x[bi] - lo[bi]) / (-delta), bi))
            t_star = min(t for t, _ in limits)
            if not np.isfinite(t_star):
                return UNBOUNDED
            t_star = max(t_star, 0.0)
            # Bland tie-break: smallest variable index among the blockers
            leaving = min(j for t, j in limits if t - t_star <= _RATIO_TIE_TOL)

            self.x[entering] += direction * t_star
            for r in range(self.m):
                self.x[self.basis[r]] -= direction * w[r] * t_star
            if leaving == entering and self.state[entering] != _BASIC:
                # bound flip, basis unchanged
                self.state[entering] = _AT_UPPER if direction > 0 else _AT_LOWER
                self.x[entering] = hi[entering] if direction > 0 else lo[entering]
                continue
            row = self.basis.index(leaving)
            delta = -direction * w[row]
            self.state[leaving] = _AT_UPPER if delta > 0 else _AT_LOWER
            self.x[leaving] = hi[leaving] if delta > 0 else lo[leaving]
            self.basis[row] = entering
            self.state[entering] = _BASIC


def solve_lp(problem: LpProblem, tol: float = 1e-9) -> LpSolution:
    """Solve a bounded-variable LP; statuses: optimal, infeasible, unbounded.

    The returned point is a basic solution satisfying every constraint to
    within 1e-8 and with no entering candidate of reduced cost below -tol.
    """
    n = problem.n_vars
    me, mu = problem.a_eq.shape[0], problem.a_ub.shape[0]
    m = me + mu
    # slack columns turn inequality rows into equalities
    A = np.zeros((m, n + mu))
    A[:me, :n] = problem.a_eq
    A[me:, :n] = problem.a_ub
    A[me:, n:] = np.eye(mu)
    b = np.concatenate([problem.b_eq, problem.b_ub])
    lo = np.concatenate([problem.lb, np.zeros(mu)])
    hi = np.concatenate([problem.ub, np.full(mu, np.inf)])

    # artificial columns give a trivially feasible phase-1 start
    x0 = lo.copy()
    resid = b - A @ x0
    art = np.zeros((m, m))
    for r in range(m):
        art[r, r] = 1.0 if resid[r] >= 0 else -1.0
    A_full = np.hstack([A, art])
    lo_full = np.concatenate([lo, np.zeros(m)])
    hi_full = np.concatenate([hi, np.full(m, np.inf)])

    rows = m
    cols = A_full.shape[1]
    itercap = max(200, 10 * (rows + cols) ** 2)

    tab = _Tableau(A_full, b, lo_full, hi_full, itercap)
    tab.basis = list(range(n + mu, n + mu + m))
    tab.x = np.concatenate([x0, np.abs(resid)])
    tab.state[:] = _AT_LOWER
    tab.state[tab.basis] = _BASIC

    cost1 = np.zeros(cols)
    cost1[n + mu:] = 1.0
    status = tab.run(cost1, tol)
    if status != OPTIMAL:  # phase-1 objective is bounded below by zero
        raise SimplexCycleError("phase 1 reported unbounded; numerical failure")
    feas_tol = 1e-9 * max(1.0, float(np.abs(b).max()) if m else 1.0)
    if tab.x[n + mu:].sum() > max(feas_tol, 1e-9):
        return LpSolution(INFEASIBLE, iterations=tab.iterations)

    # pin artificials at zero and optimize the real objective
    tab.hi[n + mu:] = 0.0
    tab.x[n + mu:] = 0.0
    cost2 = np.zeros(cols)
    cost2[:n] = problem.c
    status = tab.run(cost2, tol)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, iterations=tab.iterations)
    x = np.clip(tab.x[:n], problem.lb, problem.ub)
    return LpSolution(OPTIMAL, x=x, objective=float(problem.c @ x),
                      iterations=tab.iterations)
