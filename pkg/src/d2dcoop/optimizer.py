"""Assignment optimization for a coalition.

Model A assigns file *fractions* to relays and is a bounded-variable LP;
Model B assigns each file to a single relay and is solved exactly by
depth-first branch and bound at small scale, or approximately by a
popularity-greedy pass, a max-regret ("greedy global") pass, or a random
baseline.  All solvers share the same per-unit cost accounting: the cost of
relay i carrying file m covers its BS download, its D2D multicast, and the
reception energy at every destination node of m in the coalition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (AssignmentPlan, Coalition, NetworkInstance,
                    _multicast_link)
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, LpProblem, solve_lp


class InfeasibleError(Exception):
    """No assignment satisfies the delivery and budget constraints."""


class CapExceededError(Exception):
    """Instance exceeds the stated size cap of an exact method."""


def cost_matrices(inst: NetworkInstance, S: Coalition):
    """Per-unit costs for coalition S.

    Returns (file_ids, total, budget) where file_ids are the files requested
    inside S, total[u, f] is the energy of the whole transfer if member u
    carries all of file f (download + multicast + every destination's
    reception), and budget[u, f] is the part charged against u's own energy
    budget (download + multicast only).
    """
    members = tuple(S)
    file_ids = inst.requested_files(S)
    total = np.zeros((len(members), len(file_ids)))
    budget = np.zeros_like(total)
    for fi, m in enumerate(file_ids):
        s_m = inst.requesters_of(m, within=S)
        x = inst.file_size(m)
        for ui, i in enumerate(members):
            down = x * inst.bs_rx_power[i - 1] / inst.bs_rate[i - 1]
            others = [j for j in s_m if j != i]
            if others:
                rate, power = _multicast_link(inst, i, s_m)
                tx = x * power / rate
                rx = sum(x * inst.d2d_rx_power[i - 1, j - 1] / rate for j in others)
            else:
                tx = rx = 0.0
            budget[ui, fi] = down + tx
            total[ui, fi] = down + tx + rx
    return file_ids, total, budget


def solve_model_a_lp(inst: NetworkInstance, S: Coalition) -> tuple[AssignmentPlan, float]:
    """Minimum-energy fractional assignment for S via the LP.

    Raises InfeasibleError when the budgets cannot accommodate the
    requested files.  The LP is never unbounded: costs are non-negative and
    all variables live in [0, 1].
    """
    members = tuple(S)
    file_ids, total, budget = cost_matrices(inst, S)
    nf, nu = len(file_ids), len(members)
    if nf == 0:
        return AssignmentPlan.empty(S), 0.0
    nv = nf * nu  # variable (f, u) at index f * nu + u
    c = total.T.reshape(nv)
    a_eq = np.zeros((nf, nv))
    for fi in range(nf):
        a_eq[fi, fi * nu:(fi + 1) * nu] = 1.0
    b_eq = np.ones(nf)
    a_ub = np.zeros((nu, nv))
    for fi in range(nf):
        a_ub[:, fi * nu:(fi + 1) * nu] = np.diag(budget[:, fi])
    b_ub = inst.energy_budget[[i - 1 for i in members]]
    sol = solve_lp(LpProblem(c=c, a_eq=a_eq, b_eq=b_eq, a_ub=a_ub, b_ub=b_ub,
                             lb=np.zeros(nv), ub=np.ones(nv)))
    if sol.status == INFEASIBLE:
        raise InfeasibleError("energy budgets cannot deliver the requested files")
    assert sol.status == OPTIMAL, f"unexpected LP status {sol.status}"
    alpha = sol.x.reshape(nf, nu).T
    plan = AssignmentPlan(members, file_ids, alpha, "fractional")
    return plan, float(sol.objective)


@dataclass(frozen=True)
class BinaryAssignment:
    """One relay per requested file."""

    relay_of: dict[int, int]  # file id -> user id

    def to_plan(self, inst: NetworkInstance, S: Coalition) -> AssignmentPlan:
        members = tuple(S)
        file_ids = tuple(sorted(self.relay_of))
        alpha = np.zeros((len(members), len(file_ids)))
        for fi, m in enumerate(file_ids):
            alpha[members.index(self.relay_of[m]), fi] = 1.0
        return AssignmentPlan(members, file_ids, alpha, "binary")


@dataclass(frozen=True)
class HeuristicResult:
    """Outcome of a single-relay assignment heuristic.

    `stranded` lists files for which no budget-feasible relay remained; the
    cost covers assigned files only, so callers must treat a non-empty
    stranded tuple as a partial failure rather than a cheap solution.
    """

    assignment: BinaryAssignment
    stranded: tuple[int, ...]
    total_cost: float

    @property
    def complete(self) -> bool:
        return not self.stranded


def assignment_cost(inst: NetworkInstance, S: Coalition, assignment: BinaryAssignment) -> float:
    """Total transfer energy of a binary assignment."""
    file_ids, total, _ = cost_matrices(inst, S)
    members = tuple(S)
    return float(sum(total[members.index(assignment.relay_of[m]), file_ids.index(m)]
                     for m in assignment.relay_of))


def solve_model_b_exact(inst: NetworkInstance, S: Coalition,
                        max_files: int = 12, max_users: int = 12
                        ) -> tuple[BinaryAssignment, float]:
    """Globally optimal single-relay assignment by branch and bound.

    Depth-first over files in id order; the bound below a node is the sum of
    budget-free per-file minima of the remaining files.  Raises
    CapExceededError beyond the stated size caps and InfeasibleError when no
    assignment fits the budgets.
    """
    members = tuple(S)
    file_ids, total, budget = cost_matrices(inst, S)
    nf, nu = len(file_ids), len(members)
    if nf > max_files or nu > max_users:
        raise CapExceededError(f"{nf} files / {nu} users exceed exact caps "
                               f"({max_files} / {max_users})")
    if nf == 0:
        return BinaryAssignment({}), 0.0
    budgets = inst.energy_budget[[i - 1 for i in members]]
    # optimistic completion bound: unconstrained minima of the remaining files
    suffix = np.zeros(nf + 1)
    for fi in range(nf - 1, -1, -1):
        suffix[fi] = suffix[fi + 1] + total[:, fi].min()

    best_cost = np.inf
    best: list[int] | None = None
    loads = np.zeros(nu)
    choice = [0] * nf

    def dfs(fi: int, cost: float):
        nonlocal best_cost, best
        if cost + suffix[fi] >= best_cost - 1e-12:
            return
        if fi == nf:
            best_cost, best = cost, choice[:fi]
            return
        for ui in range(nu):
            if loads[ui] + budget[ui, fi] <= budgets[ui] + 1e-9:
                loads[ui] += budget[ui, fi]
                choice[fi] = ui
                dfs(fi + 1, cost + total[ui, fi])
                loads[ui] -= budget[ui, fi]

    dfs(0, 0.0)
    if best is None:
        raise InfeasibleError("no single-relay assignment satisfies the budgets")
    relay_of = {file_ids[fi]: members[best[fi]] for fi in range(nf)}
    return BinaryAssignment(relay_of), float(best_cost)


def greedy_assign(inst: NetworkInstance, S: Coalition,
                  popularity: "list[int] | tuple[int, ...]") -> HeuristicResult:
    """Assign files in decreasing popularity, each to its cheapest relay whose
    energy budget still holds after the assignment; ties go to the lower
    user id.  Files left without a feasible relay are reported stranded.
    """
    members = tuple(S)
    file_ids, total, budget = cost_matrices(inst, S)
    requested = set(file_ids)
    if not requested.issubset(popularity):
        raise ValueError("popularity order must cover every requested file")
    budgets = inst.energy_budget[[i - 1 for i in members]]
    loads = np.zeros(len(members))
    relay_of: dict[int, int] = {}
    stranded: list[int] = []
    cost = 0.0
    for m in popularity:
        if m not in requested:
            continue
        fi = file_ids.index(m)
        order = sorted(range(len(members)), key=lambda ui: (total[ui, fi], members[ui]))
        for ui in order:
            if loads[ui] + budget[ui, fi] <= budgets[ui] + 1e-9:
                loads[ui] += budget[ui, fi]
                relay_of[m] = members[ui]
                cost += total[ui, fi]
                break
        else:
            stranded.append(m)
    return HeuristicResult(BinaryAssignment(relay_of), tuple(stranded), cost)


def greedy_global_assign(inst: NetworkInstance, S: Coalition) -> HeuristicResult:
    """Max-regret assignment: repeatedly pick the unassigned file with the
    largest gap between its two cheapest remaining relays and try its
    cheapest one; infeasible heads are popped and the file re-queued.  A file
    whose relay list empties is stranded.  Ties go to the lower file id; a
    single-entry list counts as infinite regret (the file is forced next).
    """
    members = tuple(S)
    file_ids, total, budget = cost_matrices(inst, S)
    budgets = inst.energy_budget[[i - 1 for i in members]]
    loads = np.zeros(len(members))
    col = {m: fi for fi, m in enumerate(file_ids)}
    vectors = {m: sorted(range(len(members)),
                         key=lambda ui: (total[ui, col[m]], members[ui]))
               for m in file_ids}
    relay_of: dict[int, int] = {}
    stranded: list[int] = []
    cost = 0.0
    pending = set(file_ids)

    def regret(m):
        v = vectors[m]
        return (total[v[1], col[m]] - total[v[0], col[m]]) if len(v) > 1 else np.inf

    while pending:
        m = min(pending, key=lambda m: (-regret(m), m))
        fi = col[m]
        head = vectors[m][0]
        if loads[head] + budget[head, fi] <= budgets[head] + 1e-9:
            loads[head] += budget[head, fi]
            relay_of[m] = members[head]
            cost += total[head, fi]
            pending.remove(m)
        else:
            vectors[m].pop(0)
            if not vectors[m]:
                stranded.append(m)
                pending.remove(m)
    return HeuristicResult(BinaryAssignment(relay_of), tuple(sorted(stranded)), cost)


def random_assign(inst: NetworkInstance, S: Coalition, seed: int,
                  retries: int = 100) -> HeuristicResult:
    """Uniformly random budget-feasible relay per file (seeded, reproducible).

    Whole-assignment retries are attempted up to `retries` times before the
    last partial attempt is reported with its stranded files.
    """
    members = tuple(S)
    file_ids, total, budget = cost_matrices(inst, S)
    budgets = inst.energy_budget[[i - 1 for i in members]]
    rng = np.random.default_rng(seed)
    last = None
    for _ in range(max(1, retries)):
        loads = np.zeros(len(members))
        relay_of: dict[int, int] = {}
        stranded: list[int] = []
        cost = 0.0
        for fi, m in enumerate(file_ids):
            feas = [ui for ui in range(len(members))
                    if loads[ui] + budget[ui, fi] <= budgets[ui] + 1e-9]
            if not feas:
                stranded.append(m)
                continue
            ui = feas[rng.integers(len(feas))]
            loads[ui] += budget[ui, fi]
            relay_of[m] = members[ui]
            cost += total[ui, fi]
        last = HeuristicResult(BinaryAssignment(relay_of), tuple(stranded), cost)
        if last.complete:
            return last
    return last
