"""Transferable-utility game tools: value oracle, core, convexity.

Coalitions are encoded as bitmasks (bit i-1 for user i), which caps the
player count at 63; the experiments stay far below that.  The oracle memo
table is a plain dict: reads and idempotent inserts are safe under
concurrent evaluation, recomputation of a value is harmless.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .model import Coalition, NetworkInstance, coalition_value
from .simplex import INFEASIBLE, LpProblem, solve_lp

CORE_WITNESS_TOL = 1e-7
PAIR_TOL = 1e-9


class ValueOracle:
    """Memoizing coalition-value function v: 2^N -> R with v(empty) = 0."""

    def __init__(self, n: int, fn: Callable[[int], float]):
        if n > 63:
            raise ValueError("bitmask encoding supports at most 63 users")
        self.n = n
        self._fn = fn
        self._memo: dict[int, float] = {0: 0.0}

    @classmethod
    def from_instance(cls, inst: NetworkInstance, mode: str = "fractional") -> "ValueOracle":
        def fn(mask: int) -> float:
            return coalition_value(inst, Coalition.from_mask(mask), mode).value
        return cls(inst.n_users, fn)

    @classmethod
    def from_function(cls, n: int, fn: Callable[[Coalition], float]) -> "ValueOracle":
        return cls(n, lambda mask: float(fn(Coalition.from_mask(mask))))

    @classmethod
    def from_table(cls, n: int, table: dict[int, float]) -> "ValueOracle":
        return cls(n, lambda mask: float(table[mask]))

    def value_mask(self, mask: int) -> float:
        v = self._memo.get(mask)
        if v is None:
            v = float(self._fn(mask))
            self._memo[mask] = v
        return v

    def value(self, S: Coalition | Iterable[int]) -> float:
        S = S if isinstance(S, Coalition) else Coalition.of(S)
        return self.value_mask(S.mask)

    def values_all(self) -> np.ndarray:
        """Dense table v[mask] for every coalition, shape (2**n,)."""
        return np.array([self.value_mask(m) for m in range(1 << self.n)])

    def clear_cache(self):
        self._memo = {0: 0.0}


@dataclass(frozen=True)
class PayoffProfile:
    """Per-user payoff vector x (index 0 is user 1)."""

    x: tuple[float, ...]

    def total(self, S: Coalition | None = None) -> float:
        if S is None:
            return float(sum(self.x))
        return float(sum(self.x[i - 1] for i in S))


@dataclass(frozen=True)
class CoreResult:
    status: str  # "nonempty" | "empty"
    witness: PayoffProfile | None = None
    blocking: tuple[Coalition, ...] | None = None


def _mask_sums(x: np.ndarray) -> np.ndarray:
    """sums[mask] = sum of x over the members of mask, for every mask."""
    n = x.size
    sums = np.zeros(1 << n)
    for mask in range(1, 1 << n):
        low = mask & -mask
        sums[mask] = sums[mask ^ low] + x[low.bit_length() - 1]
    return sums


def _core_feasible(n: int, v_total: float, constraints: list[tuple[int, float]]):
    """Feasibility of {sum x = v_total, x(S) >= v_S for (S, v_S) given}.

    Free payoffs are split x = p - q with p, q >= 0 so the simplex engine's
    finite lower bounds apply.  Returns the witness vector or None.
    """
    nv = 2 * n
    a_eq = np.concatenate([np.ones(n), -np.ones(n)]).reshape(1, nv)
    rows, rhs = [], []
    for mask, v_s in constraints:
        bits = [(mask >> i) & 1 for i in range(n)]
        rows.append(np.concatenate([-np.array(bits, float), np.array(bits, float)]))
        rhs.append(-v_s)
    a_ub = np.vstack(rows) if rows else None
    b_ub = np.array(rhs) if rows else None
    sol = solve_lp(LpProblem(c=np.zeros(nv), a_eq=a_eq, b_eq=[v_total],
                             a_ub=a_ub, b_ub=b_ub,
                             lb=np.zeros(nv), ub=np.full(nv, np.inf)))
    if sol.status == INFEASIBLE:
        return None
    return sol.x[:n] - sol.x[n:]


def check_core(oracle: ValueOracle, n: int) -> CoreResult:
    """Decide core non-emptiness by constraint generation over the 2^n
    coalition inequalities.

    On emptiness the blocking certificate is an irreducible family of
    coalitions whose constraints, together with the efficiency equation,
    cannot be satisfied; it is obtained by deletion probing.
    """
    if n > 16:
        raise ValueError(f"core check capped at 16 users, got {n}")
    full = (1 << n) - 1
    v = oracle.values_all()
    v_total = v[full]

    active: list[tuple[int, float]] = [(1 << i, v[1 << i]) for i in range(n)]
    seen = {mask for mask, _ in active}
    witness = None
    while True:
        x = _core_feasible(n, v_total, active)
        if x is None:
            break
        sums = _mask_sums(x)
        violation = v - sums
        violation[0] = violation[full] = -np.inf
        order = np.argsort(-violation)
        worst = [int(m) for m in order[:5]
                 if violation[m] > CORE_WITNESS_TOL and int(m) not in seen]
        if not worst:
            witness = x
            break
        for m in worst:
            active.append((m, float(v[m])))
            seen.add(m)

    if witness is not None:
        return CoreResult("nonempty", witness=PayoffProfile(tuple(float(t) for t in witness)))

    # deletion probing: drop constraints whose removal keeps infeasibility
    kept = list(active)
    idx = 0
    while idx < len(kept):
        trial = kept[:idx] + kept[idx + 1:]
        if _core_feasible(n, v_total, trial) is None:
            kept = trial
        else:
            idx += 1
    blocking = tuple(Coalition.from_mask(mask) for mask, _ in kept)
    return CoreResult("empty", blocking=blocking)


def check_convex(oracle: ValueOracle, n: int, tol: float = PAIR_TOL):
    """Exhaustive convexity test: v(S1) + v(S2) <= v(S1 | S2) + v(S1 & S2)
    for every pair.  Returns (True, None) or (False, (S1, S2))."""
    if n > 10:
        raise ValueError(f"convexity check capped at 10 users, got {n}")
    v = oracle.values_all()
    size = 1 << n
    masks = np.arange(size)
    for s1 in range(size):
        lhs = v[s1] + v
        rhs = v[s1 | masks] + v[s1 & masks]
        bad = np.flatnonzero(lhs > rhs + tol)
        if bad.size:
            s2 = int(bad[0])
            return False, (Coalition.from_mask(s1), Coalition.from_mask(s2))
    return True, None


def check_superadditive(oracle: ValueOracle, n: int, tol: float = PAIR_TOL):
    """Superadditivity over disjoint pairs: v(S1 | S2) >= v(S1) + v(S2)."""
    if n > 10:
        raise ValueError(f"superadditivity check capped at 10 users, got {n}")
    v = oracle.values_all()
    full = (1 << n) - 1
    for s1 in range(1, full + 1):
        rest = full ^ s1
        s2 = rest
        while s2:
            if v[s1] + v[s2] > v[s1 | s2] + tol:
                return False, (Coalition.from_mask(s1), Coalition.from_mask(s2))
            s2 = (s2 - 1) & rest
    return True, None


def marginal_vector(oracle: ValueOracle, n: int, ordering) -> PayoffProfile:
    """Payoffs x[pi_k] = v({pi_1..pi_k}) - v({pi_1..pi_k-1}) along `ordering`
    (a permutation of 1..n).  Lies in the core for convex games."""
    if sorted(ordering) != list(range(1, n + 1)):
        raise ValueError("ordering must be a permutation of 1..n")
    x = [0.0] * n
    mask = 0
    for i in ordering:
        prev = oracle.value_mask(mask)
        mask |= 1 << (i - 1)
        x[i - 1] = oracle.value_mask(mask) - prev
    return PayoffProfile(tuple(x))
