"""Network and energy model for D2D cooperative content distribution.

A base station serves N cellular users; some users request one file each.
Inside a coalition, relays download (fractions of) files from the BS and
multicast them over D2D links to the requesting destination nodes.  This
module holds the instance data, the per-user energy accounting, and the
coalition value function (utility sum minus energy cost at the optimum
assignment, delegated to :mod:`d2dcoop.optimizer`).

User ids and file ids are 1-based throughout the public API; numpy arrays
are 0-indexed internally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MINUS_INF = float("-inf")

#: Multicast rate reported when a relay has no receiver other than itself.
#: Any positive value works: the requester-indicator zeroes the term.
EMPTY_MULTICAST_RATE = 1.0


@dataclass(frozen=True)
class FileSpec:
    """A file offered by the BS: 1-based id and size in bits."""

    id: int
    size_bits: float


@dataclass(frozen=True, order=True)
class Coalition:
    """A set of cooperating users, kept sorted so equality is structural."""

    members: tuple[int, ...]

    def __post_init__(self):
        canon = tuple(sorted(set(self.members)))
        if canon != self.members:
            object.__setattr__(self, "members", canon)
        if any(i < 1 for i in canon):
            raise ValueError("user ids are 1-based")

    @classmethod
    def of(cls, members: Iterable[int]) -> "Coalition":
        return cls(tuple(members))

    @classmethod
    def from_mask(cls, mask: int) -> "Coalition":
        return cls(tuple(i + 1 for i in range(mask.bit_length()) if mask >> i & 1))

    @property
    def mask(self) -> int:
        """Bitmask encoding (bit i-1 set for member i); needs ids <= 63."""
        m = 0
        for i in self.members:
            m |= 1 << (i - 1)
        return m

    def __contains__(self, i: int) -> bool:
        return i in self.members

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)


class NetworkInstance:
    """Immutable problem instance: demands, rates, powers, budgets, valuations.

    Rates are in bits/s, powers in watts (consumption constants), budgets in
    joules, file sizes in bits.  ``d2d_rate[i-1, j-1]`` is the rate at which
    user i transmits to user j; ``d2d_rx_power[j-1, i-1]`` is the power user i
    consumes while listening to relay j.
    """

    def __init__(self, n_users, files, demand, bs_rate, d2d_rate, bs_rx_power,
                 d2d_tx_power, d2d_rx_power, energy_budget, valuation,
                 cost_coeff=1.0):
        self.n_users = int(n_users)
        self.files = tuple(FileSpec(int(f.id), float(f.size_bits)) if isinstance(f, FileSpec)
                           else FileSpec(int(f[0]), float(f[1])) for f in files)
        n, m = self.n_users, len(self.files)
        self.demand = np.asarray(demand, dtype=int).reshape(n, m)
        self.bs_rate = np.asarray(bs_rate, dtype=float).reshape(n)
        self.d2d_rate = np.asarray(d2d_rate, dtype=float).reshape(n, n)
        self.bs_rx_power = np.asarray(bs_rx_power, dtype=float).reshape(n)
        self.d2d_tx_power = np.asarray(d2d_tx_power, dtype=float).reshape(n, n)
        self.d2d_rx_power = np.asarray(d2d_rx_power, dtype=float).reshape(n, n)
        self.energy_budget = np.asarray(energy_budget, dtype=float).reshape(n)
        self.valuation = np.asarray(valuation, dtype=float).reshape(n, m)
        self.cost_coeff = float(cost_coeff)
        self._validate()

    def _validate(self):
        if self.n_users < 1:
            raise ValueError("need at least one user")
        ids = [f.id for f in self.files]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("file ids must be 1..M")
        if any(f.size_bits <= 0 for f in self.files):
            raise ValueError("file sizes must be positive")
        if not np.isin(self.demand, (0, 1)).all():
            raise ValueError("demand entries must be 0/1")
        if (self.demand.sum(axis=1) > 1).any():
            raise ValueError("each user requests at most one file")
        off_diag = ~np.eye(self.n_users, dtype=bool)
        if (self.bs_rate <= 0).any() or (self.d2d_rate[off_diag] <= 0).any():
            raise ValueError("rates must be strictly positive")
        for p in (self.bs_rx_power, self.d2d_tx_power, self.d2d_rx_power):
            if (p < 0).any():
                raise ValueError("powers must be non-negative")
        if self.cost_coeff <= 0:
            raise ValueError("cost coefficient must be positive")

    # -- convenience accessors (1-based ids) --------------------------------

    @property
    def n_files(self) -> int:
        return len(self.files)

    def file_size(self, m: int) -> float:
        return self.files[m - 1].size_bits

    def requested_file(self, i: int) -> int | None:
        """File requested by user i, or None."""
        row = np.flatnonzero(self.demand[i - 1])
        return int(row[0]) + 1 if row.size else None

    def requesters_of(self, m: int, within: Iterable[int] | None = None) -> tuple[int, ...]:
        """Destination nodes of file m, optionally restricted to a coalition."""
        users = range(1, self.n_users + 1) if within is None else within
        return tuple(i for i in users if self.demand[i - 1, m - 1])

    def requested_files(self, S: Coalition) -> tuple[int, ...]:
        """Files requested by at least one member of S."""
        return tuple(m for m in range(1, self.n_files + 1)
                     if self.demand[[i - 1 for i in S], m - 1].any())

    def grand_coalition(self) -> Coalition:
        return Coalition.of(range(1, self.n_users + 1))


# -- JSON interchange --------------------------------------------------------

def instance_to_dict(inst: NetworkInstance) -> dict:
    return {
        "users": inst.n_users,
        "files": [{"id": f.id, "size_bits": f.size_bits} for f in inst.files],
        "demand": inst.demand.tolist(),
        "rates": {"bs": inst.bs_rate.tolist(), "d2d": inst.d2d_rate.tolist()},
        "powers": {
            "bs_rx": inst.bs_rx_power.tolist(),
            "d2d_tx": inst.d2d_tx_power.tolist(),
            "d2d_rx": inst.d2d_rx_power.tolist(),
        },
        "budgets": inst.energy_budget.tolist(),
        "valuations": inst.valuation.tolist(),
        "cost_coeff": inst.cost_coeff,
    }


def instance_from_dict(doc: dict) -> NetworkInstance:
    return NetworkInstance(
        n_users=doc["users"],
        files=[(f["id"], f["size_bits"]) for f in doc["files"]],
        demand=doc["demand"],
        bs_rate=doc["rates"]["bs"],
        d2d_rate=doc["rates"]["d2d"],
        bs_rx_power=doc["powers"]["bs_rx"],
        d2d_tx_power=doc["powers"]["d2d_tx"],
        d2d_rx_power=doc["powers"]["d2d_rx"],
        energy_budget=doc["budgets"],
        valuation=doc["valuations"],
        cost_coeff=doc["cost_coeff"],
    )


def instance_to_json(inst: NetworkInstance) -> str:
    """Canonical (byte-stable) JSON encoding of an instance."""
    return json.dumps(instance_to_dict(inst), sort_keys=True, separators=(",", ":"))


def instance_from_json(text: str) -> NetworkInstance:
    return instance_from_dict(json.loads(text))


# -- multicast link ----------------------------------------------------------

def multicast_rate(inst: NetworkInstance, relay: int, receivers: Iterable[int]) -> float:
    """Rate at which `relay` multicasts to `receivers` (minimum pair rate).

    With no receiver besides the relay itself the placeholder
    EMPTY_MULTICAST_RATE is returned; callers zero such terms via the
    requester indicator.
    """
    others = [j for j in receivers if j != relay]
    if not others:
        return EMPTY_MULTICAST_RATE
    return float(min(inst.d2d_rate[relay - 1, j - 1] for j in others))


def _multicast_link(inst, relay, receivers):
    """(rate, tx_power) of a multicast; power is the pair power of the
    rate-determining receiver (lowest id on ties)."""
    others = sorted(j for j in receivers if j != relay)
    if not others:
        return EMPTY_MULTICAST_RATE, 0.0
    best = min(others, key=lambda j: (inst.d2d_rate[relay - 1, j - 1], j))
    return (float(inst.d2d_rate[relay - 1, best - 1]),
            float(inst.d2d_tx_power[relay - 1, best - 1]))


# -- assignment plans and energies -------------------------------------------

@dataclass(frozen=True)
class AssignmentPlan:
    """File-fraction assignment alpha[i, m] for a coalition.

    `members` and `file_ids` give the row/column labels of `alpha`;
    files not requested in the coalition are omitted (their fractions are
    identically zero).
    """

    members: tuple[int, ...]
    file_ids: tuple[int, ...]
    alpha: np.ndarray  # shape (len(members), len(file_ids))
    mode: str  # "fractional" | "binary"

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float).reshape(len(self.members), len(self.file_ids))
        object.__setattr__(self, "alpha", a)
        if self.mode not in ("fractional", "binary"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def alpha_of(self, i: int, m: int) -> float:
        """Fraction of file m assigned to relay i (0 when not tracked)."""
        if i not in self.members or m not in self.file_ids:
            return 0.0
        return float(self.alpha[self.members.index(i), self.file_ids.index(m)])

    @classmethod
    def empty(cls, S: Coalition, mode: str = "fractional") -> "AssignmentPlan":
        return cls(tuple(S), (), np.zeros((len(S), 0)), mode)


@dataclass(frozen=True)
class PlanEnergies:
    """Per-user energy breakdown of a plan: BS download, D2D multicast,
    and per-(user, file) reception, all in joules."""

    download: dict[int, float]
    multicast: dict[int, float]
    receive: dict[tuple[int, int], float]

    def user_total(self, i: int) -> float:
        rx = sum(e for (u, _m), e in self.receive.items() if u == i)
        return self.download.get(i, 0.0) + self.multicast.get(i, 0.0) + rx

    def total(self) -> float:
        return (sum(self.download.values()) + sum(self.multicast.values())
                + sum(self.receive.values()))


def relay_download_energy(inst: NetworkInstance, S: Coalition, plan: AssignmentPlan, i: int) -> float:
    """Energy user i spends downloading its assigned file fractions from the BS."""
    if i not in S:
        raise ValueError(f"user {i} not in coalition")
    return float(sum(plan.alpha_of(i, m) * inst.file_size(m) * inst.bs_rx_power[i - 1]
                     / inst.bs_rate[i - 1] for m in plan.file_ids))


def relay_multicast_energy(inst: NetworkInstance, S: Coalition, plan: AssignmentPlan, i: int) -> float:
    """Energy user i spends multicasting its file fractions over D2D links.

    Files whose only requester inside S is i itself contribute nothing.
    """
    if i not in S:
        raise ValueError(f"user {i} not in coalition")
    total = 0.0
    for m in plan.file_ids:
        a = plan.alpha_of(i, m)
        if a == 0.0:
            continue
        s_m = inst.requesters_of(m, within=S)
        if not [j for j in s_m if j != i]:  # indicator d_m(S_m \ {i})
            continue
        rate, power = _multicast_link(inst, i, s_m)
        total += a * inst.file_size(m) * power / rate
    return total


def destination_receive_energy(inst: NetworkInstance, S: Coalition, plan: AssignmentPlan,
                               i: int, m: int) -> float:
    """Energy destination i spends receiving file m from the coalition relays."""
    if i not in S:
        raise ValueError(f"user {i} not in coalition")
    if not inst.demand[i - 1, m - 1]:
        raise ValueError(f"user {i} does not request file {m}")
    s_m = inst.requesters_of(m, within=S)
    total = 0.0
    for j in S:
        if j == i:
            continue
        a = plan.alpha_of(j, m)
        if a == 0.0:
            continue
        rate, _ = _multicast_link(inst, j, s_m)
        total += a * inst.file_size(m) * inst.d2d_rx_power[j - 1, i - 1] / rate
    return total


def file_transfer_energy(inst: NetworkInstance, S: Coalition, plan: AssignmentPlan, m: int) -> float:
    """Total energy consumed transferring file m inside S under `plan`.

    Sum of the relay download, relay multicast, and destination reception
    energies attributable to m.
    """
    total = 0.0
    s_m = inst.requesters_of(m, within=S)
    for i in S:
        a = plan.alpha_of(i, m)
        if a:
            total += a * inst.file_size(m) * inst.bs_rx_power[i - 1] / inst.bs_rate[i - 1]
            if [j for j in s_m if j != i]:
                rate, power = _multicast_link(inst, i, s_m)
                total += a * inst.file_size(m) * power / rate
    for i in s_m:
        total += destination_receive_energy(inst, S, plan, i, m)
    return total


def plan_energies(inst: NetworkInstance, S: Coalition, plan: AssignmentPlan) -> PlanEnergies:
    download = {i: relay_download_energy(inst, S, plan, i) for i in S}
    multicast = {i: relay_multicast_energy(inst, S, plan, i) for i in S}
    receive = {}
    for m in plan.file_ids:
        for i in inst.requesters_of(m, within=S):
            receive[(i, m)] = destination_receive_energy(inst, S, plan, i, m)
    return PlanEnergies(download, multicast, receive)


def validate_plan(inst: NetworkInstance, S: Coalition, plan: AssignmentPlan, tol: float = 1e-9):
    """Raise ValueError if `plan` violates the assignment invariants:
    per-file fraction totals, binary integrality, or relay energy budgets."""
    requested = inst.requested_files(S)
    for m in requested:
        got = sum(plan.alpha_of(i, m) for i in S)
        if abs(got - 1.0) > tol:
            raise ValueError(f"file {m}: fractions sum to {got}, expected 1")
    for m in plan.file_ids:
        if m not in requested:
            got = sum(plan.alpha_of(i, m) for i in S)
            if abs(got) > tol:
                raise ValueError(f"file {m} is not requested in S but has fractions")
    if plan.mode == "binary":
        if not np.all((np.abs(plan.alpha) < tol) | (np.abs(plan.alpha - 1) < tol)):
            raise ValueError("binary plan has fractional entries")
    for i in S:
        spent = relay_download_energy(inst, S, plan, i) + relay_multicast_energy(inst, S, plan, i)
        if spent > inst.energy_budget[i - 1] + tol:
            raise ValueError(f"user {i} exceeds energy budget: {spent} > {inst.energy_budget[i - 1]}")


# -- coalition value ----------------------------------------------------------

@dataclass(frozen=True)
class CoalitionValue:
    """Optimal value of a coalition: utility sum minus scaled minimum energy.

    Infeasible coalitions (budgets too tight to deliver the requested files)
    carry value -inf so no formation procedure ever selects them.
    """

    value: float
    plan: AssignmentPlan | None
    status: str  # "feasible" | "infeasible"

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def coalition_value(inst: NetworkInstance, S: Coalition, mode: str = "fractional") -> CoalitionValue:
    """Value v(S): sum of member valuations minus a * minimum total energy.

    The minimum is taken over fractional assignments (LP) or binary ones
    (exact search) depending on `mode`.
    """
    from . import optimizer  # late import: optimizer builds on this module

    if len(S) == 0:
        return CoalitionValue(0.0, None, "feasible")
    base = float(sum(inst.valuation[i - 1, m - 1]
                     for i in S for m in range(1, inst.n_files + 1)
                     if inst.demand[i - 1, m - 1]))
    try:
        if mode == "fractional":
            plan, cost = optimizer.solve_model_a_lp(inst, S)
        elif mode == "binary":
            assignment, cost = optimizer.solve_model_b_exact(inst, S)
            plan = assignment.to_plan(inst, S)
        else:
            raise ValueError(f"unknown mode {mode!r}")
    except optimizer.InfeasibleError:
        return CoalitionValue(MINUS_INF, None, "infeasible")
    return CoalitionValue(base - inst.cost_coeff * cost, plan, "feasible")


def standalone_download_energy(inst: NetworkInstance, users: Iterable[int] | None = None) -> float:
    """Energy when every requester downloads its file straight from the BS
    (the no-cooperation baseline), computed analytically."""
    users = range(1, inst.n_users + 1) if users is None else users
    total = 0.0
    for i in users:
        m = inst.requested_file(i)
        if m is not None:
            total += inst.file_size(m) * inst.bs_rx_power[i - 1] / inst.bs_rate[i - 1]
    return total


# -- fully symmetric special case ---------------------------------------------

@dataclass(frozen=True)
class SymmetricParams:
    """Link-symmetric network: one BS rate, one D2D rate, shared powers."""

    bs_rate: float
    d2d_rate: float
    bs_rx_power: float
    d2d_tx_power: float
    d2d_rx_power: float

    def rate_condition_holds(self) -> bool:
        """True when the BS link is slow enough that one shared download plus
        a D2D multicast beats repeated BS downloads."""
        return (self.bs_rate / self.d2d_rate
                < self.bs_rx_power / (self.d2d_rx_power + self.d2d_tx_power))


def special_case_cost(sym: SymmetricParams, n_requesters: int) -> float:
    """Closed-form minimum energy for a symmetric coalition with
    `n_requesters` destination nodes of one unit-size file.

    Requires the symmetric rate condition; refuses otherwise since the
    closed form is only guaranteed under it.
    """
    if not sym.rate_condition_holds():
        raise ValueError("symmetric rate condition violated; closed form not guaranteed")
    if n_requesters < 0:
        raise ValueError("requester count must be non-negative")
    if n_requesters == 0:
        return 0.0
    base = sym.bs_rx_power / sym.bs_rate
    if n_requesters == 1:
        return base
    return (base + (n_requesters - 1) * sym.d2d_rx_power / sym.d2d_rate
            + sym.d2d_tx_power / sym.d2d_rate)


def symmetric_instance(sym: SymmetricParams, n_users: int, requesters: Sequence[int],
                       energy_budget: float = 1e6) -> NetworkInstance:
    """Single-file instance with fully symmetric links; `requesters` lists the
    users (1-based) that request the file."""
    n = n_users
    demand = np.zeros((n, 1), dtype=int)
    for i in requesters:
        demand[i - 1, 0] = 1
    return NetworkInstance(
        n_users=n,
        files=[(1, 1.0)],
        demand=demand,
        bs_rate=np.full(n, sym.bs_rate),
        d2d_rate=np.full((n, n), sym.d2d_rate),
        bs_rx_power=np.full(n, sym.bs_rx_power),
        d2d_tx_power=np.full((n, n), sym.d2d_tx_power),
        d2d_rx_power=np.full((n, n), sym.d2d_rx_power),
        energy_budget=np.full(n, energy_budget),
        valuation=np.zeros((n, 1)),
        cost_coeff=1.0,
    )
