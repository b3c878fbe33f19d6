"""Random instance generators and brute-force oracles shared by the tests."""

import numpy as np

from d2dcoop.model import NetworkInstance


def exhaustive_model_b(inst, S):
    """Independent oracle: vectorized enumeration over every relay map."""
    from d2dcoop.optimizer import cost_matrices
    members = tuple(S)
    file_ids, total, budget = cost_matrices(inst, S)
    nf, nu = len(file_ids), len(members)
    if nf == 0:
        return {}, 0.0
    budgets = inst.energy_budget[[i - 1 for i in members]]
    grids = np.meshgrid(*([np.arange(nu)] * nf), indexing="ij")
    choices = np.stack([g.ravel() for g in grids], axis=1)  # (nu^nf, nf)
    costs = total[choices, np.arange(nf)].sum(axis=1)
    feasible = np.ones(len(choices), dtype=bool)
    for ui in range(nu):
        load = (budget[ui, np.arange(nf)] * (choices == ui)).sum(axis=1)
        feasible &= load <= budgets[ui] + 1e-9
    if not feasible.any():
        return None, np.inf
    costs[~feasible] = np.inf
    best = int(np.argmin(costs))
    relay_of = {file_ids[fi]: members[choices[best, fi]] for fi in range(nf)}
    return relay_of, float(costs[best])


def random_instance(rng, n_users, n_files, request_prob=0.85, budget=1e6,
                    valuations=False):
    """Random demands/rates/powers with optional per-user valuations.

    Every user requests at most one file; rates are drawn per directed link.
    """
    n, m = n_users, n_files
    demand = np.zeros((n, m), dtype=int)
    for i in range(n):
        if rng.random() < request_prob:
            demand[i, rng.integers(m)] = 1
    d2d = rng.uniform(0.5, 8.0, size=(n, n))
    inst = NetworkInstance(
        n_users=n,
        files=[(k + 1, float(rng.uniform(0.5, 2.0))) for k in range(m)],
        demand=demand,
        bs_rate=rng.uniform(0.5, 4.0, size=n),
        d2d_rate=d2d,
        bs_rx_power=rng.uniform(0.2, 1.5, size=n),
        d2d_tx_power=rng.uniform(0.2, 1.5, size=(n, n)),
        d2d_rx_power=rng.uniform(0.2, 1.5, size=(n, n)),
        energy_budget=np.full(n, budget),
        valuation=rng.uniform(0.0, 5.0, size=(n, m)) * demand if valuations
        else np.zeros((n, m)),
        cost_coeff=1.0,
    )
    return inst


def tight_budget_instance(rng, n_users, n_files):
    """Instance whose budgets force non-trivial relay packing (but keep at
    least the exact solver feasible most of the time)."""
    inst = random_instance(rng, n_users, n_files, request_prob=1.0)
    from d2dcoop.optimizer import cost_matrices
    _, _, budget = cost_matrices(inst, inst.grand_coalition())
    per_user = budget.mean() * max(1.0, n_files / n_users)
    budgets = rng.uniform(0.8, 1.6, size=n_users) * per_user
    return NetworkInstance(
        n_users=inst.n_users,
        files=[(f.id, f.size_bits) for f in inst.files],
        demand=inst.demand,
        bs_rate=inst.bs_rate,
        d2d_rate=inst.d2d_rate,
        bs_rx_power=inst.bs_rx_power,
        d2d_tx_power=inst.d2d_tx_power,
        d2d_rx_power=inst.d2d_rx_power,
        energy_budget=budgets,
        valuation=inst.valuation,
        cost_coeff=1.0,
    )
