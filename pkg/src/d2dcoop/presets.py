"""Hand-built demonstration instances.

`two_cluster_empty_core_instance` is the six-user, one-file network whose
coalitional game has an empty core: two tight clusters {1,2,3} and {4,5,6}
with fast D2D links inside each cluster (rate 8) and slow links everywhere
else (rate 1).  Users 1, 2, 4, 5 request the file; 3 and 6 idle but enjoy a
fast BS link (rate 8) that makes them the cheap relays within their
clusters.  Splitting into the two clusters beats the grand coalition, whose
multicasts are dragged down to the slow inter-cluster rate.
"""

from __future__ import annotations

import numpy as np

from .model import NetworkInstance


def two_cluster_empty_core_instance(energy_budget: float = 1e6) -> NetworkInstance:
    n = 6
    demand = np.zeros((n, 1), dtype=int)
    for i in (1, 2, 4, 5):
        demand[i - 1, 0] = 1
    bs_rate = np.array([1.0, 1.0, 8.0, 1.0, 1.0, 8.0])
    d2d = np.ones((n, n))
    for i, j in [(3, 1), (3, 2), (6, 4), (6, 5)]:
        d2d[i - 1, j - 1] = d2d[j - 1, i - 1] = 8.0
    return NetworkInstance(
        n_users=n,
        files=[(1, 1.0)],
        demand=demand,
        bs_rate=bs_rate,
        d2d_rate=d2d,
        bs_rx_power=np.ones(n),
        d2d_tx_power=np.ones((n, n)),
        d2d_rx_power=np.ones((n, n)),
        energy_budget=np.full(n, energy_budget),
        valuation=np.zeros((n, 1)),
        cost_coeff=1.0,
    )
