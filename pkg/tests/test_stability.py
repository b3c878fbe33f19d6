"""Partition operators, stability verdicts, and merge-and-split."""

import json

import numpy as np
import pytest

from d2dcoop.game import ValueOracle
from d2dcoop.model import Coalition
from d2dcoop.presets import two_cluster_empty_core_instance
from d2dcoop.scenario import make_clustered_game
from d2dcoop.stability import (ClusterSymmetry, Collection, Partition,
                               check_cluster_stability_conditions, collection_under_partition,
                               enumerate_best_partition, extremal_energies,
                               is_dc_stable, merge_and_split, oplog_to_jsonl,
                               partition_value)


def additive_oracle(n, weights=None):
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    return ValueOracle.from_function(n, lambda S: float(sum(w[i - 1] for i in S)))


def all_partitions(items):
    """Plain recursive set-partition enumeration (independent oracle)."""
    items = list(items)
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for sub in all_partitions(rest):
        for k in range(len(sub)):
            yield sub[:k] + [[head] + sub[k]] + sub[k + 1:]
        yield [[head]] + sub


def random_partition(rng, n):
    labels = rng.integers(0, n, size=n)
    blocks = {}
    for i, lab in enumerate(labels, start=1):
        blocks.setdefault(int(lab), []).append(i)
    return Partition.of(blocks.values(), n)


# -- structures -----------------------------------------------------------------

def test_partition_validation():
    with pytest.raises(ValueError):
        Partition.of([[1, 2], [2, 3]], 3)  # overlap
    with pytest.raises(ValueError):
        Partition.of([[1, 2]], 3)  # does not cover
    with pytest.raises(ValueError):
        Collection((Coalition.of([1]), Coalition.of([1, 2])))


def test_collection_under_partition_identity():
    P = Partition.of([[1, 2], [3, 4]], 4)
    S = Collection((Coalition.of([1, 2]),))
    assert collection_under_partition(S, P).coalitions == (Coalition.of([1, 2]),)


def test_collection_under_partition_straddling():
    P = Partition.of([[1, 2], [3, 4]], 4)
    S = Collection((Coalition.of([1, 4]),))
    out = collection_under_partition(S, P)
    assert out.coalitions == (Coalition.of([1]), Coalition.of([4]))


def test_collection_under_partition_full_cover():
    P = Partition.of([[1, 3], [2], [4]], 4)
    S = Collection((Coalition.of([1, 2]), Coalition.of([3, 4])))
    out = collection_under_partition(S, P)
    assert out.coalitions == P.blocks


# -- exact stability test ----------------------------------------------------------

def test_clustered_game_cluster_partition_is_stable():
    rng = np.random.default_rng(4)
    inst, _, P = make_clustered_game(2, rng)
    oracle = ValueOracle.from_instance(inst)
    res = is_dc_stable(oracle, P, inst.n_users)
    assert res.is_stable


def test_two_cluster_network_partition_unstable_but_split_resistant():
    # the cluster split beats the grand coalition (the straddling inequality
    # holds for S = N), yet the partition is not stable: users 1 and 2 are
    # better off alone than sharing one slow download
    inst = two_cluster_empty_core_instance()
    oracle = ValueOracle.from_instance(inst)
    P = Partition.of([[1, 2, 3], [4, 5, 6]], 6)
    pieces = sum(oracle.value(b) for b in P)
    assert pieces >= oracle.value_mask(63) + 1e-9  # -1 vs -5
    res = is_dc_stable(oracle, P, 6)
    assert res.verdict == "unstable"
    assert isinstance(res.witness, Collection)
    members = {c.members for c in res.witness}
    assert members == {(1,), (2,)}


def test_additive_game_every_partition_stable_never_strict():
    rng = np.random.default_rng(5)
    oracle = additive_oracle(5, [1, 2, 3, 4, 5])
    for _ in range(5):
        P = random_partition(rng, 5)
        res = is_dc_stable(oracle, P, 5)
        assert res.verdict == "stable"


def test_stability_cap():
    with pytest.raises(ValueError):
        is_dc_stable(additive_oracle(13), Partition.singletons(13), 13)


# -- sufficient conditions ----------------------------------------------------------

def reference_symmetry(n_clusters=4, intra=0.2, inter_tx=1.5, inter_rx=1.5, bs=1.0):
    nc = n_clusters
    pair = np.full((nc, nc), 1.0)
    return ClusterSymmetry(
        bs_rate=np.ones(nc), bs_rx_power=np.full(nc, bs),
        intra_rate=np.ones(nc), intra_tx_power=np.full(nc, intra / 2),
        intra_rx_power=np.full(nc, intra / 2),
        pair_rate=pair, pair_tx_power=np.full((nc, nc), inter_tx),
        pair_rx_power=np.full((nc, nc), inter_rx))


def test_cluster_conditions_reference_construction_holds():
    sym = reference_symmetry()
    P = Partition.of([[1, 2], [3, 4], [5, 6], [7, 8]], 8)
    rep = check_cluster_stability_conditions(sym, P)
    assert rep.holds
    m1, m2, m3 = rep.margins
    assert m1 <= 0 and m2 <= 0 and m3 > 0
    # agreement with the exact check on a matching 8-user game
    rng = np.random.default_rng(11)
    inst, sym2, P2 = make_clustered_game(2, rng)
    assert check_cluster_stability_conditions(sym2, P2).holds
    oracle = ValueOracle.from_instance(inst)
    assert is_dc_stable(oracle, P2, 8).is_stable


def test_cluster_conditions_fail_when_intra_d2d_costly():
    sym = reference_symmetry(intra=1.0)  # as costly as the BS link
    P = Partition.of([[1], [2], [3], [4]], 4)
    rep = check_cluster_stability_conditions(sym, P)
    assert not rep.holds
    assert rep.margins[2] <= 0


def test_cluster_conditions_single_cluster_vacuous_first_condition():
    sym = reference_symmetry(n_clusters=1)
    P = Partition.of([[1, 2, 3]], 3)
    rep = check_cluster_stability_conditions(sym, P)
    assert rep.margins[0] == float("-inf")
    assert rep.holds  # conditions 2 and 3 decide alone


def test_cluster_symmetry_validates_pair_symmetry():
    pair = np.array([[1.0, 2.0], [3.0, 1.0]])
    with pytest.raises(ValueError):
        ClusterSymmetry(bs_rate=[1, 1], bs_rx_power=[1, 1], intra_rate=[1, 1],
                        intra_tx_power=[1, 1], intra_rx_power=[1, 1],
                        pair_rate=pair, pair_tx_power=np.ones((2, 2)),
                        pair_rx_power=np.ones((2, 2)))


def test_extremal_energies_orientation():
    sym = reference_symmetry()
    ee = extremal_energies(sym)
    assert ee.bs_min <= ee.bs_max
    assert ee.intra_pair_max == pytest.approx(0.2)
    assert ee.inter_rx_min == pytest.approx(1.5)


# -- merge and split -----------------------------------------------------------------

def test_merge_and_split_converges_to_clusters_from_singletons():
    rng = np.random.default_rng(21)
    inst, _, P = make_clustered_game(2, rng)
    oracle = ValueOracle.from_instance(inst)
    res = merge_and_split(oracle, inst.n_users)
    assert res.partition == P
    assert all(op.op == "merge" for op in res.log)
    assert len(res.log) == inst.n_users - len(P)


def test_merge_and_split_additive_game_is_a_fixed_point():
    rng = np.random.default_rng(31)
    oracle = additive_oracle(6)
    P = random_partition(rng, 6)
    res = merge_and_split(oracle, 6, initial=P)
    assert res.partition == P
    assert res.log == ()


def test_merge_and_split_log_strictly_improving():
    rng = np.random.default_rng(41)
    inst, _, _ = make_clustered_game(2, rng)
    oracle = ValueOracle.from_instance(inst)
    res = merge_and_split(oracle, inst.n_users)
    assert all(op.delta_v > 1e-9 for op in res.log)
    # replaying the log reproduces the final value
    start = partition_value(oracle, Partition.singletons(inst.n_users))
    assert start + sum(op.delta_v for op in res.log) == pytest.approx(
        partition_value(oracle, res.partition), rel=1e-9)


def test_strictly_stable_partition_reached_from_random_starts():
    rng = np.random.default_rng(51)
    inst, _, P = make_clustered_game(2, rng, demand_mode="shared")
    oracle = ValueOracle.from_instance(inst)
    assert is_dc_stable(oracle, P, inst.n_users).verdict == "strictly-stable"
    for _ in range(10):
        start = random_partition(rng, inst.n_users)
        res = merge_and_split(oracle, inst.n_users, initial=start)
        assert res.partition == P


def test_merge_and_split_matches_partition_enumeration_value():
    rng = np.random.default_rng(61)
    for demand_mode in ("per-cluster", "shared"):
        inst, _, P = make_clustered_game(2, rng, demand_mode=demand_mode)
        oracle = ValueOracle.from_instance(inst)
        res = merge_and_split(oracle, inst.n_users)
        _, best = enumerate_best_partition(oracle, inst.n_users)
        assert partition_value(oracle, res.partition) == pytest.approx(best, abs=1e-9)


def test_stable_partition_attains_enumeration_maximum():
    rng = np.random.default_rng(71)
    inst, _, P = make_clustered_game(2, rng)
    oracle = ValueOracle.from_instance(inst)
    assert is_dc_stable(oracle, P, 8).is_stable
    _, best = enumerate_best_partition(oracle, 8)
    assert partition_value(oracle, P) == pytest.approx(best, abs=1e-9)


def test_oplog_serializes_to_json_lines():
    rng = np.random.default_rng(81)
    inst, _, _ = make_clustered_game(2, rng)
    oracle = ValueOracle.from_instance(inst)
    res = merge_and_split(oracle, inst.n_users)
    lines = oplog_to_jsonl(res.log).splitlines()
    assert len(lines) == len(res.log)
    for line in lines:
        doc = json.loads(line)
        assert set(doc) == {"op", "blocks_before", "blocks_after", "delta_v"}


# -- exhaustive enumeration -----------------------------------------------------------

def test_enumerate_single_user():
    oracle = additive_oracle(1)
    P, v = enumerate_best_partition(oracle, 1)
    assert P.blocks == (Coalition.of([1]),) and v == 1.0


def test_enumerate_two_users_picks_better_side():
    merge_wins = ValueOracle.from_table(2, {0: 0.0, 1: 1.0, 2: 1.0, 3: 3.0})
    P, v = enumerate_best_partition(merge_wins, 2)
    assert len(P) == 1 and v == 3.0
    split_wins = ValueOracle.from_table(2, {0: 0.0, 1: 2.0, 2: 2.0, 3: 3.0})
    P, v = enumerate_best_partition(split_wins, 2)
    assert len(P) == 2 and v == 4.0


def test_enumerate_matches_plain_enumeration_on_random_games():
    rng = np.random.default_rng(91)
    for _ in range(5):
        n = 6
        table = {0: 0.0}
        for mask in range(1, 1 << n):
            table[mask] = float(rng.normal())
        oracle = ValueOracle.from_table(n, table)
        _, fast = enumerate_best_partition(oracle, n)
        brute = max(sum(table[Coalition.of(b).mask] for b in part)
                    for part in all_partitions(range(1, n + 1)))
        assert fast == pytest.approx(brute, abs=1e-12)


def test_enumerate_cap():
    with pytest.raises(ValueError):
        enumerate_best_partition(additive_oracle(11), 11)
