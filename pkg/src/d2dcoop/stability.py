"""Partition stability and coalition formation.

A partition is judged against two families of inequalities: every collection
living inside one block must be dominated by its union (within-block
superadditivity, checked over sub-bipartitions, which is equivalent and far
cheaper), and every coalition straddling blocks must be dominated by its
per-block pieces.  When both hold the partition maximizes the total value
over all partitions, and when they hold strictly the pairwise merge /
bipartition split local search below converges to it from any start.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .game import ValueOracle
from .model import Coalition

STRICT_MARGIN = 1e-9


@dataclass(frozen=True)
class Collection:
    """Mutually disjoint coalitions; need not cover all users."""

    coalitions: tuple[Coalition, ...]

    def __post_init__(self):
        blocks = tuple(sorted((c if isinstance(c, Coalition) else Coalition.of(c)
                               for c in self.coalitions),
                              key=lambda c: c.members))
        object.__setattr__(self, "coalitions", blocks)
        union = 0
        for c in blocks:
            if not c.members:
                raise ValueError("empty coalition in collection")
            if union & c.mask:
                raise ValueError("collection coalitions must be disjoint")
            union |= c.mask

    @property
    def union_mask(self) -> int:
        m = 0
        for c in self.coalitions:
            m |= c.mask
        return m

    def __iter__(self):
        return iter(self.coalitions)

    def __len__(self):
        return len(self.coalitions)


@dataclass(frozen=True)
class Partition:
    """Disjoint non-empty blocks covering users 1..n_users."""

    blocks: tuple[Coalition, ...]
    n_users: int

    def __post_init__(self):
        blocks = tuple(sorted((b if isinstance(b, Coalition) else Coalition.of(b)
                               for b in self.blocks),
                              key=lambda b: b.members))
        object.__setattr__(self, "blocks", blocks)
        union = 0
        for b in blocks:
            if not b.members:
                raise ValueError("partition blocks must be non-empty")
            if union & b.mask:
                raise ValueError("partition blocks must be disjoint")
            union |= b.mask
        if union != (1 << self.n_users) - 1:
            raise ValueError("partition blocks must cover users 1..n")

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(tuple(Coalition.of([i]) for i in range(1, n + 1)), n)

    @classmethod
    def of(cls, blocks: Iterable[Iterable[int]], n: int) -> "Partition":
        return cls(tuple(Coalition.of(b) for b in blocks), n)

    def __iter__(self):
        return iter(self.blocks)

    def __len__(self):
        return len(self.blocks)


def partition_value(oracle: ValueOracle, P: Partition) -> float:
    return float(sum(oracle.value_mask(b.mask) for b in P))


def collection_under_partition(S: Collection, P: Partition) -> Collection:
    """Regroup the users of a collection along the blocks of a partition,
    dropping empty intersections."""
    union = S.union_mask
    pieces = [union & b.mask for b in P]
    return Collection(tuple(Coalition.from_mask(m) for m in pieces if m))


@dataclass(frozen=True)
class StabilityVerdict:
    verdict: str  # "stable" | "strictly-stable" | "unstable"
    witness: Collection | Coalition | None = None
    min_margin: float = float("inf")

    @property
    def is_stable(self) -> bool:
        return self.verdict in ("stable", "strictly-stable")


def _submasks(mask: int):
    """Non-empty proper submasks of `mask`."""
    sub = (mask - 1) & mask
    while sub:
        yield sub
        sub = (sub - 1) & mask


def is_dc_stable(oracle: ValueOracle, P: Partition, n: int,
                 tol: float = STRICT_MARGIN) -> StabilityVerdict:
    """Exact stability test for a partition (n capped at 12).

    Returns "unstable" with the first violating collection or straddling
    coalition, "strictly-stable" when every inequality holds with margin
    above `tol`, and "stable" otherwise.
    """
    if n > 12:
        raise ValueError(f"stability check capped at 12 users, got {n}")
    min_margin = float("inf")

    # within-block comparisons: every subset of a block versus each of its
    # bipartitions (chains of these cover every within-block collection)
    for block in P:
        bm = block.mask
        subsets = [bm] + list(_submasks(bm))
        for t in subsets:
            if bin(t).count("1") < 2:
                continue
            anchor = t & -t
            for a in _submasks(t):
                if not a & anchor:
                    continue
                b = t ^ a
                margin = (oracle.value_mask(t)
                          - oracle.value_mask(a) - oracle.value_mask(b))
                if margin < -tol:
                    witness = Collection((Coalition.from_mask(a), Coalition.from_mask(b)))
                    return StabilityVerdict("unstable", witness, margin)
                min_margin = min(min_margin, margin)

    # straddling coalitions versus their per-block pieces
    block_masks = [b.mask for b in P]
    for s in range(1, 1 << n):
        if any(s & bm == s for bm in block_masks):
            continue
        pieces = [s & bm for bm in block_masks if s & bm]
        margin = (sum(oracle.value_mask(p) for p in pieces) - oracle.value_mask(s))
        if margin < -tol:
            return StabilityVerdict("unstable", Coalition.from_mask(s), margin)
        min_margin = min(min_margin, margin)

    verdict = "strictly-stable" if min_margin > tol else "stable"
    return StabilityVerdict(verdict, None, min_margin)


# -- clustered symmetry and the sufficient conditions --------------------------


class ClusterSymmetry:
    """Per-cluster and per-cluster-pair link parameters.

    Users of one cluster share the BS rate/power and the intra-cluster D2D
    rate/powers; every ordered pair of users from clusters (k, l) shares the
    inter-cluster parameters, which must be symmetric in (k, l).
    """

    def __init__(self, bs_rate, bs_rx_power, intra_rate, intra_tx_power,
                 intra_rx_power, pair_rate, pair_tx_power, pair_rx_power):
        self.bs_rate = np.asarray(bs_rate, dtype=float)
        self.bs_rx_power = np.asarray(bs_rx_power, dtype=float)
        self.intra_rate = np.asarray(intra_rate, dtype=float)
        self.intra_tx_power = np.asarray(intra_tx_power, dtype=float)
        self.intra_rx_power = np.asarray(intra_rx_power, dtype=float)
        self.pair_rate = np.asarray(pair_rate, dtype=float)
        self.pair_tx_power = np.asarray(pair_tx_power, dtype=float)
        self.pair_rx_power = np.asarray(pair_rx_power, dtype=float)
        n = self.bs_rate.size
        for name in ("pair_rate", "pair_tx_power", "pair_rx_power"):
            a = getattr(self, name)
            if a.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
            if not np.allclose(a, a.T):
                raise ValueError(f"{name} must be symmetric across cluster pairs")
        if (self.bs_rate <= 0).any() or (self.intra_rate <= 0).any():
            raise ValueError("rates must be positive")
        off = ~np.eye(n, dtype=bool)
        if n > 1 and (self.pair_rate[off] <= 0).any():
            raise ValueError("rates must be positive")

    @property
    def n_clusters(self) -> int:
        return self.bs_rate.size


@dataclass(frozen=True)
class ExtremalEnergies:
    """Per-bit energy extremes used by the sufficient stability conditions."""

    bs_min: float
    bs_max: float
    inter_tx_min: float
    inter_rx_min: float
    intra_pair_max: float


def extremal_energies(sym: ClusterSymmetry) -> ExtremalEnergies:
    n = sym.n_clusters
    e_bs = sym.bs_rx_power / sym.bs_rate
    intra = (sym.intra_rx_power + sym.intra_tx_power) / sym.intra_rate
    if n > 1:
        off = ~np.eye(n, dtype=bool)
        tx_min = float((sym.pair_tx_power[off] / sym.pair_rate[off]).min())
        rx_min = float((sym.pair_rx_power[off] / sym.pair_rate[off]).min())
    else:
        tx_min = rx_min = float("inf")
    ee = ExtremalEnergies(float(e_bs.min()), float(e_bs.max()),
                          tx_min, rx_min, float(intra.max()))
    if ee.bs_min > ee.bs_max:
        raise ValueError("inconsistent extremal energies")
    return ee


@dataclass(frozen=True)
class ClusterConditionsReport:
    holds: bool
    margins: tuple[float, float, float]  # LHS - RHS per condition


def check_cluster_stability_conditions(sym: ClusterSymmetry, P: Partition) -> ClusterConditionsReport:
    """Evaluate the three sufficient conditions for the cluster partition to
    be stable.  Margins are LHS - RHS; conditions 1 and 2 hold when their
    margin is <= 0; condition 3 holds when its margin is > 0."""
    if sym.n_clusters != len(P):
        raise ValueError("symmetry data and partition disagree on cluster count")
    ee = extremal_energies(sym)
    n = sym.n_clusters
    margin1 = float("-inf")
    for k in range(2, n + 1):
        rhs = ee.bs_min / k + ee.inter_tx_min / k + (k - 1) / k * ee.inter_rx_min
        margin1 = max(margin1, ee.bs_max - rhs)
    margin2 = ee.intra_pair_max - ee.inter_rx_min
    e_bs = sym.bs_rx_power / sym.bs_rate
    intra = (sym.intra_rx_power + sym.intra_tx_power) / sym.intra_rate
    margin3 = float(e_bs.min() - intra.max())
    eps = 1e-12
    holds = margin1 <= eps and margin2 <= eps and margin3 > eps
    return ClusterConditionsReport(holds, (margin1, margin2, margin3))


# -- merge and split -----------------------------------------------------------


@dataclass(frozen=True)
class MergeSplitOp:
    op: str  # "merge" | "split"
    blocks_before: tuple[Coalition, ...]
    blocks_after: tuple[Coalition, ...]
    delta_v: float


@dataclass(frozen=True)
class MergeSplitResult:
    partition: Partition
    log: tuple[MergeSplitOp, ...]

    def value(self, oracle: ValueOracle) -> float:
        return partition_value(oracle, self.partition)


def oplog_to_jsonl(log: Iterable[MergeSplitOp]) -> str:
    lines = []
    for op in log:
        lines.append(json.dumps({
            "op": op.op,
            "blocks_before": [list(c.members) for c in op.blocks_before],
            "blocks_after": [list(c.members) for c in op.blocks_after],
            "delta_v": op.delta_v,
        }, sort_keys=True))
    return "\n".join(lines)


def merge_and_split(oracle: ValueOracle, n: int,
                    initial: Partition | None = None,
                    tol: float = STRICT_MARGIN) -> MergeSplitResult:
    """Local search over partitions: strictly improving pairwise merges,
    then strictly improving bipartition splits, swept in lexicographic
    (smallest member) order until neither applies.

    Every operation raises the total value by more than `tol`, so the run
    terminates; the log records each operation and its value gain.
    """
    if n > 20:
        raise ValueError(f"merge-and-split capped at 20 users, got {n}")
    blocks = list((initial or Partition.singletons(n)).blocks)
    log: list[MergeSplitOp] = []

    def val(mask: int) -> float:
        return oracle.value_mask(mask)

    while True:
        blocks.sort(key=lambda b: b.members)
        changed = False
        # merge sweep
        for ai in range(len(blocks)):
            for bi in range(ai + 1, len(blocks)):
                a, b = blocks[ai], blocks[bi]
                merged = Coalition.from_mask(a.mask | b.mask)
                delta = val(merged.mask) - val(a.mask) - val(b.mask)
                if delta > tol:
                    log.append(MergeSplitOp("merge", (a, b), (merged,), delta))
                    blocks = [blk for k, blk in enumerate(blocks) if k not in (ai, bi)]
                    blocks.append(merged)
                    changed = True
                    break
            if changed:
                break
        if changed:
            continue
        # split sweep
        for bi, block in enumerate(blocks):
            if len(block) < 2:
                continue
            bm = block.mask
            anchor = bm & -bm
            found = None
            for a in sorted(_submasks(bm)):
                if not a & anchor:
                    continue
                b = bm ^ a
                delta = val(a) + val(b) - val(bm)
                if delta > tol:
                    found = (a, b, delta)
                    break
            if found:
                a, b, delta = found
                parts = (Coalition.from_mask(a), Coalition.from_mask(b))
                log.append(MergeSplitOp("split", (block,), parts, delta))
                blocks = [blk for k, blk in enumerate(blocks) if k != bi]
                blocks.extend(parts)
                changed = True
                break
        if not changed:
            break

    return MergeSplitResult(Partition(tuple(blocks), n), tuple(log))


def enumerate_best_partition(oracle: ValueOracle, n: int) -> tuple[Partition, float]:
    """Exhaustive maximum of the total block value over all partitions of
    1..n (n capped at 10), via memoized recursion anchored at the lowest
    remaining user."""
    if n > 10:
        raise ValueError(f"partition enumeration capped at 10 users, got {n}")
    full = (1 << n) - 1
    best_val: dict[int, float] = {0: 0.0}
    best_choice: dict[int, int] = {}

    def solve(mask: int) -> float:
        if mask in best_val:
            return best_val[mask]
        anchor = mask & -mask
        best = float("-inf")
        pick = mask
        rest = mask ^ anchor
        sub = rest
        while True:  # all subsets of mask containing the anchor
            block = sub | anchor
            cand = oracle.value_mask(block) + solve(mask ^ block)
            if cand > best:
                best, pick = cand, block
            if sub == 0:
                break
            sub = (sub - 1) & rest
        best_val[mask] = best
        best_choice[mask] = pick
        return best

    total = solve(full)
    blocks = []
    mask = full
    while mask:
        block = best_choice[mask]
        blocks.append(Coalition.from_mask(block))
        mask ^= block
    return Partition(tuple(blocks), n), float(total)
