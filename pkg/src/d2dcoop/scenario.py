"""Physical scenario generation: cell geometry, channel draws, demands.

Instances are produced from a seeded config: user positions in a hexagonal
cell (uniform, or grouped in equal-size clusters on a ring), per-link rates
from a log-distance path-loss model with lognormal shadowing and Rayleigh
fading over AWGN, Zipf-distributed file requests, and the fixed consumption
powers of the hardware.  Given (config, seed) the generated instance is
byte-identical across runs; the RNG draw order is positions, channel,
demands, file sizes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .model import Coalition, NetworkInstance
from .stability import ClusterSymmetry, Partition

RATE_FLOOR = 1e-9  # bits/s; keeps deeply faded links positive


@dataclass(frozen=True)
class ChannelParams:
    """Propagation and radio constants (consumption powers in mW)."""

    noise_psd_dbm_hz: float = -174.0
    shadow_sigma_db: float = 8.0
    path_loss_exponent: float = 3.3
    # reference loss at 1 m; calibrated so that proximity D2D transfers are
    # clearly cheaper per bit than cell-scale BS downloads (NLOS-like clutter)
    ref_loss_db_at_1m: float = 60.0
    bs_tx_dbm: float = 40.0
    d2d_tx_mw: float = 350.0
    relay_rx_mw: float = 250.0
    d2d_rx_mw: float = 200.0
    bandwidth_hz: float = 10e6


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to generate one network instance."""

    n_users: int = 8
    n_files: int = 50
    zipf_exponent: float = 0.5
    cell_radius_m: float = 300.0
    layout: str = "clustered"  # "clustered" | "random"
    n_clusters: int = 4
    cluster_radius_m: float = 60.0
    center_distance_m: float = 200.0
    file_size_range_bits: tuple[float, float] = (1e6, 10e6)
    requester_fraction: float = 1.0
    energy_budget_j: float = 1e6
    idealized: bool = False
    channel: ChannelParams = field(default_factory=ChannelParams)
    seed: int = 0

    def __post_init__(self):
        if self.cell_radius_m <= 0 or self.cluster_radius_m <= 0:
            raise ValueError("radii must be positive")
        if self.n_files < 1 or self.n_users < 1:
            raise ValueError("need at least one user and one file")
        if self.zipf_exponent < 0:
            raise ValueError("Zipf exponent must be non-negative")
        if self.layout not in ("clustered", "random"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if not 0.0 <= self.requester_fraction <= 1.0:
            raise ValueError("requester fraction must be in [0, 1]")
        if self.layout == "clustered":
            for c in _cluster_centers(self):
                if not point_in_hexagon(c[0], c[1], self.cell_radius_m):
                    raise ValueError("cluster centers must lie inside the cell")

    def replace(self, **kw) -> "ScenarioConfig":
        doc = self.to_dict()
        doc.update(kw)
        return ScenarioConfig.from_dict(doc)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["file_size_range_bits"] = list(self.file_size_range_bits)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        doc = dict(doc)
        if "channel" in doc and isinstance(doc["channel"], dict):
            doc["channel"] = ChannelParams(**doc["channel"])
        if "file_size_range_bits" in doc:
            doc["file_size_range_bits"] = tuple(doc["file_size_range_bits"])
        return cls(**doc)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# -- geometry ------------------------------------------------------------------

def point_in_hexagon(x: float, y: float, circumradius: float) -> bool:
    """Membership test for a flat-top regular hexagon centred at the origin."""
    s3 = math.sqrt(3.0)
    r = circumradius
    return abs(y) <= s3 * r / 2 + 1e-12 and s3 * abs(x) + abs(y) <= s3 * r + 1e-9


def _cluster_centers(cfg: ScenarioConfig) -> np.ndarray:
    angles = 2 * np.pi * np.arange(cfg.n_clusters) / cfg.n_clusters
    return cfg.center_distance_m * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def sample_positions(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """User coordinates in metres, BS at the origin.

    Random layout: uniform over the hexagonal cell by rejection.  Clustered
    layout: users split equally over the clusters (enforced) and placed
    uniformly in each cluster disk, cluster-major order.
    """
    if cfg.layout == "random":
        pos = np.empty((cfg.n_users, 2))
        r = cfg.cell_radius_m
        for i in range(cfg.n_users):
            while True:
                x = rng.uniform(-r, r)
                y = rng.uniform(-math.sqrt(3) * r / 2, math.sqrt(3) * r / 2)
                if point_in_hexagon(x, y, r):
                    pos[i] = (x, y)
                    break
        return pos
    if cfg.n_users % cfg.n_clusters:
        raise ValueError("user count must be divisible by the cluster count")
    per = cfg.n_users // cfg.n_clusters
    centers = _cluster_centers(cfg)
    pos = np.empty((cfg.n_users, 2))
    for k in range(cfg.n_clusters):
        for u in range(per):
            rad = cfg.cluster_radius_m * math.sqrt(rng.random())
            theta = rng.uniform(0, 2 * np.pi)
            pos[k * per + u] = centers[k] + rad * np.array([math.cos(theta), math.sin(theta)])
    return pos


def cluster_partition(cfg: ScenarioConfig) -> Partition:
    """The cluster blocks of a clustered config (cluster-major user ids)."""
    if cfg.layout != "clustered":
        raise ValueError("cluster partition only exists for clustered layouts")
    per = cfg.n_users // cfg.n_clusters
    blocks = [Coalition.of(range(k * per + 1, (k + 1) * per + 1))
              for k in range(cfg.n_clusters)]
    return Partition(tuple(blocks), cfg.n_users)


# -- channel -------------------------------------------------------------------

def path_loss_db(ch: ChannelParams, distance_m: float) -> float:
    """Deterministic log-distance loss; distances below 1 m are clamped."""
    d = max(float(distance_m), 1.0)
    return ch.ref_loss_db_at_1m + 10.0 * ch.path_loss_exponent * math.log10(d)


def shannon_rate(ch: ChannelParams, tx_power_w: float, total_loss_db: float,
                 fading: float = 1.0) -> float:
    """AWGN capacity over the configured bandwidth for one link."""
    noise_w = 10 ** ((ch.noise_psd_dbm_hz - 30.0) / 10.0) * ch.bandwidth_hz
    prx = tx_power_w * 10 ** (-total_loss_db / 10.0) * fading
    return max(ch.bandwidth_hz * math.log2(1.0 + prx / noise_w), RATE_FLOOR)


@dataclass(frozen=True)
class ChannelDraw:
    """One seeded channel realization: geometry, loss terms, and the rates."""

    positions: np.ndarray        # (N, 2) metres
    bs_pathloss_db: np.ndarray   # (N,)
    bs_shadow_db: np.ndarray
    bs_fading: np.ndarray        # linear power gains, unit mean
    d2d_pathloss_db: np.ndarray  # (N, N)
    d2d_shadow_db: np.ndarray
    d2d_fading: np.ndarray
    bs_rate: np.ndarray          # (N,) bits/s
    d2d_rate: np.ndarray         # (N, N) bits/s


def realize_rates(cfg: ScenarioConfig, positions: np.ndarray,
                  rng: np.random.Generator) -> ChannelDraw:
    """Draw shadowing and per-direction Rayleigh fading, then map SNR to
    Shannon rates.  Idealized configs replace every link by its deterministic
    cluster-geometry counterpart (no shadowing, no fading), which makes all
    intra-cluster and cluster-pair links exactly symmetric."""
    n = cfg.n_users
    ch = cfg.channel
    bs_tx_w = 10 ** ((ch.bs_tx_dbm - 30.0) / 10.0)
    d2d_tx_w = ch.d2d_tx_mw / 1000.0

    if cfg.idealized:
        if cfg.layout != "clustered":
            raise ValueError("idealized mode requires the clustered layout")
        per = n // cfg.n_clusters
        centers = _cluster_centers(cfg)
        cluster = np.repeat(np.arange(cfg.n_clusters), per)
        bs_d = np.array([np.linalg.norm(centers[cluster[i]]) for i in range(n)])
        d2d_d = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                if cluster[i] == cluster[j]:
                    d2d_d[i, j] = cfg.cluster_radius_m
                else:
                    d2d_d[i, j] = np.linalg.norm(centers[cluster[i]] - centers[cluster[j]])
        bs_pl = np.array([path_loss_db(ch, d) for d in bs_d])
        d2d_pl = np.vectorize(lambda d: path_loss_db(ch, d))(d2d_d)
        bs_shadow = np.zeros(n)
        d2d_shadow = np.zeros((n, n))
        bs_fade = np.ones(n)
        d2d_fade = np.ones((n, n))
    else:
        bs_d = np.linalg.norm(positions, axis=1)
        diff = positions[:, None, :] - positions[None, :, :]
        d2d_d = np.linalg.norm(diff, axis=2)
        bs_pl = np.array([path_loss_db(ch, d) for d in bs_d])
        d2d_pl = np.vectorize(lambda d: path_loss_db(ch, d))(d2d_d)
        bs_shadow = rng.normal(0.0, ch.shadow_sigma_db, size=n)
        d2d_shadow = rng.normal(0.0, ch.shadow_sigma_db, size=(n, n))
        bs_fade = rng.exponential(1.0, size=n)
        d2d_fade = rng.exponential(1.0, size=(n, n))

    bs_rate = np.array([shannon_rate(ch, bs_tx_w, bs_pl[i] + bs_shadow[i], bs_fade[i])
                        for i in range(n)])
    d2d_rate = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                d2d_rate[i, j] = RATE_FLOOR  # diagonal unused
            else:
                d2d_rate[i, j] = shannon_rate(ch, d2d_tx_w,
                                              d2d_pl[i, j] + d2d_shadow[i, j],
                                              d2d_fade[i, j])
    return ChannelDraw(positions, bs_pl, bs_shadow, bs_fade,
                       d2d_pl, d2d_shadow, d2d_fade, bs_rate, d2d_rate)


# -- demand --------------------------------------------------------------------

def zipf_probabilities(n_files: int, exponent: float) -> np.ndarray:
    """p_i proportional to (1/i)^exponent over file ids 1..M."""
    weights = (1.0 / np.arange(1, n_files + 1)) ** exponent
    return weights / weights.sum()


def sample_demands(cfg: ScenarioConfig, rng: np.random.Generator):
    """Zipf-sampled one-file-per-user requests.

    Each user is a requester with probability `requester_fraction` (1.0 by
    default: every user requests).  Returns the 0/1 demand matrix and the
    popularity order (file ids, most popular first).
    """
    p = zipf_probabilities(cfg.n_files, cfg.zipf_exponent)
    cum = np.cumsum(p)
    demand = np.zeros((cfg.n_users, cfg.n_files), dtype=int)
    for i in range(cfg.n_users):
        if cfg.requester_fraction < 1.0 and rng.random() >= cfg.requester_fraction:
            continue
        m = int(np.searchsorted(cum, rng.random(), side="right"))
        demand[i, min(m, cfg.n_files - 1)] = 1
    ranks = tuple(range(1, cfg.n_files + 1))
    return demand, ranks


# -- composition ---------------------------------------------------------------

def build_instance(cfg: ScenarioConfig, rng: np.random.Generator | None = None) -> NetworkInstance:
    """Generate the full instance for a config (seeded and reproducible).

    Consumption powers follow the hardware table: 250 mW while receiving
    from the BS, 350 mW while transmitting on a D2D link, 200 mW while
    receiving on one.  Budgets default to a slack per-user value, valuations
    to zero (the experiments compare energies), and the cost scale to 1.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    n, m = cfg.n_users, cfg.n_files
    positions = sample_positions(cfg, rng)
    draw = realize_rates(cfg, positions, rng)
    demand, _ = sample_demands(cfg, rng)
    lo_mb = max(1, round(cfg.file_size_range_bits[0] / 1e6))
    hi_mb = max(lo_mb, round(cfg.file_size_range_bits[1] / 1e6))
    sizes = rng.integers(lo_mb, hi_mb + 1, size=m) * 1e6
    ch = cfg.channel
    return NetworkInstance(
        n_users=n,
        files=[(k + 1, sizes[k]) for k in range(m)],
        demand=demand,
        bs_rate=draw.bs_rate,
        d2d_rate=draw.d2d_rate,
        bs_rx_power=np.full(n, ch.relay_rx_mw / 1000.0),
        d2d_tx_power=np.full((n, n), ch.d2d_tx_mw / 1000.0),
        d2d_rx_power=np.full((n, n), ch.d2d_rx_mw / 1000.0),
        energy_budget=np.full(n, cfg.energy_budget_j),
        valuation=np.zeros((n, m)),
        cost_coeff=1.0,
    )


def idealized_cluster_symmetry(cfg: ScenarioConfig) -> ClusterSymmetry:
    """Cluster-level link parameters implied by an idealized clustered config
    (exactly the values realize_rates assigns to every user of a cluster)."""
    if not cfg.idealized or cfg.layout != "clustered":
        raise ValueError("cluster symmetry requires an idealized clustered config")
    ch = cfg.channel
    nc = cfg.n_clusters
    centers = _cluster_centers(cfg)
    bs_tx_w = 10 ** ((ch.bs_tx_dbm - 30.0) / 10.0)
    d2d_tx_w = ch.d2d_tx_mw / 1000.0
    bs_rate = np.array([shannon_rate(ch, bs_tx_w, path_loss_db(ch, np.linalg.norm(centers[k])))
                        for k in range(nc)])
    intra_rate = np.full(nc, shannon_rate(ch, d2d_tx_w, path_loss_db(ch, cfg.cluster_radius_m)))
    pair_rate = np.empty((nc, nc))
    for k in range(nc):
        for l in range(nc):
            d = np.linalg.norm(centers[k] - centers[l]) if k != l else cfg.cluster_radius_m
            pair_rate[k, l] = shannon_rate(ch, d2d_tx_w, path_loss_db(ch, d))
    return ClusterSymmetry(
        bs_rate=bs_rate,
        bs_rx_power=np.full(nc, ch.relay_rx_mw / 1000.0),
        intra_rate=intra_rate,
        intra_tx_power=np.full(nc, ch.d2d_tx_mw / 1000.0),
        intra_rx_power=np.full(nc, ch.d2d_rx_mw / 1000.0),
        pair_rate=pair_rate,
        pair_tx_power=np.full((nc, nc), ch.d2d_tx_mw / 1000.0),
        pair_rx_power=np.full((nc, nc), ch.d2d_rx_mw / 1000.0),
    )


def make_clustered_game(users_per_cluster: int, rng: np.random.Generator,
                        n_clusters: int = 4, demand_mode: str = "per-cluster"):
    """Synthetic cluster-symmetric instance engineered to satisfy the three
    sufficient stability conditions for the cluster partition.

    Per-bit BS energy is ~1 per cluster, intra-cluster D2D transfer is an
    order of magnitude cheaper, and inter-cluster D2D is clearly more
    expensive than a BS download.  `demand_mode` picks the request pattern:
    "per-cluster" gives each cluster its own shared file, "shared" makes
    every user request the same file (which renders the cluster partition
    strictly stable).  Returns (instance, symmetry, cluster partition).
    """
    nc, per = n_clusters, users_per_cluster
    n = nc * per
    e_bs = rng.uniform(0.9, 1.1, size=nc)
    intra_rate = np.full(nc, 10.0)
    intra_tx = rng.uniform(0.05, 0.15, size=nc) * intra_rate
    intra_rx = rng.uniform(0.05, 0.15, size=nc) * intra_rate
    pair_rate = np.ones((nc, nc))
    pair_tx = np.zeros((nc, nc))
    pair_rx = np.zeros((nc, nc))
    for k in range(nc):
        for l in range(k + 1, nc):
            pair_tx[k, l] = pair_tx[l, k] = rng.uniform(1.2, 2.0)
            pair_rx[k, l] = pair_rx[l, k] = rng.uniform(1.2, 2.0)
    sym = ClusterSymmetry(
        bs_rate=np.ones(nc), bs_rx_power=e_bs,
        intra_rate=intra_rate, intra_tx_power=intra_tx, intra_rx_power=intra_rx,
        pair_rate=pair_rate, pair_tx_power=pair_tx, pair_rx_power=pair_rx)

    cluster = np.repeat(np.arange(nc), per)
    d2d_rate = np.empty((n, n))
    d2d_tx = np.empty((n, n))
    d2d_rx = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            k, l = cluster[i], cluster[j]
            if k == l:
                d2d_rate[i, j] = intra_rate[k]
                d2d_tx[i, j] = intra_tx[k]
                d2d_rx[i, j] = intra_rx[k]
            else:
                d2d_rate[i, j] = pair_rate[k, l]
                d2d_tx[i, j] = pair_tx[k, l]
                d2d_rx[i, j] = pair_rx[k, l]
    if demand_mode == "per-cluster":
        m = nc
        demand = np.zeros((n, m), dtype=int)
        for i in range(n):
            demand[i, cluster[i]] = 1
    elif demand_mode == "shared":
        m = 1
        demand = np.ones((n, 1), dtype=int)
    else:
        raise ValueError(f"unknown demand mode {demand_mode!r}")
    inst = NetworkInstance(
        n_users=n,
        files=[(k + 1, 1.0) for k in range(m)],
        demand=demand,
        bs_rate=np.ones(n),
        d2d_rate=d2d_rate,
        bs_rx_power=e_bs[cluster],
        d2d_tx_power=d2d_tx,
        d2d_rx_power=d2d_rx,
        energy_budget=np.full(n, 1e6),
        valuation=np.zeros((n, m)),
        cost_coeff=1.0,
    )
    blocks = [Coalition.of(range(k * per + 1, (k + 1) * per + 1)) for k in range(nc)]
    return inst, sym, Partition(tuple(blocks), n)
