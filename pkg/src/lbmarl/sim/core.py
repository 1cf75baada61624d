"""Network state and the per-step simulation operations.

Byte counters are int64 throughout so that generated, pending and delivered
traffic balance exactly. Operations mutate the state they are given (single
writer) and return it for chaining.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from .scenario import TrafficScenario
from .topology import CHANNELS_PER_SECTOR, NetworkTopology, build_topology

BITS_PER_BYTE = 8
MBIT = 1_000_000

AULB_RANGE_DB = 2.0
IULB_RANGE_DB = 20.0


@dataclass(frozen=True)
class SimParams:
    """Physical-layer abstraction and mechanism constants."""

    tx_snr_db: float = 40.0  # SNR at the reference distance on the reference carrier
    reference_distance: float = 10.0  # m
    min_distance: float = 10.0  # m; closer UEs are treated as sitting at this range
    pathloss_exponent: float = 3.5
    reference_frequency_ghz: float = 2.0
    aulb_base_margin: float = 1.0  # active UEs
    aulb_min_capacity_ratio: float = 0.5  # target must offer this share of the serving capacity
    iulb_base_priority: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    mode_flip_prob: float = 0.1  # per-step active -> idle probability
    packet_size_cap: float = 10.0  # truncation, multiples of the mean size

    def channel_capacity(self, distance, bandwidth_mhz, frequency_ghz):
        """Single-user capacity in Mbit/s of a carrier at ``distance`` meters.

        SNR_dB = tx_snr_db - 10 n log10(d / d_ref) - 20 log10(f / f_ref)
        capacity = bandwidth_MHz * log2(1 + SNR)
        """
        d = np.maximum(np.asarray(distance, dtype=float), self.min_distance)
        snr_db = (self.tx_snr_db
                  - 10.0 * self.pathloss_exponent * np.log10(d / self.reference_distance)
                  - 20.0 * np.log10(np.asarray(frequency_ghz, dtype=float) / self.reference_frequency_ghz))
        return np.asarray(bandwidth_mhz, dtype=float) * np.log2(1.0 + 10.0 ** (snr_db / 10.0))


@dataclass
class LBParameters:
    """Per-BS AULB offsets ``alpha`` and IULB offsets ``beta``/``gamma`` in dB, each (n_bs, 4)."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.alpha = np.array(self.alpha, dtype=float, ndmin=2)
        self.beta = np.array(self.beta, dtype=float, ndmin=2)
        self.gamma = np.array(self.gamma, dtype=float, ndmin=2)
        for name, arr, bound in (("alpha", self.alpha, AULB_RANGE_DB),
                                 ("beta", self.beta, IULB_RANGE_DB),
                                 ("gamma", self.gamma, IULB_RANGE_DB)):
            if arr.ndim != 2 or arr.shape[1] != CHANNELS_PER_SECTOR:
                raise ContractError(f"{name} must have shape (n_bs, {CHANNELS_PER_SECTOR}), got {arr.shape}")
            if not (np.abs(arr) <= bound).all():  # also rejects NaN
                raise ContractError(f"{name} outside [-{bound:g}, +{bound:g}] dB")
        if not (self.alpha.shape == self.beta.shape == self.gamma.shape):
            raise ContractError("alpha, beta and gamma must cover the same base stations")

    @property
    def n_bs(self) -> int:
        return self.alpha.shape[0]

    @classmethod
    def neutral(cls, n_bs: int) -> "LBParameters":
        z = np.zeros((n_bs, CHANNELS_PER_SECTOR))
        return cls(z, z.copy(), z.copy())


@dataclass(frozen=True)
class UserEquipment:
    id: int
    position: tuple[float, float]
    mode: str  # "active" | "idle"
    serving_channel: int
    velocity: tuple[float, float]
    pending_bytes: int


@dataclass(frozen=True)
class ChannelState:
    channel_id: int
    attached_ues: frozenset
    load: int
    n_active: int
    bandwidth_utilization: float
    delivered_ledger: dict


@dataclass
class NetworkState:
    topology: NetworkTopology
    scenario: TrafficScenario
    params: SimParams
    pos: np.ndarray
    velocity: np.ndarray
    active: np.ndarray
    channel: np.ndarray
    next_arrival: np.ndarray  # ms until the next packet of each active UE
    pending: np.ndarray = None
    delivered: np.ndarray = None  # cumulative
    generated: np.ndarray = None
    window: np.ndarray = None  # delivered within the current measurement window
    arrivals: np.ndarray = None
    utilization: np.ndarray = None  # per channel, last step
    lb_enabled: bool = True
    time_ms: float = 0.0
    steps: int = 0
    handoffs: int = 0  # cumulative AULB handoffs
    step_handoffs: int = 0
    mobility_handoffs: int = 0
    window_ms: float = field(default=0.0)
    _geom: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.pos)
        for name in ("pending", "delivered", "generated", "window", "arrivals"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(n, dtype=np.int64))
        if self.utilization is None:
            self.utilization = np.zeros(self.topology.n_channels)

    @property
    def n_ues(self) -> int:
        return len(self.pos)

    def channel_load(self) -> np.ndarray:
        return np.bincount(self.channel, minlength=self.topology.n_channels)

    def active_load(self) -> np.ndarray:
        return np.bincount(self.channel[self.active], minlength=self.topology.n_channels)

    def ue_bs(self) -> np.ndarray:
        return self.topology.channel_bs[self.channel]

    def user_equipment(self, uid: int) -> UserEquipment:
        return UserEquipment(
            id=int(uid), position=tuple(self.pos[uid]),
            mode="active" if self.active[uid] else "idle",
            serving_channel=int(self.channel[uid]),
            velocity=tuple(self.velocity[uid]),
            pending_bytes=int(self.pending[uid]))

    def channel_state(self, cid: int) -> ChannelState:
        members = np.flatnonzero(self.channel == cid)
        return ChannelState(
            channel_id=int(cid), attached_ues=frozenset(int(u) for u in members),
            load=len(members), n_active=int(np.count_nonzero(self.active[members])),
            bandwidth_utilization=float(self.utilization[cid]),
            delivered_ledger={int(u): int(self.window[u]) for u in members})

    def copy(self) -> "NetworkState":
        clone = NetworkState(**{f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.init})
        for k, v in vars(clone).items():
            if isinstance(v, np.ndarray):
                setattr(clone, k, v.copy())
        return clone


@dataclass(frozen=True)
class Geometry:
    """Per-position quantities shared by the mechanisms within one step."""

    dist: np.ndarray  # (n_ue, n_bs)
    home_bs: np.ndarray
    home_sec: np.ndarray
    alt_bs: np.ndarray  # -1 for a single-site network
    alt_sec: np.ndarray
    capacity: np.ndarray  # (n_ue, n_channels) single-user Mbit/s


def geometry(state: NetworkState) -> Geometry:
    """Geometry of the current UE positions, recomputed only when positions change."""
    key = state.pos.tobytes()
    if state._geom is not None and state._geom[0] == key:
        return state._geom[1]
    topo = state.topology
    dist, sector = topo.ue_geometry(state.pos)
    order = np.argsort(dist, axis=1, kind="stable")
    rows = np.arange(state.n_ues)
    home_bs = order[:, 0]
    home_sec = sector[rows, home_bs]
    if topo.n_bs > 1:
        alt_bs = order[:, 1]
        alt_sec = sector[rows, alt_bs]
    else:
        alt_bs = np.full(state.n_ues, -1)
        alt_sec = np.full(state.n_ues, -1)
    bw = np.array([c.bandwidth_mhz for c in topo.carriers])
    freq = np.array([c.frequency_ghz for c in topo.carriers])
    per_carrier = state.params.channel_capacity(dist[:, :, None], bw, freq)  # (n, n_bs, 4)
    geo = Geometry(dist, home_bs, home_sec, alt_bs, alt_sec,
                   per_carrier[:, topo.channel_bs, topo.channel_carrier])
    state._geom = (key, geo)
    return geo


def home_sectors(state: NetworkState):
    """Best and second-best serving sector of each UE as (bs, sector) arrays.

    The best sector belongs to the nearest BS; the second is the facing sector
    of the next-nearest BS (-1 when the network has a single site).
    """
    g = geometry(state)
    return g.home_bs, g.home_sec, g.alt_bs, g.alt_sec


def init_state(topology: NetworkTopology, scenario: TrafficScenario, rng: np.random.Generator,
               params: SimParams | None = None, lb_enabled: bool = True) -> NetworkState:
    """UEs uniformly over the world, first ``active_ues`` active, camped on a uniform carrier of their home sector."""
    params = params or SimParams()
    n = scenario.total_ues
    xmin, xmax, ymin, ymax = topology.world_extent
    pos = np.column_stack([rng.uniform(xmin, xmax, n), rng.uniform(ymin, ymax, n)])
    active = np.zeros(n, dtype=bool)
    active[:scenario.active_ues] = True
    state = NetworkState(topology=topology, scenario=scenario, params=params, pos=pos,
                         velocity=np.zeros((n, 2)), active=active,
                         channel=np.zeros(n, dtype=np.int64),
                         next_arrival=rng.exponential(scenario.mean_interarrival, n),
                         lb_enabled=lb_enabled)
    home_bs, home_sec, _, _ = home_sectors(state)
    carrier = rng.integers(0, CHANNELS_PER_SECTOR, n)
    state.channel = topology.channel_id(home_bs, home_sec, carrier).astype(np.int64)
    return state


def transition_modes(state: NetworkState, rng: np.random.Generator) -> NetworkState:
    """Flip UE modes so the stationary active/idle split matches the scenario counts."""
    sc = state.scenario
    p_off = state.params.mode_flip_prob
    p_on = p_off * sc.active_ues / sc.idle_ues if sc.idle_ues else 0.0
    u = rng.random(state.n_ues)
    go_idle = state.active & (u < p_off)
    go_active = ~state.active & (u < p_on)
    state.active = (state.active & ~go_idle) | go_active
    if go_active.any():
        state.next_arrival[go_active] = rng.exponential(sc.mean_interarrival, int(go_active.sum()))
    return state


def move_ues(state: NetworkState, dt: float, rng: np.random.Generator) -> NetworkState:
    """Random-walk step: uniform heading, speed uniform on [0, 2 * mean_speed], toroidal wrap.

    UEs whose serving sector is no longer one of their two best sectors are
    re-attached to the same carrier of their home sector.
    """
    if not dt > 0:
        raise ContractError(f"dt must be positive, got {dt}")
    n = state.n_ues
    if n == 0:
        return state
    heading = rng.uniform(0.0, 2.0 * np.pi, n)
    speed = rng.uniform(0.0, 2.0 * state.scenario.mean_speed, n)
    state.velocity = np.column_stack([speed * np.cos(heading), speed * np.sin(heading)])
    state.pos = state.topology.wrap(state.pos + state.velocity * (dt / 1000.0))

    topo = state.topology
    home_bs, home_sec, alt_bs, alt_sec = home_sectors(state)
    cur_bs = topo.channel_bs[state.channel]
    cur_sec = topo.channel_sector[state.channel]
    ok = ((cur_bs == home_bs) & (cur_sec == home_sec)) | ((cur_bs == alt_bs) & (cur_sec == alt_sec))
    lost = ~ok
    if lost.any():
        carrier = topo.channel_carrier[state.channel[lost]]
        state.channel[lost] = topo.channel_id(home_bs[lost], home_sec[lost], carrier)
        state.mobility_handoffs += int(lost.sum())
    return state


def generate_traffic(state: NetworkState, dt: float, rng: np.random.Generator) -> NetworkState:
    """Poisson packet arrivals for active UEs over ``dt`` ms.

    Each active UE keeps a countdown to its next arrival; gaps are exponential
    with the scenario's mean inter-arrival time. Packet sizes are exponential
    with the scenario's mean, truncated at ``packet_size_cap`` times the mean.
    """
    if not dt > 0:
        raise ContractError(f"dt must be positive, got {dt}")
    idx = np.flatnonzero(state.active)
    if idx.size == 0:
        return state
    sc = state.scenario
    mean_ia = sc.mean_interarrival
    clock = state.next_arrival[idx].copy()
    counts = np.zeros(idx.size, dtype=np.int64)
    k = int(np.ceil(2.0 * dt / mean_ia)) + 8  # gaps drawn per round; more rounds only if exhausted
    rows = np.arange(idx.size)
    while rows.size:
        gaps = rng.exponential(mean_ia, (rows.size, k))
        times = np.empty((rows.size, k + 1))
        times[:, 0] = clock[rows]
        np.cumsum(gaps, axis=1, out=times[:, 1:])
        times[:, 1:] += clock[rows, None]
        c = (times < dt).sum(axis=1)
        spill = c == k + 1
        # a spilled row restarts from its last (already due) arrival next round
        counts[rows] += c - spill
        clock[rows] = times[np.arange(rows.size), np.minimum(c, k)]
        rows = rows[spill]
    total = int(counts.sum())
    if total:
        size = packet_sizes_bytes(rng, total, sc.mean_packet_size, state.params.packet_size_cap)
        owner = np.repeat(idx, counts)
        np.add.at(state.pending, owner, size)
        np.add.at(state.generated, owner, size)
        state.arrivals[idx] += counts
    state.next_arrival[idx] = clock - dt
    return state


def packet_sizes_bytes(rng: np.random.Generator, n: int, mean_mbit: float, cap: float) -> np.ndarray:
    """Truncated-exponential packet sizes, rounded to whole bytes (at least one)."""
    # inverse CDF restricted to [0, cap * mean]
    u = rng.random(n) * -np.expm1(-cap)
    mbit = -mean_mbit * np.log1p(-u)
    return np.maximum(np.rint(mbit * MBIT / BITS_PER_BYTE), 1).astype(np.int64)


def ue_capacity(state: NetworkState, ues=None) -> np.ndarray:
    """Single-user capacity (Mbit/s) of each UE on its serving channel."""
    ues = np.arange(state.n_ues) if ues is None else np.asarray(ues)
    return geometry(state).capacity[ues, state.channel[ues]]


def link_rates(state: NetworkState) -> np.ndarray:
    """Deliverable rate (Mbit/s) of every UE; zero for idle UEs."""
    rates = np.zeros(state.n_ues)
    idx = np.flatnonzero(state.active)
    if idx.size:
        share = state.active_load()[state.channel[idx]]
        rates[idx] = ue_capacity(state, idx) / share
    return rates


def compute_link_rate(ue: UserEquipment, channel: ChannelState, topology: NetworkTopology,
                      params: SimParams | None = None) -> float:
    """Capacity of ``ue`` on ``channel`` split equally among the channel's active UEs."""
    if ue.id not in channel.attached_ues or ue.serving_channel != channel.channel_id:
        raise ContractError(f"UE {ue.id} is not attached to channel {channel.channel_id}")
    params = params or SimParams()
    cid = channel.channel_id
    bs = topology.channel_bs[cid]
    carrier = topology.carriers[topology.channel_carrier[cid]]
    vec = topology.displacement(topology.bs_positions[bs], np.asarray(ue.position))
    cap = params.channel_capacity(np.hypot(*vec), carrier.bandwidth_mhz, carrier.frequency_ghz)
    return float(cap) / max(channel.n_active, 1)


def iulb_probabilities(params: LBParameters, base_priority=(0.0, 0.0, 0.0, 0.0)) -> np.ndarray:
    """Per-BS carrier re-selection ratios, shape (n_bs, 4); rows sum to one.

    Offsets are dB, so each carrier's weight is the linear power ratio
    10^((base_c + beta_c + gamma_c) / 10), normalized over the sector's carriers.
    """
    logits = np.asarray(base_priority, dtype=float)[None, :] + params.beta + params.gamma
    logits = (logits - logits.max(axis=1, keepdims=True)) * (np.log(10.0) / 10.0)
    w = np.exp(logits)
    return w / w.sum(axis=1, keepdims=True)


def apply_iulb(state: NetworkState, params: LBParameters, rng: np.random.Generator) -> NetworkState:
    """Idle UEs re-select a carrier of their home sector from the BS's re-selection ratios."""
    idle = np.flatnonzero(~state.active)
    if idle.size == 0:
        return state
    topo = state.topology
    if state.lb_enabled:
        probs = iulb_probabilities(params, state.params.iulb_base_priority)
    else:
        probs = np.full((topo.n_bs, CHANNELS_PER_SECTOR), 1.0 / CHANNELS_PER_SECTOR)
    home_bs, home_sec, _, _ = home_sectors(state)
    cdf = np.cumsum(probs[home_bs[idle]], axis=1)
    u = rng.random(idle.size)[:, None]
    carrier = np.minimum((u >= cdf).sum(axis=1), CHANNELS_PER_SECTOR - 1)
    state.channel[idle] = topo.channel_id(home_bs[idle], home_sec[idle], carrier)
    return state


def aulb_margin(params: LBParameters, base_margin: float) -> np.ndarray:
    """Trigger margin (in UEs) per (bs, carrier): base * 10^(-alpha / 10)."""
    return base_margin * 10.0 ** (-params.alpha / 10.0)


def apply_aulb(state: NetworkState, params: LBParameters) -> NetworkState:
    """Hand active UEs off to the least-loaded admissible neighbour when the load gap exceeds the margin.

    Neighbours of a UE are the other carriers of its home sector plus the
    carriers of its second-best sector; a neighbour is admissible when the
    UE's single-user capacity there is at least ``aulb_min_capacity_ratio``
    of its capacity on the serving channel. Load is the number of active
    (served) UEs, updated after every handoff; UEs are visited in id order,
    at most one handoff each.
    """
    state.step_handoffs = 0
    if not state.lb_enabled:
        return state
    idx = np.flatnonzero(state.active)
    if idx.size == 0:
        return state
    topo = state.topology
    sp = state.params
    geo = geometry(state)
    offsets = np.arange(CHANNELS_PER_SECTOR)
    cands = topo.channel_id(geo.home_bs[idx, None], geo.home_sec[idx, None], offsets)
    if topo.n_bs > 1:
        alt = topo.channel_id(geo.alt_bs[idx, None], geo.alt_sec[idx, None], offsets)
        cands = np.sort(np.concatenate([cands, alt], axis=1), axis=1)
    margin = aulb_margin(params, sp.aulb_base_margin)[topo.channel_bs, topo.channel_carrier].tolist()
    load = state.active_load().tolist()
    cap = geo.capacity[idx].tolist()
    ratio = sp.aulb_min_capacity_ratio
    channel = state.channel
    moved = 0
    for row, u in enumerate(idx.tolist()):
        c = int(channel[u])
        caprow = cap[row]
        floor_cap = ratio * caprow[c]
        target, target_load = -1, None
        for n in cands[row].tolist():  # ascending ids, so strict < keeps the lowest on ties
            if n != c and caprow[n] >= floor_cap and (target_load is None or load[n] < target_load):
                target, target_load = n, load[n]
        if target >= 0 and load[c] - target_load > margin[c]:
            load[c] -= 1
            load[target] += 1
            channel[u] = target
            moved += 1
    state.step_handoffs = moved
    state.handoffs += moved
    return state


def capacity_matrix(state: NetworkState, ues) -> np.ndarray:
    """Single-user capacity (Mbit/s) of each UE in ``ues`` on every channel of the network."""
    return geometry(state).capacity[np.asarray(ues)]


def deliver(state: NetworkState, dt: float) -> NetworkState:
    """Drain pending bytes at the link rate, credit the ledgers, record channel utilization."""
    state.utilization = np.zeros(state.topology.n_channels)
    idx = np.flatnonzero(state.active)
    if idx.size == 0:
        return state
    seconds = dt / 1000.0
    cap = ue_capacity(state, idx)
    share = state.active_load()[state.channel[idx]]
    budget = np.floor(cap / share * seconds * MBIT / BITS_PER_BYTE).astype(np.int64)
    sent = np.minimum(state.pending[idx], budget)
    state.pending[idx] -= sent
    state.delivered[idx] += sent
    state.window[idx] += sent
    busy = sent * BITS_PER_BYTE / (cap * MBIT * seconds)
    np.add.at(state.utilization, state.channel[idx], busy)
    np.clip(state.utilization, 0.0, 1.0, out=state.utilization)
    return state


def reset_window(state: NetworkState) -> NetworkState:
    state.window[:] = 0
    state.window_ms = 0.0
    return state


def step_sim(state: NetworkState, params: LBParameters, dt: float, rng: np.random.Generator) -> NetworkState:
    """One simulator step: modes, mobility, IULB, AULB, traffic, delivery.

    The measurement window is the step itself, so the ledger is cleared first.
    """
    if not dt > 0:
        raise ContractError(f"dt must be positive, got {dt}")
    if params.n_bs != state.topology.n_bs:
        raise ContractError(f"parameters cover {params.n_bs} BSs, topology has {state.topology.n_bs}")
    reset_window(state)
    transition_modes(state, rng)
    move_ues(state, dt, rng)
    apply_iulb(state, params, rng)
    apply_aulb(state, params)
    generate_traffic(state, dt, rng)
    deliver(state, dt)
    state.time_ms += dt
    state.window_ms = dt
    state.steps += 1
    return state


__all__ = [
    "SimParams", "LBParameters", "UserEquipment", "ChannelState", "NetworkState",
    "build_topology", "init_state", "transition_modes", "move_ues", "generate_traffic",
    "compute_link_rate", "link_rates", "iulb_probabilities", "apply_iulb", "aulb_margin",
    "apply_aulb", "deliver", "reset_window", "step_sim", "home_sectors", "packet_sizes_bytes",
    "Geometry", "geometry", "capacity_matrix", "ue_capacity",
]
