"""Site layout: base stations, 120-degree sectors and per-sector carrier channels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError

SECTORS_PER_BS = 3
CHANNELS_PER_SECTOR = 4
SECTOR_WIDTH_DEG = 360.0 / SECTORS_PER_BS


@dataclass(frozen=True)
class Carrier:
    """One carrier frequency, shared by every sector in the network."""

    name: str
    frequency_ghz: float
    bandwidth_mhz: float


DEFAULT_CARRIERS = (
    Carrier("f1", 0.8, 5.0),
    Carrier("f2", 1.8, 10.0),
    Carrier("f3", 2.1, 10.0),
    Carrier("f4", 3.5, 20.0),
)


@dataclass
class NetworkTopology:
    bs_positions: np.ndarray  # (n_bs, 2) meters
    world_extent: tuple[float, float, float, float]  # xmin, xmax, ymin, ymax
    carriers: tuple[Carrier, ...] = DEFAULT_CARRIERS
    inter_site_distance: float = 500.0
    # channel id -> owning bs / sector / carrier index
    channel_bs: np.ndarray = field(init=False, repr=False)
    channel_sector: np.ndarray = field(init=False, repr=False)
    channel_carrier: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.bs_positions = np.asarray(self.bs_positions, dtype=float).reshape(-1, 2)
        if len(self.carriers) != CHANNELS_PER_SECTOR:
            raise ConfigurationError(
                f"exactly {CHANNELS_PER_SECTOR} carriers required, got {len(self.carriers)}")
        ids = np.arange(self.n_channels)
        self.channel_carrier = ids % CHANNELS_PER_SECTOR
        self.channel_sector = (ids // CHANNELS_PER_SECTOR) % SECTORS_PER_BS
        self.channel_bs = ids // (CHANNELS_PER_SECTOR * SECTORS_PER_BS)

    @property
    def n_bs(self) -> int:
        return len(self.bs_positions)

    @property
    def n_sectors(self) -> int:
        return self.n_bs * SECTORS_PER_BS

    @property
    def n_channels(self) -> int:
        return self.n_sectors * CHANNELS_PER_SECTOR

    @property
    def width(self) -> float:
        return self.world_extent[1] - self.world_extent[0]

    @property
    def height(self) -> float:
        return self.world_extent[3] - self.world_extent[2]

    def channel_id(self, bs, sector, carrier):
        return (np.asarray(bs) * SECTORS_PER_BS + sector) * CHANNELS_PER_SECTOR + carrier

    def sector_channels(self, bs: int, sector: int) -> np.ndarray:
        first = self.channel_id(bs, sector, 0)
        return np.arange(first, first + CHANNELS_PER_SECTOR)

    def sector_wedges(self, bs: int) -> list[tuple[float, float]]:
        """Azimuth intervals [start, end) in degrees covered by each sector of ``bs``."""
        return [(s * SECTOR_WIDTH_DEG, (s + 1) * SECTOR_WIDTH_DEG) for s in range(SECTORS_PER_BS)]

    def wrap(self, pos: np.ndarray) -> np.ndarray:
        """Map positions back into the world rectangle (toroidal)."""
        xmin, _, ymin, _ = self.world_extent
        out = np.array(pos, dtype=float, copy=True)
        # in-range coordinates are left bit-exact
        for axis, lo, span in ((0, xmin, self.width), (1, ymin, self.height)):
            col = out[..., axis]
            outside = (col < lo) | (col >= lo + span)
            col[outside] = lo + np.mod(col[outside] - lo, span)
        return out

    def displacement(self, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
        """Minimum-image vector from ``src`` to ``dst`` on the torus (broadcasting)."""
        d = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
        d[..., 0] -= self.width * np.round(d[..., 0] / self.width)
        d[..., 1] -= self.height * np.round(d[..., 1] / self.height)
        return d

    def ue_geometry(self, ue_pos: np.ndarray):
        """Distances (n_ue, n_bs) and sector index (n_ue, n_bs) of every UE as seen from every BS."""
        vec = self.displacement(self.bs_positions[None, :, :], np.asarray(ue_pos)[:, None, :])
        dist = np.hypot(vec[..., 0], vec[..., 1])
        azimuth = np.degrees(np.arctan2(vec[..., 1], vec[..., 0])) % 360.0
        sector = np.minimum((azimuth // SECTOR_WIDTH_DEG).astype(np.int64), SECTORS_PER_BS - 1)
        return dist, sector


def build_topology(n_bs: int, inter_site_distance: float = 500.0, seed=None,
                   carriers: tuple[Carrier, ...] = DEFAULT_CARRIERS) -> NetworkTopology:
    """Place ``n_bs`` sites on a hexagonal grid inside a wrap-around rectangle.

    ``n_bs=7`` puts one site at the origin and six on the surrounding hexagon
    ring; ``n_bs=3`` is a triangle of mutually adjacent sites; ``n_bs=1`` a
    single site. The layout is deterministic, so ``seed`` is accepted only for
    interface symmetry with the other builders.
    """
    isd = float(inter_site_distance)
    if isd <= 0:
        raise ConfigurationError(f"inter_site_distance must be positive, got {inter_site_distance}")
    if n_bs == 1:
        pos = np.zeros((1, 2))
        extent = (-isd / 2, isd / 2, -isd / 2, isd / 2)
    elif n_bs == 3:
        r = isd / np.sqrt(3.0)
        ang = np.radians([90.0, 210.0, 330.0])
        pos = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
        extent = (-isd, isd, -isd * np.sqrt(3.0) / 2, isd * np.sqrt(3.0) / 2)
    elif n_bs == 7:
        ang = np.radians(np.arange(6) * 60.0)
        ring = np.column_stack([isd * np.cos(ang), isd * np.sin(ang)])
        pos = np.vstack([np.zeros((1, 2)), ring])
        extent = (-1.5 * isd, 1.5 * isd, -np.sqrt(3.0) * isd, np.sqrt(3.0) * isd)
    else:
        raise ConfigurationError(f"unsupported n_bs={n_bs}; choose one of 1, 3, 7")
    return NetworkTopology(bs_positions=pos, world_extent=tuple(float(v) for v in extent),
                           carriers=tuple(carriers), inter_site_distance=isd)
