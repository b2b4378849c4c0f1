"""Discrete-time flow-level simulator with a per-cell backhaul bottleneck.

Time advances in fixed slots. Each slot: Poisson arrivals are drawn per
traffic layer and attached under the current CIOs, rates are allocated per
cell (GBR sessions first at their guaranteed rate, elastic flows share the
joint radio/backhaul bottleneck equally), elastic volumes drain, completed
flows are recorded, and one :class:`SlotObservation` per cell feeds the load
estimators.

Elastic sharing rule: with n elastic flows in a cell, flow u receives
min((1 - gbr_fraction) * R_u, residual_backhaul) / n, which makes a
backhaul-starved cell behave as a processor-sharing queue of capacity C_BH
while leaving its scheduler mostly idle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import AttachmentMap, CellConfig
from .loadcalc import MeasurementWindow

ELASTIC = "elastic"
GBR = "gbr"


@dataclass
class TrafficLayer:
    """One spatial layer of Poisson flow arrivals."""

    arrival_rate: float          # users/s, aggregate over the layer's region
    region: str                  # geometry.WHOLE_AREA or geometry.HOTSPOT
    file_size_mean_mbits: float = 4.0
    kind: str = ELASTIC
    gbr_rate_mbps: float = 0.0         # GBR layers only
    gbr_mean_holding_s: float = 0.0    # GBR layers only

    def __post_init__(self):
        if self.arrival_rate < 0:
            raise ValueError("arrival_rate must be >= 0")
        if self.kind not in (ELASTIC, GBR):
            raise ValueError(f"unknown traffic kind {self.kind!r}")
        if self.kind == GBR and (self.gbr_rate_mbps <= 0 or self.gbr_mean_holding_s <= 0):
            raise ValueError("GBR layer needs gbr_rate_mbps and gbr_mean_holding_s > 0")


@dataclass
class Flow:
    """One elastic download or GBR session at a fixed position."""

    id: int
    kind: str
    x: float
    y: float
    serving_cell: int
    arrival_time: float
    peak_rate: float                 # R(r) at the flow's position, Mbps
    remaining_volume: float = 0.0    # Mbits, elastic
    guaranteed_rate: float = 0.0     # Mbps, GBR
    departure_time: float = 0.0      # s, GBR


@dataclass
class FlowRecord:
    """A completed elastic flow, the raw material of the KPIs."""

    cell_id: int
    arrival_s: float
    completion_s: float
    size_mbits: float

    @property
    def ftt_s(self) -> float:
        return self.completion_s - self.arrival_s

    @property
    def throughput_mbps(self) -> float:
        return self.size_mbits / self.ftt_s


@dataclass
class KpiRecord:
    """Cluster KPIs over one window; None when no flow completed."""

    n_flows: int
    mut_mbps: float | None
    cet_mbps: float | None
    ftt_mean_by_cell: dict[int, float]


def collect_kpis(records: list[FlowRecord], cell_ids=None) -> KpiRecord:
    """MUT (mean user throughput), CET (5th-percentile throughput,
    nearest-rank) and per-cell mean FTT over completed flows."""
    if cell_ids is not None:
        keep = set(cell_ids)
        records = [r for r in records if r.cell_id in keep]
    if not records:
        return KpiRecord(0, None, None, {})
    tput = np.array([r.throughput_mbps for r in records])
    rank = max(1, math.ceil(0.05 * tput.size))  # nearest-rank percentile
    cet = float(np.sort(tput)[rank - 1])
    by_cell: dict[int, list] = {}
    for r in records:
        by_cell.setdefault(r.cell_id, []).append(r.ftt_s)
    ftt_mean = {cid: float(np.mean(v)) for cid, v in sorted(by_cell.items())}
    return KpiRecord(len(records), float(np.mean(tput)), cet, ftt_mean)


class CellState:
    """Dynamic state of one traffic-carrying cell.

    Elastic flows live in parallel numpy arrays (remaining volume, peak rate,
    arrival time, size) with amortized growth so that per-slot allocation is
    vectorized even when a saturated cell accumulates thousands of flows.
    """

    _INITIAL_CAPACITY = 64

    def __init__(self, config: CellConfig):
        self.config = config
        cap = self._INITIAL_CAPACITY
        self.n = 0
        self._rem = np.empty(cap)
        self._peak = np.empty(cap)
        self._arr = np.empty(cap)
        self._size = np.empty(cap)
        self.gbr_flows: list[Flow] = []

    @property
    def remaining(self) -> np.ndarray:
        return self._rem[:self.n]

    @property
    def peak(self) -> np.ndarray:
        return self._peak[:self.n]

    def add_elastic(self, flow: Flow) -> None:
        if self.n == self._rem.size:
            for name in ("_rem", "_peak", "_arr", "_size"):
                old = getattr(self, name)
                new = np.empty(old.size * 2)
                new[:old.size] = old
                setattr(self, name, new)
        i = self.n
        self._rem[i] = flow.remaining_volume
        self._peak[i] = flow.peak_rate
        self._arr[i] = flow.arrival_time
        self._size[i] = flow.remaining_volume
        self.n += 1

    def admit_gbr(self, flow: Flow) -> None:
        """Clamp the guaranteed rate to the radio and backhaul room left."""
        gamma = sum(f.guaranteed_rate / f.peak_rate for f in self.gbr_flows)
        bh_used = sum(f.guaranteed_rate for f in self.gbr_flows)
        room = min(flow.peak_rate,
                   max(0.0, (1.0 - gamma)) * flow.peak_rate,
                   self.config.backhaul_capacity_mbps - bh_used)
        flow.guaranteed_rate = max(0.0, min(flow.guaranteed_rate, room))
        self.gbr_flows.append(flow)

    def gbr_usage(self):
        """(radio fraction, backhaul Mbps) consumed by active GBR sessions."""
        gamma = 0.0
        bh = 0.0
        for f in self.gbr_flows:
            gamma += f.guaranteed_rate / f.peak_rate
            bh += f.guaranteed_rate
        return min(1.0, gamma), bh


def allocate_rates(cell: CellState):
    """Per-slot rate allocation and observables for one cell.

    Returns (elastic_rates, gamma, used_fraction, backhaul_occupancy) where
    ``elastic_rates`` aligns with ``cell.remaining``.
    """
    c_bh = cell.config.backhaul_capacity_mbps
    gamma, gbr_bh = cell.gbr_usage()
    n = cell.n
    if n > 0:
        residual_bh = max(0.0, c_bh - gbr_bh)
        rates = np.minimum((1.0 - gamma) * cell.peak, residual_bh) / n
        radio_used = float(np.sum(rates / cell.peak))
        bh_used = float(np.sum(rates)) + gbr_bh
    else:
        rates = np.empty(0)
        radio_used = 0.0
        bh_used = gbr_bh
    used = min(1.0, radio_used + gamma)
    bh_occ = min(1.0, bh_used / c_bh) if math.isfinite(c_bh) else 0.0
    return rates, gamma, used, bh_occ


class FlowSimulator:
    """Seeded world state: attachment map, cells, layers and active flows."""

    def __init__(self, amap: AttachmentMap, cells: list[CellConfig],
                 layers: list[TrafficLayer], slot_duration: float = 0.01,
                 seed: int = 0):
        if slot_duration <= 0:
            raise ValueError("slot_duration must be > 0")
        if len(layers) != len(amap.layer_density):
            raise ValueError("layers must match the attachment map's density layers")
        self.amap = amap
        self.layers = layers
        self.slot_duration = slot_duration
        self.rng = np.random.default_rng(seed)
        self.time = 0.0
        self.cells = {c.id: CellState(c) for c in cells if c.carries_traffic}
        # Pixels eligible per layer, for uniform position sampling.
        self._layer_pixels = [np.flatnonzero(d > 0) for d in amap.layer_density]
        self._next_flow_id = 0
        self.completed: list[FlowRecord] = []
        self._window_obs: dict[int, list[np.ndarray]] | None = None

    def set_cios(self, cio_by_id: dict[int, float]) -> None:
        """Apply new CIOs: re-derive the serving map for future arrivals.

        Flows in progress keep their serving cell.
        """
        self.amap = self.amap.with_cios(cio_by_id)
        for cid, cio in cio_by_id.items():
            if cid in self.cells:
                self.cells[cid].config.cio_db = cio

    def spawn_arrivals(self, layer: TrafficLayer, slot_duration: float | None = None,
                       rng=None) -> list[Flow]:
        """Draw one slot's Poisson arrivals for a layer and attach them."""
        dt = self.slot_duration if slot_duration is None else slot_duration
        rng = rng or self.rng
        layer_idx = next(i for i, l in enumerate(self.layers) if l is layer)
        k = rng.poisson(layer.arrival_rate * dt)
        if k == 0:
            return []
        pixels = self._layer_pixels[layer_idx]
        flows = []
        for pix in pixels[rng.integers(0, pixels.size, size=k)]:
            col = self.amap.serving_idx[pix]
            flow = Flow(
                id=self._next_flow_id, kind=layer.kind,
                x=float(self.amap.xs[pix]), y=float(self.amap.ys[pix]),
                serving_cell=int(self.amap.cell_ids[col]),
                arrival_time=self.time,
                peak_rate=float(self.amap.peak_rate[pix, col]))
            self._next_flow_id += 1
            if layer.kind == ELASTIC:
                flow.remaining_volume = rng.exponential(layer.file_size_mean_mbits)
            else:
                flow.guaranteed_rate = layer.gbr_rate_mbps
                flow.departure_time = self.time + rng.exponential(layer.gbr_mean_holding_s)
            flows.append(flow)
        return flows

    def step(self) -> None:
        """Advance the world by one slot."""
        dt = self.slot_duration
        for layer in self.layers:
            for flow in self.spawn_arrivals(layer):
                cell = self.cells[flow.serving_cell]
                if flow.kind == ELASTIC:
                    cell.add_elastic(flow)
                else:
                    cell.admit_gbr(flow)
        t_end = self.time + dt
        for cid, cell in self.cells.items():
            rates, gamma, used, bh_occ = allocate_rates(cell)
            if self._window_obs is not None:
                self._window_obs[cid].append(
                    np.array([used, cell.n, gamma, bh_occ]))
            if cell.n > 0:
                cell._rem[:cell.n] -= rates * dt
                done = cell.remaining <= 1e-12
                if done.any():
                    for i in np.flatnonzero(done):
                        self.completed.append(FlowRecord(
                            cell_id=cid, arrival_s=float(cell._arr[i]),
                            completion_s=t_end, size_mbits=float(cell._size[i])))
                    keep = ~done
                    m = int(keep.sum())
                    for name in ("_rem", "_peak", "_arr", "_size"):
                        arr = getattr(cell, name)
                        arr[:m] = arr[:cell.n][keep]
                    cell.n = m
            if cell.gbr_flows:
                cell.gbr_flows = [f for f in cell.gbr_flows if f.departure_time > t_end]
        self.time = t_end

    def begin_window(self) -> None:
        self._window_obs = {cid: [] for cid in self.cells}
        self._window_flow_mark = len(self.completed)

    def end_window(self):
        """Close the current window; returns (measurements, completed flows)."""
        if self._window_obs is None:
            raise RuntimeError("begin_window() was not called")
        measurements = {}
        for cid, rows in self._window_obs.items():
            cols = np.array(rows)
            measurements[cid] = MeasurementWindow(
                used=cols[:, 0], elastic_count=cols[:, 1].astype(int),
                gbr_fraction=cols[:, 2], bh_occupancy=cols[:, 3],
                slot_duration=self.slot_duration)
        flows = self.completed[self._window_flow_mark:]
        self._window_obs = None
        return measurements, flows

    def run_window(self, n_slots: int):
        """Simulate ``n_slots`` slots and return (measurements, completed)."""
        self.begin_window()
        for _ in range(n_slots):
            self.step()
        return self.end_window()
