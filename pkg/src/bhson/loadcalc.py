"""Cell load definitions: windowed estimators and analytic quadrature.

Three measurement-based estimators operate on a window of per-slot
observables:

* ``scheduler_load`` -- mean fraction of scheduler resources in use (the
  classical local load),
* ``busy_load`` -- fraction of slots with at least one elastic user,
* ``global_load`` -- busy indicator, with idle slots credited
  max(GBR resource fraction, backhaul occupancy).

Four analytic loads integrate arrival density x mean file size / rate over
the pixels of an attachment map, in local/global and elastic/GBR variants.
The global variants cap the usable rate at the backhaul capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import AttachmentMap


@dataclass(frozen=True)
class SlotObservation:
    """Observables of one cell over one simulation slot."""

    used_resource_fraction: float
    elastic_active_count: int
    gbr_resource_fraction: float = 0.0
    backhaul_occupancy: float = 0.0

    def __post_init__(self):
        for name in ("used_resource_fraction", "gbr_resource_fraction",
                     "backhaul_occupancy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.elastic_active_count < 0:
            raise ValueError("elastic_active_count must be >= 0")


@dataclass
class MeasurementWindow:
    """Per-slot observables of one cell over an estimation window.

    Columns are stored as arrays so windows of tens of thousands of slots
    stay cheap; :meth:`from_slots` builds one from SlotObservation objects.
    """

    used: np.ndarray           # [0,1] used resource fraction per slot
    elastic_count: np.ndarray  # active elastic flows per slot
    gbr_fraction: np.ndarray   # [0,1] GBR resource fraction per slot
    bh_occupancy: np.ndarray   # [0,1] backhaul occupancy per slot
    slot_duration: float = 0.01

    def __post_init__(self):
        n = self.used.size
        if n == 0:
            raise ValueError("measurement window must contain at least one slot")
        for arr in (self.elastic_count, self.gbr_fraction, self.bh_occupancy):
            if arr.size != n:
                raise ValueError("window columns must have equal length")

    @classmethod
    def from_slots(cls, slots, slot_duration: float = 0.01) -> "MeasurementWindow":
        slots = list(slots)
        return cls(
            used=np.array([s.used_resource_fraction for s in slots], dtype=float),
            elastic_count=np.array([s.elastic_active_count for s in slots]),
            gbr_fraction=np.array([s.gbr_resource_fraction for s in slots], dtype=float),
            bh_occupancy=np.array([s.backhaul_occupancy for s in slots], dtype=float),
            slot_duration=slot_duration)

    def __len__(self) -> int:
        return self.used.size


def scheduler_load(window: MeasurementWindow) -> float:
    """Mean used-resource fraction over the window (local load estimate)."""
    return float(np.mean(window.used))


def busy_load(window: MeasurementWindow) -> float:
    """Fraction of slots with at least one elastic user present."""
    return float(np.mean(window.elastic_count > 0))


def global_load(window: MeasurementWindow) -> float:
    """Backhaul-aware load estimate: busy slots count 1, idle slots count
    max(GBR resource fraction, backhaul occupancy)."""
    busy = window.elastic_count > 0
    idle_credit = np.maximum(window.gbr_fraction, window.bh_occupancy)
    return float(np.mean(np.where(busy, 1.0, idle_credit)))


@dataclass
class AnalyticScenario:
    """Inputs of the analytic load formulas for one attachment map.

    Per-cell quantities default to the unconstrained / no-GBR case when a
    cell id is absent from the dicts.
    """

    map: AttachmentMap
    mean_file_size_mbits: float
    backhaul_capacity_mbps: dict[int, float] = field(default_factory=dict)
    gbr_radio_fraction: dict[int, float] = field(default_factory=dict)
    gbr_demand_mbps: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.mean_file_size_mbits <= 0:
            raise ValueError("mean_file_size_mbits must be > 0")
        for cid, f in self.gbr_radio_fraction.items():
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"gbr_radio_fraction[{cid}]={f} outside [0, 1]")
        for cid, d in self.gbr_demand_mbps.items():
            if d < 0:
                raise ValueError(f"gbr_demand_mbps[{cid}] must be >= 0")

    def _cell_demand_and_rate(self, cell_id: int):
        """Per-pixel elastic traffic demand (Mbps) and peak rate of a cell."""
        mask = self.map.pixel_mask(cell_id)
        demand = (self.map.total_density[mask] * self.map.pixel_area
                  * self.mean_file_size_mbits)
        rate = self.map.peak_rate[mask, self.map.column_of(cell_id)]
        if np.any(rate <= 0.0):
            raise ValueError(f"cell {cell_id} has a zero-peak-rate pixel")
        return demand, rate

    def c_bh(self, cell_id: int) -> float:
        return self.backhaul_capacity_mbps.get(cell_id, math.inf)

    def rho_gbr(self, cell_id: int) -> float:
        return self.gbr_radio_fraction.get(cell_id, 0.0)

    def d_gbr(self, cell_id: int) -> float:
        return self.gbr_demand_mbps.get(cell_id, 0.0)


def analytic_load_elastic(s: AnalyticScenario, cell_id: int) -> float:
    """Elastic load ignoring the backhaul: min(1, sum demand / peak rate)."""
    demand, rate = s._cell_demand_and_rate(cell_id)
    return min(1.0, float(np.sum(demand / rate)))


def analytic_load_gbr(s: AnalyticScenario, cell_id: int) -> float:
    """Local load with GBR: GBR resource fraction plus elastic load over the
    residual rate (1 - rho_GBR) R."""
    rho_gbr = s.rho_gbr(cell_id)
    if rho_gbr >= 1.0:
        return 1.0
    demand, rate = s._cell_demand_and_rate(cell_id)
    return min(1.0, rho_gbr + float(np.sum(demand / ((1.0 - rho_gbr) * rate))))


def analytic_global_elastic(s: AnalyticScenario, cell_id: int) -> float:
    """Backhaul-aware elastic load: the usable rate is min(C_BH, R)."""
    demand, rate = s._cell_demand_and_rate(cell_id)
    return min(1.0, float(np.sum(demand / np.minimum(s.c_bh(cell_id), rate))))


def analytic_global_gbr(s: AnalyticScenario, cell_id: int) -> float:
    """Backhaul-aware load with GBR traffic.

    GBR claims backhaul D_GBR and radio fraction rho_GBR; the elastic
    integral runs over min(residual backhaul, residual radio rate) and the
    GBR term is max(D_GBR / C_BH, rho_GBR).
    """
    c_bh = s.c_bh(cell_id)
    d_gbr = s.d_gbr(cell_id)
    rho_gbr = s.rho_gbr(cell_id)
    rho_gbr_g = max(d_gbr / c_bh if math.isfinite(c_bh) else 0.0, rho_gbr)
    if rho_gbr >= 1.0:
        return 1.0
    demand, rate = s._cell_demand_and_rate(cell_id)
    residual_bh = max(0.0, c_bh - d_gbr)
    if residual_bh == 0.0:
        return 1.0 if float(np.sum(demand)) > 0.0 else min(1.0, rho_gbr_g)
    denom = np.minimum(residual_bh, (1.0 - rho_gbr) * rate)
    return min(1.0, rho_gbr_g + float(np.sum(demand / denom)))
