"""Network layout, propagation, attachment and peak-rate computation.

A scenario consists of a set of cells (trisector macro sites plus omni small
cells). Cells flagged ``carries_traffic=False`` act as pure interferers: they
radiate at full power but are never attachment candidates. User attachment
follows the strongest biased pilot rule: argmax over candidate cells of
CIO + tx_power + antenna_gain - pathloss (all in dB).

The service area is discretized into a pixel grid (``AttachmentMap``) used
both as the spatial support of traffic arrivals and as the quadrature mesh
for the analytic load formulas in :mod:`bhson.loadcalc`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

MACRO = "macro"
SMALL = "small"


class CoverageError(RuntimeError):
    """Raised when the rasterized service area has an unservable pixel."""


@dataclass(frozen=True)
class Position:
    """A point in the horizontal plane, meters."""

    x: float
    y: float

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass
class CellConfig:
    """Static parameters of one cell (a macro sector or an omni small cell)."""

    id: int
    kind: str  # MACRO or SMALL
    site: Position
    azimuth_deg: float = 0.0  # boresight, degrees CCW from +x; macro sectors only
    tx_power_dbm: float = 46.0
    cio_db: float = 0.0
    backhaul_capacity_mbps: float = math.inf
    carries_traffic: bool = True

    def __post_init__(self):
        if self.kind not in (MACRO, SMALL):
            raise ValueError(f"unknown cell kind {self.kind!r}")
        if not math.isfinite(self.tx_power_dbm):
            raise ValueError("tx_power_dbm must be finite")
        if self.backhaul_capacity_mbps <= 0:
            raise ValueError("backhaul_capacity_mbps must be > 0 (inf = unconstrained)")


@dataclass
class RadioEnvironment:
    """Common radio parameters: band, noise, rate mapping, grid resolution."""

    bandwidth_mhz: float = 20.0
    noise_density_dbm_hz: float = -174.0
    spectral_efficiency_cap: float = 6.0  # bits/s/Hz
    bandwidth_efficiency: float = 0.8
    min_coupling_distance_m: float = 10.0
    grid_pitch_m: float = 5.0

    def __post_init__(self):
        if self.bandwidth_mhz <= 0:
            raise ValueError("bandwidth_mhz must be > 0")
        if not 0 < self.bandwidth_efficiency <= 1:
            raise ValueError("bandwidth_efficiency must be in (0, 1]")
        if self.spectral_efficiency_cap <= 0:
            raise ValueError("spectral_efficiency_cap must be > 0")
        if self.grid_pitch_m <= 0:
            raise ValueError("grid_pitch_m must be > 0")

    @property
    def noise_power_dbm(self) -> float:
        """Thermal noise over the full bandwidth."""
        return self.noise_density_dbm_hz + 10.0 * math.log10(self.bandwidth_mhz * 1e6)


def pathloss_db(kind: str, distance_km, min_coupling_distance_m: float = 10.0):
    """3GPP-style distance pathloss; distance clamped below the coupling limit.

    Macro: 128 + 36.4 log10(d), small cell: 140.7 + 36.7 log10(d), d in km.
    Accepts scalars or numpy arrays.
    """
    d = np.maximum(np.asarray(distance_km, dtype=float), min_coupling_distance_m / 1000.0)
    if kind == MACRO:
        pl = 128.0 + 36.4 * np.log10(d)
    elif kind == SMALL:
        pl = 140.7 + 36.7 * np.log10(d)
    else:
        raise ValueError(f"unknown cell kind {kind!r}")
    return float(pl) if np.isscalar(distance_km) else pl


def antenna_gain_db(cell: CellConfig, pos) -> float:
    """Sector antenna gain toward ``pos``: parabolic pattern for macro sectors
    (-min(12 (dtheta/65)^2, 20) dB), 0 dB for omni small cells.

    ``pos`` may be a Position or a pair of numpy arrays (x, y).
    """
    if isinstance(pos, Position):
        x, y = pos.x, pos.y
    else:
        x, y = pos
    if cell.kind == SMALL:
        return 0.0 if np.isscalar(x) else np.zeros_like(np.asarray(x, dtype=float))
    theta = np.degrees(np.arctan2(np.asarray(y, dtype=float) - cell.site.y,
                                  np.asarray(x, dtype=float) - cell.site.x))
    dtheta = (theta - cell.azimuth_deg + 180.0) % 360.0 - 180.0
    gain = -np.minimum(12.0 * (dtheta / 65.0) ** 2, 20.0)
    return float(gain) if np.isscalar(x) else gain


def rx_power_dbm(cell: CellConfig, pos, env: RadioEnvironment):
    """Received power from ``cell`` at ``pos`` (full tx power, no bias)."""
    if isinstance(pos, Position):
        dist_km = pos.distance_to(cell.site) / 1000.0
    else:
        x, y = pos
        dist_km = np.hypot(np.asarray(x, float) - cell.site.x,
                           np.asarray(y, float) - cell.site.y) / 1000.0
    return (cell.tx_power_dbm + antenna_gain_db(cell, pos)
            - pathloss_db(cell.kind, dist_km, env.min_coupling_distance_m))


def attach(pos: Position, cells: list[CellConfig], env: RadioEnvironment | None = None) -> int:
    """Serving cell under the CIO-biased strongest-pilot rule.

    Returns the id of the cell maximizing cio + tx_power + gain - pathloss;
    exact ties go to the lowest cell id.
    """
    if not cells:
        raise ValueError("attach() needs at least one candidate cell")
    env = env or RadioEnvironment()
    best_id, best_metric = None, -math.inf
    for cell in sorted(cells, key=lambda c: c.id):
        metric = cell.cio_db + rx_power_dbm(cell, pos, env)
        if metric > best_metric:
            best_id, best_metric = cell.id, metric
    return best_id


def sinr_linear(pos: Position, serving: int, cells: list[CellConfig],
                env: RadioEnvironment) -> float:
    """Downlink SINR with every non-serving cell transmitting at full power."""
    noise_mw = 10.0 ** (env.noise_power_dbm / 10.0)
    signal_mw = 0.0
    interference_mw = 0.0
    for cell in cells:
        p_mw = 10.0 ** (rx_power_dbm(cell, pos, env) / 10.0)
        if cell.id == serving:
            signal_mw += p_mw
        else:
            interference_mw += p_mw
    return signal_mw / (noise_mw + interference_mw)


def peak_rate_mbps(pos: Position, serving: int, cells: list[CellConfig],
                   env: RadioEnvironment) -> float:
    """Truncated-Shannon peak rate when alone in the cell."""
    sinr = sinr_linear(pos, serving, cells, env)
    se = min(math.log2(1.0 + sinr), env.spectral_efficiency_cap)
    return env.bandwidth_efficiency * env.bandwidth_mhz * se


WHOLE_AREA = "whole-area"
HOTSPOT = "hotspot"


@dataclass
class AttachmentMap:
    """Pixelized service area: serving cell, peak rate and arrival density.

    ``gain_db`` and ``peak_rate`` are (n_pixels, n_candidates) matrices so the
    map can be re-evaluated under new CIOs without touching propagation.
    """

    xs: np.ndarray            # (N,) pixel center x, m
    ys: np.ndarray            # (N,) pixel center y, m
    pixel_area: float         # m^2
    cell_ids: np.ndarray      # (C,) candidate ids, ascending
    gain_db: np.ndarray       # (N, C) tx + antenna gain - pathloss
    peak_rate: np.ndarray     # (N, C) Mbps if served by that candidate
    cios: np.ndarray          # (C,) CIOs the current serving assignment uses
    serving_idx: np.ndarray   # (N,) argmax column under ``cios``
    zero_cio_serving_idx: np.ndarray  # (N,) argmax column with all CIOs at 0
    layer_density: list[np.ndarray] = field(default_factory=list)  # users/s/m^2

    @property
    def n_pixels(self) -> int:
        return self.xs.size

    @property
    def serving_cell(self) -> np.ndarray:
        """Per-pixel serving cell id under the current CIOs."""
        return self.cell_ids[self.serving_idx]

    @property
    def serving_peak_rate(self) -> np.ndarray:
        """Per-pixel peak rate of the serving cell, Mbps."""
        return self.peak_rate[np.arange(self.n_pixels), self.serving_idx]

    @property
    def total_density(self) -> np.ndarray:
        """Sum of all layer arrival densities, users/s/m^2."""
        total = np.zeros(self.n_pixels)
        for d in self.layer_density:
            total += d
        return total

    def column_of(self, cell_id: int) -> int:
        idx = np.searchsorted(self.cell_ids, cell_id)
        if idx >= self.cell_ids.size or self.cell_ids[idx] != cell_id:
            raise KeyError(f"cell {cell_id} is not an attachment candidate")
        return int(idx)

    def pixel_mask(self, cell_id: int) -> np.ndarray:
        """Boolean mask of pixels served by ``cell_id`` under current CIOs."""
        return self.serving_idx == self.column_of(cell_id)

    def with_cios(self, cio_by_id: dict[int, float]) -> "AttachmentMap":
        """New map with the serving assignment re-evaluated at the given CIOs.

        Cells not mentioned keep their current CIO. Propagation, peak rates
        and layer densities are shared, not recomputed.
        """
        cios = self.cios.copy()
        for cid, cio in cio_by_id.items():
            cios[self.column_of(cid)] = cio
        serving_idx = np.argmax(self.gain_db + cios[None, :], axis=1)
        return replace(self, cios=cios, serving_idx=serving_idx)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["x_m", "y_m", "serving_cell", "peak_rate_mbps"])
            serving = self.serving_cell
            rate = self.serving_peak_rate
            for i in range(self.n_pixels):
                w.writerow([f"{self.xs[i]:.10g}", f"{self.ys[i]:.10g}",
                            int(serving[i]), f"{rate[i]:.10g}"])


def sector_wedge_mask(site: Position, azimuth_deg: float, radius_m: float,
                      half_width_deg: float = 60.0):
    """Mask selecting the wedge of a trisector around one boresight."""

    def mask(x, y):
        dx, dy = x - site.x, y - site.y
        dist = np.hypot(dx, dy)
        theta = np.degrees(np.arctan2(dy, dx))
        dtheta = np.abs((theta - azimuth_deg + 180.0) % 360.0 - 180.0)
        return (dist <= radius_m) & (dtheta <= half_width_deg)

    return mask


def best_server_mask(cells: list[CellConfig], env: RadioEnvironment,
                     target_id: int, kind: str = MACRO):
    """Mask selecting pixels where ``target_id`` is the strongest cell of
    ``kind`` by unbiased received power (the cell's natural service area)."""
    peers = [c for c in cells if c.kind == kind]
    target = next(c for c in peers if c.id == target_id)

    def mask(x, y):
        best = rx_power_dbm(target, (x, y), env)
        keep = np.ones_like(np.asarray(x, dtype=float), dtype=bool)
        for cell in peers:
            if cell.id != target_id:
                keep &= rx_power_dbm(cell, (x, y), env) <= best
        return keep

    return mask


def build_attachment_map(cells: list[CellConfig], env: RadioEnvironment,
                         layers=(), bounds=None, region_mask=None) -> AttachmentMap:
    """Rasterize the service area and evaluate attachment and peak rates.

    ``cells`` may mix candidates and pure interferers; only candidates
    (``carries_traffic``) serve pixels, all cells contribute interference.
    ``layers`` are objects with ``region`` (whole-area / hotspot) and
    ``arrival_rate`` (aggregate users/s over their region); each becomes one
    arrival-density array. The hotspot region is the set of pixels whose
    zero-CIO serving cell is a small cell.

    ``bounds`` is (xmin, xmax, ymin, ymax); defaults to a box covering every
    candidate site with 300 m margin. ``region_mask`` optionally restricts
    the rasterized pixels (e.g. :func:`sector_wedge_mask`).
    """
    cand_pairs = sorted(((j, c) for j, c in enumerate(cells) if c.carries_traffic),
                        key=lambda jc: jc[1].id)
    candidates = [c for _, c in cand_pairs]
    if not candidates:
        raise ValueError("no attachment-candidate cell")
    pitch = env.grid_pitch_m
    if bounds is None:
        cx = [c.site.x for c in candidates]
        cy = [c.site.y for c in candidates]
        bounds = (min(cx) - 300, max(cx) + 300, min(cy) - 300, max(cy) + 300)
    xmin, xmax, ymin, ymax = bounds
    xs_axis = np.arange(xmin + pitch / 2.0, xmax, pitch)
    ys_axis = np.arange(ymin + pitch / 2.0, ymax, pitch)
    gx, gy = np.meshgrid(xs_axis, ys_axis)
    xs, ys = gx.ravel(), gy.ravel()
    if region_mask is not None:
        keep = region_mask(xs, ys)
        xs, ys = xs[keep], ys[keep]
    if xs.size == 0:
        raise ValueError("empty rasterization region")

    # Received power from every cell at every pixel, mW.
    rx_mw = np.empty((xs.size, len(cells)))
    for j, cell in enumerate(cells):
        rx_mw[:, j] = 10.0 ** (rx_power_dbm(cell, (xs, ys), env) / 10.0)
    total_mw = rx_mw.sum(axis=1)
    noise_mw = 10.0 ** (env.noise_power_dbm / 10.0)

    gain_db = np.empty((xs.size, len(candidates)))
    peak = np.empty((xs.size, len(candidates)))
    for k, (j, c) in enumerate(cand_pairs):
        gain_db[:, k] = 10.0 * np.log10(rx_mw[:, j])
        sinr = rx_mw[:, j] / (noise_mw + total_mw - rx_mw[:, j])
        se = np.minimum(np.log2(1.0 + sinr), env.spectral_efficiency_cap)
        peak[:, k] = env.bandwidth_efficiency * env.bandwidth_mhz * se

    cios = np.array([c.cio_db for c in candidates], dtype=float)
    serving_idx = np.argmax(gain_db + cios[None, :], axis=1)
    zero_idx = np.argmax(gain_db, axis=1)

    own_peak = peak[np.arange(xs.size), serving_idx]
    if np.any(own_peak <= 0.0):
        bad = int(np.argmin(own_peak))
        raise CoverageError(
            f"coverage hole: pixel ({xs[bad]:.1f}, {ys[bad]:.1f}) has zero peak rate")

    small_cols = np.array([k for k, c in enumerate(candidates) if c.kind == SMALL])
    hotspot_pixels = (np.isin(zero_idx, small_cols) if small_cols.size
                      else np.zeros(xs.size, dtype=bool))
    area = pitch * pitch
    densities = []
    for layer in layers:
        if layer.region == WHOLE_AREA:
            mask = np.ones(xs.size, dtype=bool)
        elif layer.region == HOTSPOT:
            mask = hotspot_pixels
            if not mask.any():
                raise ValueError("hotspot layer configured but no small-cell pixel")
        else:
            raise ValueError(f"unknown layer region {layer.region!r}")
        dens = np.zeros(xs.size)
        dens[mask] = layer.arrival_rate / (mask.sum() * area)
        densities.append(dens)

    return AttachmentMap(
        xs=xs, ys=ys, pixel_area=area,
        cell_ids=np.array([c.id for c in candidates]),
        gain_db=gain_db, peak_rate=peak, cios=cios,
        serving_idx=serving_idx, zero_cio_serving_idx=zero_idx,
        layer_density=densities)
