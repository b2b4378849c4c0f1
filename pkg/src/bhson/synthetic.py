"""Hand-built miniature worlds for validation and controlled experiments.

These bypass propagation entirely: the attachment map is written down
directly (constant peak rates, explicit pixel areas), which gives scenarios
whose analytic loads are known in closed form.
"""

from __future__ import annotations

import math

import numpy as np

from . import flowsim, geometry
from .geometry import SMALL, AttachmentMap, CellConfig, Position


def single_cell_world(peak_rate_mbps: float, arrival_rate: float,
                      mean_file_size_mbits: float = 4.0,
                      backhaul_capacity_mbps: float = math.inf,
                      n_pixels: int = 1):
    """One omni cell with a flat peak rate over ``n_pixels`` unit pixels.

    Returns (cells, amap, layers). Offered elastic load ignoring the
    backhaul is arrival_rate * mean_file_size / peak_rate.
    """
    cell = CellConfig(id=0, kind=SMALL, site=Position(0.0, 0.0),
                      tx_power_dbm=30.0,
                      backhaul_capacity_mbps=backhaul_capacity_mbps)
    xs = np.arange(n_pixels, dtype=float)
    ones = np.ones(n_pixels)
    layer = flowsim.TrafficLayer(arrival_rate=arrival_rate,
                                 region=geometry.WHOLE_AREA,
                                 file_size_mean_mbits=mean_file_size_mbits)
    amap = AttachmentMap(
        xs=xs, ys=np.zeros(n_pixels), pixel_area=1.0,
        cell_ids=np.array([0]),
        gain_db=np.zeros((n_pixels, 1)),
        peak_rate=np.full((n_pixels, 1), float(peak_rate_mbps)),
        cios=np.zeros(1),
        serving_idx=np.zeros(n_pixels, dtype=int),
        zero_cio_serving_idx=np.zeros(n_pixels, dtype=int),
        layer_density=[ones * (arrival_rate / n_pixels)])
    return [cell], amap, [layer]


def two_cell_split_loads(total_demand: float, capacity_ref: float,
                         capacity_small: float, slope_per_db: float = 0.08):
    """Deterministic two-cell load-splitting model for controller studies.

    The CIO shifts a logistic share of the total traffic demand from the
    reference cell to the controlled cell; each cell's load is its share of
    the demand over its capacity (uncapped, so the balance point is unique).
    Returns ``loads(cio) -> (rho_ref, rho_small)``.
    """

    def loads(cio_db: float):
        share = 1.0 / (1.0 + math.exp(-4.0 * slope_per_db * cio_db))
        rho_small = total_demand * share / capacity_small
        rho_ref = total_demand * (1.0 - share) / capacity_ref
        return rho_ref, rho_small

    return loads
