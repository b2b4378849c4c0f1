"""Stochastic-approximation load balancing on small-cell CIOs.

One controller step per measurement window: each controlled small cell moves
its CIO by step_size * (reference load - own load), clamped to the allowed
range. The two variants ("local" and "global") share this update and differ
only in which estimator produces the load reports: the local variant uses
the scheduler load, the global variant the backhaul-aware load.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .geometry import MACRO, CellConfig

LOCAL = "local"
GLOBAL = "global"
NEAREST_MACRO = "nearest-macro"
MOST_LOADED = "most-loaded"


@dataclass
class SonConfig:
    step_size_db: float = 1.0     # dB per unit load difference
    update_period_s: float = 60.0
    cio_min_db: float = 0.0
    cio_max_db: float = 12.0
    variant: str = GLOBAL
    reference_rule: str = NEAREST_MACRO

    def __post_init__(self):
        if self.step_size_db <= 0:
            raise ValueError("step_size_db must be > 0")
        if self.cio_min_db > self.cio_max_db:
            raise ValueError("cio_min_db must be <= cio_max_db")
        if self.update_period_s <= 0:
            raise ValueError("update_period_s must be > 0")
        if self.variant not in (LOCAL, GLOBAL):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.reference_rule not in (NEAREST_MACRO, MOST_LOADED):
            raise ValueError(f"unknown reference rule {self.reference_rule!r}")


@dataclass
class SonState:
    """Controller state: CIO and reference cell per controlled cell."""

    cio_db: dict[int, float]
    reference: dict[int, int]
    iteration: int = 0


def select_reference(cells: list[CellConfig], loads: dict[int, float],
                     rule: str, controlled: CellConfig | None = None) -> int:
    """Pick the reference cell whose load the controlled cell tracks.

    nearest-macro: macro sector with the site closest to ``controlled``;
    most-loaded: cell with the highest reported load. Ties go to the lowest
    cell id.
    """
    if rule == NEAREST_MACRO:
        if controlled is None:
            raise ValueError("nearest-macro rule needs the controlled cell")
        # Pure interferers report no load and cannot serve as reference.
        macros = sorted((c for c in cells if c.kind == MACRO and c.carries_traffic),
                        key=lambda c: c.id)
        if not macros:
            raise ValueError("nearest-macro rule requires at least one macro cell")
        return min(macros, key=lambda c: (controlled.site.distance_to(c.site), c.id)).id
    if rule == MOST_LOADED:
        if not loads:
            raise ValueError("most-loaded rule needs load reports")
        return min(loads, key=lambda cid: (-loads[cid], cid))
    raise ValueError(f"unknown reference rule {rule!r}")


def init_state(cells: list[CellConfig], controlled_ids: list[int],
               cfg: SonConfig, loads: dict[int, float] | None = None) -> SonState:
    """Initial controller state from the current cell CIOs."""
    by_id = {c.id: c for c in cells}
    cio = {}
    ref = {}
    for cid in controlled_ids:
        cell = by_id[cid]
        cio[cid] = min(max(cell.cio_db, cfg.cio_min_db), cfg.cio_max_db)
        ref[cid] = select_reference(cells, loads or {}, cfg.reference_rule, cell)
    return SonState(cio_db=cio, reference=ref)


def update(state: SonState, load_reports: dict[int, float], cfg: SonConfig) -> SonState:
    """One SA step: cio += step * (load_ref - load_own), clamped.

    Every controlled cell and its reference must appear in ``load_reports``
    with a value in [0, 1]; the reference cell's own CIO is never touched.
    """
    for cid, rho in load_reports.items():
        if not 0.0 <= rho <= 1.0:
            raise ValueError(f"load report for cell {cid} is {rho}, outside [0, 1]")
    new_cio = {}
    for cid, cio in state.cio_db.items():
        ref = state.reference[cid]
        if cid not in load_reports or ref not in load_reports:
            raise ValueError(f"missing load report for cell {cid} or reference {ref}")
        step = cfg.step_size_db * (load_reports[ref] - load_reports[cid])
        new_cio[cid] = min(max(cio + step, cfg.cio_min_db), cfg.cio_max_db)
    return replace(state, cio_db=new_cio, iteration=state.iteration + 1)
