"""Run orchestration: simulate, drive the SON loop, and emit outputs.

A run alternates measurement windows and SON updates for the configured
duration and writes four artifacts to the output directory:

* ``windows.csv``  -- one row per (window, cluster cell): CIO, the three
  estimated loads, the analytic local/global loads, backhaul occupancy,
  per-cell mean FTT and the cluster MUT/CET of the window,
* ``flows.csv``    -- one row per completed flow,
* ``summary.json`` -- final CIOs, final-window loads and KPI aggregates,
* ``manifest.json``-- config hash, seed and package version.

Missing KPIs (no completed flow in a window/cell) are written as ``NA``,
never as zero. Outputs are deterministic functions of (config, seed).
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__, flowsim, loadcalc, son
from .flowsim import FlowSimulator, collect_kpis
from .loadcalc import AnalyticScenario
from .scenario import ScenarioConfig, World, build_world

NA = "NA"

WINDOW_COLUMNS = [
    "window", "time_s", "cell_id", "cio_db",
    "scheduler_load", "busy_load", "global_load",
    "analytic_local_load", "analytic_global_load",
    "backhaul_occupancy_mean", "mean_ftt_s", "mut_mbps", "cet_mbps",
]

FLOW_COLUMNS = ["arrival_s", "cell_id", "ftt_s", "throughput_mbps"]


def _fmt(value) -> str:
    if value is None:
        return NA
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


@dataclass
class WindowRow:
    window: int
    time_s: float
    cell_id: int
    cio_db: float
    scheduler_load: float
    busy_load: float
    global_load: float
    analytic_local_load: float
    analytic_global_load: float
    backhaul_occupancy_mean: float
    mean_ftt_s: float | None
    mut_mbps: float | None
    cet_mbps: float | None


@dataclass
class RunOutput:
    """In-memory result of one run; files are written by :func:`run`."""

    config_hash: str
    seed: int
    out_dir: str | None
    window_rows: list[WindowRow]
    flow_records: list[flowsim.FlowRecord]
    final_cios: dict[int, float]
    kpis: flowsim.KpiRecord

    def rows_for_cell(self, cell_id: int) -> list[WindowRow]:
        return [r for r in self.window_rows if r.cell_id == cell_id]


def run(cfg: ScenarioConfig, seed: int | None = None, out_dir: str | None = None,
        variant: str | None = None, duration_s: float | None = None,
        world: World | None = None) -> RunOutput:
    """Execute one scenario; optional arguments override the config."""
    seed = cfg.seed if seed is None else seed
    duration = cfg.duration_s if duration_s is None else duration_s
    son_cfg = cfg.son_cfg
    if variant is not None:
        son_cfg = son.SonConfig(
            step_size_db=son_cfg.step_size_db, update_period_s=son_cfg.update_period_s,
            cio_min_db=son_cfg.cio_min_db, cio_max_db=son_cfg.cio_max_db,
            variant=variant, reference_rule=son_cfg.reference_rule)

    world = world or build_world(cfg)
    sim = FlowSimulator(world.amap, world.cells, world.layers,
                        slot_duration=cfg.slot_duration_s, seed=seed)
    son_state = son.init_state(world.cells, world.small_ids, son_cfg)
    sim.set_cios(son_state.cio_db)

    slots_per_window = max(1, round(son_cfg.update_period_s / cfg.slot_duration_s))
    n_windows = int(duration // son_cfg.update_period_s)
    estimator = (loadcalc.scheduler_load if son_cfg.variant == son.LOCAL
                 else loadcalc.global_load)

    mean_size = world.layers[0].file_size_mean_mbits if world.layers else 4.0
    rows: list[WindowRow] = []
    for w in range(n_windows):
        measurements, flows = sim.run_window(slots_per_window)
        kpi = collect_kpis(flows, world.cluster_ids)
        analytic = AnalyticScenario(
            map=sim.amap, mean_file_size_mbits=mean_size,
            backhaul_capacity_mbps=world.backhaul_mbps)
        reports = {cid: estimator(mw) for cid, mw in measurements.items()}
        for cid in world.cluster_ids:
            mw = measurements[cid]
            rows.append(WindowRow(
                window=w, time_s=sim.time, cell_id=cid,
                cio_db=son_state.cio_db.get(cid, 0.0),
                scheduler_load=loadcalc.scheduler_load(mw),
                busy_load=loadcalc.busy_load(mw),
                global_load=loadcalc.global_load(mw),
                analytic_local_load=loadcalc.analytic_load_elastic(analytic, cid),
                analytic_global_load=loadcalc.analytic_global_elastic(analytic, cid),
                backhaul_occupancy_mean=float(np.mean(mw.bh_occupancy)),
                mean_ftt_s=kpi.ftt_mean_by_cell.get(cid),
                mut_mbps=kpi.mut_mbps, cet_mbps=kpi.cet_mbps))
        son_state = son.update(son_state, reports, son_cfg)
        sim.set_cios(son_state.cio_db)

    kpis = collect_kpis([r for r in sim.completed], world.cluster_ids)
    out = RunOutput(config_hash=cfg.config_hash(), seed=seed, out_dir=out_dir,
                    window_rows=rows, flow_records=sim.completed,
                    final_cios=dict(son_state.cio_db), kpis=kpis)
    if out_dir is not None:
        write_outputs(out, cfg, son_cfg, out_dir)
    return out


def write_outputs(out: RunOutput, cfg: ScenarioConfig, son_cfg: son.SonConfig,
                  out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "windows.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(WINDOW_COLUMNS)
        for r in out.window_rows:
            w.writerow([_fmt(getattr(r, c)) for c in WINDOW_COLUMNS])
    with open(os.path.join(out_dir, "flows.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(FLOW_COLUMNS)
        for rec in out.flow_records:
            w.writerow([_fmt(rec.arrival_s), rec.cell_id,
                        _fmt(rec.ftt_s), _fmt(rec.throughput_mbps)])

    last = max((r.window for r in out.window_rows), default=None)
    final_loads = {r.cell_id: {"scheduler_load": r.scheduler_load,
                               "busy_load": r.busy_load,
                               "global_load": r.global_load}
                   for r in out.window_rows if r.window == last}
    summary = {
        "scenario": cfg.name,
        "variant": son_cfg.variant,
        "final_cios_db": {str(k): v for k, v in sorted(out.final_cios.items())},
        "final_window_loads": {str(k): v for k, v in sorted(final_loads.items())},
        "completed_flows": out.kpis.n_flows,
        "mut_mbps": out.kpis.mut_mbps,
        "cet_mbps": out.kpis.cet_mbps,
        "mean_ftt_by_cell_s": {str(k): v for k, v in out.kpis.ftt_mean_by_cell.items()},
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    manifest = {"config_hash": out.config_hash, "seed": out.seed,
                "version": __version__}
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


SWEEP_PARAMETERS = ("backhaul_capacity", "epsilon", "lambda")


def _apply_sweep_value(raw: dict, parameter: str, value: float) -> dict:
    import copy

    raw = copy.deepcopy(raw)
    if parameter == "backhaul_capacity":
        raw["backhaul"]["small_mbps"] = value
    elif parameter == "epsilon":
        raw["son"]["step_size_db"] = value
    elif parameter == "lambda":
        raw["traffic"]["layers"][0]["arrival_rate"] = value
    else:
        raise ValueError(f"unknown sweep parameter {parameter!r}; "
                         f"choose from {SWEEP_PARAMETERS}")
    return raw


def sweep(cfg: ScenarioConfig, parameter: str, values, seed: int | None = None,
          out_dir: str | None = None, **run_kwargs) -> list[RunOutput]:
    """Independent runs over a parameter range; seeds derive as seed ^ index."""
    from .scenario import load_config

    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    seed = cfg.seed if seed is None else seed
    outputs = []
    for i, value in enumerate(values):
        sub_cfg = load_config(_apply_sweep_value(cfg.raw, parameter, value))
        sub_out = os.path.join(out_dir, f"{parameter}_{value:g}") if out_dir else None
        outputs.append(run(sub_cfg, seed=seed ^ i, out_dir=sub_out, **run_kwargs))
    if out_dir is not None:
        with open(os.path.join(out_dir, "sweep_summary.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow([parameter, "mut_mbps", "cet_mbps"]
                       + [f"final_cio_{cid}" for cid in sorted(outputs[0].final_cios)])
            for value, o in zip(values, outputs):
                w.writerow([_fmt(value), _fmt(o.kpis.mut_mbps), _fmt(o.kpis.cet_mbps)]
                           + [_fmt(o.final_cios[cid]) for cid in sorted(o.final_cios)])
    return outputs
