"""Built-in validation suite: canned scenarios with known answers.

Run via ``bhson validate``. Each check returns (name, passed, detail); the
CLI prints one line per check and exits nonzero if any fails. The suite
covers the estimator identities, the estimator/analytic agreement on a
stable processor-sharing cell, the backhaul-starvation signature, the
quadrature convergence of the analytic loads, and config-error surfacing.
"""

from __future__ import annotations

import numpy as np

from . import geometry, loadcalc, scenario
from .flowsim import FlowSimulator
from .loadcalc import AnalyticScenario, MeasurementWindow
from .synthetic import single_cell_world


def _window(used, count, gbr=None, bh=None):
    n = len(used)
    return MeasurementWindow(
        used=np.asarray(used, float), elastic_count=np.asarray(count),
        gbr_fraction=np.asarray(gbr if gbr is not None else np.zeros(n), float),
        bh_occupancy=np.asarray(bh if bh is not None else np.zeros(n), float))


def check_estimator_identities():
    w = _window([1.0, 0.0, 0.5, 0.5], [2, 0, 1, 1], bh=[1.0, 0.3, 0.9, 0.9])
    ok = (abs(loadcalc.scheduler_load(w) - 0.5) < 1e-12
          and abs(loadcalc.busy_load(w) - 0.75) < 1e-12
          and abs(loadcalc.global_load(w) - (3 + 0.3) / 4) < 1e-12)
    return ok, "hand-computed window means"


def check_estimator_dominance(n_trials=200, seed=7):
    rng = np.random.default_rng(seed)
    for _ in range(n_trials):
        n = int(rng.integers(1, 50))
        w = _window(rng.uniform(0, 1, n), rng.integers(0, 3, n),
                    gbr=rng.uniform(0, 1, n), bh=rng.uniform(0, 1, n))
        g, b = loadcalc.global_load(w), loadcalc.busy_load(w)
        if not (0.0 <= b <= g <= 1.0):
            return False, f"dominance violated: busy={b}, global={g}"
    return True, f"{n_trials} random windows"


def _simulate_busy_load(peak, c_bh, arrival_rate, duration_s=1200.0, seed=3):
    cells, amap, layers = single_cell_world(
        peak, arrival_rate, backhaul_capacity_mbps=c_bh)
    sim = FlowSimulator(amap, cells, layers, slot_duration=0.01, seed=seed)
    measurements, _ = sim.run_window(int(duration_s / 0.01))
    return measurements[0]


def check_ps_busy_probability():
    # rho = 2.5 users/s * 4 Mbits / 20 Mbps = 0.5; busy fraction of a stable
    # PS cell equals its utilization.
    mw = _simulate_busy_load(peak=20.0, c_bh=np.inf, arrival_rate=2.5)
    busy = loadcalc.busy_load(mw)
    return abs(busy - 0.5) <= 0.03, f"busy_load={busy:.3f}, expected 0.5 +- 0.03"


def check_backhaul_starvation():
    # Radio sees 50 Mbps but the 10 Mbps backhaul carries 9 Mbps of demand.
    mw = _simulate_busy_load(peak=50.0, c_bh=10.0, arrival_rate=2.25)
    sched = loadcalc.scheduler_load(mw)
    glob = loadcalc.global_load(mw)
    ok = sched < 0.4 and glob > 0.8
    return ok, f"scheduler_load={sched:.3f}, global_load={glob:.3f}"


def quadrature_loads(pitch_m: float):
    """Analytic (local, global) loads of a smooth one-candidate scenario.

    The served macro sector alone (plus the interfering ring) over its
    pitch-independent sector region: no attachment boundary crosses the
    integration domain, so the midpoint quadrature should converge cleanly.
    """
    cfg = scenario.load_config({
        "environment": {"grid_pitch_m": pitch_m},
        "traffic": {"layers": [{"kind": "elastic", "region": "whole-area",
                                "arrival_rate": 2.0,
                                "file_size_mean_mbits": 4.0}]},
        "backhaul": {"macro_mbps": 20.0},
    })
    cells = [c for c in scenario.build_cells(cfg) if c.kind == geometry.MACRO]
    layers = scenario.build_layers(cfg)
    g = cfg.raw["geometry"]
    wedge = geometry.sector_wedge_mask(
        geometry.Position(0.0, 0.0), float(g["served_sector_azimuth_deg"]),
        float(g["region_radius_m"]))
    best = geometry.best_server_mask(cells, cfg.env, target_id=0)
    margin = float(g["region_radius_m"]) + pitch_m
    amap = geometry.build_attachment_map(
        cells, cfg.env, layers, bounds=(-margin, margin, -margin, margin),
        region_mask=lambda x, y: wedge(x, y) & best(x, y))
    s = AnalyticScenario(map=amap, mean_file_size_mbits=4.0,
                         backhaul_capacity_mbps={0: 20.0})
    return (loadcalc.analytic_load_elastic(s, 0),
            loadcalc.analytic_global_elastic(s, 0))


def check_quadrature_convergence():
    coarse = quadrature_loads(10.0)
    fine = quadrature_loads(5.0)
    worst = max(abs(a - b) / max(b, 1e-9) for a, b in zip(coarse, fine))
    return worst < 0.01, f"max relative change {worst:.4%} when halving pitch"


def check_config_guard():
    try:
        scenario.load_config({"environment": {"bandwidth_mhz": 0.0}})
    except scenario.ConfigError as exc:
        return True, f"rejected: {exc}"
    return False, "zero-bandwidth config was accepted"


CHECKS = [
    ("estimator-identities", check_estimator_identities),
    ("estimator-dominance", check_estimator_dominance),
    ("ps-busy-probability", check_ps_busy_probability),
    ("backhaul-starvation", check_backhaul_starvation),
    ("quadrature-convergence", check_quadrature_convergence),
    ("config-guard", check_config_guard),
]


def run_validation(report=print) -> bool:
    """Execute every check; returns True if all passed."""
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure with its own detail
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= ok
        report(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all_ok
