"""Scenario configuration: schema, validation, presets and world building.

A scenario is a YAML mapping with ``geometry``, ``environment``, ``traffic``,
``backhaul``, ``son`` and ``run`` sections. :func:`load_config` validates it
into a :class:`ScenarioConfig`; :func:`build_world` turns that into cells, an
attachment map and traffic layers ready for the simulator.

The shipped ``paper_table1`` preset is the backhaul-constrained hetnet
benchmark: one served macro sector with four small cells on 10 Mbps
backhaul, an interfering ring of six trisector macro sites at 500 m
intersite distance, and two elastic traffic layers (8 users/s over the
sector, 4 users/s over the initial small-cell coverage).
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field

import yaml

from . import flowsim, geometry, son
from .geometry import (MACRO, SMALL, CellConfig, Position, RadioEnvironment,
                       best_server_mask, build_attachment_map, sector_wedge_mask)


class ConfigError(ValueError):
    """A scenario config failed validation; message carries the key path."""


PRESETS = {}


def _preset(fn):
    PRESETS[fn.__name__] = fn
    return fn


@_preset
def paper_table1() -> dict:
    return {
        "name": "paper_table1",
        "geometry": {
            "intersite_distance_m": 500.0,
            "macro_tx_power_dbm": 46.0,
            "small_tx_power_dbm": 38.0,
            "sector_azimuths_deg": [0.0, 120.0, 240.0],
            "served_sector_azimuth_deg": 0.0,
            "region_radius_m": 290.0,
            "small_cells": [
                {"range_m": 240.0, "angle_deg": 40.0},
                {"range_m": 240.0, "angle_deg": -40.0},
                {"range_m": 280.0, "angle_deg": 12.0},
                {"range_m": 280.0, "angle_deg": -12.0},
            ],
        },
        "environment": {
            "bandwidth_mhz": 20.0,
            "noise_density_dbm_hz": -174.0,
            "bandwidth_efficiency": 0.65,
            "spectral_efficiency_cap": 1.6,
            "min_coupling_distance_m": 10.0,
            "grid_pitch_m": 5.0,
        },
        "traffic": {
            "layers": [
                {"kind": "elastic", "region": "whole-area",
                 "arrival_rate": 8.0, "file_size_mean_mbits": 4.0},
                {"kind": "elastic", "region": "hotspot",
                 "arrival_rate": 4.0, "file_size_mean_mbits": 4.0},
            ],
        },
        "backhaul": {
            "macro_mbps": math.inf,
            "small_mbps": 10.0,
            "overrides": {},
        },
        "son": {
            "variant": "global",
            "step_size_db": 2.0,
            "update_period_s": 60.0,
            "cio_min_db": -12.0,
            "cio_max_db": 12.0,
            "reference_rule": "nearest-macro",
        },
        "run": {
            "duration_s": 1800.0,
            "slot_duration_s": 0.01,
            "seed": 1,
        },
    }


def _get(section: dict, key: str, path: str, cast=None, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"{path}.{key}: missing required key")
        return default
    value = section[key]
    if cast is not None:
        try:
            return cast(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}.{key}: {exc}") from exc
    return value


@dataclass
class ScenarioConfig:
    """A validated scenario; ``raw`` is the canonical dict it was built from."""

    name: str
    raw: dict
    env: RadioEnvironment
    son_cfg: son.SonConfig
    duration_s: float
    slot_duration_s: float
    seed: int

    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def load_config(source) -> ScenarioConfig:
    """Validate a scenario given as a dict, preset name, or YAML file path."""
    if isinstance(source, dict):
        raw = copy.deepcopy(source)
    elif source in PRESETS:
        raw = PRESETS[source]()
    else:
        try:
            with open(source) as f:
                raw = yaml.safe_load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {source!r}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}: top level must be a mapping")

    base = paper_table1()
    for section in ("geometry", "environment", "traffic", "backhaul", "son", "run"):
        merged = base[section]
        merged.update(raw.get(section, {}))
        raw[section] = merged
    raw.setdefault("name", "custom")

    env_raw = raw["environment"]
    try:
        env = RadioEnvironment(
            bandwidth_mhz=float(env_raw["bandwidth_mhz"]),
            noise_density_dbm_hz=float(env_raw["noise_density_dbm_hz"]),
            spectral_efficiency_cap=float(env_raw["spectral_efficiency_cap"]),
            bandwidth_efficiency=float(env_raw["bandwidth_efficiency"]),
            min_coupling_distance_m=float(env_raw["min_coupling_distance_m"]),
            grid_pitch_m=float(env_raw["grid_pitch_m"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"environment: {exc}") from exc

    son_raw = raw["son"]
    try:
        son_cfg = son.SonConfig(
            step_size_db=float(son_raw["step_size_db"]),
            update_period_s=float(son_raw["update_period_s"]),
            cio_min_db=float(son_raw["cio_min_db"]),
            cio_max_db=float(son_raw["cio_max_db"]),
            variant=son_raw["variant"],
            reference_rule=son_raw["reference_rule"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"son: {exc}") from exc

    run_raw = raw["run"]
    duration = _get(run_raw, "duration_s", "run", float, required=True)
    slot = _get(run_raw, "slot_duration_s", "run", float, required=True)
    seed = _get(run_raw, "seed", "run", int, required=True)
    if slot <= 0:
        raise ConfigError("run.slot_duration_s: must be > 0")
    if duration < son_cfg.update_period_s:
        raise ConfigError("run.duration_s: must cover at least one SON period")

    for i, layer in enumerate(raw["traffic"]["layers"]):
        path = f"traffic.layers[{i}]"
        if _get(layer, "arrival_rate", path, float, required=True) < 0:
            raise ConfigError(f"{path}.arrival_rate: must be >= 0")
        if layer.get("region") not in (geometry.WHOLE_AREA, geometry.HOTSPOT):
            raise ConfigError(f"{path}.region: must be whole-area or hotspot")

    bh = raw["backhaul"]
    for key in ("macro_mbps", "small_mbps"):
        if _get(bh, key, "backhaul", float, required=True) <= 0:
            raise ConfigError(f"backhaul.{key}: must be > 0 (use .inf for unconstrained)")

    return ScenarioConfig(
        name=str(raw["name"]), raw=raw, env=env, son_cfg=son_cfg,
        duration_s=duration, slot_duration_s=slot, seed=seed)


@dataclass
class World:
    """Everything a run needs: cells, map, layers and the cluster ids."""

    cells: list[CellConfig]
    amap: geometry.AttachmentMap
    layers: list[flowsim.TrafficLayer]
    cluster_ids: list[int]       # served macro sector + small cells
    macro_id: int
    small_ids: list[int]
    backhaul_mbps: dict[int, float]


def build_cells(cfg: ScenarioConfig) -> list[CellConfig]:
    """Instantiate the cell list of a scenario.

    Id convention: 0 = served macro sector, 1..N = small cells, 100+ = pure
    interferers (remaining central sectors and the surrounding macro ring).
    """
    g = cfg.raw["geometry"]
    isd = float(g["intersite_distance_m"])
    p_macro = float(g["macro_tx_power_dbm"])
    p_small = float(g["small_tx_power_dbm"])
    azimuths = [float(a) for a in g["sector_azimuths_deg"]]
    served_az = float(g["served_sector_azimuth_deg"])
    if served_az not in azimuths:
        raise ConfigError("geometry.served_sector_azimuth_deg: not in sector_azimuths_deg")
    bh = cfg.raw["backhaul"]
    overrides = {int(k): float(v) for k, v in (bh.get("overrides") or {}).items()}

    origin = Position(0.0, 0.0)
    cells = [CellConfig(id=0, kind=MACRO, site=origin, azimuth_deg=served_az,
                        tx_power_dbm=p_macro,
                        backhaul_capacity_mbps=overrides.get(0, float(bh["macro_mbps"])))]
    for i, sc in enumerate(g["small_cells"], start=1):
        r = float(sc["range_m"])
        ang = math.radians(served_az + float(sc["angle_deg"]))
        cells.append(CellConfig(
            id=i, kind=SMALL, site=Position(r * math.cos(ang), r * math.sin(ang)),
            tx_power_dbm=p_small,
            backhaul_capacity_mbps=overrides.get(i, float(bh["small_mbps"]))))

    next_id = 100
    for az in azimuths:
        if az != served_az:
            cells.append(CellConfig(id=next_id, kind=MACRO, site=origin,
                                    azimuth_deg=az, tx_power_dbm=p_macro,
                                    carries_traffic=False))
            next_id += 1
    for k in range(6):
        site = Position(isd * math.cos(math.pi * k / 3.0),
                        isd * math.sin(math.pi * k / 3.0))
        for az in azimuths:
            cells.append(CellConfig(id=next_id, kind=MACRO, site=site,
                                    azimuth_deg=az, tx_power_dbm=p_macro,
                                    carries_traffic=False))
            next_id += 1
    return cells


def build_layers(cfg: ScenarioConfig) -> list[flowsim.TrafficLayer]:
    layers = []
    for layer in cfg.raw["traffic"]["layers"]:
        layers.append(flowsim.TrafficLayer(
            arrival_rate=float(layer["arrival_rate"]),
            region=layer["region"],
            file_size_mean_mbits=float(layer.get("file_size_mean_mbits", 4.0)),
            kind=layer.get("kind", flowsim.ELASTIC),
            gbr_rate_mbps=float(layer.get("gbr_rate_mbps", 0.0)),
            gbr_mean_holding_s=float(layer.get("gbr_mean_holding_s", 0.0))))
    return layers


def build_world(cfg: ScenarioConfig) -> World:
    """Cells, attachment map (at the configured grid pitch) and layers."""
    cells = build_cells(cfg)
    layers = build_layers(cfg)
    g = cfg.raw["geometry"]
    radius = float(g["region_radius_m"])
    served_az = float(g["served_sector_azimuth_deg"])
    wedge = sector_wedge_mask(Position(0.0, 0.0), served_az, radius)
    # The served area is the sector wedge minus pixels that a surrounding
    # macro would dominate anyway (no traffic is offered outside the
    # cluster's natural coverage).
    best = best_server_mask(cells, cfg.env, target_id=0)

    def region(x, y):
        return wedge(x, y) & best(x, y)

    margin = radius + cfg.env.grid_pitch_m
    amap = build_attachment_map(
        cells, cfg.env, layers,
        bounds=(-margin, margin, -margin, margin), region_mask=region)
    small_ids = [c.id for c in cells if c.kind == SMALL and c.carries_traffic]
    backhaul = {c.id: c.backhaul_capacity_mbps for c in cells if c.carries_traffic}
    return World(cells=cells, amap=amap, layers=layers,
                 cluster_ids=[0] + small_ids, macro_id=0,
                 small_ids=small_ids, backhaul_mbps=backhaul)
