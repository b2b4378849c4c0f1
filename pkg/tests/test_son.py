"""Stochastic-approximation controller tests."""

import numpy as np
import pytest

from bhson import son, synthetic
from bhson.geometry import MACRO, SMALL, CellConfig, Position
from bhson.son import (GLOBAL, LOCAL, MOST_LOADED, NEAREST_MACRO, SonConfig,
                       SonState, init_state, select_reference, update)


def macro(cid, x=0.0, y=0.0, carries=True):
    return CellConfig(id=cid, kind=MACRO, site=Position(x, y),
                      azimuth_deg=0.0, carries_traffic=carries)


def small(cid, x, y):
    return CellConfig(id=cid, kind=SMALL, site=Position(x, y))


class TestSonConfig:
    def test_defaults_valid(self):
        cfg = SonConfig()
        assert cfg.variant == GLOBAL

    @pytest.mark.parametrize("kwargs", [
        dict(step_size_db=0.0),
        dict(cio_min_db=5.0, cio_max_db=1.0),
        dict(update_period_s=0.0),
        dict(variant="hybrid"),
        dict(reference_rule="farthest-macro"),
    ])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SonConfig(**kwargs)


class TestSelectReference:
    def test_single_macro_serves_all(self):
        cells = [macro(0)] + [small(i, 100.0 * i, 0.0) for i in range(1, 5)]
        for s in cells[1:]:
            assert select_reference(cells, {}, NEAREST_MACRO, s) == 0

    def test_nearest_macro_distance(self):
        cells = [macro(0, 0, 0), macro(1, 500, 0), small(2, 400, 0)]
        assert select_reference(cells, {}, NEAREST_MACRO, cells[2]) == 1

    def test_equidistant_macros_lowest_id(self):
        cells = [macro(1, -100, 0), macro(2, 100, 0), small(3, 0, 0)]
        assert select_reference(cells, {}, NEAREST_MACRO, cells[2]) == 1

    def test_interferers_never_selected(self):
        cells = [macro(0, 0, 0), macro(100, 350, 0, carries=False),
                 small(2, 300, 0)]
        assert select_reference(cells, {}, NEAREST_MACRO, cells[2]) == 0

    def test_most_loaded(self):
        loads = {0: 0.2, 1: 0.9, 2: 0.5}
        assert select_reference([], loads, MOST_LOADED) == 1

    def test_no_macro_is_error(self):
        with pytest.raises(ValueError):
            select_reference([small(1, 0, 0)], {}, NEAREST_MACRO, small(1, 0, 0))


class TestUpdate:
    def cfg(self, **kwargs):
        return SonConfig(step_size_db=kwargs.pop("step_size_db", 1.0), **kwargs)

    def state(self, cio=0.0):
        return SonState(cio_db={1: cio}, reference={1: 0})

    def test_fixed_point(self):
        out = update(self.state(2.0), {0: 0.6, 1: 0.6}, self.cfg())
        assert out.cio_db[1] == pytest.approx(2.0)
        assert out.iteration == 1

    def test_sa_step(self):
        out = update(self.state(0.0), {0: 0.8, 1: 0.5}, self.cfg())
        assert out.cio_db[1] == pytest.approx(0.3)

    def test_clamp_at_max(self):
        cfg = self.cfg(cio_max_db=12.0)
        out = update(self.state(12.0), {0: 0.9, 1: 0.1}, cfg)
        assert out.cio_db[1] == 12.0

    def test_clamp_at_min(self):
        cfg = self.cfg(cio_min_db=0.0)
        out = update(self.state(0.0), {0: 0.1, 1: 0.9}, cfg)
        assert out.cio_db[1] == 0.0

    def test_out_of_range_load_rejected(self):
        with pytest.raises(ValueError):
            update(self.state(), {0: 1.2, 1: 0.5}, self.cfg())
        with pytest.raises(ValueError):
            update(self.state(), {0: -0.1, 1: 0.5}, self.cfg())

    def test_missing_report_rejected(self):
        with pytest.raises(ValueError):
            update(self.state(), {1: 0.5}, self.cfg())

    def test_direction_and_bounds_property(self):
        rng = np.random.default_rng(17)
        cfg = self.cfg(cio_min_db=0.0, cio_max_db=12.0)
        state = self.state(6.0)
        for _ in range(300):
            loads = {0: float(rng.uniform(0, 1)), 1: float(rng.uniform(0, 1))}
            new = update(state, loads, cfg)
            assert 0.0 <= new.cio_db[1] <= 12.0
            if 0.0 < state.cio_db[1] < 12.0:
                if loads[0] > loads[1]:
                    assert new.cio_db[1] > state.cio_db[1]
                elif loads[0] < loads[1]:
                    assert new.cio_db[1] < state.cio_db[1]
            state = new

    def test_reference_cio_untouched(self):
        state = SonState(cio_db={1: 1.0, 2: 2.0}, reference={1: 0, 2: 0})
        out = update(state, {0: 0.5, 1: 0.5, 2: 0.5}, self.cfg())
        assert set(out.cio_db) == {1, 2}


class TestInitState:
    def test_initial_cios_clamped(self):
        cells = [macro(0), small(1, 100, 0)]
        cells[1].cio_db = 20.0
        st = init_state(cells, [1], SonConfig(cio_max_db=12.0))
        assert st.cio_db[1] == 12.0
        assert st.reference[1] == 0


class TestConvergence:
    def test_two_cell_balance_for_all_step_sizes(self):
        # Deterministic two-cell system: iterating the SA update drives the
        # load gap under 1e-3 within 500 iterations for each step size.
        loads_of = synthetic.two_cell_split_loads(
            total_demand=12.0, capacity_ref=20.0, capacity_small=10.0)
        cfg_base = dict(cio_min_db=-12.0, cio_max_db=12.0)
        for eps in (0.5, 1.0, 2.0):
            cfg = SonConfig(step_size_db=eps, **cfg_base)
            state = SonState(cio_db={1: 0.0}, reference={1: 0})
            converged_at = None
            for it in range(500):
                rho_ref, rho_s = loads_of(state.cio_db[1])
                state = update(state, {0: rho_ref, 1: rho_s}, cfg)
                rho_ref, rho_s = loads_of(state.cio_db[1])
                if abs(rho_ref - rho_s) < 1e-3:
                    converged_at = it
                    break
            assert converged_at is not None, f"no convergence for eps={eps}"
