"""Error estimator and the accept/shrink/grow controller."""

import math

import numpy as np
import pytest

from acbdf2.adaptive import (
    AdaptiveConfig,
    DEFAULT_RATIO_CAP,
    TooManyRejects,
    ZeroReference,
    advance,
    error_estimate,
    tau_ada,
)
from acbdf2.spatial import Grid2D
from acbdf2.stepper import StepperState
from acbdf2.time_mesh import S0_LIMIT


class TestErrorEstimate:
    def test_l2_is_scale_free(self):
        u2 = np.full((4, 4), 2.0)
        u1 = np.ones((4, 4))
        for h in (0.1, 0.25):
            assert error_estimate(u1, u2, h, "l2") == pytest.approx(0.5, rel=1e-15)

    def test_max_norm_variant(self):
        u2 = np.array([[4.0, 0.0], [0.0, 0.0]])
        u1 = np.array([[4.0, 1.0], [0.0, 0.0]])
        assert error_estimate(u1, u2, 0.5, "max") == pytest.approx(0.25, rel=1e-15)

    def test_zero_reference_raises(self):
        with pytest.raises(ZeroReference):
            error_estimate(np.ones((2, 2)), np.zeros((2, 2)), 0.5)

    def test_unknown_norm_raises(self):
        with pytest.raises(ValueError):
            error_estimate(np.ones((2, 2)), np.ones((2, 2)), 0.5, "l1")


class TestTauAda:
    CFG = AdaptiveConfig(rho=0.6, tol=1e-4, tau_max=0.1, tau_min=1e-3)

    def test_formula_in_the_open_window(self):
        # rho sqrt(tol/e) tau with e = tol/4 doubles then scales by rho
        got = tau_ada(self.CFG.tol / 4.0, 0.01, self.CFG)
        assert got == pytest.approx(0.6 * 2.0 * 0.01, rel=1e-14)

    def test_zero_estimate_asks_for_the_cap(self):
        assert tau_ada(0.0, 0.01, self.CFG) == self.CFG.tau_max

    def test_clamps_to_the_window(self):
        assert tau_ada(1e3, 0.01, self.CFG) == self.CFG.tau_min
        assert tau_ada(1e-12, 0.01, self.CFG) == self.CFG.tau_max

    def test_negative_estimate_raises(self):
        with pytest.raises(ValueError):
            tau_ada(-1.0, 0.01, self.CFG)


class TestAdaptiveConfig:
    def test_defaults_are_valid(self):
        cfg = AdaptiveConfig()
        assert cfg.ratio_cap == DEFAULT_RATIO_CAP
        assert 0.0 < DEFAULT_RATIO_CAP < S0_LIMIT

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"rho": 0.0},
            {"rho": 1.5},
            {"tol": 0.0},
            {"tau_min": 0.0},
            {"tau_min": 0.2, "tau_max": 0.1},
            {"ratio_cap": -1.0},
            {"max_rejects": 0},
            {"error_norm": "l1"},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            AdaptiveConfig(**kwargs)

    def test_cap_may_be_disabled(self):
        assert AdaptiveConfig(ratio_cap=None).ratio_cap is None


class TestAdvance:
    GRID = Grid2D(M=8, L=1.0)
    EPS = 0.05

    def march(self, u0, cfg, n_levels):
        """Minimal accept-fold loop around :func:`advance`."""
        state = StepperState(u_prev=u0, u_prev2=None, n=0, t=0.0)
        tau = cfg.tau_min
        taus, rejects = [], 0
        for _ in range(n_levels):
            res = advance(state, tau, self.GRID, self.EPS, cfg)
            rejects += len(res.rejected)
            taus.append(res.record.tau)
            state = StepperState(
                u_prev=res.u,
                u_prev2=state.u_prev,
                n=res.record.n,
                t=res.record.t,
                tau_prev=res.record.tau,
            )
            tau = res.tau_next
        return state, taus, rejects

    def test_first_level_has_identical_candidates(self):
        cfg = AdaptiveConfig()
        state = StepperState(
            u_prev=np.full((8, 8), 0.9), u_prev2=None, n=0, t=0.0
        )
        res = advance(state, 1e-3, self.GRID, self.EPS, cfg)
        rec = res.record
        assert rec.e_est == 0.0
        assert rec.accepted
        assert rec.ratio == 0.0
        assert rec.n == 1
        assert rec.t == pytest.approx(1e-3, rel=1e-15)
        assert math.isnan(rec.energy) and math.isnan(rec.modified_energy)
        assert res.rejected == []

    def test_growth_is_ratio_capped(self):
        cfg = AdaptiveConfig(ratio_cap=2.0, tol=1e-2)
        state = StepperState(
            u_prev=np.full((8, 8), 0.9), u_prev2=None, n=0, t=0.0
        )
        res = advance(state, 1e-3, self.GRID, self.EPS, cfg)
        # e = 0 asks for tau_max; the cap cuts that to 2 tau
        assert res.tau_next == pytest.approx(2e-3, rel=1e-14)

    def test_uncapped_growth_reaches_tau_max_immediately(self):
        cfg = AdaptiveConfig(ratio_cap=None, tol=1e-2)
        state = StepperState(
            u_prev=np.full((8, 8), 0.9), u_prev2=None, n=0, t=0.0
        )
        res = advance(state, 1e-3, self.GRID, self.EPS, cfg)
        assert res.tau_next == cfg.tau_max

    def test_relaxation_run_grows_to_tau_max(self):
        # constant start at 0.9: smooth relaxation toward 1, so the accepted
        # steps climb until the window cap and stay there
        cfg = AdaptiveConfig(tol=1e-2)
        state, taus, rejects = self.march(np.full((8, 8), 0.9), cfg, 40)
        assert rejects == 0
        assert taus[-1] == cfg.tau_max
        assert taus == sorted(taus)
        # relaxation toward the pure phase decays like exp(-2t)
        assert abs(float(state.u_prev.max()) - 1.0) < 1e-3
        assert float(state.u_prev.min()) >= 0.9

    def test_state_is_not_mutated(self, rng):
        cfg = AdaptiveConfig()
        u0 = 0.5 * rng.uniform(-1.0, 1.0, (8, 8))
        copy = u0.copy()
        state = StepperState(u_prev=u0, u_prev2=None, n=0, t=0.0)
        advance(state, 1e-3, self.GRID, self.EPS, cfg)
        np.testing.assert_array_equal(state.u_prev, copy)
        assert state.n == 0

    def two_level_state(self, rng):
        u0 = 0.2 * np.sin(
            2.0 * math.pi * self.GRID.meshgrid()[0]
        ) + 0.1 * rng.uniform(-1.0, 1.0, (8, 8))
        u1 = u0 + 1e-3 * rng.uniform(-1.0, 1.0, (8, 8))
        return StepperState(u_prev=u1, u_prev2=u0, n=2, t=0.02, tau_prev=0.01)

    def test_estimate_strictly_below_tolerance_accepts(self, rng):
        # acceptance is e < tol, so any e >= tol must reject
        state = self.two_level_state(rng)
        cfg = AdaptiveConfig(tol=1e-3)
        res = advance(state, 0.01, self.GRID, self.EPS, cfg)
        assert res.record.accepted
        assert res.record.e_est < cfg.tol
        for rec in res.rejected:
            assert not rec.accepted
            assert rec.e_est >= cfg.tol

    def test_too_many_rejects(self, rng):
        state = self.two_level_state(rng)
        cfg = AdaptiveConfig(tol=1e-15, max_rejects=2, tau_min=1e-4, tau_max=0.1)
        with pytest.raises(TooManyRejects, match="rejected 3 times"):
            advance(state, 0.01, self.GRID, self.EPS, cfg)

    def test_rejection_records_carry_the_trial_sizes(self, rng):
        state = self.two_level_state(rng)
        cfg = AdaptiveConfig(tol=5e-7, max_rejects=10, tau_min=1e-5)
        res = advance(state, 0.02, self.GRID, self.EPS, cfg)
        assert len(res.rejected) >= 1
        sizes = [rec.tau for rec in res.rejected] + [res.record.tau]
        assert sizes == sorted(sizes, reverse=True)
        assert res.record.accepted
