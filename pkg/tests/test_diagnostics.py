"""Primal-dual bounds, martingale increments, and policy simulation."""

import numpy as np
import pytest

from cswitch import (
    ActionSet,
    Ar1Params,
    BatteryLattice,
    DemandModel,
    DiagnosticsReport,
    GridPrices,
    PathSet,
    RunConfig,
    SeasonalPrice,
    SweepError,
    build_battery_model,
    build_disturbance_sampling,
    martingale_increments,
    primal_dual,
    segment_grid,
    simulate_paths,
    simulate_policy,
    solve,
    sweep,
    value_at,
)


def make_solved(T=4, margins=(0.0, 5.0), params=None, n_samples=40, grid_count=41):
    model = build_battery_model(
        BatteryLattice(0.0, 10.0, 5.0),
        ActionSet(margins),
        DemandModel(10.0),
        GridPrices(0.0, 20.0),
    )
    rng = np.random.default_rng(23)
    sp = SeasonalPrice(10 + rng.uniform(-1, 1, T + 1), 1 + rng.uniform(-0.4, 0.4, T + 1))
    params = Ar1Params(0.0, 0.3, 0.8) if params is None else params
    sampling = build_disturbance_sampling(params, n_samples)
    grid = segment_grid(grid_count, -12.0, 12.0)
    return params, model, sp, solve(model, sp, sampling, grid)


class TestMartingaleIncrements:
    def test_shape(self):
        params, model, sp, res = make_solved()
        paths = simulate_paths(params, [1.0, 0.0], 4, 6, 5, seed=0)
        inc = martingale_increments(res, paths)
        assert inc.shape == (6, 4, model.n_levels, model.n_actions)

    def test_zero_mean_within_monte_carlo_error(self):
        params, model, sp, res = make_solved()
        paths = simulate_paths(params, [1.0, 0.0], 4, 64, 32, seed=1)
        inc = martingale_increments(res, paths)
        mean = inc.mean(axis=0)
        se = inc.std(axis=0, ddof=1) / np.sqrt(paths.n_paths)
        assert np.all(np.abs(mean) <= 6.0 * se + 1e-12)

    def test_sigma_zero_increments_vanish(self):
        params = Ar1Params(mu=0.1, sigma=0.0, phi=0.7)
        params, model, sp, res = make_solved(params=params, n_samples=2)
        paths = simulate_paths(params, [1.0, 0.5], 4, 5, 3, seed=2)
        inc = martingale_increments(res, paths)
        np.testing.assert_allclose(inc, 0.0, atol=1e-12)

    def test_forced_subsimulation_equals_realized(self):
        # a single nested draw equal to the realized innovation makes
        # every increment identically zero
        params, model, sp, res = make_solved()
        ps = simulate_paths(params, [1.0, 0.0], 4, 5, 3, seed=3)
        forced = PathSet(
            states=ps.states,
            primary=ps.primary,
            nested=ps.primary[:, :, None].copy(),
            seed=ps.seed,
            phi=ps.phi,
        )
        inc = martingale_increments(res, forced)
        np.testing.assert_allclose(inc, 0.0, atol=1e-12)

    def test_horizon_mismatch_rejected(self):
        params, model, sp, res = make_solved()
        paths = simulate_paths(params, [1.0, 0.0], 3, 4, 2, seed=4)
        with pytest.raises(ValueError):
            martingale_increments(res, paths)


class TestPrimalDual:
    def test_pathwise_ordering_and_bracket(self):
        params, model, sp, res = make_solved()
        paths = simulate_paths(params, [1.0, 0.0], 4, 40, 16, seed=5)
        rep = primal_dual(res, paths)
        assert np.all(rep.lower_paths <= rep.upper_paths + 1e-9)
        # the bracket must cover the solver value up to Monte Carlo error
        z0 = np.array([1.0, 0.0])
        for p in range(model.n_levels):
            v0 = value_at(res, 0, p, z0)
            assert rep.lower_mean[p] - 5 * rep.lower_se[p] - 1e-6 <= v0
            assert v0 <= rep.upper_mean[p] + 5 * rep.upper_se[p] + 1e-6

    def test_report_metadata(self):
        params, model, sp, res = make_solved()
        paths = simulate_paths(params, [1.0, 0.0], 4, 7, 3, seed=6)
        rep = primal_dual(res, paths)
        assert rep.n_paths == 7 and rep.n_nested == 3 and rep.seed == 6
        assert rep.lower_paths.shape == (model.n_levels, 7)
        np.testing.assert_array_equal(rep.levels, model.lattice.levels)

    def test_single_path_has_zero_se(self):
        params, model, sp, res = make_solved()
        paths = simulate_paths(params, [1.0, 0.0], 4, 1, 3, seed=7)
        rep = primal_dual(res, paths)
        assert np.all(rep.lower_se == 0.0) and np.all(rep.upper_se == 0.0)

    def test_deterministic_given_paths(self):
        params, model, sp, res = make_solved()
        paths = simulate_paths(params, [1.0, 0.0], 4, 12, 6, seed=8)
        r1 = primal_dual(res, paths)
        r2 = primal_dual(res, paths)
        np.testing.assert_array_equal(r1.lower_paths, r2.lower_paths)
        np.testing.assert_array_equal(r1.upper_paths, r2.upper_paths)

    def test_without_increments_still_ordered(self):
        params, model, sp, res = make_solved()
        paths = simulate_paths(params, [1.0, 0.0], 4, 60, 8, seed=9)
        plain = primal_dual(res, paths, increments=False)
        corrected = primal_dual(res, paths, increments=True)
        assert np.all(plain.lower_paths <= plain.upper_paths + 1e-9)
        # both lower estimators target the same policy value
        spread = np.sqrt(plain.lower_se**2 + corrected.lower_se**2)
        assert np.all(
            np.abs(plain.lower_mean - corrected.lower_mean) <= 6 * spread + 1e-9
        )

    def test_nn_variant_runs_and_is_ordered(self):
        params, model, sp, res = make_solved()
        paths = simulate_paths(params, [1.0, 0.0], 4, 10, 4, seed=10)
        rep = primal_dual(res, paths, nn=True)
        assert np.all(rep.lower_paths <= rep.upper_paths + 1e-9)

    def test_report_validation(self):
        ones = np.ones(2)
        with pytest.raises(ValueError):
            DiagnosticsReport(
                levels=np.array([0.0, 5.0]),
                lower_mean=ones, lower_se=ones * 0.1,
                upper_mean=ones - 1.0, upper_se=ones * 0.1,
                n_paths=2, n_nested=2, seed=0,
                lower_paths=np.ones((2, 2)), upper_paths=np.ones((2, 2)),
            )
        with pytest.raises(ValueError):
            DiagnosticsReport(
                levels=np.array([0.0, 5.0]),
                lower_mean=ones, lower_se=-ones,
                upper_mean=ones, upper_se=ones * 0.1,
                n_paths=2, n_nested=2, seed=0,
                lower_paths=np.ones((2, 2)), upper_paths=np.ones((2, 2)),
            )


class TestSimulatePolicy:
    def test_deterministic_and_shapes(self):
        params, model, sp, res = make_solved()
        sim1 = simulate_policy(res, params, [1.0, 0.0], 30, seed=11, start_level_index=1)
        sim2 = simulate_policy(res, params, [1.0, 0.0], 30, seed=11, start_level_index=1)
        np.testing.assert_array_equal(sim1.cum_rewards, sim2.cum_rewards)
        assert sim1.level_idx.shape == (30, 5)
        assert sim1.action_idx.shape == (30, 4)
        assert np.all(sim1.level_idx[:, 0] == 1)
        assert sim1.start_level_index == 1

    def test_start_level_bounds(self):
        params, model, sp, res = make_solved()
        with pytest.raises(ValueError):
            simulate_policy(res, params, [1.0, 0.0], 5, seed=0, start_level_index=99)

    def test_mean_matches_policy_value_estimate(self):
        # the forward simulation and the no-increment lower recursion
        # estimate the same policy value
        params, model, sp, res = make_solved()
        paths = simulate_paths(params, [1.0, 0.0], 4, 400, 2, seed=12)
        plain = primal_dual(res, paths, increments=False)
        sim = simulate_policy(res, params, [1.0, 0.0], 4000, seed=13, start_level_index=0)
        sim_se = sim.cum_rewards.std(ddof=1) / np.sqrt(sim.cum_rewards.shape[0])
        spread = np.sqrt(sim_se**2 + plain.lower_se[0] ** 2)
        assert abs(sim.cum_rewards.mean() - plain.lower_mean[0]) <= 6 * spread


class TestSweep:
    def tiny_config(self, **over):
        base = dict(
            horizon=3, p_max=10.0, margins=(0.0, 5.0), n_samples=4,
            grid_count=11, n_paths=4, n_subsims=2, seed=1,
        )
        base.update(over)
        return RunConfig(**base)

    def test_runs_in_order(self):
        cfgs = [self.tiny_config(), self.tiny_config(phi=0.5)]
        out = sweep(cfgs)
        assert len(out) == 2
        assert out[0][0] is cfgs[0] and out[1][0] is cfgs[1]
        for _, rep in out:
            assert np.all(rep.lower_mean <= rep.upper_mean + 1e-9)

    def test_failure_identifies_config(self):
        cfgs = [self.tiny_config(), self.tiny_config(margins=())]
        with pytest.raises(SweepError, match="margins"):
            sweep(cfgs)
