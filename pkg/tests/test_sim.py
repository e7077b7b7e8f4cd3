import dataclasses
import json
import math

import pytest

from v0lver.cfmm import CONSTANT_PRODUCT, Reserves
from v0lver.config import builtin_scenarios
from v0lver.errors import ConfigError
from v0lver.sim import (
    baseline_cfmm_replay,
    dominance_sweep,
    equilibrium_experiment,
    lvr_experiment,
    run_many,
    run_scenario,
    user_price_experiment,
)

SCN = builtin_scenarios()


def shrink(cfg, blocks):
    return dataclasses.replace(cfg, blocks=blocks)


class TestDeterminism:
    def test_identical_seeds_are_byte_identical(self):
        cfg = shrink(SCN["default"], 40)
        a = run_scenario(cfg, 123)
        b = run_scenario(cfg, 123)
        assert json.dumps(a.metrics.to_dict(), sort_keys=True) == json.dumps(
            b.metrics.to_dict(), sort_keys=True
        )
        assert json.dumps(a.blocks, sort_keys=True) == json.dumps(b.blocks, sort_keys=True)

    def test_different_seeds_differ(self):
        cfg = shrink(SCN["default"], 40)
        a = run_scenario(cfg, 1)
        b = run_scenario(cfg, 2)
        assert a.metrics.final_eps != b.metrics.final_eps

    def test_run_many_is_jobs_invariant(self):
        cfg = shrink(SCN["default"], 25)
        seq = [m.to_dict() for m in run_many(cfg, 9, 4, jobs=1)]
        par = [m.to_dict() for m in run_many(cfg, 9, 4, jobs=2)]
        assert json.dumps(seq, sort_keys=True) == json.dumps(par, sort_keys=True)

    def test_run_many_rejects_no_runs(self):
        with pytest.raises(ConfigError):
            run_many(SCN["default"], 0, 0)


class TestScenarioRuns:
    def test_default_scenario_full_machinery(self):
        cfg = shrink(SCN["default"], 60)
        m = run_scenario(cfg, 0).metrics
        assert m.n_updates == 60  # always-policy updates every block
        assert m.n_octs > 0
        assert m.n_executed + m.n_burned <= m.n_octs
        assert m.conservation_error < 1e-9
        assert m.final_k > 0
        # realized extraction strictly below the no-rebate counterfactual
        assert 0.0 < m.realized_lvr < m.full_lvr

    def test_quiet_scenario_never_moves(self):
        cfg = dataclasses.replace(
            SCN["fallback"],
            blocks=30,
            flow=dataclasses.replace(SCN["fallback"].flow, arrival=0.0),
            producer=dataclasses.replace(SCN["fallback"].producer, update_policy="never"),
        )
        m = run_scenario(cfg, 3).metrics
        assert m.n_updates == 0 and m.n_octs == 0
        assert m.final_pool_x == cfg.pool_x and m.final_pool_y == cfg.pool_y
        assert math.isnan(m.lvr_ratio)
        assert m.conservation_error == 0.0

    def test_fallback_extraction_ratio_is_exactly_one(self):
        m = run_scenario(shrink(SCN["fallback"], 80), 7).metrics
        assert m.realized_lvr == pytest.approx(m.full_lvr, rel=1e-12)
        assert m.final_vault_value == 0.0

    def test_monopolist_waits_out_the_whole_schedule(self):
        cfg = shrink(SCN["monopolist"], 60)
        m = run_scenario(cfg, 4).metrics
        assert m.n_updates > 0
        assert set(m.updates_by_gap) == {cfg.z_max}

    def test_converter_breaks_even_at_conversion_prices(self):
        m = run_scenario(shrink(SCN["default"], 60), 5).metrics
        # each conversion is value-neutral at its own block's price
        assert abs(m.converter_value) < 1e-6 * max(1.0, m.full_lvr)


class TestBaselineReplay:
    def test_zero_rebate_protocol_shadows_plain_cfmm(self):
        cfg = shrink(SCN["fallback"], 50)
        res = run_scenario(cfg, 11, collect_trace=True)
        replay = baseline_cfmm_replay(
            CONSTANT_PRODUCT, Reserves(cfg.pool_x, cfg.pool_y), res.trace, cfg.blocks
        )
        assert len(replay) == cfg.blocks
        by_height = {row["height"]: row for row in res.blocks}
        for h, x, y in replay:
            assert by_height[h]["pool_x"] == pytest.approx(x, rel=1e-9, abs=1e-9)
            assert by_height[h]["pool_y"] == pytest.approx(y, rel=1e-9, abs=1e-9)

    def test_rebates_make_the_protocol_diverge(self):
        cfg = shrink(SCN["default"], 30)
        res = run_scenario(cfg, 11, collect_trace=True)
        replay = baseline_cfmm_replay(
            CONSTANT_PRODUCT, Reserves(cfg.pool_x, cfg.pool_y), res.trace, cfg.blocks
        )
        final = res.blocks[-1]
        assert final["pool_x"] != pytest.approx(replay[-1][1], rel=1e-9)


class TestExperiments:
    def test_lvr_experiment_tracks_expected_keep(self):
        cfg = shrink(SCN["lvr"], 120)
        out = lvr_experiment(cfg, 21, runs=12)
        assert out["runs"] == 12
        assert out["expected_keep"] == pytest.approx(0.2)
        lo, hi = out["ci95"]
        assert lo < out["mean_ratio"] < hi
        # crude sanity: nowhere near the no-rebate ratio of 1
        assert out["mean_ratio"] < 0.6

    def test_user_price_experiment_pools_runs(self):
        cfg = shrink(SCN["neutrality"], 150)
        out = user_price_experiment(cfg, 2, runs=2)
        assert out["orders"] > 200
        assert math.isfinite(out["z"])

    def test_equilibrium_experiment_counts_gaps(self):
        cfg = shrink(SCN["equilibrium"], 80)
        out = equilibrium_experiment(cfg, 1, runs=4)
        assert out["updates"] == sum(out["updates_by_gap"].values())
        assert out["frac_gap0"] == pytest.approx(1.0)

    def test_dominance_prefers_honesty_on_a_coarse_grid(self):
        out = dominance_sweep(
            SCN["dominance"], 3, multipliers=[0.95, 1.0, 1.05], trials=4_000
        )
        assert out["best"]["multiplier"] == 1.0
        assert out["best"]["alpha"] == 0.0
        assert out["best"]["utility"] == 0.0
        assert len(out["rows"]) == 9
