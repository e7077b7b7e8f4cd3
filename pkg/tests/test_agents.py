import numpy as np
import pytest

from v0lver.agents import (
    PriceProcess,
    aggregate_market_flow,
    choose_inserts,
    decide_update,
    gen_user_orders,
    price_target,
    producer_utility,
)
from v0lver.allocation import OrderSide
from v0lver.cfmm import CONSTANT_PRODUCT, Reserves
from v0lver.config import FlowModel, ProducerModel
from v0lver.rebate import ZERO_REBATE, RebateSchedule

C = CONSTANT_PRODUCT
SCHEDULE = RebateSchedule(z_max=4, beta0=0.8)


class TestPriceProcess:
    def test_martingale_in_expectation(self):
        rng = np.random.default_rng(0)
        proc = PriceProcess(eps=100.0, sigma=0.05)
        factors = proc.sample_factors(rng, 200_000)
        # E[factor] = 1 for the drift-corrected walk
        assert factors.mean() == pytest.approx(1.0, abs=3 * factors.std() / 200_000**0.5)

    def test_step_matches_factor_construction(self):
        proc = PriceProcess(eps=100.0, sigma=0.02)
        out = proc.step(np.random.default_rng(5))
        z = np.random.default_rng(5).standard_normal()
        assert out == pytest.approx(100.0 * np.exp(-0.5 * 0.02**2 + 0.02 * z))
        assert proc.eps == out

    def test_drift_shifts_the_mean(self):
        rng = np.random.default_rng(1)
        proc = PriceProcess(eps=1.0, sigma=0.01, drift=0.5)
        factors = proc.sample_factors(rng, 50_000)
        assert factors.mean() == pytest.approx(np.exp(0.5), rel=1e-2)


class TestUserFlow:
    FLOW = FlowModel(arrival=5.0, limit_prob=0.4, limit_width=0.01, value_frac=0.5)

    def test_orders_respect_bounds_and_sides(self):
        rng = np.random.default_rng(2)
        eps = 100.0
        cap = self.FLOW.value_frac * min(10.0, 0.1 * eps)
        for _ in range(200):
            for o in gen_user_orders(rng, self.FLOW, eps, 10.0, 0.1):
                if o.side is OrderSide.BUY_Y:
                    assert 0.0 < o.size <= cap
                else:
                    assert 0.0 < o.size <= cap / eps
                if o.limit is not None:
                    assert abs(o.limit / eps - 1.0) <= self.FLOW.limit_width

    def test_sides_and_value_are_symmetric(self):
        rng = np.random.default_rng(3)
        eps = 50.0
        signed_value = n = 0.0
        for _ in range(3_000):
            for o in gen_user_orders(rng, self.FLOW, eps, 10.0, 1.0):
                v = o.size if o.side is OrderSide.BUY_Y else o.size * eps
                signed_value += v if o.side is OrderSide.BUY_Y else -v
                n += 1
        cap = self.FLOW.value_frac * min(10.0, 1.0 * eps)
        se = cap * 0.6 * n**0.5  # loose bound on the sum's deviation
        assert abs(signed_value) < 3 * se

    def test_zero_arrival_means_no_orders(self):
        rng = np.random.default_rng(4)
        flow = FlowModel(arrival=0.0, limit_prob=0.0, limit_width=0.0, value_frac=0.5)
        assert gen_user_orders(rng, flow, 100.0, 10.0, 0.1) == []

    def test_aggregate_flow_matches_order_flow_distribution(self):
        flow = FlowModel(arrival=3.0, limit_prob=0.0, limit_width=0.0, value_frac=0.5)
        eps, mx, my = 100.0, 10.0, 0.1
        dx, dy = aggregate_market_flow(np.random.default_rng(6), flow, eps, mx, my, 40_000)
        sx = sy = 0.0
        rng = np.random.default_rng(7)
        reps = 4_000
        for _ in range(reps):
            for o in gen_user_orders(rng, flow, eps, mx, my):
                if o.side is OrderSide.BUY_Y:
                    sx += o.size
                else:
                    sy += o.size
        assert dx.mean() == pytest.approx(sx / reps, rel=0.1)
        assert dy.mean() == pytest.approx(sy / reps, rel=0.1)
        # expected one-side value: arrival/2 orders of mean value cap/2
        cap = flow.value_frac * min(mx, my * eps)
        assert dx.mean() == pytest.approx(flow.arrival / 2 * cap / 2, rel=0.05)


class TestProducerUtility:
    def test_no_selftrade_reduces_to_move_payoff(self):
        r = Reserves(10_000.0, 100.0)
        u = producer_utility(C, r, 104.0, SCHEDULE, 10.0, 0.1, 1.0, 0.0)
        # full extraction at eps, kept fraction (1 - 0.8)
        from v0lver.cfmm import max_lvr

        _, lvr = max_lvr(C, r, 104.0)
        assert u == pytest.approx(0.2 * lvr, rel=1e-12)

    def test_updating_to_eps_with_zero_alpha_is_zero_at_eps_start(self):
        r = C.reserves_at_price(1e6, 100.0)
        assert producer_utility(C, r, 100.0, SCHEDULE, 10.0, 0.1, 1.0, 0.0) == 0.0

    def test_selftrade_against_balanced_flow_loses(self):
        # at multiplier 1 the batch clears at eps on average; pushing extra
        # size through moves the price against the trade, so alpha > 0 loses
        r = C.reserves_at_price(1e6, 100.0)
        flow = FlowModel(arrival=4.0, limit_prob=0.0, limit_width=0.0, value_frac=0.5)
        dx, dy = aggregate_market_flow(np.random.default_rng(8), flow, 100.0, 10.0, 0.1, 20_000)
        u0 = producer_utility(C, r, 100.0, SCHEDULE, 10.0, 0.1, 1.0, 0.0, dx, dy)
        u1 = producer_utility(C, r, 100.0, SCHEDULE, 10.0, 0.1, 1.0, 0.5, dx, dy)
        assert u0 == 0.0
        assert u1 < u0

    def test_selftrade_requires_flow_samples(self):
        with pytest.raises(ValueError):
            producer_utility(C, Reserves(1, 1), 1.0, SCHEDULE, 1.0, 1.0, 1.0, 0.5)


class TestInsertChoice:
    def test_no_censoring_keeps_everything_sorted(self):
        rng = np.random.default_rng(9)
        assert choose_inserts(rng, {3, 1, 2}, 0.0) == [1, 2, 3]

    def test_full_censoring_drops_everything(self):
        rng = np.random.default_rng(10)
        assert choose_inserts(rng, [1, 2, 3], 1.0) == []

    def test_partial_censoring_rate(self):
        rng = np.random.default_rng(11)
        kept = sum(len(choose_inserts(rng, range(100), 0.3)) for _ in range(100))
        assert kept == pytest.approx(7_000, rel=0.05)


class TestUpdateDecision:
    R = Reserves(10_000.0, 100.0)

    def prod(self, **kw):
        base = dict(
            update_policy="always",
            price_policy="external",
            price_offset=1.0,
            self_trade_alpha=0.0,
            censor_rate=0.0,
            update_cost=0.0,
            min_keep=0.0,
        )
        base.update(kw)
        return ProducerModel(**base)

    def test_price_targets(self):
        assert price_target(self.prod(price_policy="external"), 104.0, 99.0) == 104.0
        assert price_target(self.prod(price_policy="offset", price_offset=1.02), 100.0, 99.0) == pytest.approx(102.0)
        assert price_target(self.prod(price_policy="stale"), 104.0, 99.0) == 99.0

    def test_never_policy(self):
        p = self.prod(update_policy="never")
        assert decide_update(p, SCHEDULE, C, self.R, 5, 2, 104.0, 103.0) is None

    def test_always_updates_at_current_height(self):
        p = self.prod()
        assert decide_update(p, SCHEDULE, C, self.R, 5, 2, 104.0, 103.0) == (5, 104.0)
        # even when there is nothing to gain
        assert decide_update(p, SCHEDULE, C, self.R, 5, 2, 100.0, 100.0) == (5, 100.0)

    def test_best_response_takes_current_label_when_profitable(self):
        p = self.prod(update_policy="best_response", update_cost=1e-9)
        got = decide_update(p, SCHEDULE, C, self.R, 5, 2, 104.0, 103.0)
        assert got == (5, 104.0)

    def test_best_response_skips_when_cost_dominates(self):
        # keep = 1 - beta0 = 0.2 of the tiny arbitrage does not cover cost
        p = self.prod(update_policy="best_response", update_cost=10.0)
        assert decide_update(p, SCHEDULE, C, self.R, 5, 2, 100.001, 100.0) is None

    def test_threshold_backdates_to_schedule_horizon(self):
        p = self.prod(update_policy="threshold", min_keep=1.0, update_cost=0.0)
        # height 10, last label 2: backdate to 10 - 4 = 6, where beta = 0
        got = decide_update(p, SCHEDULE, C, self.R, 10, 2, 104.0, 103.0)
        assert got == (6, 104.0)
        # a fresher last label forces a smaller gap and keep < 1: no update
        assert decide_update(p, SCHEDULE, C, self.R, 10, 8, 104.0, 103.0) is None

    def test_threshold_with_partial_keep(self):
        p = self.prod(update_policy="threshold", min_keep=0.55, update_cost=0.0)
        # gap 3 gives keep 0.8 >= 0.55 at label height-4+1
        got = decide_update(p, SCHEDULE, C, self.R, 10, 6, 104.0, 103.0)
        assert got == (7, 104.0)

    def test_zero_schedule_makes_every_gap_free(self):
        p = self.prod(update_policy="best_response", update_cost=0.0)
        got = decide_update(p, ZERO_REBATE, C, self.R, 5, 2, 104.0, 103.0)
        assert got == (5, 104.0)
