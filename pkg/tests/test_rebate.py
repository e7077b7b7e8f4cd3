import pytest
from hypothesis import given, strategies as st

from v0lver.cfmm import CONSTANT_PRODUCT, Reserves, max_lvr
from v0lver.errors import DomainError
from v0lver.rebate import (
    ZERO_REBATE,
    RebateSchedule,
    Vault,
    apply_rebated_move,
    beta_at,
    producer_arb_payoff,
    vault_reenter,
)

from oracles import brentq_vault_shed

C = CONSTANT_PRODUCT


class TestSchedule:
    def test_linear_ramp(self):
        s = RebateSchedule(z_max=4, beta0=0.8)
        assert [s.value_at(g) for g in range(6)] == pytest.approx(
            [0.8, 0.6, 0.4, 0.2, 0.0, 0.0]
        )

    def test_zero_schedule_pays_nothing(self):
        assert ZERO_REBATE.value_at(0) == 0.0
        assert ZERO_REBATE.value_at(7) == 0.0

    def test_beta_at_delegates(self):
        s = RebateSchedule(z_max=2, beta0=0.5)
        assert beta_at(s, 1) == 0.25

    def test_validation(self):
        with pytest.raises(DomainError):
            RebateSchedule(z_max=-1, beta0=0.5)
        with pytest.raises(DomainError):
            RebateSchedule(z_max=2, beta0=1.0)
        with pytest.raises(DomainError):
            RebateSchedule(z_max=2, beta0=0.0)
        with pytest.raises(DomainError):
            RebateSchedule(z_max=2, beta0=0.5, shape="convex")
        with pytest.raises(DomainError):
            RebateSchedule(z_max=4, beta0=0.8).value_at(-1)


class TestRebatedMove:
    def test_worked_example(self):
        # (100, 100) moved to price 4 with a 50% rebate: the producer trades
        # half of the full swap, the pool sheds the leftover y into the vault
        # and lands exactly on price 4.
        res = apply_rebated_move(C, Reserves(100, 100), 4.0, 0.5)
        assert res.full_target == Reserves(200.0, 50.0)
        assert res.new_reserves.x == pytest.approx(150.0, rel=1e-12)
        assert res.new_reserves.y == pytest.approx(37.5, rel=1e-12)
        assert res.vault_deposit == pytest.approx((0.0, 37.5))
        assert res.producer_flow == pytest.approx((-50.0, 25.0))
        # payoff at eps = 4 is (1 - beta) * L = 0.5 * 100
        assert res.producer_payoff_at(4.0) == pytest.approx(50.0, rel=1e-12)
        assert producer_arb_payoff(res, 4.0) == pytest.approx(50.0, rel=1e-12)

    def test_matches_root_finding_oracle(self):
        for x, y, tp, beta in [
            (100.0, 100.0, 4.0, 0.5),
            (100.0, 100.0, 0.25, 0.5),
            (10_000.0, 100.0, 104.3, 0.8),
            (10_000.0, 100.0, 95.7, 0.2),
            (3.0, 7.0, 1.0, 0.6),
        ]:
            res = apply_rebated_move(C, Reserves(x, y), tp, beta)
            ox, oy, sx, sy = brentq_vault_shed(x, y, tp, beta)
            assert res.new_reserves.x == pytest.approx(ox, rel=1e-9)
            assert res.new_reserves.y == pytest.approx(oy, rel=1e-9)
            assert res.vault_deposit[0] == pytest.approx(sx, rel=1e-9, abs=1e-9)
            assert res.vault_deposit[1] == pytest.approx(sy, rel=1e-9, abs=1e-9)

    def test_noop_at_current_price(self):
        r = Reserves(123.0, 45.0)
        res = apply_rebated_move(C, r, 123.0 / 45.0, 0.7)
        assert res.new_reserves == r
        assert res.vault_deposit == (0.0, 0.0)
        assert res.producer_flow == (0.0, 0.0)

    def test_zero_rebate_is_the_full_swap(self):
        res = apply_rebated_move(C, Reserves(100, 100), 4.0, 0.0)
        assert res.new_reserves == res.full_target
        assert res.vault_deposit == (0.0, 0.0)
        assert C.invariant(res.new_reserves) == pytest.approx(10_000.0, rel=1e-12)

    def test_rejects_rebate_out_of_range(self):
        for bad in (-0.1, 1.0, 1.5):
            with pytest.raises(DomainError):
                apply_rebated_move(C, Reserves(1, 1), 2.0, bad)

    @given(
        x=st.floats(1.0, 1e6),
        y=st.floats(1.0, 1e6),
        mult=st.floats(0.05, 20.0),
        beta=st.floats(0.0, 0.95),
    )
    def test_lands_on_target_and_never_grows_k(self, x, y, mult, beta):
        r = Reserves(x, y)
        tp = float(C.price(r)) * mult
        res = apply_rebated_move(C, r, tp, beta)
        assert C.price(res.new_reserves) == pytest.approx(tp, rel=1e-9)
        k0 = C.invariant(r)
        k1 = C.invariant(res.new_reserves)
        assert k1 <= k0 * (1.0 + 1e-12)
        # deposits are one-sided and non-negative
        dx, dy = res.vault_deposit
        assert dx >= 0.0 and dy >= 0.0
        assert dx == 0.0 or dy == 0.0
        # conservation: pool delta + producer flow + vault deposit is zero
        assert res.new_reserves.x - x - (-res.producer_flow[0]) + dx == pytest.approx(
            0.0, abs=1e-6 * max(1.0, x)
        )
        assert res.new_reserves.y - y - (-res.producer_flow[1]) + dy == pytest.approx(
            0.0, abs=1e-6 * max(1.0, y)
        )

    @given(
        x=st.floats(1.0, 1e4),
        y=st.floats(1.0, 1e4),
        eps_mult=st.floats(0.1, 10.0),
        beta=st.floats(0.0, 0.95),
        probe_mult=st.floats(0.1, 10.0),
    )
    def test_optimal_target_dominates_any_other(self, x, y, eps_mult, beta, probe_mult):
        # Moving all the way to the external price and keeping (1 - beta) of
        # the extraction is at least as good as any other rebated move.
        r = Reserves(x, y)
        eps = float(C.price(r)) * eps_mult
        _, best_value = max_lvr(C, r, eps)
        at_eps = apply_rebated_move(C, r, eps, beta)
        assert at_eps.producer_payoff_at(eps) == pytest.approx(
            (1.0 - beta) * best_value, rel=1e-9, abs=1e-9 * (x + y * eps)
        )
        probe = apply_rebated_move(C, r, eps * probe_mult, beta)
        assert probe.producer_payoff_at(eps) <= at_eps.producer_payoff_at(eps) + 1e-9 * (
            x + y * eps
        )


class TestVault:
    def test_deposit_and_value(self):
        v = Vault()
        assert v.is_empty
        v.deposit(1.0, 2.0)
        v.deposit(0.5, 0.0)
        assert (v.x, v.y) == (1.5, 2.0)
        assert v.value_at(4.0) == 9.5
        with pytest.raises(DomainError):
            v.deposit(-1.0, 0.0)

    def test_reentry_worked_example(self):
        # vault (0, 37.5) folded into pool (150, 37.5) at eps = 4:
        # value 150 splits into (75, 18.75); the converter's flow nets zero.
        v = Vault()
        v.deposit(0.0, 37.5)
        res = vault_reenter(C, Reserves(150.0, 37.5), v, 4.0)
        assert res.added == pytest.approx((75.0, 18.75))
        assert res.converter_flow == pytest.approx((-75.0, 18.75))
        assert res.new_reserves.x == pytest.approx(225.0)
        assert res.new_reserves.y == pytest.approx(56.25)
        assert C.price(res.new_reserves) == pytest.approx(4.0, rel=1e-12)

    def test_reentry_on_empty_vault_is_noop(self):
        r = Reserves(10, 10)
        res = vault_reenter(C, r, Vault(), 2.0)
        assert res.new_reserves == r
        assert res.added == (0.0, 0.0)

    @given(
        x=st.floats(1.0, 1e6),
        y=st.floats(1.0, 1e6),
        vx=st.floats(0.0, 1e4),
        vy=st.floats(0.0, 1e4),
        eps=st.floats(1e-2, 1e2),
    )
    def test_reentry_is_value_neutral_and_grows_k(self, x, y, vx, vy, eps):
        v = Vault()
        v.deposit(vx, vy)
        r = Reserves(x, y)
        res = vault_reenter(C, r, v, eps)
        fx, fy = res.converter_flow
        assert fx + fy * eps == pytest.approx(0.0, abs=1e-9 * max(1.0, v.value_at(eps)))
        assert C.invariant(res.new_reserves) >= C.invariant(r) * (1.0 - 1e-12)
        ax, ay = res.added
        assert v.x + v.y * eps == pytest.approx(
            ax + ay * eps, rel=1e-12, abs=1e-12
        )
