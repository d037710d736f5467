"""Valuation walk, certainty-equivalent purchase payoff, and exit payoff."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optstop.consumer import (
    ConsumerState,
    MAX_EXPONENT,
    exit_payoff,
    initial_state,
    purchase_payoff,
    step_valuation,
)
from optstop.model import ModelParams
from optstop.rng import RngStream


def mc_payoff_oracle(gamma, v_minus_p, residual_var, n=10**6, seed=314159):
    """Brute-force oracle: E[1 - exp(-gamma X)], X ~ N(v - p, residual_var).

    Uses numpy's default PCG64 generator, a different algorithm from the
    package's Philox streams. Returns (estimate, standard error).
    """
    rng = np.random.default_rng(seed)
    x = v_minus_p + math.sqrt(residual_var) * rng.standard_normal(n)
    samples = 1.0 - np.exp(-gamma * x)
    return samples.mean(), samples.std(ddof=1) / math.sqrt(n)


class TestStepValuation:
    def test_zero_noise_keeps_value(self):
        params = ModelParams(horizon=5, sigma_eps=0.0, seed=1)
        state = initial_state(2.7, params)
        nxt = step_valuation(state, RngStream(1), params)
        assert nxt.v == state.v
        assert nxt.t == 1
        assert nxt.residual_var == 0.0

    def test_rejects_step_past_horizon(self):
        params = ModelParams(horizon=3)
        state = ConsumerState(t=3, v=1.0, residual_var=0.0)
        with pytest.raises(ValueError):
            step_valuation(state, RngStream(0), params)

    def test_residual_variance_hits_zero_at_horizon(self):
        params = ModelParams(horizon=4, sigma_eps=0.3, seed=2)
        state = initial_state(0.0, params)
        stream = RngStream(2)
        for _ in range(params.horizon):
            state = step_valuation(state, stream, params)
        assert state.t == params.horizon
        assert state.residual_var == 0.0

    def test_martingale_increment_mean(self):
        params = ModelParams(horizon=10, sigma_eps=0.1, seed=3)
        state = initial_state(1.0, params)
        stream = RngStream(3, path_index=0)
        n = 10**5
        increments = np.empty(n)
        for i in range(n):
            increments[i] = step_valuation(state, stream, params).v - state.v
        assert abs(increments.mean()) < 4 * params.sigma_eps / math.sqrt(n)

    def test_increment_variance_matches_sigma(self):
        params = ModelParams(horizon=10, sigma_eps=0.1, seed=4)
        state = initial_state(1.0, params)
        stream = RngStream(4, path_index=1)
        n = 10**5
        increments = np.array(
            [step_valuation(state, stream, params).v - state.v for _ in range(n)]
        )
        assert increments.var() == pytest.approx(0.01, abs=5e-4)


class TestPurchasePayoff:
    def test_terminal_at_price_is_zero(self):
        params = ModelParams(horizon=25)
        state = ConsumerState(t=25, v=1.4, residual_var=0.0)
        assert purchase_payoff(state, 1.4, params) == 0.0

    def test_terminal_log_two_gap(self):
        params = ModelParams(horizon=25, gamma=1.0)
        state = ConsumerState(t=25, v=math.log(2.0), residual_var=0.0)
        assert purchase_payoff(state, 0.0, params) == pytest.approx(0.5, abs=1e-15)

    def test_closed_form_against_monte_carlo(self):
        # gamma=1, 25 steps remaining, sigma_eps=0.1, valuation equal to price.
        params = ModelParams(horizon=25, gamma=1.0, sigma_eps=0.1)
        state = initial_state(1.0, params)
        closed = purchase_payoff(state, 1.0, params)
        assert closed == pytest.approx(1.0 - math.exp(0.125), abs=1e-15)
        est, se = mc_payoff_oracle(1.0, 0.0, 25 * 0.01)
        assert abs(closed - est) <= 3 * se

    def test_increasing_in_time_under_uncertainty(self):
        params = ModelParams(horizon=25, gamma=1.0, sigma_eps=0.1)
        payoffs = [
            purchase_payoff(
                ConsumerState(t=t, v=1.2, residual_var=(25 - t) * 0.01), 1.0, params
            )
            for t in range(26)
        ]
        assert all(b > a for a, b in zip(payoffs, payoffs[1:]))

    @given(
        v=st.floats(-3, 3),
        price=st.floats(-3, 3),
        bump=st.floats(1e-6, 1.0),
    )
    @settings(max_examples=200)
    def test_monotone_in_value_and_price(self, v, price, bump):
        params = ModelParams(horizon=10, gamma=0.7, sigma_eps=0.2)
        state = ConsumerState(t=4, v=v, residual_var=6 * 0.04)
        richer = ConsumerState(t=4, v=v + bump, residual_var=6 * 0.04)
        base = purchase_payoff(state, price, params)
        assert purchase_payoff(richer, price, params) > base
        assert purchase_payoff(state, price + bump, params) < base
        assert base < 1.0

    def test_saturates_instead_of_overflowing(self):
        params = ModelParams(horizon=25, gamma=1.0, sigma_eps=0.1)
        state = initial_state(0.0, params)
        pay = purchase_payoff(state, 1e6, params)
        assert math.isfinite(pay)
        assert pay == 1.0 - math.exp(MAX_EXPONENT)
        assert exit_payoff(pay) == 0.0

    def test_rejects_non_finite_price(self):
        params = ModelParams()
        with pytest.raises(ValueError):
            purchase_payoff(initial_state(1.0, params), math.inf, params)


class TestExitPayoff:
    def test_negative_goes_to_zero(self):
        assert exit_payoff(-0.2) == 0.0

    def test_positive_passes_through(self):
        assert exit_payoff(0.3) == 0.3

    def test_tie_at_zero(self):
        assert exit_payoff(0.0) == 0.0

    @given(st.floats(allow_nan=False, allow_infinity=False))
    @settings(max_examples=200)
    def test_idempotent_and_nonnegative(self, pi):
        once = exit_payoff(pi)
        assert once >= 0.0
        assert exit_payoff(once) == once
