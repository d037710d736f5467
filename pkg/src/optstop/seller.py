"""Surveilling seller: scalar Kalman filter and myopic expected-revenue pricing.

The seller tracks the consumer's valuation with a conjugate Gaussian posterior
(identity state transition with additive process noise, noisy scalar
observations) and at each epoch offers the price p maximizing the expected
immediate revenue p * Pr(v > p) under his current posterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import ModelParams
from .rng import RngStream, normal_pdf, q_function

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# Golden-section iterations: shrinks the bracket by ~1e-7 of its width, which
# puts the Newton polish safely inside the quadratic convergence basin.
_GOLDEN_ITERS = 34
_NEWTON_ITERS = 30
_STATIONARITY_TOL = 1e-8


@dataclass(frozen=True)
class GaussianBelief:
    """Mean and variance of the seller's posterior on the consumer valuation."""

    mean: float
    var: float

    def __post_init__(self):
        if self.var < 0:
            raise ValueError(f"variance must be >= 0, got {self.var}")


def kalman_predict(belief: GaussianBelief, params: ModelParams) -> GaussianBelief:
    """Time update: mean unchanged, variance grows by the process noise."""
    return GaussianBelief(belief.mean, belief.var + params.sigma_eps**2)


def kalman_correct(belief: GaussianBelief, y: float, params: ModelParams) -> GaussianBelief:
    """Measurement update with observation y = v + N(0, sigma_xi^2)."""
    if not math.isfinite(y):
        raise ValueError(f"observation must be finite, got {y}")
    denom = belief.var + params.sigma_xi**2
    if denom == 0.0:
        # Degenerate: point-mass belief and noiseless sensor carry no news.
        return belief
    gain = belief.var / denom
    return GaussianBelief(
        mean=belief.mean + gain * (y - belief.mean),
        var=(1.0 - gain) * belief.var,
    )


def _revenue(p: float, mu: float, sigma: float) -> float:
    return p * q_function((p - mu) / sigma)


def myopic_price(belief: GaussianBelief) -> float:
    """Price maximizing p * Pr(v > p) under the given Gaussian belief.

    The objective is unimodal on p > 0 (the normal has increasing hazard
    rate), so a golden-section pass brackets the maximizer and Newton steps
    on the stationarity condition

        sigma * Q(z) - p * phi(z) = 0,   z = (p - mu) / sigma

    polish it. If Newton leaves the bracket or stalls, the golden-section
    solution is refined by a local fine grid instead.
    """
    if not belief.var > 0:
        raise ValueError(f"pricing requires positive variance, got {belief.var}")
    mu = belief.mean
    sigma = math.sqrt(belief.var)

    lo = 1e-12 * sigma
    hi = max(mu, 0.0) + 10.0 * sigma

    # Golden-section search (maximization).
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = _revenue(c, mu, sigma)
    fd = _revenue(d, mu, sigma)
    for _ in range(_GOLDEN_ITERS):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = _revenue(c, mu, sigma)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = _revenue(d, mu, sigma)
    p = c if fc > fd else d

    # Newton polish on the stationarity condition g(p) = sigma*Q(z) - p*phi(z),
    # g'(p) = phi(z) * (p*z/sigma - 2).
    p_newton = p
    converged = False
    for _ in range(_NEWTON_ITERS):
        z = (p_newton - mu) / sigma
        pdf = normal_pdf(z)
        g = sigma * q_function(z) - p_newton * pdf
        gprime = pdf * (p_newton * z / sigma - 2.0)
        if gprime == 0.0:
            break
        step = g / gprime
        p_next = p_newton - step
        if not (lo <= p_next <= hi):
            break
        if abs(p_next - p_newton) <= 1e-15 * max(1.0, abs(p_newton)):
            p_newton = p_next
            converged = True
            break
        p_newton = p_next
    else:
        converged = _stationarity_residual(p_newton, mu, sigma) <= _STATIONARITY_TOL

    if converged and _stationarity_residual(p_newton, mu, sigma) <= _STATIONARITY_TOL:
        return p_newton

    # Fallback: fine local grid around the golden-section bracket.
    width = max(b - a, 1e-9 * sigma)
    best_p, best_f = p, _revenue(p, mu, sigma)
    steps = 2000
    for i in range(steps + 1):
        cand = max(lo, p - width) + (2.0 * width) * i / steps
        f = _revenue(cand, mu, sigma)
        if f > best_f:
            best_p, best_f = cand, f
    return best_p


def _stationarity_residual(p: float, mu: float, sigma: float) -> float:
    z = (p - mu) / sigma
    return abs(q_function(z) - p * normal_pdf(z) / sigma)


def seller_step(
    belief: GaussianBelief,
    true_v: float,
    t: int,
    stream: RngStream,
    params: ModelParams,
) -> tuple[float, GaussianBelief, float | None]:
    """One seller epoch: observe (for t >= 1), update the belief, and price.

    At t = 0 no observation exists and the price comes straight off the
    prior. For t >= 1 the seller draws y_t = v_t + N(0, sigma_xi^2), runs
    predict-then-correct, and prices off the updated posterior. Returns
    (offered price, belief used for pricing, observation or None).
    """
    if not 0 <= t <= params.horizon:
        raise ValueError(f"t must lie in 0..{params.horizon}, got {t}")
    if t == 0:
        return myopic_price(belief), belief, None
    y = true_v + params.sigma_xi * stream.standard_normal()
    updated = kalman_correct(kalman_predict(belief, params), y, params)
    return myopic_price(updated), updated, y
