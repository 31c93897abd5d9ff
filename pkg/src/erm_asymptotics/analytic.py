"""Closed forms and large-alpha asymptotics.

Covers the generalization-error map, ridge regression on a sign teacher, the
pseudo-inverse, the max-margin limit in rescaled variables, the Bayes-optimal
large-alpha constants, and the margin bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import erf, erfcx

from .errors import DomainError, InvariantError, SolverError
from .quadrature import split_rule
from .states import ETA_SLACK, OverlapState, SolverConfig

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def gen_error(m, q, rho=1.0):
    """acos(sqrt(eta)) / pi with eta = m^2 / (rho q)."""
    if q <= 0 or rho <= 0:
        raise DomainError("q and rho must be positive")
    root = math.sqrt(m * m / (rho * q))
    if root > 1.0 + ETA_SLACK:
        raise InvariantError(f"sqrt(eta) = {root!r} exceeds 1")
    return math.acos(min(max(root, 0.0), 1.0)) / math.pi


def gen_error_bayes(state, rho=1.0):
    eta = state.q_b / rho
    if eta > 1.0 + ETA_SLACK or eta < -ETA_SLACK:
        raise InvariantError("q_b / rho outside [0, 1]")
    return math.acos(math.sqrt(min(max(eta, 0.0), 1.0))) / math.pi


# ---------------------------------------------------------------------------
# ridge and pseudo-inverse


@dataclass(frozen=True)
class RidgeClosedForm:
    t0: float
    t1: float
    t2: float
    t3: float
    t4: float
    m: float
    q: float
    sigma: float
    m_hat: float
    q_hat: float
    sigma_hat: float

    @property
    def e_g(self) -> float:
        return gen_error(self.m, self.q)


def ridge_closed_form(alpha, lambda_, delta_star=0.0) -> RidgeClosedForm:
    """Exact overlaps of L2-regularized least squares on a sign teacher with unit-variance Gaussian weights.

    The conjugate ``q_hat`` follows from ``q = (m_hat^2 + q_hat) / (lambda + sigma_hat)^2``.
    """
    a, lam, dl = float(alpha), float(lambda_), float(delta_star)
    if not (a > 0 and lam > 0 and dl >= 0):
        raise DomainError("need alpha > 0, lambda > 0, delta_star >= 0")
    t0 = math.sqrt((a + lam - 1.0) ** 2 + 4.0 * lam)
    t1 = 1.0 / (t0 + a + lam + 1.0)
    t2 = math.sqrt(2.0 * (a + 1.0) * lam + (a - 1.0) ** 2 + lam * lam)
    t3 = 1.0 / (t2 + a + lam + 1.0)
    t4 = math.sqrt(a * a + 2.0 * a * (lam - 1.0) + (lam + 1.0) ** 2)
    # t0 - a - lam + 1 loses digits when lambda is tiny and alpha > 1
    num = 4.0 * lam / (t0 + a + lam - 1.0) if a + lam - 1.0 > 0 else t0 - a - lam + 1.0
    sigma = num / (2.0 * lam)
    sigma_hat = 0.5 * (t0 + a - lam - 1.0)
    m = 2.0 * SQRT_2_OVER_PI * a / (t2 + a + lam + 1.0)
    m_hat = 2.0 * SQRT_2_OVER_PI * a * lam / (num + 2.0 * lam)
    q = 2.0 * a * (-8.0 * a * t1 + 2.0 * a + math.pi * dl + math.pi) / (
        math.pi * (a * a + a * (t2 + 2.0 * lam - 2.0) + (lam + 1.0) * (t2 + lam + 1.0))
    )
    q_hat = q * (lam + sigma_hat) ** 2 - m_hat**2
    return RidgeClosedForm(t0, t1, t2, t3, t4, m, q, sigma, m_hat, q_hat, sigma_hat)


class PseudoInverse(NamedTuple):
    m: float
    q: float
    e_g: float


def pseudo_inverse_overlaps(alpha, delta_star=0.0) -> PseudoInverse:
    """Minimum-norm least squares (lambda -> 0) in both regimes alpha < 1 and alpha > 1."""
    a, dl = float(alpha), float(delta_star)
    if a <= 0 or dl < 0:
        raise DomainError("need alpha > 0 and delta_star >= 0")
    if abs(a - 1.0) < 1e-9:
        raise DomainError("alpha = 1 is the interpolation singularity")
    if a < 1.0:
        m = a * SQRT_2_OVER_PI
        q = a * (math.pi * (1.0 + dl) - 2.0 * a) / (math.pi * (1.0 - a))
        e = math.acos(math.sqrt(2.0 * a * (1.0 - a) / (math.pi * (1.0 + dl) - 2.0 * a))) / math.pi
    else:
        m = SQRT_2_OVER_PI
        q = (1.0 + dl + 2.0 / math.pi * (a - 2.0)) / (a - 1.0)
        e = math.acos(math.sqrt((a - 1.0) / (0.5 * math.pi * (1.0 + dl) + a - 2.0))) / math.pi
    return PseudoInverse(m, q, e)


def ridge_large_alpha_constant(delta_star=0.0) -> float:
    """c in e_g ~ c / sqrt(alpha) for ridge at fixed lambda."""
    return math.sqrt(0.5 * math.pi * (1.0 + delta_star) - 1.0) / math.pi


# ---------------------------------------------------------------------------
# max-margin


@dataclass(frozen=True)
class MaxMarginConstants:
    c_q: float
    c_eta: float

    @property
    def K(self) -> float:
        """e_g * alpha in the large-alpha limit."""
        return math.sqrt(self.c_eta) / math.pi


def max_margin_i_m_closed(q, eta):
    """Closed form of I_m: Gaussian moment up to the margin boundary xi = 1 / sqrt(q)."""
    x = q * (1.0 - eta)
    return (math.sqrt(2 * math.pi) * (erf(1.0 / math.sqrt(2 * x)) + 1.0) + 2.0 * math.exp(-1.0 / (2 * x)) * math.sqrt(x)) / (
        4.0 * math.pi
    )


def max_margin_integrals(q, eta, order: int = 80):
    """(I_m, I_q, I_sigma) of the rescaled max-margin system for a noiseless sign teacher, rho = 1.

    The integrals run over ``xi < 1 / sqrt(q)`` (support vectors and margin violators).
    """
    eta = min(max(eta, 0.0), 1.0 - 1e-15)
    sq = math.sqrt(q)
    top = 1.0 / sq
    width = math.sqrt((1.0 - eta) / eta) if eta > 0 else 0.0
    breaks = [top, 0.0] + [s * width * 2.0**k for k in range(-1, 7) for s in (-1, 1)]
    rule = split_rule(breaks, order)
    xi = rule.nodes
    w = rule.weights * (xi < top)
    se = math.sqrt(eta)
    # teacher weight and derivative at omega = sqrt(eta) xi, V = 1 - eta
    z_plus = 0.5 * (1.0 + erf(se * xi / math.sqrt(2.0 * (1.0 - eta))))
    n_t = np.exp(-0.5 * eta * xi**2 / (1.0 - eta)) / math.sqrt(2.0 * math.pi * (1.0 - eta))
    r = 1.0 - sq * xi
    return float(np.sum(w * n_t * r)), float(np.sum(w * z_plus * r * r)), float(np.sum(w * z_plus))


def _mm_update(x, alpha, order):
    m, q, sigma = x
    eta = min(m * m / q, 1.0)
    im, iq, isg = max_margin_integrals(q, eta, order)
    m_hat = 2.0 * alpha / sigma * im
    q_hat = 2.0 * alpha / sigma**2 * iq
    s_hat = 2.0 * alpha / sigma * isg
    den = 1.0 + s_hat
    return np.array([m_hat / den, (m_hat**2 + q_hat) / den**2, 1.0 / den]), (m_hat, q_hat, s_hat)


def solve_max_margin(alpha, cfg: SolverConfig = SolverConfig(), init: OverlapState | None = None) -> OverlapState:
    """Rescaled lambda -> 0 hinge system at finite alpha (sigma here is lambda * Sigma)."""
    from .saddle import iterate_fixed_point

    if alpha <= 0:
        raise DomainError("alpha must be positive")
    x0 = np.array([0.5, 1.0, 1.0]) if init is None else np.array([init.m, init.q, init.sigma])
    # warm start from the large-alpha scalings when no init is given
    if init is None and alpha > 5:
        x0 = np.array([alpha * math.sqrt(0.99), alpha**2, 0.5 / alpha])
    order = cfg.quad_order_1d

    def step(x):
        return _mm_update(x, alpha, order)[0]

    out = iterate_fixed_point(step, x0, cfg, positive=[True, True, True])
    m, q, s = (float(v) for v in out.x)
    _, (mh, qh, sh) = _mm_update(out.x, alpha, order)
    return OverlapState(m, q, s, mh, qh, sh, residual=out.residual, iters=out.iters, flags=out.flags)


def _mm_infinite_integrals(c_q, c_eta):
    x = c_q * c_eta
    e = erf(1.0 / math.sqrt(2.0 * x))
    i_m = (math.sqrt(2.0 * math.pi) * (e + 1.0) + 2.0 * math.exp(-1.0 / (2.0 * x)) * math.sqrt(x)) / (4.0 * math.pi)
    i_q = (
        math.sqrt(2.0 * math.pi) * (3.0 * x + 1.0) * (e + 1.0)
        + math.exp(-1.0 / (2.0 * x)) * (4.0 * x**1.5 + 2.0 * math.sqrt(x))
    ) / (12.0 * math.pi * math.sqrt(c_q))
    return i_m, i_q


def max_margin_constants(tol: float = 1e-13, damping: float = 0.5, max_iter: int = 10000) -> MaxMarginConstants:
    """Solve F_q = 4 I_m^2 - c_q = 0 and F_eta = I_q / (2 I_m^2) - c_eta = 0 by damped iteration."""
    c = np.array([1.0, 2.0])
    for _ in range(max_iter):
        i_m, i_q = _mm_infinite_integrals(*c)
        new = np.array([4.0 * i_m**2, i_q / (2.0 * i_m**2)])
        if np.max(np.abs(new - c)) < tol:
            return MaxMarginConstants(float(new[0]), float(new[1]))
        c = (1.0 - damping) * new + damping * c
    raise SolverError("max-margin constants did not converge")


class MaxMarginLimit(NamedTuple):
    constants: MaxMarginConstants
    e_g: Callable
    rescaled_solver: Callable
    states: tuple


def max_margin_limit(alpha_grid: Sequence[float] = (), cfg: SolverConfig = SolverConfig()) -> MaxMarginLimit:
    """Constants, an e_g(alpha) callable and the rescaled solutions on ``alpha_grid``."""
    consts = max_margin_constants()

    def solver(alpha, init=None):
        return solve_max_margin(alpha, cfg, init)

    def e_g(alpha):
        st = solver(alpha)
        return gen_error(st.m, st.q)

    states, prev, prev_a = [], None, None
    for a in alpha_grid:
        init = None
        if prev is not None:
            # carry the previous solution along the large-alpha scalings
            r = a / prev_a
            init = OverlapState(prev.m * r, prev.q * r * r, prev.sigma / r)
        prev, prev_a = solver(a, init), a
        states.append(prev)
    return MaxMarginLimit(consts, e_g, solver, tuple(states))


# ---------------------------------------------------------------------------
# Bayes large alpha and the margin bound


class BayesLargeAlpha(NamedTuple):
    c0: float
    k: float
    rate: Callable


def bayes_large_alpha() -> BayesLargeAlpha:
    """c0 = int exp(-x^2) / (1 + erf(x / sqrt 2)) dx, k = 2 c0 / (pi sqrt(2 pi)), e_g ~ 1 / (k pi alpha)."""

    # exp(-x^2) / erfc(-x / sqrt 2) = exp(-x^2 / 2) / erfcx(-x / sqrt 2)
    def integrand(x):
        return math.exp(-0.5 * x * x) / erfcx(-x / math.sqrt(2.0))

    c0 = quad(integrand, -8.0, 0.0, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    c0 += quad(integrand, 0.0, 20.0, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    k = 2.0 * c0 / (math.pi * math.sqrt(2.0 * math.pi))
    return BayesLargeAlpha(c0, k, lambda alpha: 1.0 / (k * math.pi * alpha))


def margin_bound(q, alpha):
    """4 sqrt(q / alpha)."""
    if q < 0 or alpha <= 0:
        raise DomainError("need q >= 0 and alpha > 0")
    return 4.0 * math.sqrt(q / alpha)
