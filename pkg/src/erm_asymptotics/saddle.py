"""Fixed-point solvers for the asymptotic order parameters.

Four systems are covered:

* the three-equation replica system of L2-regularized ERM (``rhs_replica_l2``);
* the six-equation system for an arbitrary separable regularizer;
* the Bayes-optimal two-equation system;
* the Gordon min-max system in ``(mu, delta, tau)``.

All expectations are computed with split Gauss-Legendre rules whose breakpoints
track the kinks of the loss and the sharp transitions of the teacher channel, so
that the right-hand sides are accurate to ~1e-12 even close to interpolation.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import root

from .analytic import gen_error
from .errors import DomainError, InvariantError, SolverError
from .losses import L2, Hinge, LossSpec, RegSpec, Square, f_out_erm, f_w_erm, loss_kinks, prox_loss
from .quadrature import CUTOFF, expect_y_xi, label_nodes, split_rule, split_rule_rows
from .states import BayesState, GordonState, OverlapState, SolverConfig, overlap_eta
from .teacher import (
    Continuous,
    GaussianPrior,
    Linear,
    PriorSpec,
    RectangleDoor,
    Sign,
    TeacherModel,
    f_out_star,
    f_w_star,
    label_domain,
    phi_out,
    prior_components,
    z_out_star,
)

ETA_MAX = 1.0 - 1e-15
SIGMA_FLOOR = 1e-12
LADDER = tuple(2.0**k for k in range(-1, 7))


# ---------------------------------------------------------------------------
# breakpoints


def _channel_centres(teacher: TeacherModel):
    ch = teacher.channel
    if isinstance(ch, Sign):
        return (0.0,)
    if isinstance(ch, RectangleDoor):
        return (ch.kappa_min, ch.kappa_max)
    return ()


def _transition_breaks(centres, scale, width):
    """Points clustering geometrically around each ``centre / scale`` at multiples of ``width``."""
    if scale <= 0:
        return []
    out = []
    for c in centres:
        x0 = c / scale
        out.append(x0)
        if width > 0:
            out += [x0 + s * width * k for k in LADDER for s in (-1.0, 1.0) if width * k < 2 * CUTOFF]
    return out


def _student_breaks(loss: LossSpec, q: float, sigma: float):
    sq = math.sqrt(q)
    return [s * c / sq for c in loss_kinks(loss, sigma) for s in (-1.0, 1.0)]


def _teacher_weight(teacher, eta):
    rho = teacher.rho
    eta = min(max(eta, 0.0), ETA_MAX)
    return math.sqrt(rho * eta), rho * (1.0 - eta)


# ---------------------------------------------------------------------------
# right-hand sides


def hat_overlaps(m, q, sigma, alpha, loss: LossSpec, teacher: TeacherModel, order: int = 80):
    """(m_hat, q_hat, sigma_hat) from the channel side of the replica system."""
    eta = overlap_eta(m, q, teacher.rho)
    scale_t, v_t = _teacher_weight(teacher, eta)
    width = math.sqrt(v_t) / scale_t if scale_t > 0 else 0.0
    breaks = _transition_breaks(_channel_centres(teacher), scale_t, width)
    breaks += _student_breaks(loss, q, sigma)
    sq = math.sqrt(q)
    ch = teacher.channel

    def integrand(y, xi):
        om_t = scale_t * xi
        z = z_out_star(ch, y, om_t, v_t)
        zf = z * f_out_star(ch, y, om_t, v_t)
        fo, dfo = f_out_erm(loss, y, sq * xi, sigma)
        return np.stack(np.broadcast_arrays(zf * fo, z * fo * fo, -z * dfo))

    if isinstance(loss, Hinge) and isinstance(label_domain(teacher), Continuous):
        # real-valued labels move the hinge kinks with y, so every label node gets its own rule
        ys, wy = label_nodes(teacher)
        with np.errstate(divide="ignore"):
            rows = np.column_stack([(1.0 - sigma * ys * ys) / (ys * sq), 1.0 / (ys * sq)])
        rows = np.column_stack([rows, np.broadcast_to(np.asarray(breaks, dtype=float), (ys.size, len(breaks)))])
        nodes, weights = split_rule_rows(rows, order)
        vals = integrand(ys[:, None], nodes)
        return tuple(alpha * np.einsum("ckn,kn,k->c", vals, weights, wy))
    rule = split_rule(breaks, order)
    return tuple(alpha * np.asarray(expect_y_xi(teacher, rule, integrand)))


def rhs_replica_l2(state: OverlapState, alpha, lambda_, loss: LossSpec, teacher: TeacherModel, order: int = 80):
    """One evaluation of the L2-specialized replica right-hand sides.

    Returns a new :class:`OverlapState` whose hats are computed from ``state`` and
    whose ``(m, q, sigma)`` are the updated values.
    """
    rho = teacher.rho
    m_hat, q_hat, sigma_hat = hat_overlaps(state.m, state.q, state.sigma, alpha, loss, teacher, order)
    den = lambda_ + sigma_hat
    flags = ()
    if den <= 0:
        den, flags = 1.0 / SIGMA_FLOOR, ("sigma_projected",)
    return OverlapState(
        m=rho * m_hat / den,
        q=(rho * m_hat**2 + q_hat) / den**2,
        sigma=1.0 / den,
        m_hat=m_hat,
        q_hat=q_hat,
        sigma_hat=sigma_hat,
        flags=flags,
    )


def prior_expect(prior: PriorSpec, a: float, g: Callable, breaks=(), order: int = 80):
    """E_xi[z_w_star(a xi, a^2) g(xi)] written as a mixture over the prior atoms.

    With ``xi = xi' + a w``, ``w`` drawn from the prior, the weighted measure is a
    Gaussian mixture; each component gets its own split rule.
    """
    total = 0.0
    for weight, mean, var in prior_components(prior):
        centre, sd = a * mean, math.sqrt(1.0 + a * a * var)
        rule = split_rule([(b - centre) / sd for b in breaks], order)
        total = total + weight * np.sum(np.asarray(g(centre + sd * rule.nodes)) * rule.weights, axis=-1)
    return total


def _reg_kinks(reg: RegSpec):
    from .losses import L1

    return (-reg.strength, reg.strength) if isinstance(reg, L1) else ()


def overlaps_from_hats(m_hat, q_hat, sigma_hat, reg: RegSpec, prior: PriorSpec, order: int = 80):
    """Prior side of the six-equation system: (m, q, sigma) from the conjugate overlaps."""
    if sigma_hat <= 0:
        raise InvariantError("sigma_hat must be positive in the six-equation system")
    sqh = math.sqrt(max(q_hat, 0.0))
    if sqh == 0:
        # no noise on the field: gamma = m_hat w is deterministic given w
        def integrand_w(w):
            fw, dfw = f_w_erm(reg, m_hat * w, sigma_hat)
            return np.stack(np.broadcast_arrays(w * fw, fw * fw, dfw))

        total = 0.0
        for weight, mean, var in prior_components(prior):
            rule = split_rule((), order)
            total = total + weight * np.sum(integrand_w(mean + math.sqrt(var) * rule.nodes) * rule.weights, axis=-1)
        return tuple(float(v) for v in total)
    a = m_hat / sqh

    def integrand(xi):
        fw, dfw = f_w_erm(reg, sqh * xi, sigma_hat)
        fs = f_w_star(prior, a * xi, a * a)
        return np.stack(np.broadcast_arrays(fs * fw, fw * fw, dfw))

    breaks = [k / sqh for k in _reg_kinks(reg)]
    return tuple(float(v) for v in prior_expect(prior, a, integrand, breaks, order))


def rhs_general_six(state: OverlapState, alpha, loss: LossSpec, reg: RegSpec, teacher: TeacherModel, order: int = 80):
    """One evaluation of the six-equation system for a separable regularizer."""
    m_hat, q_hat, sigma_hat = hat_overlaps(state.m, state.q, state.sigma, alpha, loss, teacher, order)
    m, q, sigma = overlaps_from_hats(m_hat, q_hat, sigma_hat, reg, teacher.prior, order)
    return OverlapState(
        m=m, q=q, sigma=sigma, m_hat=m_hat, q_hat=q_hat, sigma_hat=sigma_hat,
        Q=sigma + q, Q_hat=float(sigma_hat - q_hat),
    )


def rhs_bayes(q_b, alpha, teacher: TeacherModel, order: int = 80):
    """q_hat_b from the channel side of the Bayes system."""
    rho = teacher.rho
    v = rho - q_b
    if not 0 < q_b < rho:
        if q_b == 0:
            v = rho
        else:
            raise InvariantError("q_b must lie in [0, rho)")
    sq = math.sqrt(q_b)
    breaks = _transition_breaks(_channel_centres(teacher), sq, math.sqrt(v) / sq if sq > 0 else 0.0)
    rule = split_rule(breaks, order)
    ch = teacher.channel

    def integrand(y, xi):
        om = sq * xi
        fs = f_out_star(ch, y, om, v)
        return z_out_star(ch, y, om, v) * fs * fs

    return float(alpha * expect_y_xi(teacher, rule, integrand))


def bayes_prior_update(q_hat, prior: PriorSpec, order: int = 80):
    """(q_b, v_b = rho - q_b) from q_hat_b, in closed form for a centred Gaussian prior."""
    if isinstance(prior, GaussianPrior) and prior.mean == 0.0:
        s = prior.variance
        return s * s * q_hat / (1.0 + s * q_hat), s / (1.0 + s * q_hat)
    a = math.sqrt(max(q_hat, 0.0))
    q = float(prior_expect(prior, a, lambda xi: f_w_star(prior, a * xi, q_hat) ** 2, (), order))
    return q, prior.second_moment() - q


# ---------------------------------------------------------------------------
# iteration driver


class _Outcome(NamedTuple):
    x: np.ndarray
    residual: float
    iters: int
    flags: tuple


def _residual(x, fx):
    return float(np.max(np.abs(fx - x) / np.maximum(1.0, np.abs(x))))


def _polish(step, x, positive, tol):
    pos = np.asarray(positive, dtype=bool)

    def to_u(x):
        return np.where(pos, np.log(np.where(pos, x, 1.0)), x)

    def from_u(u):
        return np.where(pos, np.exp(np.where(pos, u, 0.0)), u)

    def F(u):
        try:
            with np.errstate(all="ignore"):
                fx = step(from_u(u))
        except (DomainError, InvariantError, SolverError, FloatingPointError):
            return np.full_like(u, 1e3)
        if not np.all(np.isfinite(fx)) or np.any(fx[pos] <= 0):
            return np.full_like(u, 1e3)
        return to_u(fx) - u

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sol = root(F, to_u(x), method="hybr", options={"xtol": tol * 1e-2})
    return from_u(sol.x)


def iterate_fixed_point(step, x0, cfg: SolverConfig, positive=None, scale=None) -> _Outcome:
    """Damped iteration ``x <- (1 - g) step(x) + g x`` with optional root polish.

    ``scale(x)`` overrides the componentwise normalization of the stopping test.
    Damping is raised to 0.8 when the residual signs alternate (oscillation).
    When the iteration has contracted to ~sqrt(tol), or stalls, a Powell hybrid
    root solve is attempted and accepted only if it meets ``tol``.
    """
    x = np.asarray(x0, dtype=float)
    positive = np.zeros(x.shape, bool) if positive is None else np.asarray(positive)
    gamma = cfg.damping
    flags = []
    prev, alternations = None, 0
    next_polish = 50
    trajectory = []
    res = math.inf

    def measure(x, fx):
        if scale is None:
            return _residual(x, fx)
        return float(np.max(np.abs(fx - x) / scale(x)))

    for it in range(1, cfg.max_iter + 1):
        fx = step(x)
        if not np.all(np.isfinite(fx)):
            raise SolverError("non-finite iterate", residual=res, trajectory=trajectory)
        res = measure(x, fx)
        trajectory.append(x.copy())
        if res < cfg.tol:
            return _Outcome(x, res, it, tuple(flags))
        diff = fx - x
        if prev is not None and np.any(diff * prev < 0):
            alternations += 1
            if alternations >= 5 and gamma < 0.8:
                gamma = 0.8
                flags.append("damping_raised")
        else:
            alternations = 0
        prev = diff
        if cfg.polish and (res < math.sqrt(cfg.tol) or it >= next_polish):
            next_polish = it + 200
            xp = _polish(step, x, positive, cfg.tol)
            try:
                fp = step(xp)
                rp = measure(xp, fp)
            except (DomainError, InvariantError, SolverError):
                rp = math.inf
            if rp < cfg.tol:
                return _Outcome(xp, rp, it, tuple(flags + ["polished"]))
        x = (1.0 - gamma) * fx + gamma * x
    raise SolverError(f"no convergence after {cfg.max_iter} iterations", residual=res, trajectory=trajectory)


# ---------------------------------------------------------------------------
# ERM replica solver


def _default_init(teacher):
    return OverlapState(0.1 * math.sqrt(teacher.rho), 0.5, 1.0)


def _is_symmetric_channel(teacher):
    ch = teacher.channel
    return isinstance(ch, RectangleDoor) and math.isclose(ch.kappa_min, -ch.kappa_max)


def _check_positive(alpha, lambda_=None):
    if not (np.isfinite(alpha) and alpha > 0):
        raise DomainError("alpha must be positive")
    if lambda_ is not None and not (np.isfinite(lambda_) and lambda_ > 0):
        raise DomainError("lambda must be positive; the lambda -> 0 limit lives in module analytic")


def _solve_l2_from(init, alpha, lambda_, loss, teacher, cfg):
    order = cfg.quad_order_1d
    rho = teacher.rho
    cache = {}

    def step(x):
        m, q, s = x
        q = max(q, 1e-300)
        if s <= 0:
            s = SIGMA_FLOOR
        if m * m > rho * q:
            m = math.copysign(math.sqrt(rho * q), m)
        new = rhs_replica_l2(OverlapState(m, q, s), alpha, lambda_, loss, teacher, order)
        cache[tuple(x)] = new
        return np.array([new.m, new.q, new.sigma])

    x0 = np.array([init.m, init.q, init.sigma])
    out = iterate_fixed_point(step, x0, cfg, positive=[False, True, True])
    hats = cache.get(tuple(out.x))
    if hats is None:
        step(out.x)
        hats = cache[tuple(out.x)]
    m, q, s = out.x
    return OverlapState(
        m=float(m), q=float(q), sigma=float(s), m_hat=hats.m_hat, q_hat=hats.q_hat, sigma_hat=hats.sigma_hat,
        residual=out.residual, iters=out.iters, flags=out.flags + hats.flags,
    )


def solve_erm_replica(alpha, lambda_, loss: LossSpec, teacher: TeacherModel, cfg: SolverConfig = SolverConfig()):
    """Fixed point of the L2 replica system.

    For a symmetric door channel the solver is started both from the symmetric
    point ``m = 0`` and from the perturbed default; the lower-error branch is
    returned and the other one is kept in ``alternatives``.
    """
    _check_positive(alpha, lambda_)
    init = cfg.init if isinstance(cfg.init, OverlapState) else _default_init(teacher)
    best = _solve_l2_from(init, alpha, lambda_, loss, teacher, cfg)
    if _is_symmetric_channel(teacher) and cfg.init is None:
        sym = _solve_l2_from(init.with_(m=0.0), alpha, lambda_, loss, teacher, cfg)
        rho = teacher.rho
        pair = sorted([best, sym], key=lambda s: gen_error(s.m, s.q, rho))
        best = pair[0].with_(alternatives=(pair[1],))
    return best


def solve_general_six(alpha, loss: LossSpec, reg: RegSpec, teacher: TeacherModel, cfg: SolverConfig = SolverConfig()):
    """Fixed point of the six-equation system for a separable regularizer."""
    _check_positive(alpha)
    init = cfg.init if isinstance(cfg.init, OverlapState) else _default_init(teacher)
    order = cfg.quad_order_1d
    rho = teacher.rho
    cache = {}

    def step(x):
        m, q, s = x
        if m * m > rho * q:
            m = math.copysign(math.sqrt(rho * q), m)
        new = rhs_general_six(OverlapState(m, max(q, 1e-300), max(s, SIGMA_FLOOR)), alpha, loss, reg, teacher, order)
        cache[tuple(x)] = new
        return np.array([new.m, new.q, new.sigma])

    out = iterate_fixed_point(step, np.array([init.m, init.q, init.sigma]), cfg, positive=[False, True, True])
    if tuple(out.x) not in cache:
        step(out.x)
    h = cache[tuple(out.x)]
    m, q, s = (float(v) for v in out.x)
    return OverlapState(
        m, q, s, h.m_hat, h.q_hat, h.sigma_hat, Q=s + q, Q_hat=h.sigma_hat - h.q_hat,
        residual=out.residual, iters=out.iters, flags=out.flags,
    )


def sweep_alpha(alphas: Sequence[float], lambda_, loss, teacher, cfg: SolverConfig = SolverConfig()):
    """Continuation in alpha: each solve starts from the previous fixed point."""
    states = []
    prev = cfg.init
    for a in alphas:
        c = SolverConfig(cfg.tol, cfg.max_iter, cfg.damping, cfg.quad_order_1d, cfg.quad_order_2d, prev, cfg.polish)
        st = solve_erm_replica(a, lambda_, loss, teacher, c)
        states.append(st)
        prev = st
    return states


# ---------------------------------------------------------------------------
# Bayes solver


def _solve_bayes_from(q0, alpha, teacher, cfg):
    rho = teacher.rho
    order = cfg.quad_order_1d
    hats = {}

    def step(x):
        q = min(max(float(x[0]), 0.0), rho * (1 - 1e-15))
        qh = rhs_bayes(q, alpha, teacher, order)
        hats[float(x[0])] = qh
        return np.array([bayes_prior_update(qh, teacher.prior, order)[0]])

    def scale(x):
        q = float(x[0])
        return max(min(q, rho - q), 1e-300)

    out = iterate_fixed_point(step, np.array([q0]), cfg, positive=[True], scale=scale) if q0 > 0 else None
    if out is None:
        qh = rhs_bayes(0.0, alpha, teacher, order)
        q1 = bayes_prior_update(qh, teacher.prior, order)[0]
        if q1 != 0.0:
            return _solve_bayes_from(1e-8 * rho, alpha, teacher, cfg)
        return BayesState(0.0, qh, residual=0.0, iters=1)
    q = float(out.x[0])
    if q not in hats:
        step(out.x)
    return BayesState(q, hats[q], residual=out.residual, iters=out.iters, flags=out.flags)


def solve_bayes(alpha, teacher: TeacherModel, cfg: SolverConfig = SolverConfig()):
    """Fixed point of the Bayes-optimal system from the init q_b = 0.1 (or ``cfg.init``)."""
    _check_positive(alpha)
    q0 = cfg.init if isinstance(cfg.init, (int, float)) else 0.1 * teacher.rho
    best = _solve_bayes_from(q0, alpha, teacher, cfg)
    if _is_symmetric_channel(teacher) and cfg.init is None:
        sym = _solve_bayes_from(0.0, alpha, teacher, cfg)
        pair = sorted([best, sym], key=lambda s: -s.q_b)
        best = BayesState(
            pair[0].q_b, pair[0].q_hat_b, pair[0].residual, pair[0].iters, pair[0].flags, alternatives=(pair[1],)
        )
    return best


def bayes_departure_alpha(teacher: TeacherModel, bracket=(0.1, 10.0), q0: float = 1e-6, tol: float = 1e-8,
                          order: int = 80) -> float:
    """Sample ratio above which the uninformative Bayes fixed point ``q_b = 0`` is unstable.

    Bisects on the sign of ``F(q0) - q0``, where ``F`` is one Bayes update and
    ``q0`` a small perturbation of the symmetric solution: below the threshold the
    perturbed iterate shrinks back to zero, above it the iteration departs.
    """
    rho = teacher.rho

    def departs(alpha):
        qh = rhs_bayes(q0 * rho, alpha, teacher, order)
        return bayes_prior_update(qh, teacher.prior, order)[0] > q0 * rho

    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0 < lo < hi:
        raise DomainError("bracket must satisfy 0 < low < high")
    if departs(lo) or not departs(hi):
        raise SolverError("departure point not bracketed")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if departs(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Gordon solver


def _binary_noiseless(teacher):
    ch = teacher.channel
    if isinstance(ch, Linear) or ch.noise_variance != 0:
        raise DomainError("the min-max system needs a noiseless binary channel")


def gordon_expectations(mu, delta, tau, loss, teacher: TeacherModel, order: int = 24):
    """E[u P], E[g P], E[(x - P)^2] with ``x = delta g + mu u`` and ``u = s phi(sqrt(rho) s)``."""
    _binary_noiseless(teacher)
    rho = teacher.rho
    sr = math.sqrt(rho)
    srule = split_rule([c / sr for c in _channel_centres(teacher)], order)
    s = srule.nodes
    u = s * phi_out(teacher.channel, sr * s)
    kinks = loss_kinks(loss, tau)
    if kinks and delta > 0:
        rows = np.stack([(c - mu * u) / delta for c in kinks], axis=1)
    else:
        rows = np.full((s.size, 1), np.nan)
    g, wg = split_rule_rows(rows, order)
    x = delta * g + mu * u[:, None]
    p = prox_loss(loss, 1.0, tau, x).point
    w = srule.weights[:, None] * wg
    return float(np.sum(w * u[:, None] * p)), float(np.sum(w * g * p)), float(np.sum(w * (x - p) ** 2))


def rhs_gordon(state: GordonState, alpha, lambda_, loss, teacher, order: int = 24) -> GordonState:
    """One sweep of the three min-max equations.

    The tau equation is used in the form ``lambda tau + alpha (1 - E[g P] / delta) = 1``
    rearranged as ``tau = 1 / (lambda + alpha (1 - E[g P] / delta) / tau)``, which
    keeps tau positive along the iteration.
    """
    mu, delta, tau = state.mu, state.delta, state.tau
    e_up, e_gp, e_r2 = gordon_expectations(mu, delta, tau, loss, teacher, order)
    mu_new = alpha / (lambda_ * tau + alpha) * e_up
    delta_new = math.sqrt(alpha * e_r2)
    tau_new = 1.0 / (lambda_ + alpha * (1.0 - e_gp / delta) / tau)
    return GordonState(mu_new, delta_new, tau_new)


def solve_gordon(alpha, lambda_, loss: LossSpec, teacher: TeacherModel, cfg: SolverConfig = SolverConfig()):
    """Fixed point of the min-max system for a margin loss ``l(y, z) = ell(y z)``."""
    _check_positive(alpha, lambda_)
    _binary_noiseless(teacher)
    rho = teacher.rho
    if isinstance(cfg.init, GordonState):
        x0 = np.array([cfg.init.mu, cfg.init.delta, cfg.init.tau])
    else:
        m0 = 0.1 * math.sqrt(rho)
        x0 = np.array([m0 / math.sqrt(rho), math.sqrt(0.5 - m0 * m0 / rho), 1.0])

    def step(x):
        mu, delta, tau = x
        new = rhs_gordon(GordonState(mu, max(delta, 1e-300), max(tau, SIGMA_FLOOR)), alpha, lambda_, loss, teacher,
                         cfg.quad_order_2d)
        return np.array([new.mu, new.delta, new.tau])

    out = iterate_fixed_point(step, x0, cfg, positive=[False, True, True])
    mu, delta, tau = (float(v) for v in out.x)
    return GordonState(mu, delta, tau, residual=out.residual, iters=out.iters, flags=out.flags)


# ---------------------------------------------------------------------------
# optimal regularization


class LambdaOpt(NamedTuple):
    lambda_opt: float
    e_g: float
    at_boundary: bool
    state: OverlapState | None


GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def lambda_opt(alpha, loss: LossSpec, teacher: TeacherModel, cfg: SolverConfig = SolverConfig(),
               bracket=(1e-3, 10.0), rtol: float = 1e-4) -> LambdaOpt:
    """Golden-section search of the lambda minimizing the replica generalization error.

    The search runs in log(lambda), so the tolerance is relative.  An optimum at a
    bracket end sets ``at_boundary`` (for margin losses it signals lambda -> 0).
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (0 < lo <= hi):
        raise DomainError("bracket must satisfy 0 < low <= high")
    rho = teacher.rho
    warm = {}

    def evaluate(lam):
        near = min(warm, key=lambda k: abs(math.log(k / lam)), default=None)
        c = cfg if near is None else SolverConfig(cfg.tol, cfg.max_iter, cfg.damping, cfg.quad_order_1d,
                                                  cfg.quad_order_2d, warm[near], cfg.polish)
        st = solve_erm_replica(alpha, lam, loss, teacher, c)
        warm[lam] = st
        return gen_error(st.m, st.q, rho), st

    if lo == hi:
        e, st = evaluate(lo)
        return LambdaOpt(lo, e, False, st)
    a, b = math.log(lo), math.log(hi)
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = evaluate(math.exp(c))[0], evaluate(math.exp(d))[0]
    tol = math.log1p(rtol)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = evaluate(math.exp(c))[0]
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = evaluate(math.exp(d))[0]
    lam = math.exp(0.5 * (a + b))
    e, st = evaluate(lam)
    edge = min(lam / lo, hi / lam) < 1.0 + 10 * rtol
    return LambdaOpt(lam, e, edge, st)
