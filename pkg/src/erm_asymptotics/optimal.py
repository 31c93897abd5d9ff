"""Loss and regularizer whose ERM denoisers coincide with the Bayes-optimal ones.

Both objects are inverse Moreau envelopes taken at the Bayes fixed point
``(q_b, q_hat_b)``.  Writing ``V = rho - q_b`` and ``Lambda = q_hat_b``::

    l(y, z) = -min_omega [ (z - omega)^2 / (2 V) + log Z_out(y, omega, V) ]
    r(w)    = -min_gamma [ Lambda w^2 / 2 - gamma w + log Z_w(gamma, Lambda) ]

Additive constants are dropped.  Each inner problem is convex with a unique
stationary point, found by a bracketed Newton iteration on the stationarity
equation ``z = omega + V f_out(y, omega, V)`` (resp. ``w = f_w(gamma, Lambda)``).
The envelope theorem then gives ``dl/dz = -f_out(y, omega*, V)`` and
``dr/dw = gamma* - Lambda w``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import erfcx, log_ndtr

from .errors import DomainError, SolverError
from .losses import L2, CustomDifferentiable, CustomSeparable, f_out_erm, f_w_erm
from .states import BayesState, SolverConfig
from .teacher import (
    GaussianPrior,
    Linear,
    RectangleDoor,
    Sign,
    SparseBinaryPrior,
    TeacherModel,
    df_out_star,
    df_w_star,
    f_out_star,
    f_w_star,
    log_z_out_star,
    log_z_w_star,
)


@dataclass(frozen=True)
class OptimalObjective:
    """Bayes fixed point frozen into the optimal loss and regularizer."""

    teacher: TeacherModel
    bayes: BayesState
    v_star: float
    lambda_star: float
    inner_tol: float = 1e-10

    def __post_init__(self):
        if not (math.isfinite(self.v_star) and self.v_star > 0):
            raise DomainError("v_star must be positive")
        if not (math.isfinite(self.lambda_star) and self.lambda_star >= 0):
            raise DomainError("lambda_star must be nonnegative")
        if not self.inner_tol > 0:
            raise DomainError("inner_tol must be positive")

    @property
    def flags(self) -> tuple:
        """``("assumption unverified",)`` when the channel is not known to be log-concave."""
        return ("assumption unverified",) if isinstance(self.teacher.channel, RectangleDoor) else ()


def objective_from_bayes(teacher: TeacherModel, bayes: BayesState, inner_tol: float = 1e-10) -> OptimalObjective:
    return OptimalObjective(teacher, bayes, teacher.rho - bayes.q_b, bayes.q_hat_b, inner_tol)


def optimal_objective(alpha: float, teacher: TeacherModel, cfg: SolverConfig = SolverConfig(),
                      inner_tol: float = 1e-10) -> OptimalObjective:
    """Solve the Bayes system at ``alpha`` and freeze it."""
    from .saddle import solve_bayes

    return objective_from_bayes(teacher, solve_bayes(alpha, teacher, cfg), inner_tol)


# ---------------------------------------------------------------------------
# scalar root finding


def _increasing_root(fun, dfun, target, start, tol=1e-12, max_iter=200, relative=False):
    """Vectorized root of the increasing map ``fun(x) = target``.

    The bracket grows geometrically from ``start`` until it changes sign, then
    Newton steps are taken inside it with bisection as a fallback.  Entries whose
    bracket cannot be closed raise :class:`SolverError`.  With ``relative`` the
    residual is measured against ``|target|`` instead of ``max(1, |target|)``.
    """
    target, start = np.broadcast_arrays(np.asarray(target, dtype=float), np.asarray(start, dtype=float))
    lo, hi = start.copy(), start.copy()
    width = np.maximum(1.0, np.abs(start))
    for _ in range(120):
        low_bad = fun(lo) > target
        high_bad = fun(hi) < target
        if not (low_bad.any() or high_bad.any()):
            break
        lo = np.where(low_bad, lo - width, lo)
        hi = np.where(high_bad, hi + width, hi)
        width = 2.0 * width
    else:
        raise SolverError("inner minimizer escaped the widened bracket")
    x = 0.5 * (lo + hi)
    scale = np.abs(target) if relative else np.maximum(1.0, np.abs(target))
    g = fun(x) - target
    slow = np.zeros(x.shape, dtype=bool)
    for _ in range(max_iter):
        done = np.abs(g) <= tol * scale
        if done.all():
            return x
        pos = g > 0
        hi = np.where(pos, x, hi)
        lo = np.where(pos, lo, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - g / dfun(x)
        bad = ~((xn > lo) & (xn < hi)) | slow
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        stalled = (hi - lo) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(x))
        x = np.where(done | stalled, x, xn)
        gn = np.where(stalled & ~done, 0.0, fun(x) - target)
        slow = np.abs(gn) > 0.5 * np.abs(g)
        g = gn
    res = float(np.max(np.abs(g) / scale))
    if res > tol:
        raise SolverError("inner Newton iteration did not converge", residual=res)
    return x


# ---------------------------------------------------------------------------
# optimal loss


def loss_support(channel, y):
    """Open interval of ``z`` where ``l_opt(y, z)`` is finite, as arrays ``(lo, hi)``."""
    y = np.asarray(y, dtype=float)
    lo = np.full(y.shape, -np.inf)
    hi = np.full(y.shape, np.inf)
    if isinstance(channel, Linear) or channel.noise_variance > 0:
        return lo, hi
    if isinstance(channel, Sign):
        return np.where(y > 0, 0.0, lo), np.where(y > 0, hi, 0.0)
    inside = y > 0
    return np.where(inside, channel.kappa_min, lo), np.where(inside, channel.kappa_max, hi)


MILLS_SWITCH = 5.0
MILLS_TERMS = 40


def _mills_parts(t):
    """For the sign channel in the scaled variable ``t = omega / sqrt(V)``.

    Returns ``r = phi(t) / Phi(t)``, ``u = t + r`` (which is ``z / sqrt(V)``) and
    ``D = du/dt = 1 - r u``.  Below ``t = -5`` the differences ``t + r`` and
    ``1 - r u`` cancel badly, so ``u`` and ``D`` come from the continued fraction
    ``u = 1 / (s + 2 / (s + 3 / (s + ...)))`` with ``s = -t``.
    """
    t = np.asarray(t, dtype=float)
    far = t <= -MILLS_SWITCH
    tn = np.where(far, 0.0, t)
    r = math.sqrt(2.0 / math.pi) / erfcx(-tn / math.sqrt(2.0))
    u = tn + r
    d = 1.0 - r * u
    if far.any():
        sf = -t[far]
        tail = np.zeros_like(sf)
        second = tail
        for k in range(MILLS_TERMS, 0, -1):
            second, tail = tail, k / (sf + tail)
        u_far = tail
        u = u.copy()
        r, d = r.copy(), d.copy()
        u[far] = u_far
        r[far] = sf + u_far
        d[far] = u_far * (second - u_far)
    return r, u, d


def _sign_loss_parts(obj: OptimalObjective, y, z):
    """Noiseless sign channel: everything depends on the margin ``y z > 0``."""
    v = obj.v_star
    sv = math.sqrt(v)
    target = y * z / sv
    start = np.where(target > 1.0, target, -1.0 / target)
    t = _increasing_root(lambda x: _mills_parts(x)[1], lambda x: _mills_parts(x)[2], target, start,
                         tol=obj.inner_tol, relative=True)
    r, u, d = _mills_parts(t)
    far = t <= -MILLS_SWITCH
    s = -t
    with np.errstate(divide="ignore", invalid="ignore"):
        near_val = -(0.5 * r * r + log_ndtr(t))
        far_val = -(s * u + 0.5 * u * u - np.log(s + u) - 0.5 * math.log(2.0 * math.pi))
    value = np.where(far, far_val, near_val)
    return value, -y * r / sv, r * u / (v * d)


def _inner_omega(obj: OptimalObjective, y, z):
    """omega* solving ``omega + V f_out(y, omega, V) = z`` (inside the support)."""
    ch, v = obj.teacher.channel, obj.v_star
    return _increasing_root(
        lambda om: om + v * f_out_star(ch, y, om, v),
        lambda om: 1.0 + v * df_out_star(ch, y, om, v),
        z,
        z,
        tol=obj.inner_tol,
    )


def _check_linear(obj):
    delta = obj.teacher.channel.noise_variance
    if delta == 0:
        raise DomainError("the optimal loss of the noiseless linear channel is the constraint z = y")
    return delta


def _loss_parts(obj: OptimalObjective, y, z):
    """(value, dz, d2z) with +inf value outside the support."""
    ch = obj.teacher.channel
    y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    if not np.all(np.isfinite(z)):
        raise DomainError("non-finite z")
    if isinstance(ch, Linear):
        delta = _check_linear(obj)
        return (z - y) ** 2 / (2 * delta), (z - y) / delta, np.full(z.shape, 1.0 / delta)
    lo, hi = loss_support(ch, y)
    ok = (z > lo) & (z < hi)
    value = np.full(z.shape, np.inf)
    dz = np.full(z.shape, np.nan)
    d2z = np.full(z.shape, np.nan)
    if ok.any() and isinstance(ch, Sign) and ch.noise_variance == 0:
        value[ok], dz[ok], d2z[ok] = _sign_loss_parts(obj, y[ok], z[ok])
    elif ok.any():
        v = obj.v_star
        yy, zz = y[ok], z[ok]
        om = _inner_omega(obj, yy, zz)
        fo = f_out_star(ch, yy, om, v)
        dfo = df_out_star(ch, yy, om, v)
        value[ok] = -((zz - om) ** 2 / (2 * v) + log_z_out_star(ch, yy, om, v))
        dz[ok] = -fo
        d2z[ok] = -dfo / np.maximum(1.0 + v * dfo, np.finfo(float).tiny)
    return value, dz, d2z


def optimal_loss(obj: OptimalObjective, y, z):
    """Value of the optimal loss; ``+inf`` where the channel makes ``(y, z)`` impossible."""
    return _loss_parts(obj, y, z)[0]


def optimal_loss_dz(obj: OptimalObjective, y, z):
    return _loss_parts(obj, y, z)[1]


def optimal_loss_d2z(obj: OptimalObjective, y, z):
    return _loss_parts(obj, y, z)[2]


def optimal_loss_spec(obj: OptimalObjective, margin: float | None = None) -> CustomDifferentiable:
    """The optimal loss as a :class:`CustomDifferentiable`.

    When the channel confines ``z`` to an interval, the loss is continued past
    ``margin`` inside each finite endpoint by its second-order Taylor polynomial,
    which keeps it finite, convex where the original is, and exact wherever
    ``z`` stays ``margin`` away from the endpoints.  The default margin is
    ``1e-6 sqrt(v_star)``.
    """
    ch = obj.teacher.channel
    if isinstance(ch, Linear):
        _check_linear(obj)
    t = 1e-6 * math.sqrt(obj.v_star) if margin is None else float(margin)
    if not t > 0:
        raise DomainError("margin must be positive")

    def parts(y, z):
        y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
        lo, hi = loss_support(ch, y)
        a, b = lo + t, hi - t
        zc = np.clip(z, a, np.maximum(a, b))
        val, d1, d2 = _loss_parts(obj, y, zc)
        h = z - zc
        return val + d1 * h + 0.5 * d2 * h * h, d1 + d2 * h, d2

    return CustomDifferentiable(
        value=lambda y, z: parts(y, z)[0],
        dz=lambda y, z: parts(y, z)[1],
        d2z=lambda y, z: parts(y, z)[2],
        name="optimal",
    )


# ---------------------------------------------------------------------------
# optimal regularizer


def _is_centred_gaussian(prior):
    return isinstance(prior, GaussianPrior) and prior.mean == 0.0


def _inner_gamma(obj: OptimalObjective, w):
    prior, lam = obj.teacher.prior, obj.lambda_star
    return _increasing_root(
        lambda g: f_w_star(prior, g, lam),
        lambda g: df_w_star(prior, g, lam),
        w,
        np.zeros_like(w),
        tol=obj.inner_tol,
    )


def _reg_support(prior, w):
    if isinstance(prior, SparseBinaryPrior):
        return np.abs(w) < 1.0
    return np.ones(w.shape, dtype=bool)


def optimal_reg(obj: OptimalObjective, w):
    """Value of the optimal regularizer; ``+inf`` outside the prior's convex hull."""
    prior, lam = obj.teacher.prior, obj.lambda_star
    w = np.asarray(w, dtype=float)
    if isinstance(prior, GaussianPrior):
        return (w - prior.mean) ** 2 / (2 * prior.variance)
    ok = _reg_support(prior, w)
    out = np.full(w.shape, np.inf)
    if ok.any():
        ww = w[ok]
        g = _inner_gamma(obj, ww)
        out[ok] = -(0.5 * lam * ww**2 - g * ww + log_z_w_star(prior, g, lam))
    return out


def optimal_reg_grad(obj: OptimalObjective, w):
    prior, lam = obj.teacher.prior, obj.lambda_star
    w = np.asarray(w, dtype=float)
    if isinstance(prior, GaussianPrior):
        return (w - prior.mean) / prior.variance
    ok = _reg_support(prior, w)
    out = np.full(w.shape, np.nan)
    if ok.any():
        out[ok] = _inner_gamma(obj, w[ok]) - lam * w[ok]
    return out


def _reg_prox(obj: OptimalObjective, x, scale):
    """argmin_w r(w) + (w - x)^2 / (2 scale), parametrized by gamma = gamma*(w).

    Stationarity reads ``gamma + (1/scale - Lambda) f_w(gamma) = x / scale``, whose
    left side increases wherever the prox objective is convex.
    """
    prior, lam = obj.teacher.prior, obj.lambda_star
    x, scale = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(scale, dtype=float))
    c = 1.0 / scale - lam
    g = _increasing_root(
        lambda t: t + c * f_w_star(prior, t, lam),
        lambda t: 1.0 + c * df_w_star(prior, t, lam),
        x / scale,
        x / scale,
        tol=obj.inner_tol,
    )
    fp = df_w_star(prior, g, lam)
    return f_w_star(prior, g, lam), fp / (scale * (1.0 + c * fp))


def optimal_reg_spec(obj: OptimalObjective):
    """The optimal regularizer as a regularizer spec.

    A centred Gaussian prior of variance ``sigma`` gives exactly ``L2(1 / sigma)``.
    """
    prior = obj.teacher.prior
    if _is_centred_gaussian(prior):
        return L2(1.0 / prior.variance)
    return CustomSeparable(
        value=lambda w: optimal_reg(obj, w),
        prox=lambda x, s: _reg_prox(obj, x, s)[0],
        dprox=lambda x, s: _reg_prox(obj, x, s)[1],
        grad=lambda w: optimal_reg_grad(obj, w),
        name="optimal",
    )


# ---------------------------------------------------------------------------
# diagnostics and export


class DenoiserReport(NamedTuple):
    out_deviation: float
    w_deviation: float
    points: int
    v: float
    lambda_: float
    flags: tuple


def verify_denoiser_match(obj: OptimalObjective, points: int = 50, seed: int = 0,
                          v: float | None = None, lambda_: float | None = None) -> DenoiserReport:
    """Max deviation between the ERM denoisers of the optimal pair and the Bayes denoisers.

    Both sides are evaluated at ``(v, lambda_)``, which default to
    ``(v_star, lambda_star)``; other values give a negative control.
    """
    rng = np.random.default_rng(seed)
    ch, prior = obj.teacher.channel, obj.teacher.prior
    v = obj.v_star if v is None else float(v)
    lam = obj.lambda_star if lambda_ is None else float(lambda_)
    omega = rng.uniform(-2.0, 2.0, points)
    if isinstance(ch, Linear):
        y = rng.normal(0.0, math.sqrt(obj.teacher.rho + ch.noise_variance), points)
    elif ch.noise_variance > 0:
        y = rng.choice([-1.0, 1.0], points) + math.sqrt(ch.noise_variance) * rng.standard_normal(points)
    else:
        y = rng.choice([-1.0, 1.0], points)
    flags = list(obj.flags)
    gamma = rng.uniform(-2.0, 2.0, points)
    lam_cap = max(lam, 1e-12)
    # a non-convex optimal loss can defeat the prox solve; report instead of raising
    try:
        erm_out = f_out_erm(optimal_loss_spec(obj), y, omega, v)[0]
        out_dev = float(np.max(np.abs(erm_out - f_out_star(ch, y, omega, v))))
    except SolverError:
        out_dev = math.nan
        flags.append("output prox failed")
    try:
        erm_w = f_w_erm(optimal_reg_spec(obj), gamma, lam_cap)[0]
        w_dev = float(np.max(np.abs(erm_w - f_w_star(prior, gamma, lam_cap))))
    except SolverError:
        w_dev = math.nan
        flags.append("prior prox failed")
    return DenoiserReport(out_dev, w_dev, points, v, lam, tuple(flags))


def check_log_concavity(obj: OptimalObjective, omega=None) -> bool:
    """Sample d^2/domega^2 log Z_out on a grid; warn and return False if it is ever positive."""
    ch, v = obj.teacher.channel, obj.v_star
    if isinstance(ch, Linear):
        return True
    omega = np.linspace(-6.0, 6.0, 241) if omega is None else np.asarray(omega, dtype=float)
    ok = True
    for y in (-1.0, 1.0):
        curv = df_out_star(ch, y, omega, v)
        if np.any(curv > 1e-12):
            ok = False
    if not ok:
        warnings.warn("log Z_out is not concave in omega; the optimal loss may be non-convex", stacklevel=2)
    return ok


def loss_curve(obj: OptimalObjective, z, y: float = 1.0):
    """(z, l_opt(y, z)) shifted so that the minimum over the finite values is zero."""
    z = np.asarray(z, dtype=float)
    val = optimal_loss(obj, y, z)
    finite = np.isfinite(val)
    if finite.any():
        val = val - val[finite].min()
    return np.column_stack([z, val])


def reg_curve(obj: OptimalObjective, w):
    """(w, r_opt(w)) shifted so that the minimum over the finite values is zero."""
    w = np.asarray(w, dtype=float)
    val = optimal_reg(obj, w)
    finite = np.isfinite(val)
    if finite.any():
        val = val - val[finite].min()
    return np.column_stack([w, val])


def export_curve(curve, path, header: str = "") -> None:
    """Write a two-column curve as whitespace-separated text."""
    np.savetxt(path, np.asarray(curve, dtype=float), fmt="%.17g", header=header)
