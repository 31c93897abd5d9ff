"""Losses, regularizers, proximal maps and the ERM denoisers built on them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
from scipy.special import expit

from .errors import DomainError, SolverError


@dataclass(frozen=True)
class Square:
    name = "square"


@dataclass(frozen=True)
class Hinge:
    name = "hinge"


@dataclass(frozen=True)
class Logistic:
    name = "logistic"


@dataclass(frozen=True, eq=False)
class CustomDifferentiable:
    """User loss ``value(y, z)`` with exact first and second z-derivatives.

    The loss is trusted to be convex in ``z``; all callables must broadcast.
    """

    value: Callable
    dz: Callable
    d2z: Callable
    name: str = "custom"


LossSpec = Union[Square, Hinge, Logistic, CustomDifferentiable]


@dataclass(frozen=True)
class L2:
    strength: float

    def __post_init__(self):
        _positive(self.strength)


@dataclass(frozen=True)
class L1:
    strength: float

    def __post_init__(self):
        _positive(self.strength)


@dataclass(frozen=True, eq=False)
class CustomSeparable:
    """Separable regularizer given by its value and proximal map.

    ``prox(x, scale)`` returns argmin_w r(w) + (w - x)^2 / (2 scale).  The optional
    ``dprox`` is its x-derivative and ``grad`` the derivative of ``value``; when
    ``dprox`` is missing it is replaced by a central finite difference.
    """

    value: Callable
    prox: Callable
    dprox: Optional[Callable] = None
    grad: Optional[Callable] = None
    name: str = "custom"


RegSpec = Union[L2, L1, CustomSeparable]


class ProxResult(NamedTuple):
    point: np.ndarray
    envelope: np.ndarray
    dpoint: np.ndarray


def _positive(x):
    if not (np.isfinite(x) and x > 0):
        raise DomainError("regularization strength must be positive")


LOSSES = {"square": Square(), "hinge": Hinge(), "logistic": Logistic()}


def loss_from_name(name: str) -> LossSpec:
    try:
        return LOSSES[name]
    except KeyError:
        raise DomainError(f"unknown loss {name!r}") from None


# ---------------------------------------------------------------------------
# pointwise loss evaluation


def loss_value(loss: LossSpec, y, z):
    y, z = np.asarray(y, dtype=float), np.asarray(z, dtype=float)
    if isinstance(loss, Square):
        return 0.5 * (y - z) ** 2
    if isinstance(loss, Hinge):
        return np.maximum(0.0, 1.0 - y * z)
    if isinstance(loss, Logistic):
        return np.logaddexp(0.0, -y * z)
    return np.asarray(loss.value(y, z), dtype=float)


def loss_grad(loss: LossSpec, y, z):
    """z-derivative; the hinge returns the subgradient -y on the kink side ``yz < 1``."""
    y, z = np.asarray(y, dtype=float), np.asarray(z, dtype=float)
    if isinstance(loss, Square):
        return z - y
    if isinstance(loss, Hinge):
        return np.where(y * z < 1.0, -y, 0.0)
    if isinstance(loss, Logistic):
        return -y * expit(-y * z)
    return np.asarray(loss.dz(y, z), dtype=float)


def loss_hess(loss: LossSpec, y, z):
    y, z = np.asarray(y, dtype=float), np.asarray(z, dtype=float)
    if isinstance(loss, Square):
        return np.ones(np.broadcast(y, z).shape)
    if isinstance(loss, Hinge):
        return np.zeros(np.broadcast(y, z).shape)
    if isinstance(loss, Logistic):
        return y * y * expit(y * z) * expit(-y * z)
    return np.asarray(loss.d2z(y, z), dtype=float)


# ---------------------------------------------------------------------------
# proximal maps


def _newton_prox(dl, d2l, y, v, omega, tol=1e-12, max_iter=100):
    """Solve z = omega - v * dl(y, z) for a convex loss, vectorized.

    The root lies between omega and the gradient step omega - v dl(y, omega); that
    bracket is widened geometrically if the loss turns out less regular, then
    Newton steps falling outside it are replaced by bisection.
    """
    y, v, omega = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (y, v, omega)))
    step = omega - v * dl(y, omega)
    lo, hi = np.minimum(omega, step), np.maximum(omega, step)

    def resid(z):
        return z - omega + v * dl(y, z)

    width = np.maximum(hi - lo, 1e-12 * np.maximum(1.0, np.abs(omega)))
    for _ in range(60):
        bad_lo, bad_hi = resid(lo) > 0, resid(hi) < 0
        if not (bad_lo.any() or bad_hi.any()):
            break
        lo = np.where(bad_lo, lo - width, lo)
        hi = np.where(bad_hi, hi + width, hi)
        width = 2.0 * width
    z = np.clip(omega, lo, hi)
    scale = np.maximum(1.0, np.abs(omega))
    g = resid(z)
    slow = np.zeros(z.shape, dtype=bool)
    for _ in range(max_iter):
        done = np.abs(g) <= tol * scale
        if done.all():
            return z
        pos = g > 0
        hi = np.where(pos, z, hi)
        lo = np.where(pos, lo, z)
        zn = z - g / (1.0 + v * d2l(y, z))
        # bisect when Newton leaves the bracket or failed to halve the residual
        out = ~((zn > lo) & (zn < hi)) | slow
        zn = np.where(out, 0.5 * (lo + hi), zn)
        stalled = (hi - lo) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(z))
        z = np.where(done | stalled, z, zn)
        gn = np.where(stalled & ~done, 0.0, resid(z))
        slow = np.abs(gn) > 0.5 * np.abs(g)
        g = gn
    res = float(np.max(np.abs(g) / scale))
    if res > tol:
        raise SolverError("proximal Newton iteration did not converge", residual=res)
    return z


def prox_loss(loss: LossSpec, y, v, omega) -> ProxResult:
    """Proximal point, Moreau envelope and d(point)/d(omega) of ``l(y, .)`` at scale ``v``."""
    y, v, omega = (np.asarray(a, dtype=float) for a in (y, v, omega))
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise DomainError("v must be positive and finite")
    if isinstance(loss, Square):
        point = (omega + y * v) / (1.0 + v)
        dpoint = np.broadcast_to(1.0 / (1.0 + v), point.shape) + 0.0
    elif isinstance(loss, Hinge):
        t = y * omega
        mid = (t >= 1.0 - v * y * y) & (t <= 1.0)
        low = t < 1.0 - v * y * y
        with np.errstate(divide="ignore", invalid="ignore"):
            point = np.where(low, omega + v * y, np.where(mid, 1.0 / y, omega))
        dpoint = np.where(mid, 0.0, 1.0)
    else:
        if isinstance(loss, Logistic):
            dl = lambda yy, z: loss_grad(loss, yy, z)  # noqa: E731
            d2l = lambda yy, z: loss_hess(loss, yy, z)  # noqa: E731
        else:
            dl, d2l = loss.dz, loss.d2z
        point = _newton_prox(dl, d2l, y, v, omega)
        dpoint = 1.0 / (1.0 + v * d2l(y, point))
    envelope = loss_value(loss, y, point) + (point - omega) ** 2 / (2.0 * v)
    return ProxResult(point, envelope, dpoint)


def f_out_erm(loss: LossSpec, y, omega, v):
    """ERM output denoiser ``(prox - omega) / v`` and its omega-derivative."""
    res = prox_loss(loss, y, v, omega)
    v = np.asarray(v, dtype=float)
    return (res.point - omega) / v, (res.dpoint - 1.0) / v


def loss_kinks(loss: LossSpec, v: float):
    """Values of ``y * omega`` where the denoiser of ``loss`` bends sharply."""
    if isinstance(loss, Hinge):
        return (1.0 - v, 1.0)
    if isinstance(loss, Logistic):
        return (-v, -0.5 * v, 0.0, 2.0, 5.0, 10.0)
    return ()


# ---------------------------------------------------------------------------
# regularizers


def reg_value(reg: RegSpec, w):
    w = np.asarray(w, dtype=float)
    if isinstance(reg, L2):
        return 0.5 * reg.strength * w**2
    if isinstance(reg, L1):
        return reg.strength * np.abs(w)
    return np.asarray(reg.value(w), dtype=float)


def reg_grad(reg: RegSpec, w):
    w = np.asarray(w, dtype=float)
    if isinstance(reg, L2):
        return reg.strength * w
    if isinstance(reg, L1):
        return reg.strength * np.sign(w)
    if reg.grad is None:
        raise DomainError("custom regularizer has no gradient")
    return np.asarray(reg.grad(w), dtype=float)


def f_w_erm(reg: RegSpec, gamma, lambda_cap):
    """argmin_w r(w) + lambda_cap w^2 / 2 - gamma w, and its gamma-derivative."""
    gamma, lam = np.asarray(gamma, dtype=float), np.asarray(lambda_cap, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("lambda_cap must be positive")
    if isinstance(reg, L2):
        den = reg.strength + lam
        return gamma / den, np.broadcast_to(1.0 / den, np.broadcast(gamma, lam).shape) + 0.0
    if isinstance(reg, L1):
        s = reg.strength
        active = np.abs(gamma) > s
        value = np.where(active, (gamma - s * np.sign(gamma)) / lam, 0.0)
        return value, np.where(active, 1.0 / lam, 0.0)
    x, scale = gamma / lam, 1.0 / lam
    value = np.asarray(reg.prox(x, scale), dtype=float)
    if reg.dprox is not None:
        return value, np.asarray(reg.dprox(x, scale), dtype=float) / lam
    h = 1e-6 * np.maximum(1.0, np.abs(gamma))
    up = np.asarray(reg.prox((gamma + h) / lam, scale), dtype=float)
    dn = np.asarray(reg.prox((gamma - h) / lam, scale), dtype=float)
    return value, (up - dn) / (2.0 * h)
