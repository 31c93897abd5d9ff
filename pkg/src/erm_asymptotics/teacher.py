"""Teacher channels, priors, and their Bayes-optimal scalar denoisers.

A teacher generates labels ``y = phi(z) + sqrt(delta) * xi`` with
``z = x . w_star / sqrt(d)``.  The functions below are the scalar partition
functions of the channel and of the prior together with their log-derivatives.

Every numeric function broadcasts over numpy arrays.  Binary channels are
evaluated in log space (``log_ndtr``/``erfcx``) so that the regime of a
vanishing variance ``v`` stays finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import log_ndtr

from .errors import DomainError, ZeroLikelihoodError

LOG_2PI = math.log(2.0 * math.pi)
DOOR_KAPPA = 0.6745


@dataclass(frozen=True)
class Sign:
    noise_variance: float = 0.0

    def __post_init__(self):
        _check_noise(self.noise_variance)


@dataclass(frozen=True)
class Linear:
    noise_variance: float = 0.0

    def __post_init__(self):
        _check_noise(self.noise_variance)


@dataclass(frozen=True)
class RectangleDoor:
    """Label +1 when ``kappa_min <= z <= kappa_max`` and -1 otherwise."""

    kappa_min: float = -DOOR_KAPPA
    kappa_max: float = DOOR_KAPPA
    noise_variance: float = 0.0

    def __post_init__(self):
        _check_noise(self.noise_variance)
        if not self.kappa_min < self.kappa_max:
            raise DomainError("RectangleDoor requires kappa_min < kappa_max")


ChannelSpec = Union[Sign, Linear, RectangleDoor]


@dataclass(frozen=True)
class GaussianPrior:
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise DomainError("Gaussian prior variance must be positive")

    def second_moment(self) -> float:
        return self.mean**2 + self.variance


@dataclass(frozen=True)
class SparseBinaryPrior:
    """w = 0 with probability ``sparsity``, otherwise +1 or -1 with equal odds."""

    sparsity: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.sparsity < 1.0:
            raise DomainError("sparsity must lie in [0, 1)")

    def second_moment(self) -> float:
        return 1.0 - self.sparsity


PriorSpec = Union[GaussianPrior, SparseBinaryPrior]


@dataclass(frozen=True)
class TeacherModel:
    channel: ChannelSpec = field(default_factory=Sign)
    prior: PriorSpec = field(default_factory=GaussianPrior)
    rho: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "rho", float(self.prior.second_moment()))

    @property
    def is_binary(self) -> bool:
        return isinstance(self.channel, (Sign, RectangleDoor))


@dataclass(frozen=True)
class Discrete:
    values: tuple = (-1.0, 1.0)


@dataclass(frozen=True)
class Continuous:
    low: float
    high: float
    order: int = 32
    pieces: int = 24


LabelDomain = Union[Discrete, Continuous]


def _check_noise(delta):
    if not (math.isfinite(delta) and delta >= 0):
        raise DomainError("noise variance must be finite and nonnegative")


def label_domain(teacher: TeacherModel) -> LabelDomain:
    ch = teacher.channel
    if isinstance(ch, Linear):
        half = 14.0 * math.sqrt(teacher.rho + ch.noise_variance)
        return Continuous(-half, half)
    if ch.noise_variance == 0:
        return Discrete((-1.0, 1.0))
    spread = 12.0 * math.sqrt(ch.noise_variance)
    return Continuous(-1.0 - spread, 1.0 + spread)


# ---------------------------------------------------------------------------
# channel partition functions


def _validate(omega, v):
    omega = np.asarray(omega, dtype=float)
    v = np.asarray(v, dtype=float)
    if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(v))):
        raise DomainError("non-finite argument")
    if np.any(v <= 0):
        raise DomainError("variance argument must be positive")
    return omega, v


def _log_normal(x, mean, var):
    return -0.5 * (x - mean) ** 2 / var - 0.5 * np.log(var) - 0.5 * LOG_2PI


def _log_diff_ndtr(hi, lo):
    """log(Phi(hi) - Phi(lo)) for hi > lo, accurate in both tails."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        left = log_ndtr(hi) + np.log1p(-np.exp(log_ndtr(lo) - log_ndtr(hi)))
        right = log_ndtr(-lo) + np.log1p(-np.exp(log_ndtr(-hi) - log_ndtr(-lo)))
    return np.where(lo > 0, right, left)


def _binary_parts(channel, omega, v):
    """log P(+1), log P(-1) for the noiseless channel, plus the kernels of dP(+1)/domega.

    The derivative is ``sum_k sign_k * N(omega; centre_k, v)``.
    """
    sv = np.sqrt(v)
    if isinstance(channel, Sign):
        x = omega / sv
        return log_ndtr(x), log_ndtr(-x), ((0.0, 1.0),)
    lo = (channel.kappa_min - omega) / sv
    hi = (channel.kappa_max - omega) / sv
    log_in = _log_diff_ndtr(hi, lo)
    log_out = np.logaddexp(log_ndtr(lo), log_ndtr(-hi))
    return log_in, log_out, ((channel.kappa_min, 1.0), (channel.kappa_max, -1.0))


def _label_weights(channel, y):
    """log of the label densities given the noiseless label +1 and -1."""
    y = np.asarray(y, dtype=float)
    delta = channel.noise_variance
    if delta == 0:
        with np.errstate(divide="ignore"):
            return np.log((y == 1.0).astype(float)), np.log((y == -1.0).astype(float))
    return _log_normal(y, 1.0, delta), _log_normal(y, -1.0, delta)


def _binary_state(channel, y, omega, v):
    log_p, log_q, kernels = _binary_parts(channel, omega, v)
    log_a, log_b = _label_weights(channel, y)
    with np.errstate(invalid="ignore"):
        log_z = np.logaddexp(log_a + log_p, log_b + log_q)
    return log_a, log_b, log_z, kernels


def log_z_out_star(channel: ChannelSpec, y, omega, v):
    """log of the channel partition function, -inf outside the label support."""
    omega, v = _validate(omega, v)
    if isinstance(channel, Linear):
        return _log_normal(np.asarray(y, dtype=float), omega, channel.noise_variance + v)
    return _binary_state(channel, y, omega, v)[2]


def z_out_star(channel: ChannelSpec, y, omega, v):
    """Probability (or density) of label ``y`` given a Gaussian field with mean ``omega`` and variance ``v``."""
    return np.exp(log_z_out_star(channel, y, omega, v))


def _binary_derivatives(channel, y, omega, v):
    log_a, log_b, log_z, kernels = _binary_state(channel, y, omega, v)
    if np.any(np.isneginf(log_z)):
        raise ZeroLikelihoodError("label outside the channel support")
    first = 0.0
    second = 0.0
    for centre, sgn in kernels:
        log_k = _log_normal(omega, centre, v)
        with np.errstate(over="ignore"):
            term = sgn * (np.exp(log_a + log_k - log_z) - np.exp(log_b + log_k - log_z))
        first = first + term
        second = second - (omega - centre) / v * term
    return first, second


def f_out_star(channel: ChannelSpec, y, omega, v):
    """d/domega log z_out_star."""
    omega, v = _validate(omega, v)
    if isinstance(channel, Linear):
        return (np.asarray(y, dtype=float) - omega) / (channel.noise_variance + v)
    return _binary_derivatives(channel, y, omega, v)[0]


def df_out_star(channel: ChannelSpec, y, omega, v):
    """d^2/domega^2 log z_out_star."""
    omega, v = _validate(omega, v)
    if isinstance(channel, Linear):
        return np.broadcast_to(-1.0 / (channel.noise_variance + v), np.broadcast(y, omega).shape) + 0.0
    first, second = _binary_derivatives(channel, y, omega, v)
    return second - first**2


# ---------------------------------------------------------------------------
# prior partition functions


def _validate_prior(prior, gamma, lam):
    gamma = np.asarray(gamma, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if not (np.all(np.isfinite(gamma)) and np.all(np.isfinite(lam))):
        raise DomainError("non-finite argument")
    if isinstance(prior, GaussianPrior) and np.any(lam * prior.variance + 1.0 <= 0):
        raise DomainError("Gaussian prior partition function is not integrable for this Lambda")
    return gamma, lam


def _sparse_terms(prior, gamma, lam):
    rs = prior.sparsity
    with np.errstate(divide="ignore", over="ignore"):
        log_c = math.log(rs) - math.log1p(-rs) + 0.5 * lam if rs > 0 else np.full_like(lam, -np.inf)
        e = np.exp(-np.abs(gamma))
        ce = np.exp(log_c - np.abs(gamma))
        den = 2.0 * ce + 1.0 + e * e
    return log_c, e, den


def log_z_w_star(prior: PriorSpec, gamma, lambda_):
    gamma, lam = _validate_prior(prior, gamma, lambda_)
    if isinstance(prior, GaussianPrior):
        mu, s = prior.mean, prior.variance
        a = lam * s + 1.0
        return (gamma**2 * s + 2 * gamma * mu - lam * mu**2) / (2 * a) - 0.5 * np.log(a)
    rs = prior.sparsity
    log_c, e, _ = _sparse_terms(prior, gamma, lam)
    log_cosh = np.abs(gamma) + np.log1p(e * e) - math.log(2.0)
    return math.log1p(-rs) - 0.5 * lam + np.logaddexp(log_c, log_cosh)


def z_w_star(prior: PriorSpec, gamma, lambda_):
    """E_w exp(-lambda_ w^2 / 2 + gamma w) under the prior."""
    return np.exp(log_z_w_star(prior, gamma, lambda_))


def f_w_star(prior: PriorSpec, gamma, lambda_):
    """Posterior mean d/dgamma log z_w_star."""
    gamma, lam = _validate_prior(prior, gamma, lambda_)
    if isinstance(prior, GaussianPrior):
        return (gamma * prior.variance + prior.mean) / (1.0 + lam * prior.variance)
    _, e, den = _sparse_terms(prior, gamma, lam)
    return np.sign(gamma) * (1.0 - e * e) / den


def df_w_star(prior: PriorSpec, gamma, lambda_):
    """Posterior variance d^2/dgamma^2 log z_w_star."""
    gamma, lam = _validate_prior(prior, gamma, lambda_)
    if isinstance(prior, GaussianPrior):
        return np.broadcast_to(prior.variance / (1.0 + lam * prior.variance), np.broadcast(gamma, lam).shape) + 0.0
    _, e, den = _sparse_terms(prior, gamma, lam)
    mean = np.sign(gamma) * (1.0 - e * e) / den
    return (1.0 + e * e) / den - mean**2


def prior_components(prior: PriorSpec):
    """The prior written as a finite mixture of (weight, mean, variance) atoms or Gaussians."""
    if isinstance(prior, GaussianPrior):
        return ((1.0, prior.mean, prior.variance),)
    rs = prior.sparsity
    half = 0.5 * (1.0 - rs)
    comps = ((half, -1.0, 0.0), (half, 1.0, 0.0))
    return ((rs, 0.0, 0.0),) + comps if rs > 0 else comps


# ---------------------------------------------------------------------------
# sampling


def phi_out(channel: ChannelSpec, z):
    z = np.asarray(z, dtype=float)
    if isinstance(channel, Sign):
        return np.where(z >= 0, 1.0, -1.0)
    if isinstance(channel, RectangleDoor):
        inside = (z >= channel.kappa_min) & (z <= channel.kappa_max)
        return np.where(inside, 1.0, -1.0)
    return z.copy()


def sample_labels(channel: ChannelSpec, z, rng_seed: int):
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("non-finite field")
    y = phi_out(channel, z)
    if channel.noise_variance > 0:
        rng = np.random.default_rng(rng_seed)
        y = y + math.sqrt(channel.noise_variance) * rng.standard_normal(z.shape)
    return y


def sample_weights(prior: PriorSpec, d: int, rng: np.random.Generator):
    if isinstance(prior, GaussianPrior):
        return prior.mean + math.sqrt(prior.variance) * rng.standard_normal(d)
    rs = prior.sparsity
    return rng.choice(np.array([0.0, -1.0, 1.0]), size=d, p=[rs, 0.5 * (1 - rs), 0.5 * (1 - rs)])


# ---------------------------------------------------------------------------
# key=value serialization


def teacher_to_config(teacher: TeacherModel) -> str:
    ch, pr = teacher.channel, teacher.prior
    kind = {Sign: "sign", Linear: "linear", RectangleDoor: "door"}[type(ch)]
    lines = [f"channel={kind}", f"noise_variance={ch.noise_variance!r}"]
    if isinstance(ch, RectangleDoor):
        lines += [f"kappa_min={ch.kappa_min!r}", f"kappa_max={ch.kappa_max!r}"]
    if isinstance(pr, GaussianPrior):
        lines += ["prior=gaussian", f"prior_mean={pr.mean!r}", f"prior_variance={pr.variance!r}"]
    else:
        lines += ["prior=sparse_binary", f"sparsity={pr.sparsity!r}"]
    return "\n".join(lines) + "\n"


def parse_key_values(text: str) -> dict:
    out = {}
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"line {num}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def teacher_from_config(text_or_dict) -> TeacherModel:
    kv = parse_key_values(text_or_dict) if isinstance(text_or_dict, str) else dict(text_or_dict)
    try:
        noise = float(kv.get("noise_variance", 0.0))
        kind = kv.get("channel", "sign")
        if kind == "sign":
            channel = Sign(noise)
        elif kind == "linear":
            channel = Linear(noise)
        elif kind == "door":
            kappa = float(kv["kappa"]) if "kappa" in kv else DOOR_KAPPA
            channel = RectangleDoor(
                float(kv.get("kappa_min", -kappa)), float(kv.get("kappa_max", kappa)), noise
            )
        else:
            raise DomainError(f"unknown channel {kind!r}")
        pkind = kv.get("prior", "gaussian")
        if pkind == "gaussian":
            prior = GaussianPrior(float(kv.get("prior_mean", 0.0)), float(kv.get("prior_variance", 1.0)))
        elif pkind in ("sparse_binary", "sparse"):
            prior = SparseBinaryPrior(float(kv.get("sparsity", 0.0)))
        else:
            raise DomainError(f"unknown prior {pkind!r}")
    except (KeyError, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"bad teacher config: {exc}") from exc
    return TeacherModel(channel, prior)
