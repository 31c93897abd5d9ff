"""Order-parameter containers shared by the solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import DomainError, InvariantError

ETA_SLACK = 1e-12


def overlap_eta(m: float, q: float, rho: float) -> float:
    """eta = m^2 / (rho q), clipped into [0, 1] when the violation is round-off."""
    if q <= 0 or rho <= 0:
        raise DomainError("q and rho must be positive")
    eta = m * m / (rho * q)
    if eta > 1.0 + ETA_SLACK:
        raise InvariantError(f"eta = {eta!r} exceeds 1 (Cauchy-Schwarz)")
    return min(eta, 1.0)


@dataclass(frozen=True)
class OverlapState:
    """Replica order parameters; the hatted ones are the conjugates."""

    m: float
    q: float
    sigma: float
    m_hat: float = 0.0
    q_hat: float = 0.0
    sigma_hat: float = 0.0
    Q: Optional[float] = None
    Q_hat: Optional[float] = None
    residual: float = math.nan
    iters: int = 0
    flags: tuple = ()
    alternatives: tuple = field(default=(), compare=False)

    def eta(self, rho: float = 1.0) -> float:
        return overlap_eta(self.m, self.q, rho)

    def with_(self, **kw) -> "OverlapState":
        return replace(self, **kw)


@dataclass(frozen=True)
class BayesState:
    q_b: float
    q_hat_b: float
    residual: float = math.nan
    iters: int = 0
    flags: tuple = ()
    alternatives: tuple = field(default=(), compare=False)

    def eta(self, rho: float = 1.0) -> float:
        return min(max(self.q_b / rho, 0.0), 1.0)


@dataclass(frozen=True)
class GordonState:
    mu: float
    delta: float
    tau: float
    residual: float = math.nan
    iters: int = 0
    flags: tuple = ()

    def overlaps(self, rho: float = 1.0):
        """(m, q, sigma) through the Gordon to replica dictionary."""
        return math.sqrt(rho) * self.mu, self.mu**2 + self.delta**2, self.tau


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 5000
    damping: float = 0.5
    quad_order_1d: int = 80
    quad_order_2d: int = 24
    init: Optional[object] = None
    polish: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if not 0.0 <= self.damping < 1.0:
            raise DomainError("damping must lie in [0, 1)")
        if self.max_iter < 1:
            raise DomainError("max_iter must be positive")
