"""Gaussian expectations by deterministic quadrature.

Two families of rules share the :class:`QuadratureRule` container, whose
weights already contain the standard normal density and sum to one:

* probabilists' Gauss-Hermite rules, spectrally accurate for smooth integrands;
* split rules, Gauss-Legendre on the pieces of ``[-cutoff, cutoff]`` cut at
  caller-supplied breakpoints.  They are used wherever the integrand has a kink
  (hinge regions) or a sharp transition (channels with a small variance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_hermitenorm

from .errors import DomainError
from .teacher import Continuous, Discrete, TeacherModel, label_domain

SQRT_2PI = math.sqrt(2.0 * math.pi)
CUTOFF = 12.0
STANDARD_BREAKS = (-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    order: int


@lru_cache(maxsize=64)
def gauss_hermite(order: int) -> QuadratureRule:
    """Probabilists' Gauss-Hermite rule for E f(xi), xi ~ N(0, 1)."""
    if not 2 <= order <= 512:
        raise DomainError("Gauss-Hermite order must lie in [2, 512]")
    # scipy switches to asymptotic formulas at high order, where numpy overflows
    x, w = roots_hermitenorm(order)
    w = w / SQRT_2PI
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w, order)


@lru_cache(maxsize=64)
def _legendre(order: int):
    return leggauss(order)


def _pieces(breaks, cutoff):
    pts = np.asarray(sorted(set(float(b) for b in breaks if -cutoff < b < cutoff)))
    return np.concatenate(([-cutoff], pts, [cutoff]))


def split_rule(breaks=(), order: int = 80, cutoff: float = CUTOFF, standard: bool = True) -> QuadratureRule:
    """Piecewise Gauss-Legendre rule for E f(xi), xi ~ N(0, 1), cut at ``breaks``.

    Args:
        breaks: interior points where the integrand is not smooth.
        order: Gauss-Legendre nodes per piece.
        cutoff: the Gaussian tail beyond ``|xi| > cutoff`` is dropped (mass ~1e-33).
        standard: also cut at a fixed set of points so that every piece stays short
            relative to the Gaussian width.
    """
    if order < 2:
        raise DomainError("order must be at least 2")
    br = list(breaks) + (list(STANDARD_BREAKS) if standard else [])
    br = [b for b in br if np.isfinite(b)]
    edges = _pieces(br, cutoff)
    t, wt = _legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * wt[None, :]).ravel() * np.exp(-0.5 * nodes**2) / SQRT_2PI
    return QuadratureRule(nodes, weights, order)


def split_rule_rows(break_rows, order: int = 24, cutoff: float = CUTOFF):
    """Row-wise split rules: one rule per row of ``break_rows`` (shape ``(r, k)``).

    Breakpoints outside the window are clipped, so all rows share the same node
    count.  Returns ``(nodes, weights)`` of shape ``(r, pieces * order)``.
    """
    rows = np.atleast_2d(np.asarray(break_rows, dtype=float))
    rows = np.clip(np.nan_to_num(rows, nan=cutoff), -cutoff, cutoff)
    std = np.broadcast_to(np.asarray(STANDARD_BREAKS), (rows.shape[0], len(STANDARD_BREAKS)))
    ends = np.broadcast_to(np.array([-cutoff, cutoff]), (rows.shape[0], 2))
    edges = np.sort(np.concatenate([ends, std, rows], axis=1), axis=1)
    t, wt = _legendre(order)
    half = 0.5 * np.diff(edges, axis=1)
    mid = 0.5 * (edges[:, 1:] + edges[:, :-1])
    nodes = (mid[..., None] + half[..., None] * t).reshape(rows.shape[0], -1)
    weights = (half[..., None] * wt).reshape(rows.shape[0], -1) * np.exp(-0.5 * nodes**2) / SQRT_2PI
    return nodes, weights


def expect_1d(rule: QuadratureRule, f):
    """E f(xi); ``f`` is vectorized and may return extra leading axes."""
    return np.sum(np.asarray(f(rule.nodes)) * rule.weights, axis=-1)


def expect_2d(rule: QuadratureRule, f, rule2: QuadratureRule | None = None):
    """E f(g, s) for independent standard normals on the tensor-product grid."""
    rule2 = rule if rule2 is None else rule2
    g, s = np.meshgrid(rule.nodes, rule2.nodes, indexing="ij")
    w = np.outer(rule.weights, rule2.weights)
    return np.sum(np.asarray(f(g, s)) * w, axis=(-2, -1))


@lru_cache(maxsize=32)
def _continuous_nodes(low, high, order, pieces):
    edges = np.linspace(low, high, pieces + 1)
    t, wt = _legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * t).ravel(), (half[:, None] * wt).ravel()


def label_nodes(teacher: TeacherModel):
    """Nodes and weights of the label sum (discrete) or integral (continuous)."""
    dom = label_domain(teacher)
    if isinstance(dom, Discrete):
        vals = np.asarray(dom.values, dtype=float)
        return vals, np.ones_like(vals)
    assert isinstance(dom, Continuous)
    return _continuous_nodes(dom.low, dom.high, dom.order, dom.pieces)


def expect_y_xi(teacher: TeacherModel, rule: QuadratureRule, f):
    """Sum (or integral) over labels of E_xi f(y, xi).

    ``f`` receives ``y`` with shape ``(k, 1)`` and ``xi`` with shape ``(1, n)``; any
    channel weight must be included by the caller.
    """
    ys, wy = label_nodes(teacher)
    vals = np.asarray(f(ys[:, None], rule.nodes[None, :]))
    return np.einsum("...kn,k,n->...", vals, wy, rule.weights)
