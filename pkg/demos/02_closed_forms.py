"""
Closed forms and large-alpha rates
==================================

Ridge regression, the pseudo-inverse, the max-margin limit and the
Bayes-optimal rate all have explicit or near-explicit asymptotics.
"""

import math

from erm_asymptotics.analytic import (
    bayes_large_alpha,
    margin_bound,
    max_margin_constants,
    max_margin_limit,
    pseudo_inverse_overlaps,
    ridge_closed_form,
)

# %%
# Ridge at the optimal regularization, and its 1/sqrt(alpha) tail.
for alpha in (1.0, 10.0, 1e4):
    cf = ridge_closed_form(alpha, 0.5708)
    print(f"ridge alpha={alpha:g}: e_g={cf.e_g:.5f}  e_g*sqrt(alpha)={cf.e_g * math.sqrt(alpha):.4f}")

# %%
# The pseudo-inverse peaks at the interpolation threshold alpha = 1.
for alpha in (0.5, 0.9, 0.99, 1.01, 1.1, 2.0):
    print(f"pseudo-inverse alpha={alpha}: e_g={pseudo_inverse_overlaps(alpha).e_g:.4f}")

# %%
# Max-margin: the constants of the large-alpha closure and the rescaled solver.
c = max_margin_constants()
print(f"(c_q, c_eta) = ({c.c_q:.4f}, {c.c_eta:.4f}), e_g*alpha -> {c.K:.4f}")
lim = max_margin_limit([10.0, 100.0])
for alpha, st in zip((10.0, 100.0), lim.states):
    eg = math.acos(st.m / math.sqrt(st.q)) / math.pi
    print(f"max-margin alpha={alpha:g}: e_g*alpha={eg * alpha:.4f}  margin bound={margin_bound(st.q, alpha):.1f}")

# %%
# Bayes-optimal: e_g ~ 1 / (k pi alpha).
b = bayes_large_alpha()
print(f"c0={b.c0:.5f}  k={b.k:.6f}  rate*alpha={b.rate(1.0):.4f}")
