"""
Theory against finite-size simulation
=====================================

Fit ERM on synthetic data at d = 1000 and compare with the replica prediction.
"""

import numpy as np

from erm_asymptotics.analytic import gen_error
from erm_asymptotics.losses import L2, Hinge, Logistic, Square
from erm_asymptotics.saddle import solve_erm_replica
from erm_asymptotics.simulate import replicate
from erm_asymptotics.teacher import GaussianPrior, Sign, TeacherModel

teacher = TeacherModel(Sign(0.0), GaussianPrior(0.0, 1.0))
seeds = range(5)

# %%
for loss, lam in ((Square(), 0.5708), (Hinge(), 0.1), (Logistic(), 0.1)):
    for alpha in (0.5, 2.0):
        fits = replicate(teacher, alpha, 1000, seeds, loss, L2(lam))
        sim = np.array([f.e_g_emp for f in fits])
        st = solve_erm_replica(alpha, lam, loss, teacher)
        print(f"{loss.name:>8} alpha={alpha}: theory {gen_error(st.m, st.q):.4f}  "
              f"sim {sim.mean():.4f} +- {sim.std(ddof=1) / np.sqrt(sim.size):.4f}")

# %%
# Minimum-norm least squares at the interpolation threshold.
fits = replicate(teacher, 1.0, 1000, seeds, Square(), None)
print("pseudo-inverse at alpha=1:", np.mean([f.e_g_emp for f in fits]).round(4))
