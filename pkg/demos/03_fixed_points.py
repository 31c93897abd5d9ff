"""
Replica, Gordon and Bayes fixed points
======================================

Two independent routes to the ERM overlaps, plus the Bayes-optimal floor.
"""

from erm_asymptotics.analytic import gen_error, gen_error_bayes
from erm_asymptotics.losses import Hinge, Logistic, Square
from erm_asymptotics.saddle import lambda_opt, solve_bayes, solve_erm_replica, solve_gordon, sweep_alpha
from erm_asymptotics.teacher import GaussianPrior, Sign, TeacherModel

teacher = TeacherModel(Sign(0.0), GaussianPrior(0.0, 1.0))

# %%
# Replica and Gordon agree to solver precision.
for loss in (Square(), Hinge(), Logistic()):
    r = solve_erm_replica(2.0, 0.1, loss, teacher)
    m, q, _ = solve_gordon(2.0, 0.1, loss, teacher).overlaps()
    print(f"{loss.name:>8}: m={r.m:.8f} q={r.q:.8f}  |dm|={abs(r.m - m):.1e} |dq|={abs(r.q - q):.1e}")

# %%
# A warm-started alpha sweep of logistic regression against the Bayes floor.
for alpha, st in zip((0.5, 1.0, 2.0, 4.0), sweep_alpha((0.5, 1.0, 2.0, 4.0), 0.1, Logistic(), teacher)):
    print(f"alpha={alpha}: logistic {gen_error(st.m, st.q):.4f}  bayes {gen_error_bayes(solve_bayes(alpha, teacher)):.4f}")

# %%
# Optimal ridge regularization is flat in alpha.
for alpha in (1.0, 5.0, 20.0):
    print(f"lambda_opt(square, alpha={alpha:g}) = {lambda_opt(alpha, Square(), teacher).lambda_opt:.5f}")
