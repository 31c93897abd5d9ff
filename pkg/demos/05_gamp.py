"""
GAMP and state evolution
========================

Bayes-optimal message passing tracks the Bayes fixed point; in ERM mode it
converges to the regularized empirical risk minimizer.
"""

from erm_asymptotics.losses import L2, Logistic
from erm_asymptotics.saddle import solve_bayes
from erm_asymptotics.simulate import fit_erm, gamp, generate, overlaps
from erm_asymptotics.teacher import GaussianPrior, Sign, TeacherModel

teacher = TeacherModel(Sign(0.0), GaussianPrior(0.0, 1.0))
ds = generate(teacher, 4000, 2000, 0)

# %%
state, traj = gamp(ds)
bayes = solve_bayes(2.0, teacher)
print(f"Bayes GAMP: {state.iter} iterations, m={traj[-1][0]:.4f} (q_b={bayes.q_b:.4f}), "
      f"mean V={state.v_vec.mean():.4f} (rho - q_b={1 - bayes.q_b:.4f})")
for t in (1, 5, 10, 20):
    print(f"  iteration {t}: m={traj[t - 1][0]:.4f} q={traj[t - 1][1]:.4f}")

# %%
state, _ = gamp(ds, Logistic(), L2(0.1))
fit = fit_erm(ds, Logistic(), L2(0.1))
print("ERM-mode GAMP overlaps", [round(v, 5) for v in overlaps(state.w_hat, ds.w_star)],
      "direct fit", (round(fit.m_emp, 5), round(fit.q_emp, 5)))
