"""
A non-linearly separable teacher
================================

With the rectangle door the Bayes estimator leaves the symmetric point m = 0
past a threshold, while L2 logistic regression stays at chance level.
"""

from erm_asymptotics.analytic import gen_error, gen_error_bayes
from erm_asymptotics.losses import Logistic
from erm_asymptotics.saddle import bayes_departure_alpha, solve_bayes, solve_erm_replica
from erm_asymptotics.teacher import GaussianPrior, RectangleDoor, TeacherModel

door = TeacherModel(RectangleDoor(-0.6745, 0.6745, 0.0), GaussianPrior(0.0, 1.0))
a_it = bayes_departure_alpha(door)
print(f"symmetric point unstable above alpha = {a_it:.4f}")

# %%
for alpha in (1.0, 2.0, 3.0):
    st = solve_erm_replica(alpha, 0.1, Logistic(), door)
    print(f"alpha={alpha}: Bayes e_g {gen_error_bayes(solve_bayes(alpha, door)):.4f}  "
          f"logistic e_g {gen_error(st.m, st.q):.4f}")
