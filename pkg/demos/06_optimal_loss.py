"""
A loss that reaches the Bayes-optimal error
===========================================

Inverting the Moreau envelope of the Bayes denoisers gives a loss and a
regularizer whose ERM estimator is Bayes optimal.
"""

import numpy as np

from erm_asymptotics.analytic import gen_error_bayes
from erm_asymptotics.losses import L2, Logistic
from erm_asymptotics.optimal import loss_curve, optimal_objective, verify_denoiser_match
from erm_asymptotics.simulate import fit_erm, fit_optimal, generate
from erm_asymptotics.teacher import GaussianPrior, Sign, TeacherModel

teacher = TeacherModel(Sign(0.0), GaussianPrior(0.0, 1.0))
obj = optimal_objective(2.0, teacher)

# %%
# The loss is infinite for wrong-sign margins and decreasing on the right side.
print(loss_curve(obj, np.linspace(-1, 3, 9)).round(4))
print("denoiser match:", verify_denoiser_match(obj))

# %%
ds = generate(teacher, 2000, 1000, 1)
print(f"optimal ERM {fit_optimal(ds, obj).e_g_emp:.4f}  logistic {fit_erm(ds, Logistic(), L2(0.1)).e_g_emp:.4f}  "
      f"Bayes {gen_error_bayes(obj.bayes):.4f}")
