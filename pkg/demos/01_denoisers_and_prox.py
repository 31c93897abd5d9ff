"""
Teacher denoisers and proximal maps
===================================

The building blocks of every fixed-point system: the Bayes denoiser of the
teacher channel and the proximal map of a convex loss.
"""

import numpy as np

from erm_asymptotics.losses import Hinge, Logistic, Square, f_out_erm, prox_loss
from erm_asymptotics.teacher import GaussianPrior, RectangleDoor, Sign, TeacherModel, f_out_star, log_z_out_star

# %%
# A noiseless sign teacher with standard Gaussian weights.
teacher = TeacherModel(Sign(0.0), GaussianPrior(0.0, 1.0))
omega = np.linspace(-2, 2, 5)
print("f_out* (y=+1, V=0.5):", np.round(f_out_star(teacher.channel, 1.0, omega, 0.5), 6))

# %%
# The denoiser is the omega-derivative of log Z_out; a central difference agrees.
h = 1e-6
fd = (log_z_out_star(teacher.channel, 1.0, omega + h, 0.5) - log_z_out_star(teacher.channel, 1.0, omega - h, 0.5)) / (2 * h)
print("max |f_out* - FD| =", np.abs(fd - f_out_star(teacher.channel, 1.0, omega, 0.5)).max())

# %%
# Proximal points of the three built-in losses at scale v = 1.
for loss in (Square(), Hinge(), Logistic()):
    res = prox_loss(loss, 1.0, 1.0, omega)
    print(f"{loss.name:>8}: prox {np.round(res.point, 4)}  f_out {np.round(f_out_erm(loss, 1.0, omega, 1.0)[0], 4)}")

# %%
# The rectangle door labels +1 inside [-kappa, kappa]; kappa = 0.6745 balances the labels.
door = RectangleDoor(-0.6745, 0.6745, 0.0)
print("door f_out* (y=+1):", np.round(f_out_star(door, 1.0, omega, 1.0), 4))
