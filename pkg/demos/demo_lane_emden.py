"""
Lane-Emden index 0 as a physics-informed fit
============================================

The exact solution for index 0 is ``1 - x^2 / 6`` with first root sqrt(6).
We check the residual loss on it, then train a small network and locate
its first zero.
"""

# %%
# The loss multiplies the residual by x, which removes the 2/x singularity.
import math

from rkan.experiments import (NetworkConfig, OdeTask, OptimizerConfig,
                              lane_emden_residual, solve_lane_emden)

task = OdeTask(0)
exact = lambda X: 1.0 - X * X * (1.0 / 6.0)
print("loss at the exact solution:", lane_emden_residual(exact, 0, task.collocation()).item())

# %%
# A third of the acceptance budget: the root lands within about 1e-2.
# The full 1000-step run gets under 1e-3.
report = solve_lane_emden(0, NetworkConfig(degree=6, architecture=(1, 10, 10, 1)),
                          OptimizerConfig(epochs=300, history=50), seed=0)
print(f"status={report.status}  final loss {report.train_mse:.2e}")
print(f"root {report.root:.6f}  vs sqrt(6) {math.sqrt(6):.6f}  err {report.root_err:.1e}")
