"""
Denominators that cross zero
============================

A Pade rKAN divides two Jacobi expansions.  When the denominator is pushed
around by training it can cross zero; the layer uses ``N D / (D^2 + eps^2)``
in place of ``N / D`` so the output stays bounded.
"""

# %%
import numpy as np

from rkan.autodiff import Tensor
from rkan.layers import PadeRKanLayer
from rkan.experiments import pole_stress_run

layer = PadeRKanLayer(1, 1, 3, 2, rng=0)
layer.den_coeffs.data = np.array([[0.0, 1.0, 0.0]])   # D(x) = J_1, which has a zero

x = np.linspace(-3, 3, 13)[:, None]
D = layer.denominator(Tensor(x)).data[:, 0]
y = layer(Tensor(x)).data[:, 0]
for xi, di, yi in zip(x[:, 0], D, y):
    print(f"x={xi:+.2f}  D={di:+.3e}  out={yi:+.3e}")

# %%
# Adam from a deliberately bad start: denominator coefficients perturbed by 0.5.
losses = pole_stress_run(seed=0, epochs=200, perturbation=0.5)
print(f"{len(losses)} epochs, all finite: {bool(np.all(np.isfinite(losses)))}")
print(f"first loss {losses[0]:.3e}  last loss {losses[-1]:.3e}")
