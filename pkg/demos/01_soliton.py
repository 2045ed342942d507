"""The one-dimensional quintic ground state has a closed form.

With N = 1 and b = 0 the stationary profile is
psi(r) = 3^{1/4} / sqrt(cosh(2r)).  We solve by shooting, compare with
the formula and read off the critical mass and the best constant.
"""
import math

import numpy as np

from critnls import ModelParams, RadialGrid, find_ground_state, minimization_report

params = ModelParams(1, 0.0)
gs = find_ground_state(params, grid=RadialGrid(15.0, 4096, 1))
exact = 3**0.25 / np.sqrt(np.cosh(2 * gs.grid.nodes))

print(f"shooting slope    alpha = {gs.alpha:.12f}  (exact {3**0.25:.12f})")
print(f"max pointwise error     = {np.max(np.abs(gs.profile.values - exact)):.2e}")
print(f"||psi||^2               = {gs.diagnostics.mass:.8f}  (exact {math.sqrt(3) * math.pi / 2:.8f})")

rep = minimization_report(params, ground=gs)
print(f"best constant           = {rep.best_constant:.8f}  (exact {4 / math.pi**2:.8f})")
print(f"critical mass ||psi||   = {rep.critical_mass:.8f}")
