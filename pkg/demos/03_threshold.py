"""The critical mass separates global solutions from blow-up.

Data c * psi with c < 1 have mass below the threshold, so the gradient
stays under an explicit bound and the solution lives forever.  Just above
the threshold, with c = 1.1, the same data concentrate in finite time.
"""
from critnls import EvolveControls, ModelParams, find_ground_state, minimization_report, propagate
from critnls.evolution import gradient_bound
from critnls.fields import ComplexField

params = ModelParams(2, 1.0)
gs = find_ground_state(params)
C = minimization_report(params, ground=gs).best_constant

for c in (0.9, 1.1):
    phi0 = ComplexField(gs.grid, c * gs.profile.values + 0j)
    tr = propagate(phi0, params, EvolveControls(t_max=3.0, output_stride=20))
    a = tr.arrays()
    line = f"c={c}: {tr.verdict.value} at t={a['times'][-1]:.3f}, max ||grad phi|| = {a['grad_norm'].max():.3f}"
    if c < 1:
        line += f" (bound {gradient_bound(phi0, params, C) ** 0.5:.3f})"
    elif tr.T_estimate is not None:
        line += f", blow-up time estimated at {tr.T_estimate:.3f}"
    print(line)
