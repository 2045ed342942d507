"""Ground states with a singular weight and their invariants.

For each dimension we solve the stationary equation, check the two
Pohozaev identities, and confirm that the mass does not depend on the
frequency.  The rescaled omega = 1 profile is resampled onto the same
grid, so the masses printed below differ only by interpolation error.
"""
from critnls import ModelParams, branch, find_ground_state, minimization_report, pohozaev_check
from critnls.fields import mass_sq

for N, b in [(1, 0.5), (2, 1.0), (3, 1.0)]:
    params = ModelParams(N, b)
    gs = find_ground_state(params)
    e_def, r_def = pohozaev_check(gs.profile, params)
    rep = minimization_report(params, ground=gs)
    masses = [mass_sq(branch(gs, w, grid=gs.grid).profile) for w in (0.5, 2.0)]
    print(f"N={N} b={b}: alpha={gs.alpha:.6f} mass={gs.diagnostics.mass:.6f} "
          f"energy={gs.diagnostics.energy:.1e} Pohozaev defects {e_def:.1e}/{r_def:.1e}")
    print(f"    best constant {rep.best_constant:.6f}, branch masses at omega=0.5, 2: "
          f"{masses[0]:.6f}, {masses[1]:.6f}")
