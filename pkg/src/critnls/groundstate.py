"""Ground states of the stationary equation by radial shooting.

The profile ``u(r)`` of a radial solution of

    u'' + (N-1)/r u' = omega^2 u - r^{-b} |u|^{2 sigma} u

is fixed by its value ``alpha = u(0)``.  Too small an ``alpha`` and the
linear growth wins (the profile turns back up); too large and the profile
overshoots through zero.  The ground state sits on the boundary between
the two and is located by bisection.
"""
from __future__ import annotations

import enum
import json
import logging
import math
import warnings
from dataclasses import dataclass, asdict

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded

from .errors import DomainError, NoBracket, NoConvergence
from .fields import (
    ModelParams,
    RadialGrid,
    RealField,
    energy,
    field_to_json,
    grad_norm_sq,
    l2_scale,
    mass_sq,
    potential_I,
    weinstein_J,
)

log = logging.getLogger(__name__)

TAIL_THRESHOLD = 1e-8
START_FRACTION = 1e-4
SERIES_SMALLNESS = 1e-4
DEFAULT_M = 4096
DEFAULT_R_OMEGA = 20.0


class Shot(enum.Enum):
    CROSSES_ZERO = "crosses_zero"
    DIVERGES = "diverges"
    DECAYS = "decays"


def default_grid(params: ModelParams, M: int = DEFAULT_M) -> RadialGrid:
    return RadialGrid(DEFAULT_R_OMEGA / params.omega, M, params.N)


def series_start(params: ModelParams, alpha: float, r0, order: int = 4):
    """Expansion of the regular solution near the origin.

    ``order=2`` keeps ``alpha + A r^2 + K r^{2-b}``; ``order=4`` adds the
    ``r^{4-2b}`` and ``r^{4-b}`` corrections, which matter when ``b`` is
    large enough for ``r^{4-2b}`` to compete with ``r^2``.
    """
    N, b, s, w2 = params.N, params.b, params.sigma, params.omega**2
    q = 2 * s + 1
    A = w2 * alpha / (2 * N)
    K = -alpha**q / ((2 - b) * (N - b))
    terms = [(A, 2.0), (K, 2.0 - b)]
    if order >= 4:
        C = -q * alpha ** (q - 1) * K / ((4 - 2 * b) * (N + 2 - 2 * b))
        D = (w2 * K - q * alpha ** (q - 1) * A) / ((4 - b) * (N + 2 - b))
        terms += [(C, 4.0 - 2 * b), (D, 4.0 - b)]
    u = alpha + sum(c * r0**e for c, e in terms)
    du = sum(c * e * r0 ** (e - 1) for c, e in terms)
    return u, du


def start_radius(params: ModelParams, alpha: float, r_max: float) -> float:
    """Where the series hands over to the integrator.

    ``1e-4 r_max``, pulled in further when the nonlinear expansion
    parameter ``alpha^{2 sigma} r^{2-b} / ((2-b)(N-b))`` would exceed 1e-4.
    """
    b = params.b
    z = SERIES_SMALLNESS * (2 - b) * (params.N - b) / alpha ** (2 * params.sigma)
    return min(START_FRACTION * r_max, z ** (1 / (2 - b)))


@dataclass
class _ShotRun:
    kind: Shot
    r_end: float
    sol: object  # scipy OdeSolution or None
    r0: float


def _integrate(params: ModelParams, alpha: float, r_max: float, dense: bool = False,
               rtol: float = 1e-12, atol: float = 1e-15) -> _ShotRun:
    N, b, s, w2 = params.N, params.b, params.sigma, params.omega**2
    r0 = start_radius(params, alpha, r_max)
    u0, du0 = series_start(params, alpha, r0)
    if not (math.isfinite(u0) and math.isfinite(du0)) or du0 >= 0:
        # no initial descent: the linear term already dominates
        return _ShotRun(Shot.DIVERGES, r0, None, r0)
    if u0 <= 0:
        return _ShotRun(Shot.CROSSES_ZERO, r0, None, r0)

    p = 2 * s
    nm1 = N - 1

    def rhs(r, y):
        u, v = y
        return (v, w2 * u - r ** (-b) * abs(u) ** p * u - nm1 / r * v)

    def crosses(r, y):
        return y[0]
    crosses.terminal = True
    crosses.direction = -1

    def turns(r, y):
        return y[1]
    turns.terminal = True
    turns.direction = 1

    def overshoots(r, y):
        return y[0] - 2 * alpha
    overshoots.terminal = True
    overshoots.direction = 1

    sol = solve_ivp(rhs, (r0, r_max), (u0, du0), method="DOP853", rtol=rtol, atol=atol * alpha,
                    events=(crosses, turns, overshoots), dense_output=dense)
    if sol.status == -1 or not np.all(np.isfinite(sol.y[:, -1])):
        return _ShotRun(Shot.DIVERGES, float(sol.t[-1]), sol.sol, r0)
    if sol.status == 1:
        kind = Shot.CROSSES_ZERO if len(sol.t_events[0]) else Shot.DIVERGES
    else:
        kind = Shot.DECAYS
    return _ShotRun(kind, float(sol.t[-1]), sol.sol, r0)


def shoot(params: ModelParams, alpha: float, r_max: float | None = None) -> Shot:
    """Classify the radial solution with ``u(0) = alpha``.

    Returns ``CROSSES_ZERO`` (alpha too large), ``DIVERGES`` (alpha too
    small, the profile turns back up) or ``DECAYS`` (still positive and
    decreasing at ``r_max`` or below the tail threshold).
    """
    if not alpha > 0:
        raise DomainError("shooting amplitude must be positive")
    if r_max is None:
        r_max = DEFAULT_R_OMEGA / params.omega
    return _integrate(params, alpha, r_max).kind


@dataclass
class Diagnostics:
    mass: float
    grad_norm: float
    I: float
    J: float
    energy: float
    residual: float
    tail_mass: float
    r_match: float
    iterations: int


@dataclass
class GroundState:
    """Converged positive radial profile and its diagnostics.

    ``grad_norm`` in the diagnostics is the squared gradient norm.
    """

    profile: RealField
    params: ModelParams
    alpha: float
    diagnostics: Diagnostics

    @property
    def omega(self) -> float:
        return self.params.omega

    @property
    def grid(self) -> RadialGrid:
        return self.profile.grid

    def to_json(self) -> dict:
        d = field_to_json(self.profile, self.params)
        d["alpha"] = self.alpha
        d["diagnostics"] = asdict(self.diagnostics)
        return d


def residual(u: RealField, params: ModelParams) -> float:
    """Relative discrete L2 size of ``Lap u - omega^2 u + r^{-b}|u|^{2 sigma} u``.

    Uses the same Laplacian as the time stepper.  The last cell, which sees
    the Dirichlet wall, is left out.
    """
    v = np.asarray(u.values)
    norm = math.sqrt(mass_sq(u))
    if norm == 0:
        return 0.0
    grid = u.grid
    res = grid.laplacian(v) - params.omega**2 * v + grid.potential(params.b) * np.abs(v) ** (2 * params.sigma) * v
    w = grid.weights[:-1]
    return float(math.sqrt(np.dot(w, np.abs(res[:-1]) ** 2)) / norm)


def _bracket(params, lo, hi, r_max, expand, max_expand=60):
    klo = _integrate(params, lo, r_max).kind
    khi = _integrate(params, hi, r_max).kind
    if not expand:
        if klo == khi:
            raise NoBracket(f"alpha={lo} and alpha={hi} both {klo.value}")
        return lo, hi, klo, khi
    n = 0
    while klo == Shot.CROSSES_ZERO and n < max_expand:
        hi, khi = lo, klo
        lo /= 2
        klo = _integrate(params, lo, r_max).kind
        n += 1
    while khi == Shot.DIVERGES and n < max_expand:
        lo, klo = hi, khi
        hi *= 2
        khi = _integrate(params, hi, r_max).kind
        n += 1
    if klo == khi or klo == Shot.CROSSES_ZERO or khi == Shot.DIVERGES:
        raise NoBracket(f"could not bracket the ground state (last: {lo}:{klo.value}, {hi}:{khi.value})")
    return lo, hi, klo, khi


def count_basins(params: ModelParams, alphas, r_max: float | None = None) -> int:
    """Number of classification changes along an increasing list of amplitudes."""
    if r_max is None:
        r_max = DEFAULT_R_OMEGA / params.omega
    kinds = [_integrate(params, a, r_max).kind for a in alphas]
    return sum(1 for k0, k1 in zip(kinds, kinds[1:]) if k0 != k1 and Shot.DECAYS not in (k0, k1))


def _sample(run: _ShotRun, params: ModelParams, alpha: float, r: np.ndarray) -> np.ndarray:
    out = np.full(r.shape, np.nan)
    inner = r < run.r0
    if inner.any():
        out[inner] = series_start(params, alpha, r[inner])[0]
    mid = (~inner) & (r <= run.r_end)
    if mid.any() and run.sol is not None:
        out[mid] = run.sol(r[mid])[0]
    return out


def find_ground_state(
    params: ModelParams,
    bracket: tuple[float, float] | None = None,
    tol: float = 1e-14,
    grid: RadialGrid | None = None,
    max_iter: int = 60,
    check_basins: bool = False,
    refine: bool = True,
) -> GroundState:
    """Bisect on the shooting amplitude and return the ground state on ``grid``.

    Without an explicit ``bracket`` the search starts from (0.1, 10) and
    halves/doubles the endpoints until they classify differently.  Beyond
    the matching radius (where the two bracketing solutions separate or
    the profile falls below the tail threshold) the profile is continued by
    the decay law ``r^{-(N-1)/2} exp(-omega r)``.  With ``refine`` the
    sampled profile is then corrected by Newton's method to solve the
    discrete equation the time stepper uses.
    """
    if grid is None:
        grid = default_grid(params)
    if grid.N != params.N:
        raise DomainError("grid dimension does not match the parameters")
    r_max = grid.r_max
    if bracket is None:
        lo, hi, klo, khi = _bracket(params, 0.1, 10.0, r_max, expand=True)
    else:
        lo, hi, klo, khi = _bracket(params, *bracket, r_max, expand=False)

    found = None
    for k, a in ((klo, lo), (khi, hi)):
        if k == Shot.DECAYS:
            found = a
    if check_basins:
        n = count_basins(params, np.geomspace(lo, hi, 64), r_max)
        if n > 1:
            warnings.warn(f"{n} classification changes between {lo} and {hi}; "
                          "the ground state may not be unique on this grid", RuntimeWarning)
    it = 0
    while found is None and hi - lo > tol * hi:
        if it >= max_iter:
            raise NoConvergence(f"bisection stalled at [{lo!r}, {hi!r}] after {it} steps")
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        kind = _integrate(params, mid, r_max).kind
        it += 1
        if kind == Shot.DECAYS:
            found = mid
        elif kind == Shot.CROSSES_ZERO:
            hi = mid
        else:
            lo = mid
    if found is not None:
        lo = hi = found
    alpha = 0.5 * (lo + hi)
    profile, r_match = _assemble_profile(params, grid, lo, hi, alpha)
    if refine:
        profile = refine_discrete(profile, params)
    return _make_ground_state(profile, params, alpha, r_match, it)


def _assemble_profile(params, grid, lo, hi, alpha):
    r = grid.nodes
    run = _integrate(params, alpha, grid.r_max, dense=True)
    u = _sample(run, params, alpha, r)
    ok = np.isfinite(u) & (u > TAIL_THRESHOLD * alpha)
    if lo != hi:
        ulo = _sample(_integrate(params, lo, grid.r_max, dense=True), params, lo, r)
        uhi = _sample(_integrate(params, hi, grid.r_max, dense=True), params, hi, r)
        with np.errstate(invalid="ignore"):
            ok &= np.abs(uhi - ulo) <= 1e-4 * np.abs(u)
    # trust the profile up to the first failure, and only while it decreases
    bad = np.flatnonzero(~ok)
    m = bad[0] if bad.size else grid.M
    if m < grid.M:
        du = np.diff(u[:m])
        rising = np.flatnonzero(du > 0)
        if rising.size:
            m = min(m, rising[0] + 1)
    if m < 2:
        raise NoConvergence("shooting profile is unusable on this grid")
    out = u.copy()
    if m < grid.M:
        rm, um = r[m - 1], u[m - 1]
        rt = r[m:]
        out[m:] = um * (rm / rt) ** ((params.N - 1) / 2) * np.exp(-params.omega * (rt - rm))
        r_match = float(rm)
    else:
        r_match = float(r[-1])
    return RealField(grid, out), r_match


def refine_discrete(u: RealField, params: ModelParams, tol: float = 1e-10,
                    max_iter: int = 30) -> RealField:
    """Newton iteration for ``L u - omega^2 u + V |u|^{2 sigma} u = 0`` on the grid.

    ``V`` is the cell average of ``r^{-b}``.  Starting from the sampled
    shooting profile this converges in a few steps; the result is an exact
    standing wave of the semi-discrete flow.
    """
    g = u.grid
    off, diag, w = g.laplacian_bands
    pw = g.potential_weights(params.b)
    s2 = 2 * params.sigma
    om2 = params.omega**2
    v = np.array(u.values, dtype=float)
    ab = np.zeros((3, g.M))
    ab[0, 1:] = -off
    ab[2, :-1] = -off
    for _ in range(max_iter):
        a = np.abs(v) ** s2
        Av = diag * v
        Av[:-1] += off * v[1:]
        Av[1:] += off * v[:-1]
        G = -Av - om2 * w * v + pw * a * v
        ab[1] = -diag - om2 * w + (s2 + 1) * pw * a
        dv = solve_banded((1, 1), ab, -G)
        v += dv
        if np.max(np.abs(dv)) <= tol * np.max(np.abs(v)):
            break
    else:
        raise NoConvergence("Newton refinement of the ground state did not settle")
    return RealField(g, v)


def _make_ground_state(profile: RealField, params: ModelParams, alpha: float, r_match: float,
                       iterations: int = 0) -> GroundState:
    v = profile.values
    # exact zeros are allowed: resampling sets the profile to zero beyond r_max
    if not v[0] > 0 or np.any(v < 0):
        raise NoConvergence("profile has a node; not a ground state")
    if np.any(np.diff(v) > 1e-10 * alpha):
        raise NoConvergence("profile is not radially non-increasing")
    from .fields import tail_mass_fraction

    diag = Diagnostics(
        mass=mass_sq(profile),
        grad_norm=grad_norm_sq(profile),
        I=potential_I(profile, params),
        J=weinstein_J(profile, params),
        energy=energy(profile, params),
        residual=residual(profile, params),
        tail_mass=tail_mass_fraction(profile),
        r_match=r_match,
        iterations=iterations,
    )
    return GroundState(profile, params, float(alpha), diag)


def branch(u1: GroundState, omega: float, grid: RadialGrid | None = None) -> GroundState:
    """Move a solution at frequency 1 to frequency ``omega``.

    ``u_omega(r) = omega^{(2-b)/(2 sigma)} u_1(omega r)``.  By default the
    result lives on the grid shrunk by ``1/omega``, where the samples map
    onto each other exactly; pass ``grid`` to resample instead.
    """
    if not omega > 0:
        raise DomainError("omega must be positive")
    p = u1.params
    if not math.isclose(p.omega, 1.0):
        raise DomainError("branch expects a solution of the omega = 1 equation")
    params = p.with_omega(omega)
    expo = (2 - p.b) / (2 * p.sigma)
    amp = omega**expo
    if grid is None:
        new_grid = u1.grid.scaled(1.0 / omega)
        values = amp * u1.profile.values
        profile = RealField(new_grid, values)
    else:
        # l2_scale carries omega^{N/2}; fix the prefactor for non-critical sigma
        scaled = l2_scale(u1.profile, omega) if grid == u1.grid else None
        if scaled is None:
            from .fields import profile_interpolator
            values = amp * profile_interpolator(u1.profile)(omega * grid.nodes)
        else:
            values = scaled.values * amp / omega ** (p.N / 2)
        profile = RealField(grid, values)
    d = u1.diagnostics
    gs = _make_ground_state(profile, params, amp * u1.alpha, d.r_match / omega, 0)
    return gs


@dataclass
class MinimizationReport:
    N: int
    b: float
    sigma: float
    critical_mass: float
    best_constant: float
    j_at_psi: float
    m: float
    j_numeric: float

    def to_json(self) -> dict:
        return asdict(self)


def minimization_report(params: ModelParams, grid: RadialGrid | None = None,
                        ground: GroundState | None = None) -> MinimizationReport:
    """Critical mass and best interpolation constant from the ``omega = 1`` ground state.

    The minimiser of the Weinstein functional solves the equation at
    ``omega = sqrt(sigma)``; that equation is an L2 rescaling of the
    ``omega = 1`` one, so the mass (and hence the constant) can be read off
    the ``omega = 1`` ground state.
    """
    if not params.is_critical:
        raise DomainError("the minimization report needs the critical power")
    p1 = params.with_omega(1.0)
    if ground is None:
        ground = find_ground_state(p1, grid=grid)
    s = p1.sigma
    mass = ground.diagnostics.mass
    j_psi = mass**s / (s + 1)
    return MinimizationReport(
        N=p1.N,
        b=p1.b,
        sigma=s,
        critical_mass=math.sqrt(mass),
        best_constant=(s + 1) / mass**s,
        j_at_psi=j_psi,
        m=j_psi,
        j_numeric=ground.diagnostics.J,
    )


def normalized_minimizer(ground: GroundState) -> RealField:
    """The minimiser scaled to unit L2 norm and unit gradient norm.

    Obtained by moving ``psi`` to ``omega = sqrt(sigma)`` along the branch and
    dividing by ``[m (sigma + 1)]^{1/(2 sigma)}``.
    """
    s = ground.params.sigma
    g = branch(ground, math.sqrt(s))
    m = ground.diagnostics.mass**s / (s + 1)
    return RealField(g.grid, g.profile.values * (m * (s + 1)) ** (-1 / (2 * s)))


def pohozaev_check(g: GroundState | RealField, params: ModelParams) -> tuple[float, float]:
    """Relative defects in ``E(u) = 0`` and ``||grad u||^2 = omega^2 ||u||^2 / sigma``."""
    u = g.profile if isinstance(g, GroundState) else g
    P = grad_norm_sq(u)
    Q = params.omega**2 * mass_sq(u)
    e_defect = abs(energy(u, params)) / P
    ratio_defect = abs(P - Q / params.sigma) / P
    return e_defect, ratio_defect


def random_trial_field(grid: RadialGrid, rng: np.random.Generator, n_bumps: int | None = None) -> RealField:
    """Sum of a few Gaussians in ``r`` with random centres, widths and amplitudes."""
    r = grid.nodes
    scale = grid.r_max
    if n_bumps is None:
        n_bumps = int(rng.integers(1, 5))
    v = np.zeros(grid.M)
    while True:
        for _ in range(n_bumps):
            c = rng.uniform(0.0, 0.4 * scale)
            w = rng.uniform(0.02, 0.15) * scale
            a = rng.uniform(0.1, 3.0) * rng.choice([1.0, 1.0, -1.0])
            v += a * np.exp(-(((r - c) / w) ** 2))
        if np.max(np.abs(v)) > 1e-3:
            return RealField(grid, v)


def verify_interpolation(params: ModelParams, trial_count: int = 1000,
                         report: MinimizationReport | None = None,
                         grid: RadialGrid | None = None, seed: int = 0,
                         rel_slack: float = 1e-9) -> int:
    """Count random fields violating ``I(u) <= C ||grad u||^2 ||u||^{2 sigma}``."""
    if grid is None:
        grid = default_grid(params.with_omega(1.0))
    if report is None:
        report = minimization_report(params, grid)
    C = report.best_constant
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trial_count):
        u = random_trial_field(grid, rng)
        lhs = potential_I(u, params)
        rhs = C * grad_norm_sq(u) * mass_sq(u) ** params.sigma
        if lhs > rhs * (1 + rel_slack):
            bad += 1
            log.warning("interpolation inequality violated: I=%r bound=%r", lhs, rhs)
    return bad


def dumps_report(report: MinimizationReport) -> str:
    return json.dumps(report.to_json())
