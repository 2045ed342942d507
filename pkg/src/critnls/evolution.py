"""Radial time stepping for the critical equation.

Strang splitting: an exact half step of the nonlinear phase rotation, a
Crank-Nicolson step of the free Schroedinger flow, another nonlinear half
step.  Both substeps are unitary in the grid's weighted inner product, so
the mass is conserved to round-off.  The step size follows the fastest
local nonlinear rotation rate, which shrinks the step as the solution
focuses.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np

from .errors import DomainError, InsufficientData, StepFailure
from .fields import (
    ComplexField,
    Field,
    ModelParams,
    RadialGrid,
    energy,
    field_to_json,
    grad_norm_sq,
    mass_sq,
    sup_norm,
    tail_mass_fraction,
)

log = logging.getLogger(__name__)


class Verdict(enum.Enum):
    GLOBAL = "Global-to-t_max"
    BLOWUP = "BlowupDetected"
    STEP_COLLAPSE = "StepCollapse"


@dataclass(frozen=True)
class EvolveControls:
    """Step-size and termination settings.

    ``resolution_cells`` is the fewest cells per solution width
    (``||phi|| / ||grad phi||``) the fixed grid is trusted with; dropping
    below it counts as blow-up, since the grid cannot follow the collapse
    any further.  ``abort_on_tail`` turns the outer-boundary mass monitor
    from a warning into a hard stop.
    """

    dt0: float = 1e-3
    dt_min: float = 1e-10
    c_dt: float = 0.1
    t_max: float = 1.0
    blowup_factor: float = 1e3
    output_stride: int = 1
    snapshot_stride: int = 0
    resolution_cells: float = 64.0
    tail_fraction: float = 0.1
    tail_tol: float = 1e-6
    abort_on_tail: bool = False

    def __post_init__(self):
        if not (0 < self.dt_min < self.dt0):
            raise DomainError("need 0 < dt_min < dt0")
        if not self.t_max > 0:
            raise DomainError("t_max must be positive")
        if not self.blowup_factor > 1:
            raise DomainError("blowup_factor must exceed 1")
        if not self.c_dt > 0:
            raise DomainError("c_dt must be positive")
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise DomainError("output_stride must be a positive integer")


@numba.njit(cache=True, fastmath=True)
def _rates(v, V, power):
    out = np.empty(v.size)
    half = 0.5 * power
    for i in range(v.size):
        a2 = v[i].real ** 2 + v[i].imag ** 2
        out[i] = V[i] * math.exp(half * math.log(a2)) if a2 > 0.0 else 0.0
    return out


@numba.njit(cache=True, fastmath=True)
def _rotate(v, rate, dt):
    """Exact nonlinear flow: ``|v|`` is invariant, so the phase turns at a fixed rate."""
    out = np.empty_like(v)
    for i in range(v.size):
        th = dt * rate[i]
        c = math.cos(th)
        s = math.sin(th)
        out[i] = complex(v[i].real * c - v[i].imag * s, v[i].real * s + v[i].imag * c)
    return out


@numba.njit(cache=True, fastmath=True)
def _crank_nicolson(v, off, diag, w, s):
    """Solve ``(W + i s A) x = (W - i s A) v`` for symmetric tridiagonal ``A``.

    Thomas elimination; ``s = dt/2``.  Complex arithmetic is spelled out
    in real parts to keep the inner loop cheap.
    """
    n = v.size
    xr = np.empty(n)
    xi = np.empty(n)
    cr = np.empty(n)
    ci = np.empty(n)
    for i in range(n):
        ar = diag[i] * v[i].real
        ai = diag[i] * v[i].imag
        if i > 0:
            ar += off[i - 1] * v[i - 1].real
            ai += off[i - 1] * v[i - 1].imag
        if i < n - 1:
            ar += off[i] * v[i + 1].real
            ai += off[i] * v[i + 1].imag
        # w v - i s A v
        xr[i] = w[i] * v[i].real + s * ai
        xi[i] = w[i] * v[i].imag - s * ar
    pr = 0.0
    pi = 0.0
    for i in range(n):
        # beta = w + i s diag - (i s off[i-1]) * c[i-1]
        br = w[i]
        bi = s * diag[i]
        if i > 0:
            lo = s * off[i - 1]
            # (i lo) * (cr + i ci) = -lo ci + i lo cr
            br += lo * ci[i - 1]
            bi -= lo * cr[i - 1]
            # rhs -= (i lo) * x[i-1]
            xr[i] += lo * pi
            xi[i] -= lo * pr
        d = 1.0 / (br * br + bi * bi)
        ir = br * d
        ii = -bi * d
        if i < n - 1:
            up = s * off[i]
            # c = (i up) / beta
            cr[i] = -up * ii
            ci[i] = up * ir
        tr = xr[i] * ir - xi[i] * ii
        ti = xr[i] * ii + xi[i] * ir
        xr[i] = tr
        xi[i] = ti
        pr = tr
        pi = ti
    for i in range(n - 2, -1, -1):
        xr[i] -= cr[i] * xr[i + 1] - ci[i] * xi[i + 1]
        xi[i] -= cr[i] * xi[i + 1] + ci[i] * xr[i + 1]
    out = np.empty(n, dtype=np.complex128)
    for i in range(n):
        out[i] = complex(xr[i], xi[i])
    return out


@numba.njit(cache=True, fastmath=True)
def _advance(v, rate, lag, dt, V, power, off, diag, w):
    """Finish the previous half rotation, take a half rotation and a CN step.

    The closing half rotation of this step is left pending (``dt/2``): it
    merges with the opening one of the next step because the rotation
    rate only depends on ``|v|``.
    """
    u = _rotate(v, rate, lag + 0.5 * dt)
    x = _crank_nicolson(u, off, diag, w, 0.5 * dt)
    new_rate = _rates(x, V, power)
    return x, new_rate


class _Stepper:
    """Cached operators for one (grid, params) pair."""

    def __init__(self, grid: RadialGrid, params: ModelParams):
        if grid.N != params.N:
            raise DomainError("grid dimension does not match the parameters")
        self.grid = grid
        self.params = params
        off, diag, w = grid.laplacian_bands
        self.off = off
        self.diag = diag
        self.w = w
        self.V = grid.potential(params.b)
        self.power = 2 * params.sigma

    def rate(self, v: np.ndarray) -> np.ndarray:
        return _rates(v, self.V, self.power)

    def linear(self, v: np.ndarray, dt: float) -> np.ndarray:
        # (I - i dt/2 L) = W^{-1} (W + i dt/2 A)
        return _crank_nicolson(v, self.off, self.diag, self.w, 0.5 * dt)

    def nonlinear(self, v: np.ndarray, dt: float) -> np.ndarray:
        return _rotate(v, self.rate(v), dt)

    def advance(self, v, rate, lag, dt):
        v, rate = _advance(v, rate, lag, dt, self.V, self.power, self.off, self.diag, self.w)
        if not np.all(np.isfinite(v)):
            raise StepFailure("non-finite values after a time step")
        return v, rate

    def step(self, v: np.ndarray, dt: float) -> np.ndarray:
        v, rate = self.advance(v, self.rate(v), 0.0, dt)
        return _rotate(v, rate, 0.5 * dt)


@lru_cache(maxsize=16)
def _stepper(grid: RadialGrid, params: ModelParams) -> _Stepper:
    return _Stepper(grid, params)


def step(phi: Field, dt: float, params: ModelParams) -> ComplexField:
    """One Strang step of length ``dt``."""
    if not dt > 0:
        raise DomainError("dt must be positive")
    st = _stepper(phi.grid, params)
    return ComplexField(phi.grid, st.step(np.asarray(phi.values, dtype=complex), dt))


@dataclass
class Trajectory:
    """Recorded observables of one run.

    ``grad_norm`` is the (unsquared) gradient norm; ``dt`` is the step that
    led to each record (0 for the initial one).
    """

    grid: RadialGrid
    params: ModelParams
    times: list = field(default_factory=list)
    mass_sq: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    sup_norm: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)   # (t, ComplexField)
    verdict: Verdict | None = None
    T_estimate: float | None = None
    fit_quality: float | None = None
    steps: int = 0
    tail_warning: bool = False
    final: ComplexField | None = None

    def record(self, t: float, phi: ComplexField, dt: float):
        self.times.append(t)
        self.mass_sq.append(mass_sq(phi))
        self.energy.append(energy(phi, self.params))
        self.grad_norm.append(math.sqrt(grad_norm_sq(phi)))
        self.sup_norm.append(sup_norm(phi))
        self.dt.append(dt)

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: np.asarray(getattr(self, k)) for k in
                ("times", "mass_sq", "energy", "grad_norm", "sup_norm", "dt")}

    def snapshot_at(self, t: float) -> ComplexField:
        for ts, f in self.snapshots:
            if math.isclose(ts, t, rel_tol=1e-12, abs_tol=1e-12):
                return f
        raise KeyError(f"no snapshot at t={t}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "mass_sq", "energy", "grad_norm", "sup_norm", "dt"])
        for row in zip(self.times, self.mass_sq, self.energy, self.grad_norm, self.sup_norm, self.dt):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "verdict": self.verdict.value if self.verdict else None,
            "T_estimate": self.T_estimate,
            "fit_quality": self.fit_quality,
            "max_grad_norm": float(max(self.grad_norm)) if self.grad_norm else None,
            "t_end": self.times[-1] if self.times else None,
            "steps": self.steps,
            "tail_warning": self.tail_warning,
        }

    def snapshots_json(self) -> list[dict]:
        return [dict(field_to_json(f, self.params), t=t) for t, f in self.snapshots]


def detect_blowup(traj: Trajectory, controls: EvolveControls) -> Verdict | None:
    """Verdict for a running trajectory, or None while nothing has happened.

    Blow-up is declared when the gradient norm has grown by
    ``blowup_factor``, or when the solution has shrunk below
    ``resolution_cells`` grid cells after at least doubling its gradient
    (on a fixed grid this is where the H1 growth stops being
    representable).  A step below ``dt_min`` is a step collapse.
    """
    if not traj.times:
        return None
    if traj.dt[-1] and traj.dt[-1] < controls.dt_min:
        return Verdict.STEP_COLLAPSE
    g0, g = traj.grad_norm[0], traj.grad_norm[-1]
    if g0 > 0 and g > controls.blowup_factor * g0:
        return Verdict.BLOWUP
    m = traj.mass_sq[-1]
    if g0 > 0 and m > 0 and g > 2 * g0:
        width = math.sqrt(m) / g
        if width < controls.resolution_cells * traj.grid.dr:
            return Verdict.BLOWUP
    return None


def estimate_blowup_time(times, grad_norms, min_samples: int = 10) -> tuple[float, float]:
    """Fit ``1/||grad phi||`` linearly in ``t`` over the last decade of growth.

    Returns ``(T_estimate, R^2)`` where ``T_estimate`` is the zero of the
    fitted line.
    """
    t = np.asarray(times, dtype=float)
    g = np.asarray(grad_norms, dtype=float)
    if t.size < min_samples:
        raise InsufficientData(f"need at least {min_samples} samples, got {t.size}")
    gmax = g[-1]
    if not gmax > 0:
        raise InsufficientData("gradient norm vanishes")
    # last contiguous stretch above gmax/10
    below = np.flatnonzero(g < gmax / 10)
    start = below[-1] + 1 if below.size else 0
    t, y = t[start:], 1.0 / g[start:]
    if t.size < min_samples:
        raise InsufficientData(f"only {t.size} samples in the last decade of growth")
    slope, icpt = np.polyfit(t, y, 1)
    if not slope < 0:
        raise InsufficientData("reciprocal gradient norm is not decreasing")
    fit = slope * t + icpt
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return float(-icpt / slope), r2


def propagate(phi0: Field, params: ModelParams, controls: EvolveControls,
              snapshot_times=()) -> Trajectory:
    """Evolve ``phi0`` until ``t_max``, blow-up, or step collapse.

    Steps are shortened to land exactly on each of ``snapshot_times``,
    where the field is stored.
    """
    if not params.is_critical:
        raise DomainError("propagation is set up for the critical power only")
    grid = phi0.grid
    st = _stepper(grid, params)
    v = np.asarray(phi0.values, dtype=complex)
    rates = st.rate(v)
    lag = 0.0
    traj = Trajectory(grid, params)
    t = 0.0
    traj.record(t, ComplexField(grid, v), 0.0)
    pending = sorted(float(s) for s in snapshot_times if 0 <= s <= controls.t_max)
    while pending and pending[0] == 0.0:
        traj.snapshots.append((0.0, ComplexField(grid, v)))
        pending.pop(0)
    n = 0
    verdict = None
    while verdict is None:
        rate = float(rates.max())
        dt = controls.dt0 if rate == 0 else min(controls.dt0, controls.c_dt / rate)
        if dt < controls.dt_min:
            traj.dt.append(dt)
            traj.times.append(t)
            for k in ("mass_sq", "energy", "grad_norm", "sup_norm"):
                getattr(traj, k).append(getattr(traj, k)[-1])
            verdict = Verdict.STEP_COLLAPSE
            break
        stop = controls.t_max
        if pending:
            stop = min(stop, pending[0])
        landing = t + dt >= stop - 1e-12 * max(1.0, stop)
        if landing:
            dt = stop - t
        try:
            v, rates = st.advance(v, rates, lag, dt)
        except StepFailure:
            verdict = Verdict.STEP_COLLAPSE
            break
        lag = 0.5 * dt
        n += 1
        t = stop if landing else t + dt
        snap = bool(pending) and landing and t == pending[0]
        last = landing and t >= controls.t_max
        if n % controls.output_stride == 0 or snap or last:
            v = _rotate(v, rates, lag)
            lag = 0.0
            phi = ComplexField(grid, v)
            traj.record(t, phi, dt)
            if snap:
                traj.snapshots.append((t, phi))
                pending.pop(0)
            elif controls.snapshot_stride and (len(traj.times) - 1) % controls.snapshot_stride == 0:
                traj.snapshots.append((t, phi))
            if not traj.tail_warning and tail_mass_fraction(phi, controls.tail_fraction) > controls.tail_tol:
                traj.tail_warning = True
                log.warning("more than %g of the mass reached the outer %d%% of the grid at t=%g",
                            controls.tail_tol, round(100 * controls.tail_fraction), t)
                if controls.abort_on_tail:
                    break
            verdict = detect_blowup(traj, controls)
        if verdict is None and last:
            verdict = Verdict.GLOBAL
    if lag and np.all(np.isfinite(v)):
        v = _rotate(v, rates, lag)
    traj.steps = n
    traj.verdict = verdict
    traj.final = ComplexField(grid, v) if np.all(np.isfinite(v)) else None
    if verdict in (Verdict.BLOWUP, Verdict.STEP_COLLAPSE):
        try:
            traj.T_estimate, traj.fit_quality = estimate_blowup_time(traj.times, traj.grad_norm)
        except InsufficientData as exc:
            log.info("no blow-up time estimate: %s", exc)
    return traj


def gradient_bound(phi0: Field, params: ModelParams, best_constant: float) -> float:
    """A-priori bound on ``||grad phi(t)||^2`` for data below the critical mass.

    Returns ``inf`` when the prefactor ``1 - C ||phi0||^{2 sigma}/(sigma+1)``
    is not positive.
    """
    if not params.is_critical:
        raise DomainError("the bound needs the critical power")
    m = mass_sq(phi0)
    beta = 1.0 - best_constant * m**params.sigma / (params.sigma + 1)
    if beta <= 0:
        return math.inf
    return energy(phi0, params) / beta


def verdict_json(traj: Trajectory) -> str:
    return json.dumps(traj.summary())
