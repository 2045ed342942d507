import csv
import io
import json
import math

import numpy as np
import pytest

from critnls.errors import DomainError, InsufficientData, StepFailure
from critnls.evolution import (
    EvolveControls,
    Trajectory,
    Verdict,
    detect_blowup,
    estimate_blowup_time,
    gradient_bound,
    propagate,
    step,
    verdict_json,
)
from critnls.fields import ComplexField, ModelParams, RadialGrid, energy, grad_norm_sq, mass_sq
from critnls.groundstate import find_ground_state, minimization_report


def gaussian(grid, amp=1.0, width=1.0):
    return ComplexField(grid, amp * np.exp(-(grid.nodes / width) ** 2) + 0j)


@pytest.fixture(scope="module")
def quintic_default():
    return find_ground_state(ModelParams(1, 0.0))


# --- single steps ------------------------------------------------------------

def test_zero_stays_zero():
    g = RadialGrid(10.0, 256, 2)
    out = step(ComplexField(g, np.zeros(256, complex)), 1e-3, ModelParams(2, 1.0))
    assert np.array_equal(out.values, np.zeros(256))


@pytest.mark.parametrize("N,b", [(1, 0.5), (2, 1.0), (3, 1.0)])
def test_step_conserves_mass(N, b):
    g = RadialGrid(10.0, 1024, N)
    phi = gaussian(g, amp=1.5)
    out = step(phi, 1e-3, ModelParams(N, b))
    assert mass_sq(out) == pytest.approx(mass_sq(phi), rel=1e-12)


def test_step_rejects_bad_dt():
    g = RadialGrid(10.0, 64, 1)
    with pytest.raises(DomainError):
        step(gaussian(g), 0.0, ModelParams(1, 0.5))


def test_step_failure_on_overflow():
    g = RadialGrid(10.0, 64, 1)
    with pytest.raises(StepFailure):
        step(gaussian(g, amp=1e200), 1e-3, ModelParams(1, 0.5))


def test_strang_second_order():
    """Halving dt cuts the error at a fixed time by about four."""
    p = ModelParams(1, 0.0)
    g = RadialGrid(15.0, 1024, 1)
    phi0 = gaussian(g, amp=0.8)

    def run(dt, T=0.2):
        v = phi0
        for _ in range(round(T / dt)):
            v = step(v, dt, p)
        return v.values

    ref = run(1e-4)
    e1 = np.linalg.norm(run(4e-3) - ref)
    e2 = np.linalg.norm(run(2e-3) - ref)
    assert 3.3 < e1 / e2 < 4.7


# --- propagation -------------------------------------------------------------

def test_zero_data_is_global():
    g = RadialGrid(10.0, 128, 1)
    tr = propagate(ComplexField(g, np.zeros(128, complex)), ModelParams(1, 0.5), EvolveControls(t_max=0.05))
    assert tr.verdict == Verdict.GLOBAL
    a = tr.arrays()
    assert np.all(a["mass_sq"] == 0) and np.all(a["grad_norm"] == 0) and np.all(a["energy"] == 0)


def test_standing_wave_phase(quintic_default):
    gs = quintic_default
    psi = gs.profile.values
    tr = propagate(ComplexField(gs.grid, psi + 0j), gs.params,
                   EvolveControls(t_max=1.0, dt0=1e-3, output_stride=50), snapshot_times=[1.0])
    f = tr.snapshot_at(1.0).values
    err = np.sqrt(np.dot(gs.grid.weights, np.abs(f - np.exp(1j) * psi) ** 2) / gs.diagnostics.mass)
    assert err <= 1e-4


def test_times_and_snapshots():
    g = RadialGrid(10.0, 512, 2)
    p = ModelParams(2, 1.0)
    tr = propagate(gaussian(g, 0.5), p, EvolveControls(t_max=0.1, dt0=7e-3, output_stride=3),
                   snapshot_times=[0.0, 0.05, 0.1])
    t = np.asarray(tr.times)
    assert np.all(np.diff(t) > 0)
    assert [s for s, _ in tr.snapshots] == [0.0, 0.05, 0.1]
    assert tr.times[-1] == 0.1
    with pytest.raises(KeyError):
        tr.snapshot_at(0.07)


def test_subcritical_run_is_global_and_bounded(quintic_default):
    gs = quintic_default
    p = gs.params
    phi0 = ComplexField(gs.grid, 0.9 * gs.profile.values + 0j)
    bound = gradient_bound(phi0, p, minimization_report(p, ground=gs).best_constant)
    tr = propagate(phi0, p, EvolveControls(t_max=2.0, output_stride=10))
    a = tr.arrays()
    assert tr.verdict == Verdict.GLOBAL
    assert np.max(np.abs(a["mass_sq"] / a["mass_sq"][0] - 1)) <= 1e-8
    assert np.max(np.abs(a["energy"] / a["energy"][0] - 1)) <= 1e-5
    assert np.all(a["grad_norm"] ** 2 <= 1.001 * bound)


def test_scaling_covariance():
    """Evolving the L2 rescaled data equals rescaling the evolution."""
    N, b, lam, t = 1, 0.5, 2.0, 0.05
    p = ModelParams(N, b)
    g = RadialGrid(20.0, 2048, N)
    phi0 = gaussian(g, 0.7)
    gl = g.scaled(1 / lam)
    psi0 = ComplexField(gl, lam ** (N / 2) * phi0.values)     # exact samples of lam^{N/2} phi0(lam r)
    ctl = dict(dt0=1e-4, output_stride=100)
    a = propagate(phi0, p, EvolveControls(t_max=lam**2 * t, **ctl), snapshot_times=[lam**2 * t])
    b_ = propagate(psi0, p, EvolveControls(t_max=t, **ctl), snapshot_times=[t])
    u = lam ** (N / 2) * a.snapshot_at(lam**2 * t).values
    v = b_.snapshot_at(t).values
    assert np.linalg.norm(u - v) / np.linalg.norm(v) <= 1e-3


def test_tail_monitor():
    g = RadialGrid(10.0, 512, 1)
    p = ModelParams(1, 0.5)
    edge = ComplexField(g, np.exp(-((g.nodes - 9.5) / 0.3) ** 2) + 0j)
    tr = propagate(edge, p, EvolveControls(t_max=0.01))
    assert tr.tail_warning and tr.verdict == Verdict.GLOBAL
    stopped = propagate(edge, p, EvolveControls(t_max=0.01, abort_on_tail=True))
    assert stopped.verdict is None and len(stopped.times) == 2


def test_requires_critical_power():
    g = RadialGrid(10.0, 64, 2)
    with pytest.raises(DomainError):
        propagate(gaussian(g), ModelParams(2, 1.0, sigma=0.4, critical_mode=False), EvolveControls())


def test_output_formats():
    g = RadialGrid(10.0, 256, 1)
    tr = propagate(gaussian(g, 0.5), ModelParams(1, 0.5), EvolveControls(t_max=0.01, output_stride=2))
    rows = list(csv.reader(io.StringIO(tr.to_csv())))
    assert rows[0] == ["t", "mass_sq", "energy", "grad_norm", "sup_norm", "dt"]
    assert len(rows) == len(tr.times) + 1
    assert float(rows[-1][0]) == tr.times[-1]
    s = json.loads(verdict_json(tr))
    assert {"verdict", "T_estimate", "fit_quality", "max_grad_norm"} <= set(s)
    assert s["verdict"] == "Global-to-t_max"


# --- gradient bound ------------------------------------------------------------

def test_gradient_bound_cases(quintic_default):
    gs = quintic_default
    p = gs.params
    C = minimization_report(p, ground=gs).best_constant
    psi = ComplexField(gs.grid, gs.profile.values + 0j)
    assert gradient_bound(psi, p, C) == math.inf
    assert gradient_bound(psi * 0.0, p, C) == 0.0
    sub = psi * 0.9
    bd = gradient_bound(sub, p, C)
    assert 0 < bd < math.inf
    # for a multiple of psi the bound is attained at t = 0
    assert bd == pytest.approx(grad_norm_sq(sub), rel=1e-4)


# --- blow-up detection ---------------------------------------------------------

def _traj(grad, dt=None, mass=1.0):
    g = RadialGrid(10.0, 1024, 1)
    tr = Trajectory(g, ModelParams(1, 0.5))
    n = len(grad)
    tr.times = list(np.linspace(0, 1, n))
    tr.grad_norm = list(grad)
    tr.mass_sq = [mass] * n
    tr.dt = list(dt if dt is not None else [1e-3] * n)
    return tr


def test_detect_blowup():
    ctl = EvolveControls()
    assert detect_blowup(_traj([0.0] * 5, mass=0.0), ctl) is None
    assert detect_blowup(_traj([1.0, 1.1, 0.9]), ctl) is None
    assert detect_blowup(_traj([1.0, 10.0, 2000.0]), ctl) == Verdict.BLOWUP
    # narrower than resolution_cells grid cells
    assert detect_blowup(_traj([1.0, 1.0 / (32 * 10 / 1024)]), ctl) == Verdict.BLOWUP
    assert detect_blowup(_traj([1.0, 1.0], dt=[0, 1e-12]), ctl) == Verdict.STEP_COLLAPSE


def test_estimate_blowup_time_synthetic():
    t = np.linspace(0, 0.45, 200)
    T, r2 = estimate_blowup_time(t, 1 / (1 - 2 * t))
    assert T == pytest.approx(0.5, abs=1e-6)
    assert r2 >= 1 - 1e-9


def test_estimate_blowup_time_needs_data():
    with pytest.raises(InsufficientData):
        estimate_blowup_time(np.arange(5.0), np.arange(1.0, 6.0))
    with pytest.raises(InsufficientData):
        estimate_blowup_time(np.linspace(0, 1, 50), np.ones(50))


def test_controls_validation():
    with pytest.raises(DomainError):
        EvolveControls(dt0=1e-3, dt_min=1e-2)
    with pytest.raises(DomainError):
        EvolveControls(blowup_factor=1.0)
    with pytest.raises(DomainError):
        EvolveControls(t_max=0)
