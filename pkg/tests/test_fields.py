import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma

from critnls.errors import DomainError, GridMismatch
from critnls.fields import (
    ComplexField,
    ModelParams,
    RadialGrid,
    RealField,
    energy,
    field_from_json,
    field_to_json,
    grad_norm_sq,
    h1_distance_sq,
    l2_scale,
    load_field,
    mass_sq,
    moment_sq,
    potential_I,
    profile_interpolator,
    save_field,
    sup_norm,
    surface_measure,
    tail_mass_fraction,
    weinstein_J,
)

from conftest import SOLITON_GRAD, SOLITON_I, SOLITON_J, SOLITON_MASS, soliton


def gaussian(grid, amp=1.0, width=1.0):
    return RealField(grid, amp * np.exp(-(grid.nodes / width) ** 2))


# --- parameters -----------------------------------------------------------

def test_surface_measure():
    assert surface_measure(1) == pytest.approx(2.0)
    assert surface_measure(2) == pytest.approx(2 * math.pi)
    assert surface_measure(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("N,b,sigma", [(1, 0.5, 1.5), (2, 1.0, 0.5), (3, 1.0, 1 / 3), (1, 0.0, 2.0)])
def test_critical_sigma(N, b, sigma):
    p = ModelParams(N, b)
    assert p.sigma == pytest.approx(sigma)
    assert p.is_critical


@pytest.mark.parametrize("N,b", [(2, 3.0), (1, 1.0), (2, 2.0), (3, -0.1)])
def test_rejects_b_out_of_range(N, b):
    with pytest.raises(DomainError):
        ModelParams(N, b)


def test_critical_mode_rejects_other_powers():
    with pytest.raises(DomainError):
        ModelParams(2, 1.0, sigma=0.4)
    p = ModelParams(2, 1.0, sigma=0.4, critical_mode=False)
    assert not p.is_critical


def test_energy_subcritical_bound():
    with pytest.raises(DomainError):
        ModelParams(3, 1.0, sigma=1.0, critical_mode=False)


def test_params_roundtrip():
    p = ModelParams(3, 1.0, omega=2.5)
    assert ModelParams.from_dict(p.to_dict()) == p
    assert p.with_omega(1.0).omega == 1.0


# --- grid -----------------------------------------------------------------

@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_weights_sum_to_ball_volume(N):
    g = RadialGrid(3.0, 100, N)
    assert g.weights.sum() == pytest.approx(surface_measure(N) * 3.0**N / N, rel=1e-13)
    assert g.volume() == pytest.approx(g.weights.sum())


@pytest.mark.parametrize("N,b", [(1, 0.5), (2, 1.0), (3, 1.0), (3, 1.9)])
def test_potential_weights_exact(N, b):
    g = RadialGrid(2.0, 50, N)
    total = surface_measure(N) * 2.0 ** (N - b) / (N - b)
    assert g.potential_weights(b).sum() == pytest.approx(total, rel=1e-13)
    assert np.all(np.isfinite(g.potential(b)))


def test_staggered_nodes():
    g = RadialGrid(1.0, 4, 2)
    np.testing.assert_allclose(g.nodes, [0.125, 0.375, 0.625, 0.875])
    assert g.scaled(2.0).dr == pytest.approx(0.5)


def test_bad_grid():
    with pytest.raises(DomainError):
        RadialGrid(-1.0, 10)
    with pytest.raises(DomainError):
        RadialGrid(1.0, 1)


# --- functionals ----------------------------------------------------------

@pytest.mark.parametrize("N", [1, 2, 3])
def test_gaussian_integrals(N):
    g = RadialGrid(8.0, 8192, N)
    f = gaussian(g)
    c = (math.pi / 2) ** (N / 2)
    assert mass_sq(f) == pytest.approx(c, rel=1e-6)
    assert grad_norm_sq(f) == pytest.approx(N * c, rel=1e-6)
    assert moment_sq(f) == pytest.approx(N * c / 4, rel=1e-6)


@pytest.mark.parametrize("N,b", [(1, 0.5), (2, 1.0), (3, 1.0)])
def test_potential_integral_of_gaussian(N, b):
    p = ModelParams(N, b)
    g = RadialGrid(8.0, 8192, N)
    f = gaussian(g)
    c = 2 * p.sigma + 2
    exact = surface_measure(N) * gamma((N - b) / 2) / (2 * c ** ((N - b) / 2))
    assert potential_I(f, p) == pytest.approx(exact, rel=1e-5)


def test_soliton_values():
    g = RadialGrid(15.0, 16384, 1)
    p = ModelParams(1, 0.0)
    psi = soliton(g)
    assert mass_sq(psi) == pytest.approx(SOLITON_MASS, abs=1e-6)
    assert SOLITON_MASS == pytest.approx(2.7206990, abs=1e-7)
    assert grad_norm_sq(psi) == pytest.approx(SOLITON_GRAD, rel=1e-6)
    assert SOLITON_GRAD == pytest.approx(1.3603495, abs=1e-7)
    assert potential_I(psi, p) == pytest.approx(SOLITON_I, rel=1e-6)
    assert SOLITON_I == pytest.approx(4.0810485, abs=1e-7)
    assert weinstein_J(psi, p) == pytest.approx(SOLITON_J, rel=1e-6)
    assert abs(energy(psi, p)) < 1e-5


def test_grad_norm_matches_laplacian():
    g = RadialGrid(5.0, 300, 3)
    rng = np.random.default_rng(1)
    v = rng.normal(size=g.M) + 1j * rng.normal(size=g.M)
    f = ComplexField(g, v)
    inner = np.vdot(v, g.weights * g.laplacian(v))
    assert grad_norm_sq(f) == pytest.approx(-inner.real, rel=1e-12)
    assert abs(inner.imag) < 1e-8 * abs(inner.real)


@settings(max_examples=40, deadline=None)
@given(amp=st.floats(0.1, 10), lam=st.floats(0.5, 2.0), N=st.sampled_from([1, 2, 3]))
def test_weinstein_invariance(amp, lam, N):
    p = ModelParams(N, 1.0 if N > 1 else 0.5)
    g = RadialGrid(20.0, 4096, N)
    f = gaussian(g, width=1.3)
    j = weinstein_J(f, p)
    assert weinstein_J(f * amp, p) == pytest.approx(j, rel=1e-10)
    assert weinstein_J(l2_scale(f, lam), p) == pytest.approx(j, rel=1e-3)


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0.5, 2.0), N=st.sampled_from([1, 2, 3]))
def test_l2_scaling_keeps_mass(lam, N):
    g = RadialGrid(20.0, 4096, N)
    f = gaussian(g)
    assert mass_sq(l2_scale(f, lam)) == pytest.approx(mass_sq(f), rel=1e-4)   # PCHIP resampling


def test_weinstein_rejects_zero():
    g = RadialGrid(1.0, 10)
    with pytest.raises(DomainError):
        weinstein_J(RealField(g, np.zeros(10)), ModelParams(1, 0.5))


def test_small_helpers():
    g = RadialGrid(10.0, 1000, 2)
    f = gaussian(g)
    assert sup_norm(f) == pytest.approx(1.0, abs=1e-4)
    assert tail_mass_fraction(f) < 1e-30
    assert h1_distance_sq(f, f) == 0.0
    interp = profile_interpolator(f)
    np.testing.assert_allclose(interp(g.nodes), f.values, atol=1e-14)
    assert interp(11.0) == 0.0


# --- field objects --------------------------------------------------------

def test_field_validation():
    g = RadialGrid(1.0, 4)
    with pytest.raises(GridMismatch):
        RealField(g, np.ones(3))
    with pytest.raises(DomainError):
        RealField(g, np.array([1.0, np.nan, 0, 0]))
    f = RealField(g, np.ones(4))
    with pytest.raises(ValueError):
        f.values[0] = 2.0
    with pytest.raises(GridMismatch):
        f + RealField(RadialGrid(2.0, 4), np.ones(4))
    assert isinstance(f * 1j, ComplexField)
    np.testing.assert_array_equal((f - f).values, 0)


@pytest.mark.parametrize("complex_", [False, True])
def test_json_roundtrip_bit_identical(tmp_path, complex_):
    g = RadialGrid(7.0, 64, 2)
    rng = np.random.default_rng(3)
    v = rng.normal(size=64) * np.pi
    if complex_:
        v = v + 1j * rng.normal(size=64) / 3
    f = ComplexField(g, v) if complex_ else RealField(g, v)
    p = ModelParams(2, 1.0)
    path = tmp_path / "f.json"
    save_field(path, f, p)
    h, q = load_field(path)
    assert q == p and h.grid == g
    assert np.array_equal(h.values, f.values)
    d = json.loads(path.read_text())
    assert set(d) >= {"params", "grid", "re"}
    assert field_from_json(field_to_json(f))[1] is None
