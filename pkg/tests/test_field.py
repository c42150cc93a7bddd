import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from vpspec.errors import ValidationError, WindowTooShort
from vpspec.field import (
    InitialData,
    branch_table,
    data_from_config,
    decay_exponent_fit,
    default_data,
    field_decomposition,
    free_density,
    peak_frequency,
    potential_trace,
    radial_transform,
    spatial_transform,
    synth_osc_point,
)
from vpspec.spectral import tau_star


@pytest.mark.parametrize("r", [0.5, 1.0, 5.0])
def test_gaussian_radial_transform_closed_form(maxwellian, r):
    for n in range(3):
        closed = radial_transform(maxwellian, r, n)
        quad = radial_transform(maxwellian, r, n, method="quadrature")
        assert quad == pytest.approx(closed, abs=1e-10)


def test_radial_transform_mass(compact, maxwellian):
    for prof in (compact, maxwellian):
        top = prof.upsilon if prof.compact else 40.0
        u = np.linspace(0, top, 200001)
        mass = 4 * np.pi * trapezoid(prof.mu(0.5 * u * u) * u * u, u)
        assert float(radial_transform(prof, 0.0)) == pytest.approx(mass, rel=1e-8)


def test_radial_derivatives_match_finite_differences(compact):
    r, h = 2.3, 1e-4
    for n in range(2):
        fd = (radial_transform(compact, r + h, n) - radial_transform(compact, r - h, n)) / (2 * h)
        assert float(radial_transform(compact, r, n + 1)) == pytest.approx(float(fd), rel=1e-6)


def test_spatial_transforms(compact):
    gauss = InitialData(compact, spatial="gaussian", width=0.7)
    k = 1.3
    assert float(spatial_transform(gauss, k)) == pytest.approx((2 * np.pi * 0.49) ** 1.5 * math.exp(-0.5 * 0.49 * k * k))
    bump = InitialData(compact, spatial="compact", smoothness=2, width=1.0)
    # mass of (1 - r^2)^2 on the unit ball
    assert float(spatial_transform(bump, 0.0)) == pytest.approx(4 * np.pi * 8 / 105, rel=1e-12)
    series = float(spatial_transform(bump, 0.0999))
    direct = float(spatial_transform(bump, 0.1001))
    assert series == pytest.approx(direct, rel=1e-3)


def test_zero_mean_data(compact):
    data = InitialData(compact, zero_mean=True)
    assert float(spatial_transform(data, 0.0)) == 0.0
    assert float(spatial_transform(data, 0.5)) != 0.0


def test_free_density_at_zero(compact):
    data = default_data(compact)
    k = 0.4
    assert float(free_density(data, k, 0.0)) == pytest.approx(
        float(spatial_transform(data, k) * radial_transform(compact, 0.0)))
    # radial data have no first time derivative at t = 0
    assert float(free_density(data, k, 0.0, 1)) == pytest.approx(0.0, abs=1e-14)


def test_data_from_config(compact):
    data = data_from_config({"spatial": "gaussian", "width": 2.0}, compact)
    assert data.spatial == "gaussian" and data.width == 2.0
    with pytest.raises(ValidationError):
        data_from_config({"colour": "red"}, compact)
    with pytest.raises(ValidationError):
        data_from_config({"width": -1.0}, compact)


def test_potential_trace_relations(compact, kappa0):
    t = np.linspace(0, 10, 1201)
    tr = potential_trace(compact, default_data(compact), kappa0 / 2, t)
    assert tr.phi_hat == pytest.approx(tr.rho_hat / tr.k ** 2)
    assert tr.E_hat == pytest.approx(-1j * tr.k * tr.phi_hat)
    assert np.abs(tr.rho_hat - tr.rho_volterra).max() <= 1e-4 * np.abs(tr.rho_volterra).max()


def test_zero_data_gives_zero_trace(compact, kappa0):
    t = np.linspace(0, 5, 501)
    tr = field_decomposition(compact, default_data(compact).scaled(0.0), kappa0 / 2, t)
    assert np.all(tr.E_hat == 0)
    assert np.all(tr.E_osc == 0) and np.all(tr.E_r == 0)


def test_decomposition_identity(compact, kappa0):
    t = np.linspace(0, 30, 3001)
    tr = field_decomposition(compact, default_data(compact), kappa0 / 2, t)
    assert tr.identity_residual < 1e-6


def test_remainder_field_decays_faster(compact, kappa0):
    t = np.linspace(0, 100, 10001)
    tr = field_decomposition(compact, default_data(compact), kappa0 / 2, t)
    window = (10, 100)
    slope_r = decay_exponent_fit(t, tr.E_r, window).slope
    slope_osc = decay_exponent_fit(t, tr.E_osc_plus, window).slope
    assert slope_r < slope_osc - 2


def test_gaussian_field_decays(maxwellian):
    t = np.linspace(0, 30, 3001)
    tr = potential_trace(maxwellian, default_data(maxwellian), 1.0, t)
    late = np.abs(tr.E_hat[t > 20]).max()
    assert late < 1e-3 * np.abs(tr.E_hat).max()


def test_persistent_oscillation_frequency(compact, kappa0):
    k = kappa0 / 2
    t = np.linspace(0, 100, 10001)
    tr = potential_trace(compact, default_data(compact), k, t, cross_check=False)
    late = t >= 20
    freq, _ = peak_frequency(t[late], tr.E_hat.imag[late])
    assert freq == pytest.approx(tau_star(compact, k), abs=1e-3)


def test_branch_table_accuracy(compact):
    table = branch_table(compact)
    assert table.interpolation_error < 1e-8


def test_synthesis_linearity_and_origin(compact):
    data = default_data(compact)
    ts = np.array([0.0, 10.0, 50.0])
    base = synth_osc_point(compact, data, ts)
    doubled = synth_osc_point(compact, data.scaled(2.0), ts)
    assert doubled == pytest.approx(2 * base, rel=1e-12)
    assert np.all(np.isfinite(base)) and base[0] > 0


def test_fit_power_law_exact():
    t = np.linspace(1, 10, 50)
    fit = decay_exponent_fit(t, t ** -2.0)
    assert fit.slope == pytest.approx(-2.0, abs=1e-6)
    assert not fit.flagged


def test_fit_flags_exponential():
    t = np.linspace(1, 30, 50)
    fit = decay_exponent_fit(t, np.exp(-t))
    assert fit.slope < -5
    assert fit.flagged


def test_fit_window_too_short():
    with pytest.raises(WindowTooShort):
        decay_exponent_fit(np.arange(1, 6), np.ones(5))
