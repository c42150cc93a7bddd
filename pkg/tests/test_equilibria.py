import math

import mpmath as mp
import numpy as np
import pytest

from vpspec.equilibria import (
    Family,
    compact_polynomial,
    eval_mu,
    gaussian,
    moment_kappa,
    moment_table,
    moment_tau,
    power_law,
    profile_from_config,
    survival_threshold,
    threshold_identity_residual,
    validate_profile,
)
from vpspec.errors import DivergentMoment, InfiniteSupport, ValidationError

# mpmath quadrature at 30 digits for the default compact profile
COMPACT_TAU = [1.31299051332587793274, 0.605995621535020584342, 0.403997081023347056228]
COMPACT_KAPPA = [0.902680977911541078759, 1.91487552218806445011, 4.06206440060193485441]


def test_compact_tau_moments(compact):
    for j, ref in enumerate(COMPACT_TAU):
        assert moment_tau(compact, j) == pytest.approx(ref, rel=1e-12)


def test_compact_kappa_moments(compact):
    for j, ref in enumerate(COMPACT_KAPPA):
        assert moment_kappa(compact, j) == pytest.approx(ref, rel=1e-12)


def test_maxwellian_moments_are_double_factorials(maxwellian):
    for j, ref in enumerate([1.0, 3.0, 15.0]):
        assert moment_tau(maxwellian, j) == pytest.approx(ref, rel=1e-12)


def test_threshold_closed_form(compact):
    exact = 64 * math.sqrt(2) * math.pi / 315
    assert survival_threshold(compact) ** 2 == pytest.approx(exact, rel=1e-12)


def test_threshold_matches_independent_quadrature(compact):
    mp.mp.dps = 25
    ups = mp.sqrt(2)
    ref = 4 * mp.pi * mp.quad(lambda u: u * u * (1 - u * u / 2) ** 4 / (ups ** 2 - u * u), [0, ups])
    assert survival_threshold(compact) ** 2 == pytest.approx(float(ref), rel=1e-10)


def test_threshold_zero_for_unbounded_support(maxwellian):
    assert survival_threshold(maxwellian) == 0.0
    assert survival_threshold(power_law()) == 0.0


def test_threshold_identity_residual_is_reported_not_zero(compact):
    res = threshold_identity_residual(compact)
    expected = COMPACT_KAPPA[0] * 2 - (COMPACT_TAU[0] + COMPACT_KAPPA[1])
    assert res == pytest.approx(expected, rel=1e-10)
    assert abs(res) > 1.0


def test_kappa_needs_finite_support(maxwellian):
    with pytest.raises(InfiniteSupport):
        moment_kappa(maxwellian, 0)


def test_kappa_divergence_beyond_vanishing_order():
    prof = compact_polynomial(n1=4)
    moment_kappa(prof, 2)
    with pytest.raises(DivergentMoment):
        moment_kappa(prof, 3)


def test_power_law_moment_divergence():
    prof = power_law(n1=4)
    moment_tau(prof, 2)
    with pytest.raises(DivergentMoment):
        moment_tau(prof, 3)


def test_mu_values_and_support(compact, maxwellian):
    assert float(eval_mu(compact, 0.0)) == 1.0
    assert float(eval_mu(compact, 1.5)) == 0.0
    assert float(eval_mu(compact, 0.5)) == pytest.approx(0.0625)
    assert float(eval_mu(maxwellian, 1.0)) == pytest.approx((2 * math.pi) ** -1.5 * math.exp(-1))
    with pytest.raises(ValidationError):
        eval_mu(compact, -0.1)


def test_mu_derivatives_match_finite_differences(compact, maxwellian):
    for prof in (compact, maxwellian, power_law()):
        e, h = 0.3, 1e-5
        fd = (prof.mu_derivative(e + h, 0) - prof.mu_derivative(e - h, 0)) / (2 * h)
        assert prof.mu_derivative(e, 1) == pytest.approx(fd, rel=1e-8)


def test_maxwellian_cutoff(maxwellian):
    m = maxwellian.cutoff()
    assert maxwellian.mu(0.5 * m * m) / maxwellian.mu(0.0) == pytest.approx(1e-16, rel=1e-9)


def test_validation_reports_named_failures():
    bad = compact_polynomial(amplitude=-1.0)
    report = validate_profile(bad)
    assert not report
    assert any("negativity" in f for f in report.failures)
    assert validate_profile(compact_polynomial())
    assert validate_profile(gaussian())
    rough = compact_polynomial(n1=2)
    assert not validate_profile(rough)


def test_profile_from_config_roundtrip():
    prof = profile_from_config({"family": "compact_polynomial", "params": {"A": 2.0, "E_max": 1.5, "N1": 5}})
    assert prof.family is Family.COMPACT_POLYNOMIAL
    assert prof.upsilon == pytest.approx(math.sqrt(3.0))
    assert prof.smoothness_order == 5
    with pytest.raises(ValidationError):
        profile_from_config({"family": "lorentzian"})


def test_moment_table(compact):
    tab = moment_table(compact)
    assert tab.tau_sq == pytest.approx(COMPACT_TAU, rel=1e-12)
    assert tab.kappa0 == pytest.approx(math.sqrt(COMPACT_KAPPA[0]), rel=1e-12)
    assert np.isfinite(tab.identity_residual)
