import json
import math

import numpy as np
import pytest

from dcw.model import (
    BETA_TRICRITICAL,
    H_TRICRITICAL,
    ModelParams,
    PlanarState,
    beta_c,
)
from dcw.stability import (
    Regime,
    analyze_gamma,
    beta_T,
    eigenvalues,
    first_lyapunov,
    g_quintic_coefficient_fd,
    g_taylor_coefficients,
    gamma,
    gamma_prime,
    lambda_inflection,
    linearization_matrix,
    numeric_jacobian,
    second_lyapunov_tricritical,
    stability_report,
    tricritical_h_bisect,
)

# Reference values computed independently at 50-digit precision.
EIG_IMAG_1_0 = 1.3228756555322953
ELL1_1 = 0.0078541125062553968
ELL1_03 = -0.1690049948919172
LAMI_1 = 0.92047443285159418
LAMI_15 = 1.4899847938800879
BT_08 = 2.6039603780876566
BT_1 = 3.0663096046174021
BT_15 = 4.102257251905464
ZEROS_33_1 = (0.63602700955371685, 1.856867263594681)
ZERO_2_0 = 1.0340217518025642
GCOEF_1_07 = {1: 1.7305208200350828, 3: -0.040530759127745499,
              5: 0.12505881816250044}


def test_numeric_jacobian_matches_closed_form():
    for beta, h in ((1.0, 0.0), (2.5, 0.7), (4.0, 1.2)):
        p = ModelParams(beta=beta, h=h)
        assert np.allclose(numeric_jacobian(p), linearization_matrix(p),
                           atol=1e-7)


def test_numeric_jacobian_off_origin():
    p = ModelParams(beta=2.0, h=0.5)
    jac = numeric_jacobian(p, PlanarState(0.2, 0.4))
    # d(dm)/dm = -2 everywhere; d(dlam)/dm = -2*beta
    assert jac[0, 0] == pytest.approx(-2.0, abs=1e-7)
    assert jac[1, 0] == pytest.approx(-2.0 * p.beta, abs=1e-6)


def test_eigenvalues_values_and_regimes():
    info = eigenvalues(ModelParams(beta=1.0, h=0.0))
    assert info.k_plus == pytest.approx(complex(-0.5, EIG_IMAG_1_0), abs=1e-12)
    assert info.k_minus == pytest.approx(complex(-0.5, -EIG_IMAG_1_0), abs=1e-12)
    assert info.regime is Regime.Stable
    assert eigenvalues(ModelParams(beta=1.6, h=0.0)).regime is Regime.Unstable
    assert eigenvalues(ModelParams(beta=1.5, h=0.0)).regime is Regime.Critical
    # eigenvalues of the closed form agree with the matrix spectrum
    p = ModelParams(beta=2.7, h=0.8)
    mats = sorted(np.linalg.eigvals(linearization_matrix(p)), key=lambda z: z.imag)
    info = eigenvalues(p)
    assert mats[1] == pytest.approx(info.k_plus, abs=1e-12)


def test_first_lyapunov():
    assert first_lyapunov(0.0) == pytest.approx(-0.375, abs=1e-15)
    assert first_lyapunov(0.3) == pytest.approx(ELL1_03, abs=1e-13)
    assert first_lyapunov(1.0) == pytest.approx(ELL1_1, abs=1e-13)
    assert abs(first_lyapunov(H_TRICRITICAL)) < 1e-14
    assert first_lyapunov(0.5) < 0  # supercritical below the tricritical h
    assert first_lyapunov(0.8) > 0  # subcritical above
    with pytest.raises(ValueError):
        first_lyapunov(-0.1)


def test_tricritical_h_bisect():
    assert tricritical_h_bisect() == pytest.approx(H_TRICRITICAL, abs=1e-9)


def test_g_taylor_coefficients_h0():
    # at h = 0: g = 3*lam - 2*beta*tanh(lam)
    coeffs = g_taylor_coefficients(ModelParams(beta=1.0, h=0.0))
    assert coeffs[1] == pytest.approx(1.0, abs=1e-14)
    assert coeffs[2] == 0.0
    assert coeffs[3] == pytest.approx(2.0 / 3.0, abs=1e-14)
    assert coeffs[4] == 0.0
    assert coeffs[5] == pytest.approx(-4.0 / 15.0, abs=1e-14)


def test_g_taylor_coefficients_reference():
    coeffs = g_taylor_coefficients(ModelParams(beta=1.0, h=0.7))
    for n, want in GCOEF_1_07.items():
        assert coeffs[n] == pytest.approx(want, abs=1e-13)


def test_g_quintic_fd_cross_check():
    p = ModelParams(beta=BETA_TRICRITICAL, h=H_TRICRITICAL)
    exact = g_taylor_coefficients(p)[5]
    assert exact == pytest.approx(4.0 / 15.0, abs=1e-12)
    assert g_quintic_coefficient_fd(p, step=0.02) == pytest.approx(exact, abs=1e-6)


def test_second_lyapunov():
    assert second_lyapunov_tricritical() == pytest.approx(-1.0 / 360.0,
                                                          abs=1e-12)


def test_gamma_and_prime():
    p = ModelParams(beta=3.0, h=0.5)
    lam = 0.4
    want = 1.0 * (math.tanh(0.9) + math.tanh(-0.1))
    assert gamma(lam, p) == pytest.approx(want, abs=1e-15)
    fd = (gamma(lam + 1e-6, p) - gamma(lam - 1e-6, p)) / 2e-6
    assert gamma_prime(lam, p) == pytest.approx(fd, abs=1e-8)


def test_lambda_inflection():
    assert lambda_inflection(0.3) is None
    assert lambda_inflection(H_TRICRITICAL) == 0.0
    assert lambda_inflection(1.0) == pytest.approx(LAMI_1, abs=1e-13)
    assert lambda_inflection(1.5) == pytest.approx(LAMI_15, abs=1e-13)


def test_analyze_gamma_counts():
    assert analyze_gamma(ModelParams(beta=1.0, h=0.3)).zero_count == 0
    assert analyze_gamma(ModelParams(beta=2.9, h=1.0)).zero_count == 0
    two = analyze_gamma(ModelParams(beta=3.3, h=1.0))
    assert two.zero_count == 2
    assert two.positive_zeros[0] == pytest.approx(ZEROS_33_1[0], abs=1e-10)
    assert two.positive_zeros[1] == pytest.approx(ZEROS_33_1[1], abs=1e-10)
    one = analyze_gamma(ModelParams(beta=2.0, h=0.0))
    assert one.zero_count == 1
    assert one.positive_zeros[0] == pytest.approx(ZERO_2_0, abs=1e-10)
    assert analyze_gamma(ModelParams(beta=4.0, h=1.0)).zero_count == 1


def test_beta_T_values():
    assert beta_T(0.8) == pytest.approx(BT_08, abs=1e-10)
    assert beta_T(1.0) == pytest.approx(BT_1, abs=1e-10)
    assert beta_T(1.5) == pytest.approx(BT_15, abs=1e-10)
    for h in (0.8, 1.0, 1.5):
        assert beta_T(h) <= beta_c(h)
    # approaches the tricritical beta from above as h decreases to h_tc
    assert beta_T(H_TRICRITICAL + 1e-4) == pytest.approx(BETA_TRICRITICAL,
                                                         abs=1e-2)
    with pytest.raises(ValueError):
        beta_T(0.5)


def test_stability_report_serializable():
    report = stability_report(ModelParams(beta=3.3, h=1.0))
    text = json.dumps(report)
    back = json.loads(text)
    assert back["gamma"]["zero_count"] == 2
    assert back["eigs"]["regime"] == "stable"
    assert back["beta_c"] == pytest.approx(beta_c(1.0))
