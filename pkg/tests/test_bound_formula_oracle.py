"""Cross-check the bound evaluators against independent transcriptions.

The oracles below recompute every bracket term step by step with scalar
math and the bisection Lambert solver, sharing no code with the package.
Agreement on random coefficient sets pins the algebra of the evaluators.
"""

import math

import numpy as np
import pytest

from fisherbound.bounds import (
    BoundCoefficients,
    lower_bound_l2,
    lower_bound_linf,
    upper_bound_l2,
    upper_bound_linf,
)

from oracles import lambert_bisect


def upper_oracle(eps, delta, d, mu_r, v_h, v_r, c, rho_diag, sigma_diag,
                 sigma, opnorm, norm):
    if norm == "linf":
        tau0 = (1.0 - eps * (d * mu_r / 2.0) * opnorm) * eps
        big_d = (
            math.sqrt(4.0 * v_h / delta) * math.sqrt(d)
            + 0.5 * math.sqrt(4.0 * v_r / delta) * d * eps
        ) * opnorm * eps
    else:
        tau0 = (1.0 - eps * (math.sqrt(d) * mu_r / 2.0) * opnorm) * eps / math.sqrt(d)
        big_d = (
            math.sqrt(4.0 * v_h / delta)
            + 0.5 * math.sqrt(4.0 * v_r / delta) * eps
        ) * opnorm * eps
    if tau0 <= 0.0:
        return None
    eta = sum(c * r / s**3 for r, s in zip(rho_diag, sigma_diag)) / d
    w0 = lambert_bisect(8.0 / math.pi / delta**2 * d**2)
    term_tau = (big_d / tau0) ** 2
    term_eta = (2.0 * d * eta / delta) ** 2
    a = d * eta / delta + big_d / (2.0 * tau0) + sigma * math.sqrt(w0) / (2.0 * tau0)
    y_star = (a + math.sqrt(a * a - (2.0 * d * eta / delta) * (big_d / tau0))) ** 2
    return max(term_tau, term_eta, y_star, 1.0)


def lower_oracle(eps, delta, d, mu_r, v_h, v_r, c, rho, sigma, opnorm, norm):
    if norm == "linf":
        tau0 = (1.0 + eps * (d * mu_r / 2.0) * opnorm) * eps
        big_d = (
            math.sqrt(2.0 * v_h / delta) * math.sqrt(d)
            + 0.5 * math.sqrt(2.0 * v_r / delta) * d * eps
        ) * opnorm * eps
    else:
        tau0 = (1.0 + eps * (mu_r / 2.0) * opnorm) * eps
        big_d = (
            math.sqrt(2.0 * v_h / delta)
            + 0.5 * math.sqrt(2.0 * v_r / delta) * eps
        ) * opnorm * eps
    eta = 2.0 * c * rho / sigma**3
    w0 = lambert_bisect(1.0 / delta**2 / (2.0 * math.pi))
    beta = -big_d / tau0 - eta / (2.0 * delta) + math.sqrt(w0) * sigma / (2.0 * tau0)
    disc = beta * beta - 2.0 * eta * big_d / (delta * tau0)
    z_star = (beta + math.sqrt(disc)) ** 2 if beta > 0.0 and disc >= 0.0 else 0.0
    fourth = (2.0 * sigma / (math.sqrt(big_d**2 + 4.0 * tau0 * sigma) + big_d)) ** 4
    return max(z_star, fourth, 1.0)


def random_coefficients(rng):
    d = int(rng.integers(1, 9))
    sigma_diag = rng.uniform(0.2, 2.0, size=d)
    rho_diag = rng.uniform(0.0, 3.0, size=d)
    sigma = float(sigma_diag.max())
    sigma_top = float(rng.uniform(sigma, 2.0 * sigma))
    return BoundCoefficients(
        d=d,
        mu_R=float(rng.uniform(0.0, 4.0)),
        V_H=float(rng.uniform(0.0, 10.0)),
        V_R=float(rng.uniform(0.0, 5.0)),
        C=0.4748,
        sigma=sigma,
        opnorm_inv=float(rng.uniform(0.5, 3.0)),
        sigma_diag=sigma_diag,
        rho_diag=rho_diag,
        sigma_top=sigma_top,
        rho_top=float(rng.uniform(0.0, 3.0)),
        norm=None,
    )


@pytest.mark.parametrize("norm", ["linf", "l2"])
def test_upper_bound_matches_oracle(norm):
    rng = np.random.default_rng(2718)
    evaluator = upper_bound_linf if norm == "linf" else upper_bound_l2
    checked = 0
    for _ in range(200):
        coeffs = random_coefficients(rng)
        eps = float(rng.uniform(1e-4, 0.2))
        delta = float(rng.uniform(0.01, 0.4))
        expected = upper_oracle(
            eps, delta, coeffs.d, coeffs.mu_R, coeffs.V_H, coeffs.V_R, coeffs.C,
            coeffs.rho_diag, coeffs.sigma_diag, coeffs.sigma, coeffs.opnorm_inv,
            norm,
        )
        result = evaluator(eps, delta, coeffs)
        if expected is None:
            assert not result.applicable
            assert result.reason == "tau0 <= 0"
        else:
            assert result.applicable
            assert result.value == pytest.approx(expected, rel=1e-9)
            checked += 1
    assert checked > 50


def test_lower_bound_linf_matches_oracle_per_coordinate():
    rng = np.random.default_rng(3141)
    for _ in range(200):
        coeffs = random_coefficients(rng)
        eps = float(rng.uniform(1e-4, 0.2))
        delta = float(rng.uniform(0.01, 0.4))
        per_coordinate = [
            lower_oracle(eps, delta, coeffs.d, coeffs.mu_R, coeffs.V_H,
                         coeffs.V_R, coeffs.C, float(coeffs.rho_diag[a]),
                         float(coeffs.sigma_diag[a]), coeffs.opnorm_inv, "linf")
            for a in range(coeffs.d)
        ]
        result = lower_bound_linf(eps, delta, coeffs)
        assert result.applicable
        assert result.value == pytest.approx(max(per_coordinate), rel=1e-9)
        single = lower_bound_linf(eps, delta, coeffs, a=0)
        assert single.value == pytest.approx(per_coordinate[0], rel=1e-9)


def test_lower_bound_l2_matches_oracle():
    rng = np.random.default_rng(1618)
    for _ in range(200):
        coeffs = random_coefficients(rng)
        eps = float(rng.uniform(1e-4, 0.2))
        delta = float(rng.uniform(0.01, 0.4))
        expected = lower_oracle(eps, delta, coeffs.d, coeffs.mu_R, coeffs.V_H,
                                coeffs.V_R, coeffs.C, coeffs.rho_top,
                                coeffs.sigma_top, coeffs.opnorm_inv, "l2")
        result = lower_bound_l2(eps, delta, coeffs)
        assert result.applicable
        assert result.value == pytest.approx(expected, rel=1e-9)
