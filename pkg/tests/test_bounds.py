import math

import numpy as np
import pytest

from fisherbound.bounds import (
    asymptotic_lower_l2,
    asymptotic_lower_linf,
    asymptotic_upper_l2,
    asymptotic_upper_linf,
    entangled_pauli_l2_lower,
    entangled_pauli_upper,
    estimate_coefficients,
    idealized_coefficients,
    lower_bound_l2,
    lower_bound_linf,
    separable_pauli_lower,
    upper_bound_l2,
    upper_bound_linf,
)
from fisherbound.fisher import bell_fim_structural, fim
from fisherbound.models import (
    GaussianKnownCovModel,
    bernoulli_model,
    entangled_pauli_model,
    multinomial_model,
)
from fisherbound.pauli import rates_to_eigenvalues

from oracles import lambert_bisect

# Frozen from the bisection oracle.
W0_ARG_D3_DELTA01 = 2291.831180523293          # 8/pi * 0.1^-2 * 3^2
W0_D3_DELTA01 = 5.953180760789737
W0_DELTA005_LOWER = 3.0413018250283903         # W0(0.05^-2 / 2 pi)
W0_DELTA01_LOWER = 2.0496325744621027          # W0(0.1^-2 / 2 pi)
W0_ENT_N1_DELTA01 = 6.448606502686987          # W0(8/pi * 0.1^-2 * 16)
DELTA_UNIT_W0 = 1.0 / math.sqrt(2.0 * math.pi * math.e)  # W0(e) = 1 here


class TestUpperLinf:
    def test_idealized_collapses_to_lambert_term(self):
        coeffs = idealized_coefficients(3)
        result = upper_bound_linf(0.05, 0.1, coeffs)
        assert result.applicable
        assert result.value == pytest.approx(W0_D3_DELTA01 / 0.0025, rel=1e-12)
        assert result.limiting_term == "y-star"

    def test_frozen_argument(self):
        assert 8.0 / math.pi * 0.1**-2 * 9 == pytest.approx(W0_ARG_D3_DELTA01, rel=1e-12)
        assert lambert_bisect(W0_ARG_D3_DELTA01) == pytest.approx(W0_D3_DELTA01, rel=1e-12)

    def test_asymptotic_ratio_idealized(self):
        coeffs = idealized_coefficients(3)
        for eps in (1e-2, 1e-3, 1e-4):
            value = upper_bound_linf(eps, 0.1, coeffs).value
            assert value * eps**2 == pytest.approx(W0_D3_DELTA01, rel=1e-12)

    def test_asymptotic_ratio_exact_coefficients(self):
        model = entangled_pauli_model(1)
        target = W0_D3_DELTA01
        previous = math.inf
        for eps in (1e-2, 1e-3, 1e-4):
            coeffs = estimate_coefficients(model, np.zeros(3), eps, "linf")
            ratio = upper_bound_linf(eps, 0.1, coeffs).value * eps**2 / target
            assert ratio < previous  # converging from above
            previous = ratio
        assert previous == pytest.approx(1.0, rel=0.05)

    def test_inapplicable_when_tau_negative(self):
        model = entangled_pauli_model(1)
        coeffs = estimate_coefficients(model, np.zeros(3), 0.1, "linf")
        result = upper_bound_linf(0.1, 0.1, coeffs)
        assert not result.applicable
        assert result.reason == "tau0 <= 0"
        assert result.value == math.inf

    def test_value_floor(self):
        coeffs = idealized_coefficients(1)
        assert upper_bound_linf(100.0, 0.9, coeffs).value >= 1.0

    def test_preconditions(self):
        coeffs = idealized_coefficients(2)
        with pytest.raises(ValueError):
            upper_bound_linf(0.0, 0.1, coeffs)
        with pytest.raises(ValueError):
            upper_bound_linf(0.1, 1.0, coeffs)


class TestLowerLinf:
    def test_idealized_matches_small_eps_limit(self):
        coeffs = idealized_coefficients(3)
        result = lower_bound_linf(0.1, 0.05, coeffs)
        assert result.applicable
        assert result.value == pytest.approx(W0_DELTA005_LOWER * 100.0, rel=1e-12)

    def test_w0_of_e_normalisation(self):
        coeffs = idealized_coefficients(1)
        result = lower_bound_linf(0.1, DELTA_UNIT_W0, coeffs)
        assert result.value == pytest.approx(100.0, rel=1e-9)

    def test_coordinate_maximised_dominates(self):
        model = entangled_pauli_model(1)
        theta = np.array([0.5, 0.1, -0.2])
        coeffs = estimate_coefficients(model, theta, 0.01, "linf")
        best = lower_bound_linf(0.01, 0.1, coeffs)
        for a in range(3):
            single = lower_bound_linf(0.01, 0.1, coeffs, a=a)
            assert best.value >= single.value - 1e-12

    def test_vacuous_regime_floors_at_one(self):
        coeffs = idealized_coefficients(2)
        result = lower_bound_linf(10.0, 0.5, coeffs)
        assert result.applicable and result.value >= 1.0


class TestL2Bounds:
    def test_upper_reduces_to_linf_for_one_parameter(self):
        ideal = idealized_coefficients(1, sigma=0.7, opnorm_inv=2.0)
        for eps, delta in [(0.05, 0.1), (0.01, 0.02)]:
            linf = upper_bound_linf(eps, delta, ideal).value
            euclid = upper_bound_l2(eps, delta, ideal).value
            assert euclid == pytest.approx(linf, rel=1e-12)

    def test_idealized_scaling_is_dimension(self):
        ideal = idealized_coefficients(4)
        linf = upper_bound_linf(0.1, 0.1, ideal).value
        euclid = upper_bound_l2(0.1, 0.1, ideal).value
        assert euclid == pytest.approx(4.0 * linf, rel=1e-12)

    def test_upper_asymptotic_ratio(self):
        ideal = idealized_coefficients(3)
        for eps in (1e-2, 1e-3, 1e-4):
            value = upper_bound_l2(eps, 0.1, ideal).value
            assert value * eps**2 == pytest.approx(3.0 * W0_D3_DELTA01, rel=1e-12)

    def test_lower_reduces_to_linf_for_one_parameter(self):
        model = bernoulli_model()
        theta = np.array([0.3])
        c_inf = estimate_coefficients(model, theta, 0.01, "linf")
        c_l2 = estimate_coefficients(model, theta, 0.01, "l2")
        a = lower_bound_linf(0.01, 0.05, c_inf).value
        b = lower_bound_l2(0.01, 0.05, c_l2).value
        assert b == pytest.approx(a, rel=1e-12)

    def test_lower_idealized_limit(self):
        # sigma_top from diag(4,1): F^-1 = diag(1/4, 1), lambda_max = 1
        stats_sigma = 1.0
        ideal = idealized_coefficients(2, sigma=stats_sigma, sigma_top=stats_sigma)
        result = lower_bound_l2(1e-3, 0.1, ideal)
        assert result.value == pytest.approx(W0_DELTA01_LOWER * stats_sigma**2 / 1e-6,
                                             rel=1e-9)

    def test_norm_dominance(self):
        ideal = idealized_coefficients(5)
        for eps, delta in [(0.1, 0.1), (0.01, 0.05)]:
            assert (upper_bound_l2(eps, delta, ideal).value
                    >= upper_bound_linf(eps, delta, ideal).value)
        model = entangled_pauli_model(1)
        c_inf = estimate_coefficients(model, np.zeros(3), 0.01, "linf")
        c_l2 = estimate_coefficients(model, np.zeros(3), 0.01, "l2")
        assert (upper_bound_l2(0.01, 0.1, c_l2).value
                >= upper_bound_linf(0.01, 0.1, c_inf).value)

    def test_norm_mismatch_rejected(self):
        model = bernoulli_model()
        coeffs = estimate_coefficients(model, np.array([0.4]), 0.01, "linf")
        with pytest.raises(ValueError, match="ball"):
            upper_bound_l2(0.01, 0.1, coeffs)


class TestOrdering:
    def test_lower_below_upper_across_grid(self):
        cases = [
            (entangled_pauli_model(1), np.zeros(3)),
            (entangled_pauli_model(1), np.array([0.4, 0.1, -0.2])),
            (bernoulli_model(), np.array([0.5])),
            (multinomial_model(3), np.full(3, 0.25)),
        ]
        for model, theta in cases:
            for eps in (0.01, 0.03):
                for delta in (0.05, 0.1, 0.25):
                    coeffs = estimate_coefficients(model, theta, eps, "linf")
                    upper = upper_bound_linf(eps, delta, coeffs)
                    lower = lower_bound_linf(eps, delta, coeffs)
                    if upper.applicable:
                        assert lower.value <= upper.value


class TestEstimateCoefficients:
    def test_gaussian_third_derivative_free(self):
        model = GaussianKnownCovModel(np.eye(2))
        coeffs = estimate_coefficients(model, np.zeros(2), 0.1, "linf")
        assert coeffs.mu_R == 0.0 and coeffs.V_R == 0.0 and coeffs.V_H == 0.0
        np.testing.assert_allclose(
            coeffs.rho_diag, np.full(2, 2.0 * math.sqrt(2.0 / math.pi))
        )
        assert coeffs.provenance == "exact"

    def test_bernoulli_hessian_fluctuation_hand_enumeration(self):
        # B(1) = (2t-1)/(t^2(1-t)), B(0) = (1-2t)/(t(1-t)^2)
        model = bernoulli_model()
        theta = 0.3
        coeffs = estimate_coefficients(model, np.array([theta]), 0.01, "linf")
        b1 = (2 * theta - 1) / (theta**2 * (1 - theta))
        b0 = (1 - 2 * theta) / (theta * (1 - theta) ** 2)
        oracle = theta * b1**2 + (1 - theta) * b0**2
        assert coeffs.V_H == pytest.approx(oracle, rel=1e-12)

    def test_bernoulli_symmetric_point_has_no_fluctuation(self):
        model = bernoulli_model()
        coeffs = estimate_coefficients(model, np.array([0.5]), 0.01, "linf")
        assert coeffs.V_H == pytest.approx(0.0, abs=1e-12)

    def test_entangled_depolarizing_moments(self):
        # 4-outcome enumeration: projected scores are +-1, so rho_a = 1
        model = entangled_pauli_model(1)
        coeffs = estimate_coefficients(model, np.zeros(3), 1e-3, "linf")
        np.testing.assert_allclose(coeffs.rho_diag, np.ones(3), atol=1e-12)
        np.testing.assert_allclose(coeffs.sigma_diag, np.ones(3), atol=1e-12)
        assert coeffs.V_H == pytest.approx(6.0, rel=1e-12)
        assert coeffs.V_R == pytest.approx(0.0, abs=1e-10)
        assert coeffs.sigma == pytest.approx(1.0)
        assert coeffs.opnorm_inv == pytest.approx(1.0)

    def test_envelope_radius_depends_on_norm(self):
        model = entangled_pauli_model(1)
        linf = estimate_coefficients(model, np.zeros(3), 0.05, "linf")
        l2 = estimate_coefficients(model, np.zeros(3), 0.05, "l2")
        assert linf.mu_R > l2.mu_R  # sqrt(d) larger ball inflates the envelope

    def test_envelope_infinite_when_ball_hits_boundary(self):
        model = entangled_pauli_model(1)
        coeffs = estimate_coefficients(model, np.zeros(3), 0.6, "linf")
        assert math.isinf(coeffs.mu_R)
        result = upper_bound_linf(0.6, 0.1, coeffs)
        assert not result.applicable


class TestAsymptoticEvaluators:
    def test_entangled_upper_frozen_value(self):
        got = entangled_pauli_upper(1, 0.1, 0.1)
        assert got == pytest.approx(W0_ENT_N1_DELTA01 * 100.0, rel=1e-12)

    def test_entangled_upper_log_bound(self):
        for n in (1, 2, 5):
            value = entangled_pauli_upper(n, 0.1, 0.1)
            cap = (math.log(8 / math.pi) + 2 * n * math.log(4) + 2 * math.log(10)) / 0.01
            assert value <= cap

    def test_entangled_upper_linear_in_n(self):
        values = [entangled_pauli_upper(n, 0.1, 0.1) for n in range(1, 9)]
        diffs = np.diff(values)
        assert np.all(diffs > 0)
        assert np.all(np.abs(diffs / diffs[0] - 1.0) < 0.6)  # near-linear growth

    def test_separable_lower_exponential_ratio(self):
        assert separable_pauli_lower(11, 0.1, 0.1) / separable_pauli_lower(
            1, 0.1, 0.1
        ) == pytest.approx(2.0**10, rel=1e-12)

    def test_separable_lower_unit_w0(self):
        assert separable_pauli_lower(3, 0.1, DELTA_UNIT_W0) == pytest.approx(
            8.0 / 0.01, rel=1e-9
        )

    def test_separation_crossover_scan(self):
        # numeric-scan oracle: ratio grows and crosses 1 at some n0
        ratios = [
            separable_pauli_lower(n, 0.1, 0.1) / entangled_pauli_upper(n, 0.1, 0.1)
            for n in range(1, 12)
        ]
        assert all(b > a for a, b in zip(ratios, ratios[1:]))
        crossover = next(i for i, r in enumerate(ratios, start=1) if r > 1.0)
        assert crossover == 3
        assert all(r > 1.0 for r in ratios[crossover - 1:])

    def test_l2_lower_uniform_rates(self):
        got = entangled_pauli_l2_lower(1, np.full(4, 0.25), 0.1, 0.1)
        assert got == pytest.approx(W0_DELTA01_LOWER * 100.0, rel=1e-12)

    def test_l2_lower_identity_channel_vacuous(self):
        got = entangled_pauli_l2_lower(1, np.array([1.0, 0.0, 0.0, 0.0]), 0.1, 0.1)
        assert got == 0.0

    def test_l2_lower_consistent_with_interlacing(self):
        rng = np.random.default_rng(77)
        for _ in range(10):
            p = rng.dirichlet(np.ones(4))
            if np.any(p <= 1e-6):
                continue
            bound = entangled_pauli_l2_lower(1, p, 0.1, 0.1)
            f = bell_fim_structural(p, 1)
            exact = asymptotic_lower_l2(0.1, 0.1, f.lambda_max_inverse())
            assert bound <= exact + 1e-9

    def test_generic_asymptotics(self):
        assert asymptotic_upper_l2(0.1, 0.1, 3, 1.0) == pytest.approx(
            3.0 * asymptotic_upper_linf(0.1, 0.1, 3, 1.0)
        )
        assert asymptotic_lower_linf(0.1, 0.1, 0.25) == pytest.approx(
            W0_DELTA01_LOWER * 25.0
        )


class TestBoundResultContract:
    def test_values_at_least_one_or_flagged(self):
        model = entangled_pauli_model(1)
        for eps in (0.01, 0.2, 0.5):
            coeffs = estimate_coefficients(model, np.zeros(3), eps, "linf")
            for delta in (0.05, 0.3):
                for result in (
                    upper_bound_linf(eps, delta, coeffs),
                    lower_bound_linf(eps, delta, coeffs),
                ):
                    assert result.value >= 1.0 or not result.applicable

    def test_inputs_echoed(self):
        coeffs = idealized_coefficients(2)
        result = upper_bound_linf(0.05, 0.1, coeffs)
        assert result.inputs["eps"] == 0.05
        assert result.inputs["delta"] == 0.1
        assert result.inputs["d"] == 2
