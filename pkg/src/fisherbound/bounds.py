"""Finite-sample upper and lower bounds on maximum-likelihood sample size.

Four evaluators cover the two error norms: upper_bound_linf and
lower_bound_linf for the per-coordinate criterion
Pr[max_a |theta_hat_a - theta_a| <= eps] >= 1 - delta, and upper_bound_l2
/ lower_bound_l2 for the Euclidean criterion.  Each bound is a closed
form in eps, delta, the parameter dimension d, and model-dependent
coefficients:

    mu_R, V_R  mean and variance of the per-outcome envelope r(x) that
               dominates 0.5 * ||third log-likelihood derivative||_op
               over the relevant parameter ball,
    V_H        E[Tr(B^2)] for the centred Hessian B(x) = l''(x) + F,
    rho        third absolute moment of the projected score,
    sigma      sqrt of the relevant inverse-Fisher scalar,
    C          Berry-Esseen constant (default 0.4748, always overridable).

The Lambert W_0 function enters through the Gaussian-tail inversion.  The
small-eps limits of the four bounds are exposed as asymptotic_* helpers,
with Pauli-scheme specialisations for entangled and separable channel
learning.  Inapplicable regimes (tau0 <= 0, non-finite coefficients)
produce a structured result with applicable=False, never a silent clamp.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .fisher import FisherMatrix, fim
from .pauli import validate_rates
from .special_functions import BERRY_ESSEEN_CONSTANT, lambert_w0

__all__ = [
    "BoundCoefficients",
    "BoundResult",
    "asymptotic_lower_l2",
    "asymptotic_lower_linf",
    "asymptotic_upper_l2",
    "asymptotic_upper_linf",
    "entangled_pauli_l2_lower",
    "entangled_pauli_upper",
    "estimate_coefficients",
    "idealized_coefficients",
    "lower_bound_l2",
    "lower_bound_linf",
    "separable_pauli_lower",
    "upper_bound_l2",
    "upper_bound_linf",
]


@dataclass
class BoundCoefficients:
    """Model-dependent scalars feeding the four bound evaluators.

    sigma_diag and rho_diag hold the per-coordinate values
    sqrt([F^-1]_aa) and E|e_a^T F^-1 score|^3; sigma_top and rho_top are
    the analogues projected on the top eigenvector of F^-1.  norm records
    which parameter ball ("linf" or "l2") the envelope was taken over;
    None means norm-agnostic (exact zeros).
    """

    d: int
    mu_R: float
    V_H: float
    V_R: float
    C: float
    sigma: float
    opnorm_inv: float
    sigma_diag: np.ndarray
    rho_diag: np.ndarray
    sigma_top: float
    rho_top: float
    norm: str | None = None
    envelope_exact: bool = True
    provenance: str = "exact"
    extras: dict = field(default_factory=dict)

    @property
    def rho(self) -> float:
        """Largest per-coordinate third moment (summary scalar)."""
        return float(np.max(self.rho_diag)) if len(self.rho_diag) else 0.0

    def finite(self) -> bool:
        values = [self.mu_R, self.V_H, self.V_R, self.sigma, self.opnorm_inv,
                  self.sigma_top, self.rho_top]
        return bool(
            np.all(np.isfinite(values))
            and np.all(np.isfinite(self.sigma_diag))
            and np.all(np.isfinite(self.rho_diag))
        )


@dataclass
class BoundResult:
    """Outcome of one bound evaluation.

    value is a sample count (>= 1) when applicable, +inf otherwise.
    limiting_term names whichever bracket term produced the max.
    """

    value: float
    applicable: bool
    limiting_term: str
    reason: str = ""
    provenance: str = "exact"
    inputs: dict = field(default_factory=dict)


def _check_criteria(eps: float, delta: float) -> None:
    if not eps > 0.0:
        raise ValueError(f"accuracy eps must be positive, got {eps!r}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"failure probability delta must be in (0, 1), got {delta!r}")


def idealized_coefficients(
    d: int,
    sigma: float = 1.0,
    opnorm_inv: float = 1.0,
    sigma_diag=None,
    sigma_top: float | None = None,
    constant: float = BERRY_ESSEEN_CONSTANT,
) -> BoundCoefficients:
    """Coefficients of an idealized Gaussian-score model.

    mu_R = V_H = V_R = rho = 0; only the inverse-Fisher scalars remain,
    which collapses every bracket to its Lambert-W Gaussian term.
    """
    sigma_diag = (
        np.full(d, sigma) if sigma_diag is None else np.asarray(sigma_diag, dtype=float)
    )
    return BoundCoefficients(
        d=d,
        mu_R=0.0,
        V_H=0.0,
        V_R=0.0,
        C=constant,
        sigma=sigma,
        opnorm_inv=opnorm_inv,
        sigma_diag=sigma_diag,
        rho_diag=np.zeros(d),
        sigma_top=sigma if sigma_top is None else sigma_top,
        rho_top=0.0,
        norm=None,
        envelope_exact=True,
        provenance="idealized",
    )


def estimate_coefficients(
    model,
    theta,
    eps: float,
    norm: str = "linf",
    constant: float = BERRY_ESSEEN_CONSTANT,
    fisher: FisherMatrix | None = None,
) -> BoundCoefficients:
    """Bound coefficients of a model at an interior parameter point.

    V_H and the projected third moments are computed exactly by outcome
    enumeration.  mu_R and V_R come from the per-outcome envelope of
    0.5 * ||third derivative||_op over the parameter ball matching the
    criterion norm (Euclidean radius sqrt(d)*eps for "linf", eps for
    "l2").  Models with affine outcome probabilities supply that envelope
    in closed form; otherwise it is a search-based lower estimate and the
    result is flagged estimated-coefficient.

    sigma is the largest sqrt([F^-1]_aa) at this point; a supremum over
    the parameter space must be taken by the caller (e.g. over a
    documented grid).
    """
    if norm not in ("linf", "l2"):
        raise ValueError(f"norm must be 'linf' or 'l2', got {norm!r}")
    if not eps > 0.0:
        raise ValueError(f"accuracy eps must be positive, got {eps!r}")
    theta = model.validate_theta(np.asarray(theta, dtype=float))
    d = model.d
    radius = math.sqrt(d) * eps if norm == "linf" else eps

    exact_hook = getattr(model, "exact_coefficients", None)
    if exact_hook is not None:
        f = fisher if fisher is not None else fim(model, theta)
        finv = f.pinv_matrix()
        known = exact_hook()
        sigma_diag = np.sqrt(np.diag(finv))
        lam_max_inv = f.lambda_max_inverse()
        rho_scale = 2.0 * math.sqrt(2.0 / math.pi)
        return BoundCoefficients(
            d=d,
            mu_R=known["mu_R"],
            V_H=known["V_H"],
            V_R=known["V_R"],
            C=constant,
            sigma=float(sigma_diag.max()),
            opnorm_inv=f.opnorm_inverse(),
            sigma_diag=sigma_diag,
            rho_diag=np.asarray(known["rho_diag"], dtype=float),
            sigma_top=math.sqrt(lam_max_inv),
            rho_top=rho_scale * lam_max_inv**1.5,
            norm=norm,
            envelope_exact=True,
            provenance="exact",
        )

    f = fisher if fisher is not None else fim(model, theta)
    finv = f.pinv_matrix()
    p = model.probs(theta)
    scores = model.dlogp(theta)

    projected = scores @ finv  # (K, d): column a is e_a^T F^-1 score(x)
    rho_diag = p @ np.abs(projected) ** 3
    sigma_diag = np.sqrt(np.clip(np.diag(finv), 0.0, None))

    top = f.eigenvectors[:, 0]  # top eigenvector of F^-1
    rho_top = float(p @ np.abs(projected @ top) ** 3)
    sigma_top = math.sqrt(f.lambda_max_inverse())

    hessians = model.d2logp(theta)
    centred = hessians + f.matrix[None, :, :]
    v_h = float(p @ (centred**2).sum(axis=(1, 2)))

    envelope, envelope_exact = model.third_derivative_envelope(theta, radius)
    if np.any(np.isinf(envelope) & (p > 0.0)):
        mu_r = math.inf
        v_r = math.inf
    else:
        mu_r = float(p @ envelope)
        v_r = float(p @ (envelope - mu_r) ** 2)

    return BoundCoefficients(
        d=d,
        mu_R=mu_r,
        V_H=v_h,
        V_R=v_r,
        C=constant,
        sigma=float(sigma_diag.max()),
        opnorm_inv=f.opnorm_inverse(),
        sigma_diag=sigma_diag,
        rho_diag=np.asarray(rho_diag, dtype=float),
        sigma_top=sigma_top,
        rho_top=rho_top,
        norm=norm,
        envelope_exact=envelope_exact,
        provenance="exact" if envelope_exact else "estimated-coefficient",
    )


def _eta_mean(coeffs: BoundCoefficients) -> float:
    """(1/d) sum_a C rho_a / sigma_a^3; zero-information coordinates contribute 0."""
    terms = np.zeros(coeffs.d)
    rho = coeffs.rho_diag
    sig = coeffs.sigma_diag
    active = rho > 0.0
    if np.any(active & (sig <= 0.0)):
        return math.inf
    terms[active] = coeffs.C * rho[active] / sig[active] ** 3
    return float(terms.mean())


def _upper_bracket(eps, delta, coeffs, tau0, big_d, inputs):
    """max{(D/tau0)^2, (2 d eta / delta)^2, y*} shared by both upper bounds."""
    d = coeffs.d
    eta = _eta_mean(coeffs)
    if not (math.isfinite(tau0) and math.isfinite(big_d) and math.isfinite(eta)):
        return BoundResult(
            value=math.inf, applicable=False, limiting_term="none",
            reason="non-finite coefficients", provenance=coeffs.provenance,
            inputs=inputs,
        )
    if tau0 <= 0.0:
        return BoundResult(
            value=math.inf, applicable=False, limiting_term="none",
            reason="tau0 <= 0", provenance=coeffs.provenance, inputs=inputs,
        )
    w0 = lambert_w0(8.0 / math.pi * delta**-2 * d**2)
    term_tau = (big_d / tau0) ** 2
    term_eta = (2.0 * d * eta / delta) ** 2
    half = 0.5 / tau0
    a = d * eta / delta + big_d * half + coeffs.sigma * math.sqrt(w0) * half
    disc = a * a - (2.0 * d * eta / delta) * (big_d / tau0)
    if disc < 0.0:
        if disc < -1e-9 * max(a * a, 1.0):
            return BoundResult(
                value=math.inf, applicable=False, limiting_term="none",
                reason="negative discriminant", provenance=coeffs.provenance,
                inputs=inputs,
            )
        disc = 0.0  # provably >= 0; tiny negatives are round-off
    y_star = (a + math.sqrt(disc)) ** 2
    terms = {"tau-regime": term_tau, "eta-regime": term_eta, "y-star": y_star}
    limiting = max(terms, key=terms.get)
    return BoundResult(
        value=max(terms[limiting], 1.0),
        applicable=True,
        limiting_term=limiting,
        provenance=coeffs.provenance,
        inputs=inputs,
    )


def upper_bound_linf(eps: float, delta: float, coeffs: BoundCoefficients) -> BoundResult:
    """Sample size guaranteeing the max-norm criterion at one parameter point.

    tau0 = (1 - eps * (d mu_R / 2) ||F^-1||) * eps and
    D = (sqrt(4 V_H / delta) sqrt(d) + 0.5 sqrt(4 V_R / delta) d eps)
        * ||F^-1|| * eps.
    The parameter-space supremum is the caller's responsibility.
    """
    _check_criteria(eps, delta)
    _check_norm(coeffs, "linf")
    d = coeffs.d
    tau0 = (1.0 - eps * (d * coeffs.mu_R / 2.0) * coeffs.opnorm_inv) * eps
    big_d = (
        math.sqrt(4.0 * coeffs.V_H / delta) * math.sqrt(d)
        + 0.5 * math.sqrt(4.0 * coeffs.V_R / delta) * d * eps
    ) * coeffs.opnorm_inv * eps
    inputs = _echo(eps, delta, coeffs, "linf", "upper")
    return _upper_bracket(eps, delta, coeffs, tau0, big_d, inputs)


def upper_bound_l2(eps: float, delta: float, coeffs: BoundCoefficients) -> BoundResult:
    """Sample size guaranteeing the Euclidean criterion at one parameter point.

    Reduces to the max-norm bound at accuracy eps/sqrt(d):
    tau0 = (1 - eps * (sqrt(d) mu_R / 2) ||F^-1||) * eps / sqrt(d) and
    D = (sqrt(4 V_H / delta) + 0.5 sqrt(4 V_R / delta) eps) * ||F^-1|| * eps.
    """
    _check_criteria(eps, delta)
    _check_norm(coeffs, "l2")
    d = coeffs.d
    sqrt_d = math.sqrt(d)
    tau0 = (1.0 - eps * (sqrt_d * coeffs.mu_R / 2.0) * coeffs.opnorm_inv) * eps / sqrt_d
    big_d = (
        math.sqrt(4.0 * coeffs.V_H / delta)
        + 0.5 * math.sqrt(4.0 * coeffs.V_R / delta) * eps
    ) * coeffs.opnorm_inv * eps
    inputs = _echo(eps, delta, coeffs, "l2", "upper")
    return _upper_bracket(eps, delta, coeffs, tau0, big_d, inputs)


def _lower_terms(delta, tau0, big_d, eta, sigma, w0):
    """(z*, fourth-power term) of the lower-bound bracket for one direction."""
    beta = (
        -big_d / tau0
        - eta / (2.0 * delta)
        + math.sqrt(w0) * sigma / (2.0 * tau0)
    )
    disc = beta * beta - 2.0 * eta * big_d / (delta * tau0)
    if beta > 0.0 and disc >= 0.0:
        z_star = (beta + math.sqrt(disc)) ** 2
    else:
        z_star = 0.0  # the quadratic imposes no constraint in this regime
    fourth = (2.0 * sigma / (math.sqrt(big_d**2 + 4.0 * tau0 * sigma) + big_d)) ** 4
    return z_star, fourth


def lower_bound_linf(
    eps: float, delta: float, coeffs: BoundCoefficients, a: int | None = None
) -> BoundResult:
    """Sample size any max-norm guarantee must exceed.

    Valid for any single coordinate a at any parameter point, with
    sigma_a = sqrt([F^-1]_aa), eta = 2 C rho_a / sigma_a^3,
    tau0 = (1 + eps * (d mu_R / 2) ||F^-1||) * eps, and
    D = (sqrt(2 V_H / delta) sqrt(d) + 0.5 sqrt(2 V_R / delta) d eps)
        * ||F^-1|| * eps.
    With a=None the bound is maximised over coordinates.
    """
    _check_criteria(eps, delta)
    _check_norm(coeffs, "linf")
    d = coeffs.d
    inputs = _echo(eps, delta, coeffs, "linf", "lower", coordinate=a)
    if not coeffs.finite():
        return BoundResult(
            value=math.inf, applicable=False, limiting_term="none",
            reason="non-finite coefficients", provenance=coeffs.provenance,
            inputs=inputs,
        )
    tau0 = (1.0 + eps * (d * coeffs.mu_R / 2.0) * coeffs.opnorm_inv) * eps
    big_d = (
        math.sqrt(2.0 * coeffs.V_H / delta) * math.sqrt(d)
        + 0.5 * math.sqrt(2.0 * coeffs.V_R / delta) * d * eps
    ) * coeffs.opnorm_inv * eps
    w0 = lambert_w0(delta**-2 / (2.0 * math.pi))

    coords = range(d) if a is None else [a]
    best_value, best_term = 0.0, "vacuous"
    for idx in coords:
        sigma_a = float(coeffs.sigma_diag[idx])
        if sigma_a <= 0.0:
            continue  # deterministic coordinate: no requirement
        eta = 2.0 * coeffs.C * float(coeffs.rho_diag[idx]) / sigma_a**3
        z_star, fourth = _lower_terms(delta, tau0, big_d, eta, sigma_a, w0)
        if z_star >= fourth and z_star > best_value:
            best_value, best_term = z_star, "z-star"
        elif fourth > z_star and fourth > best_value:
            best_value, best_term = fourth, "fourth-power"
    return BoundResult(
        value=max(best_value, 1.0),
        applicable=True,
        limiting_term=best_term,
        provenance=coeffs.provenance,
        inputs=inputs,
    )


def lower_bound_l2(eps: float, delta: float, coeffs: BoundCoefficients) -> BoundResult:
    """Sample size any Euclidean guarantee must exceed.

    Projects the score on the top eigenvector of F^-1, so
    sigma = sqrt(lambda_max(F^-1)) and eta = 2 C rho_top / sigma^3, with
    tau0 = (1 + eps * (mu_R / 2) ||F^-1||) * eps and
    D = (sqrt(2 V_H / delta) + 0.5 sqrt(2 V_R / delta) eps) * ||F^-1|| * eps.
    """
    _check_criteria(eps, delta)
    _check_norm(coeffs, "l2")
    inputs = _echo(eps, delta, coeffs, "l2", "lower")
    if not coeffs.finite():
        return BoundResult(
            value=math.inf, applicable=False, limiting_term="none",
            reason="non-finite coefficients", provenance=coeffs.provenance,
            inputs=inputs,
        )
    sigma = coeffs.sigma_top
    if sigma <= 0.0:
        return BoundResult(
            value=1.0, applicable=True, limiting_term="vacuous",
            provenance=coeffs.provenance, inputs=inputs,
        )
    tau0 = (1.0 + eps * (coeffs.mu_R / 2.0) * coeffs.opnorm_inv) * eps
    big_d = (
        math.sqrt(2.0 * coeffs.V_H / delta)
        + 0.5 * math.sqrt(2.0 * coeffs.V_R / delta) * eps
    ) * coeffs.opnorm_inv * eps
    w0 = lambert_w0(delta**-2 / (2.0 * math.pi))
    eta = 2.0 * coeffs.C * coeffs.rho_top / sigma**3
    z_star, fourth = _lower_terms(delta, tau0, big_d, eta, sigma, w0)
    value = max(z_star, fourth)
    term = "z-star" if z_star >= fourth else "fourth-power"
    if value <= 0.0:
        term = "vacuous"
    return BoundResult(
        value=max(value, 1.0),
        applicable=True,
        limiting_term=term,
        provenance=coeffs.provenance,
        inputs=inputs,
    )


def _check_norm(coeffs: BoundCoefficients, norm: str) -> None:
    if coeffs.norm is not None and coeffs.norm != norm:
        raise ValueError(
            f"coefficients were computed for the {coeffs.norm!r} ball "
            f"but the bound uses {norm!r}"
        )


def _echo(eps, delta, coeffs, norm, kind, coordinate=None):
    return {
        "eps": eps,
        "delta": delta,
        "d": coeffs.d,
        "norm": norm,
        "kind": kind,
        "coordinate": coordinate,
        "C": coeffs.C,
        "mu_R": coeffs.mu_R,
        "V_H": coeffs.V_H,
        "V_R": coeffs.V_R,
        "sigma": coeffs.sigma,
        "opnorm_inv": coeffs.opnorm_inv,
    }


# ---------------------------------------------------------------------------
# small-eps limits and Pauli-scheme specialisations


def asymptotic_upper_linf(eps: float, delta: float, d: int, sup_inv_diag: float) -> float:
    """Small-eps upper limit W0(8 pi^-1 delta^-2 d^2) * sup [F^-1]_aa / eps^2."""
    _check_criteria(eps, delta)
    return lambert_w0(8.0 / math.pi * delta**-2 * d**2) * sup_inv_diag / eps**2


def asymptotic_lower_linf(eps: float, delta: float, inv_diag_aa: float) -> float:
    """Small-eps lower limit W0(delta^-2 / 2 pi) * [F^-1]_aa / eps^2."""
    _check_criteria(eps, delta)
    return lambert_w0(delta**-2 / (2.0 * math.pi)) * inv_diag_aa / eps**2


def asymptotic_upper_l2(eps: float, delta: float, d: int, sup_inv_diag: float) -> float:
    """Small-eps Euclidean upper limit, d times the max-norm one."""
    return d * asymptotic_upper_linf(eps, delta, d, sup_inv_diag)


def asymptotic_lower_l2(eps: float, delta: float, lambda_max_inv: float) -> float:
    """Small-eps Euclidean lower limit W0(delta^-2 / 2 pi) lambda_max(F^-1) / eps^2."""
    return asymptotic_lower_linf(eps, delta, lambda_max_inv)


def entangled_pauli_upper(n: int, eps: float, delta: float) -> float:
    """Entanglement-assisted Pauli eigenvalue learning, small-eps upper bound.

    W0(8 pi^-1 delta^-2 16^n) / eps^2; the supremum of the largest
    inverse-Fisher diagonal equals 1 for the Bell-measurement scheme.
    """
    _check_criteria(eps, delta)
    return lambert_w0(8.0 / math.pi * delta**-2 * 16.0**n) / eps**2


def separable_pauli_lower(n: int, eps: float, delta: float) -> float:
    """Single-use unentangled Pauli eigenvalue learning, small-eps lower bound.

    W0(delta^-2 / 2 pi) * 2^n / eps^2: purity forces some probe component
    below 2^(-n/2), which inflates the matching inverse-Fisher diagonal
    to at least 2^n - 1.
    """
    _check_criteria(eps, delta)
    return lambert_w0(delta**-2 / (2.0 * math.pi)) * 2.0**n / eps**2


def entangled_pauli_l2_lower(n: int, rates, eps: float, delta: float) -> float:
    """Euclidean-criterion lower bound for the entangled scheme.

    Eigenvalue interlacing of the Bell Fisher matrix against its rank-one
    completion gives lambda_max(F^-1) >= 4^n * p_(2) with p_(2) the
    second-largest error rate, hence
    W0(delta^-2 / 2 pi) * 4^n * p_(2) / eps^2.
    """
    _check_criteria(eps, delta)
    rates = validate_rates(rates)
    second = float(np.sort(rates)[-2])
    return lambert_w0(delta**-2 / (2.0 * math.pi)) * 4.0**n * second / eps**2
