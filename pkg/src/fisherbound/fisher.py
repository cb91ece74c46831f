"""Fisher information matrices, spectral utilities, and estimability tests.

The classical Fisher matrix of a finite-outcome model is computed by
outcome enumeration, F_ij = sum_x dp_i dp_j / p over outcomes above a
probability floor.  Closed-form inverse-QFIM diagonals are provided for
the Pauli schemes, together with the structural Bell-measurement Fisher
matrix U^T D U, the single-copy trace bound on the Fisher diagonal at the
maximally mixed state, and the Moore-Penrose machinery that decides which
coordinates remain unbiasedly estimable when the matrix is singular.
"""

import math
from dataclasses import dataclass

import numpy as np

from .models import DomainError
from .pauli import PauliIndex, num_paulis, pauli_matrix, sign_matrix, validate_rates

__all__ = [
    "FimUndefinedError",
    "FisherMatrix",
    "SpectralStats",
    "TraceBoundResult",
    "bell_fim_structural",
    "depolarizing_qfi_sum",
    "estimable",
    "fim",
    "pseudo_inverse",
    "qfim_inverse_diag_pauli",
    "separable_qfim_inverse_diag",
    "single_copy_trace_bound",
    "spectral_stats",
]

P_FLOOR = 1e-12
EXCLUDED_SCORE_TOL = 1e-6
RANK_TOL = 1e-10
SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-10


class FimUndefinedError(ValueError):
    """The Fisher matrix does not exist at the requested parameter point."""


class FisherMatrix:
    """Symmetric PSD matrix with cached spectral data.

    Eigenvalues are stored ascending.  Inverse-based quantities fall back
    to the Moore-Penrose pseudoinverse when the matrix is numerically
    singular (eigenvalues below rank_tol * lambda_max are treated as 0).
    """

    def __init__(self, matrix, rank_tol: float = RANK_TOL):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"expected a square matrix, got {matrix.shape}")
        scale = max(1.0, float(np.abs(matrix).max()))
        if np.abs(matrix - matrix.T).max() > SYMMETRY_TOL * scale:
            raise ValueError("matrix is not symmetric")
        self.matrix = 0.5 * (matrix + matrix.T)
        self.d = matrix.shape[0]
        self.rank_tol = rank_tol
        self.eigenvalues, self.eigenvectors = np.linalg.eigh(self.matrix)
        lam_max = float(self.eigenvalues[-1]) if self.d else 0.0
        if self.eigenvalues.size and self.eigenvalues[0] < -PSD_TOL * max(1.0, lam_max):
            raise ValueError(
                f"matrix is not positive semidefinite: min eigenvalue "
                f"{self.eigenvalues[0]!r}"
            )
        self._rank_cut = rank_tol * max(lam_max, 0.0)
        self._nonzero = self.eigenvalues > self._rank_cut

    @property
    def rank(self) -> int:
        return int(self._nonzero.sum())

    @property
    def is_singular(self) -> bool:
        return self.rank < self.d

    def pinv_matrix(self) -> np.ndarray:
        inv_eigs = np.where(self._nonzero, 1.0, 0.0)
        inv_eigs = np.divide(inv_eigs, self.eigenvalues,
                             out=np.zeros(self.d), where=self._nonzero)
        return (self.eigenvectors * inv_eigs) @ self.eigenvectors.T

    def inverse_diag(self) -> np.ndarray:
        """Diagonal of the inverse (pseudoinverse when singular)."""
        return np.diag(self.pinv_matrix())

    def opnorm_inverse(self) -> float:
        """Operator norm of the (pseudo)inverse, 1 / smallest kept eigenvalue."""
        kept = self.eigenvalues[self._nonzero]
        if kept.size == 0:
            return 0.0
        return 1.0 / float(kept[0])

    def lambda_max_inverse(self) -> float:
        """Largest eigenvalue of the (pseudo)inverse; equals opnorm_inverse."""
        return self.opnorm_inverse()


def fim(model, theta, p_floor: float = P_FLOOR) -> FisherMatrix:
    """Classical Fisher information matrix of a model at theta.

    Outcomes with probability below p_floor are excluded from the sum.
    If the excluded outcomes carry score mass (excluded probability times
    the largest |dp|/p ratio among them above EXCLUDED_SCORE_TOL) the
    matrix is declared undefined rather than silently truncated; a point
    outside the open domain is undefined as well.
    """
    try:
        theta = model.validate_theta(np.asarray(theta, dtype=float))
    except DomainError as exc:
        raise FimUndefinedError(str(exc))
    analytic = model.analytic_fisher(theta)
    if analytic is not None:
        return FisherMatrix(analytic)
    p = model.probs(theta)
    grads = model.dprobs(theta)
    keep = p > p_floor
    if not np.all(keep):
        excluded_mass = float(p[~keep].sum())
        grad_scale = np.abs(grads[~keep]).max(axis=1)
        ratio = grad_scale / np.maximum(p[~keep], p_floor)
        if excluded_mass * float(ratio.max(initial=0.0)) > EXCLUDED_SCORE_TOL:
            raise FimUndefinedError(
                f"{model.scheme}: FIM undefined at theta; excluded mass "
                f"{excluded_mass!r} carries score (max |dp|/p = {ratio.max()!r})"
            )
    weighted = grads[keep] / p[keep, None]
    return FisherMatrix(weighted.T @ grads[keep])


def qfim_inverse_diag_pauli(theta) -> np.ndarray:
    """Inverse-QFIM diagonal 1 - theta_i^2 for Pauli expectation values."""
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta) > 1.0):
        raise ValueError("Pauli expectation values must lie in [-1, 1]")
    return 1.0 - theta**2


def separable_qfim_inverse_diag(r, lam):
    """Inverse-QFIM diagonal (1 - r_a^2 lam_a^2) / r_a^2 for a fixed probe.

    Returns (values, witness) where witness_a = 1/r_a^2 - 1 is the probe-only
    lower bound on each diagonal.  Components with r_a = 0 are +inf.
    """
    r = np.asarray(r, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if r.shape != lam.shape:
        raise ValueError("r and lam must have matching shapes")
    values = np.full(r.shape, np.inf)
    witness = np.full(r.shape, np.inf)
    ok = r != 0.0
    values[ok] = (1.0 - r[ok] ** 2 * lam[ok] ** 2) / r[ok] ** 2
    witness[ok] = 1.0 / r[ok] ** 2 - 1.0
    return values, witness


def pseudo_inverse(f, rank_tol: float = RANK_TOL) -> FisherMatrix:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix."""
    if not isinstance(f, FisherMatrix):
        f = FisherMatrix(f, rank_tol=rank_tol)
    return FisherMatrix(f.pinv_matrix(), rank_tol=rank_tol)


def estimable(f, a: int, tol: float = 1e-8) -> bool:
    """Whether coordinate a admits an unbiased estimator: F F^+ e_a = e_a."""
    if not isinstance(f, FisherMatrix):
        f = FisherMatrix(f)
    e = np.zeros(f.d)
    e[a] = 1.0
    residual = f.matrix @ (f.pinv_matrix() @ e) - e
    return bool(np.linalg.norm(residual) <= tol)


@dataclass(frozen=True)
class SpectralStats:
    """Inverse-side spectral summary of a Fisher matrix."""

    opnorm_inv: float
    max_inv_diag: float
    max_eig_inv: float
    used_pseudoinverse: bool


def spectral_stats(f) -> SpectralStats:
    """Operator norm of F^-1, its largest diagonal entry, and lambda_max(F^-1).

    For symmetric PSD input these satisfy max_inv_diag <= max_eig_inv ==
    opnorm_inv.  Singular matrices are summarised through the
    pseudoinverse and flagged.
    """
    if not isinstance(f, FisherMatrix):
        f = FisherMatrix(f)
    return SpectralStats(
        opnorm_inv=f.opnorm_inverse(),
        max_inv_diag=float(f.inverse_diag().max()),
        max_eig_inv=f.lambda_max_inverse(),
        used_pseudoinverse=f.is_singular,
    )


def bell_fim_structural(p, n: int) -> FisherMatrix:
    """Fisher matrix of Bell-basis sampling, built from its U^T D U structure.

    The full matrix over all 4^n eigenvalue coordinates factors as
    U^T D U with U the orthonormal Walsh-Hadamard matrix and
    D = diag(1 / (p_a 4^n)); the matrix for the free coordinates is the
    principal submatrix that deletes row and column 0.  Its eigenvalues
    interlace the sorted diagonal of D.
    """
    p = validate_rates(p)
    if np.any(p <= 0.0):
        raise ValueError("structural Fisher matrix requires all rates positive")
    size = num_paulis(n)
    if p.shape != (size,):
        raise ValueError(f"expected {size} rates for n={n}")
    u = sign_matrix(n) / math.sqrt(size)
    d = 1.0 / (p * size)
    full = (u.T * d) @ u
    return FisherMatrix(full[1:, 1:])


@dataclass(frozen=True)
class TraceBoundResult:
    """Sum of Fisher diagonals at the maximally mixed state and its cap."""

    trace_sum: float
    bound: float
    witness_index: int
    witness_value: float


def single_copy_trace_bound(povm, n: int) -> TraceBoundResult:
    """Fisher-diagonal trace bound for single-copy Pauli expectation estimation.

    For any POVM measured on one copy of the maximally mixed n-qubit
    state, sum_a [F]_aa = 2^-n sum_x Tr[Pi_x P_a]^2 / Tr[Pi_x] over the
    non-identity Paulis is at most 2^n - 1, so some coordinate has
    [F]_aa <= (2^n - 1) / (4^n - 1); the returned witness attains the
    minimum diagonal.
    """
    if n > 3:
        raise ValueError("dense POVM evaluation limited to n <= 3")
    dim = 2**n
    povm = [np.asarray(e, dtype=complex) for e in povm]
    total = sum(povm)
    if np.abs(total - np.eye(dim)).max() > 1e-8:
        raise ValueError("POVM elements must sum to the identity")
    for element in povm:
        if np.abs(element - element.conj().T).max() > 1e-8:
            raise ValueError("POVM elements must be Hermitian")
        if np.linalg.eigvalsh(element).min() < -1e-8:
            raise ValueError("POVM elements must be positive semidefinite")

    size = num_paulis(n)
    diag = np.zeros(size - 1)
    for element in povm:
        weight = float(np.real(np.trace(element)))
        if weight <= 1e-14:
            continue
        for a in range(1, size):
            overlap = float(np.real(np.trace(element @ pauli_matrix(PauliIndex(a, n)))))
            diag[a - 1] += overlap**2 / weight
    diag /= dim
    bound = float(2**n - 1)
    trace_sum = float(diag.sum())
    if trace_sum > bound + 1e-8:
        raise AssertionError(
            f"trace bound violated: {trace_sum!r} > {bound!r}; "
            "the POVM evaluation is inconsistent"
        )
    witness = int(np.argmin(diag))
    return TraceBoundResult(
        trace_sum=trace_sum,
        bound=bound,
        witness_index=witness + 1,
        witness_value=float(diag[witness]),
    )


def depolarizing_qfi_sum(weights, nonunital_vectors, n: int) -> float:
    """QFIM-diagonal sum cap at the depolarizing point for separable protocols.

    weights is the probability vector over classical branches and each
    row of nonunital_vectors collects the non-unital Pauli components
    injected by that branch's final processing channel, constrained by
    purity to squared norm at most 2^n - 1.  Returns
    sum_j c_j ||d_j||^2, which never exceeds 2^n - 1.
    """
    weights = np.asarray(weights, dtype=float)
    vectors = np.atleast_2d(np.asarray(nonunital_vectors, dtype=float))
    if weights.ndim != 1 or vectors.shape[0] != weights.size:
        raise ValueError("need one non-unital vector per branch weight")
    if np.any(weights < -1e-12) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("branch weights must form a probability vector")
    cap = float(2**n - 1)
    norms_sq = np.sum(vectors**2, axis=1)
    if np.any(norms_sq > cap + 1e-9):
        raise ValueError(
            f"purity constraint violated: max ||d_j||^2 = {norms_sq.max()!r} > {cap!r}"
        )
    value = float(weights @ norms_sq)
    if value > cap + 1e-9:
        raise AssertionError("convex combination exceeded the purity cap")
    return value
