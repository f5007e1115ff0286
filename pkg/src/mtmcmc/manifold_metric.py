"""Corrected pseudo-covariances for metric-based proposal kernels.

A local metric G (negative log-likelihood Hessian or Fisher information)
is inverted to obtain a proposal covariance. Three pathologies are handled:

* G numerically singular              -> fall back to the stage sample covariance,
* G indefinite (negative eigenvalues) -> substitute the offending eigenvalues
                                         of G^-1 with the smallest eigenvalue of
                                         the sample covariance,
* eigenvalues of G^-1 so large that the proposal ellipsoid leaves the prior
  box                                 -> shrink those eigenvalues so the ellipsoid
                                         endpoints land on an extended box.

The extended box inflates each side of the prior box by a fraction ``rho``
of the box edge length; adapting to the exact box (``rho = 0``) collapses
proposals near the boundary and traps the chains there.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import gammaincinv


class MetricKind(Enum):
    """Which local curvature matrix drives the proposal covariance."""

    HESSIAN = "hessian"
    FISHER = "fisher"
    SAMPLE_COVARIANCE = "sample-covariance"


class CorrectionStatus(Enum):
    """Strongest correction applied to a pseudo-covariance, in severity order."""

    UNCHANGED = 0
    BOUNDARY_SCALED = 1
    NEG_EIG_SUBSTITUTED = 2
    FALLBACK_SAMPLE_COV = 3


@dataclass(frozen=True)
class CorrectionConfig:
    """Tuning knobs of the pseudo-covariance correction.

    Parameters
    ----------
    eta : float
        Ellipsoid mass parameter in (0, 1): the 1 - eta probability-mass
        ellipsoid of the proposal is fitted to the extended box.
    rho : float
        Boundary extension fraction in [0, 1]; each side of the prior box is
        pushed outward by ``rho * (upper - lower)``.
    eig_tol : float
        Relative eigenvalue tolerance below which the metric is classified
        as singular.
    degenerate_tol : float
        Relative tolerance for treating eigenvalue pairs as degenerate in
        spectral derivative formulas.
    """

    eta: float = 0.3
    rho: float = 0.2
    eig_tol: float = 1e-10
    degenerate_tol: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must be in (0, 1), got {self.eta}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [0, 1], got {self.rho}")


@dataclass(frozen=True)
class EigenDecomp:
    """Eigendecomposition A = Q diag(lambdas) Q^T with descending eigenvalues."""

    Q: np.ndarray
    lambdas: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.Q * self.lambdas) @ self.Q.T


@dataclass(frozen=True)
class CorrectedCovariance:
    """A corrected pseudo-covariance together with its construction record.

    Attributes
    ----------
    sigma_hat : ndarray
        The symmetric positive-definite corrected covariance.
    decomp : EigenDecomp
        Decomposition of the *pre-correction* covariance (the inverted
        metric, after any negative-eigenvalue substitution; the sample
        covariance on the fallback path).
    scaling : ndarray
        Per-eigenvalue shrink constants c_i in (0, 1]; all ones when no
        boundary scaling was applied.
    status : CorrectionStatus
        Strongest correction step that fired.
    """

    sigma_hat: np.ndarray
    decomp: EigenDecomp
    scaling: np.ndarray
    status: CorrectionStatus

    @property
    def corrected(self) -> bool:
        return self.status is not CorrectionStatus.UNCHANGED


def chi2_upper_percentile(eta: float, dof: int) -> float:
    """Point x with P(Chi2_dof > x) = eta, by inverting the regularized
    lower incomplete gamma function."""
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must be in (0, 1), got {eta}")
    if dof < 1:
        raise ValueError(f"dof must be >= 1, got {dof}")
    return 2.0 * float(gammaincinv(0.5 * dof, 1.0 - eta))


def eigendecompose_sym(A: np.ndarray, sym_tol: float = 1e-10) -> EigenDecomp:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Raises
    ------
    ValueError
        If A deviates from symmetry by more than ``sym_tol`` relative to
        its largest entry.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = max(np.max(np.abs(A)), 1.0)
    if np.max(np.abs(A - A.T)) > sym_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    lambdas, Q = np.linalg.eigh(0.5 * (A + A.T))
    order = np.argsort(lambdas)[::-1]
    return EigenDecomp(Q=Q[:, order], lambdas=lambdas[order])


def _invert_metric_eigenvalues(
    G: np.ndarray, sample_cov: np.ndarray, cfg: CorrectionConfig
) -> tuple[EigenDecomp, CorrectionStatus]:
    """Invert the metric in eigenvalue space, absorbing the singular and
    indefinite cases; returns the decomposition of the raw pseudo-covariance."""
    dec = eigendecompose_sym(G)
    abs_l = np.abs(dec.lambdas)
    max_l = abs_l.max() if abs_l.size else 0.0
    if max_l == 0.0 or np.any(abs_l <= cfg.eig_tol * max_l):
        return eigendecompose_sym(sample_cov), CorrectionStatus.FALLBACK_SAMPLE_COV

    inv = 1.0 / dec.lambdas
    status = CorrectionStatus.UNCHANGED
    if np.any(inv < 0.0):
        floor = float(np.min(np.linalg.eigvalsh(sample_cov)))
        if floor <= 0.0:
            # Degenerate sample covariance cannot supply a positive substitute.
            return eigendecompose_sym(sample_cov), CorrectionStatus.FALLBACK_SAMPLE_COV
        inv = np.where(inv < 0.0, floor, inv)
        status = CorrectionStatus.NEG_EIG_SUBSTITUTED

    order = np.argsort(inv)[::-1]
    return EigenDecomp(Q=dec.Q[:, order], lambdas=inv[order]), status


def classify_and_invert_metric(
    G: np.ndarray, sample_cov: np.ndarray, cfg: CorrectionConfig | None = None
) -> tuple[np.ndarray, CorrectionStatus]:
    """Turn a metric into a raw pseudo-covariance.

    Singular metrics (any ``|eigenvalue| <= eig_tol * max|eigenvalue|``)
    yield the sample covariance. Invertible metrics are inverted in
    eigenvalue space; negative eigenvalues of the inverse are replaced by
    the smallest eigenvalue of ``sample_cov``.

    Returns
    -------
    (sigma_raw, status)
        The pseudo-covariance matrix and which branch was taken.
    """
    cfg = cfg or CorrectionConfig()
    dec, status = _invert_metric_eigenvalues(np.asarray(G, float), sample_cov, cfg)
    if status is CorrectionStatus.FALLBACK_SAMPLE_COV:
        return np.asarray(sample_cov, dtype=float), status
    return dec.reconstruct(), status


def extended_box(prior_lower: np.ndarray, prior_upper: np.ndarray, rho: float):
    """Prior box inflated on each side by ``rho`` times the edge length."""
    lower = np.asarray(prior_lower, float)
    upper = np.asarray(prior_upper, float)
    width = upper - lower
    return lower - rho * width, upper + rho * width


def extended_boundary_scaling(
    decomp: EigenDecomp,
    center: np.ndarray,
    prior_lower: np.ndarray,
    prior_upper: np.ndarray,
    cfg: CorrectionConfig | None = None,
) -> np.ndarray:
    """Shrink constants c_i fitting the proposal ellipsoid into the extended box.

    For each eigenpair (lambda_i, q_i) of a covariance centered at
    ``center``, the 1 - eta mass ellipsoid has semi-axis endpoints
    ``center +- sqrt(lambda_i * chi2) q_i``. Whenever an endpoint coordinate
    crosses the extended box, the eigenvalue is shrunk by the smallest
    factor that pulls the endpoint back onto the first crossed face;
    directions already inside keep c_i = 1.

    Returns
    -------
    ndarray
        c with ``scaled lambda_i = c_i * lambda_i``, each c_i in (0, 1].
    """
    cfg = cfg or CorrectionConfig()
    center = np.asarray(center, dtype=float)
    lower = np.asarray(prior_lower, dtype=float)
    upper = np.asarray(prior_upper, dtype=float)
    if np.any(center <= lower) or np.any(center >= upper):
        raise ValueError("ellipsoid center must lie strictly inside the prior box")
    lambdas = decomp.lambdas
    if np.any(lambdas <= 0.0):
        raise ValueError("boundary scaling requires positive eigenvalues")

    n = lambdas.size
    chi2 = chi2_upper_percentile(cfg.eta, n)
    ext_lo, ext_hi = extended_box(lower, upper, cfg.rho)

    c = np.ones(n)
    for i in range(n):
        radius = np.sqrt(lambdas[i] * chi2)
        step = radius * decomp.Q[:, i]
        for endpoint in (center + step, center - step):
            # Squared fractions of the step at which each face is reached.
            viol_lo = endpoint < ext_lo
            viol_hi = endpoint > ext_hi
            for viol, bound in ((viol_lo, ext_lo), (viol_hi, ext_hi)):
                if not np.any(viol):
                    continue
                frac = np.abs((bound[viol] - center[viol]) / step[viol])
                c[i] = min(c[i], float(np.min(frac**2)))
    return np.minimum(c, 1.0)


def correct_pseudo_covariance(
    G: np.ndarray,
    center: np.ndarray,
    prior_lower: np.ndarray,
    prior_upper: np.ndarray,
    sample_cov: np.ndarray,
    cfg: CorrectionConfig | None = None,
) -> CorrectedCovariance:
    """Full correction pipeline: invert the metric, substitute negative
    eigenvalues, then fit the ellipsoid into the extended box.

    The fallback path returns the sample covariance as-is (no boundary
    scaling), mirroring the plain random-walk behaviour it stands in for.
    """
    cfg = cfg or CorrectionConfig()
    dec, status = _invert_metric_eigenvalues(np.asarray(G, float), sample_cov, cfg)
    if status is CorrectionStatus.FALLBACK_SAMPLE_COV:
        return CorrectedCovariance(
            sigma_hat=dec.reconstruct(),
            decomp=dec,
            scaling=np.ones(dec.lambdas.size),
            status=status,
        )
    c = extended_boundary_scaling(dec, center, prior_lower, prior_upper, cfg)
    sigma_hat = (dec.Q * (c * dec.lambdas)) @ dec.Q.T
    sigma_hat = 0.5 * (sigma_hat + sigma_hat.T)
    if np.any(c < 1.0) and status is CorrectionStatus.UNCHANGED:
        status = CorrectionStatus.BOUNDARY_SCALED
    return CorrectedCovariance(sigma_hat=sigma_hat, decomp=dec, scaling=c, status=status)


def hadamard_eig_derivative(
    Q: np.ndarray,
    lambdas: np.ndarray,
    f_vals: np.ndarray,
    fprime_vals: np.ndarray,
    dA: np.ndarray,
    degenerate_tol: float = 1e-8,
) -> np.ndarray:
    """Derivative of a spectral transformation given per-eigenvalue images.

    Evaluates ``Q (J o (Q^T dA Q)) Q^T`` where J carries the divided
    differences ``(f_i - f_j) / (lambda_i - lambda_j)`` off the diagonal and
    the derivatives ``f'_i`` on it; near-degenerate pairs use the averaged
    diagonal rule, where the divided difference is numerically unstable.
    """
    lam = np.asarray(lambdas, dtype=float)
    fv = np.asarray(f_vals, dtype=float)
    fp = np.asarray(fprime_vals, dtype=float)
    diff = lam[:, None] - lam[None, :]
    tol = degenerate_tol * max(np.max(np.abs(lam)), 1e-300)
    degenerate = np.abs(diff) <= tol
    safe = np.where(degenerate, 1.0, diff)
    J = (fv[:, None] - fv[None, :]) / safe
    J = np.where(degenerate, 0.5 * (fp[:, None] + fp[None, :]), J)
    inner = Q.T @ dA @ Q
    out = Q @ (J * inner) @ Q.T
    return 0.5 * (out + out.T)


def transformed_matrix_derivative(
    A: np.ndarray,
    dA_dtheta: np.ndarray,
    f,
    fprime,
    degenerate_tol: float = 1e-8,
) -> np.ndarray:
    """Parameter derivative of f(A) = Q f(Lambda) Q^T for symmetric A.

    Parameters
    ----------
    A : ndarray
        Symmetric matrix, evaluated at the current parameter value.
    dA_dtheta : ndarray
        Symmetric derivative of A with respect to the scalar parameter.
    f, fprime : callable
        Scalar eigenvalue map and its derivative, applied elementwise.
    """
    dec = eigendecompose_sym(A)
    dA = np.asarray(dA_dtheta, dtype=float)
    scale = max(np.max(np.abs(dA)), 1.0)
    if np.max(np.abs(dA - dA.T)) > 1e-10 * scale:
        raise ValueError("dA_dtheta must be symmetric")
    f_vals = np.asarray([f(l) for l in dec.lambdas], dtype=float)
    fp_vals = np.asarray([fprime(l) for l in dec.lambdas], dtype=float)
    return hadamard_eig_derivative(
        dec.Q, dec.lambdas, f_vals, fp_vals, dA, degenerate_tol
    )
