"""Fisher information of the two-port homodyne model.

Exact parameter derivatives of the outcome statistics, the classical Fisher
matrix split F = F_sigma + F_mu (noise and signal sensitivities), the
N-independent leading-order coefficient matrices of the tuned working point,
marginal Cramer-Rao bounds, and the singularity classification of the tuning
constants.

At the tuned working point (theta_i = f_i + k_i/n_s, phi3 = pi/4 + k3/n_s,
n_s photons in squeezing, n_c in displacement) the exact matrices scale as
F_sigma ~ n_s^2 * coeff_sigma(k) and F_mu ~ n_s*n_c * coeff_mu(k, phi1), and
the total information per photon-squared approaches
coeff_total = beta^2 * coeff_sigma + beta*(1-beta) * coeff_mu.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import IllConditionedFisherError, SingularCoefficientError
from .model import (PARAMETER_NAMES, HomodyneSettings, NetworkParams,
                    ProbeConfig, TuningConstants, _inverse_2x2, _readonly,
                    _stats_scalars)

CONDITION_LIMIT = 1e12


def _derivative_scalars(phi0: float, phi1: float, phi2: float, phi3: float,
                        theta1: float, theta2: float, alpha: float, r: float):
    """Analytic derivatives of the closed-form statistics, as plain floats.

    Returns (dmean, dcov): dmean[i] = (dm1, dm2) and dcov[i] = (ds11, ds12,
    ds22) for each parameter i in (phi0, phi1, phi2, phi3). dcov[1] is exactly
    zero: the outcome covariance does not depend on phi1.
    """
    amp = math.sqrt(2.0) * alpha
    c3, s3 = math.cos(phi3), math.sin(phi3)
    a1 = theta1 - phi0 - phi2 / 2.0
    a2 = theta2 - phi0 + phi2 / 2.0
    h = phi1 / 2.0
    cm1, cp1 = math.cos(a1 - h), math.cos(a1 + h)
    sm1, sp1 = math.sin(a1 - h), math.sin(a1 + h)
    cm2, cp2 = math.cos(a2 - h), math.cos(a2 + h)
    sm2, sp2 = math.sin(a2 - h), math.sin(a2 + h)
    dmean = (
        (amp * (c3 * sm1 + s3 * sp1), amp * (c3 * sp2 - s3 * sm2)),
        (amp / 2.0 * (c3 * sm1 - s3 * sp1), -amp / 2.0 * (c3 * sp2 + s3 * sm2)),
        (amp / 2.0 * (c3 * sm1 + s3 * sp1), amp / 2.0 * (-c3 * sp2 + s3 * sm2)),
        (amp * (c3 * cp1 - s3 * cm1), -amp * (s3 * cp2 + c3 * cm2)),
    )
    sh = math.sinh(2.0 * r)
    s2p3, c2p3 = math.sin(2.0 * phi3), math.cos(2.0 * phi3)
    sb1 = math.sin(2.0 * theta1 - 2.0 * phi0 - phi2)
    sb2 = math.sin(2.0 * theta2 - 2.0 * phi0 + phi2)
    cb1 = math.cos(2.0 * theta1 - 2.0 * phi0 - phi2)
    cb2 = math.cos(2.0 * theta2 - 2.0 * phi0 + phi2)
    sbc = math.sin(theta1 + theta2 - 2.0 * phi0)
    cbc = math.cos(theta1 + theta2 - 2.0 * phi0)
    dcov = (
        (-s2p3 * sh * sb1, -c2p3 * sh * sbc, s2p3 * sh * sb2),
        (0.0, 0.0, 0.0),
        (-0.5 * s2p3 * sh * sb1, 0.0, -0.5 * s2p3 * sh * sb2),
        (-c2p3 * sh * cb1, s2p3 * sh * cbc, c2p3 * sh * cb2),
    )
    return dmean, dcov


@dataclass(frozen=True)
class StatsDerivatives:
    """Partial derivatives of the outcome statistics.

    dmean[i] is the 2-vector of mean derivatives and dcov[i] the symmetric
    2x2 covariance derivative with respect to parameter i. dcov[1] (the phi1
    slot) is identically zero.
    """

    dmean: np.ndarray
    dcov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dmean", _readonly(self.dmean))
        object.__setattr__(self, "dcov", _readonly(self.dcov))


def stats_derivatives(params: NetworkParams, settings: HomodyneSettings,
                      config: ProbeConfig) -> StatsDerivatives:
    """Analytic derivatives of the closed-form outcome statistics."""
    dmean, dcov = _derivative_scalars(
        params.phi0, params.phi1, params.phi2, params.phi3,
        settings.theta1, settings.theta2, config.alpha, config.r)
    dm = np.array(dmean)
    dc = np.empty((4, 2, 2))
    for i, (d11, d12, d22) in enumerate(dcov):
        dc[i, 0, 0] = d11
        dc[i, 0, 1] = dc[i, 1, 0] = d12
        dc[i, 1, 1] = d22
    return StatsDerivatives(dmean=dm, dcov=dc)


@dataclass(frozen=True)
class FisherSplit:
    """Exact Fisher matrix and its noise/signal split: F = F_sigma + F_mu."""

    f_total: np.ndarray
    f_sigma: np.ndarray
    f_mu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f_total", _readonly(self.f_total))
        object.__setattr__(self, "f_sigma", _readonly(self.f_sigma))
        object.__setattr__(self, "f_mu", _readonly(self.f_mu))


def fisher_matrix(params: NetworkParams, settings: HomodyneSettings,
                  config: ProbeConfig) -> FisherSplit:
    """Classical Fisher matrix of one homodyne outcome pair.

    F_sigma[i, j] = tr(S^-1 dS_i S^-1 dS_j)/2 and
    F_mu[i, j] = dmu_i^T S^-1 dmu_j, assembled from the analytic derivatives.
    Raises DegenerateCovarianceError when the outcome covariance is below the
    invertibility guard.
    """
    m1, m2, s11, s12, s22 = _stats_scalars(
        params.phi0, params.phi1, params.phi2, params.phi3,
        settings.theta1, settings.theta2, config.alpha, config.r)
    p11, p12, p22, _ = _inverse_2x2(s11, s12, s22)
    dmean, dcov = _derivative_scalars(
        params.phi0, params.phi1, params.phi2, params.phi3,
        settings.theta1, settings.theta2, config.alpha, config.r)
    # q = S^-1 dS_i, stored as the four entries of a (generally asymmetric)
    # 2x2 product for each parameter.
    q = []
    for d11, d12, d22 in dcov:
        q.append((p11 * d11 + p12 * d12, p11 * d12 + p12 * d22,
                  p12 * d11 + p22 * d12, p12 * d12 + p22 * d22))
    fs = np.empty((4, 4))
    fm = np.empty((4, 4))
    for i in range(4):
        qi = q[i]
        ui, vi = dmean[i]
        for j in range(i, 4):
            qj = q[j]
            uj, vj = dmean[j]
            fs[i, j] = fs[j, i] = 0.5 * (qi[0] * qj[0] + qi[1] * qj[2]
                                         + qi[2] * qj[1] + qi[3] * qj[3])
            fm[i, j] = fm[j, i] = (p11 * ui * uj + p22 * vi * vj
                                   + p12 * (ui * vj + vi * uj))
    return FisherSplit(f_total=fs + fm, f_sigma=fs, f_mu=fm)


def lambda_value(k: TuningConstants) -> float:
    """Common positive denominator of the leading-order coefficients."""
    return ((1.0 + 4.0 * k.k1 ** 2) * (1.0 + 4.0 * k.k2 ** 2)
            + 8.0 * (1.0 - 4.0 * k.k1 * k.k2) * k.k3 ** 2 + 16.0 * k.k3 ** 4)


@dataclass(frozen=True)
class SigmaCoefficients:
    """Leading-order noise-information coefficients.

    matrix = (1/lam^2) * [[d1, 0, a, b], [0, 0, 0, 0], [a, 0, d3, c],
    [b, 0, c, d4]]; row/column 1 (the phi1 slot) is exactly zero because the
    outcome covariance carries no phi1 information.
    """

    lam: float
    d1: float
    d3: float
    d4: float
    a: float
    b: float
    c: float
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(self.matrix))


def coefficient_sigma(k: TuningConstants) -> SigmaCoefficients:
    """Evaluate the noise-term coefficient polynomials in (k1, k2, k3)."""
    k1, k2, k3 = k.k1, k.k2, k.k3
    lam = lambda_value(k)
    d1 = 32.0 * (k2 ** 2 + k1 ** 2 * (1.0 + 16.0 * k2 ** 2 * (1.0 + k1 ** 2 + k2 ** 2))
                 + 2.0 * k3 ** 2
                 - 32.0 * k1 * k2 * (1.0 + k1 ** 2 - k1 * k2 + k2 ** 2) * k3 ** 2
                 + 16.0 * (1.0 + k1 ** 2 - 4.0 * k1 * k2 + k2 ** 2) * k3 ** 4
                 + 32.0 * k3 ** 6)
    d3 = 8.0 * (k2 ** 2 + k1 ** 2 * (1.0 + 16.0 * k2 ** 2 * (1.0 + k1 ** 2 + k2 ** 2))
                - 8.0 * (-1.0 + 4.0 * k1 * k2) * (k1 ** 2 + k2 ** 2) * k3 ** 2
                + 16.0 * (k1 ** 2 + k2 ** 2) * k3 ** 4)
    d4 = 16.0 * ((1.0 + 4.0 * k1 ** 2) * (k1 + k2) ** 2 * (1.0 + 4.0 * k2 ** 2)
                 - 4.0 * (-1.0 + 2.0 * (k1 ** 2 + 6.0 * k1 * k2 + 4.0 * k1 ** 3 * k2
                                        + k2 ** 2 + 4.0 * k1 * k2 ** 3)) * k3 ** 2
                 + 16.0 * (2.0 + k1 ** 2 - 6.0 * k1 * k2 + k2 ** 2) * k3 ** 4
                 + 64.0 * k3 ** 6)
    a = -16.0 * (k1 ** 2 - k2 ** 2) * (-1.0 + 4.0 * k1 * k2 - 4.0 * k3 ** 2) \
        * (1.0 + 4.0 * k1 * k2 - 4.0 * k3 ** 2)
    b = 64.0 * (k1 + k2) * k3 * (-1.0 + 4.0 * k1 * k2 - 4.0 * k3 ** 2) \
        * (1.0 + 4.0 * k1 * k2 - 4.0 * k3 ** 2)
    c = -16.0 * (k1 - k2) * k3 \
        * (-1.0 - 2.0 * k2 + k1 * (-2.0 + 4.0 * k2) - 4.0 * k3 ** 2) \
        * (-1.0 + 2.0 * k2 + k1 * (2.0 + 4.0 * k2) - 4.0 * k3 ** 2)
    matrix = np.array([
        [d1, 0.0, a, b],
        [0.0, 0.0, 0.0, 0.0],
        [a, 0.0, d3, c],
        [b, 0.0, c, d4],
    ]) / lam ** 2
    return SigmaCoefficients(lam=lam, d1=d1, d3=d3, d4=d4, a=a, b=b, c=c,
                             matrix=matrix)


@dataclass(frozen=True)
class MuCoefficients:
    """Leading-order signal-information coefficients.

    matrix has a single nonzero entry (2/lam)*d2 at the phi1 slot (1, 1):
    asymptotically the mean carries leading information about phi1 only.
    """

    lam: float
    d2: float
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(self.matrix))


def coefficient_mu(k: TuningConstants, phi1: float) -> MuCoefficients:
    """Evaluate the signal-term coefficient; depends on phi1 unless k1 = k2
    and k3 = 0 (the figure defaults, where the dependence cancels)."""
    k1, k2, k3 = k.k1, k.k2, k.k3
    lam = lambda_value(k)
    d2 = (1.0 + 2.0 * k1 ** 2 + 2.0 * k2 ** 2 + 4.0 * k3 ** 2
          + 2.0 * (k1 + k2) * ((k1 - k2) * math.cos(phi1)
                               + 2.0 * k3 * math.sin(phi1)))
    matrix = np.zeros((4, 4))
    matrix[1, 1] = 2.0 * d2 / lam
    return MuCoefficients(lam=lam, d2=d2, matrix=matrix)


class SingularityClass(enum.IntEnum):
    """Identifiability classification of a tuning-constant triple."""

    NONSINGULAR = 0
    ANTISYMMETRIC = 1   # k1 = -k2
    QUADRIC = 2         # k3^2 = k1 * k2
    BOTH = 3

    @property
    def is_singular(self) -> bool:
        return self is not SingularityClass.NONSINGULAR


@dataclass(frozen=True)
class SingularityReport:
    """Determinant factor and classification of the tuning constants.

    det_factor = 16384 * (k1+k2)^2 * (k1*k2 - k3^2)^2 * lam^3 is the exact
    determinant of the 3x3 (phi0, phi2, phi3) sub-block of lam^2 times the
    noise coefficient matrix; it vanishes exactly on the two loci.
    """

    det_factor: float
    classification: SingularityClass


def singularity_check(k: TuningConstants) -> SingularityReport:
    """Classify the tuning constants against the two singular loci."""
    lam = lambda_value(k)
    anti = k.k1 + k.k2
    quad = k.k1 * k.k2 - k.k3 ** 2
    det_factor = 16384.0 * anti ** 2 * quad ** 2 * lam ** 3
    scale = 1.0 + k.k1 ** 2 + k.k2 ** 2 + k.k3 ** 2
    on_anti = abs(anti) <= 1e-9 * scale
    on_quad = abs(quad) <= 1e-9 * scale
    if on_anti and on_quad:
        cls = SingularityClass.BOTH
    elif on_anti:
        cls = SingularityClass.ANTISYMMETRIC
    elif on_quad:
        cls = SingularityClass.QUADRIC
    else:
        cls = SingularityClass.NONSINGULAR
    return SingularityReport(det_factor=det_factor, classification=cls)


@dataclass(frozen=True)
class CoefficientMatrices:
    """Leading-order coefficient matrices at a resource split beta.

    f_total_coeff = beta^2 * f_sigma_coeff + beta*(1-beta) * f_mu_coeff;
    inverse_diagonal holds diag(f_total_coeff^-1), the per-parameter
    asymptotic variance prefactors.
    """

    lam: float
    d1: float
    d2: float
    d3: float
    d4: float
    a: float
    b: float
    c: float
    f_sigma_coeff: np.ndarray
    f_mu_coeff: np.ndarray
    f_total_coeff: np.ndarray
    inverse_diagonal: np.ndarray

    def __post_init__(self):
        for name in ("f_sigma_coeff", "f_mu_coeff", "f_total_coeff",
                     "inverse_diagonal"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))


def coefficient_total(k: TuningConstants, beta: float,
                      phi1: float) -> CoefficientMatrices:
    """Assemble the total leading-order coefficient matrix and its inverse.

    beta in [0, 1] is accepted; the boundary values make the signal term
    vanish (zero row/column for phi1), which raises SingularCoefficientError
    with reason "resource-boundary". Singular tuning constants raise the same
    error carrying their locus classification.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"squeezing fraction must be in [0, 1], got {beta}")
    sig = coefficient_sigma(k)
    mu = coefficient_mu(k, phi1)
    total = beta ** 2 * sig.matrix + beta * (1.0 - beta) * mu.matrix
    report = singularity_check(k)
    if beta * (1.0 - beta) == 0.0:
        raise SingularCoefficientError(
            f"coefficient matrix is singular: beta = {beta} allocates no "
            "photons to one resource, so the phi1 row/column vanishes",
            classification=report.classification, reason="resource-boundary")
    if report.classification.is_singular:
        raise SingularCoefficientError(
            "coefficient matrix is singular for these tuning constants: "
            f"{report.classification.name.lower()} locus "
            f"(k1={k.k1}, k2={k.k2}, k3={k.k3})",
            classification=report.classification,
            reason=report.classification.name.lower())
    cond = np.linalg.cond(total)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularCoefficientError(
            f"coefficient matrix is numerically singular (condition {cond:.3e})",
            classification=report.classification, reason="ill-conditioned")
    inverse = np.linalg.solve(total, np.eye(4))
    return CoefficientMatrices(
        lam=sig.lam, d1=sig.d1, d2=mu.d2, d3=sig.d3, d4=sig.d4,
        a=sig.a, b=sig.b, c=sig.c,
        f_sigma_coeff=sig.matrix, f_mu_coeff=mu.matrix, f_total_coeff=total,
        inverse_diagonal=np.diag(inverse).copy())


def coefficient_matrix(k: TuningConstants, beta: float, phi1: float) -> np.ndarray:
    """Total coefficient matrix without the invertibility requirement.

    Used by singularity scans that need eigenvalues on the singular loci.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"squeezing fraction must be in [0, 1], got {beta}")
    sig = coefficient_sigma(k)
    mu = coefficient_mu(k, phi1)
    return beta ** 2 * sig.matrix + beta * (1.0 - beta) * mu.matrix


@dataclass(frozen=True)
class CrbReport:
    """Marginal and scalar Cramer-Rao bounds for M repeated outcome pairs."""

    marginal_bounds: np.ndarray
    trace_bound: float
    condition_number: float
    repetitions: int

    def __post_init__(self):
        object.__setattr__(self, "marginal_bounds",
                           _readonly(self.marginal_bounds))


def crb(fisher: FisherSplit, repetitions: int) -> CrbReport:
    """Cramer-Rao bounds from an exact Fisher matrix.

    marginal_bounds[i] = [F^-1]_{ii} / M; trace_bound = tr(F^-1) / M. The 4x4
    inverse uses a pivoted linear solve; a condition number above 1e12 is
    refused with the near-null parameter direction named, because bounds near
    a singular configuration are meaningless.
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    f = np.asarray(fisher.f_total, dtype=float)
    cond = float(np.linalg.cond(f))
    if not math.isfinite(cond) or cond > CONDITION_LIMIT:
        eigvals, eigvecs = np.linalg.eigh((f + f.T) / 2.0)
        direction = eigvecs[:, int(np.argmin(np.abs(eigvals)))]
        dominant = PARAMETER_NAMES[int(np.argmax(np.abs(direction)))]
        combo = " ".join(f"{c:+.3f}*{n}" for c, n in zip(direction, PARAMETER_NAMES))
        raise IllConditionedFisherError(
            f"Fisher matrix condition number {cond:.3e} exceeds "
            f"{CONDITION_LIMIT:.0e}; unidentifiable direction ~ {combo} "
            f"(dominated by {dominant})")
    inverse = np.linalg.solve(f, np.eye(4))
    inverse = (inverse + inverse.T) / 2.0
    return CrbReport(marginal_bounds=np.diag(inverse).copy() / repetitions,
                     trace_bound=float(np.trace(inverse)) / repetitions,
                     condition_number=cond,
                     repetitions=repetitions)


def trace_bound_vs_beta(k: TuningConstants, phi1: float, betas) -> np.ndarray:
    """Numeric sweep of the asymptotic scalar bound tr(coeff_total^-1) over
    resource splits. Singular splits yield inf. No closed form is claimed;
    the minimum typically sits above beta = 1/2 because three of the four
    parameters draw their leading information from the squeezing term."""
    out = np.empty(len(betas))
    for i, beta in enumerate(betas):
        try:
            coeff = coefficient_total(k, float(beta), phi1)
        except SingularCoefficientError:
            out[i] = np.inf
            continue
        out[i] = float(np.sum(coeff.inverse_diagonal))
    return out
