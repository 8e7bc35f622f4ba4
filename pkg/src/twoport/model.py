"""Gaussian model of two-port homodyne detection behind a U(2) network.

A displaced two-mode squeezed probe enters a lossless two-channel network
parameterized by four real angles (phi0, phi1, phi2, phi3); both output ports
are measured by homodyne detectors with local-oscillator phases (theta1,
theta2). Every measurement outcome is a pair of reals distributed as a
bivariate normal whose mean and covariance this module computes two ways:

- a phase-space pipeline (probe state -> symplectic network action ->
  measurement projection), and
- direct trigonometric closed forms (`closed_form_stats`), which serve as the
  ground truth the pipeline is validated against.

Conventions: quadrature ordering (x1, p1, x2, p2), vacuum quadrature variance
1/2, equal real displacements on both modes, real squeezing parameter r >= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DegenerateCovarianceError

VACUUM_VARIANCE = 0.5
LOG_2PI = math.log(2.0 * math.pi)

# Canonical symplectic form in (x1, p1, x2, p2) ordering.
OMEGA = np.array([
    [0.0, 1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0, 0.0],
])
OMEGA.setflags(write=False)


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class NetworkParams:
    """The four real network parameters (phi0, phi1, phi2, phi3).

    phi0 is the global phase (observable because the local oscillator provides
    a phase reference), phi1 and phi2 are internal phases, and phi3 is the
    mode-mixing angle: transmittance cos^2(phi3) and reflectance sin^2(phi3).
    Physical working points keep phi1, phi2 in [0, 2*pi) and phi3 in
    [0, pi/2]; evaluation is defined for all real values (the statistics are
    trigonometric), which the estimation search relies on. Values are stored
    unwrapped; branch reduction happens only when comparing estimates.
    """

    phi0: float
    phi1: float
    phi2: float
    phi3: float

    @property
    def phi_tau(self) -> float:
        """Sum phase (phi1 + phi2) / 2 (derived, never stored)."""
        return (self.phi1 + self.phi2) / 2.0

    @property
    def phi_rho(self) -> float:
        """Difference phase (phi1 - phi2) / 2 (derived, never stored)."""
        return (self.phi1 - self.phi2) / 2.0

    def as_array(self) -> np.ndarray:
        return np.array([self.phi0, self.phi1, self.phi2, self.phi3])

    @staticmethod
    def from_array(values) -> "NetworkParams":
        v0, v1, v2, v3 = (float(v) for v in values)
        return NetworkParams(v0, v1, v2, v3)

    def shifted(self, delta) -> "NetworkParams":
        d0, d1, d2, d3 = (float(d) for d in delta)
        return NetworkParams(self.phi0 + d0, self.phi1 + d1,
                             self.phi2 + d2, self.phi3 + d3)


PARAMETER_NAMES = ("phi0", "phi1", "phi2", "phi3")


@dataclass(frozen=True)
class ProbeConfig:
    """Probe resources: displacement amplitude alpha and squeezing r.

    Both are real; alpha is the (equal) coherent amplitude on each mode and
    r >= 0 the two-mode squeezing parameter. Photon bookkeeping:
    n_squeeze = 2*sinh(r)^2, n_coherent = 2*alpha^2.
    """

    alpha: float
    r: float

    def __post_init__(self):
        if self.r < 0.0:
            raise ValueError(f"squeezing parameter must be >= 0, got {self.r}")

    @property
    def n_squeeze(self) -> float:
        return 2.0 * math.sinh(self.r) ** 2

    @property
    def n_coherent(self) -> float:
        return 2.0 * self.alpha ** 2

    @property
    def n_total(self) -> float:
        return self.n_squeeze + self.n_coherent


@dataclass(frozen=True)
class ResourceSplit:
    """Total mean photon number and its squeezing fraction.

    n_squeeze = beta * n_total goes to squeezing, the rest to displacement.
    """

    n_total: float
    beta: float

    def __post_init__(self):
        if self.n_total < 0.0:
            raise ValueError(f"photon number must be >= 0, got {self.n_total}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"squeezing fraction must be in (0, 1), got {self.beta}")

    def to_probe(self) -> ProbeConfig:
        r = math.asinh(math.sqrt(self.beta * self.n_total / 2.0))
        alpha = math.sqrt((1.0 - self.beta) * self.n_total / 2.0)
        return ProbeConfig(alpha=alpha, r=r)


@dataclass(frozen=True)
class HomodyneSettings:
    """Local-oscillator phases of the two output-port detectors."""

    theta1: float
    theta2: float


@dataclass(frozen=True)
class TuningConstants:
    """N-independent detuning constants of the asymptotic working point.

    theta_i = f_i + k_i / n_squeeze offsets the LO phases from the
    minimum-variance angles f_i, and k3 offsets the mixing angle from the
    balanced point pi/4 on the same schedule. Any real values are admitted;
    the combinations k1 = -k2 and k3^2 = k1*k2 make the leading-order
    information matrix singular and are flagged by the fisher module, not
    forbidden here.
    """

    k1: float
    k2: float
    k3: float


@dataclass(frozen=True)
class GaussianState:
    """Two-mode Gaussian state: quadrature means plus covariance.

    Ordering (x1, p1, x2, p2); vacuum variance 1/2. The covariance must be
    symmetric; propagation through any passive network preserves its
    determinant (1/16 for a pure probe).
    """

    displacement: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        d = _readonly(self.displacement)
        c = _readonly(self.covariance)
        if d.shape != (4,):
            raise ValueError(f"displacement must have shape (4,), got {d.shape}")
        if c.shape != (4, 4):
            raise ValueError(f"covariance must have shape (4, 4), got {c.shape}")
        if np.abs(c - c.T).max() > 1e-10:
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "displacement", d)
        object.__setattr__(self, "covariance", c)


@dataclass(frozen=True)
class OutputStatistics:
    """Mean vector and covariance of the joint two-port homodyne outcome."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        m = _readonly(self.mean)
        c = _readonly(self.covariance)
        if m.shape != (2,):
            raise ValueError(f"mean must have shape (2,), got {m.shape}")
        if c.shape != (2, 2):
            raise ValueError(f"covariance must have shape (2, 2), got {c.shape}")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "covariance", c)

    def entries(self) -> tuple[float, float, float, float, float]:
        """Scalar view (m1, m2, s11, s12, s22) for hot-path consumers."""
        return (float(self.mean[0]), float(self.mean[1]),
                float(self.covariance[0, 0]), float(self.covariance[0, 1]),
                float(self.covariance[1, 1]))


def build_unitary(params: NetworkParams) -> np.ndarray:
    """Return the 2x2 network unitary for the given parameters.

    Entries: the global phase multiplies everything, the sum phase phi_tau
    sits on the transmitted (diagonal) entries and the difference phase
    phi_rho on the reflected ones,

        U = e^{i phi0} [[e^{i phi_tau} cos(phi3),  e^{-i phi_rho} sin(phi3)],
                        [-e^{i phi_rho} sin(phi3), e^{-i phi_tau} cos(phi3)]]

    so det(U) = e^{2i phi0}. This is the parameterization under which the
    closed-form output statistics of this module hold exactly.
    """
    pt, pr = params.phi_tau, params.phi_rho
    c, s = math.cos(params.phi3), math.sin(params.phi3)
    g = complex(math.cos(params.phi0), math.sin(params.phi0))
    return g * np.array([
        [complex(math.cos(pt), math.sin(pt)) * c,
         complex(math.cos(pr), -math.sin(pr)) * s],
        [-complex(math.cos(pr), math.sin(pr)) * s,
         complex(math.cos(pt), -math.sin(pt)) * c],
    ])


def symplectic_of(U: np.ndarray) -> np.ndarray:
    """Return the real orthogonal symplectic action of a 2x2 unitary.

    In (x1, p1, x2, p2) ordering each complex entry U_jk becomes the 2x2
    rotation-scaling block [[Re, -Im], [Im, Re]]. Raises ValueError when U is
    not unitary (residual above 1e-8).
    """
    U = np.asarray(U, dtype=complex)
    if U.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {U.shape}")
    residual = np.abs(U.conj().T @ U - np.eye(2)).max()
    if residual > 1e-8:
        raise ValueError(f"matrix is not unitary (residual {residual:.3e})")
    R = np.empty((4, 4))
    for j in range(2):
        for k in range(2):
            re, im = U[j, k].real, U[j, k].imag
            R[2 * j, 2 * k] = re
            R[2 * j, 2 * k + 1] = -im
            R[2 * j + 1, 2 * k] = im
            R[2 * j + 1, 2 * k + 1] = re
    return R


def probe_state(config: ProbeConfig) -> GaussianState:
    """Displaced two-mode squeezed probe in phase space.

    Displacement sqrt(2)*alpha*(1, 0, 1, 0): equal real amplitudes on both
    modes. Covariance: diagonal cosh(2r)/2, cross-mode x-x correlation
    -sinh(2r)/2 and p-p correlation +sinh(2r)/2, which is the correlation
    pattern generated by the two-mode squeezing operator
    exp(r*(a1 a2 - a1^dag a2^dag)) acting on vacuum (<a1 a2> = -sinh(2r)/2).
    """
    ch = math.cosh(2.0 * config.r) / 2.0
    sh = math.sinh(2.0 * config.r) / 2.0
    cov = np.array([
        [ch, 0.0, -sh, 0.0],
        [0.0, ch, 0.0, sh],
        [-sh, 0.0, ch, 0.0],
        [0.0, sh, 0.0, ch],
    ])
    disp = math.sqrt(2.0) * config.alpha * np.array([1.0, 0.0, 1.0, 0.0])
    return GaussianState(displacement=disp, covariance=cov)


def propagate(state: GaussianState, R: np.ndarray) -> GaussianState:
    """Apply a network's symplectic action: d -> R d, Gamma -> R Gamma R^T."""
    R = np.asarray(R, dtype=float)
    if R.shape != (4, 4):
        raise ValueError(f"symplectic matrix must have shape (4, 4), got {R.shape}")
    if np.abs(R.T @ R - np.eye(4)).max() > 1e-8:
        raise ValueError("matrix is not orthogonal")
    if np.abs(R @ OMEGA @ R.T - OMEGA).max() > 1e-8:
        raise ValueError("matrix is not symplectic")
    cov = R @ state.covariance @ R.T
    cov = (cov + cov.T) / 2.0
    return GaussianState(displacement=R @ state.displacement, covariance=cov)


def measurement_matrix(settings: HomodyneSettings) -> np.ndarray:
    """2x4 projector onto the theta-rotated quadrature of each output mode."""
    c1, s1 = math.cos(settings.theta1), math.sin(settings.theta1)
    c2, s2 = math.cos(settings.theta2), math.sin(settings.theta2)
    return np.array([[c1, s1, 0.0, 0.0], [0.0, 0.0, c2, s2]])


def homodyne_stats(state: GaussianState, settings: HomodyneSettings) -> OutputStatistics:
    """Joint outcome statistics of the two homodyne detectors.

    mean = M d, covariance = M Gamma M^T with M from `measurement_matrix`.
    """
    M = measurement_matrix(settings)
    cov = M @ state.covariance @ M.T
    cov = (cov + cov.T) / 2.0
    return OutputStatistics(mean=M @ state.displacement, covariance=cov)


def _stats_scalars(phi0: float, phi1: float, phi2: float, phi3: float,
                   theta1: float, theta2: float, alpha: float, r: float):
    """Closed-form outcome statistics as plain floats (m1, m2, s11, s12, s22).

    Single source of truth for the trigonometric closed forms; the likelihood
    and score evaluations call this directly to avoid array overhead.
    """
    c3, s3 = math.cos(phi3), math.sin(phi3)
    amp = math.sqrt(2.0) * alpha
    m1 = amp * (c3 * math.cos((2.0 * theta1 - phi1 - 2.0 * phi0 - phi2) / 2.0)
                + s3 * math.cos((2.0 * theta1 + phi1 - 2.0 * phi0 - phi2) / 2.0))
    m2 = amp * (c3 * math.cos((2.0 * theta2 + phi1 - 2.0 * phi0 + phi2) / 2.0)
                - s3 * math.cos((2.0 * theta2 - phi1 - 2.0 * phi0 + phi2) / 2.0))
    ch, sh = math.cosh(2.0 * r), math.sinh(2.0 * r)
    s2p3, c2p3 = math.sin(2.0 * phi3), math.cos(2.0 * phi3)
    s11 = 0.5 * (ch - s2p3 * math.cos(2.0 * theta1 - 2.0 * phi0 - phi2) * sh)
    s22 = 0.5 * (ch + s2p3 * math.cos(2.0 * theta2 - 2.0 * phi0 + phi2) * sh)
    s12 = -0.5 * c2p3 * sh * math.cos(theta1 + theta2 - 2.0 * phi0)
    return m1, m2, s11, s12, s22


def closed_form_stats(params: NetworkParams, settings: HomodyneSettings,
                      config: ProbeConfig) -> OutputStatistics:
    """Outcome statistics straight from the trigonometric closed forms.

    This is the ground truth: the phase-space pipeline
    homodyne_stats(propagate(probe_state(...), symplectic_of(build_unitary(...))))
    must agree with it to machine precision. Note the covariance depends on
    phi0, phi2, phi3 only; phi1 enters the mean alone.
    """
    m1, m2, s11, s12, s22 = _stats_scalars(
        params.phi0, params.phi1, params.phi2, params.phi3,
        settings.theta1, settings.theta2, config.alpha, config.r)
    return OutputStatistics(mean=np.array([m1, m2]),
                            covariance=np.array([[s11, s12], [s12, s22]]))


def minimum_variance_angles(params: NetworkParams) -> tuple[float, float]:
    """LO phases (f1, f2) that minimize each port's outcome variance at the
    balanced mixing point: f1 = phi0 + phi2/2, f2 = pi/2 + phi0 - phi2/2."""
    f1 = params.phi0 + params.phi2 / 2.0
    f2 = math.pi / 2.0 + params.phi0 - params.phi2 / 2.0
    return f1, f2


def tuned_settings(params: NetworkParams, k: TuningConstants,
                   n_squeeze: float) -> HomodyneSettings:
    """LO phases at the asymptotic working point: theta_i = f_i + k_i/n_squeeze."""
    if n_squeeze <= 0.0:
        raise ValueError(f"n_squeeze must be > 0, got {n_squeeze}")
    f1, f2 = minimum_variance_angles(params)
    return HomodyneSettings(theta1=f1 + k.k1 / n_squeeze,
                            theta2=f2 + k.k2 / n_squeeze)


def tuned_mixing(k: TuningConstants, n_squeeze: float) -> float:
    """Mixing angle at the asymptotic working point: pi/4 + k3/n_squeeze."""
    if n_squeeze <= 0.0:
        raise ValueError(f"n_squeeze must be > 0, got {n_squeeze}")
    return math.pi / 4.0 + k.k3 / n_squeeze


def tuned_network(params: NetworkParams, k: TuningConstants,
                  n_squeeze: float) -> NetworkParams:
    """Copy of params with the mixing angle moved to the tuned working point."""
    return replace(params, phi3=tuned_mixing(k, n_squeeze))


def _inverse_2x2(s11: float, s12: float, s22: float):
    """Guarded closed-form inverse of a symmetric 2x2 covariance.

    Returns (i11, i12, i22, det). Raises DegenerateCovarianceError when the
    determinant falls below max(1e-300, 1e-12 * s11 * s22): at tuned LO phases
    the covariance shrinks like 1/n_squeeze and conditioning must fail loudly
    instead of returning garbage.
    """
    det = s11 * s22 - s12 * s12
    guard = max(1e-300, 1e-12 * abs(s11 * s22))
    if not det > guard:
        raise DegenerateCovarianceError(
            f"outcome covariance is numerically degenerate (det {det:.3e}, "
            f"guard {guard:.3e})")
    return s22 / det, -s12 / det, s11 / det, det


def log_density(x, stats: OutputStatistics) -> float:
    """Log of the bivariate normal outcome density at point x."""
    m1, m2, s11, s12, s22 = stats.entries()
    i11, i12, i22, det = _inverse_2x2(s11, s12, s22)
    dx, dy = float(x[0]) - m1, float(x[1]) - m2
    quad = i11 * dx * dx + 2.0 * i12 * dx * dy + i22 * dy * dy
    return -LOG_2PI - 0.5 * math.log(det) - 0.5 * quad
