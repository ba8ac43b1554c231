"""Closed-form Gaussian layer.

Channel composition, the untrusted-noise map, and the normal form of the
eavesdropper's two-mode state: a two-mode squeezer of total strength
``mu + gamma`` acting on a product of thermal states ``n2 (x) n3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateScenarioError, ParameterError

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K

UNITARITY_TOL = 1e-12


@dataclass(frozen=True)
class SourceChannelParams:
    t: complex
    r: complex
    zeta_tilde: complex = 0.0
    n0: float = 0.0
    n_a: float = 0.0

    def __post_init__(self):
        resid = abs(abs(self.t) ** 2 + abs(self.r) ** 2 - 1.0)
        if resid > UNITARITY_TOL:
            raise ParameterError(f"|t|^2 + |r|^2 - 1 = {resid:.3e}; channel (t, r) must be unitary")
        if self.n0 < 0 or self.n_a < 0:
            raise ParameterError("occupations n0, n_a must be non-negative")


@dataclass(frozen=True)
class EavesdropperParams:
    r_E: float
    mu: float

    def __post_init__(self):
        if not 0.0 <= self.r_E <= 1.0:
            raise ParameterError(f"r_E must lie in [0, 1], got {self.r_E}")
        if self.mu < 0 or not math.isfinite(self.mu):
            raise ParameterError(f"mu must be finite and >= 0, got {self.mu}")

    @property
    def t_E(self) -> float:
        return math.sqrt(1.0 - self.r_E**2)


@dataclass(frozen=True)
class EnvironmentNormalForm:
    tau_t: float
    n_r: float
    X: float
    Y: float
    gamma: float
    n2: float
    n3: float
    beta2: float
    beta3: float
    n_E: float
    mu: float

    @property
    def squeeze(self) -> float:
        """Total two-mode squeezing ``mu + gamma`` of the diagonalizing transform."""
        return self.mu + self.gamma


@dataclass(frozen=True)
class EnvironmentDisplacement:
    z2: complex
    z3: complex


def compose_source_channel(p: SourceChannelParams) -> tuple[complex, float]:
    zeta = complex(p.t) * complex(p.zeta_tilde)
    n = abs(p.t) ** 2 * p.n0 + abs(p.r) ** 2 * p.n_a
    return zeta, float(n)


def untrusted_noise(e: EavesdropperParams) -> float:
    return e.r_E**2 * math.sinh(e.mu) ** 2


def environment_moments(e: EavesdropperParams, n: float) -> tuple[float, float, float]:
    """Normal-ordered moments of the environment state before modulation:
    ``<a2^dag a2>``, ``<a3^dag a3>`` and the real correlation ``<a2 a3>``."""
    sh2 = math.sinh(e.mu) ** 2
    t = e.t_E
    return t * t * sh2 + e.r_E**2 * n, sh2, t * math.sinh(e.mu) * math.cosh(e.mu)


def environment_normal_form(e: EavesdropperParams, n: float) -> EnvironmentNormalForm:
    """Normal form of the environment's two-mode state after the channel.

    The state is Gaussian with standard-form covariance, so one two-mode
    squeezer diagonalizes it.  Occupations come from the symplectic
    eigenvalues ``2 n_{2,3} + 1`` of the symmetric-ordered covariance; the
    vacuum contribution is kept exactly.  ``n2`` belongs to the mode mixed
    with the channel.  ``gamma`` is defined so that ``mu + gamma`` is the
    total squeezing of the diagonalizing transform.
    """
    if n < 0:
        raise ParameterError(f"channel occupation must be >= 0, got {n}")
    n_e = untrusted_noise(e)
    if n_e <= 0.0:
        raise DegenerateScenarioError("n_E = 0: environment carries no untrusted noise; use the noiseless branch")
    r, t, mu = e.r_E, e.t_E, e.mu
    sh, ch = math.sinh(mu), math.cosh(mu)
    sh2 = sh * sh
    tanh_mu = math.tanh(mu)
    tau = t * tanh_mu
    # 1 - t tanh(mu) without cancellation for t -> 1, mu -> inf
    one_minus_tau = r * r / (1.0 + t) + t * 2.0 / (math.exp(2.0 * mu) + 1.0)
    one_minus_tau2 = one_minus_tau * (1.0 + tau)
    n_r = r * r * n / one_minus_tau2
    x = n_r / n_e
    y = x + tau * tau - 1.0

    n2_occ, n3_occ, corr = environment_moments(e, n)
    # (N2+N3+1)^2 - 4 M^2 - 1, expanded so every term is non-negative
    q = r * r * sh2 * sh2 + 2.0 * sh2 * (1.0 + t * t) * n + r * r * n * n + 2.0 * sh2 + 2.0 * n
    root_sq_m1 = r * r * q
    root = math.sqrt(1.0 + root_sq_m1)
    u = root_sq_m1 / (root + 1.0)  # root - 1
    diff = r * r * (n - sh2)  # N2 - N3
    n2 = max(0.0, 0.5 * (u + diff))
    n3 = max(0.0, 0.5 * (u - diff))
    # tanh(2 lambda) = 2 M / (N2 + N3 + 1); use 1 - tanh = lower / upper
    upper = n2_occ + n3_occ + 1.0 + 2.0 * corr
    lower = (ch * one_minus_tau) ** 2 + r * r * n  # N2 + N3 + 1 - 2 M
    lam = 0.25 * math.log(upper / lower)
    return EnvironmentNormalForm(
        tau_t=tau,
        n_r=n_r,
        X=x,
        Y=y,
        gamma=lam - mu,
        n2=n2,
        n3=n3,
        beta2=_beta(n2),
        beta3=_beta(n3),
        n_E=n_e,
        mu=mu,
    )


def _beta(n: float) -> float:
    return math.log1p(1.0 / n) if n > 0 else math.inf


def environment_displacement(zeta: complex, s: float, e: EavesdropperParams, gamma: float) -> EnvironmentDisplacement:
    lam = e.mu + gamma
    a = complex(s) * complex(zeta) * e.r_E
    return EnvironmentDisplacement(z2=-a * math.cosh(lam), z3=a.conjugate() * math.sinh(lam))


def environment_displacements(zetas, s: float, e: EavesdropperParams, gamma: float) -> np.ndarray:
    """Vectorized ``environment_displacement``; returns shape (M, 2)."""
    lam = e.mu + gamma
    a = s * np.asarray(zetas, dtype=complex) * e.r_E
    return np.stack([-a * math.cosh(lam), np.conj(a) * math.sinh(lam)], axis=1)


def thermal_entropy_g(n: float) -> float:
    """Entropy in nats of a thermal mode, ``(n+1) ln(n+1) - n ln n``."""
    if n < 0:
        raise ParameterError(f"occupation must be >= 0, got {n}")
    if n == 0:
        return 0.0
    return (n + 1.0) * math.log1p(n) - n * math.log(n)


def bose_einstein_occupation(omega: float, T: float) -> float:
    """Mean thermal photon number at angular frequency ``omega`` (rad/s) and
    temperature ``T`` (K).  Returns 0 once the Boltzmann factor underflows."""
    if omega <= 0 or T <= 0:
        raise ParameterError("omega and T must be positive")
    x = HBAR * omega / (K_B * T)
    if x > 700.0:
        return 0.0
    return 1.0 / math.expm1(x)


# ---------------------------------------------------------------- covariance oracle
#
# Symmetric-ordered covariance in (x2, p2, x3, p3) order with vacuum = identity,
# x = (a + a^dag)/sqrt(2).  Used as an independent check on the normal form.


def _tmsv_symplectic(mu: float) -> np.ndarray:
    c, s = math.cosh(mu), math.sinh(mu)
    z = np.diag([1.0, -1.0])
    return np.block([[c * np.eye(2), s * z], [s * z, c * np.eye(2)]])


def _beam_splitter_symplectic(t: float, r: float) -> np.ndarray:
    # a0 -> t a0 + r a_e, a_e -> -r a0 + t a_e (real coefficients)
    return np.block([[t * np.eye(2), r * np.eye(2)], [-r * np.eye(2), t * np.eye(2)]])


def environment_covariance(e: EavesdropperParams, n: float) -> np.ndarray:
    """Covariance of the (mixed mode, partner mode) environment state, built
    by propagating thermal and vacuum covariances through symplectic maps."""
    v = np.zeros((6, 6))
    v[:2, :2] = (2 * n + 1) * np.eye(2)  # channel
    v[2:, 2:] = np.eye(4)  # environment vacuum
    sq = np.eye(6)
    sq[2:, 2:] = _tmsv_symplectic(e.mu)
    bs = np.eye(6)
    bs[:4, :4] = _beam_splitter_symplectic(e.t_E, e.r_E)
    v = sq @ v @ sq.T
    v = bs @ v @ bs.T
    return v[2:, 2:]


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symplectic spectrum (ascending) of a covariance matrix in xpxp order."""
    k = cov.shape[0] // 2
    omega = np.kron(np.eye(k), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    ev = np.abs(np.linalg.eigvals(1j * omega @ cov))
    return np.sort(ev)[::2]
