"""Mutual information, Holevo bound and secret-key rate.

Key rate under direct reconciliation is ``R = lam * I(A:B) - chi(A:E)``.
``I`` is the Shannon information carried by homodyne outcomes at the
receiver; ``chi`` is the Holevo quantity of the environment ensemble
``{p_j, D(z_j) rho_th(n2) (x) rho_th(n3) D(z_j)^dag}``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from . import fock
from .constellation import Constellation, project_quadrature, shannon_entropy
from .errors import CVDiscError, DegenerateScenarioError, NumericError, ParameterError, TruncationError
from .gaussian import (
    EavesdropperParams,
    EnvironmentNormalForm,
    SourceChannelParams,
    compose_source_channel,
    environment_displacements,
    environment_normal_form,
    untrusted_noise,
)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical scenario.

    ``constellation`` holds the source-side modulation points; the channel
    multiplies them by ``t_channel`` and leaves trusted thermal occupation
    ``n``.  The eavesdropper couples with reflectivity ``r_E`` using a
    two-mode squeezed vacuum of strength ``mu``.
    """

    constellation: Constellation
    n: float
    r_E: float
    mu: float
    theta: float = 0.0
    lam: float = 1.0
    t_channel: complex = 1.0
    label: str = ""

    def __post_init__(self):
        if not (0.0 < self.lam <= 1.0):
            raise ParameterError(f"reconciliation efficiency must lie in (0, 1], got {self.lam}")
        if self.n < 0 or not math.isfinite(self.n):
            raise ParameterError(f"channel occupation must be finite and >= 0, got {self.n}")
        if abs(self.t_channel) > 1.0 + 1e-12:
            raise ParameterError(f"|t_channel| = {abs(self.t_channel)} exceeds 1")
        EavesdropperParams(self.r_E, self.mu)

    @classmethod
    def from_source_channel(cls, constellation: Constellation, channel: SourceChannelParams,
                            r_E: float, mu: float, **kw) -> "ScenarioConfig":
        _, n = compose_source_channel(channel)
        return cls(constellation, n=n, r_E=r_E, mu=mu, t_channel=complex(channel.t), **kw)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    @property
    def eavesdropper(self) -> EavesdropperParams:
        return EavesdropperParams(self.r_E, self.mu)

    @property
    def t_E(self) -> float:
        return math.sqrt(1.0 - self.r_E**2)

    @property
    def n_E(self) -> float:
        return untrusted_noise(self.eavesdropper)

    @property
    def noiseless(self) -> bool:
        return self.n_E == 0.0

    @property
    def points(self) -> np.ndarray:
        """Channel-level modulation values ``zeta_j`` (unit signal scale)."""
        return complex(self.t_channel) * self.constellation.points

    @property
    def probs(self) -> np.ndarray:
        return self.constellation.probs

    @property
    def receiver_occupation(self) -> float:
        return self.n * self.t_E**2 + self.n_E

    @property
    def sigma2(self) -> float:
        return 2.0 * self.receiver_occupation + 1.0

    @property
    def detection_phase(self) -> complex:
        """Combined factor multiplying ``s zeta`` inside the homodyne mean."""
        return self.t_E * np.exp(1j * self.theta)

    @cached_property
    def normal_form(self) -> EnvironmentNormalForm:
        return environment_normal_form(self.eavesdropper, self.n)

    def to_dict(self) -> dict:
        return {
            "constellation": self.constellation.to_dict(),
            "n": self.n,
            "r_E": self.r_E,
            "mu": self.mu,
            "theta": self.theta,
            "lambda": self.lam,
            "t_channel": [complex(self.t_channel).real, complex(self.t_channel).imag],
            "label": self.label,
        }


@dataclass(frozen=True)
class QuadratureKernel:
    sigma2: float
    means: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        if self.sigma2 < 1.0 - 1e-12:
            raise ParameterError(f"homodyne variance {self.sigma2} below the vacuum floor")


@dataclass(frozen=True)
class HolevoResult:
    chi: float
    levels: int
    cutoff: int
    tail_mass: float
    dimension: int


@dataclass(frozen=True)
class Classicality:
    max_overlap: float
    min_distance: float


@dataclass
class RatePoint:
    s: float
    I: float
    chi: float
    R: float
    cutoff: int = 0
    tail_mass: float = 0.0
    classicality: float = float("nan")
    error: str | None = None


@dataclass
class RateCurve:
    scenario: ScenarioConfig
    points: list = field(default_factory=list)

    @property
    def s(self) -> np.ndarray:
        return np.array([p.s for p in self.points])

    @property
    def R(self) -> np.ndarray:
        return np.array([p.R for p in self.points])

    @property
    def errors(self) -> list:
        return [p for p in self.points if p.error]


# ---------------------------------------------------------------- Shannon side


def quadrature_kernel(scenario: ScenarioConfig, s: float, sqrt_lambda: bool = False) -> QuadratureKernel:
    phase = scenario.detection_phase
    if sqrt_lambda:
        phase = phase * math.sqrt(scenario.lam)
    proj = project_quadrature(Constellation(scenario.points, scenario.probs), phase, s)
    return QuadratureKernel(scenario.sigma2, proj.values, proj.probs)


def _mixture_information(means, probs, sigma2, panel_width):
    sigma = math.sqrt(sigma2)
    lo, hi = means.min() - 8 * sigma, means.max() + 8 * sigma
    panels = max(1, int(math.ceil((hi - lo) / panel_width)))
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).reshape(-1)
    w = (half[:, None] * _GL_WEIGHTS[None, :]).reshape(-1)
    log_q = -((x[None, :] - means[:, None]) ** 2) / sigma2 - 0.5 * math.log(math.pi * sigma2)
    log_mix = logsumexp(log_q + np.log(probs)[:, None], axis=0)
    integrand = np.sum(probs[:, None] * np.exp(log_q) * (log_q - log_mix[None, :]), axis=0)
    return float(np.dot(w, integrand))


def mutual_information(scenario: ScenarioConfig, s: float, tol: float = 1e-9) -> float:
    """Shannon information (nats) between the sent point and the homodyne outcome.

    The conditional outcome density is ``exp(-(k - m_j)^2 / sigma2) / sqrt(pi sigma2)``
    with ``sigma2 = 2 n_B + 1``.  ``I`` is evaluated as the average relative
    entropy of each conditional against the mixture, by composite 16-point
    Gauss-Legendre on panels of width ``sigma/4``.
    """
    k = quadrature_kernel(scenario, s)
    if k.means.size < 2:
        return 0.0
    sigma = math.sqrt(k.sigma2)
    fine = _mixture_information(k.means, k.probs, k.sigma2, sigma / 4)
    coarse = _mixture_information(k.means, k.probs, k.sigma2, sigma / 2)
    if abs(fine - coarse) > tol:
        raise NumericError(f"mutual-information quadrature not converged ({abs(fine - coarse):.2e})",
                           achieved=abs(fine - coarse))
    return max(fine, 0.0)


def mutual_information_trapezoid(scenario: ScenarioConfig, s: float, points_per_sigma: int = 400) -> float:
    """Independent estimate from the two entropies on a uniform trapezoid grid."""
    k = quadrature_kernel(scenario, s)
    sigma = math.sqrt(k.sigma2)
    lo, hi = k.means.min() - 10 * sigma, k.means.max() + 10 * sigma
    x = np.linspace(lo, hi, int((hi - lo) / sigma * points_per_sigma) + 1)
    dens = np.exp(-((x[None, :] - k.means[:, None]) ** 2) / k.sigma2) / math.sqrt(math.pi * k.sigma2)
    mix = k.probs @ dens
    with np.errstate(divide="ignore", invalid="ignore"):
        h_mix = -np.trapezoid(np.where(mix > 0, mix * np.log(mix), 0.0), x)
    h_cond = 0.5 * math.log(math.pi * math.e * k.sigma2)
    return float(h_mix - h_cond)


# ---------------------------------------------------------------- Holevo side


def _reference_levels(nf: EnvironmentNormalForm, rel_threshold: float):
    """Product-thermal levels (l2, l3) whose weight is at least
    ``rel_threshold`` times the ground weight; returns indices and log weights."""
    def log_ratio(n):
        return math.log(n / (1.0 + n)) if n > 0 else -math.inf

    lq2, lq3 = log_ratio(nf.n2), log_ratio(nf.n3)
    lim = math.log(rel_threshold)
    max2 = int(lim / lq2) if lq2 > -math.inf else 0
    max3 = int(lim / lq3) if lq3 > -math.inf else 0
    l2, l3 = np.meshgrid(np.arange(max2 + 1), np.arange(max3 + 1), indexing="ij")
    l2, l3 = l2.reshape(-1), l3.reshape(-1)
    logw = np.zeros(l2.size)
    if max2:
        logw += l2 * lq2
    if max3:
        logw += l3 * lq3
    keep = logw >= lim
    l2, l3, logw = l2[keep], l3[keep], logw[keep]
    full_log_norm = -math.log1p(nf.n2) - math.log1p(nf.n3)
    kept_mass = float(np.sum(np.exp(logw + full_log_norm)))
    return l2, l3, logw, max(0.0, 1.0 - kept_mass)


def _cyclic_order(points: np.ndarray, probs: np.ndarray, tol: float = 1e-12):
    """Ordering ``perm`` with ``points[perm[k]] = w^k points[perm[0]]``,
    ``w = exp(2 pi i / M)`` and equal probabilities, or None."""
    m = points.size
    if m < 2 or np.ptp(probs) > tol or np.any(points == 0):
        return None
    w = np.exp(2j * np.pi / m)
    scale = max(1.0, float(np.max(np.abs(points))))
    perm, used = [0], {0}
    for k in range(1, m):
        target = points[0] * w**k
        d = np.abs(points - target)
        j = int(np.argmin(d))
        if d[j] > tol * scale or j in used:
            return None
        perm.append(j)
        used.add(j)
    return np.array(perm)


def _pair_block(za, zb, l2, l3, d2, d3, amp):
    dz = zb - za
    phase = np.exp(1j * np.imag(np.conj(za) @ zb))
    b2 = fock.displacement_block(dz[0], d2, d2)[np.ix_(l2, l2)]
    b3 = fock.displacement_block(dz[1], d3, d3)[np.ix_(l3, l3)]
    return phase * (amp[:, None] * amp[None, :]) * b2 * b3


def _gram_holevo(z: np.ndarray, probs: np.ndarray, l2, l3, logw, cyclic: bool = True) -> tuple[float, int]:
    """Holevo quantity of ``{p_j, D(z_j) rho0 D(z_j)^dag}`` with ``rho0``
    restricted to the kept levels, from the Gram matrix of the purified
    ensemble vectors ``sqrt(p_j w_l) D(z_j)|l>``.

    For a cyclic ensemble the rotation ``exp(i 2 pi/M (N2 - N3))`` maps each
    state onto the next, the Gram matrix becomes block circulant and splits
    into ``M`` Hermitian blocks of the reference dimension.
    """
    w = np.exp(logw - logsumexp(logw))
    amp = np.sqrt(w)
    kdim = w.size
    m = z.shape[0]
    d2, d3 = int(l2.max()) + 1, int(l3.max()) + 1
    h_ref = float(-np.sum(w * np.log(w)))
    perm = _cyclic_order(z[:, 0], probs) if cyclic and m > 2 else None
    if perm is not None:
        zc = z[perm]
        diff = (l2 - l3).astype(float)
        f = []
        for d in range(m):
            block = _pair_block(zc[0], zc[d], l2, l3, d2, d3, amp) / m
            f.append(block * np.exp(1j * d * 2 * np.pi / m * diff)[None, :])
        ev = []
        for k in range(m):
            b = sum(f[d] * np.exp(2j * np.pi * k * d / m) for d in range(m))
            ev.append(np.linalg.eigvalsh(0.5 * (b + b.conj().T)))
        return fock.entropy_from_eigenvalues(np.concatenate(ev)) - h_ref, m * kdim
    gram = np.zeros((m * kdim, m * kdim), dtype=complex)
    sp = np.sqrt(probs)
    for j in range(m):
        for jj in range(j, m):
            block = sp[j] * sp[jj] * _pair_block(z[j], z[jj], l2, l3, d2, d3, amp)
            gram[j * kdim:(j + 1) * kdim, jj * kdim:(jj + 1) * kdim] = block
            if jj != j:
                gram[jj * kdim:(jj + 1) * kdim, j * kdim:(j + 1) * kdim] = block.conj().T
    ev = np.linalg.eigvalsh(gram)
    return fock.entropy_from_eigenvalues(ev) - h_ref, m * kdim


def holevo_details(scenario: ScenarioConfig, s: float, tol: float = 1e-8, max_dimension: int = 8000,
                   start_threshold: float = 1e-8, cyclic: bool = True) -> HolevoResult:
    """Holevo bound with adaptive truncation of the reference spectrum.

    Displacement matrix elements are exact, so only the thermal tail of the
    reference state is cut; the relative weight threshold is tightened by
    1e-2 until ``chi`` moves by less than ``tol``.
    """
    if scenario.noiseless:
        return HolevoResult(0.0, 1, 0, 0.0, 1)
    nf = scenario.normal_form
    z = environment_displacements(scenario.points, s, scenario.eavesdropper, nf.gamma)
    probs = np.asarray(scenario.probs)
    threshold = start_threshold
    prev = None
    for _ in range(6):
        l2, l3, logw, tail = _reference_levels(nf, threshold)
        dim = len(probs) * l2.size
        if dim > max_dimension:
            if prev is not None:
                raise NumericError(f"Holevo bound not converged before dimension {dim}",
                                   achieved=abs(prev.chi))
            raise TruncationError(f"reference spectrum needs dimension {dim} > {max_dimension}",
                                  tail_mass=tail, cutoff=int(max(l2.max(), l3.max())))
        chi, dim = _gram_holevo(z, probs, l2, l3, logw, cyclic)
        cur = HolevoResult(max(chi, 0.0), int(l2.size), int(max(l2.max(), l3.max())), tail, dim)
        if prev is not None and abs(cur.chi - prev.chi) < tol:
            return cur
        prev = cur
        threshold *= 1e-2
        if threshold < 1e-300:
            break
    return prev


def holevo_bound(scenario: ScenarioConfig, s: float, tol: float = 1e-8) -> float:
    return holevo_details(scenario, s, tol=tol).chi


def holevo_bound_fock(scenario: ScenarioConfig, s: float, n_max: int | None = None,
                      tol: float = 1e-6, max_cutoff: int = 40) -> float:
    """Holevo bound from dense two-mode Fock matrices (cross-check route).

    Builds the averaged state ``sum_j p_j D(z_j) rho_th (x) rho_th D(z_j)^dag``
    at cutoff ``n_max``; without ``n_max`` the cutoff doubles from the
    suggested start until ``chi`` changes by less than ``tol``.
    """
    if scenario.noiseless:
        return 0.0
    nf = scenario.normal_form
    z = environment_displacements(scenario.points, s, scenario.eavesdropper, nf.gamma)

    def at(cut):
        d = cut + 1
        p2, _ = fock.thermal_populations(nf.n2, cut)
        p3, _ = fock.thermal_populations(nf.n3, cut)
        rho0 = np.diag(np.kron(p2, p3)).astype(complex)
        avg = np.zeros_like(rho0)
        h_each = 0.0
        for pj, zj in zip(scenario.probs, z):
            u = np.kron(fock.displacement_block(zj[0], d, d), fock.displacement_block(zj[1], d, d))
            rj = u @ rho0 @ u.conj().T
            avg += pj * rj
            h_each += pj * fock.von_neumann_entropy(rj)
        return fock.von_neumann_entropy(avg) - h_each

    if n_max is not None:
        return at(n_max)
    cut = fock.suggest_cutoff(max(nf.n2, nf.n3), float(np.max(np.abs(z))) if z.size else 0.0)
    cut = min(cut, max_cutoff)
    prev = at(cut)
    while cut < max_cutoff:
        cut = min(2 * cut, max_cutoff)
        cur = at(cut)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    return prev


# ---------------------------------------------------------------- rates


def classicality_diagnostic(scenario: ScenarioConfig, s: float) -> Classicality:
    """Largest pairwise overlap factor ``exp[-dz^* n^-1 dz]`` with
    ``n = diag(n2, n3)``, and the smallest pairwise displacement distance."""
    if scenario.noiseless:
        raise DegenerateScenarioError("classicality diagnostic needs n_E > 0")
    nf = scenario.normal_form
    z = environment_displacements(scenario.points, s, scenario.eavesdropper, nf.gamma)
    m = z.shape[0]
    if m < 2:
        return Classicality(1.0, math.inf)
    best_exp, min_dist = math.inf, math.inf
    for j in range(m):
        for jj in range(j + 1, m):
            dz = np.abs(z[jj] - z[j]) ** 2
            e = 0.0
            for d, occ in zip(dz, (nf.n2, nf.n3)):
                if d > 0:
                    e += d / occ if occ > 0 else math.inf
            best_exp = min(best_exp, e)
            min_dist = min(min_dist, math.sqrt(float(dz.sum())))
    return Classicality(math.exp(-best_exp), min_dist)


def key_rate(scenario: ScenarioConfig, s: float) -> RatePoint:
    info = mutual_information(scenario, s)
    hol = holevo_details(scenario, s)
    if scenario.noiseless:
        cls = float("nan")
    else:
        cls = classicality_diagnostic(scenario, s).max_overlap
    return RatePoint(
        s=float(s),
        I=info,
        chi=hol.chi,
        R=scenario.lam * info - hol.chi,
        cutoff=hol.cutoff,
        tail_mass=hol.tail_mass,
        classicality=cls,
    )


def curvature_terms(scenario: ScenarioConfig) -> tuple[float, float]:
    """Second derivatives at ``s = 0`` of ``lam * I`` and of ``chi``."""
    k = quadrature_kernel(scenario, 1.0, sqrt_lambda=True)
    mean = float(np.dot(k.probs, k.means))
    i_curv = 2.0 / k.sigma2 * float(np.dot(k.probs, (k.means - mean) ** 2))
    if scenario.noiseless:
        return i_curv, 0.0
    pts = scenario.points
    var_zeta = float(np.dot(scenario.probs, np.abs(pts - np.dot(scenario.probs, pts)) ** 2))
    if var_zeta == 0.0:
        return i_curv, 0.0
    nf = scenario.normal_form
    lam = nf.squeeze
    weight = nf.beta2 * math.cosh(lam) ** 2 + nf.beta3 * math.sinh(lam) ** 2
    return i_curv, 2.0 * var_zeta * scenario.r_E**2 * weight


def weak_limit_coefficient(scenario: ScenarioConfig) -> float:
    """Curvature ``C = d^2/ds^2 [lam I - chi]`` at ``s = 0``; secure iff ``C > 0``."""
    i_curv, chi_curv = curvature_terms(scenario)
    return i_curv - chi_curv


def _rate_point_safe(args):
    scenario, s = args
    try:
        return key_rate(scenario, s)
    except CVDiscError as exc:
        nan = float("nan")
        return RatePoint(float(s), nan, nan, nan, error=f"{type(exc).__name__}: {exc}")


def validate_grid(s_grid) -> np.ndarray:
    g = np.asarray(s_grid, dtype=float).reshape(-1)
    if g.size and (not np.all(np.isfinite(g)) or np.any(g <= 0) or np.any(np.diff(g) <= 0)):
        raise ParameterError("s grid must be finite, positive and strictly increasing")
    return g


def rate_sweep(scenario: ScenarioConfig, s_grid, workers: int = 1) -> RateCurve:
    """Key rate on every grid value; failed points carry ``error`` and NaNs."""
    grid = validate_grid(s_grid)
    jobs = [(scenario, float(s)) for s in grid]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_rate_point_safe, jobs))
    else:
        points = [_rate_point_safe(j) for j in jobs]
    return RateCurve(scenario, points)


def saturation_limit(scenario: ScenarioConfig) -> float:
    """Large-signal limit of the rate: ``lam * S(projected) - S(constellation)``."""
    proj = project_quadrature(Constellation(scenario.points, scenario.probs), scenario.detection_phase, 1.0)
    return scenario.lam * proj.entropy() - shannon_entropy(scenario.constellation)


# ---------------------------------------------------------------- traced environment


def environment_frame(scenario: ScenarioConfig) -> tuple[float, float, float]:
    """``(n2, n3, total squeeze)`` of the environment's diagonal frame.

    Noiseless scenarios have closed forms: with ``r_E = 0`` the environment
    is the untouched squeezed vacuum; with ``mu = 0`` it is the reflected
    channel mode next to vacuum.
    """
    if not scenario.noiseless:
        nf = scenario.normal_form
        return nf.n2, nf.n3, nf.squeeze
    if scenario.r_E == 0.0:
        return 0.0, 0.0, scenario.mu
    return scenario.r_E**2 * scenario.n, 0.0, 0.0


def traced_environment_state(scenario: ScenarioConfig, s: float, keep: str = "partner",
                             tail_tol: float = 1e-10) -> fock.DensityMatrix:
    """One mode of the ensemble-averaged environment state in its diagonal frame.

    ``keep="partner"`` traces out the mode mixed with the channel and returns
    ``sum_j p_j D(z3_j) rho_th(n3) D(z3_j)^dag``; ``keep="mixed"`` keeps
    that mode instead.
    """
    if keep not in ("partner", "mixed"):
        raise ParameterError(f"keep must be 'partner' or 'mixed', got {keep!r}")
    n2, n3, lam = environment_frame(scenario)
    a = s * scenario.points * scenario.r_E
    if keep == "partner":
        occ, z = n3, np.conj(a) * math.sinh(lam)
    else:
        occ, z = n2, -a * math.cosh(lam)
    zmax = float(np.max(np.abs(z))) if z.size else 0.0
    base = fock.thermal_cutoff(occ, tail_tol)
    d = base + 1 + fock.suggest_cutoff(occ, zmax) + int(math.ceil(12 * zmax))
    pops, _ = fock.thermal_populations(occ, base)
    stack = fock.displacement_stack(z, d, base + 1)
    rho = np.einsum("pmk,k,pnk,p->mn", stack, pops, stack.conj(), scenario.probs)
    tail = max(0.0, 1.0 - float(np.trace(rho).real))
    return fock.DensityMatrix(rho, (d,), tail)
