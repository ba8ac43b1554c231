"""Security boundary in the (r_E, omega) plane at fixed temperature.

The weak-limit boundary solves ``C(r_E) = 0``; the numeric boundary solves
``max_s R(s) = 0`` over a signal grid.  Both bisect in ``r_E`` at each
frequency, with smaller coupling on the secure side.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constellation import Constellation, build_constellation
from .errors import ParameterError
from .gaussian import bose_einstein_occupation
from .rates import ScenarioConfig, key_rate, validate_grid, weak_limit_coefficient

RULES = ("environment", "untrusted_noise")
STATUSES = ("root", "secure_throughout", "insecure_throughout")
DEFAULT_S_GRID = tuple(np.logspace(-2, math.log10(30.0), 24))
DEFAULT_R_RANGE = (1e-3, 0.999)
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def mu_from_temperature(omega: float, T: float, r_E: float, rule: str = "untrusted_noise") -> float:
    """Squeezing of the eavesdropper's resource fixed by the ambient temperature.

    ``untrusted_noise``: ``mu = arcsinh(sqrt(nbar) / r_E)`` so that the
    injected noise ``r_E^2 sinh^2(mu)`` equals ``nbar(omega, T)``.
    ``environment``: ``sinh^2(mu) = nbar``, i.e. the eavesdropper's mode is
    the thermal environment mode itself and ``n_E = r_E^2 nbar``.
    """
    nbar = bose_einstein_occupation(omega, T)
    if rule == "untrusted_noise":
        if r_E <= 0:
            raise ParameterError("r_E = 0 cannot carry the required untrusted noise")
        return math.asinh(math.sqrt(nbar) / r_E)
    if rule == "environment":
        if not 0 <= r_E <= 1:
            raise ParameterError(f"r_E must lie in [0, 1], got {r_E}")
        return math.asinh(math.sqrt(nbar))
    raise ParameterError(f"unknown temperature rule {rule!r}; choose from {RULES}")


@dataclass(frozen=True)
class TemperatureConstraint:
    T: float
    rule: str = "environment"

    def __post_init__(self):
        if not self.T > 0:
            raise ParameterError(f"temperature must be positive, got {self.T}")
        if self.rule not in RULES:
            raise ParameterError(f"unknown temperature rule {self.rule!r}; choose from {RULES}")

    def occupation(self, omega: float) -> float:
        return bose_einstein_occupation(omega, self.T)

    def mu(self, omega: float, r_E: float) -> float:
        return mu_from_temperature(omega, self.T, r_E, self.rule)

    def target_noise(self, omega: float, r_E: float) -> float:
        nbar = self.occupation(omega)
        return nbar if self.rule == "untrusted_noise" else r_E**2 * nbar


@dataclass(frozen=True)
class ChannelProfile:
    """Trusted channel at each frequency; ``occupation=None`` means the
    channel carries the ambient thermal occupation ``nbar(omega, T)``."""

    occupation: float | None = None
    t_channel: complex = 1.0
    theta: float = 0.0
    lam: float = 1.0

    def n(self, omega: float, T: float) -> float:
        return bose_einstein_occupation(omega, T) if self.occupation is None else float(self.occupation)


def default_constellation() -> Constellation:
    return build_constellation("four-point")


def scenario_at(omega: float, r_E: float, constraint: TemperatureConstraint,
                profile: ChannelProfile | None = None, constellation: Constellation | None = None) -> ScenarioConfig:
    profile = profile or ChannelProfile()
    return ScenarioConfig(
        constellation if constellation is not None else default_constellation(),
        n=profile.n(omega, constraint.T),
        r_E=r_E,
        mu=constraint.mu(omega, r_E),
        theta=profile.theta,
        lam=profile.lam,
        t_channel=profile.t_channel,
    )


@dataclass
class BoundaryPoint:
    omega: float
    r_E_star: float
    method: str
    bracket_lo: float
    bracket_hi: float
    status: str
    evaluations: int = 0


@dataclass
class BoundaryCurve:
    method: str
    T: float
    rule: str
    tolerance: float
    points: list = field(default_factory=list)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([p.omega for p in self.points])

    @property
    def r_E_star(self) -> np.ndarray:
        return np.array([p.r_E_star for p in self.points])


# ---------------------------------------------------------------- criteria


def max_rate_sign(scenario: ScenarioConfig, s_grid, stop_at_positive: bool = True) -> float:
    """Largest rate over the grid; stops at the first positive value when
    only the sign is needed."""
    best = -math.inf
    for s in s_grid:
        r = key_rate(scenario, float(s)).R
        best = max(best, r)
        if stop_at_positive and best > 0:
            break
    return best


def _criterion(method, omega, r_E, constraint, profile, constellation, s_grid):
    sc = scenario_at(omega, r_E, constraint, profile, constellation)
    if method == "weak":
        return weak_limit_coefficient(sc)
    return max_rate_sign(sc, s_grid)


def _solve_point(args) -> BoundaryPoint:
    method, omega, constraint, profile, constellation, s_grid, r_range, tol, scan = args
    f = lambda r: _criterion(method, omega, r, constraint, profile, constellation, s_grid)  # noqa: E731
    lo, hi = r_range
    rs = np.linspace(lo, hi, scan)
    vals = []
    evals = 0
    for r in rs:
        vals.append(f(r))
        evals += 1
        if vals[-1] <= 0:
            break
    if vals[0] <= 0:
        return BoundaryPoint(omega, math.nan, method, lo, lo, "insecure_throughout", evals)
    if vals[-1] > 0:
        return BoundaryPoint(omega, math.nan, method, hi, hi, "secure_throughout", evals)
    a, b = float(rs[len(vals) - 2]), float(rs[len(vals) - 1])
    while b - a >= tol:
        mid = 0.5 * (a + b)
        evals += 1
        if f(mid) > 0:
            a = mid
        else:
            b = mid
    return BoundaryPoint(omega, 0.5 * (a + b), method, a, b, "root", evals)


def _boundary(method, omega_grid, constraint, profile, constellation, s_grid, r_range, tol, scan, workers):
    if isinstance(constraint, (int, float)):
        constraint = TemperatureConstraint(float(constraint))
    lo, hi = r_range
    if not 0 <= lo < hi <= 1:
        raise ParameterError(f"r_E bracket must satisfy 0 <= lo < hi <= 1, got {r_range}")
    if scan < 2:
        raise ParameterError("scan needs at least 2 points")
    omegas = [float(w) for w in omega_grid]
    jobs = [(method, w, constraint, profile, constellation, s_grid, r_range, tol, scan) for w in omegas]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pts = list(pool.map(_solve_point, jobs))
    else:
        pts = [_solve_point(j) for j in jobs]
    return BoundaryCurve(method, constraint.T, constraint.rule, tol, pts)


def weak_boundary(omega_grid, constraint: TemperatureConstraint | float, profile: ChannelProfile | None = None,
                  constellation: Constellation | None = None, r_range=DEFAULT_R_RANGE, tol: float = 1e-4,
                  scan: int = 12, workers: int = 1) -> BoundaryCurve:
    """Root of ``r_E -> C`` at each frequency.

    The bracket is located by a coarse scan upward from ``r_range[0]``; the
    first sign change is bisected to width ``tol``.
    """
    return _boundary("weak", omega_grid, constraint, profile, constellation, None, r_range, tol, scan, workers)


def numeric_boundary(omega_grid, constraint: TemperatureConstraint | float, profile: ChannelProfile | None = None,
                     s_grid=DEFAULT_S_GRID, constellation: Constellation | None = None, r_range=DEFAULT_R_RANGE,
                     tol: float = 1e-4, scan: int = 12, workers: int = 1) -> BoundaryCurve:
    """Root of ``r_E -> max_s R(s)`` over ``s_grid`` at each frequency."""
    grid = validate_grid(s_grid)
    if grid.size == 0:
        raise ParameterError("numeric boundary needs a non-empty s grid")
    return _boundary("numeric", omega_grid, constraint, profile, constellation, tuple(grid), r_range, tol, scan,
                     workers)


# ---------------------------------------------------------------- optimal signal


@dataclass(frozen=True)
class OptimalSignal:
    s: float
    R: float
    grid_index: int

    @property
    def secure(self) -> bool:
        return self.R > 0


def optimal_signal(scenario: ScenarioConfig, s_grid, refine_iters: int = 30) -> OptimalSignal:
    """Best grid point, then golden-section refinement in ``log s`` between
    its neighbours; the refined value replaces the grid value only if larger."""
    grid = validate_grid(s_grid)
    if grid.size == 0:
        raise ParameterError("optimal_signal needs a non-empty grid")
    rates = np.array([key_rate(scenario, float(s)).R for s in grid])
    i = int(np.argmax(rates))
    best_s, best_r = float(grid[i]), float(rates[i])
    if grid.size < 2 or refine_iters <= 0:
        return OptimalSignal(best_s, best_r, i)
    a = math.log(grid[max(i - 1, 0)])
    b = math.log(grid[min(i + 1, grid.size - 1)])
    f = lambda u: key_rate(scenario, math.exp(u)).R  # noqa: E731
    c, d = b - _INV_PHI * (b - a), a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(refine_iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    for u, r in ((c, fc), (d, fd)):
        if r > best_r:
            best_s, best_r = math.exp(u), r
    return OptimalSignal(best_s, best_r, i)
