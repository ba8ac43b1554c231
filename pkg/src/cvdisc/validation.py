"""Oracle cross-checks and invariant suite behind the ``validate`` command."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import fock
from .constellation import Constellation, project_quadrature
from .errors import CVDiscError
from .gaussian import environment_covariance, symplectic_eigenvalues, thermal_entropy_g
from .rates import (
    ScenarioConfig,
    classicality_diagnostic,
    holevo_bound,
    holevo_bound_fock,
    key_rate,
    mutual_information,
    mutual_information_trapezoid,
    traced_environment_state,
    weak_limit_coefficient,
)

MAX_ORACLE_CUTOFF = 32


@dataclass
class CheckResult:
    name: str
    status: str  # pass | fail | skipped
    detail: str = ""
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status != "fail"

    def line(self) -> str:
        tag = {"pass": "PASS", "fail": "FAIL", "skipped": "SKIP"}[self.status]
        return f"[{tag}] {self.name}: {self.detail}"


class Skip(Exception):
    pass


def _compare(value: float, tol: float, what: str) -> tuple[bool, str]:
    return value <= tol, f"{what} = {value:.3e} (tol {tol:.0e})"


def richardson_curvature(scenario: ScenarioConfig, s0: float = 1e-2, levels: int = 3) -> float:
    """Extrapolate ``2 [lam I - chi](s) / s^2`` to ``s -> 0`` from ``s0 / 2^k``.

    The ratio is even in ``s`` with corrections in powers of ``s^2``, so
    each tableau column removes one power of 4.
    """
    table = []
    for k in range(levels):
        s = s0 / 2**k
        p = key_rate(scenario, s)
        row = [2.0 * p.R / s**2]
        for j in range(1, k + 1):
            row.append(row[j - 1] + (row[j - 1] - table[k - 1][j - 1]) / (4**j - 1))
        table.append(row)
    return table[-1][-1]


def oracle_cutoff(scenario: ScenarioConfig, s_zeta: float, tail: float = 1e-8) -> int:
    n2 = scenario.normal_form.n2 if not scenario.noiseless else 0.0
    n3 = scenario.normal_form.n3 if not scenario.noiseless else 0.0
    th = math.tanh(scenario.mu)
    sq = int(math.ceil(math.log(tail) / (2 * math.log(th)))) if th > 0 else 0
    disp = fock.suggest_cutoff(0.0, scenario.r_E * s_zeta * math.cosh(scenario.mu))
    return max(10, sq, fock.thermal_cutoff(max(n2, n3), tail) + disp)


# ---------------------------------------------------------------- oracle checks


def check_entropy_closed_form(scenario: ScenarioConfig) -> tuple[bool, str]:
    occs = [0.1, 0.5, 1.0, 2.0]
    if not scenario.noiseless:
        occs += [scenario.normal_form.n2, scenario.normal_form.n3]
    worst = 0.0
    for n in occs:
        rho = fock.thermal_density(n, fock.thermal_cutoff(n, 1e-14), tail_tol=1e-14)
        worst = max(worst, abs(fock.von_neumann_entropy(rho) - thermal_entropy_g(n)))
    return _compare(worst, 1e-8, "max |S - g(n)|")


def check_normal_form_covariance(scenario: ScenarioConfig) -> tuple[bool, str]:
    if scenario.noiseless:
        raise Skip("noiseless")
    nf = scenario.normal_form
    ev = symplectic_eigenvalues(environment_covariance(scenario.eavesdropper, scenario.n))
    want = np.sort([2 * nf.n2 + 1, 2 * nf.n3 + 1])
    return _compare(float(np.max(np.abs(ev - want))), 1e-10, "symplectic eigenvalue error")


def _oracle_inputs(scenario: ScenarioConfig):
    if scenario.noiseless:
        raise Skip("noiseless")
    pts = scenario.points
    s = 1.0 / float(np.max(np.abs(pts)))
    cut = oracle_cutoff(scenario, 1.0)
    if cut > MAX_ORACLE_CUTOFF:
        raise Skip(f"oracle cutoff {cut} exceeds {MAX_ORACLE_CUTOFF}")
    return pts, s, cut


def check_purification_environment(scenario: ScenarioConfig) -> tuple[bool, str]:
    pts, s, cut = _oracle_inputs(scenario)
    nf = scenario.normal_form
    p2, _ = fock.thermal_populations(nf.n2, 4 * cut)
    p3, _ = fock.thermal_populations(nf.n3, 4 * cut)
    want = np.sort(np.outer(p2, p3).reshape(-1))[::-1]
    _, rho_e = fock.three_mode_purification_oracle(scenario, pts[0], s, n_max=cut, tail_tol=1e-6)
    got = np.sort(np.linalg.eigvalsh(rho_e.entries))[::-1]
    k = min(got.size, 50)
    return _compare(float(np.max(np.abs(got[:k] - want[:k]))), 1e-6, "environment eigenvalue error")


def displaced_thermal(alpha: complex, occ: float, n_max: int) -> np.ndarray:
    base = fock.thermal_cutoff(occ, 1e-15)
    pops, _ = fock.thermal_populations(occ, base)
    d = fock.displacement_block(alpha, n_max + 1, base + 1)
    return (d * pops[None, :]) @ d.conj().T


def check_purification_receiver(scenario: ScenarioConfig) -> tuple[bool, str]:
    pts, s, cut = _oracle_inputs(scenario)
    rho_b, _ = fock.three_mode_purification_oracle(scenario, pts[0], s, n_max=cut, tail_tol=1e-6)
    want = displaced_thermal(scenario.t_E * s * pts[0], scenario.receiver_occupation, cut)
    return _compare(float(np.max(np.abs(rho_b.entries - want))), 1e-6, "receiver entry error")


def check_holevo_oracle(scenario: ScenarioConfig) -> tuple[bool, str]:
    pts, s, cut = _oracle_inputs(scenario)
    states = [fock.three_mode_purification_oracle(scenario, z, s, n_max=cut, tail_tol=1e-6)[1].entries
              for z in pts]
    avg = sum(p * r for p, r in zip(scenario.probs, states))
    chi_oracle = fock.von_neumann_entropy(avg) - sum(
        p * fock.von_neumann_entropy(r) for p, r in zip(scenario.probs, states))
    return _compare(abs(chi_oracle - holevo_bound(scenario, s)), 1e-5, "|chi_oracle - chi|")


def check_holevo_fock_route(scenario: ScenarioConfig) -> tuple[bool, str]:
    if scenario.noiseless:
        raise Skip("noiseless")
    s = 0.5 / float(np.max(np.abs(scenario.points)))
    cut = oracle_cutoff(scenario, 0.5)
    if cut > 32:
        raise Skip(f"dense cutoff {cut} exceeds 32")
    diff = abs(holevo_bound_fock(scenario, s, n_max=cut) - holevo_bound(scenario, s))
    return _compare(diff, 1e-6, "|chi_fock - chi_gram|")


def check_mutual_information_oracle(scenario: ScenarioConfig) -> tuple[bool, str]:
    s = math.sqrt(scenario.sigma2 / 2) / float(np.max(np.abs(scenario.points)))
    diff = abs(mutual_information(scenario, s) - mutual_information_trapezoid(scenario, s))
    return _compare(diff, 1e-8, "|I_gl - I_trapezoid|")


def check_weak_limit(scenario: ScenarioConfig) -> tuple[bool, str]:
    c = weak_limit_coefficient(scenario)
    if not math.isfinite(c) or c == 0.0:
        raise Skip(f"C = {c}")
    fd = richardson_curvature(scenario)
    return _compare(abs(fd - c) / abs(c), 1e-3, f"relative error of C = {c:.6g}")


# ---------------------------------------------------------------- invariants


def check_density_invariants(scenario: ScenarioConfig) -> tuple[bool, str]:
    states = [fock.thermal_density(0.7, 60)]
    states.append(fock.DensityMatrix(displaced_thermal(1.2 - 0.5j, 0.4, 40), (41,)))
    states.append(traced_environment_state(scenario, 1.0))
    if not scenario.noiseless:
        states.append(traced_environment_state(scenario, 1.0, keep="mixed"))
    for rho in states:
        rho.check(tail_tolerance=1e-8)
    return True, f"{len(states)} states Hermitian, PSD, trace-normalized"


def check_operator_unitarity(scenario: ScenarioConfig) -> tuple[bool, str]:
    ops = [
        fock.displacement_matrix(0.8 + 0.3j, 40, tail_tol=1e-6),
        fock.two_mode_squeeze_matrix(0.5, 40, tail_tol=1e-6),
        fock.beam_splitter_matrix(0.8, 0.6, 12),
    ]
    worst = max(op.unitarity_residual(max_excitation=5) for op in ops)
    return _compare(worst, 1e-8, "max low-excitation unitarity residual")


def check_entropy_unitary_invariance(scenario: ScenarioConfig) -> tuple[bool, str]:
    d = 30
    rho = fock.thermal_density(0.6, d - 1, tail_tol=1e-5).entries
    a = fock.annihilation(d - 1)
    u = expm((0.7 + 0.2j) * a.conj().T - (0.7 - 0.2j) * a)
    diff = abs(fock.von_neumann_entropy(u @ rho @ u.conj().T) - fock.von_neumann_entropy(rho))
    return _compare(diff, 1e-10, "|S(U rho U^dag) - S(rho)|")


def check_ceilings(scenario: ScenarioConfig) -> tuple[bool, str]:
    proj = project_quadrature(Constellation(scenario.points, scenario.probs), scenario.detection_phase, 1.0)
    h_proj, h_src = proj.entropy(), float(-np.sum(scenario.probs * np.log(scenario.probs)))
    worst_i, worst_chi = -math.inf, -math.inf
    for s in (0.0, 0.1, 0.5, 1.0, 3.0, 10.0):
        worst_i = max(worst_i, mutual_information(scenario, s) - h_proj)
        worst_chi = max(worst_chi, holevo_bound(scenario, s) - h_src)
    ok = worst_i <= 1e-9 and worst_chi <= 1e-9
    return ok, f"max I - S(proj) = {worst_i:.2e}, max chi - S(const) = {worst_chi:.2e}"


def check_chi_symmetries(scenario: ScenarioConfig) -> tuple[bool, str]:
    s = 0.8
    base = holevo_bound(scenario, s)
    rot = scenario.with_(constellation=scenario.constellation.rotated(0.7))
    shifted = Constellation(scenario.constellation.points + (0.9 - 0.4j), scenario.probs)
    shift = scenario.with_(constellation=shifted)
    diff = max(abs(holevo_bound(rot, s) - base), abs(holevo_bound(shift, s) - base))
    return _compare(diff, 1e-8, "chi change under rotation / recentering")


def check_evenness(scenario: ScenarioConfig) -> tuple[bool, str]:
    s = 0.6
    di = abs(mutual_information(scenario, s) - mutual_information(scenario, -s))
    dc = abs(holevo_bound(scenario, s) - holevo_bound(scenario, -s))
    return _compare(max(di, dc), 1e-12, "max change under s -> -s")


def check_classicality_monotone(scenario: ScenarioConfig) -> tuple[bool, str]:
    if scenario.noiseless:
        raise Skip("noiseless")
    grid = np.linspace(0.05, 1.0, 20)
    vals = np.array([classicality_diagnostic(scenario, s).max_overlap for s in grid])
    ok = bool(np.all(np.diff(vals) < 0) and classicality_diagnostic(scenario, 0.0).max_overlap == 1.0)
    return ok, f"overlap {vals[0]:.4g} -> {vals[-1]:.4g}, strictly decreasing: {ok}"


ORACLE_CHECKS = (
    ("entropy closed form", check_entropy_closed_form),
    ("normal form vs covariance", check_normal_form_covariance),
    ("purification: environment spectrum", check_purification_environment),
    ("purification: receiver state", check_purification_receiver),
    ("purification: Holevo bound", check_holevo_oracle),
    ("Holevo: Gram vs dense Fock", check_holevo_fock_route),
    ("mutual information vs trapezoid", check_mutual_information_oracle),
    ("weak-limit curvature vs finite differences", check_weak_limit),
)

INVARIANT_CHECKS = (
    ("density-matrix invariants", check_density_invariants),
    ("operator unitarity", check_operator_unitarity),
    ("entropy unitary invariance", check_entropy_unitary_invariance),
    ("I and chi ceilings", check_ceilings),
    ("chi rotation and recentering invariance", check_chi_symmetries),
    ("evenness in s", check_evenness),
    ("classicality monotone in s", check_classicality_monotone),
)


def run_checks(scenario: ScenarioConfig, extra=()) -> list[CheckResult]:
    results = []
    for name, fn in (*ORACLE_CHECKS, *INVARIANT_CHECKS, *extra):
        t0 = time.perf_counter()
        try:
            ok, detail = fn(scenario)
            status = "pass" if ok else "fail"
        except Skip as why:
            status, detail = "skipped", f"skipped ({why})"
        except CVDiscError as exc:
            status, detail = "fail", f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, status, detail, time.perf_counter() - t0))
    return results
