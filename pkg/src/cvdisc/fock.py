"""Truncated Fock-space operator algebra.

Everything here works with dense numpy matrices in the number basis,
one factor ``n_max + 1`` per mode, multi-mode objects in Kronecker order
(first mode is the slowest index).  The same routines serve as the
Holevo-bound engine's building blocks and as the brute-force oracle for
the closed-form Gaussian layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaln

from .errors import NumericError, ParameterError, StateValidityError, TruncationError

DEFAULT_TAIL_TOL = 1e-10
HERMITIAN_TOL = 1e-12
PSD_CLIP = 1e-10
PSD_ERROR = 1e-8


def suggest_cutoff(n_eff: float, z_max: float = 0.0) -> int:
    """Starting cutoff ``ceil(4 (n_eff + |z|^2) + 10)`` for adaptive doubling."""
    return int(math.ceil(4.0 * (n_eff + abs(z_max) ** 2) + 10))


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray
    mode_shape: tuple = ()
    tail_mass: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StateValidityError(f"density matrix must be square, got {m.shape}")
        shape = tuple(int(d) for d in self.mode_shape) or (m.shape[0],)
        if int(np.prod(shape)) != m.shape[0]:
            raise StateValidityError(f"mode_shape {shape} does not match dimension {m.shape[0]}")
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "mode_shape", shape)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))

    def check(self, tail_tolerance: float = 1e-8) -> None:
        """Raise ``StateValidityError`` unless Hermitian, PSD and trace-normalized."""
        m = self.entries
        herm = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if herm > HERMITIAN_TOL:
            raise StateValidityError(f"not Hermitian: max |rho - rho^H| = {herm:.3e}")
        tr = self.trace()
        if not (1.0 - tail_tolerance <= tr <= 1.0 + HERMITIAN_TOL * self.dim):
            raise StateValidityError(f"trace {tr!r} outside [1 - {tail_tolerance}, 1]")
        lo = float(np.min(np.linalg.eigvalsh(_hermitize(m))))
        if lo < -PSD_CLIP:
            raise StateValidityError(f"negative eigenvalue {lo:.3e}")


@dataclass(frozen=True)
class OperatorMatrix:
    entries: np.ndarray
    mode_shape: tuple = ()
    unitary: bool = False

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        shape = tuple(int(d) for d in self.mode_shape) or (m.shape[0],)
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "mode_shape", shape)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def unitarity_residual(self, max_excitation: int | None = None) -> float:
        """``max |U^H U - I|`` restricted to basis states whose total excitation
        is at most ``max_excitation`` (default: half the per-mode cutoff)."""
        u = self.entries
        idx = low_excitation_indices(self.mode_shape, max_excitation)
        block = u[:, idx].conj().T @ u[:, idx]
        return float(np.max(np.abs(block - np.eye(len(idx)))))

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        u = self.entries
        return DensityMatrix(u @ rho.entries @ u.conj().T, rho.mode_shape, rho.tail_mass)


@dataclass(frozen=True)
class WignerGrid:
    x: np.ndarray
    p: np.ndarray
    values: np.ndarray  # values[i, j] = W(x[i], p[j])
    metadata: dict = field(default_factory=dict)

    @property
    def cell_area(self) -> float:
        return float((self.x[1] - self.x[0]) * (self.p[1] - self.p[0]))

    def normalization(self) -> float:
        return float(np.sum(self.values) * self.cell_area)


def low_excitation_indices(mode_shape, max_excitation=None) -> np.ndarray:
    dims = [int(d) for d in mode_shape]
    if max_excitation is None:
        max_excitation = (min(dims) - 1) // 2
    grids = np.indices(dims).reshape(len(dims), -1)
    return np.flatnonzero(grids.sum(axis=0) <= max_excitation)


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


# ---------------------------------------------------------------- states


def thermal_populations(n_bar: float, n_max: int) -> tuple[np.ndarray, float]:
    """Geometric populations over levels 0..n_max, renormalized, and the
    discarded tail mass ``(n/(1+n))^(n_max+1)``."""
    if n_bar < 0:
        raise ParameterError(f"thermal occupation must be >= 0, got {n_bar}")
    if n_max < 0:
        raise ParameterError(f"n_max must be >= 0, got {n_max}")
    k = np.arange(n_max + 1)
    if n_bar == 0:
        pops = np.zeros(n_max + 1)
        pops[0] = 1.0
        return pops, 0.0
    q = n_bar / (1.0 + n_bar)
    log_pops = k * math.log(q) - math.log1p(n_bar)
    pops = np.exp(log_pops)
    tail = q ** (n_max + 1)
    return pops / pops.sum(), tail


def thermal_density(n_bar: float, n_max: int, tail_tol: float = DEFAULT_TAIL_TOL) -> DensityMatrix:
    pops, tail = thermal_populations(n_bar, n_max)
    if tail > tail_tol:
        raise TruncationError(
            f"thermal state n={n_bar} loses tail mass {tail:.3e} at n_max={n_max}",
            tail_mass=tail,
            cutoff=n_max,
        )
    return DensityMatrix(np.diag(pops).astype(complex), (n_max + 1,), tail)


def thermal_cutoff(n_bar: float, tail_tol: float) -> int:
    """Smallest n_max whose thermal tail mass is below ``tail_tol``."""
    if n_bar <= 0:
        return 0
    q = n_bar / (1.0 + n_bar)
    return max(0, int(math.ceil(math.log(tail_tol) / math.log(q))) - 1)


def fock_ket(k: int, n_max: int) -> np.ndarray:
    v = np.zeros(n_max + 1, dtype=complex)
    v[k] = 1.0
    return v


def coherent_ket(alpha: complex, n_max: int) -> np.ndarray:
    k = np.arange(n_max + 1)
    log_mag = -0.5 * abs(alpha) ** 2 - 0.5 * gammaln(k + 1)
    with np.errstate(divide="ignore"):
        powers = np.power(complex(alpha), k)
    return np.exp(log_mag) * powers


def tmsv_ket(mu: float, n_max: int) -> np.ndarray:
    """``F(mu)|0,0>`` on two modes = sum_k tanh(mu)^k / cosh(mu) |k,k>."""
    v = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    k = np.arange(n_max + 1)
    v[k, k] = np.tanh(mu) ** k / np.cosh(mu)
    return v.reshape(-1)


def tensor(*mats: np.ndarray) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


# ---------------------------------------------------------------- operators


def _laguerre_diagonals(alphas: np.ndarray, n_diag: int, n_low: int) -> np.ndarray:
    """``h[p, k, n] = e^{-x/2} |a_p|^k sqrt(n!/(n+k)!) L_n^(k)(x)`` with ``x = |a_p|^2``,
    from the normalized forward Laguerre recurrence seeded in log space."""
    x = (np.abs(alphas) ** 2)[:, None]
    k = np.arange(n_diag, dtype=float)[None, :]
    h = np.zeros((alphas.size, n_diag, n_low))
    log_abs = np.log(np.maximum(np.abs(alphas), 1e-300))[:, None]
    with np.errstate(under="ignore"):
        h[:, :, 0] = np.exp(-x / 2 + k * log_abs - 0.5 * gammaln(k + 1))
    if n_low > 1:
        h[:, :, 1] = h[:, :, 0] * (1 + k - x) / np.sqrt(k + 1)
    for n in range(1, n_low - 1):
        h[:, :, n + 1] = ((2 * n + 1 + k - x) * h[:, :, n] - np.sqrt(n * (n + k)) * h[:, :, n - 1]) / np.sqrt(
            (n + 1) * (n + k + 1)
        )
    h[alphas == 0, 1:, :] = 0.0
    return h


def displacement_stack(alphas: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Exact elements <m|D(a_p)|n> for many amplitudes, shape (P, rows, cols).

    Each diagonal ``m - n = k >= 0`` is ``e^{-x/2} a^k sqrt(n!/(n+k)!) L_n^(k)(x)``
    with ``x = |a|^2``; elements above the diagonal follow from
    ``D(a)^dag = D(-a)``.  These are elements of the untruncated operator, so
    no truncation error enters.
    """
    alphas = np.asarray(alphas, dtype=complex).reshape(-1)
    x = np.abs(alphas) ** 2
    size = max(rows, cols)
    big = x / 2 > 700
    negligible = 2.0 * math.sqrt(size) < np.sqrt(x) - 15.0
    # |<m|D|n>| is negligible unless sqrt(m) + sqrt(n) reaches |alpha|
    if np.any(big & ~negligible):
        bad = float(np.sqrt(x[big & ~negligible].max()))
        raise NumericError(f"displacement |alpha|={bad:.1f} underflows the recurrence")
    out = np.zeros((alphas.size, rows, cols), dtype=complex)
    live = ~big
    if not np.any(live):
        return out
    a = alphas[live]
    h = _laguerre_diagonals(a, size, min(rows, cols))
    m_idx, n_idx = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    diff = m_idx - n_idx
    kk = np.abs(diff)
    low = np.minimum(m_idx, n_idx)
    phase = np.exp(1j * np.angle(a))[:, None, None]
    sign = np.where(diff >= 0, 1.0, -1.0) ** kk
    rot = np.where(diff >= 0, phase ** kk, np.conj(phase) ** kk)
    out[live] = h[:, kk, low] * rot * sign
    return out


def displacement_block(alpha: complex, rows: int, cols: int) -> np.ndarray:
    """Exact elements <m|D(alpha)|n> for m < rows, n < cols."""
    return displacement_stack(np.array([alpha]), rows, cols)[0]


def displacement_element_laguerre(alpha: complex, m: int, n: int) -> complex:
    """Closed-form <m|D(alpha)|n> via associated Laguerre polynomials."""
    alpha = complex(alpha)
    if m >= n:
        pref = math.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
        return pref * alpha ** (m - n) * math.exp(-abs(alpha) ** 2 / 2) * eval_genlaguerre(n, m - n, abs(alpha) ** 2)
    pref = math.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)))
    return pref * (-alpha.conjugate()) ** (n - m) * math.exp(-abs(alpha) ** 2 / 2) * eval_genlaguerre(m, n - m, abs(alpha) ** 2)


def annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), k=1).astype(complex)


def displacement_matrix(alpha: complex, n_max: int, tail_tol: float = DEFAULT_TAIL_TOL) -> OperatorMatrix:
    block = displacement_block(alpha, n_max + 1, n_max + 1)
    tail = max(0.0, 1.0 - float(np.sum(np.abs(block[:, 0]) ** 2)))
    if tail > tail_tol:
        raise TruncationError(
            f"|alpha|={abs(alpha):.3g} too large for n_max={n_max} (coherent tail {tail:.2e})",
            tail_mass=tail,
            cutoff=n_max,
        )
    return OperatorMatrix(block, (n_max + 1,), unitary=True)


def displacement_matrix_expm(alpha: complex, n_max: int, pad: int | None = None) -> np.ndarray:
    """Reference: exponential of the truncated generator on a padded space, cropped."""
    big = n_max + (pad if pad is not None else n_max + 30)
    a = annihilation(big)
    gen = complex(alpha) * a.conj().T - complex(alpha).conjugate() * a
    return expm(gen)[: n_max + 1, : n_max + 1]


def two_mode_squeeze_matrix(mu: float, n_max: int, tail_tol: float = DEFAULT_TAIL_TOL) -> OperatorMatrix:
    """``exp[mu (a2^dag a3^dag - a2 a3)]`` on two modes of cutoff ``n_max``.

    Built from the normal-ordered disentangling
    ``exp(tau K+) cosh(mu)^-(N2+N3+1) exp(-tau K-)``, which is exact on the
    truncated block because every intermediate state stays inside it.
    """
    mu = float(mu)
    if not np.isfinite(mu):
        raise ParameterError("squeezing parameter must be a finite real number")
    d = n_max + 1
    tail = math.tanh(abs(mu)) ** (2 * d)
    if tail > tail_tol:
        raise TruncationError(
            f"sinh^2(mu)={math.sinh(mu) ** 2:.3g} too large for n_max={n_max} (tail {tail:.2e})",
            tail_mass=tail,
            cutoff=n_max,
        )
    tau = math.tanh(mu)
    levels = np.add.outer(np.arange(d), np.arange(d)).reshape(-1)
    middle = np.exp(-(levels + 1) * math.log(math.cosh(mu)))
    u = (_pair_creation_exp(tau, d) * middle[None, :]) @ _pair_creation_exp(-tau, d).T
    return OperatorMatrix(u, (d, d), unitary=True)


def _pair_creation_exp(tau: float, d: int) -> np.ndarray:
    """``exp(tau a2^dag a3^dag)`` on the ``d x d`` block, from
    ``(a2^dag a3^dag)^k |m, n> = sqrt((m+k)!/m! (n+k)!/n!) |m+k, n+k>``."""
    out = np.zeros((d * d, d * d))
    m, n = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    m, n = m.reshape(-1), n.reshape(-1)
    for k in range(d):
        ok = (m + k < d) & (n + k < d)
        if not np.any(ok):
            break
        mm, nn = m[ok], n[ok]
        log_c = 0.5 * (gammaln(mm + k + 1) - gammaln(mm + 1) + gammaln(nn + k + 1) - gammaln(nn + 1)) - gammaln(k + 1)
        coef = np.exp(log_c) * tau**k
        out[(mm + k) * d + nn + k, mm * d + nn] = coef
    return out


def _scattering_generator(t: complex, r: complex) -> np.ndarray:
    s = np.array([[t, np.conj(r)], [-r, np.conj(t)]], dtype=complex)
    w, v = np.linalg.eig(s)
    w = w / np.abs(w)
    k = v @ np.diag(1j * np.angle(w)) @ np.linalg.inv(v)
    return 0.5 * (k - k.conj().T)


def beam_splitter_matrix(t: complex, r: complex, n_max: int, n_max_second: int | None = None) -> OperatorMatrix:
    """Two-mode unitary U with ``U (a^dag . v) U^dag = a^dag . (S v)``,
    ``S = [[t, r*], [-r, t*]]``; a coherent pair (alpha, 0) maps to
    (t alpha, -r alpha).

    The generator conserves total photon number, so each number sector is
    exponentiated in full and only the entries inside the cutoffs are kept.
    The second mode may use its own cutoff.
    """
    t, r = complex(t), complex(r)
    resid = abs(abs(t) ** 2 + abs(r) ** 2 - 1.0)
    if resid > 1e-12:
        raise ParameterError(f"|t|^2 + |r|^2 = {abs(t) ** 2 + abs(r) ** 2!r} violates unitarity")
    n_b = n_max if n_max_second is None else n_max_second
    k = _scattering_generator(t, r)
    d0, d1 = n_max + 1, n_b + 1
    u = np.zeros((d0 * d1, d0 * d1), dtype=complex)
    for total in range(n_max + n_b + 1):
        ks = np.arange(total + 1)  # occupation of first mode
        g = np.zeros((total + 1, total + 1), dtype=complex)
        g[ks, ks] = k[0, 0] * ks + k[1, 1] * (total - ks)
        # a0^dag a1 |k, T-k> = sqrt((k+1)(T-k)) |k+1, T-k-1>
        up = ks[:-1]
        g[up + 1, up] = k[0, 1] * np.sqrt((up + 1) * (total - up))
        g[up, up + 1] = k[1, 0] * np.sqrt((up + 1) * (total - up))
        inside = (ks <= n_max) & (total - ks <= n_b)
        if not inside.any():
            continue
        block = expm(g)
        sel = ks[inside]
        flat = sel * d1 + (total - sel)
        u[np.ix_(flat, flat)] = block[np.ix_(sel, sel)]
    return OperatorMatrix(u, (d0, d1), unitary=True)


def embed(op: np.ndarray, mode_dims: list[int], targets: list[int]) -> np.ndarray:
    """Lift an operator on ``targets`` (contiguous, ordered) to the full space."""
    left = int(np.prod(mode_dims[: targets[0]]))
    right = int(np.prod(mode_dims[targets[-1] + 1 :]))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


# ---------------------------------------------------------------- reductions


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    shape = list(rho.mode_shape)
    nmodes = len(shape)
    keep = sorted(int(k) for k in np.atleast_1d(keep))
    if not keep or any(k < 0 or k >= nmodes for k in keep) or len(set(keep)) != len(keep):
        raise ParameterError(f"invalid modes {keep} for a {nmodes}-mode state")
    t = rho.entries.reshape(shape + shape)
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:nmodes])
    cols = list(letters[nmodes : 2 * nmodes])
    for i in range(nmodes):
        if i not in keep:
            cols[i] = rows[i]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    d = int(np.prod([shape[i] for i in keep]))
    return DensityMatrix(reduced.reshape(d, d), tuple(shape[i] for i in keep), rho.tail_mass)


def entropy_from_eigenvalues(w) -> float:
    """``-sum w ln w`` with the clipping policy: values in [-1e-10, 0] are
    numerical zeros, anything below -1e-8 is an invalid state."""
    w = np.asarray(w, dtype=float)
    if w.size and w.min() < -PSD_ERROR:
        raise StateValidityError(f"eigenvalue {w.min():.3e} below -{PSD_ERROR}")
    w = w[w > 0]
    return float(-np.sum(w * np.log(w)))


def von_neumann_entropy(rho) -> float:
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return entropy_from_eigenvalues(np.linalg.eigvalsh(_hermitize(m)))


def trace_distance(a, b) -> float:
    ma = a.entries if isinstance(a, DensityMatrix) else np.asarray(a)
    mb = b.entries if isinstance(b, DensityMatrix) else np.asarray(b)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(_hermitize(ma - mb)))))


# ---------------------------------------------------------------- phase space


def wigner_grid(rho: DensityMatrix, x, p, chunk: int = 256) -> WignerGrid:
    """Wigner function on the grid ``x`` by ``p``.

    Uses ``W(a) = (1/pi) Tr[rho D(2a) Pi]`` with parity ``Pi`` and
    ``a = (x + i p)/sqrt(2)``, so only the ``dim x dim`` block of ``D(2a)``
    enters.  Conventions: vacuum is ``exp(-x^2 - p^2)/pi``.
    """
    if len(rho.mode_shape) != 1:
        raise ParameterError("wigner_grid needs a single-mode state")
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    xx, pp = np.meshgrid(x, p, indexing="ij")
    alphas = ((xx + 1j * pp) / math.sqrt(2)).reshape(-1)
    d = rho.dim
    weighted = _hermitize(rho.entries).T * ((-1.0) ** np.arange(d))[None, :]
    values = np.empty(alphas.size)
    for start in range(0, alphas.size, chunk):
        b = displacement_stack(2 * alphas[start : start + chunk], d, d)
        values[start : start + chunk] = np.einsum("pmn,mn->p", b, weighted).real / math.pi
    grid = WignerGrid(x, p, values.reshape(xx.shape))
    norm = grid.normalization() if x.size > 1 and p.size > 1 else float("nan")
    grid.metadata.update({"normalization": norm, "coverage_ok": bool(abs(norm - 1.0) <= 1e-3)})
    return grid


def local_maxima(values: np.ndarray, rel_height: float = 0.0) -> list[tuple[int, int]]:
    """Interior strict local maxima (8-neighbourhood) above ``rel_height * max``."""
    v = np.asarray(values)
    floor = rel_height * float(v.max())
    peaks = []
    for i in range(1, v.shape[0] - 1):
        for j in range(1, v.shape[1] - 1):
            c = v[i, j]
            if c <= floor:
                continue
            nb = v[i - 1 : i + 2, j - 1 : j + 2]
            if c >= nb.max() and np.sum(nb == c) == 1:
                peaks.append((i, j))
    return peaks


# ---------------------------------------------------------------- oracle


def three_mode_purification_oracle(scenario, zeta: complex, s: float, n_max: int = 12,
                                   channel_cutoff: int | None = None,
                                   tail_tol: float = 1e-4) -> tuple[DensityMatrix, DensityMatrix]:
    """Brute-force receiver and environment states.

    Channel mode: displaced thermal ``D(s zeta) rho_th(n) D^dag``.  Environment:
    two-mode squeezed vacuum ``F(mu)|00>`` on modes (2, 3).  A beam splitter
    with real (t_E, r_E) mixes the channel with mode 2.  Returns
    ``(Tr_23 rho, Tr_channel rho)``.  ``scenario`` needs ``n``, ``mu``, ``r_E``.

    ``n_max`` is the cutoff of the returned modes; the channel mode, which is
    traced out of the environment state, gets ``channel_cutoff`` (by default
    large enough for the displaced thermal input).  ``rho_B`` is returned at
    ``n_max``.
    """
    n, mu, r_e = float(scenario.n), float(scenario.mu), float(scenario.r_E)
    t_e = math.sqrt(1.0 - r_e**2)
    d = n_max + 1
    alpha = complex(s) * complex(zeta)
    if channel_cutoff is None:
        channel_cutoff = max(n_max, suggest_cutoff(n, abs(alpha)) + thermal_cutoff(n, 1e-14))
    dc = channel_cutoff + 1
    pops, th_tail = thermal_populations(n, channel_cutoff)
    disp = displacement_block(alpha, dc, dc)
    sq = math.tanh(abs(mu)) ** (2 * d)
    coh_tail = float(np.sum(pops * np.clip(1.0 - np.sum(np.abs(disp) ** 2, axis=0), 0.0, None)))
    tail = th_tail + sq + coh_tail
    if tail > tail_tol:
        raise TruncationError(f"purification oracle tail {tail:.2e} at n_max={n_max}", tail_mass=tail, cutoff=n_max)
    env = tmsv_ket(mu, n_max).reshape(d, d)
    bs = beam_splitter_matrix(t_e, r_e, channel_cutoff, n_max).entries
    rho_b = np.zeros((dc, dc), dtype=complex)
    rho_e = np.zeros((d * d, d * d), dtype=complex)
    for k in range(dc):
        if pops[k] < 1e-16:
            continue
        psi = np.einsum("a,bc->abc", disp[:, k], env)  # (channel, mode2, mode3)
        psi = (bs @ psi.reshape(dc * d, d)).reshape(dc, d, d)
        rho_b += pops[k] * np.einsum("abc,dbc->ad", psi, psi.conj())
        flat = psi.reshape(dc, d * d)
        rho_e += pops[k] * (flat.T @ flat.conj())
    rho_b = rho_b[:d, :d]
    return DensityMatrix(rho_b, (d,), tail), DensityMatrix(rho_e, (d, d), tail)
