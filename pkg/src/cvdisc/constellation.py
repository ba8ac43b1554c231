"""Discrete modulation sets and their quadrature projections."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

PROB_TOL = 1e-12
FAMILIES = ("four-point", "psk", "grid", "explicit")


@dataclass(frozen=True)
class Constellation:
    points: np.ndarray
    probs: np.ndarray
    label: str = ""

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=complex))
        pr = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if pts.shape != pr.shape or pts.ndim != 1 or pts.size == 0:
            raise ParameterError("points and probs must be equal-length non-empty 1-d sequences")
        if np.any(pr <= 0) or not np.all(np.isfinite(pr)):
            raise ParameterError("probabilities must be positive and finite")
        if abs(pr.sum() - 1.0) > PROB_TOL:
            raise ParameterError(f"probabilities sum to {pr.sum()!r}, not 1")
        if pts.size > 1:
            d = np.abs(pts[:, None] - pts[None, :]) + np.eye(pts.size)
            if np.min(d) == 0.0:
                raise ParameterError("constellation points must be pairwise distinct")
        pts.setflags(write=False)
        pr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", pr)

    def __len__(self):
        return self.points.size

    @property
    def mean(self) -> complex:
        return complex(np.dot(self.probs, self.points))

    @property
    def second_moment(self) -> float:
        """``E|zeta|^2``."""
        return float(np.dot(self.probs, np.abs(self.points) ** 2))

    def recentered(self) -> "Constellation":
        return Constellation(self.points - self.mean, self.probs, self.label)

    def scaled(self, factor: complex) -> "Constellation":
        if factor == 0:
            raise ParameterError("scale factor must be non-zero")
        return Constellation(self.points * factor, self.probs, self.label)

    def rotated(self, phase: float) -> "Constellation":
        return self.scaled(np.exp(1j * phase))

    def min_distance(self) -> float:
        if self.points.size < 2:
            return math.inf
        d = np.abs(self.points[:, None] - self.points[None, :])
        return float(np.min(d[~np.eye(self.points.size, dtype=bool)]))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "points": [[float(z.real), float(z.imag)] for z in self.points],
            "probs": [float(p) for p in self.probs],
        }


@dataclass(frozen=True)
class ProjectedDistribution:
    values: np.ndarray
    probs: np.ndarray

    def entropy(self) -> float:
        p = self.probs
        return float(-np.sum(p * np.log(p)))


def _normalize(probs, n):
    if probs is None:
        return np.full(n, 1.0 / n)
    p = np.asarray(probs, dtype=float)
    if p.shape != (n,):
        raise ParameterError(f"expected {n} probabilities, got {p.shape}")
    total = p.sum()
    if not np.isfinite(total) or total <= 0 or np.any(p <= 0):
        raise ParameterError("probabilities must be positive with a finite sum")
    return p / total


def build_constellation(family: str, *, scale: float = 1.0, m: int = 4, phase: float = 0.0,
                        nx: int = 2, ny: int = 2, points=None, probs=None, label: str | None = None,
                        recenter: bool = True) -> Constellation:
    """Build a named constellation, recentred to zero mean.

    Families: ``four-point`` (scale * (+-1 +- i)), ``psk`` (``m`` points on a
    ring of radius ``scale`` starting at angle ``phase``), ``grid`` (``nx`` by
    ``ny`` rectangular lattice with spacing ``2 scale``), ``explicit``
    (``points`` with optional ``probs``).
    """
    family = family.lower()
    if family == "four-point":
        pts = scale * np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])
    elif family == "psk":
        if m < 1:
            raise ParameterError("psk needs m >= 1")
        pts = scale * np.exp(1j * (phase + 2 * np.pi * np.arange(m) / m))
    elif family == "grid":
        if nx < 1 or ny < 1:
            raise ParameterError("grid needs nx, ny >= 1")
        xs = 2 * scale * (np.arange(nx) - (nx - 1) / 2)
        ys = 2 * scale * (np.arange(ny) - (ny - 1) / 2)
        pts = (xs[:, None] + 1j * ys[None, :]).reshape(-1)
    elif family == "explicit":
        if points is None:
            raise ParameterError("explicit family needs points")
        pts = np.asarray(points, dtype=complex).reshape(-1)
    else:
        raise ParameterError(f"unknown constellation family {family!r}; choose from {FAMILIES}")
    c = Constellation(pts, _normalize(probs, pts.size), label or family)
    return c.recentered() if recenter else c


def shannon_entropy(c: Constellation) -> float:
    p = c.probs
    return float(-np.sum(p * np.log(p)))


def quadrature_means(c: Constellation, phase: complex, s: float) -> np.ndarray:
    """Conditional homodyne means ``sqrt(2) s Re(phase * zeta_j)``."""
    return math.sqrt(2.0) * s * np.real(complex(phase) * c.points)


def project_quadrature(c: Constellation, phase: complex = 1.0, s: float = 1.0,
                       merge_tol: float | None = None) -> ProjectedDistribution:
    """Distribution of homodyne means; values closer than ``merge_tol`` merge.

    The default tolerance ``1e-9 * max|value|`` merges only exact symmetric
    degeneracies.
    """
    if abs(phase) > 1.0 + 1e-12:
        raise ParameterError(f"|phase| = {abs(phase)} exceeds 1")
    vals = quadrature_means(c, phase, s)
    if merge_tol is None:
        merge_tol = 1e-9 * float(np.max(np.abs(vals))) if vals.size else 0.0
    if merge_tol < 0:
        raise ParameterError("merge_tol must be >= 0")
    order = np.argsort(vals, kind="stable")
    vals, probs = vals[order], c.probs[order]
    out_v, out_p = [], []
    start = 0
    for i in range(1, vals.size + 1):
        if i == vals.size or vals[i] - vals[i - 1] > merge_tol:
            p = probs[start:i]
            out_p.append(float(p.sum()))
            out_v.append(float(np.dot(p, vals[start:i]) / p.sum()))
            start = i
    return ProjectedDistribution(np.array(out_v), np.array(out_p))
