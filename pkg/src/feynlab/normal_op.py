"""Boundary (normal) operator family in diagonal spherical-harmonic form.

Everything here is exact where it can be: sphere eigenvalues, shifted values
and indicial roots are rational-arithmetic objects (fractions.Fraction), and
pole tests compare against the closed-form root set rather than root-finding.
The only floating-point pieces are the log-radius Fourier transform and the
diagonal family application.

Conventions.  Sphere dimension parameter n means S^{n-1} inside R^n, n >= 2.
Degree-k eigenvalue of the (nonnegative) sphere Laplacian is k(k+n-2); the
shifted family adds (n-2)^2/4, giving exactly (k+(n-2)/2)^2.  The transform
in x = log(rho) uses e^{-i xi x} analysis and the dxi/(2 pi) line measure, so
Plancherel holds with constant one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, PoleError

__all__ = [
    "SpectrumEntry",
    "SphereSpectrum",
    "sphere_spectrum",
    "harmonic_multiplicity",
    "IndicialSet",
    "indicial_roots",
    "MellinLine",
    "LineVerdict",
    "weight_line_invertible",
    "index_count",
    "mellin",
    "mellin_line_norm",
    "weighted_log_norm",
    "hat_normal_apply",
    "hat_normal_solve",
    "normal_report",
]


def harmonic_multiplicity(n: int, k: int) -> int:
    """Dimension of degree-k spherical harmonics on S^{n-1}."""
    if n < 2:
        raise DimensionError("sphere spectrum needs n >= 2")
    if k < 0:
        raise ValueError("degree must be >= 0")
    if k == 0:
        return 1
    low = comb(n + k - 3, k - 2) if k >= 2 else 0
    return comb(n + k - 1, k) - low


@dataclass(frozen=True)
class SpectrumEntry:
    k: int
    eigenvalue: int  # k(k+n-2)
    shifted: Fraction  # (k+(n-2)/2)^2, exact
    shifted_root: Fraction  # k+(n-2)/2, exact
    multiplicity: int


@dataclass(frozen=True)
class SphereSpectrum:
    n: int
    entries: tuple[SpectrumEntry, ...]

    def total_dimension(self) -> int:
        return sum(e.multiplicity for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "entries": [
                {
                    "k": e.k,
                    "eigenvalue": e.eigenvalue,
                    "shifted": [e.shifted.numerator, e.shifted.denominator],
                    "multiplicity": e.multiplicity,
                }
                for e in self.entries
            ],
        }


def sphere_spectrum(n: int, K: int) -> SphereSpectrum:
    """Degrees k = 0..K of the sphere Laplacian with exact shifted values."""
    if n < 2:
        raise DimensionError("sphere spectrum needs n >= 2")
    if K < 0:
        raise ValueError("K must be >= 0")
    half = Fraction(n - 2, 2)
    entries = []
    for k in range(K + 1):
        root = k + half
        entries.append(
            SpectrumEntry(
                k=k,
                eigenvalue=k * (k + n - 2),
                shifted=root * root,
                shifted_root=root,
                multiplicity=harmonic_multiplicity(n, k),
            )
        )
    return SphereSpectrum(n=n, entries=tuple(entries))


@dataclass(frozen=True)
class IndicialSet:
    """Truncated symmetric root set {+-((n-2)/2 + k) : 0 <= k <= K}."""

    n: int
    K: int
    roots: tuple[Fraction, ...]  # sorted ascending, symmetric under negation
    degenerate: bool = field(default=False)  # n = 2: gap collapses to 0

    @property
    def gap(self) -> Fraction:
        return min(abs(r) for r in self.roots)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "K": self.K,
            "roots": [[r.numerator, r.denominator] for r in self.roots],
            "gap": [self.gap.numerator, self.gap.denominator],
            "degenerate": self.degenerate,
        }


def indicial_roots(n: int, K: int) -> IndicialSet:
    if n < 2:
        raise DimensionError("indicial roots need n >= 2")
    if K < 0:
        raise ValueError("K must be >= 0")
    if n == 2:
        warnings.warn("n = 2: indicial gap degenerates to 0", stacklevel=2)
    half = Fraction(n - 2, 2)
    pos = [half + k for k in range(K + 1)]
    roots = sorted({-r for r in pos} | set(pos))
    return IndicialSet(n=n, K=K, roots=tuple(roots), degenerate=(n == 2))


@dataclass(frozen=True)
class MellinLine:
    """Horizontal line Im sigma = -l parameterized by the weight l."""

    l: float


class LineVerdict(NamedTuple):
    invertible: bool
    distance: float


def _nearest_root_distance(n: int, l: float) -> float:
    half = 0.5 * (n - 2)
    a = abs(l)
    # roots are half + k, k >= 0; nearest one to a
    if a <= half:
        return half - a
    k = int(np.floor(a - half))
    return min(abs(a - (half + k)), abs(half + k + 1 - a))


def weight_line_invertible(n: int, l) -> LineVerdict:
    """Whether the weight-l line misses every indicial root, plus the margin.

    A pole on the line kills invertibility outright; off poles the line is at
    worst a Fredholm one (index tracked separately by index_count).
    """
    if n < 2:
        raise DimensionError("need n >= 2")
    lv = float(l.l if isinstance(l, MellinLine) else l)
    d = _nearest_root_distance(n, lv)
    if d < 1e-12:
        return LineVerdict(False, 0.0)
    return LineVerdict(True, d)


def index_count(n: int, l: float, with_multiplicity: bool = True) -> int:
    """Signed count of shifted eigenvalues strictly below l^2.

    Returns -sgn(l) * #{k : (k+(n-2)/2)^2 < l^2}, each degree weighted by its
    harmonic multiplicity by default (the flag exposes the per-degree count).
    Raises PoleError when |l| sits on a root.
    """
    if n < 2:
        raise DimensionError("need n >= 2")
    lv = float(l)
    if _nearest_root_distance(n, lv) < 1e-12:
        raise PoleError(f"weight {lv} lies on an indicial root for n = {n}")
    if lv == 0.0:
        return 0
    half = 0.5 * (n - 2)
    a = abs(lv)
    count = 0
    k = 0
    while half + k < a:
        count += harmonic_multiplicity(n, k) if with_multiplicity else 1
        k += 1
    return -count if lv > 0 else count


def mellin(u: np.ndarray, x: np.ndarray, l: float, xi: np.ndarray) -> np.ndarray:
    """Transform on the line Im sigma = -l: integral of e^{-i xi x} e^{-l x} u dx.

    `x` is a uniform log-radius grid; `u` must be windowed (decayed) at both
    ends after the e^{-l x} weighting, otherwise a warning is emitted and the
    truncated integral is returned as-is.
    """
    u = np.asarray(u, dtype=np.complex128)
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if u.shape != x.shape or u.ndim != 1:
        raise ValueError("u and x must be matching 1D arrays")
    if x.size < 2:
        raise ValueError("need at least two samples")
    w = np.exp(-float(l) * x) * u
    amax = np.max(np.abs(w))
    if amax > 0:
        edge = max(abs(w[0]), abs(w[-1]))
        if edge > 1e-8 * amax:
            warnings.warn(
                "weighted samples do not decay at the grid ends; transform is truncated",
                stacklevel=2,
            )
    dx = x[1] - x[0]
    phase = np.exp(-1j * np.outer(xi, x))
    return phase @ w * dx


def mellin_line_norm(values: np.ndarray, xi: np.ndarray) -> float:
    """L^2 norm on the line with the dxi/(2 pi) measure (trapezoid)."""
    values = np.asarray(values)
    xi = np.asarray(xi, dtype=float)
    return float(np.sqrt(np.trapezoid(np.abs(values) ** 2, xi) / (2.0 * np.pi)))


def weighted_log_norm(u: np.ndarray, x: np.ndarray, l: float) -> float:
    """L^2(dx) norm of e^{-l x} u; at l = 0 this is the L^2(d rho / rho) norm."""
    u = np.asarray(u)
    x = np.asarray(x, dtype=float)
    w = np.abs(np.exp(-float(l) * x) * u) ** 2
    return float(np.sqrt(np.trapezoid(w, x)))


def _diag_factor(n: int, k: int, sigma: complex) -> complex:
    root = k + 0.5 * (n - 2)
    return root * root + sigma * sigma


def hat_normal_apply(sigma: complex, blocks: list, n: int) -> list:
    """Apply the diagonal family: degree-k block scaled by (k+(n-2)/2)^2 + sigma^2.

    `blocks[k]` holds the degree-k coefficients (any shape); sigma = i(k+(n-2)/2)
    annihilates degree k exactly.
    """
    if n < 2:
        raise DimensionError("need n >= 2")
    sigma = complex(sigma)
    return [np.asarray(b) * _diag_factor(n, k, sigma) for k, b in enumerate(blocks)]


def hat_normal_solve(sigma: complex, blocks: list, n: int) -> list:
    """Invert the diagonal family; PoleError when a needed factor vanishes."""
    if n < 2:
        raise DimensionError("need n >= 2")
    sigma = complex(sigma)
    out = []
    for k, b in enumerate(blocks):
        f = _diag_factor(n, k, sigma)
        if abs(f) < 1e-13 * max(1.0, abs(sigma) ** 2):
            raise PoleError(f"sigma = {sigma} is a pole at degree {k}")
        out.append(np.asarray(b) / f)
    return out


def normal_report(n: int, K: int, l_samples) -> dict:
    """JSON-ready summary: spectrum, roots, gap and an index table."""
    spec = sphere_spectrum(n, K)
    roots = indicial_roots(n, K) if n > 2 else None
    if roots is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            roots = indicial_roots(n, K)
    table = []
    for l in l_samples:
        verdict = weight_line_invertible(n, l)
        row = {
            "l": float(l),
            "invertible": verdict.invertible,
            "distance": verdict.distance,
        }
        if verdict.invertible:
            row["index"] = index_count(n, float(l))
            row["index_without_multiplicity"] = index_count(
                n, float(l), with_multiplicity=False
            )
        table.append(row)
    return {
        "n": n,
        "K": K,
        "spectrum": spec.to_dict(),
        "roots": roots.to_dict(),
        "gap": roots.to_dict()["gap"],
        "index_table": table,
    }
