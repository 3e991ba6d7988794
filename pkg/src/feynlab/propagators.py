"""Regularized inverses of the constant-coefficient wave multiplier.

The wave operator on the grid acts diagonally in frequency with symbol
``p(zeta) = zeta_n^2 - |zeta'|^2`` (last axis = time, D = -i d/dz).  The
rotated multiplier is

    wick_symbol(zeta, theta) = e^{-2 theta} zeta_n^2 - |zeta'|^2,

which at theta = +-i pi/2 equals ``-|zeta|^2`` (negative definite; the
Euclidean end of the rotation).

Resolved sign convention (documented once, here).  With the grid's
``e^{+i xi.z}`` synthesis, the four propagators are realized by the
multipliers

    Retarded      (zeta_n - i eps)^2 - |zeta'|^2     poles in Im zeta_n > 0,
                                                     support moves forward,
    Advanced      (zeta_n + i eps)^2 - |zeta'|^2     time reflection of that,
    Feynman       e^{+2 i eps} zeta_n^2 - |zeta'|^2  mode profile
                                                     e^{-i omega |t|}/(2 i omega),
    AntiFeynman   e^{-2 i eps} zeta_n^2 - |zeta'|^2  its conjugate.

These orientations are fixed by the validated targets (forward support for
Retarded, the e^{-i omega |t|} phase signature for Feynman), not asserted a
priori; adjointness pairs Retarded with Advanced and Feynman with AntiFeynman
because the multipliers are pointwise conjugates on the real lattice.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError, ZeroModeError
from .fields import GridSpec, SpectralField

__all__ = [
    "Kind",
    "Prescription",
    "wick_symbol",
    "default_epsilon",
    "propagate",
    "apply_box",
    "residual",
    "prescription_residual",
    "mode_profile",
    "scaling_conjugate",
    "wick_continuation_study",
    "characteristic_energy_fraction",
]


class Kind(Enum):
    RETARDED = "retarded"
    ADVANCED = "advanced"
    FEYNMAN = "feynman"
    ANTIFEYNMAN = "antifeynman"

    @property
    def adjoint(self) -> "Kind":
        return {
            Kind.RETARDED: Kind.ADVANCED,
            Kind.ADVANCED: Kind.RETARDED,
            Kind.FEYNMAN: Kind.ANTIFEYNMAN,
            Kind.ANTIFEYNMAN: Kind.FEYNMAN,
        }[self]


@dataclass(frozen=True)
class Prescription:
    """Which propagator to apply, its regularization and zero-mode policy."""

    kind: Kind
    eps: float | None = None  # None: grid-scaled default
    zero_mode: str = "project"  # or "exclude"

    def __post_init__(self) -> None:
        if self.eps is not None and not self.eps > 0.0:
            raise ValueError("eps must be positive")
        if self.zero_mode not in ("project", "exclude"):
            raise ValueError("zero_mode must be 'project' or 'exclude'")


def _validate_theta(theta: complex, *, allow_real: bool = False) -> complex:
    theta = complex(theta)
    if not -np.pi <= theta.imag <= np.pi:
        raise ValueError("Im theta must lie in [-pi, pi]")
    if theta.imag == 0.0 and not allow_real:
        raise ValueError("multiplier may vanish for real theta; regularize first")
    return theta


def wick_symbol(zeta: np.ndarray, theta: complex) -> np.ndarray:
    """e^{-2 theta} zeta_n^2 - (zeta_1^2 + ... + zeta_{n-1}^2).

    `zeta` is stacked, shape (n, ...), last stacked entry = time frequency.
    Nonvanishing away from zeta = 0 whenever 0 < |Im theta| < pi.
    """
    zeta = np.asarray(zeta, dtype=float)
    if zeta.ndim < 1 or zeta.shape[0] < 2:
        raise DimensionError("wick_symbol needs at least one space and one time axis")
    theta = complex(theta)
    return np.exp(-2.0 * theta) * zeta[-1] ** 2 - np.sum(zeta[:-1] ** 2, axis=0)


def default_epsilon(grid: GridSpec) -> float:
    """Grid-scaled regularization heuristic: 10 * (2 pi / L_min)^2."""
    return 10.0 * (2.0 * np.pi / min(grid.extent)) ** 2


def _plain_symbol(grid: GridSpec) -> np.ndarray:
    zeta = grid.freq_mesh()
    return zeta[-1] ** 2 - np.sum(zeta[:-1] ** 2, axis=0)


def _multiplier(grid: GridSpec, kind: Kind, eps: float) -> np.ndarray:
    zeta = grid.freq_mesh()
    zt = zeta[-1]
    sp = np.sum(zeta[:-1] ** 2, axis=0)
    if kind is Kind.FEYNMAN:
        return np.exp(2j * eps) * zt**2 - sp
    if kind is Kind.ANTIFEYNMAN:
        return np.exp(-2j * eps) * zt**2 - sp
    if kind is Kind.RETARDED:
        return (zt - 1j * eps) ** 2 - sp
    if kind is Kind.ADVANCED:
        return (zt + 1j * eps) ** 2 - sp
    raise ValueError(f"unknown kind {kind}")


def _symbol_gap(grid: GridSpec) -> float:
    """Smallest nonzero |p(zeta)| on the lattice."""
    p = np.abs(_plain_symbol(grid))
    nz = p[p > 0]
    return float(nz.min()) if nz.size else 0.0


def propagate(f: SpectralField, prescription: Prescription) -> SpectralField:
    """Apply the regularized inverse multiplier for the given prescription.

    Zero mode: the rotated multipliers vanish exactly at zeta = 0, so the
    rotation kinds project the zero mode out of source and solution under the
    default policy; the frequency-shift kinds have the nonvanishing value
    -eps^2 there and invert it (this is what makes the retarded output
    constant-free outside the forward cone).  Policy "exclude" raises on any
    zero-mode content regardless of kind.  Metadata records the kind, eps,
    policy, whether the mode was projected, and a coarse-grid warning when
    eps is below half the smallest nonzero |p| on the lattice.
    """
    grid = f.grid
    if grid.dim < 2:
        raise DimensionError("propagation needs at least one space and one time axis")
    eps = prescription.eps if prescription.eps is not None else default_epsilon(grid)
    m = _multiplier(grid, prescription.kind, eps)
    origin = (0,) * grid.dim
    c = f.coeffs.copy()
    if prescription.zero_mode == "exclude":
        total = np.sqrt(np.sum(np.abs(c) ** 2))
        if abs(c[origin]) > 1e-12 * max(total, 1e-300):
            raise ZeroModeError(
                f"source has zero-mode content {abs(c[origin]):.3e} "
                "under policy 'exclude'"
            )
    m_safe = m.copy()
    projected = abs(m[origin]) == 0.0 or prescription.zero_mode == "exclude"
    if projected:
        c[origin] = 0.0
        m_safe[origin] = 1.0  # mode removed; avoid 0/0
    u = c / m_safe
    gap = _symbol_gap(grid)
    meta = {
        "kind": prescription.kind.value,
        "eps": float(eps),
        "zero_mode": prescription.zero_mode,
        "zero_mode_projected": bool(projected),
        "coarse_grid_warning": bool(eps < 0.5 * gap),
    }
    return SpectralField.from_coeffs(grid, u, meta)


def apply_box(u: SpectralField, prescription: Prescription) -> SpectralField:
    """Apply the regularized wave multiplier itself (the map propagate inverts).

    Plain frequency-wise multiplication: the rotation kinds annihilate the
    zero mode (their multiplier vanishes there), the shift kinds scale it by
    -eps^2, matching the propagate conventions so propagate(apply_box(u)) = u
    on zero-mode-free fields.
    """
    grid = u.grid
    if grid.dim < 2:
        raise DimensionError("need at least one space and one time axis")
    eps = prescription.eps if prescription.eps is not None else default_epsilon(grid)
    m = _multiplier(grid, prescription.kind, eps)
    return SpectralField.from_coeffs(
        grid, u.coeffs * m, {"kind": prescription.kind.value, "eps": float(eps)}
    )


def _residual_from_multiplier(
    f: SpectralField, u: SpectralField, m: np.ndarray, detail: bool
):
    origin = (0,) * f.grid.dim
    fc = f.coeffs.copy()
    uc = u.coeffs.copy()
    fc[origin] = 0.0
    uc[origin] = 0.0
    num = np.sqrt(np.sum(np.abs(m * uc - fc) ** 2))
    den = np.sqrt(np.sum(np.abs(fc) ** 2))
    # zero source: relative residual undefined, fall back to the absolute one
    absolute = bool(den == 0.0)
    value = float(num) if absolute else float(num / den)
    if detail:
        return {"value": value, "absolute": absolute}
    return value

def residual(f: SpectralField, u: SpectralField, theta: complex, detail: bool = False):
    """Residual of the rotated operator: |m_theta u - f| / |f|.

    theta may be real; the operator is only measured, never inverted.
    Evaluated on the lattice away from the zero mode (consistent with the
    projection policy; the rotated multiplier always vanishes at zeta = 0).
    A zero source makes the ratio undefined; the absolute residual |m u| is
    returned instead, flagged when detail=True.
    """
    if u.grid != f.grid:
        raise DimensionError("fields on different grids")
    theta = _validate_theta(theta, allow_real=True)
    m = wick_symbol(f.grid.freq_mesh(), theta)
    return _residual_from_multiplier(f, u, m, detail)

def prescription_residual(
    f: SpectralField, u: SpectralField, prescription: Prescription, detail: bool = False
):
    """Same measurement against a kind's own regularized multiplier.

    Exact-inverse check: u = propagate(f, p) gives 0 to rounding for every
    kind, including the frequency-shift kinds that no Wick parameter matches.
    """
    if u.grid != f.grid:
        raise DimensionError("fields on different grids")
    eps = prescription.eps
    if eps is None:
        eps = default_epsilon(f.grid)
    m = _multiplier(f.grid, prescription.kind, eps)
    return _residual_from_multiplier(f, u, m, detail)


def _profile_poly(kind: Kind, omega: float, eps: float) -> tuple[complex, complex, complex]:
    if kind is Kind.FEYNMAN:
        return cmath.exp(2j * eps), 0.0, -(omega**2)
    if kind is Kind.ANTIFEYNMAN:
        return cmath.exp(-2j * eps), 0.0, -(omega**2)
    if kind is Kind.RETARDED:
        return 1.0, -2j * eps, -(eps**2) - omega**2
    if kind is Kind.ADVANCED:
        return 1.0, 2j * eps, -(eps**2) - omega**2
    raise ValueError(f"unknown kind {kind}")


def mode_profile(
    omega: float, prescription: Prescription, tgrid: np.ndarray
) -> np.ndarray:
    """Time profile of the propagator for a unit impulse in a spatial mode.

    Evaluates G(t) = (1/2pi) integral e^{i zeta t} / m(zeta) d zeta for the
    regularized quadratic multiplier m of the prescription, by exact residue
    summation over its two poles: poles in the upper half plane contribute for
    t > 0, lower half plane for t < 0.  For the Retarded kind this gives
    -step(t) e^{-eps t} sin(omega t)/omega; for Feynman, the e^{-i omega |t|}
    phase signature.
    """
    if omega < 0:
        raise ValueError("omega must be >= 0")
    eps = prescription.eps
    if eps is None:
        raise ValueError("mode_profile needs an explicit eps")
    if omega == 0.0:
        if prescription.zero_mode == "exclude":
            raise ZeroModeError("omega = 0 excluded by the zero-mode policy")
        if prescription.kind in (Kind.FEYNMAN, Kind.ANTIFEYNMAN):
            raise ZeroModeError(
                "omega = 0 leaves a real double pole for the rotated multiplier"
            )
    a, b, c = _profile_poly(prescription.kind, omega, eps)
    disc = cmath.sqrt(b * b - 4.0 * a * c)
    r1 = (-b + disc) / (2.0 * a)
    r2 = (-b - disc) / (2.0 * a)
    t = np.asarray(tgrid, dtype=float)
    out = np.zeros(t.shape, dtype=np.complex128)
    scale = max(abs(r1), abs(r2), eps)
    if abs(r1 - r2) <= 1e-12 * scale:
        r = 0.5 * (r1 + r2)
        if abs(r.imag) <= 1e-14 * scale:
            raise ValueError("profile poles on the real axis; increase eps")
        # 1/m = 1/(a (zeta - r)^2); residue of e^{i zeta t} is i t e^{i r t}
        if r.imag > 0:
            sel = t >= 0
            out[sel] = 1j * (1j * t[sel]) * np.exp(1j * r * t[sel]) / a
        else:
            sel = t < 0
            out[sel] = -1j * (1j * t[sel]) * np.exp(1j * r * t[sel]) / a
        return out
    for r, other in ((r1, r2), (r2, r1)):
        if abs(r.imag) <= 1e-14 * scale:
            raise ValueError("profile poles on the real axis; increase eps")
        res_den = a * (r - other)
        if r.imag > 0:
            sel = t >= 0
            out[sel] += 1j * np.exp(1j * r * t[sel]) / res_den
        else:
            sel = t < 0
            out[sel] += -1j * np.exp(1j * r * t[sel]) / res_den
    return out


def scaling_conjugate(f: SpectralField, theta: float) -> SpectralField:
    """Unitary dilation of the time axis: (U_theta f)(z'', z_n) =
    e^{theta/2} f(z'', e^theta z_n), by trigonometric interpolation.

    The factor e^{theta/2} is the Jacobian half-power that makes the map
    unitary on L^2.  Raises SupportError when the dilated reads leave the box
    with non-negligible field mass.
    """
    from .errors import SupportError

    theta = float(theta)
    grid = f.grid
    L = grid.extent[-1]
    N = grid.points[-1]
    axis = grid.axes()[-1]
    read = np.exp(theta) * axis
    # mass of f outside the safely readable time range
    half = L / 2.0 - grid.deltas[-1]
    safe = np.exp(-abs(theta)) * half if theta > 0 else half
    tail_axis = np.abs(axis) > safe
    if np.any(tail_axis):
        total = np.sum(np.abs(f.values) ** 2)
        tail = np.sum(np.abs(f.values[..., tail_axis]) ** 2)
        if total > 0 and tail / total > 1e-8:
            raise SupportError(
                f"time support escapes the box under scaling e^{theta:.3f} "
                f"(tail fraction {tail / total:.2e})"
            )
    # synthesis along the time axis at the dilated sample points
    F = np.fft.fft(f.values, axis=-1) / N
    xi = 2.0 * np.pi * np.fft.fftfreq(N, d=L / N)
    # samples live at z_j = -L/2 + j*delta; coefficient phases are relative to
    # index positions, shift to centered coordinates before evaluating
    E = np.exp(1j * np.outer(read + L / 2.0, xi))
    vals = np.exp(theta / 2.0) * np.einsum("...k,jk->...j", F, E)
    meta = dict(f.meta)
    meta["scaling_theta"] = theta
    return SpectralField(grid, vals, meta)


def characteristic_energy_fraction(u: SpectralField, delta: float) -> float:
    """Fraction of spectral energy within |p(zeta)| < delta of the
    characteristic cone (zero mode excluded from the band)."""
    p = _plain_symbol(u.grid)
    c2 = np.abs(u.coeffs) ** 2
    total = float(np.sum(c2))
    if total == 0.0:
        return 0.0
    band = np.abs(p) < delta
    band[(0,) * u.grid.dim] = False
    return float(np.sum(c2[band]) / total)


def wick_continuation_study(
    f: SpectralField, g: SpectralField, path: np.ndarray
) -> dict:
    """Matrix elements <Box_theta^{-1} f, g> along a path of Wick parameters.

    The path must stay in Im theta in (0, pi/2].  The zero mode is projected
    (the rotated multiplier vanishes there for every theta).  Returns the
    path, the complex values, successive differences and the characteristic
    band energies of the inputs.
    """
    if g.grid != f.grid:
        raise DimensionError("fields on different grids")
    thetas = [complex(t) for t in np.asarray(path).ravel()]
    if not thetas:
        raise ValueError("empty path")
    for t in thetas:
        if not 0.0 < t.imag <= np.pi / 2.0 + 1e-15:
            raise ValueError(
                f"path must stay in Im theta in (0, pi/2]; got {t} "
                "(use propagate's eps limit on the real axis)"
            )
    grid = f.grid
    zeta = grid.freq_mesh()
    origin = (0,) * grid.dim
    fc = f.coeffs.copy()
    gc = g.coeffs.copy()
    fc[origin] = 0.0
    gc[origin] = 0.0
    values = []
    for t in thetas:
        m = wick_symbol(zeta, t)
        m = m.copy()
        m[origin] = 1.0
        values.append(complex(np.sum((fc / m) * np.conj(gc))))
    diffs = [abs(values[j + 1] - values[j]) for j in range(len(values) - 1)]
    gap = _symbol_gap(grid)
    return {
        "thetas": thetas,
        "values": values,
        "diffs": diffs,
        "char_energy_f": characteristic_energy_fraction(f, 0.5 * gap),
        "char_energy_g": characteristic_energy_fraction(g, 0.5 * gap),
    }
