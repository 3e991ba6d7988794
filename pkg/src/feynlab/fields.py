"""Periodic grids, spectral fields and weighted-norm diagnostics.

Conventions, used consistently across the package:

* Grid axes are centered: ``z_j`` runs over ``-L_j/2 + k*L_j/N_j``.
* The frequency lattice on axis ``j`` is ``(2*pi/L_j) * {-N_j/2, ..., N_j/2-1}``
  in numpy FFT order; the last axis is the time axis for the wave operator.
* Synthesis uses ``e^{+i xi.z}`` (numpy ``ifftn``); spectral coefficients are
  Parseval-normalized so that ``sum |c|^2`` equals the discrete ``L^2`` norm
  squared ``sum |u|^2 * cell_volume``.
* Inner products conjugate the second argument.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InsufficientDataError
from .weights import (
    OrderFunction,
    Sector,
    WeightFunction,
    assign_sectors,
    bracket,
    smooth_step,
)

__all__ = [
    "GridSpec",
    "SpectralField",
    "window_array",
    "weighted_norm",
    "sector_energies",
    "decay_rate",
    "random_band_limited",
    "gaussian_source",
    "write_field",
    "read_field",
]


@dataclass(frozen=True)
class GridSpec:
    """A rectangular periodic grid: box extents and point counts per axis."""

    extent: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self) -> None:
        ext = tuple(float(L) for L in self.extent)
        pts = tuple(int(N) for N in self.points)
        if len(ext) != len(pts) or not ext:
            raise DimensionError("extent and points must be equal, nonzero length")
        if any(L <= 0 for L in ext):
            raise ValueError("extents must be positive")
        if any(N < 4 or N % 2 for N in pts):
            raise ValueError("point counts must be even and >= 4")
        object.__setattr__(self, "extent", ext)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def deltas(self) -> tuple[float, ...]:
        return tuple(L / N for L, N in zip(self.extent, self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.deltas))

    @property
    def total_points(self) -> int:
        return int(np.prod(self.points))

    def axes(self) -> list[np.ndarray]:
        return [
            -L / 2.0 + (L / N) * np.arange(N) for L, N in zip(self.extent, self.points)
        ]

    def freq_axes(self) -> list[np.ndarray]:
        return [
            2.0 * np.pi * np.fft.fftfreq(N, d=L / N)
            for L, N in zip(self.extent, self.points)
        ]

    def mesh(self) -> np.ndarray:
        """Stacked coordinates, shape (dim, *points)."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"))

    def freq_mesh(self) -> np.ndarray:
        """Stacked frequency lattice, shape (dim, *points)."""
        return np.stack(np.meshgrid(*self.freq_axes(), indexing="ij"))

    def to_dict(self) -> dict:
        return {"extent": list(self.extent), "points": list(self.points)}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(tuple(d["extent"]), tuple(d["points"]))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """An immutable complex field on a grid with a cached FFT.

    `meta` carries provenance (seeds, regularization parameters, warnings);
    it never affects numerics.
    """

    grid: GridSpec
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != self.grid.points:
            raise DimensionError(
                f"values shape {vals.shape} does not match grid {self.grid.points}"
            )
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_coeffs", None)

    @property
    def coeffs(self) -> np.ndarray:
        """Parseval-normalized spectral coefficients (read-only, cached)."""
        cached = getattr(self, "_coeffs")
        if cached is None:
            scale = np.sqrt(self.grid.cell_volume / self.grid.total_points)
            cached = np.fft.fftn(self.values) * scale
            cached.flags.writeable = False
            object.__setattr__(self, "_coeffs", cached)
        return cached

    @classmethod
    def from_coeffs(
        cls, grid: GridSpec, coeffs: np.ndarray, meta: dict | None = None
    ) -> "SpectralField":
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != grid.points:
            raise DimensionError("coefficient shape does not match grid")
        scale = np.sqrt(grid.cell_volume / grid.total_points)
        vals = np.fft.ifftn(coeffs / scale)
        return cls(grid, vals, meta or {})

    def norm(self) -> float:
        """Discrete L^2 norm, sqrt(sum |u|^2 * cell_volume)."""
        return float(
            np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume)
        )

    def inner(self, other: "SpectralField") -> complex:
        if other.grid != self.grid:
            raise DimensionError("fields on different grids")
        return complex(
            np.sum(self.values * np.conj(other.values)) * self.grid.cell_volume
        )

    def with_meta(self, **extra) -> "SpectralField":
        meta = dict(self.meta)
        meta.update(extra)
        return SpectralField(self.grid, self.values, meta)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        if other.grid != self.grid:
            raise DimensionError("fields on different grids")
        return SpectralField(self.grid, self.values + other.values)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        if other.grid != self.grid:
            raise DimensionError("fields on different grids")
        return SpectralField(self.grid, self.values - other.values)

    def __mul__(self, c: complex) -> "SpectralField":
        return SpectralField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.values)


def window_array(grid: GridSpec, margin: float = 0.2) -> np.ndarray:
    """Smooth box window: 1 on the inner box, 0 in a collar at the boundary.

    The profile is 1 for |z_j| <= (1/2 - margin) L_j and falls smoothly to 0
    one cell short of the boundary on every axis.
    """
    if not 0.0 < margin < 0.5:
        raise ValueError("margin must be in (0, 1/2)")
    out = np.ones(grid.points)
    mesh = grid.mesh()
    for j, (L, dlt) in enumerate(zip(grid.extent, grid.deltas)):
        a = (0.5 - margin) * L
        b = 0.5 * L - dlt
        if b <= a:
            raise ValueError("margin collar narrower than one cell")
        out = out * smooth_step((np.abs(mesh[j]) - a) / (b - a))
    return out


def weighted_norm(u: SpectralField, w: WeightFunction) -> float:
    """Weighted spectral norm sqrt(sum w(xi)^2 |c_xi|^2)."""
    xi = u.grid.freq_mesh()
    wv = w(xi)
    return float(np.sqrt(np.sum((wv * np.abs(u.coeffs)) ** 2)))


def sector_energies(
    u: SpectralField,
    order: OrderFunction | None,
    sectors: list[Sector],
) -> dict[str, float]:
    """Squared weighted energy of u per direction sector.

    The weight is <xi>^(order(xi-hat)); `order=None` means order 0.  The zero
    mode is assigned to the first sector, so the energies sum exactly to the
    squared variable-order norm.
    """
    xi = u.grid.freq_mesh()
    if order is None:
        wv = np.ones(u.grid.points)
    else:
        if order.dim != u.grid.dim:
            raise DimensionError("order function dimension does not match grid")
        wv = bracket(xi) ** order(xi)
    dens = (wv * np.abs(u.coeffs)) ** 2
    idx = assign_sectors(xi, sectors)
    out: dict[str, float] = {}
    for k, sec in enumerate(sectors):
        out[sec.label] = float(np.sum(dens[idx == k]))
    return out


def decay_rate(
    u: SpectralField,
    center: tuple[float, ...] | None = None,
    *,
    margin: float = 0.2,
    detail: bool = False,
):
    """Estimate the radial weight l with u in rho^l L^2_b from dyadic shells.

    Shell masses are L^2 norms with respect to the b-density r^{-n} dz
    (equivalently (dr/r) d omega), so a field decaying like r^{-l} has shell
    norm proportional to rho^l with rho = 1/r.  The returned slope is the
    least-squares fit of log(shell norm) against log(rho).  A smooth window is
    applied internally; shells stay inside the untouched region.
    """
    grid = u.grid
    n = grid.dim
    if center is None:
        center = tuple(0.0 for _ in range(n))
    if len(center) != n:
        raise DimensionError("center dimension does not match grid")
    mesh = grid.mesh()
    r = np.sqrt(
        sum((mesh[j] - center[j]) ** 2 for j in range(n))
    )
    vals = u.values * window_array(grid, margin)
    r_max = (0.5 - margin) * min(
        L - 2.0 * abs(c) for L, c in zip(grid.extent, center)
    )
    r0 = 3.0 * max(grid.deltas)
    edges = [r0]
    while edges[-1] * 2.0 <= r_max:
        edges.append(edges[-1] * 2.0)
    masses, rads = [], []
    dens = np.abs(vals) ** 2 * np.where(r > 0, r, 1.0) ** (-n) * grid.cell_volume
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (r >= lo) & (r < hi)
        m2 = float(np.sum(dens[sel]))
        if m2 > 1e-280:
            masses.append(np.sqrt(m2))
            rads.append(np.sqrt(lo * hi))
    if len(masses) < 3:
        raise InsufficientDataError(
            f"only {len(masses)} usable dyadic shells (need >= 3); "
            "grid too small or field too localized"
        )
    log_rho = -np.log(np.array(rads))
    log_m = np.log(np.array(masses))
    slope = float(np.polyfit(log_rho, log_m, 1)[0])
    if detail:
        return slope, {
            "radii": [float(x) for x in rads],
            "shell_norms": [float(x) for x in masses],
            "margin": margin,
        }
    return slope


def random_band_limited(
    grid: GridSpec,
    seed: int,
    band: float = 0.5,
    decay: float = 2.0,
    zero_mean: bool = True,
) -> SpectralField:
    """Seeded random field with spectrum confined to |xi| <= band * xi_nyq.

    Coefficients are complex Gaussian damped by <xi>^-decay.  The seed is
    recorded in the field metadata.
    """
    rng = np.random.default_rng(seed)
    xi = grid.freq_mesh()
    absxi = np.sqrt(np.sum(xi**2, axis=0))
    nyq = min(np.pi * N / L for N, L in zip(grid.points, grid.extent))
    mask = absxi <= band * nyq
    c = rng.standard_normal(grid.points) + 1j * rng.standard_normal(grid.points)
    c = c * mask / bracket(xi) ** decay
    if zero_mean:
        c[(0,) * grid.dim] = 0.0
    return SpectralField.from_coeffs(
        grid, c, {"seed": int(seed), "band": float(band), "decay": float(decay)}
    )


def gaussian_source(
    grid: GridSpec,
    width: float,
    center: tuple[float, ...] | None = None,
    modulation: tuple[float, ...] | None = None,
    amplitude: float = 1.0,
) -> SpectralField:
    """Gaussian bump of full width ~ 4 sigma (width = 4 * sigma), optionally
    modulated by a plane wave e^{i zeta0 . z}."""
    n = grid.dim
    if center is None:
        center = tuple(0.0 for _ in range(n))
    sigma = width / 4.0
    mesh = grid.mesh()
    r2 = sum((mesh[j] - center[j]) ** 2 for j in range(n))
    vals = amplitude * np.exp(-r2 / (2.0 * sigma**2)).astype(np.complex128)
    if modulation is not None:
        if len(modulation) != n:
            raise DimensionError("modulation dimension does not match grid")
        phase = sum(modulation[j] * mesh[j] for j in range(n))
        vals = vals * np.exp(1j * phase)
    return SpectralField(grid, vals, {"width": float(width)})


_DUMP_FORMAT = "feynlab-field-1"


def write_field(path, u: SpectralField) -> None:
    """Dump format: one JSON header line, then raw little-endian complex128
    (re, im float64 pairs) in row-major axis order."""
    header = {
        "format": _DUMP_FORMAT,
        "grid": u.grid.to_dict(),
        "axis_order": "row-major",
        "endian": "little",
        "seed": u.meta.get("seed"),
        "meta": {
            k: v
            for k, v in u.meta.items()
            if isinstance(v, (int, float, str, bool)) or v is None
        },
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(u.values).astype("<c16").tobytes())


def read_field(path) -> SpectralField:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        header = json.loads(header_line.decode("utf-8"))
        if header.get("format") != _DUMP_FORMAT:
            raise ValueError(f"unrecognized field dump format: {header.get('format')}")
        grid = GridSpec.from_dict(header["grid"])
        raw = fh.read()
    vals = np.frombuffer(raw, dtype="<c16").reshape(grid.points)
    meta = dict(header.get("meta") or {})
    return SpectralField(grid, vals.astype(np.complex128), meta)
