"""Regularized wave-multiplier inverses and their oracles."""

import numpy as np
import pytest

from feynlab.errors import DimensionError, SupportError, ZeroModeError
from feynlab.fields import (
    GridSpec,
    SpectralField,
    gaussian_source,
    random_band_limited,
)
from feynlab.propagators import (
    Kind,
    Prescription,
    characteristic_energy_fraction,
    default_epsilon,
    mode_profile,
    prescription_residual,
    propagate,
    residual,
    scaling_conjugate,
    wick_continuation_study,
    wick_symbol,
)

ALL_KINDS = list(Kind)


def band_limited_off_characteristic(grid, seed, gap_frac=4.0):
    """Random field with every coefficient at least gap_frac * min-gap away
    from the characteristic cone (and no zero mode)."""
    u = random_band_limited(grid, seed=seed)
    zeta = grid.freq_mesh()
    p = zeta[-1] ** 2 - np.sum(zeta[:-1] ** 2, axis=0)
    nz = np.abs(p)[np.abs(p) > 0]
    c = np.array(u.coeffs)
    c[np.abs(p) < gap_frac * float(nz.min())] = 0.0
    return SpectralField.from_coeffs(grid, c, dict(u.meta))


def test_wick_symbol_substitutions():
    assert wick_symbol(np.array([0.0, 1.0]), 0.0) == pytest.approx(1.0)
    got = wick_symbol(np.array([0.0, 1.0]), 1j * np.pi / 2.0)
    assert got == pytest.approx(-1.0, abs=1e-12)
    zeta = np.array([1.0, 0.0, 0.0, 1.0])
    assert wick_symbol(zeta, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_wick_symbol_euclidean_point_negative_definite():
    rng = np.random.default_rng(0)
    zeta = rng.standard_normal((3, 50))
    vals = wick_symbol(zeta, 1j * np.pi / 2.0)
    assert np.all(vals.real < 0)
    assert np.max(np.abs(vals.imag)) <= 1e-12 * np.max(np.abs(vals.real))


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_propagate_zero_source(kind):
    grid = GridSpec((8.0, 8.0), (16, 16))
    f = SpectralField(grid, np.zeros((16, 16)))
    u = propagate(f, Prescription(kind, eps=0.1))
    assert u.norm() == 0.0


def test_propagate_single_mode_feynman():
    grid = GridSpec((8.0, 8.0), (32, 32))
    eps = 0.01
    mesh = grid.mesh()
    zeta0 = (0.0, 2.0 * np.pi / 8.0)
    f = SpectralField(grid, np.exp(1j * (zeta0[0] * mesh[0] + zeta0[1] * mesh[1])))
    u = propagate(f, Prescription(Kind.FEYNMAN, eps=eps))
    mult = np.exp(2j * eps) * zeta0[1] ** 2 - zeta0[0] ** 2
    np.testing.assert_allclose(u.values, f.values / mult, rtol=1e-10)


def test_propagate_matches_dalembert_cone_kernel():
    # independent oracle: convolve the source with the damped cone kernel
    # -(1/2) H(t - |x|) e^{-eps t} built directly in position space
    grid = GridSpec((16.0, 16.0), (256, 256))
    eps = 0.5
    L = grid.extent[0]
    folds = 3
    f = gaussian_source(grid, width=8.0 * grid.deltas[0])
    u = propagate(f, Prescription(Kind.RETARDED, eps=eps))

    # the grid kernel is the full torus periodization of the continuum one:
    # fold forward time periods (damped tail beyond is ~ e^{-3 eps L}) and
    # every spatial image of the cone reached within those times. Edge cells
    # |x| = t sit exactly on the lattice; the jump gets midpoint weight 1/2.
    xax = grid.axes()[0][:, None]
    tax = grid.axes()[1][None, :]
    kernel = np.zeros(grid.points)
    for k in range(folds):
        t = tax + L * k
        damp = -0.5 * np.exp(-eps * t)
        for j in range(-(folds + 1), folds + 2):
            r = np.abs(xax + j * L)
            w = np.where(t > r + 1e-9, 1.0, np.where(np.abs(t - r) <= 1e-9, 0.5, 0.0))
            kernel += w * damp
    kf = np.fft.fftn(np.fft.ifftshift(kernel))
    fc = np.fft.fftn(f.values)
    conv = np.fft.ifftn(kf * fc) * grid.cell_volume
    err = np.sqrt(np.sum(np.abs(u.values - conv) ** 2))
    ref = np.sqrt(np.sum(np.abs(conv) ** 2))
    assert err <= 1e-2 * ref


def test_propagate_rejects_bad_eps():
    with pytest.raises(ValueError):
        Prescription(Kind.FEYNMAN, eps=0.0)
    with pytest.raises(ValueError):
        Prescription(Kind.FEYNMAN, eps=-1.0)


def test_propagate_coarse_grid_warning():
    grid = GridSpec((8.0, 8.0), (16, 16))
    f = random_band_limited(grid, seed=0)
    gap_eps = 1e-6  # far below the lattice symbol gap
    u = propagate(f, Prescription(Kind.FEYNMAN, eps=gap_eps))
    assert u.meta["coarse_grid_warning"] is True
    v = propagate(f, Prescription(Kind.FEYNMAN))  # grid-scaled default
    assert v.meta["coarse_grid_warning"] is False


def test_zero_mode_policies():
    grid = GridSpec((8.0, 8.0), (16, 16))
    eps = 0.1
    vals = np.ones((16, 16)) + 0.1 * np.cos(
        2.0 * np.pi / 8.0 * grid.mesh()[0]
    )
    f = SpectralField(grid, vals)
    # rotated multiplier vanishes at 0: mode projected
    uf = propagate(f, Prescription(Kind.FEYNMAN, eps=eps))
    assert abs(np.mean(uf.values)) <= 1e-12
    assert uf.meta["zero_mode_projected"] is True
    # shifted multiplier is -eps^2 at 0: mode inverted
    ur = propagate(f, Prescription(Kind.RETARDED, eps=eps))
    assert ur.meta["zero_mode_projected"] is False
    np.testing.assert_allclose(np.mean(ur.values), 1.0 / (-(eps**2)), rtol=1e-10)
    for kind in (Kind.RETARDED, Kind.FEYNMAN):
        with pytest.raises(ZeroModeError):
            propagate(f, Prescription(kind, eps=eps, zero_mode="exclude"))


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_residual_exact_inverse(kind):
    grid = GridSpec((8.0, 8.0), (32, 32))
    f = random_band_limited(grid, seed=7)
    p = Prescription(kind, eps=0.05)
    u = propagate(f, p)
    assert prescription_residual(f, u, p) <= 1e-12


def test_residual_wick_parameter_match():
    # the rotation kinds coincide with a Wick parameter: Feynman <-> -i eps
    grid = GridSpec((8.0, 8.0), (32, 32))
    f = random_band_limited(grid, seed=8)
    eps = 0.05
    uf = propagate(f, Prescription(Kind.FEYNMAN, eps=eps))
    ua = propagate(f, Prescription(Kind.ANTIFEYNMAN, eps=eps))
    assert residual(f, uf, -1j * eps) <= 1e-12
    assert residual(f, ua, +1j * eps) <= 1e-12


def test_residual_zero_solution_is_one():
    grid = GridSpec((8.0, 8.0), (16, 16))
    f = random_band_limited(grid, seed=1)
    u = SpectralField(grid, np.zeros((16, 16)))
    assert residual(f, u, 0.0) == pytest.approx(1.0)


def test_residual_zero_source_flagged_absolute():
    grid = GridSpec((8.0, 8.0), (16, 16))
    f = SpectralField(grid, np.zeros((16, 16)))
    u = random_band_limited(grid, seed=2)
    out = residual(f, u, 0.0, detail=True)
    assert out["absolute"] is True
    assert out["value"] > 0.0


def test_residual_eps_sweep_decreases():
    grid = GridSpec((12.0, 12.0), (64, 64))
    f = band_limited_off_characteristic(grid, seed=5)
    res = [
        residual(f, propagate(f, Prescription(Kind.FEYNMAN, eps=eps)), 0.0)
        for eps in (0.2, 0.05, 0.01)
    ]
    assert res[0] > res[1] > res[2]
    assert res[2] <= 0.05


def test_mode_profile_retarded_ode_oracle():
    omega = 3.0
    eps = 1e-3 * omega
    t = np.linspace(-10.0, 10.0, 2001)
    prof = mode_profile(omega, Prescription(Kind.RETARDED, eps=eps), t)
    oracle = -np.where(t >= 0, np.exp(-eps * t) * np.sin(omega * t) / omega, 0.0)
    err = np.linalg.norm(prof - oracle) / np.linalg.norm(oracle)
    assert err <= 1e-3
    # proportionality constant against the damped Green-function shape is -1
    shape = np.where(t >= 0, np.exp(-eps * t) * np.sin(omega * t) / omega, 0.0)
    scale = np.vdot(shape, prof) / np.vdot(shape, shape)
    assert abs(scale - (-1.0)) <= 1e-6


@pytest.mark.parametrize("omega", [0.5, 2.0, 7.0])
def test_mode_profile_feynman_oracle(omega):
    # against the ideal e^{-i omega |t|}/(2 i omega): the regularized profile
    # deviates by O(eps) in phase and O(eps*omega*t) in damping, so the
    # comparison uses eps well under the 1e-3*omega ceiling and a window of a
    # few periods
    eps = 1e-5 * omega
    t = np.linspace(-10.0 / omega, 10.0 / omega, 1601)
    prof = mode_profile(omega, Prescription(Kind.FEYNMAN, eps=eps), t)
    oracle = np.exp(-1j * omega * np.abs(t)) / (2j * omega)
    err = np.linalg.norm(prof - oracle) / np.linalg.norm(oracle)
    assert err <= 1e-3


def test_mode_profile_advanced_is_time_reflection():
    omega = 2.0
    eps = 1e-3
    t = np.linspace(-6.0, 6.0, 1201)
    adv = mode_profile(omega, Prescription(Kind.ADVANCED, eps=eps), t)
    ret = mode_profile(omega, Prescription(Kind.RETARDED, eps=eps), t)
    np.testing.assert_allclose(adv, ret[::-1], atol=1e-12)


def test_mode_profile_zero_mode_errors():
    t = np.linspace(-1.0, 1.0, 11)
    with pytest.raises(ZeroModeError):
        mode_profile(0.0, Prescription(Kind.RETARDED, eps=0.1, zero_mode="exclude"), t)
    with pytest.raises(ZeroModeError):
        mode_profile(0.0, Prescription(Kind.FEYNMAN, eps=0.1), t)


def test_feynman_frequency_signature():
    # t > 0 half of the Feynman profile carries its energy at frequency -omega
    omega = 4.0
    eps = 1e-3 * omega
    t = np.arange(0.0, 40.0, 0.02)
    prof = mode_profile(omega, Prescription(Kind.FEYNMAN, eps=eps), t)
    spec = np.fft.fft(prof)
    freq = 2.0 * np.pi * np.fft.fftfreq(t.size, d=0.02)
    frac = np.sum(np.abs(spec[freq < 0]) ** 2) / np.sum(np.abs(spec) ** 2)
    assert frac >= 0.99


def test_scaling_conjugate_identity_and_unitarity():
    grid = GridSpec((16.0, 16.0), (64, 128))
    f = gaussian_source(grid, width=2.0)
    f0 = scaling_conjugate(f, 0.0)
    np.testing.assert_allclose(f0.values, f.values, atol=1e-12 * np.max(np.abs(f.values)))
    for theta in (-0.3, 0.2, 0.45):
        g = scaling_conjugate(f, theta)
        assert abs(g.norm() - f.norm()) <= 1e-6 * f.norm()


def test_scaling_conjugate_group_law():
    grid = GridSpec((16.0, 16.0), (64, 128))
    f = gaussian_source(grid, width=2.0)
    ab = scaling_conjugate(scaling_conjugate(f, 0.1), 0.15)
    onestep = scaling_conjugate(f, 0.25)
    err = (ab - onestep).norm() / f.norm()
    assert err <= 1e-6


def test_scaling_conjugate_support_overflow():
    grid = GridSpec((8.0, 8.0), (32, 32))
    mesh = grid.mesh()
    # mass right up to the time boundary escapes under expansion
    f = SpectralField(grid, np.exp(-((mesh[0]) ** 2)) * np.cosh(mesh[1] / 2.0))
    with pytest.raises(SupportError):
        scaling_conjugate(f, 1.0)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_linearity(kind):
    grid = GridSpec((8.0, 8.0), (32, 32))
    f = random_band_limited(grid, seed=10)
    g = random_band_limited(grid, seed=11)
    p = Prescription(kind, eps=0.07)
    lhs = propagate(2.0 * f + (-0.5j) * g, p)
    rhs = 2.0 * propagate(f, p) + (-0.5j) * propagate(g, p)
    assert (lhs - rhs).norm() <= 1e-12 * max(rhs.norm(), 1.0)


@pytest.mark.parametrize("pair", [(Kind.RETARDED, Kind.ADVANCED), (Kind.FEYNMAN, Kind.ANTIFEYNMAN)])
@pytest.mark.parametrize("seed", [0, 3, 9])
def test_adjoint_pairs(pair, seed):
    grid = GridSpec((8.0, 8.0), (32, 32))
    f = random_band_limited(grid, seed=seed)
    g = random_band_limited(grid, seed=seed + 50)
    ka, kb = pair
    lhs = propagate(f, Prescription(ka, eps=0.05)).inner(g)
    rhs = f.inner(propagate(g, Prescription(kb, eps=0.05)))
    assert abs(lhs - rhs) <= 1e-8 * f.norm() * g.norm()
    assert ka.adjoint is kb


def test_retarded_forward_support_small_grid():
    grid = GridSpec((16.0, 16.0), (128, 128))
    f = gaussian_source(grid, width=4.0 * grid.deltas[0])
    u = propagate(f, Prescription(Kind.RETARDED, eps=0.8))
    mesh = grid.mesh()
    x, t = mesh[0], mesh[1]
    collar = 3.0 * grid.deltas[0]
    outside = np.abs(x) > t + collar
    frac = np.sum(np.abs(u.values[outside]) ** 2) / np.sum(np.abs(u.values) ** 2)
    assert frac <= 1e-4


def test_wick_study_constant_path():
    grid = GridSpec((8.0, 8.0), (16, 16))
    f = random_band_limited(grid, seed=4)
    g = random_band_limited(grid, seed=5)
    out = wick_continuation_study(f, g, np.array([1j * np.pi / 2.0] * 3))
    assert out["diffs"] == [0.0, 0.0]
    # Euclidean point: multiplier -|zeta|^2, so the matrix element is real
    # negative for g = f
    out2 = wick_continuation_study(f, f, np.array([1j * np.pi / 2.0]))
    v = out2["values"][0]
    assert v.real < 0 and abs(v.imag) <= 1e-10 * abs(v)


def test_wick_study_single_mode_path():
    grid = GridSpec((8.0, 8.0), (16, 16))
    mesh = grid.mesh()
    zeta0 = (2.0 * np.pi / 8.0, 2.0 * 2.0 * np.pi / 8.0)
    vals = np.exp(1j * (zeta0[0] * mesh[0] + zeta0[1] * mesh[1]))
    f = SpectralField(grid, vals)
    path = np.array([0.3j, 0.1j, 0.05j])
    out = wick_continuation_study(f, f, path)
    norm2 = f.norm() ** 2
    for theta, val in zip(out["thetas"], out["values"]):
        want = norm2 / wick_symbol(np.array(zeta0), theta)
        np.testing.assert_allclose(val, want, rtol=1e-10)


def test_wick_study_path_validation():
    grid = GridSpec((8.0, 8.0), (16, 16))
    f = random_band_limited(grid, seed=6)
    with pytest.raises(ValueError):
        wick_continuation_study(f, f, np.array([0.1j, 0.0]))
    with pytest.raises(ValueError):
        wick_continuation_study(f, f, np.array([]))


def test_wick_study_limit_matches_pairing():
    # dual route: path terminal against the regularized-inverse pairing
    grid = GridSpec((12.0, 12.0), (64, 64))
    f = band_limited_off_characteristic(grid, seed=12)
    g = band_limited_off_characteristic(grid, seed=13)
    assert characteristic_energy_fraction(f, 0.5) < 1e-3
    eps_terminal = 2e-3
    path = 1j * np.geomspace(0.4, eps_terminal, 12)
    out = wick_continuation_study(f, g, path)
    diffs = out["diffs"]
    assert all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:]))
    pairing = propagate(f, Prescription(Kind.ANTIFEYNMAN, eps=eps_terminal)).inner(g)
    # spectral pairing of the study uses the same Parseval normalization
    terminal = out["values"][-1]
    assert abs(terminal - pairing) <= 1e-3 * abs(pairing)


def test_default_epsilon_scale():
    grid = GridSpec((8.0, 4.0), (16, 16))
    assert default_epsilon(grid) == pytest.approx(10.0 * (2.0 * np.pi / 4.0) ** 2)


def test_propagate_needs_two_axes():
    grid = GridSpec((8.0,), (16,))
    f = random_band_limited(grid, seed=0)
    with pytest.raises(DimensionError):
        propagate(f, Prescription(Kind.FEYNMAN, eps=0.1))
