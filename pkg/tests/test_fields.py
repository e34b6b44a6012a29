"""Field representation: Hermitian symmetry, derivatives, norms, velocity."""

import numpy as np
import pytest

import wall2wall as w2w
from wall2wall.fields import (
    dealias_size,
    field_from_profiles,
    grad_pair,
    grid_to_modes,
    h1_seminorm,
    horizontal_mean_product,
    modes_to_grid,
    pair,
)


def test_hermitian_enforced(dom_small):
    c = np.zeros((dom_small.n_modes, dom_small.N_z), dtype=complex)
    c[dom_small.mode_slot(1)] = 1.0  # missing the conjugate row
    with pytest.raises(ValueError, match="Hermitian"):
        w2w.SpectralField(dom_small, c)


def test_field_shape_checked(dom_small):
    with pytest.raises(ValueError, match="shape"):
        w2w.SpectralField(dom_small, np.zeros((3, 3), dtype=complex))


def test_derivatives_exact(dom_small):
    """d_x and d_z are exact on poly(z) x trig(x) test functions."""
    z = dom_small.z_grid
    prof = z ** 2 * (1 - z)
    f = field_from_profiles(dom_small, {1: prof.astype(complex)})
    dzf = w2w.dz(f).mode_profile(1)
    assert np.max(np.abs(dzf - (2 * z - 3 * z ** 2))) < 1e-10
    dxf = w2w.dx(f).mode_profile(1)
    k = dom_small.wavenumber(1)
    assert np.max(np.abs(dxf - 1j * k * prof)) < 1e-12


def test_streamfunction_zero(dom_small):
    u = w2w.streamfunction_to_velocity(w2w.zero_field(dom_small))
    assert w2w.energy_norm(u) == 0.0


def test_streamfunction_analytic(dom_small):
    """psi = sin(pi z) cos(x) on l_x = 2 pi (interpolated sin resolved at 33)."""
    z = dom_small.z_grid
    psi = field_from_profiles(dom_small, {1: (0.5 * np.sin(np.pi * z)).astype(complex)})
    u = w2w.streamfunction_to_velocity(psi)
    ux_exact = -np.pi * np.cos(np.pi * z) * 0.5
    uz_exact = 0.5j * np.sin(np.pi * z)
    assert np.max(np.abs(u.u_x.mode_profile(1) - ux_exact)) < 1e-10
    assert np.max(np.abs(u.u_z.mode_profile(1) - uz_exact)) < 1e-12


def test_energy_closed_form(dom_small):
    z = dom_small.z_grid
    psi = field_from_profiles(dom_small, {1: (0.5 * np.sin(np.pi * z)).astype(complex)})
    u = w2w.streamfunction_to_velocity(psi)
    assert w2w.energy_norm(u) ** 2 == pytest.approx(np.pi ** 2 / 4 + 0.25, rel=1e-12)


def test_norm_homogeneity(dom_small, rng):
    u = w2w.random_velocity(dom_small, rng, max_mode=3)
    lam = -2.7
    assert w2w.energy_norm(lam * u) == pytest.approx(abs(lam) * w2w.energy_norm(u), rel=1e-13)
    assert w2w.enstrophy_norm(lam * u) == pytest.approx(abs(lam) * w2w.enstrophy_norm(u), rel=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_divergence_free_property(dom_small, seed):
    rng = np.random.default_rng(seed)
    psi = w2w.random_scalar(dom_small, rng, max_mode=4, clamped=True)
    u = w2w.streamfunction_to_velocity(psi)
    div = w2w.dx(u.u_x) + w2w.dz(u.u_z)
    assert np.sqrt(pair(div, div)) <= 1e-10 * max(h1_seminorm(psi), 1e-30)


def test_hermitian_preserved_by_ops(dom_small, rng):
    f = w2w.random_scalar(dom_small, rng, max_mode=4)
    for g in (w2w.dx(f), w2w.dz(f), w2w.laplacian(f), 2.0 * f, f + f):
        asym = np.max(np.abs(g.coeffs - np.conj(g.coeffs[::-1])))
        assert asym < 1e-12 * max(np.max(np.abs(g.coeffs)), 1e-30)


def test_pair_against_quadrature_oracle(dom_small, rng):
    """Volume averages match brute-force quadrature on a dense grid."""
    f = w2w.random_scalar(dom_small, rng, max_mode=3)
    g = w2w.random_scalar(dom_small, rng, max_mode=3)
    n_x = 64
    fv = f.values(n_x=n_x, fine_z=True)
    gv = g.values(n_x=n_x, fine_z=True)
    oracle = float(np.mean(fv * gv, axis=0) @ dom_small.w_fine)
    assert pair(f, g) == pytest.approx(oracle, rel=1e-12, abs=1e-13)


def test_grad_pair_against_oracle(dom_small, rng):
    f = w2w.random_scalar(dom_small, rng, max_mode=3)
    g = w2w.random_scalar(dom_small, rng, max_mode=3)
    fx, fz = w2w.dx(f), w2w.dz(f)
    gx, gz = w2w.dx(g), w2w.dz(g)
    assert grad_pair(f, g) == pytest.approx(pair(fx, gx) + pair(fz, gz), rel=1e-12, abs=1e-13)


def test_transform_roundtrip(dom_small, rng):
    f = w2w.random_scalar(dom_small, rng, max_mode=4)
    n_x = dealias_size(2 * dom_small.M)
    vals = modes_to_grid(f.coeffs, dom_small.M, n_x)
    back = grid_to_modes(vals, dom_small.M)
    assert np.max(np.abs(back - f.coeffs)) < 1e-13 * max(np.max(np.abs(f.coeffs)), 1e-30)


def test_evaluate_matches_grid(dom_small, rng):
    f = w2w.random_scalar(dom_small, rng, max_mode=2)
    xs = np.array([0.0, 1.0, 2.5])
    zs = np.array([0.3, 0.7])
    vals = f.evaluate(xs, zs)
    n_x = 32
    grid_vals = f.values(n_x=n_x)
    x_grid = np.arange(n_x) * dom_small.l_x / n_x
    from wall2wall.domain import interpolation_matrix
    p = interpolation_matrix(dom_small.z_grid, zs)
    for i, x in enumerate(xs):
        j = np.argmin(np.abs(x_grid - x))
        if abs(x_grid[j] - x) < 1e-12:
            assert np.allclose(vals[i], p @ grid_vals[j], atol=1e-12)


def test_horizontal_mean_product(dom_small, rng):
    f = w2w.random_scalar(dom_small, rng, max_mode=3)
    g = w2w.random_scalar(dom_small, rng, max_mode=3)
    prof = horizontal_mean_product(f, g)
    fv = f.values(n_x=64, fine_z=True)
    gv = g.values(n_x=64, fine_z=True)
    assert np.max(np.abs(prof - np.mean(fv * gv, axis=0))) < 1e-12


def test_serialization_roundtrip(dom_small, rng):
    f = w2w.random_scalar(dom_small, rng, max_mode=4)
    text = w2w.field_to_json(f)
    f2 = w2w.field_from_json(text)
    assert f2.domain.l_x == dom_small.l_x
    assert np.array_equal(f2.coeffs, f.coeffs)


def test_serialization_bad_length(dom_small):
    import json
    payload = {"l_x": dom_small.l_x, "M": dom_small.M, "N_z": dom_small.N_z,
               "coeffs": [[0.0, 0.0]] * 5}
    with pytest.raises(ValueError, match="length"):
        w2w.field_from_json(json.dumps(payload))


def test_scale_to_intensity(dom_small, rng):
    u = w2w.random_velocity(dom_small, rng, max_mode=3)
    for constraint, norm_fn in (("energy", w2w.energy_norm),
                                ("enstrophy", w2w.enstrophy_norm)):
        v = w2w.scale_to_intensity(u, 17.0, constraint)
        assert norm_fn(v) == pytest.approx(17.0, rel=1e-12)
    with pytest.raises(ValueError):
        w2w.scale_to_intensity(w2w.streamfunction_to_velocity(w2w.zero_field(dom_small)), 1.0)
