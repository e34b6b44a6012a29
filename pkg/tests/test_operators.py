"""Weak operator layer: skew advection, stiffness, Helmholtz inverses."""

import numpy as np
import pytest

import wall2wall as w2w
from wall2wall.advection import kernel_quadrature_energy, profile_interpolator
from wall2wall.fields import field_from_profiles, grad_pair, pair
from wall2wall.operators import (
    AdvectionOperator,
    assemble_dense,
    dual_pair,
    inverse_laplacian,
    pcg,
    stiffness_apply,
    stiffness_inverse,
    weak_source,
)


@pytest.mark.parametrize("seed", range(4))
def test_advection_skew_adjoint(dom_small, seed):
    """<u.grad a, b> = -<u.grad b, a> exactly (the structural fact behind
    every duality identity downstream)."""
    rng = np.random.default_rng(seed)
    u = w2w.random_velocity(dom_small, rng, max_mode=3, pe=5.0)
    adv = AdvectionOperator(u)
    a = w2w.random_scalar(dom_small, rng, max_mode=4)
    b = w2w.random_scalar(dom_small, rng, max_mode=4)
    lhs = dual_pair(adv.apply(a.coeffs), b.coeffs)
    rhs = -dual_pair(adv.apply(b.coeffs), a.coeffs)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_advection_matches_integral(dom_small, rng):
    """The weak apply equals the exact integral of u . grad a times b."""
    u = w2w.random_velocity(dom_small, rng, max_mode=2, pe=3.0)
    adv = AdvectionOperator(u)
    a = w2w.random_scalar(dom_small, rng, max_mode=2)
    b = w2w.random_scalar(dom_small, rng, max_mode=2)
    grad_term = w2w.dx(a) * 1.0, w2w.dz(a)
    ugrada_x = pair_product_oracle(u.u_x, grad_term[0], b, dom_small)
    ugrada_z = pair_product_oracle(u.u_z, grad_term[1], b, dom_small)
    assert dual_pair(adv.apply(a.coeffs), b.coeffs) == pytest.approx(
        ugrada_x + ugrada_z, rel=1e-11, abs=1e-12)


def pair_product_oracle(f, g, h, dom):
    """Volume average of f*g*h by dense-grid quadrature (exact)."""
    n_x = 128
    fv = f.values(n_x=n_x, fine_z=True)
    gv = g.values(n_x=n_x, fine_z=True)
    hv = h.values(n_x=n_x, fine_z=True)
    return float(np.mean(fv * gv * hv, axis=0) @ dom.w_fine)


def test_stiffness_pairing(dom_small, rng):
    a = w2w.random_scalar(dom_small, rng, max_mode=4)
    b = w2w.random_scalar(dom_small, rng, max_mode=4)
    assert dual_pair(stiffness_apply(dom_small, a.coeffs), b.coeffs) == pytest.approx(
        grad_pair(a, b), rel=1e-12, abs=1e-13)


def test_stiffness_inverse_roundtrip(dom_small, rng):
    a = w2w.random_scalar(dom_small, rng, max_mode=4)
    back = stiffness_inverse(dom_small, stiffness_apply(dom_small, a.coeffs))
    assert np.max(np.abs(back - a.coeffs)) < 1e-12 * max(np.max(np.abs(a.coeffs)), 1e-30)


def test_weak_source_pairing(dom_small, rng):
    f = w2w.random_scalar(dom_small, rng, max_mode=3)
    v = w2w.random_scalar(dom_small, rng, max_mode=3)
    assert dual_pair(weak_source(dom_small, f), v.coeffs) == pytest.approx(
        pair(f, v), rel=1e-12, abs=1e-13)


def test_inverse_laplacian_eigenfunctions(dom_small):
    z = dom_small.z_grid
    f0 = field_from_profiles(dom_small, {0: np.sin(np.pi * z).astype(complex)})
    g0 = inverse_laplacian(f0)
    assert np.max(np.abs(g0.mode_profile(0) + np.sin(np.pi * z) / np.pi ** 2)) < 1e-8

    k = dom_small.wavenumber(2)
    f2 = field_from_profiles(dom_small, {2: np.sin(np.pi * z).astype(complex)})
    g2 = inverse_laplacian(f2)
    expect = -np.sin(np.pi * z) / (np.pi ** 2 + k ** 2)
    assert np.max(np.abs(g2.mode_profile(2) - expect)) < 1e-8


def test_inverse_laplacian_composition(dom_small, rng):
    """lap(lap^{-1} f) = f at the interior nodes, for band-limited f."""
    f = w2w.random_scalar(dom_small, rng, max_mode=4)
    g = inverse_laplacian(f)
    back = w2w.laplacian(g)
    err = np.max(np.abs(back.coeffs[:, 1:-1] - f.coeffs[:, 1:-1]))
    assert err < 1e-10 * max(np.max(np.abs(f.coeffs)), 1e-30)


def test_inverse_laplacian_matches_kernel_quadrature(dom_small):
    """Energy of the inverse matches double quadrature of the explicit kernel."""
    z = dom_small.z_grid
    prof = np.sin(np.pi * z) * (1 + 0.3 * np.cos(2 * np.pi * z))
    m = 2
    f = field_from_profiles(dom_small, {m: prof.astype(complex)})
    g = inverse_laplacian(f)
    # <f, -lap^{-1} f> over the +-m pair
    energy = -2.0 * np.real(np.conj(f.mode_profile(m)) @ dom_small.B @ g.mode_profile(m))
    k = dom_small.wavenumber(m)
    interp = profile_interpolator(dom_small.z_grid, prof.astype(complex))
    oracle = 2.0 * kernel_quadrature_energy(k, [(0.0, 1.0, interp)])
    assert energy == pytest.approx(oracle, rel=1e-8)


def test_pcg_pure_diffusion(dom_small, rng):
    f = w2w.random_scalar(dom_small, rng, max_mode=3)
    rhs = weak_source(dom_small, f)
    x, hist = pcg(lambda v: stiffness_apply(dom_small, v), rhs, dom_small,
                  tol=1e-12, max_iter=50)
    assert hist[-1] <= 1e-12
    assert np.max(np.abs(x - stiffness_inverse(dom_small, rhs))) < 1e-10


def test_pcg_failure_raises(dom_small, rng):
    u = w2w.random_velocity(dom_small, rng, max_mode=3, pe=40.0)
    adv = AdvectionOperator(u)
    from wall2wall.operators import symmetrized_apply
    rhs = weak_source(dom_small, u.w)
    with pytest.raises(w2w.SolverError) as err:
        pcg(lambda v: symmetrized_apply(dom_small, adv, v), rhs, dom_small,
            tol=1e-13, max_iter=2)
    assert len(err.value.residual_history) >= 1


def test_dense_assembly_matches_applies(dom_coarse, rng):
    u = w2w.random_velocity(dom_coarse, rng, max_mode=3, pe=5.0)
    adv = AdvectionOperator(u)
    mat, rows, cols = assemble_dense(dom_coarse, adv)
    v = w2w.random_scalar(dom_coarse, rng, max_mode=4)
    direct = stiffness_apply(dom_coarse, v.coeffs) + adv.apply(v.coeffs)
    assert np.max(np.abs(mat @ v.coeffs[rows, cols] - direct[rows, cols])) < 1e-10
