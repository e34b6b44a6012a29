"""Transport solvers: direct, symmetrized, primal, dual, and their identities."""

import numpy as np
import pytest

import wall2wall as w2w
from wall2wall.fields import grad_pair, h1_seminorm, pair
from wall2wall.transport import dual_parts


def test_zero_velocity(dom_small):
    u = w2w.streamfunction_to_velocity(w2w.zero_field(dom_small))
    theta = w2w.solve_steady_theta(u)
    assert np.max(np.abs(theta.coeffs)) == 0.0
    assert w2w.nu_direct(u) == pytest.approx(1.0)
    assert w2w.nu_primal_opt(u) == pytest.approx(1.0)
    assert w2w.nu_dual_opt(u) == pytest.approx(1.0)


def test_conduction_profile_is_primal_optimal(dom_small):
    u = w2w.streamfunction_to_velocity(w2w.zero_field(dom_small))
    assert w2w.nu_primal(u, w2w.conduction_lift(dom_small)) == pytest.approx(1.0, abs=1e-13)


def test_tolerance_validation(dom_small, rng):
    u = w2w.random_velocity(dom_small, rng, max_mode=3, pe=5.0)
    for bad in (1e-15, 1e-3, 0.5):
        with pytest.raises(ValueError, match="tol"):
            w2w.solve_steady_theta(u, tol=bad)


def test_wall_penetration_rejected(dom_small):
    z = dom_small.z_grid
    # psi with nonzero wall values gives w != 0 at the walls
    psi = w2w.field_from_profiles(dom_small, {1: (1.0 + 0 * z).astype(complex)})
    u = w2w.streamfunction_to_velocity(psi)
    with pytest.raises(ValueError, match="vanish"):
        w2w.solve_steady_theta(u)


def test_perturbative_limit(dom_small, rng):
    """theta(eps u) = eps * theta_1 + O(eps^2) with theta_1 from one
    preconditioner application (the pure-diffusion response)."""
    u = w2w.random_velocity(dom_small, rng, max_mode=3, pe=1.0)
    from wall2wall.operators import stiffness_inverse, weak_source
    theta1 = stiffness_inverse(dom_small, weak_source(dom_small, u.w))
    errs = []
    for eps in (1e-3, 1e-4):
        theta = w2w.solve_steady_theta(eps * u, tol=1e-12)
        errs.append(np.max(np.abs(theta.coeffs - eps * theta1))
                    / np.max(np.abs(eps * theta1)))
    assert errs[0] < 1e-2
    # first-order error shrinks linearly in the amplitude
    assert errs[1] < 0.2 * errs[0]


@pytest.mark.parametrize("seed", range(3))
def test_strong_duality_random(dom_small, seed):
    rng = np.random.default_rng(seed + 10)
    u = w2w.random_velocity(dom_small, rng, max_mode=4, pe=rng.uniform(1, 100))
    rep = w2w.evaluate_transport(u, tol=1e-11)
    assert rep.residuals["duality_gap"] <= 1e-6 * rep.nu_direct
    assert rep.residuals["primal_vs_direct"] <= 1e-5 * rep.nu_direct
    assert rep.residuals["dual_vs_direct"] <= 1e-5 * rep.nu_direct
    assert rep.nu_direct >= 1.0 - 1e-8


def test_symmetrized_identities(dom_small, rng):
    u = w2w.random_velocity(dom_small, rng, max_mode=4, pe=30.0)
    eta, xi = w2w.solve_symmetrized(u, tol=1e-11)
    theta = w2w.solve_steady_theta(u, tol=1e-11)
    # theta = eta + xi
    err = np.max(np.abs((eta + xi).coeffs - theta.coeffs))
    assert err <= 1e-8 * np.max(np.abs(theta.coeffs))
    # orthogonality of the gradients
    rel = abs(grad_pair(eta, xi)) / (h1_seminorm(eta) * h1_seminorm(xi))
    assert rel <= 1e-8
    # Nu - 1 splits into the two Dirichlet energies
    nu = w2w.nu_direct(u, tol=1e-11, theta=theta)
    assert nu - 1 == pytest.approx(grad_pair(eta, eta) + grad_pair(xi, xi), rel=1e-8)


def test_adjoint_solve_relation(dom_small, rng):
    """Solving with -u gives theta(-u) = eta - xi.

    The reversed flow is forced by its own vertical velocity -w, so its
    response is minus the adjoint solution: theta(-u) = -(xi - eta).
    """
    u = w2w.random_velocity(dom_small, rng, max_mode=3, pe=20.0)
    eta, xi = w2w.solve_symmetrized(u, tol=1e-11)
    theta_minus = w2w.solve_steady_theta(-1.0 * u, tol=1e-11)
    err = np.max(np.abs((eta - xi).coeffs - theta_minus.coeffs))
    assert err <= 1e-9 * max(np.max(np.abs(theta_minus.coeffs)), 1e-30)


def test_antisymmetry(dom_small, rng):
    u = w2w.random_velocity(dom_small, rng, max_mode=4, pe=25.0)
    nu_p = w2w.nu_direct(u, tol=1e-11)
    nu_m = w2w.nu_direct(-1.0 * u, tol=1e-11)
    assert nu_m == pytest.approx(nu_p, rel=1e-9)


def test_duality_sandwich(dom_small, rng):
    u = w2w.random_velocity(dom_small, rng, max_mode=4, pe=15.0)
    nu = w2w.nu_direct(u, tol=1e-11)
    for _ in range(5):
        eta_t = w2w.conduction_lift(dom_small) + 0.3 * w2w.random_scalar(dom_small, rng, max_mode=3)
        xi_t = 0.3 * w2w.random_scalar(dom_small, rng, max_mode=3)
        assert w2w.nu_dual(u, xi_t) <= nu + 1e-9 * nu
        assert nu <= w2w.nu_primal(u, eta_t) + 1e-9 * nu


def test_dual_rescaling_formula(dom_small, rng):
    """max over lambda of the dual value at lambda*xi has the closed form
    1 + <w xi>^2 / (<|grad xi|^2> + advection term)."""
    u = w2w.random_velocity(dom_small, rng, max_mode=3, pe=10.0)
    xi = w2w.random_scalar(dom_small, rng, max_mode=3)
    flux, grad, adv = dual_parts(u, xi)
    lam_best = flux / (grad + adv)
    expect = 1.0 + flux ** 2 / (grad + adv)
    val = w2w.nu_dual(u, lam_best * xi)
    assert val == pytest.approx(expect, rel=1e-12)
    # and it is indeed the max over a lambda scan
    for lam in (0.5 * lam_best, 2.0 * lam_best):
        assert w2w.nu_dual(u, lam * xi) <= expect + 1e-12


def test_primal_bc_validation(dom_small, rng):
    u = w2w.random_velocity(dom_small, rng, max_mode=3, pe=5.0)
    with pytest.raises(ValueError, match="eta"):
        w2w.nu_primal(u, w2w.random_scalar(dom_small, rng, max_mode=2))
    bad_xi = w2w.conduction_lift(dom_small)
    with pytest.raises(ValueError, match="vanish"):
        w2w.nu_dual(u, bad_xi)


def test_fast_path_matches_iterative(dom_medium):
    """Single-wavenumber flows: block-tridiagonal solve equals PCG route."""
    u, xi = w2w.build_roll(w2w.RollParams(delta=0.2, l=0.5), dom_medium)
    u = w2w.scale_to_intensity(u, 40.0, "energy")
    th_fast = w2w.solve_steady_theta(u, tol=1e-11, method="fast")
    th_iter = w2w.solve_steady_theta(u, tol=1e-11, method="iterative")
    err = np.max(np.abs(th_fast.coeffs - th_iter.coeffs))
    assert err <= 1e-9 * np.max(np.abs(th_fast.coeffs))


def test_dense_oracle_roll(dom_coarse):
    """Roll at Pe = 100: iterative Nu matches the dense factorization."""
    u, _ = w2w.build_roll(w2w.RollParams(delta=0.25, l=1.0), dom_coarse)
    u = w2w.scale_to_intensity(u, 100.0, "energy")
    nu_it = w2w.nu_direct(u, tol=1e-11)
    th_dense = w2w.solve_steady_theta(u, tol=1e-11, method="dense")
    nu_dense = 1.0 + pair(u.w, th_dense)
    assert nu_it == pytest.approx(nu_dense, rel=1e-8)


def test_report_fields(dom_small, rng):
    u = w2w.random_velocity(dom_small, rng, max_mode=3, pe=12.0)
    rep = w2w.evaluate_transport(u)
    assert rep.pe_enstrophy == pytest.approx(12.0, rel=1e-12)
    assert rep.pe_energy < rep.pe_enstrophy
    assert set(rep.residuals) >= {"duality_gap", "direct_vs_gradient"}
