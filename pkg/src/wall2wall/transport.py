"""Steady transport of heat by a prescribed velocity field, three ways.

For steady divergence-free u, the heat flux enhancement Nu can be computed
by (a) solving the advection-diffusion balance directly, (b) minimizing a
convex functional over admissible profiles eta, or (c) maximizing the
concave dual over profiles xi. All three are implemented against the same
weak discretization, whose advection form is exactly skew-adjoint; the
three answers therefore agree to solver tolerance and their mutual gaps
are a meaningful end-to-end correctness check.

The workhorse linear solver is preconditioned CG on the symmetric reduced
operator H = K - A K^{-1} A (a Krylov method preconditioned by the exact
per-mode Dirichlet Helmholtz inverse). Single-wavenumber flows take a
block-tridiagonal direct path over their harmonic ladder, which stays
robust at advection strengths where any Krylov method stalls.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .domain import DomainSpec
from .errors import SolverError
from .fields import (
    SpectralField,
    VelocityField,
    dealias_size,
    energy_norm,
    enstrophy_norm,
    field_from_profiles,
    grad_pair,
    modes_to_grid,
    pair,
    zero_field,
)
from .operators import (
    AdvectionOperator,
    assemble_dense,
    dual_pair,
    pcg,
    stiffness_apply,
    stiffness_inverse,
    symmetrized_apply,
    weak_source,
)

_TOL_RANGE = (1e-14, 1e-4)


@dataclass(frozen=True)
class TransportReport:
    """Nu by three routes plus the intensity of the advecting field."""

    nu_direct: float
    nu_primal: float
    nu_dual: float
    pe_energy: float
    pe_enstrophy: float
    residuals: dict


def _check_tol(tol: float) -> None:
    if not (_TOL_RANGE[0] < tol < _TOL_RANGE[1]):
        raise ValueError(f"tol must lie in {_TOL_RANGE}, got {tol}")


def _check_wall_penetration(u: VelocityField) -> None:
    w = u.w.coeffs
    scale = max(np.max(np.abs(w)), 1e-300)
    leak = max(np.max(np.abs(w[:, 0])), np.max(np.abs(w[:, -1])))
    if leak > 1e-8 * scale:
        raise ValueError(f"w does not vanish at the walls (relative leak {leak / scale:.2e})")


def conduction_lift(domain: DomainSpec) -> SpectralField:
    """The linear profile 1 - z carried by the mode-0 row."""
    return field_from_profiles(domain, {0: 1.0 - domain.z_grid})


# -- sub-lattice reduction ----------------------------------------------------

def _mode_gcd(u: VelocityField) -> int:
    modes = set()
    for f in (u.u_x, u.u_z):
        modes.update(int(abs(m)) for m in f.active_modes() if m != 0)
    g = 0
    for m in modes:
        g = math.gcd(g, m)
    return max(g, 1)


def _decimate_domain(domain: DomainSpec, g: int) -> DomainSpec:
    dom_g = replace(domain, l_x=domain.l_x / g, M=domain.M // g)
    # z-operators are horizontal-period independent; share the lazy cache
    object.__setattr__(dom_g, "_cache", domain._cache)
    return dom_g


def _decimate_field(f: SpectralField, dom_g: DomainSpec, g: int) -> SpectralField:
    big_m = f.domain.M
    rows = big_m + g * dom_g.mode_numbers
    return SpectralField(dom_g, f.coeffs[rows])


def _embed_coeffs(c_small: np.ndarray, domain: DomainSpec, dom_g: DomainSpec, g: int) -> np.ndarray:
    out = np.zeros((domain.n_modes, domain.N_z), dtype=complex)
    out[domain.M + g * dom_g.mode_numbers] = c_small
    return out


def _reduced(u: VelocityField) -> tuple[DomainSpec, VelocityField, int]:
    """Velocity restricted to its harmonic sub-lattice (exact reduction)."""
    g = _mode_gcd(u)
    if g == 1:
        return u.domain, u, 1
    dom_g = _decimate_domain(u.domain, g)
    u_g = VelocityField(
        _decimate_field(u.psi, dom_g, g),
        _decimate_field(u.u_x, dom_g, g),
        _decimate_field(u.u_z, dom_g, g),
    )
    return dom_g, u_g, g


# -- block-tridiagonal direct solve for single-wavenumber flows ---------------

def _is_single_wavenumber(u: VelocityField) -> bool:
    modes = set()
    for f in (u.u_x, u.u_z):
        modes.update(int(abs(m)) for m in f.active_modes() if m != 0)
    return modes == {1}


def _block_tridiag_solve(dom: DomainSpec, u: VelocityField,
                         rhs_weak: np.ndarray) -> np.ndarray:
    """Direct solve of (K + A) theta = rhs for u supported on modes {0, +-1}.

    The advection couples harmonic j only to j and j +- 1, so the system is
    block tridiagonal over the mode ladder and solved by block elimination.
    """
    fine = dom.P_fine
    ux_p = u.u_x.mode_profile(1) @ fine.T
    uz_p = u.u_z.mode_profile(1) @ fine.T
    ux_0 = np.real(u.u_x.mode_profile(0) @ fine.T)

    wp = dom.w_fine[:, None] * fine

    def mult(profile_fine):
        """Interior block of the weak multiplication operator."""
        return fine.T @ (profile_fine[:, None] * wp)

    d_cols = dom.D[:, 1:-1]
    tx_p = mult(ux_p)[1:-1, 1:-1]
    tz_p = (mult(uz_p) @ d_cols)[1:-1, :]
    tx_m = mult(np.conj(ux_p))[1:-1, 1:-1]
    tz_m = (mult(np.conj(uz_p)) @ d_cols)[1:-1, :]
    tx_0 = mult(ux_0)[1:-1, 1:-1]

    s_int = d_cols.T @ dom.B @ d_cols
    b_int = dom.B[1:-1, 1:-1]
    ks = dom.wavenumbers

    def diag_block(slot):
        k = ks[slot]
        return s_int + (k * k) * b_int + 1j * k * tx_0

    def coupling(s, slot_col):
        """Row block for test harmonic = column harmonic + s."""
        k = ks[slot_col]
        tx, tz = (tx_p, tz_p) if s == 1 else (tx_m, tz_m)
        return 1j * k * tx + tz

    n_b = dom.n_modes
    carries = [None] * n_b
    ys = [None] * n_b
    carry = None
    for j in range(n_b):
        d = diag_block(j)
        r = rhs_weak[j, 1:-1].astype(complex)
        if j > 0:
            sub = coupling(1, j - 1)
            d = d - sub @ carry
            r = r - sub @ ys[j - 1]
        lu = lu_factor(d)
        if j < n_b - 1:
            carry = lu_solve(lu, coupling(-1, j + 1))
            carries[j] = carry
        ys[j] = lu_solve(lu, r)

    out = np.zeros((n_b, dom.N_z), dtype=complex)
    out[n_b - 1, 1:-1] = ys[n_b - 1]
    for j in range(n_b - 2, -1, -1):
        out[j, 1:-1] = ys[j] - carries[j] @ out[j + 1, 1:-1]
    return out


# -- main solvers -------------------------------------------------------------

def _solve_reduced_theta(dom: DomainSpec, u: VelocityField, tol: float,
                         method: str, max_iter: int | None):
    """theta on the (possibly decimated) domain; returns (coeffs, info)."""
    f_w = weak_source(dom, u.w)
    if not np.any(f_w):
        return np.zeros((dom.n_modes, dom.N_z), dtype=complex), {
            "method": "trivial", "residual": 0.0, "history": [0.0]}

    if max_iter is None:
        max_iter = 10 * dom.n_modes * dom.N_z

    if method == "auto":
        method = "fast" if _is_single_wavenumber(u) else "iterative"

    adv = AdvectionOperator(u)
    if method == "fast":
        theta = _block_tridiag_solve(dom, u, f_w)
        history = []
    elif method == "dense":
        mat, rows, cols = assemble_dense(dom, adv)
        vec = np.linalg.solve(mat, f_w[rows, cols])
        theta = np.zeros((dom.n_modes, dom.N_z), dtype=complex)
        theta[rows, cols] = vec
        history = []
    elif method == "iterative":
        apply_h = lambda v: symmetrized_apply(dom, adv, v)
        xi, history = pcg(apply_h, f_w, dom, tol, max_iter)
        eta = -stiffness_inverse(dom, adv.apply(xi))
        theta = eta + xi
    else:
        raise ValueError(f"unknown method {method!r}")

    res = f_w - stiffness_apply(dom, theta) - adv.apply(theta)
    res_norm = np.sqrt(max(dual_pair(res, stiffness_inverse(dom, res)), 0.0))
    rhs_norm = np.sqrt(max(dual_pair(f_w, stiffness_inverse(dom, f_w)), 0.0))
    rel = res_norm / rhs_norm
    if rel > tol:
        raise SolverError(
            f"steady solve residual {rel:.3e} exceeds tol {tol:.1e}",
            residual_history=list(history) + [rel],
        )
    return theta, {"method": method, "residual": rel, "history": list(history)}


def solve_steady_theta(u: VelocityField, tol: float = 1e-10,
                       method: str = "auto", max_iter: int | None = None,
                       check_max_principle: bool = True) -> SpectralField:
    """Temperature deviation theta solving u . grad theta = lap theta + w.

    theta vanishes at the walls; T = theta + (1 - z) is the full temperature.
    The discrete residual (dual norm, relative to the forcing) is driven
    below tol.

    Args:
        u: divergence-free velocity with w = 0 at the walls.
        tol: relative residual target in (1e-14, 1e-4).
        method: "auto", "fast" (block-tridiagonal direct, single-wavenumber
            flows), "iterative" (preconditioned CG on the symmetric form),
            or "dense" (direct factorization oracle, small problems only).
        max_iter: iteration cap; defaults to 10 * n_modes * N_z.
        check_max_principle: emit a warning if T leaves [0, 1] by more than
            a spectral-overshoot allowance at the collocation points.

    Raises:
        SolverError: when the residual target is not met.
        ValueError: invalid tol or wall-penetrating w.
    """
    _check_tol(tol)
    _check_wall_penetration(u)
    domain = u.domain
    dom_g, u_g, g = _reduced(u)
    theta_g, _info = _solve_reduced_theta(dom_g, u_g, tol, method, max_iter)
    if g > 1:
        coeffs = _embed_coeffs(theta_g, domain, dom_g, g)
    else:
        coeffs = theta_g
    theta = SpectralField(domain, coeffs)
    if check_max_principle:
        _soft_max_principle(theta)
    return theta


def _soft_max_principle(theta: SpectralField) -> None:
    dom = theta.domain
    n_x = dealias_size(max(theta.max_active_mode(), dom.M, 1))
    t_vals = modes_to_grid(theta.coeffs, dom.M, n_x) + (1.0 - dom.z_grid)[None, :]
    overshoot = max(float(-t_vals.min()), float(t_vals.max() - 1.0))
    if overshoot > 1e-3:
        warnings.warn(
            f"temperature leaves [0,1] by {overshoot:.2e} at collocation points "
            "(spectral truncation overshoot)",
            stacklevel=3,
        )


def nu_direct(u: VelocityField, tol: float = 1e-10, method: str = "auto",
              theta: SpectralField | None = None) -> float:
    """Nu = 1 + <w theta>, verified against <|grad T|^2> as a cross-check."""
    if theta is None:
        theta = solve_steady_theta(u, tol, method=method)
    flux = pair(u.w, theta)
    nu_flux = 1.0 + flux
    nu_grad = 1.0 + grad_pair(theta, theta)
    if abs(nu_flux - nu_grad) > 10 * tol * max(nu_flux, 1.0):
        raise SolverError(
            f"flux/gradient forms of Nu disagree: {nu_flux!r} vs {nu_grad!r}")
    if nu_flux < 1.0 - 1e-8:
        raise SolverError(f"computed Nu = {nu_flux!r} < 1")
    return nu_flux


def solve_symmetrized(u: VelocityField, tol: float = 1e-10,
                      method: str = "auto") -> tuple[SpectralField, SpectralField]:
    """Solve the coupled symmetric system for (eta, xi).

    eta and xi vanish at the walls and satisfy (weakly)
    u . grad eta = lap xi + w and u . grad xi = lap eta; theta = eta + xi
    reproduces the direct solve and grad eta is orthogonal to grad xi.
    """
    _check_tol(tol)
    _check_wall_penetration(u)
    domain = u.domain
    dom_g, u_g, g = _reduced(u)
    f_w = weak_source(dom_g, u_g.w)
    if not np.any(f_w):
        return zero_field(domain), zero_field(domain)

    if method == "auto":
        method = "fast" if _is_single_wavenumber(u_g) else "iterative"

    adv = AdvectionOperator(u_g)
    if method == "fast":
        theta_p = _block_tridiag_solve(dom_g, u_g, f_w)
        theta_m = _block_tridiag_solve(dom_g, -1.0 * u_g, f_w)
        eta_c = 0.5 * (theta_p - theta_m)
        xi_c = 0.5 * (theta_p + theta_m)
    else:
        max_iter = 10 * dom_g.n_modes * dom_g.N_z
        apply_h = lambda v: symmetrized_apply(dom_g, adv, v)
        xi_c, _ = pcg(apply_h, f_w, dom_g, tol, max_iter)
        eta_c = -stiffness_inverse(dom_g, adv.apply(xi_c))

    res1 = f_w - adv.apply(eta_c) - stiffness_apply(dom_g, xi_c)
    res2 = -adv.apply(xi_c) - stiffness_apply(dom_g, eta_c)
    rhs_norm = np.sqrt(max(dual_pair(f_w, stiffness_inverse(dom_g, f_w)), 0.0))
    worst = max(
        np.sqrt(max(dual_pair(res1, stiffness_inverse(dom_g, res1)), 0.0)),
        np.sqrt(max(dual_pair(res2, stiffness_inverse(dom_g, res2)), 0.0)),
    ) / rhs_norm
    if worst > 10 * tol:
        raise SolverError(f"symmetrized residual {worst:.3e} exceeds {10 * tol:.1e}")

    if g > 1:
        eta_c = _embed_coeffs(eta_c, domain, dom_g, g)
        xi_c = _embed_coeffs(xi_c, domain, dom_g, g)
    return SpectralField(domain, eta_c), SpectralField(domain, xi_c)


# -- variational evaluations ---------------------------------------------------

def _nonlocal_term(dom: DomainSpec, adv: AdvectionOperator, v: np.ndarray,
                   shift: np.ndarray | None = None) -> float:
    """<|grad lap^{-1} div(u v)|^2> for nodal coefficients v (weak form)."""
    j = adv.apply(v)
    if shift is not None:
        j = j + shift
    return dual_pair(j, stiffness_inverse(dom, j))


def _check_primal_bc(eta: SpectralField) -> None:
    dom = eta.domain
    scale = max(np.max(np.abs(eta.coeffs)), 1.0)
    errs = [abs(eta.mode_profile(0)[0] - 1.0), abs(eta.mode_profile(0)[-1])]
    for m in dom.mode_numbers:
        if m == 0:
            continue
        prof = eta.coeffs[dom.mode_slot(m)]
        errs.append(abs(prof[0]))
        errs.append(abs(prof[-1]))
    if max(errs) > 1e-8 * scale:
        raise ValueError("eta must equal 1 at z=0 and 0 at z=1")


def _check_dirichlet(xi: SpectralField, name: str = "xi") -> None:
    c = xi.coeffs
    scale = max(np.max(np.abs(c)), 1e-300)
    if max(np.max(np.abs(c[:, 0])), np.max(np.abs(c[:, -1]))) > 1e-8 * scale:
        raise ValueError(f"{name} must vanish at the walls")


def nu_primal(u: VelocityField, eta: SpectralField) -> float:
    """Upper bound on Nu from an admissible profile eta.

    Evaluates <|grad eta|^2 + |grad lap^{-1} div(u eta)|^2> for eta with
    eta = 1 at z = 0 and eta = 0 at z = 1. Equals Nu at the minimizer.
    """
    _check_primal_bc(eta)
    adv = AdvectionOperator(u)
    return grad_pair(eta, eta) + _nonlocal_term(u.domain, adv, eta.coeffs)


def nu_dual(u: VelocityField, xi: SpectralField) -> float:
    """Lower bound on Nu from a wall-vanishing profile xi.

    Evaluates 1 + <2 w xi - |grad xi|^2 - |grad lap^{-1} div(u xi)|^2>;
    equals Nu at the maximizer.
    """
    flux, grad, adv_term = dual_parts(u, xi)
    return 1.0 + 2.0 * flux - grad - adv_term


def dual_parts(u: VelocityField, xi: SpectralField) -> tuple[float, float, float]:
    """(<w xi>, <|grad xi|^2>, advection term) for the dual functional."""
    _check_dirichlet(xi)
    adv = AdvectionOperator(u)
    return (
        pair(u.w, xi),
        grad_pair(xi, xi),
        _nonlocal_term(u.domain, adv, xi.coeffs),
    )


def nu_primal_opt(u: VelocityField, tol: float = 1e-10) -> float:
    """Minimum of the primal functional (equals Nu for steady u)."""
    _check_tol(tol)
    domain = u.domain
    dom_g, u_g, g = _reduced(u)
    f_w = weak_source(dom_g, u_g.w)
    if not np.any(f_w):
        return 1.0
    adv = AdvectionOperator(u_g)
    if _is_single_wavenumber(u_g):
        eta_c, _ = _symmetrized_fast(dom_g, u_g, f_w)
    else:
        rhs = -adv.apply(stiffness_inverse(dom_g, f_w))
        max_iter = 10 * dom_g.n_modes * dom_g.N_z
        apply_h = lambda v: symmetrized_apply(dom_g, adv, v)
        eta_c, _ = pcg(apply_h, rhs, dom_g, tol, max_iter)
    eta_full = _embed_coeffs(eta_c, domain, dom_g, g) if g > 1 else eta_c
    lift = conduction_lift(domain)
    eta = SpectralField(domain, eta_full) + lift
    return nu_primal(u, eta)


def nu_dual_opt(u: VelocityField, tol: float = 1e-10) -> float:
    """Maximum of the dual functional (equals Nu for steady u)."""
    _check_tol(tol)
    domain = u.domain
    dom_g, u_g, g = _reduced(u)
    f_w = weak_source(dom_g, u_g.w)
    if not np.any(f_w):
        return 1.0
    if _is_single_wavenumber(u_g):
        _, xi_c = _symmetrized_fast(dom_g, u_g, f_w)
    else:
        adv = AdvectionOperator(u_g)
        max_iter = 10 * dom_g.n_modes * dom_g.N_z
        apply_h = lambda v: symmetrized_apply(dom_g, adv, v)
        xi_c, _ = pcg(apply_h, f_w, dom_g, tol, max_iter)
    xi_full = _embed_coeffs(xi_c, domain, dom_g, g) if g > 1 else xi_c
    return nu_dual(u, SpectralField(domain, xi_full))


def _symmetrized_fast(dom_g: DomainSpec, u_g: VelocityField, f_w: np.ndarray):
    theta_p = _block_tridiag_solve(dom_g, u_g, f_w)
    theta_m = _block_tridiag_solve(dom_g, -1.0 * u_g, f_w)
    return 0.5 * (theta_p - theta_m), 0.5 * (theta_p + theta_m)


def evaluate_transport(u: VelocityField, tol: float = 1e-10,
                       method: str = "auto") -> TransportReport:
    """Nu by direct solve, primal minimization, and dual maximization."""
    theta = solve_steady_theta(u, tol, method=method)
    nu_d = nu_direct(u, tol, theta=theta)
    nu_p = nu_primal_opt(u, tol)
    nu_du = nu_dual_opt(u, tol)
    flux = pair(u.w, theta)
    report = TransportReport(
        nu_direct=nu_d,
        nu_primal=nu_p,
        nu_dual=nu_du,
        pe_energy=energy_norm(u),
        pe_enstrophy=enstrophy_norm(u),
        residuals={
            "direct_vs_gradient": abs((1.0 + flux) - (1.0 + grad_pair(theta, theta))),
            "duality_gap": abs(nu_p - nu_du),
            "primal_vs_direct": abs(nu_p - nu_d),
            "dual_vs_direct": abs(nu_du - nu_d),
        },
    )
    return report
