"""A priori transport bounds and the reduced spectral-constraint problem.

Three bound families: the energy bound 1 + (1/2) <w^2>^(1/2); the
symmetrization bound from layered piecewise-linear profiles eta_delta
(minimized over the layer thickness); and the profile-wise spectral
constraint M(eta), the largest Rayleigh quotient of the nonlocal form
against unit mean-square strain, computed per wavenumber by a dense
generalized eigenproblem. The classical reduced functional (flux deficit
plus the intensity product, without the positive wavenumber forms) is
also provided for comparison, with its explicit epsilon^(1/3) floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, null_space
from scipy.special import roots_legendre

from .advection import kernel_quadrature_energy, mode_decomposition, profile_interpolator
from .domain import (
    DomainSpec,
    chebyshev_diff_matrix,
    chebyshev_lobatto_nodes,
    clenshaw_curtis_weights,
    interpolation_matrix,
)
from .errors import SolverError
from .fields import (
    SpectralField,
    VelocityField,
    dz as dz_op,
    grad_pair,
    horizontal_mean_product,
    pair,
)

# derived from the layer-growth estimate: flux deficit >= delta/4 and
# intensity product >= eps/(64 delta^2), so the reduced objective is at
# least inf_delta max(...) >= (3/32) eps^(1/3)
HOWARD_FLOOR_CONSTANT = 3.0 / 32.0

LINEAR_GROWTH_CONSTANT = 4.0


@dataclass(frozen=True)
class BoundCertificate:
    """An upper-bound evaluation: kind, value, and the profile that made it."""

    kind: str
    value: float
    profile: tuple
    delta: float | None = None
    lam: float | None = None


def energy_bound(u: VelocityField) -> float:
    """Nu <= 1 + (1/2) <w^2>^(1/2), from the mean-flux/maximum-principle pairing."""
    return 1.0 + 0.5 * math.sqrt(max(pair(u.w, u.w), 0.0))


# -- layered-profile symmetrization bound --------------------------------------

def _eta_delta_slope_pieces(delta: float):
    if not (0.0 < delta <= 0.5):
        raise ValueError(f"delta must lie in (0, 1/2], got {delta}")
    s = -0.5 / delta
    pieces = [(0.0, delta, s)]
    if delta < 0.5:
        pieces.append((delta, 1.0 - delta, 0.0))
    pieces.append((1.0 - delta, 1.0, s))
    return pieces


def profile_advection_term(u: VelocityField, slope_pieces) -> float:
    """<|grad lap^{-1} div(u eta)|^2> for a z-profile eta given by its slope.

    div(u eta) = w eta'(z); each wavenumber of w contributes the kernel
    energy of its profile times the slope, integrated piecewise so kinks
    in eta' are handled exactly.
    """
    dom = u.domain
    w = u.w
    mean_mag = np.max(np.abs(w.mode_profile(0))) if 0 in w.active_modes() else 0.0
    scale = max(np.max(np.abs(w.coeffs)), 1e-300)
    if mean_mag > 1e-12 * scale:
        raise ValueError("velocity has a nonzero horizontal-mean w")
    hints = dom.z_grid
    total = 0.0
    for m in w.active_modes():
        if m <= 0:
            continue
        prof = w.mode_profile(int(m))
        interp = profile_interpolator(dom.z_grid, prof)
        pieces = []
        for a, b, s in slope_pieces:
            if s == 0.0 or b <= a:
                continue
            pieces.append((a, b, _scaled_profile(interp, s)))
        if pieces:
            total += 2.0 * kernel_quadrature_energy(
                dom.wavenumber(int(m)), pieces, edge_hints=hints)
    return total


def _scaled_profile(interp, s: float):
    def f(z):
        return s * interp(z)
    return f


def symmetrization_bound(u: VelocityField, delta: float) -> BoundCertificate:
    """Upper bound on Nu from the layered profile with thickness delta.

    The profile drops with slope -1/(2 delta) across each wall layer and
    is flat in the bulk; its Dirichlet part contributes exactly 1/(2 delta).
    Valid for any steady u with impenetrable walls.
    """
    pieces = _eta_delta_slope_pieces(delta)
    grad_part = 0.5 / delta
    value = grad_part + profile_advection_term(u, pieces)
    return BoundCertificate(
        kind="symmetrization", value=float(value),
        profile=("eta_delta", float(delta)), delta=float(delta))


def symmetrization_bound_min(u: VelocityField, deltas=None
                             ) -> tuple[BoundCertificate, list]:
    """Minimize the layered bound over a log grid of thicknesses."""
    if deltas is None:
        deltas = np.geomspace(1e-4, 0.5, 25)
    scan = [(float(d), symmetrization_bound(u, float(d)).value) for d in deltas]
    d_best, v_best = min(scan, key=lambda t: t[1])
    cert = BoundCertificate(
        kind="symmetrization", value=v_best,
        profile=("eta_delta", d_best), delta=d_best)
    return cert, scan


# -- profile-wise spectral constraint -------------------------------------------

def conduction_slope_pieces():
    """Slope data of the linear profile 1 - z."""
    return [(0.0, 1.0, -1.0)]


def profile_grad_sq(slope_pieces) -> float:
    """<|eta'|^2> for a piecewise-constant-slope profile."""
    return float(sum((b - a) * s * s for a, b, s in slope_pieces))


def _validate_slope_pieces(slope_pieces) -> list:
    pieces = sorted((float(a), float(b), float(s)) for a, b, s in slope_pieces)
    if not pieces or abs(pieces[0][0]) > 1e-12 or abs(pieces[-1][1] - 1.0) > 1e-12:
        raise ValueError("slope pieces must cover [0, 1]")
    for (a0, b0, _), (a1, _, _) in zip(pieces[:-1], pieces[1:]):
        if abs(b0 - a1) > 1e-12:
            raise ValueError("slope pieces must be contiguous (eta must be in H1)")
    drop = sum(s * (b - a) for a, b, s in pieces)
    if abs(drop + 1.0) > 1e-10:
        raise ValueError(
            "profile must run from eta(0)=1 to eta(1)=0; "
            f"integrated slope is {drop} (a jump lifting is not admissible)")
    return pieces


def spectral_constraint_M(slope_pieces, domain: DomainSpec, n_z: int = 64) -> float:
    """Largest nonlocal response of a z-profile against unit-strain velocities.

    M(eta) = sup over divergence-free no-slip u with <|grad u|^2> = 1 of
    <|grad lap^{-1} div(u eta)|^2>, where eta depends on z alone and is
    given by its slope on segments. The sup splits over wavenumbers; each
    gives a dense generalized eigenproblem for the streamfunction profile
    with clamped walls. Returns the max over the domain's wavenumbers
    (the analytic tail decays like 1/k^2 past the transition scale).

    Raises:
        ValueError: slope data not contiguous or wrong boundary drop.
        SolverError: eigensolver failure.
    """
    pieces = _validate_slope_pieces(slope_pieces)
    if n_z > 128:
        n_z = 128
    z = chebyshev_lobatto_nodes(n_z)
    d = chebyshev_diff_matrix(n_z)
    n_fine = 4 * n_z
    zf = chebyshev_lobatto_nodes(n_fine)
    wf = clenshaw_curtis_weights(n_fine)
    pf = interpolation_matrix(z, zf)
    b = pf.T @ (wf[:, None] * pf)
    b = 0.5 * (b + b.T)

    t2 = d @ d
    interior = slice(1, n_z - 1)
    s_int = (d[:, interior].T @ b @ d[:, interior])
    b_int = b[interior, interior]

    # weak multiplication by eta' with piece-aligned panels
    c_full = np.zeros((n_z, n_z))
    xg, wg = roots_legendre(24)
    for a, bnd, s in pieces:
        if s == 0.0 or bnd <= a:
            continue
        n_panel = max(4, int(np.ceil((bnd - a) * n_z)))
        edges = np.linspace(a, bnd, n_panel + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            nodes = mid + half * xg
            p = interpolation_matrix(z, nodes)
            c_full += p.T @ ((half * wg * s)[:, None] * p)
    c_int = c_full[interior, interior]

    # clamped space: phi and phi' vanish at both walls
    constraints = np.vstack([d[0, interior], d[-1, interior]])
    z_basis = null_space(constraints)
    if z_basis.shape[1] == 0:
        raise SolverError("clamped space is empty at this resolution")

    vals_int, vecs_int = eigh(s_int, b_int)
    best = 0.0
    for m in range(1, domain.M + 1):
        k = domain.wavenumber(m)
        # numerator: k^2 (C phi)^T K_k^{-1} (C phi)
        y = vecs_int.T @ c_int
        kern = (vecs_int / (vals_int + k * k)[None, :]) @ y
        r_int = (k * k) * (c_int.T @ kern)
        l_op = (t2 - (k * k) * np.eye(n_z))[:, interior]
        e_int = l_op.T @ b @ l_op
        a_red = z_basis.T @ r_int @ z_basis
        b_red = z_basis.T @ e_int @ z_basis
        a_red = 0.5 * (a_red + a_red.T)
        b_red = 0.5 * (b_red + b_red.T)
        try:
            vals = eigh(a_red, b_red, eigvals_only=True)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise SolverError(f"eigensolver failed at mode {m}: {exc}") from exc
        best = max(best, float(vals[-1]))
    return best


def symmetrization_profile_bound(slope_pieces, domain: DomainSpec, pe: float,
                                 n_z: int = 64) -> BoundCertificate:
    """Field-independent bound <|eta'|^2> + Pe^2 M(eta) at strain budget pe."""
    m_val = spectral_constraint_M(slope_pieces, domain, n_z=n_z)
    value = profile_grad_sq(slope_pieces) + pe * pe * m_val
    return BoundCertificate(
        kind="symmetrization", value=float(value),
        profile=("slope_pieces", tuple((a, b, s) for a, b, s in slope_pieces)),
        lam=float(m_val))


# -- the reduced (flux-deficit only) functional ---------------------------------

def howard_value(u: VelocityField, theta: SpectralField, epsilon: float) -> float:
    """Flux-deficit integral plus the weighted intensity product.

    <|mean(w theta) - 1|^2> + epsilon <|grad u|^2> <|grad theta|^2> for a
    pair with unit net flux, no-slip u, and theta vanishing at the walls.
    Differs from the full efficiency by exactly the sum of the positive
    wavenumber forms.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    _check_noslip(u)
    _check_walls(theta, "theta")
    flux = pair(u.w, theta)
    if abs(flux - 1.0) > 1e-8:
        raise ValueError(f"net flux <w theta> = {flux} is not 1")
    dom = u.domain
    wt = horizontal_mean_product(u.w, theta)
    deficit = float(dom.w_fine @ (wt - 1.0) ** 2)
    intensity = grad_pair(u.u_x, u.u_x) + grad_pair(u.u_z, u.u_z)
    return deficit + epsilon * intensity * grad_pair(theta, theta)


def howard_floor(epsilon: float) -> float:
    """Explicit lower bound (3/32) epsilon^(1/3) for the reduced functional."""
    return HOWARD_FLOOR_CONSTANT * epsilon ** (1.0 / 3.0)


def howard_gap(u: VelocityField, theta: SpectralField, epsilon: float) -> float:
    """Sum of the wavenumber forms: efficiency total minus the reduced value."""
    dec = mode_decomposition(u, theta)
    return float(sum(dec.q_terms.values()))


def _check_noslip(u: VelocityField) -> None:
    # sampled designs carry an interpolation-level wall leak in u_x (the
    # cutoff slope at the wall is zero only in exact arithmetic), so this
    # guards against grossly non-no-slip fields rather than roundoff
    for comp, name in ((u.u_x, "u_x"), (u.u_z, "u_z")):
        c = comp.coeffs
        scale = max(np.max(np.abs(c)), 1e-300)
        if max(np.max(np.abs(c[:, 0])), np.max(np.abs(c[:, -1]))) > 0.05 * scale:
            raise ValueError(f"{name} must vanish at the walls (no-slip)")


def _check_walls(f: SpectralField, name: str) -> None:
    c = f.coeffs
    scale = max(np.max(np.abs(c)), 1e-300)
    if max(np.max(np.abs(c[:, 0])), np.max(np.abs(c[:, -1]))) > 1e-8 * scale:
        raise ValueError(f"{name} must vanish at the walls")


# -- pointwise flux growth check -------------------------------------------------

def check_lingrowth(w: SpectralField, theta: SpectralField) -> tuple[float, float]:
    """Peak ratio of |mean(w theta)| to its linear-growth envelope, and 4.

    The envelope is min(z, 1-z) times the product of the root
    mean-square z-derivatives; the ratio stays below 4 for any pair
    vanishing at the walls.
    """
    _check_walls(w, "w")
    _check_walls(theta, "theta")
    dom = w.domain
    wt = horizontal_mean_product(w, theta)
    dzw = math.sqrt(max(pair(dz_op(w), dz_op(w)), 0.0))
    dzt = math.sqrt(max(pair(dz_op(theta), dz_op(theta)), 0.0))
    denom_scale = dzw * dzt
    if denom_scale == 0.0:
        return 0.0, LINEAR_GROWTH_CONSTANT
    zf = dom.z_fine
    inner = (zf > 1e-6) & (zf < 1.0 - 1e-6)
    envelope = np.minimum(zf[inner], 1.0 - zf[inner]) * denom_scale
    ratio = float(np.max(np.abs(wt[inner]) / envelope))
    return ratio, LINEAR_GROWTH_CONSTANT
