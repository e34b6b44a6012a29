"""Weak-form operators for the advection-diffusion machinery.

Unknowns live in V0: fields with modes |m| <= M whose z-profiles vanish at
the walls. Dual vectors (weak right-hand sides) are stored in the same
(n_modes, N_z) layout with zero wall entries; the duality pairing is the
flat complex inner product Re sum conj(F) * v.

With the exact mass matrix from the domain, the stiffness operator K is
Hermitian positive definite and the weak advection operator A (assembled
matrix-free through dealiased products and fine-grid quadrature) is exactly
skew-Hermitian whenever u is divergence-free. Every transport identity the
test suite checks at 1e-8..1e-12 rests on those two structural facts.
"""

from __future__ import annotations

import numpy as np

from .domain import DomainSpec
from .errors import SolverError
from .fields import (
    SpectralField,
    VelocityField,
    dealias_size,
    grid_to_modes,
    modes_to_grid,
)


def dual_pair(f_weak: np.ndarray, v: np.ndarray) -> float:
    """Duality pairing of a weak vector with nodal coefficients."""
    return float(np.real(np.sum(np.conj(f_weak) * v)))


def weak_source(domain: DomainSpec, f: SpectralField) -> np.ndarray:
    """Weak vector of a field in the space: <f, phi_i> = B f, walls zeroed."""
    out = f.coeffs @ domain.B.T
    out[:, 0] = 0.0
    out[:, -1] = 0.0
    return out


def stiffness_apply(domain: DomainSpec, v: np.ndarray) -> np.ndarray:
    """K v: weak vector of the Dirichlet Laplacian pairing, <grad v, grad phi_i>."""
    d, b = domain.D, domain.B
    k2 = domain.wavenumbers ** 2
    out = (v @ d.T) @ (d.T @ b).T  # D^T B D v, i.e. (B D v) pulled back through D
    out += k2[:, None] * (v @ b.T)
    out[:, 0] = 0.0
    out[:, -1] = 0.0
    return out


def stiffness_inverse(domain: DomainSpec, f_weak: np.ndarray) -> np.ndarray:
    """K^{-1} f for a weak vector, via the cached eigendecomposition."""
    k2 = domain.wavenumbers ** 2
    y = f_weak[:, 1:-1] @ domain.eig_vecs
    y /= domain.eig_vals[None, :] + k2[:, None]
    out = np.zeros_like(f_weak)
    out[:, 1:-1] = y @ domain.eig_vecs.T
    return out


class AdvectionOperator:
    """Matrix-free weak advection form v -> <u . grad v, phi_i>.

    Products are formed on a dealiased x-grid and the fine z-grid, so the
    pairing with any test function in the space is the exact integral of
    the representatives. The operator is exactly skew-Hermitian on V0.
    """

    def __init__(self, u: VelocityField):
        self.domain = u.domain
        dom = self.domain
        self.max_u_mode = max(u.u_x.max_active_mode(), u.u_z.max_active_mode())
        # grid holds modes up to M + max_u_mode, the band of u . grad v
        self.n_x = dealias_size(dom.M + self.max_u_mode)
        self.ux_grid = modes_to_grid(u.u_x.coeffs @ dom.P_fine.T, dom.M, self.n_x)
        self.uz_grid = modes_to_grid(u.u_z.coeffs @ dom.P_fine.T, dom.M, self.n_x)
        self._wp = dom.w_fine[:, None] * dom.P_fine  # quadrature-weighted projection

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Weak vector of u . grad v; v may carry nonzero wall values (lifts).

        The grid pipeline works on real fields (Hermitian-symmetric
        coefficients); general complex inputs are split into their
        Hermitian and anti-Hermitian parts, each real-representable, and
        recombined by complex linearity.
        """
        herm = 0.5 * (v + np.conj(v[::-1]))
        anti = v - herm
        if np.max(np.abs(anti)) > 1e-15 * max(np.max(np.abs(v)), 1e-300):
            return self._apply_real(herm) + 1j * self._apply_real(anti / 1j)
        return self._apply_real(herm)

    def _apply_real(self, v: np.ndarray) -> np.ndarray:
        dom = self.domain
        ik = 1j * dom.wavenumbers
        vx = (ik[:, None] * v) @ dom.P_fine.T
        vz = (v @ dom.D.T) @ dom.P_fine.T
        gx = modes_to_grid(vx, dom.M, self.n_x)
        gz = modes_to_grid(vz, dom.M, self.n_x)
        q = self.ux_grid * gx + self.uz_grid * gz
        qm = grid_to_modes(q, dom.M)
        out = qm @ self._wp
        out[:, 0] = 0.0
        out[:, -1] = 0.0
        return out


def symmetrized_apply(domain: DomainSpec, adv: AdvectionOperator, v: np.ndarray) -> np.ndarray:
    """H v = K v - A K^{-1} A v; Hermitian positive definite on V0."""
    av = adv.apply(v)
    return stiffness_apply(domain, v) - adv.apply(stiffness_inverse(domain, av))


def pcg(apply_op, rhs: np.ndarray, domain: DomainSpec, tol: float,
        max_iter: int) -> tuple[np.ndarray, list[float]]:
    """Preconditioned conjugate gradients with the per-mode Helmholtz inverse.

    Solves apply_op(x) = rhs for a Hermitian positive definite weak-form
    operator, preconditioned by K^{-1}. Residuals are reported in the dual
    norm sqrt(<r, K^{-1} r>) relative to the right-hand side.

    Raises:
        SolverError: if the relative residual has not reached tol within
            max_iter iterations (carries the residual history).
    """
    x = np.zeros_like(rhs)
    r = rhs.copy()
    z = stiffness_inverse(domain, r)
    rho = dual_pair(r, z)
    rhs_norm = np.sqrt(max(dual_pair(rhs, stiffness_inverse(domain, rhs)), 0.0))
    if rhs_norm == 0.0:
        return x, [0.0]
    history = [np.sqrt(max(rho, 0.0)) / rhs_norm]
    if history[-1] <= tol:
        return x, history
    p = z
    for _ in range(max_iter):
        ap = apply_op(p)
        alpha = rho / dual_pair(p, ap)
        x = x + alpha * p
        r = r - alpha * ap
        z = stiffness_inverse(domain, r)
        rho_new = dual_pair(r, z)
        history.append(np.sqrt(max(rho_new, 0.0)) / rhs_norm)
        if history[-1] <= tol:
            return x, history
        p = z + (rho_new / rho) * p
        rho = rho_new
    raise SolverError(
        f"PCG did not reach tol={tol:.2e} in {max_iter} iterations "
        f"(last residual {history[-1]:.2e})",
        residual_history=history,
    )


def inverse_laplacian(f: SpectralField) -> SpectralField:
    """Inverse Laplacian with vanishing Dirichlet data, strong collocation form.

    Per mode solves (-d^2/dz^2 + k^2) g = -f on the interior nodes with
    g = 0 at the walls, so applying the collocation Laplacian recovers f
    exactly at the interior nodes.
    """
    dom = f.domain
    d2 = dom.D @ dom.D
    out = np.zeros_like(f.coeffs)
    active = f.active_modes()
    for m in active:
        if m < 0:
            continue
        k = dom.wavenumber(m)
        a = -d2[1:-1, 1:-1] + (k * k) * np.eye(dom.N_z - 2)
        rhs = -f.mode_profile(m)[1:-1]
        g = np.linalg.solve(a, rhs)
        out[dom.mode_slot(m), 1:-1] = g
        if m != 0:
            out[dom.mode_slot(-m), 1:-1] = np.conj(g)
    if 0 in active:
        out[dom.mode_slot(0)] = np.real(out[dom.mode_slot(0)])
    return SpectralField(dom, out)


def assemble_dense(domain: DomainSpec, adv: AdvectionOperator,
                   include_advection: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense matrix of K (+ A) over the interior unknowns, for oracle solves.

    Returns (matrix, row_index, col_index) where the index arrays map the
    flattened interior unknowns back to (mode row, z node).
    """
    dom = domain
    n_modes, n_z = dom.n_modes, dom.N_z
    rows, cols = np.meshgrid(np.arange(n_modes), np.arange(1, n_z - 1), indexing="ij")
    rows, cols = rows.ravel(), cols.ravel()
    dim = rows.size
    if dim > 40000:
        raise ValueError(f"dense assembly of dimension {dim} refused")
    mat = np.zeros((dim, dim), dtype=complex)
    basis = np.zeros((n_modes, n_z), dtype=complex)
    for j in range(dim):
        basis[rows[j], cols[j]] = 1.0
        col = stiffness_apply(dom, basis)
        if include_advection:
            col = col + adv.apply(basis)
        basis[rows[j], cols[j]] = 0.0
        mat[:, j] = col[rows, cols]
    return mat, rows, cols
