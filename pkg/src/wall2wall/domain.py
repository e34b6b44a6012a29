"""Layer domain: horizontal Fourier modes x Chebyshev collocation in z.

The domain is the 2D layer T_x x [0,1]: periodic in x with period l_x,
wall-bounded in z. Fields are represented by complex Fourier coefficients
in x (modes m = -M..M, Hermitian-symmetric so fields are real) whose
z-profiles are polynomial interpolants on Chebyshev-Gauss-Lobatto nodes.

All integrals used by the library are exact for the representatives:
the z mass matrix is assembled by interpolating to a finer Lobatto grid
whose Clenshaw-Curtis rule integrates the relevant polynomial products
exactly. This makes discrete integration by parts exact and is what the
transport solvers rely on for their identity-level checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh


def chebyshev_lobatto_nodes(n: int) -> np.ndarray:
    """Chebyshev-Gauss-Lobatto nodes mapped to [0,1], ascending."""
    j = np.arange(n)
    # sin^2 form avoids cancellation near the walls
    return np.sin(np.pi * j / (2 * (n - 1))) ** 2


def chebyshev_diff_matrix(n: int) -> np.ndarray:
    """Differentiation matrix on the [0,1] Lobatto nodes.

    Standard Chebyshev collocation matrix with the negative-sum trick on
    the diagonal, scaled from [-1,1] to [0,1]. Differentiation is exact
    for polynomials of degree <= n-1.
    """
    if n < 2:
        raise ValueError("need at least 2 nodes")
    m = n - 1
    x = np.cos(np.pi * np.arange(n) / m)  # descending on [-1,1]
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n)
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(n))
    d -= np.diag(d.sum(axis=1))
    # z_j = (1 - x_j)/2 keeps the index order and maps d/dx to -2 d/dz
    return -2.0 * d


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Clenshaw-Curtis weights on the n-point Lobatto grid over [0,1].

    Exact for polynomials of degree <= n-1.
    """
    m = n - 1
    if m == 0:
        return np.array([1.0])
    w = np.zeros(n)
    theta = np.pi * np.arange(1, m) / m
    v = np.ones(m - 1)
    if m % 2 == 0:
        w[0] = w[m] = 1.0 / (m * m - 1)
        for k in range(1, m // 2):
            v -= 2.0 * np.cos(2 * k * theta) / (4 * k * k - 1)
        v -= np.cos(m * theta) / (m * m - 1)
    else:
        w[0] = w[m] = 1.0 / (m * m)
        for k in range(1, (m - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta) / (4 * k * k - 1)
    w[1:m] = 2.0 * v / m
    # built for [-1,1] (length 2); halve for [0,1], flip to ascending z
    return w[::-1] / 2.0


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Barycentric weights of the Lobatto family (scaled)."""
    n = len(nodes)
    lam = (-1.0) ** np.arange(n)
    lam[0] *= 0.5
    lam[-1] *= 0.5
    return lam


def interpolation_matrix(nodes: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Matrix taking nodal values to values at target points.

    Barycentric form; rows for targets that coincide with a node reduce to
    the corresponding unit vector.
    """
    lam = barycentric_weights(nodes)
    diff = targets[:, None] - nodes[None, :]
    exact_rows, exact_cols = np.nonzero(np.abs(diff) < 1e-14)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = lam[None, :] / diff
        p = ratio / ratio.sum(axis=1)[:, None]
    for r, c in zip(exact_rows, exact_cols):
        p[r, :] = 0.0
        p[r, c] = 1.0
    return p


@dataclass(frozen=True)
class DomainSpec:
    """Discretized layer T_x x [0,1].

    Attributes:
        l_x: horizontal period (> 0). Admissible wavenumbers are
            k_m = 2*pi*m/l_x with |m| <= M.
        M: largest retained Fourier mode index.
        N_z: number of Chebyshev-Gauss-Lobatto nodes (>= 8).
        z_grid: the nodes, ascending with z_grid[0] = 0, z_grid[-1] = 1.

    The remaining attributes are the discrete operators every module
    shares: differentiation matrix D, quadrature data for a 4x finer
    Lobatto grid, the exact mass matrix B on polynomial interpolants, and
    the generalized eigendecomposition of the interior stiffness pencil
    behind the fast per-mode Dirichlet Helmholtz inverses. B and the
    eigendecomposition are built on first use (they dominate setup cost
    at large N_z and pure field/product work never touches them).
    """

    l_x: float
    M: int
    N_z: int
    z_grid: np.ndarray = field(repr=False, default=None)
    D: np.ndarray = field(repr=False, default=None)
    cc_weights: np.ndarray = field(repr=False, default=None)
    z_fine: np.ndarray = field(repr=False, default=None)
    w_fine: np.ndarray = field(repr=False, default=None)
    P_fine: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_cache", {})

    @property
    def B(self) -> np.ndarray:
        """Exact mass matrix on interpolants: int phi_i phi_j dz."""
        if "B" not in self._cache:
            b = self.P_fine.T @ (self.w_fine[:, None] * self.P_fine)
            b = 0.5 * (b + b.T)
            b.setflags(write=False)
            self._cache["B"] = b
        return self._cache["B"]

    def _eig(self):
        if "eig" not in self._cache:
            d_int = self.D[:, 1:-1]
            s_int = d_int.T @ self.B @ d_int
            s_int = 0.5 * (s_int + s_int.T)
            b_int = self.B[1:-1, 1:-1]
            vals, vecs = eigh(s_int, b_int)
            vals.setflags(write=False)
            vecs.setflags(write=False)
            self._cache["eig"] = (vals, vecs)
        return self._cache["eig"]

    @property
    def eig_vals(self) -> np.ndarray:
        return self._eig()[0]

    @property
    def eig_vecs(self) -> np.ndarray:
        return self._eig()[1]

    @property
    def n_modes(self) -> int:
        return 2 * self.M + 1

    @property
    def mode_numbers(self) -> np.ndarray:
        """Mode indices m = -M..M in storage order."""
        return np.arange(-self.M, self.M + 1)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Physical wavenumbers k_m = 2*pi*m/l_x in storage order."""
        return 2.0 * np.pi * self.mode_numbers / self.l_x

    def wavenumber(self, m: int) -> float:
        return 2.0 * np.pi * m / self.l_x

    def mode_slot(self, m: int) -> int:
        """Row index of mode m in a coefficient array."""
        if abs(m) > self.M:
            raise ValueError(f"mode {m} outside |m| <= {self.M}")
        return m + self.M

    def helmholtz_solve(self, k: float, rhs_weak: np.ndarray) -> np.ndarray:
        """Interior solve of the weak Dirichlet Helmholtz problem.

        Solves (S + k^2 B) g = rhs on interior nodes, where S is the exact
        stiffness matrix; rhs_weak holds duality-pairing entries at the
        interior nodes. Returns the full nodal vector with zero walls.
        Works on stacked rhs arrays of shape (..., N_z).
        """
        rhs_int = np.moveaxis(np.asarray(rhs_weak), -1, 0)[1:-1]
        y = self.eig_vecs.T @ rhs_int.reshape(self.N_z - 2, -1)
        y /= (self.eig_vals + k * k)[:, None]
        g_int = self.eig_vecs @ y
        out = np.zeros_like(np.moveaxis(np.asarray(rhs_weak, dtype=g_int.dtype), -1, 0))
        out[1:-1] = g_int.reshape(rhs_int.shape)
        return np.moveaxis(out, 0, -1)

    def helmholtz_solve_modes(self, modes: np.ndarray, rhs_weak: np.ndarray) -> np.ndarray:
        """Vectorized weak Helmholtz solve, one wavenumber per row.

        rhs_weak has shape (len(modes), N_z); row i is solved at
        k = 2*pi*modes[i]/l_x.
        """
        k2 = (2.0 * np.pi * np.asarray(modes) / self.l_x) ** 2
        rhs_int = rhs_weak[:, 1:-1]
        y = rhs_int @ self.eig_vecs
        y /= self.eig_vals[None, :] + k2[:, None]
        g = np.zeros_like(rhs_weak)
        g[:, 1:-1] = y @ self.eig_vecs.T
        return g


def build_domain(l_x: float, M: int, N_z: int) -> DomainSpec:
    """Construct the discrete layer with its cached operators.

    Args:
        l_x: horizontal period, > 0.
        M: largest Fourier mode index, >= 1.
        N_z: number of z collocation nodes, >= 8.

    Raises:
        ValueError: on an out-of-range argument.
    """
    if not np.isfinite(l_x) or l_x <= 0:
        raise ValueError(f"l_x must be positive, got {l_x}")
    if int(M) != M or M < 1:
        raise ValueError(f"M must be an integer >= 1, got {M}")
    if int(N_z) != N_z or N_z < 8:
        raise ValueError(f"N_z must be an integer >= 8, got {N_z}")
    M, N_z = int(M), int(N_z)

    z = chebyshev_lobatto_nodes(N_z)
    d = chebyshev_diff_matrix(N_z)
    w_cc = clenshaw_curtis_weights(N_z)

    # 4x finer Lobatto grid: its rule is exact through degree 4*N_z - 1,
    # enough for the quartic products the pairings below generate.
    n_fine = 4 * N_z
    z_fine = chebyshev_lobatto_nodes(n_fine)
    w_fine = clenshaw_curtis_weights(n_fine)
    p_fine = interpolation_matrix(z, z_fine)

    for arr in (z, d, w_cc, z_fine, w_fine, p_fine):
        arr.setflags(write=False)

    return DomainSpec(
        l_x=float(l_x), M=M, N_z=N_z, z_grid=z, D=d, cc_weights=w_cc,
        z_fine=z_fine, w_fine=w_fine, P_fine=p_fine,
    )
