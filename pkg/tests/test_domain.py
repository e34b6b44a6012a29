"""Domain construction: nodes, quadrature, differentiation, interpolation."""

import numpy as np
import pytest

import wall2wall as w2w
from wall2wall.domain import (
    chebyshev_diff_matrix,
    chebyshev_lobatto_nodes,
    clenshaw_curtis_weights,
    interpolation_matrix,
)


def test_build_domain_basic():
    dom = w2w.build_domain(2 * np.pi, 8, 33)
    assert dom.n_modes == 17
    assert dom.N_z == 33
    assert dom.z_grid[0] == 0.0 and dom.z_grid[-1] == 1.0
    assert np.all(np.diff(dom.z_grid) > 0)
    assert dom.mode_numbers[0] == -8 and dom.mode_numbers[-1] == 8


def test_build_domain_minimal():
    dom = w2w.build_domain(1.0, 1, 8)
    assert dom.n_modes == 3 and dom.N_z == 8


@pytest.mark.parametrize("args", [(-1.0, 8, 33), (0.0, 8, 33), (2.0, 0, 33),
                                  (2.0, 8, 7), (np.inf, 8, 33)])
def test_build_domain_invalid(args):
    with pytest.raises(ValueError):
        w2w.build_domain(*args)


def test_wavenumbers():
    dom = w2w.build_domain(4.0, 3, 9)
    assert dom.wavenumber(2) == pytest.approx(np.pi)
    assert dom.mode_slot(-3) == 0 and dom.mode_slot(0) == 3
    with pytest.raises(ValueError):
        dom.mode_slot(4)


@pytest.mark.parametrize("n", [8, 17, 33, 64])
def test_quadrature_polynomial_exactness(n):
    """The rule integrates z^p exactly for p <= n - 1."""
    z = chebyshev_lobatto_nodes(n)
    w = clenshaw_curtis_weights(n)
    for p in (0, 1, 2, n // 2, n - 2, n - 1):
        assert w @ z ** p == pytest.approx(1.0 / (p + 1), rel=1e-12)


@pytest.mark.parametrize("n", [8, 16, 33, 65])
def test_differentiation_polynomial_exactness(n):
    z = chebyshev_lobatto_nodes(n)
    d = chebyshev_diff_matrix(n)
    for p in range(1, n - 1):
        err = np.max(np.abs(d @ z ** p - p * z ** (p - 1)))
        assert err < 1e-9 * max(1.0, p)


def test_differentiation_endpoint_order():
    z = chebyshev_lobatto_nodes(16)
    d = chebyshev_diff_matrix(16)
    f = z ** 2 * (1 - z)
    assert np.max(np.abs(d @ f - (2 * z - 3 * z ** 2))) < 1e-10


def test_interpolation_matrix_polynomial():
    nodes = chebyshev_lobatto_nodes(12)
    targets = np.linspace(0, 1, 57)
    p = interpolation_matrix(nodes, targets)
    f = 3 * nodes ** 7 - nodes ** 2 + 0.25
    exact = 3 * targets ** 7 - targets ** 2 + 0.25
    assert np.max(np.abs(p @ f - exact)) < 1e-12


def test_interpolation_matrix_exact_hits():
    nodes = chebyshev_lobatto_nodes(9)
    p = interpolation_matrix(nodes, nodes[[0, 4, 8]])
    expect = np.zeros((3, 9))
    expect[0, 0] = expect[1, 4] = expect[2, 8] = 1.0
    assert np.allclose(p, expect)


def test_helmholtz_solve_consistency(dom_small):
    """Weak Helmholtz inverse: K (K^{-1} f) = f for interior data."""
    rng = np.random.default_rng(0)
    rhs = np.zeros((1, dom_small.N_z))
    rhs[0, 1:-1] = rng.standard_normal(dom_small.N_z - 2)
    g = dom_small.helmholtz_solve_modes(np.array([3]), rhs)
    k = dom_small.wavenumber(3)
    d_int = dom_small.D[:, 1:-1]
    s_int = d_int.T @ dom_small.B @ d_int
    b_int = dom_small.B[1:-1, 1:-1]
    back = (s_int + k * k * b_int) @ g[0, 1:-1]
    assert np.max(np.abs(back - rhs[0, 1:-1])) < 1e-11
