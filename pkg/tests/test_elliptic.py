import numpy as np
import pytest

from conftest import (flat_connection, random_cochain, random_connection,
                      sigma_grid)
from gaugelab import elliptic, mesh
from gaugelab.connection import covariant_d, covariant_d_adjoint
from gaugelab.elliptic import (harmonic_basis, harmonic_project,
                               hodge_decompose, laplacian, laplacian_matrix,
                               pack, solve_poisson, unpack)
from gaugelab.mesh import inner_product, norm


def test_pack_unpack_roundtrip(rng):
    c = random_connection(sigma_grid(6), rng, scale=0.2)
    x = random_cochain(c.grid, 1, rng)
    v = pack(x, c.weights)
    y = unpack(v, 1, c.grid, c.weights, c.n)
    for axes in x.comps:
        assert np.allclose(y.comps[axes], x.comps[axes], atol=1e-12)
    # packed norm is the weighted L2 norm (kappa/2 coordinate factor)
    assert np.linalg.norm(v) ** 2 / 2.0 == pytest.approx(
        inner_product(x, x, c.weights), rel=1e-12)


def test_laplacian_matrix_symmetric_psd(rng):
    c = random_connection(sigma_grid(5), rng, scale=0.2, twist=True)
    m = laplacian_matrix(c, 1)
    assert np.allclose(m, m.T, atol=1e-10)
    ev = np.linalg.eigvalsh(m)
    assert ev[0] >= -1e-10


def test_laplacian_matrix_matches_operator(rng):
    c = random_connection(sigma_grid(5), rng, scale=0.2)
    m = laplacian_matrix(c, 1)
    x = random_cochain(c.grid, 1, rng)
    lhs = m @ pack(x, c.weights)
    rhs = pack(laplacian(c, x), c.weights)
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_harmonic_dims_untwisted_and_twisted():
    flat_triv = flat_connection(sigma_grid(8))
    assert harmonic_basis(flat_triv, 1).dim == 6
    flat_tw = flat_connection(sigma_grid(8), twist=True)
    assert harmonic_basis(flat_tw, 1).dim == 0


def test_harmonic_project_idempotent(rng):
    c = flat_connection(sigma_grid(6))
    space = harmonic_basis(c, 1)
    x = random_cochain(c.grid, 1, rng)
    p1 = harmonic_project(c, x, space)
    p2 = harmonic_project(c, p1, space)
    assert norm(p1 - p2, c.weights) <= 1e-10 * norm(x, c.weights)
    # projection is harmonic: laplacian annihilates it
    assert norm(laplacian(c, p1), c.weights) <= 1e-8 * norm(x, c.weights)


def test_hodge_decomposition(rng):
    # orthogonality is exact where d_alpha^2 = 0, i.e. at flat connections
    c = flat_connection(sigma_grid(6), twist=True)
    x = random_cochain(c.grid, 1, rng)
    parts = hodge_decompose(c, x)
    w = c.weights
    recon = parts.exact + parts.coexact + parts.harmonic
    assert norm(recon - x, w) <= 1e-8 * norm(x, w)
    # mutual orthogonality
    assert abs(inner_product(parts.exact, parts.coexact, w)) \
        <= 1e-8 * norm(x, w) ** 2
    assert abs(inner_product(parts.exact, parts.harmonic, w)) \
        <= 1e-8 * norm(x, w) ** 2
    assert abs(inner_product(parts.coexact, parts.harmonic, w)) \
        <= 1e-8 * norm(x, w) ** 2


def test_solve_poisson_residual(rng):
    c = random_connection(sigma_grid(6), rng, scale=0.05, twist=True)
    f = random_cochain(c.grid, 2, rng)
    # make the rhs solvable: use d d* of something, i.e. apply the operator
    rhs = covariant_d(c, covariant_d_adjoint(c, f))
    eta = solve_poisson(c, rhs)
    res = covariant_d(c, covariant_d_adjoint(c, eta)) - rhs
    assert norm(res, c.weights) <= 1e-8 * max(norm(rhs, c.weights), 1.0)
