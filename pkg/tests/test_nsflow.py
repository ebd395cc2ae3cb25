import numpy as np
import pytest

from conftest import (flat_connection, random_cochain, random_connection,
                      sigma_grid)
from gaugelab import algebra, mesh, nsflow
from gaugelab.connection import (Connection, curvature, gauge_transform,
                                 trivial_reference)
from gaugelab.mesh import Cochain, GridSpec, hodge_weights, norm
from gaugelab.nsflow import (boundary_restriction_continuity,
                             check_boundary_condition, double_and_flow,
                             double_connection, ns_newton, orbit_compare,
                             sigma_pullback, ym_energy, ym_flow, ym_grad)


@pytest.mark.parametrize("epsilon", [1.0, 0.25])
def test_ym_grad_matches_finite_differences(rng, epsilon):
    c = random_connection(sigma_grid(6), rng, scale=0.2, epsilon=epsilon)
    g = ym_grad(c)
    h = 1e-5
    for _ in range(3):
        v = random_cochain(c.grid, 1, rng)
        v = v * (1.0 / norm(v, c.weights))
        ep = ym_energy(c.with_deviation(c.a + h * v))
        em = ym_energy(c.with_deviation(c.a + (-h) * v))
        fd = (ep - em) / (2 * h)
        ip = mesh.inner_product(g, v, c.weights)
        assert ip == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_flow_energy_monotone(rng):
    c = random_connection(sigma_grid(6), rng, scale=0.4)
    state = ym_flow(c, 0.05, tol=1e-9)
    es = [e for _, e in state.energy_history]
    assert all(es[i + 1] <= es[i] + 1e-12 * max(es[0], 1.0)
               for i in range(len(es) - 1))
    assert es[-1] < es[0]


def test_abelian_flow_matches_fourier_heat_oracle():
    L = 8
    grid = GridSpec((L, L), (1.0, 1.0), ("Sigma", "Sigma"))
    w = hodge_weights(grid, 1.0)
    e3 = algebra.su2_basis()[2]
    x = np.arange(L)
    amp = {1: 0.11, 2: -0.07, 3: 0.05}
    f0 = sum(A * np.cos(2 * np.pi * m * x / L + 0.3 * m)
             for m, A in amp.items())
    a = Cochain.zeros(1, grid, 2)
    a.comps[(0,)] = f0[None, :, None, None] * e3  # varies along axis 1
    c = Connection(trivial_reference(grid), a, w)
    state = ym_flow(c, 1.0, tol=1e-10)
    g0 = algebra.to_coords(state.connection.a.comps[(0,)])[..., 2]
    got = np.fft.fft(g0[0, :]) / L
    init = np.fft.fft(f0) / L
    for m in range(1, 4):
        lam = 4.0 * np.sin(np.pi * m / L) ** 2
        assert abs(got[m] - init[m] * np.exp(-lam)) <= 1e-6


def test_ns_flat_input_is_fixed(rng):
    c = flat_connection(sigma_grid(6), twist=True)
    res = ns_newton(c)
    assert res.iterations == 0
    assert norm(res.Xi, c.weights) == 0.0
    assert res.curvature_residual <= 1e-12


def test_ns_converges_and_flattens(rng):
    c = random_connection(sigma_grid(8), rng, scale=0.005, twist=True)
    res = ns_newton(c, tol=1e-11)
    assert res.curvature_residual <= 1e-11
    assert norm(curvature(res.flat), c.weights) <= 1e-10
    # residual history decays fast (superlinear tail)
    hist = res.residual_history
    assert hist[-1] <= 1e-3 * hist[0]


def test_ns_xi_gauge_equivariance(rng):
    grid = sigma_grid(6)
    c = random_connection(grid, rng, scale=0.01, twist=True)
    u = algebra.random_group(rng, grid.dims, scale=0.3)
    cu = gauge_transform(c, u)
    r1 = ns_newton(c, tol=1e-12)
    r2 = ns_newton(cu, tol=1e-12)
    # links transform by u(tail)^dagger U u(head): generator picks up Ad(u^-1)
    udag = np.swapaxes(u, -1, -2).conj()
    want = algebra.adjoint(udag, r1.Xi.comps[()])
    assert np.max(np.abs(r2.Xi.comps[()] - want)) <= 1e-6


def test_ns_and_heat_flow_land_on_same_orbit(rng):
    c = random_connection(sigma_grid(6), rng, scale=0.01, twist=True)
    res = ns_newton(c, tol=1e-12)
    state = ym_flow(c, 1.0, tol=1e-10, flat_capture=1e-6,
                    curvature_tol=1e-9)
    cmp = orbit_compare(res.flat, state.connection)
    assert cmp["max_discrepancy"] <= 1e-5


def _interval_connection(rng, L=6, scale=0.2):
    grid = GridSpec((L, L), (1.0 / L, 1.0 / L), ("I", "Sigma"))
    w = hodge_weights(grid, 1.0)
    c = Connection(trivial_reference(grid), Cochain.zeros(1, grid, 2), w)
    a = random_cochain(grid, 1, rng, scale)
    # even tangential / zero normal data on the boundary layers
    a.comps[(0,)][0] = 0.0
    a.comps[(0,)][L - 2] = 0.0
    a.comps[(0,)][L - 1] = 0.0
    return c.with_deviation(a)


def test_double_connection_symmetry(rng):
    c = _interval_connection(rng)
    assert check_boundary_condition(c, 0) <= 1e-12
    c2 = double_connection(c, 0)
    gap = (c2.a - sigma_pullback(c2, 0).a).max_abs()
    assert gap <= 1e-12


def test_double_and_flow_preserves_symmetry(rng):
    c = _interval_connection(rng, scale=0.15)
    res = double_and_flow(c, 0, 0.05, tol=1e-9)
    assert res["sigma_defect_initial"] <= 1e-12
    assert res["sigma_defect_final"] <= 1e-8
    assert res["boundary_defect"] <= 1e-8


def test_boundary_restriction_continuity_decays(rng):
    base = _interval_connection(rng, scale=0.2)
    fam = [base.with_deviation(base.a * t) for t in (1.0, 0.25)]
    out = boundary_restriction_continuity(fam, 0, 0.05, qs=(1, 2))
    rows = out["rows"]
    assert rows[1]["curvature"] < rows[0]["curvature"]
    for q in (1, 2):
        assert rows[1]["gaps"][q] < rows[0]["gaps"][q]
