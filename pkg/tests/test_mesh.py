import numpy as np
import pytest

from conftest import product_grid, random_cochain, sigma_grid
from gaugelab import mesh
from gaugelab.mesh import (Cochain, GridSpec, coboundary, hodge_star,
                           hodge_weights, inner_product, norm,
                           pairing_averaged, pairing_topological, shift,
                           wedge_bracket)


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec((4,), (1.0,), ("S",))          # 1D rejected
    with pytest.raises(ValueError):
        GridSpec((4, 4), (1.0,), ("S", "S"))     # length mismatch
    with pytest.raises(ValueError):
        GridSpec((4, 4), (1.0, 1.0), ("S", "X"))
    with pytest.raises(ValueError):
        GridSpec((4, 4, 4), (1.0,) * 3, ("Sigma",) * 3)  # >2 Sigma axes


def test_shift_convention():
    arr = np.arange(8).reshape(4, 2)
    assert np.array_equal(shift(arr, 0, 1), np.roll(arr, -1, 0))
    assert np.array_equal(shift(arr, 0, -2), np.roll(arr, 2, 0))


@pytest.mark.parametrize("grid", [sigma_grid(6),
                                  GridSpec((4, 4, 4), (0.25,) * 3,
                                           ("S", "Sigma", "Sigma")),
                                  product_grid(4)])
def test_d_squared_zero(grid, rng):
    for deg in range(grid.ndim - 1):
        x = random_cochain(grid, deg, rng)
        dd = coboundary(coboundary(x))
        assert dd.max_abs() <= 1e-12 * max(x.max_abs(), 1.0)


@pytest.mark.parametrize("epsilon", [1.0, 0.5])
def test_star_is_isometry_and_involution(rng, epsilon):
    grid = product_grid(4)
    w = hodge_weights(grid, epsilon)
    for deg in range(grid.ndim + 1):
        x = random_cochain(grid, deg, rng)
        sx = hodge_star(x, w)
        assert norm(sx, w) == pytest.approx(norm(x, w), rel=1e-12)
        ss = hodge_star(sx, w)
        sign = (-1) ** (deg * (grid.ndim - deg))
        for axes in x.comps:
            assert np.allclose(ss.comps[axes], sign * x.comps[axes],
                               atol=1e-12 * max(x.max_abs(), 1.0))


def test_epsilon_weight_scaling():
    grid = product_grid(4, length=1.0)
    eps = 0.5
    w1 = hodge_weights(grid, 1.0)
    we = hodge_weights(grid, eps)
    # total 4-volume carries eps^2 (two fiber directions)
    assert we.total_volume() == pytest.approx(eps ** 2 * w1.total_volume(),
                                              rel=1e-12)
    # pure-fiber 2-face weight scales like eps^-2
    assert we.weight((2, 3)) == pytest.approx(w1.weight((2, 3)) / eps ** 2,
                                              rel=1e-12)
    # mixed faces are epsilon-neutral: one fiber length up, one down
    assert we.weight((0, 2)) == pytest.approx(w1.weight((0, 2)), rel=1e-12)


def test_inner_product_bilinear_symmetric(rng):
    grid = sigma_grid(6)
    w = hodge_weights(grid, 1.0)
    x = random_cochain(grid, 1, rng)
    y = random_cochain(grid, 1, rng)
    assert inner_product(x, y, w) == pytest.approx(inner_product(y, x, w),
                                                   rel=1e-12)
    assert inner_product(x, x, w) > 0


def test_wedge_bracket_symmetry(rng):
    # [a wedge b] on 1-cochains is symmetric in (a, b)
    grid = sigma_grid(6)
    a = random_cochain(grid, 1, rng)
    b = random_cochain(grid, 1, rng)
    ab = wedge_bracket(a, b)
    ba = wedge_bracket(b, a)
    for axes in ab.comps:
        assert np.allclose(ab.comps[axes], ba.comps[axes], atol=1e-12)


def test_pairing_estimators_agree_on_separable_data(rng):
    grid = product_grid(4)
    x = random_cochain(grid, 2, rng)
    pt = pairing_topological(x, x)
    pa = pairing_averaged(x, x)
    assert np.isfinite(pt) and np.isfinite(pa)
    # both reduce to the same cell sum when one factor is constant
    y = Cochain.zeros(2, grid, 2)
    for axes in y.comps:
        y.comps[axes] = np.broadcast_to(
            mesh.algebra.from_coords(np.array([0.3, -0.1, 0.2])),
            y.comps[axes].shape).copy()
    assert pairing_topological(x, y) == pytest.approx(
        pairing_averaged(x, y), rel=1e-10, abs=1e-12)


def test_serialization_roundtrip(rng):
    grid = GridSpec((4, 4, 4), (0.25, 0.5, 0.125), ("S", "Sigma", "Sigma"))
    x = random_cochain(grid, 2, rng)
    y = Cochain.from_bytes(x.to_bytes())
    assert y.degree == x.degree and y.grid == x.grid
    for axes in x.comps:
        assert np.array_equal(y.comps[axes], x.comps[axes])
    # debug JSON parses
    import json
    json.loads(x.to_debug_json())
