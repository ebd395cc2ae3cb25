import numpy as np
import pytest

from gaugelab import algebra
from gaugelab.algebra import (CutLocusError, InnerProductSpec, adjoint,
                              adjoint_rotation, bracket, check_algebra,
                              check_group, exp_map, from_coords, inner,
                              log_map, random_algebra, random_group, su2_basis,
                              to_coords)


def test_basis_orthogonality():
    e = su2_basis()
    kappa = 2.5
    spec = InnerProductSpec(kappa)
    for i in range(3):
        for j in range(3):
            want = kappa / 2.0 if i == j else 0.0
            assert inner(e[i], e[j], spec) == pytest.approx(want, abs=1e-14)


def test_bracket_cyclic():
    e = su2_basis()
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        assert np.allclose(bracket(e[i], e[j]), e[k], atol=1e-14)
        assert np.allclose(bracket(e[j], e[i]), -e[k], atol=1e-14)


def test_exp_log_roundtrip(rng):
    x = random_algebra(rng, (5,), scale=0.8)
    check_algebra(x)
    u = exp_map(x)
    check_group(u)
    assert np.allclose(log_map(u), x, atol=1e-12)


def test_exp_zero_is_identity():
    x = np.zeros((2, 2), dtype=complex)
    assert np.allclose(exp_map(x), np.eye(2), atol=1e-15)


def test_log_near_cut_locus_raises():
    # rotation by angle ~pi: exp of |x| = pi - tiny is fine to invert,
    # but at -I the branch is undefined
    e = su2_basis()
    u = exp_map(2.0 * np.pi * e[2])  # exp of angle 2pi -> -I? no: check -I
    minus_i = -np.eye(2, dtype=complex)
    with pytest.raises(CutLocusError):
        log_map(minus_i)


def test_adjoint_preserves_algebra_and_inner(rng):
    x = random_algebra(rng, (4,))
    g = random_group(rng, (4,))
    y = adjoint(g, x)
    check_algebra(y)
    assert np.allclose(inner(y, y), inner(x, x), atol=1e-12)


def test_adjoint_rotation_matches_coords(rng):
    g = random_group(rng, (3,))
    x = random_algebra(rng, (3,))
    R = adjoint_rotation(g)
    lhs = to_coords(adjoint(g, x))
    rhs = np.einsum("...ij,...j->...i", R, to_coords(x))
    assert np.allclose(lhs, rhs, atol=1e-12)
    # R is special orthogonal
    assert np.allclose(np.einsum("...ij,...kj->...ik", R, R),
                       np.broadcast_to(np.eye(3), R.shape), atol=1e-12)
    assert np.allclose(np.linalg.det(R), 1.0, atol=1e-12)


def test_coords_roundtrip_and_norm(rng):
    x = random_algebra(rng, (6,))
    c = to_coords(x)
    assert np.allclose(from_coords(c), x, atol=1e-14)
    kappa = 3.0
    spec = InnerProductSpec(kappa)
    assert np.allclose(inner(x, x, spec), kappa / 2.0 * np.sum(c * c, -1),
                       atol=1e-12)


def test_vectorized_matches_scalar(rng):
    x = random_algebra(rng, (7,), scale=0.5)
    u_batch = exp_map(x)
    for k in range(7):
        assert np.allclose(exp_map(x[k]), u_batch[k], atol=1e-14)


def test_inner_spec_validation():
    with pytest.raises(ValueError):
        InnerProductSpec(0.0)
