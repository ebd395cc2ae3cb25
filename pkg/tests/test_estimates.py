import numpy as np
import pytest

from conftest import flat_connection, random_cochain, sigma_grid
from gaugelab import elliptic, estimates, mesh
from gaugelab.estimates import (EstimateReport, FDGuardError, check_gslemma,
                                complex_linearity_check,
                                elliptic_constant_probe, fingerprint,
                                gslemma_trials, linearization_defect,
                                make_bump, ns_identity_scaling,
                                proj_lipschitz)
from gaugelab.mesh import norm


def _unit(x, w):
    return x * (1.0 / norm(x, w))


def test_fingerprint_stable_and_order_independent():
    a = fingerprint({"x": 1, "y": [1, 2]})
    b = fingerprint({"y": [1, 2], "x": 1})
    assert a == b and len(a) == 16
    assert fingerprint({"x": 2}) != a


def test_gslemma_symbolic_second_derivative():
    R, r = 1.0, 0.5
    s = np.linspace(-3.0, 3.0, 4001)
    k = np.pi / (R + r)
    e = np.cos(k * s) + 1.0
    epp = -k ** 2 * np.cos(k * s)
    f = np.maximum(0.0, -epp)          # minimal admissible nonnegative f
    g = np.maximum(epp, 0.0)           # e'' clipped
    rep = check_gslemma(s, e, f, g, R, r)
    assert rep.passed
    assert rep.constants["slack"] > 0
    assert rep.config_fingerprint


def test_gslemma_reports_violated_preconditions():
    s = np.linspace(-2.0, 2.0, 401)
    e = np.zeros_like(s)
    f = -np.ones_like(s)              # violates f >= 0
    g = np.zeros_like(s)
    with pytest.raises(ValueError, match="f >= 0"):
        check_gslemma(s, e, f, g, 1.0, 0.5)


def test_gslemma_trials_zero_violations():
    rep = gslemma_trials(200, seed=5)
    assert rep.passed
    assert rep.constants["violations"] == 0
    assert rep.constants["trials"] == 200


def test_ns_identity_scaling_slope(rng):
    grid = sigma_grid(8)
    flat = flat_connection(grid, twist=True)
    v = _unit(random_cochain(grid, 1, rng), flat.weights)
    rep = ns_identity_scaling(flat, v,
                              [1e-4, 3e-4, 1e-3, 3e-3, 1e-2])
    assert rep.passed
    assert rep.slopes["log_dist_vs_log_curv"] >= 0.95
    assert len(rep.points) >= 5
    # requires at least two decades of t
    with pytest.raises(ValueError):
        ns_identity_scaling(flat, v, [1e-3, 2e-3, 4e-3])


def test_proj_lipschitz_slope(rng):
    grid = sigma_grid(8)
    flat = flat_connection(grid)
    w = flat.weights
    v = _unit(random_cochain(grid, 1, rng), w)
    u = _unit(random_cochain(grid, 1, rng), w)
    alpha = flat.with_deviation(flat.a + 0.02 * v)
    primes = [alpha.with_deviation(alpha.a + t * u)
              for t in (0.02, 0.01, 0.005, 0.0025, 0.00125)]
    probes = [random_cochain(grid, 1, rng) for _ in range(3)]
    rep = proj_lipschitz(alpha, primes, probes)
    assert rep.passed
    assert rep.slopes["log_sup_vs_log_dist"] >= 0.95
    assert np.isfinite(rep.constants["C"])


def test_linearization_defect_vanishes_at_flat(rng):
    grid = sigma_grid(8)
    flat = flat_connection(grid)
    probes = [random_cochain(grid, 1, rng) for _ in range(2)]
    rep = linearization_defect(flat, probes)
    assert rep.constants["f"] <= 1e-7


def test_linearization_defect_decays(rng):
    grid = sigma_grid(8)
    flat = flat_connection(grid)
    v = _unit(random_cochain(grid, 1, rng), flat.weights)
    probes = [random_cochain(grid, 1, rng) for _ in range(2)]
    vals = []
    for t in (2e-3, 5e-4):
        rep = linearization_defect(
            flat.with_deviation(flat.a + t * v), probes)
        vals.append(rep.constants["f"])
    assert vals[1] < vals[0]


def test_complex_linearity_and_kernel(rng):
    from gaugelab.connection import covariant_d, covariant_d_adjoint
    grid = sigma_grid(8)
    flat = flat_connection(grid)
    w = flat.weights
    v = _unit(random_cochain(grid, 1, rng), w)
    alpha = flat.with_deviation(flat.a + 1e-3 * v)
    space = elliptic.harmonic_basis(flat, 1)
    probes = [elliptic.unpack(space.basis[:, k], 1, grid, w, 2)
              for k in (0, 3)]
    kp = [_unit(covariant_d(alpha, random_cochain(grid, 0, rng)), w),
          _unit(covariant_d_adjoint(alpha, random_cochain(grid, 2, rng)), w)]
    rep = complex_linearity_check(alpha, probes, kernel_probes=kp)
    assert rep.passed
    assert rep.constants["defect"] <= rep.band["defect_max"]
    assert rep.constants["kernel_deriv_max"] <= rep.band["kernel_deriv_max"]


def test_elliptic_constant_stability(rng):
    grid = sigma_grid(8)
    flat = flat_connection(grid)
    v = _unit(random_cochain(grid, 1, rng), flat.weights)
    fam = [flat.with_deviation(flat.a + t * v)
           for t in (1e-4, 5e-4, 1e-3, 2e-3)]
    probes = [random_cochain(grid, 1, rng) for _ in range(3)]
    rep = elliptic_constant_probe(fam, probes)
    assert rep.passed
    cs = [p["C1"] for p in rep.points]
    assert max(cs) <= 2.0 * min(cs)


def test_fd_guard():
    with pytest.raises(FDGuardError):
        estimates._fd_guard(np.array([1.0]), np.array([2.0]))
    estimates._fd_guard(np.array([1.0]), np.array([1.01]))


def test_bump_profile_invariants():
    b = make_bump(0.5, 1.0, samples=512)
    core = np.abs(b.s) <= 0.5
    assert np.all(b.h[core] == 1.0)
    assert np.all(b.h[np.abs(b.s) >= 1.0 + 1e-12] == 0.0)
    assert np.isfinite(b.C0) and b.C0 > 0
    # C0 grows as the ramp narrows
    c0s = [make_bump(c, 1.0, 2048).C0 for c in (0.3, 0.6, 0.9)]
    assert c0s[0] < c0s[1] < c0s[2]
    # constant-1 over the whole sampled window: zero constant
    flat_b = make_bump(2.0, 3.0, samples=128, margin=0.3)
    assert flat_b.C0 == 0.0
    with pytest.raises(ValueError):
        make_bump(1.0, 0.5)


def test_report_serialization():
    rep = EstimateReport("x", {"C": 1.0}, {}, {"max": 2.0}, True, "abc",
                         points=[{"t": 1.0}])
    d = rep.to_dict()
    assert d["name"] == "x" and d["passed"] is True
    assert d["points"] == [{"t": 1.0}]
