"""Yang-Mills energy/gradient/heat flow, Newton projection to flat
connections, doubling for Neumann boundary flow, and gauge utilities.

The gradient here is the exact derivative of the plaquette energy
E = (1/2) sum_f w_f ||log(s P_f)||^2 with respect to the deviation
cochain, computed through the differential of the matrix exponential
(a truncated dexp series). In the abelian sector it reduces to d* d a
exactly; the finite-difference contract is met at machine precision
rather than by discretization accident.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import algebra, elliptic, mesh
from .connection import (Connection, complex_gauge_flow, covariant_d_adjoint,
                         curvature, gauge_transform, wilson_traces)
from .mesh import Cochain, GridSpec, MetricWeights, shift

__all__ = [
    "FlowState",
    "NSResult",
    "FlowError",
    "ym_energy",
    "ym_grad",
    "ym_flow",
    "ns_newton",
    "orbit_compare",
    "double_connection",
    "sigma_pullback",
    "restrict_doubled",
    "double_and_flow",
    "boundary_restriction_continuity",
    "temporal_gauge",
    "slice_lq_norm",
]


class FlowError(RuntimeError):
    """Integrator failure; carries the last good state."""

    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


@dataclass
class FlowState:
    connection: Connection
    tau: float
    energy_history: list = field(default_factory=list)  # (tau, energy)
    step_stats: dict = field(default_factory=dict)
    flat_limit: bool = False


@dataclass
class NSResult:
    Xi: Cochain  # accumulated imaginary-gauge generator (0-cochain)
    flat: Connection
    iterations: int
    curvature_residual: float
    residual_history: list = field(default_factory=list)


def ym_energy(c: Connection, w: MetricWeights = None) -> float:
    w = c.weights if w is None else w
    f = curvature(c)
    return 0.5 * mesh.inner_product(f, f, w)


def _dagger(u):
    return np.swapaxes(u, -1, -2).conj()


def _dexp_adjoint(a: np.ndarray, y: np.ndarray, terms: int = 30) -> np.ndarray:
    """Adjoint of the right dexp factor: sum_k ad_a^k y / (k+1)!."""
    term = y
    out = y.copy()
    for k in range(1, terms):
        term = algebra.bracket(a, term) / (k + 1.0)
        out += term
        if float(np.max(np.abs(term))) < 1e-18:
            break
    return out


def ym_grad(c: Connection) -> Cochain:
    """Exact L2 gradient of ym_energy in the deviation coordinates.

    Matches finite differences of ym_energy to near machine precision
    and equals d* d a exactly in the abelian sector.
    """
    links = c.links()
    w = c.weights
    g = c.grid
    acc = Cochain.zeros(1, g, c.n)
    for (i, j) in mesh.axis_subsets(g.ndim, 2):
        wf = w.weight((i, j))
        u1 = links[i]
        u2 = shift(links[j], i)
        u3 = shift(links[i], j)
        u4 = links[j]
        m34 = _dagger(u3) @ _dagger(u4)
        p = u1 @ u2 @ m34
        if c.n == 2:
            tr = np.trace(p, axis1=-2, axis2=-1).real
            s = np.where(tr >= 0, 1.0, -1.0)[..., None, None]
            x = algebra.log_map(s * p)
        else:
            x = algebra.log_map(p)
        # pairing <X, Ad(R) xi> = <Ad(R^-1) X, xi>; the y's below are the
        # rotated X's, to be pushed through Ad(U0) and the dexp adjoint.
        y1 = algebra.adjoint(u2 @ m34, x)  # Ad(U2 U3^-1 U4^-1) X
        y2 = algebra.adjoint(m34, x)  # Ad(U3^-1 U4^-1) X
        y4 = algebra.adjoint(_dagger(u4), x)  # Ad(U4^-1) X
        ai, aj = c.a.comps[(i,)], c.a.comps[(j,)]
        u0i, u0j = c.ref.links[i], c.ref.links[j]
        acc.comps[(i,)] += wf * _dexp_adjoint(ai, algebra.adjoint(u0i, y1))
        cj = wf * _dexp_adjoint(shift(aj, i), algebra.adjoint(shift(u0j, i), y2))
        acc.comps[(j,)] += shift(cj, i, -1)
        ci = wf * _dexp_adjoint(shift(ai, j), algebra.adjoint(shift(u0i, j), y2))
        acc.comps[(i,)] -= shift(ci, j, -1)
        acc.comps[(j,)] -= wf * _dexp_adjoint(aj, algebra.adjoint(u0j, y4))
    for ax in range(g.ndim):
        acc.comps[(ax,)] /= w.weight((ax,))
    return acc


# Dormand-Prince 5(4) tableau
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
          187 / 2100, 1 / 40)

_ENERGY_SLACK = 1e-12


def ym_flow(c: Connection, tau_end: float, tol: float = 1e-9,
            h0: float = None, flat_capture: float = None,
            curvature_tol: float = 1e-8, max_extend: float = 10.0,
            snapshot_cb=None) -> FlowState:
    """Adaptive embedded RK5(4) integration of da/dtau = -ym_grad.

    Steps are rejected on local error above tol or on any energy increase
    beyond round-off slack. If flat_capture is set and the energy drops
    below it, integration continues past tau_end (up to max_extend * tau_end)
    until the curvature norm reaches curvature_tol; the state is then
    flagged flat_limit.
    """
    if tau_end <= 0:
        raise ValueError("tau_end must be positive")
    cur = c
    tau = 0.0
    e = ym_energy(cur)
    hist = [(0.0, e)]
    accepted = rejected = 0
    h = h0 if h0 is not None else min(0.01, tau_end / 10.0)
    hard_end = tau_end
    flat = False
    while tau < hard_end - 1e-15:
        h = min(h, hard_end - tau)
        with np.errstate(over="ignore", invalid="ignore"):
            ks = []
            for row in _DP_A:
                a_stage = cur.a
                for coef, k in zip(row, ks):
                    if coef:
                        a_stage = a_stage + (h * coef) * k
                ks.append(-ym_grad(cur.with_deviation(a_stage)))
            a5 = cur.a
            a4 = cur.a
            for b5, b4, k in zip(_DP_B5, _DP_B4, ks):
                if b5:
                    a5 = a5 + (h * b5) * k
                if b4:
                    a4 = a4 + (h * b4) * k
            err = (a5 - a4).max_abs()
        scale = max(1.0, cur.a.max_abs())
        if not np.isfinite(err):
            # blown-up trial step: shrink hard, never feed NaN to the
            # step-size controller (NaN comparisons silently accept)
            rejected += 1
            h *= 0.2
            if h < 1e-14:
                raise FlowError(
                    "step size underflow (stiff or inconsistent tolerances)",
                    FlowState(cur, tau, hist, {"accepted": accepted,
                                               "rejected": rejected}))
            continue
        cand = cur.with_deviation(a5)
        e_new = ym_energy(cand)
        if err <= tol * scale and e_new <= e + _ENERGY_SLACK * max(1.0, e):
            tau += h
            cur = cand
            e = e_new
            hist.append((tau, e))
            accepted += 1
            if snapshot_cb is not None:
                snapshot_cb(tau, cur, e)
            if flat_capture is not None and e < flat_capture:
                fnorm = np.sqrt(2.0 * e)
                if fnorm <= curvature_tol:
                    flat = True
                    break
                hard_end = min(max_extend * tau_end, max(hard_end, tau + tau_end))
        else:
            rejected += 1
        ratio = (tol * scale / err) ** 0.2 if err > 0 else 5.0
        h *= min(5.0, max(0.2, 0.9 * ratio))
        if h < 1e-14:
            raise FlowError(
                "step size underflow (stiff or inconsistent tolerances)",
                FlowState(cur, tau, hist, {"accepted": accepted,
                                           "rejected": rejected}))
    stats = {"accepted": accepted, "rejected": rejected, "final_step": h}
    return FlowState(cur, tau, hist, stats, flat)


def ns_newton(c: Connection, tol: float = 1e-11, max_iter: int = 40,
              eps0: float = 1.0, solver_tol: float = 1e-13) -> NSResult:
    """Project a small-curvature 2D connection to the flat connection in its
    complexified-gauge orbit by Newton iteration.

    Each step solves the 2-form Laplacian equation d d* eta = F at the
    current connection and moves along the imaginary gauge direction with
    generator -star(eta) for unit time; to linear order this removes the
    non-harmonic curvature entirely. The step orientation is pinned by the
    requirement that the curvature norm drops on the first iteration
    (asserted at runtime).
    """
    if c.grid.ndim != 2:
        raise ValueError("ns_newton operates on 2D grids")
    w = c.weights
    f = curvature(c)
    res = mesh.norm(f, w)
    if res > eps0:
        raise ValueError(f"curvature {res:g} above the small-curvature bound {eps0:g}")
    xi = Cochain.zeros(0, c.grid, c.n)
    hist = [res]
    cur = c
    it = 0
    while res > tol and it < max_iter:
        eta = elliptic.solve_poisson(cur, f, tol=solver_tol)
        zeta = -1.0 * mesh.hodge_star(eta, w)
        cand = complex_gauge_flow(cur, zeta, 1.0)
        new_res = mesh.norm(curvature(cand), w)
        if it == 0 and new_res >= res:
            raise RuntimeError(
                "Newton step failed to decrease curvature on the first "
                "iteration (orientation/assembly fault)")
        if new_res >= res:
            break
        cur, res = cand, new_res
        f = curvature(cur)
        xi = xi + zeta
        hist.append(res)
        it += 1
    return NSResult(xi, cur, it, res, hist)


def orbit_compare(c1: Connection, c2: Connection) -> dict:
    """Wilson-trace comparison over a spanning loop set.

    Traces are gauge invariant pointwise, so agreement certifies the same
    unitary gauge orbit for connections on one grid and reference sector.
    """
    if c1.grid != c2.grid:
        raise ValueError("orbit_compare needs a common grid")
    t1 = wilson_traces(c1)
    t2 = wilson_traces(c2)
    return {
        "max_discrepancy": float(np.max(np.abs(t1 - t2))),
        "rms_discrepancy": float(np.sqrt(np.mean((t1 - t2) ** 2))),
        "n_loops": int(t1.size),
    }


# ------------------------------------------------------------- doubling

def _doubled_grid(g: GridSpec, axis: int) -> GridSpec:
    m = g.dims[axis]
    if m < 3:
        raise ValueError("interval axis needs at least 3 vertices to double")
    dims = list(g.dims)
    dims[axis] = 2 * (m - 1)
    return GridSpec(tuple(dims), g.spacing, g.axis_block)


def _reflect_index(m: int, axis: int, ndim: int):
    """Index map sigma(v) = 2m-2-v (mod 2(m-1)) on the doubled axis."""
    idx = [slice(None)] * ndim
    order = (-np.arange(2 * (m - 1)) + (2 * m - 2)) % (2 * (m - 1))
    idx[axis] = order
    return tuple(idx)


def check_boundary_condition(c: Connection, axis: int, tol: float = 1e-12) -> float:
    """Max magnitude of normal deviation on the two boundary edge layers and
    the wrap layer (bases 0, m-2, m-1)."""
    m = c.grid.dims[axis]
    an = c.a.comps[(axis,)]
    worst = 0.0
    for base in (0, m - 2, m - 1):
        sl = [slice(None)] * c.grid.ndim
        sl[axis] = base
        worst = max(worst, float(np.max(np.abs(an[tuple(sl)]))))
    return worst


def double_connection(c: Connection, axis: int) -> Connection:
    """Reflect an interval-axis connection to the doubled periodic grid.

    Tangential deviation extends evenly (sigma-invariant), normal deviation
    oddly; the flat reference must not involve the doubled axis (identity
    normal links, tangential links constant along it).
    """
    g = c.grid
    m = g.dims[axis]
    if check_boundary_condition(c, axis) > 1e-12:
        raise ValueError("normal deviation nonzero on a boundary layer")
    if np.max(np.abs(c.ref.links[axis] - np.eye(c.n))) > 1e-12:
        raise ValueError("reference must be trivial along the interval axis")
    g2 = _doubled_grid(g, axis)
    vmap = np.concatenate([np.arange(m), np.arange(m - 2, 0, -1)])
    take = [slice(None)] * g.ndim
    take[axis] = vmap
    take = tuple(take)

    links2 = {}
    for ax in range(g.ndim):
        arr = c.ref.links[ax][take]
        if ax == axis:
            arr = np.broadcast_to(np.eye(c.n, dtype=np.complex128),
                                  g2.dims + (c.n, c.n)).copy()
        links2[ax] = arr
    ref2 = type(c.ref)(g2, links2)
    ref2.verify_central()

    a2 = Cochain.zeros(1, g2, c.n)
    for ax in range(g.ndim):
        if ax == axis:
            an = c.a.comps[(axis,)]
            emap = np.concatenate([np.arange(m - 1), np.arange(m - 2, -1, -1)])
            esl = [slice(None)] * g.ndim
            esl[axis] = emap
            ext = an[tuple(esl)]
            sgn = np.ones(2 * (m - 1))
            sgn[m - 1:] = -1.0
            shp = [1] * (g.ndim + 2)
            shp[axis] = 2 * (m - 1)
            a2.comps[(axis,)] = ext * sgn.reshape(shp)
        else:
            a2.comps[(ax,)] = c.a.comps[(ax,)][take]
    return Connection(ref2, a2, mesh.hodge_weights(g2, c.weights.epsilon))


def sigma_pullback(c: Connection, axis: int) -> Connection:
    """Pull back a doubled-grid connection by the reflection isometry."""
    g = c.grid
    mm = g.dims[axis]  # = 2(m-1)
    ridx = _reflect_index(mm // 2 + 1, axis, g.ndim)
    a2 = Cochain.zeros(1, g, c.n)
    for ax in range(g.ndim):
        if ax == axis:
            # edge v -> v+1 maps to the reversed edge based at sigma(v)-1
            arr = -c.a.comps[(axis,)][ridx]
            a2.comps[(axis,)] = shift(arr, axis, 1)
        else:
            a2.comps[(ax,)] = c.a.comps[(ax,)][ridx]
    return Connection(c.ref, a2, c.weights)


def restrict_doubled(c2: Connection, axis: int, orig_grid: GridSpec,
                     ref: "ReferenceTransport" = None) -> Connection:
    """Restrict a doubled connection back to the original interval grid."""
    m = orig_grid.dims[axis]
    take = [slice(None)] * orig_grid.ndim
    take[axis] = np.arange(m)
    take = tuple(take)
    a = Cochain.zeros(1, orig_grid, c2.n)
    for ax in range(orig_grid.ndim):
        arr = c2.a.comps[(ax,)][take]
        if ax == axis:
            sl = [slice(None)] * orig_grid.ndim
            sl[axis] = m - 1
            arr[tuple(sl)] = 0.0  # wrap layer is not part of the interval
        a.comps[(ax,)] = arr
    if ref is None:
        from .connection import trivial_reference
        ref = trivial_reference(orig_grid, c2.n)
    return Connection(ref, a, mesh.hodge_weights(orig_grid, c2.weights.epsilon))


def double_and_flow(c: Connection, axis: int, tau_end: float,
                    tol: float = 1e-9) -> dict:
    """Neumann-boundary heat flow via reflection: double, flow, restrict.

    Returns the doubled FlowState, the restricted connection, and the
    measured sigma-asymmetry and boundary defect after the flow.
    """
    c2 = double_connection(c, axis)
    sym0 = (c2.a - sigma_pullback(c2, axis).a).max_abs()
    state = ym_flow(c2, tau_end, tol=tol)
    cf = state.connection
    sym = (cf.a - sigma_pullback(cf, axis).a).max_abs()
    m = c.grid.dims[axis]
    an = cf.a.comps[(axis,)]
    sl_lo = [slice(None)] * c.grid.ndim
    sl_lo[axis] = m - 2
    sl_hi = [slice(None)] * c.grid.ndim
    sl_hi[axis] = m - 1
    # vertex-centered normal average at the reflection-fixed boundary vertex
    boundary_defect = float(np.max(np.abs(
        an[tuple(sl_lo)] + an[tuple(sl_hi)]))) / 2.0
    restricted = restrict_doubled(cf, axis, c.grid, c.ref)
    return {
        "state": state,
        "restricted": restricted,
        "sigma_defect_initial": sym0,
        "sigma_defect_final": sym,
        "boundary_defect": boundary_defect,
    }


def slice_lq_norm(x: np.ndarray, grid: GridSpec, sigma_axes: tuple, q: float,
                  spec: algebra.InnerProductSpec = algebra.InnerProductSpec()) -> float:
    """Lattice L^q norm over a Sigma-slice of pointwise algebra magnitudes."""
    mag = np.sqrt(np.maximum(algebra.inner(x, x, spec), 0.0))
    vol = float(np.prod([grid.spacing[a] for a in sigma_axes]))
    return float((vol * np.sum(mag ** q)) ** (1.0 / q))


def boundary_restriction_continuity(family, axis: int, tau_end: float,
                                    qs=(1, 2, 4), tol: float = 1e-9) -> dict:
    """For each compliant connection, flow (via doubling) and measure the
    boundary-slice gap ||(Heat(a) - a)|_Sigma||_{L^q} against ||F_a||."""
    rows = []
    for c in family:
        res = double_and_flow(c, axis, tau_end, tol=tol)
        diff = res["restricted"].a - c.a
        g = c.grid
        sig = tuple(ax for ax in range(g.ndim) if ax != axis)
        m = g.dims[axis]
        gaps = {}
        for q in qs:
            worst = 0.0
            for ax in sig:
                sl = [slice(None)] * g.ndim
                sl[axis] = m - 1
                slab = diff.comps[(ax,)][tuple(sl)]
                worst = max(worst, slice_lq_norm(slab, g, sig, q))
            gaps[q] = worst
        fnorm = mesh.norm(curvature(c), c.weights)
        rows.append({"curvature": fnorm, "gaps": gaps})
    return {"rows": rows}


def temporal_gauge(c: Connection, base_axis: int) -> Connection:
    """Eliminate the base-direction deviation on all non-wrap layers by a
    slicewise gauge transformation; the wrap layer absorbs the holonomy.
    Wilson observables are unchanged at round-off."""
    g = c.grid
    links = c.links()
    u = np.zeros(g.dims + (c.n, c.n), dtype=np.complex128)
    sl0 = [slice(None)] * g.ndim
    sl0[base_axis] = 0
    u[tuple(sl0)] = np.eye(c.n)
    for k in range(g.dims[base_axis] - 1):
        sl_k = [slice(None)] * g.ndim
        sl_k[base_axis] = k
        sl_k1 = [slice(None)] * g.ndim
        sl_k1[base_axis] = k + 1
        u[tuple(sl_k1)] = _dagger(links[base_axis][tuple(sl_k)]) @ u[tuple(sl_k)]
    return gauge_transform(c, u)
