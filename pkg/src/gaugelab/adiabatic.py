"""Adiabatic (fiber-shrinking metric) experiments on product grids.

Conventions: a 4D product grid carries two base axes (block "S", coordinates
s, t) and two fiber axes (block "Sigma"); the metric weights shrink the fiber
by epsilon. The ASD residuals are the self-dual blocks of the holonomy
curvature expressed as densities, so the energy identity

    2 * inst_energy = (eps-weighted residual norms)^2 + <F ^ F> pairing

holds to round-off by construction. Cylinder grids ("S", "I", "Sigma",
"Sigma") reuse the same machinery with three fiber axes for the
Chern-Simons bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import algebra, elliptic, mesh
from .connection import (Connection, ReferenceTransport, SliceDecomposition,
                         chern_simons, curvature, trivial_reference)
from .mesh import Cochain, GridSpec, MetricWeights, hodge_weights, shift
from .nsflow import FlowState, NSResult, ns_newton, ym_energy, ym_flow

__all__ = [
    "AdiabaticReport",
    "SliceFamily",
    "asd_residual",
    "energy_identity",
    "inst_energy",
    "relax_epsilon_asd",
    "curvature_scaling_probe",
    "ns_slice_family",
    "holomorphic_residual",
    "symp_energy",
    "symp_energy_of_connection",
    "family_connection",
    "family_betas",
    "fiber_curvature_density",
    "base_curvature_density",
    "slice_sup_curvature",
    "make_winding_representative",
    "make_holomorphic_representative",
    "make_beltrami_path",
    "windowed_inst_energy",
    "end_slice",
    "chern_simons_energy_check",
    "nabla_s_bound_probe",
]


def _product_axes(grid: GridSpec):
    s_axes = grid.axes_of("S")
    f_axes = tuple(a for a in range(grid.ndim) if a not in s_axes)
    if len(s_axes) != 2 or grid.ndim != 4:
        raise ValueError("need a 4D product grid with two S-axes")
    return s_axes, f_axes


@dataclass
class AdiabaticReport:
    epsilon: float
    tau: float
    inst_energy: float
    res1_norm: float
    res2_norm: float
    topological_pairing: float
    slice_sup_F: float
    sup_gamma: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def fiber_curvature_density(c: Connection) -> np.ndarray:
    """F_alpha density over the full grid (fiber-face curvature / face area)."""
    g = c.grid
    s_axes, f_axes = _product_axes(g)
    f = curvature(c)
    area = g.spacing[f_axes[0]] * g.spacing[f_axes[1]]
    return f.comps[f_axes] / area


def base_curvature_density(c: Connection) -> np.ndarray:
    """gamma density: base-face curvature / base cell area."""
    g = c.grid
    s_axes, _ = _product_axes(g)
    f = curvature(c)
    area = g.spacing[s_axes[0]] * g.spacing[s_axes[1]]
    return f.comps[s_axes] / area


def slice_sup_curvature(c: Connection) -> np.ndarray:
    """Per-base-point sup over Sigma of |F_alpha| (algebra norm)."""
    g = c.grid
    s_axes, f_axes = _product_axes(g)
    dens = fiber_curvature_density(c)
    mag = np.sqrt(np.maximum(algebra.inner(dens, dens), 0.0))
    return np.max(mag, axis=f_axes)


def asd_residual(c: Connection) -> tuple:
    """Self-dual curvature blocks as the paper-normalized residual densities.

    Returns (res1, res2): res1 maps each fiber axis j to the density of the
    mixed self-dual block 2 F+_{s,j} / (h_s h_j) (the discrete
    beta_s - star_Sigma beta_t combination), res2 is the density
    2 F+_{s,t} / (h_s h_t) = gamma + eps^-2 star_Sigma F_alpha. Both vanish
    iff the connection is discretely eps-ASD.
    """
    g = c.grid
    s_axes, f_axes = _product_axes(g)
    f = curvature(c)
    fp = 0.5 * (f + mesh.hodge_star(f, c.weights))
    s0 = s_axes[0]
    res1 = {}
    for j in f_axes:
        key = tuple(sorted((s0, j)))
        res1[j] = 2.0 * fp.comps[key] / (g.spacing[s0] * g.spacing[j])
    key_ss = tuple(sorted(s_axes))
    res2 = 2.0 * fp.comps[key_ss] / (g.spacing[s_axes[0]] * g.spacing[s_axes[1]])
    return res1, res2


def energy_identity(c: Connection) -> dict:
    """Exact recombination: 2 E_eps = 2||F+||^2_eps - <F ^ F>_top, split into
    the mixed-face (res1) and diagonal-face (res2) contributions."""
    w = c.weights
    f = curvature(c)
    fp = 0.5 * (f + mesh.hodge_star(f, w))
    s_axes, f_axes = _product_axes(c.grid)
    mixed = diag = 0.0
    for axes, v in fp.comps.items():
        term = 2.0 * w.weight(axes) * float(np.sum(algebra.inner(v, v)))
        if axes == tuple(sorted(s_axes)) or axes == tuple(sorted(f_axes)):
            diag += term
        else:
            mixed += term
    topo = mesh.pairing_topological(f, f)
    lhs = 2.0 * ym_energy(c)
    return {
        "twice_inst_energy": lhs,
        "res1_norm_sq": mixed,
        "res2_norm_sq": diag,
        "topological_pairing": topo,
        "defect": lhs - (mixed + diag - topo),
    }


def inst_energy(c: Connection, epsilon: float = None) -> float:
    """Yang-Mills energy in the eps-metric."""
    w = c.weights if epsilon is None else hodge_weights(c.grid, epsilon)
    return ym_energy(c, w)


def _report(c: Connection, tau: float) -> AdiabaticReport:
    ident = energy_identity(c)
    gam = base_curvature_density(c)
    gmag = np.sqrt(np.maximum(algebra.inner(gam, gam), 0.0))
    return AdiabaticReport(
        epsilon=c.weights.epsilon,
        tau=tau,
        inst_energy=0.5 * ident["twice_inst_energy"],
        res1_norm=float(np.sqrt(max(ident["res1_norm_sq"], 0.0))),
        res2_norm=float(np.sqrt(max(ident["res2_norm_sq"], 0.0))),
        topological_pairing=ident["topological_pairing"],
        slice_sup_F=float(np.max(slice_sup_curvature(c))),
        sup_gamma=float(np.max(gmag)),
    )


def relax_epsilon_asd(c0: Connection, epsilon: float, budget: float,
                      tol: float = 1e-8, n_snapshots: int = 8) -> tuple:
    """ym_flow in the eps-metric with AdiabaticReport snapshots.

    Returns (FlowState, list of AdiabaticReport) including tau=0 and the end.
    """
    c = c0.with_weights(hodge_weights(c0.grid, epsilon))
    reports = [_report(c, 0.0)]
    marks = [budget * (k + 1) / n_snapshots for k in range(n_snapshots - 1)]

    def cb(tau, conn, energy):
        while marks and tau >= marks[0]:
            marks.pop(0)
            reports.append(_report(conn, tau))

    state = ym_flow(c, budget, tol=tol, snapshot_cb=cb)
    reports.append(_report(state.connection, state.tau))
    return state, reports


def curvature_scaling_probe(c0: Connection, eps_list, budget: float,
                            tol: float = 1e-8, match_fraction: float = 0.01,
                            floor: float = 1e-12) -> list:
    """For each eps: relax and probe rho(eps) = sup|F_alpha| /
    (eps^2 sup|gamma| + floor) at matched residual levels.

    On the periodic torus the zero-charge flows go flat, so endpoint
    comparisons across eps would compare noise against noise; instead each
    trajectory is probed at the accepted step whose eps-independent
    curvature norm is closest to match_fraction * initial (same target for
    every eps).
    """
    w1 = hodge_weights(c0.grid, 1.0)
    target = match_fraction * mesh.norm(curvature(c0), w1)
    rows = []
    for eps in eps_list:
        c = c0.with_weights(hodge_weights(c0.grid, eps))
        best = {}

        def cb(tau, conn, energy, best=best):
            gap = abs(mesh.norm(curvature(conn), w1) - target)
            if not best or gap < best["gap"]:
                sup_f = float(np.max(slice_sup_curvature(conn)))
                gam = base_curvature_density(conn)
                sup_g = float(np.max(np.sqrt(np.maximum(
                    algebra.inner(gam, gam), 0.0))))
                _, res2 = asd_residual(conn)
                r2 = np.sqrt(np.maximum(algebra.inner(res2, res2), 0.0))
                fd = fiber_curvature_density(conn)
                fm = np.sqrt(np.maximum(algebra.inner(fd, fd), 0.0))
                best.update(gap=gap, tau=tau, sup_f=sup_f, sup_g=sup_g,
                            balance=float(np.max(r2) * eps ** 2 /
                                          (np.max(fm) + floor)),
                            energy=energy)

        ym_flow(c, budget, tol=tol, snapshot_cb=cb)
        rows.append({
            "epsilon": eps,
            "rho": best["sup_f"] / (eps ** 2 * best["sup_g"] + floor),
            "sup_F_alpha": best["sup_f"],
            "sup_gamma": best["sup_g"],
            "asd_balance_rel": best["balance"],
            "floor_triggered": bool(eps ** 2 * best["sup_g"] < floor),
            "probe_tau": best["tau"],
            "match_gap": best["gap"],
            "inst_energy": best["energy"],
        })
    return rows


# --------------------------------------------------------- slice families

@dataclass
class SliceFamily:
    """Per-base-point flat Sigma-connections from slicewise NS projection."""

    base_grid_dims: tuple
    base_spacing: tuple
    flats: dict  # base index tuple -> Connection (on the Sigma grid)
    xi_norms: dict
    ns_distances: dict
    slice_curvatures: dict
    template: Connection = None  # the 4D connection the slices came from
    failures: list = field(default_factory=list)


def ns_slice_family(c: Connection, tol: float = 1e-11, eps0: float = 1.0) -> SliceFamily:
    g = c.grid
    s_axes, f_axes = _product_axes(g)
    dec = SliceDecomposition(c, s_axes, f_axes)
    dims = tuple(g.dims[a] for a in s_axes)
    spacing = tuple(g.spacing[a] for a in s_axes)
    flats, xis, dists, curvs = {}, {}, {}, {}
    failures = []
    for idx in np.ndindex(dims):
        al = dec.alpha(idx)
        curvs[idx] = mesh.norm(curvature(al), al.weights)
        try:
            res = ns_newton(al, tol=tol, eps0=eps0)
        except (ValueError, RuntimeError) as exc:
            failures.append((idx, str(exc)))
            continue
        flats[idx] = res.flat
        xis[idx] = mesh.norm(res.Xi, al.weights)
        dists[idx] = mesh.norm(res.flat.a - al.a, al.weights)
    return SliceFamily(dims, spacing, flats, xis, dists, curvs, c, failures)


def family_connection(fam: SliceFamily) -> Connection:
    """Reassemble the projected flat slices into a 4D connection with zero
    temporal deviation, on the template's reference and weights."""
    c = fam.template
    g = c.grid
    s_axes, f_axes = _product_axes(g)
    a = Cochain.zeros(1, g, c.n)
    for idx, flat in fam.flats.items():
        sl = [slice(None)] * g.ndim
        for b_ax, v in zip(s_axes, idx):
            sl[b_ax] = v
        for k, ax in enumerate(f_axes):
            a.comps[(ax,)][tuple(sl)] = flat.a.comps[(k,)]
    return Connection(c.ref, a, c.weights)


def family_betas(fam: SliceFamily) -> dict:
    """Harmonic base-derivatives of the flat family: dict base idx ->
    (beta_s_hat, beta_t_hat) as Cochain(1) on the Sigma grid.

    Derivatives are covariant centered differences read off the mixed
    holonomy curvature of the reassembled family, so they stay correct
    across clutching seams and twisted references (plain differences of
    deviation coordinates are not gauge meaningful there); each is then
    projected onto the slice harmonic space.
    """
    fc = family_connection(fam)
    g = fc.grid
    s_axes, f_axes = _product_axes(g)
    f = curvature(fc)
    links = fc.links()
    dens = {}
    for b_ax in s_axes:
        h = g.spacing[b_ax]
        ub = shift(links[b_ax], b_ax, -1)
        ub_dag = np.swapaxes(ub, -1, -2).conj()
        for j in f_axes:
            fk = f.comps[tuple(sorted((b_ax, j)))]  # b_ax < j on product grids
            back = algebra.adjoint(ub_dag, shift(fk, b_ax, -1))
            dens[(b_ax, j)] = 0.5 * (fk + back) / h  # fiber-edge-integrated
    out = {}
    for idx in fam.flats:
        flat = fam.flats[idx]
        space = elliptic.harmonic_basis(flat, 1)
        sl = [slice(None)] * g.ndim
        for bb, v in zip(s_axes, idx):
            sl[bb] = v
        pair = []
        for b_ax in s_axes:
            b = Cochain.zeros(1, flat.grid, flat.n)
            for k, ax in enumerate(f_axes):
                b.comps[(k,)] = dens[(b_ax, ax)][tuple(sl)]
            pair.append(elliptic.harmonic_project(flat, b, space))
        out[idx] = tuple(pair)
    return out


def holomorphic_residual(fam: SliceFamily, betas: dict = None) -> dict:
    """Per base point: || beta_s_hat - star_Sigma beta_t_hat ||_{L2(Sigma)}.

    The minus sign matches the implemented star orientation: the combination
    is the mixed self-dual curvature block, which vanishes on discrete-ASD
    holomorphic representatives.
    """
    if betas is None:
        betas = family_betas(fam)
    out = {}
    for idx, (bs, bt) in betas.items():
        flat = fam.flats[idx]
        comb = bs - mesh.hodge_star(bt, flat.weights)
        out[idx] = mesh.norm(comb, flat.weights)
    return out


def symp_energy(fam: SliceFamily, betas: dict = None) -> float:
    """E^symp = 1/2 sum_x (||beta_s_hat||^2 + ||beta_t_hat||^2) * base area."""
    if betas is None:
        betas = family_betas(fam)
    area = fam.base_spacing[0] * fam.base_spacing[1]
    total = 0.0
    for idx, pair in betas.items():
        flat = fam.flats[idx]
        for b in pair:
            total += 0.5 * area * mesh.inner_product(b, b, flat.weights)
    return total


def symp_energy_of_connection(c: Connection) -> float:
    """E^symp of a flat-slice holomorphic representative, read off the mixed
    holonomy curvature (which already carries the -d_alpha phi correction
    from any temporal components): the mixed-face part of 2*ym_energy at
    eps = 1. Valid when the representative's betas are harmonic, which is
    what makes it a representative."""
    g = c.grid
    s_axes, f_axes = _product_axes(g)
    w1 = hodge_weights(g, 1.0)
    f = curvature(c)
    total = 0.0
    for axes, v in f.comps.items():
        if len(set(axes) & set(s_axes)) == 1:
            total += 0.5 * w1.weight(axes) * float(np.sum(algebra.inner(v, v)))
    return total


# --------------------------------------------- constructed configurations

def make_winding_representative(n_cells: int, length: float = 1.0,
                                windings: tuple = (2, 2),
                                wobble: float = 0.0) -> Connection:
    """Abelian holomorphic-representative analogue with nonzero charge.

    A square S x Sigma torus; the flat Sigma-connection winds windings[0]
    times around one moduli-torus generator along s and windings[1] times
    around the other along t (windings must be even so the clutching gauge
    transformations are single-valued in SU(2)). Temporal components are
    zero, every slice is flat, and the mixed curvature is the constant
    harmonic beta pair, so E^symp equals the Chern-Weil pairing up to O(h^2).

    wobble adds a slicewise-exact abelian piece d_Sigma chi with a smooth
    modulated potential chi. It changes neither the harmonic betas nor the
    continuum Chern-Weil pairing, but makes the two lattice estimators
    disagree at O(h^2), which is what convergence-order measurements need.
    """
    ms, mt = windings
    if ms % 2 or mt % 2:
        raise ValueError("windings must be even for single-valued clutching")
    L = n_cells
    h = length / L
    grid = GridSpec((L, L, L, L), (h, h, h, h), ("S", "S", "Sigma", "Sigma"))
    e3 = algebra.su2_basis()[2]
    amp_s = 2.0 * np.pi * ms / length  # total alpha_2 shift over one s-period
    amp_t = 2.0 * np.pi * mt / length
    s_idx = np.arange(L)
    a = Cochain.zeros(1, grid)
    # alpha(s, t) = (s/L) amp_s dx2 + (t/L) amp_t dx3, integrated over edges
    a.comps[(2,)] = ((s_idx / L * amp_s * h)[:, None, None, None, None, None]
                     * np.ones(grid.dims)[..., None, None] * e3)
    a.comps[(3,)] = ((s_idx / L * amp_t * h)[None, :, None, None, None, None]
                     * np.ones(grid.dims)[..., None, None] * e3)
    ref = trivial_reference(grid)
    # clutching on the wrap layers: the jump of alpha across the s-wrap is
    # the pure-gauge 1-form amp_s dx2 = g^-1 dg, absorbed into the s-links
    x2 = np.arange(L) * h
    g_s = algebra.exp_map(amp_s * x2[:, None, None] * e3)  # over x2
    ref.links[0][L - 1, :, :, :] = np.swapaxes(g_s, -1, -2).conj()[None, :, None]
    x3 = np.arange(L) * h
    g_t = algebra.exp_map(amp_t * x3[:, None, None] * e3)
    ref.links[1][:, L - 1, :, :] = np.swapaxes(g_t, -1, -2).conj()[None, None, :]
    if wobble:
        # midpoint-sampled gradient of a smooth potential: a continuum-exact
        # Sigma-form whose lattice sampling is only O(h^2)-flat, so the NS
        # projection and the harmonic split both do real work
        k = 2.0 * np.pi / length
        xs = np.arange(L) * h
        base = (wobble * np.sin(k * xs)[:, None, None, None]
                * np.cos(k * xs)[None, :, None, None])
        # distinct fiber modes, otherwise the discrete curl cancels exactly
        s2, c2m = np.sin(k * xs), np.cos(k * (xs + 0.5 * h))
        s3, c3m = np.sin(2 * k * xs), np.cos(2 * k * (xs + 0.5 * h))
        d2 = base * (k * c2m)[None, None, :, None] * s3[None, None, None, :]
        d3 = base * s2[None, None, :, None] * (2 * k * c3m)[None, None, None, :]
        a.comps[(2,)] = a.comps[(2,)] + h * d2[..., None, None] * e3
        a.comps[(3,)] = a.comps[(3,)] + h * d3[..., None, None] * e3
    return Connection(ref, a, hodge_weights(grid, 1.0))


def make_holomorphic_representative(n_cells: int, length: float = 1.0,
                                    windings: tuple = (2, 2),
                                    amp: float = 0.3) -> Connection:
    """Winding representative dressed with a smooth potential chi:
    alpha += d_Sigma chi and temporal components phi = d chi/ds,
    psi = d chi/dt, so the betas stay exactly the harmonic winding pair and
    the family is still holomorphic in the continuum.

    Unlike the bare winding (where every lattice estimator is exact), the
    sampled temporal components give both E^symp and the Chern-Weil pairing
    genuine O(h^2) discretization error, so convergence-order measurements
    against the closed-form continuum value are meaningful.
    """
    c = make_winding_representative(n_cells, length, windings)
    L = n_cells
    h = length / L
    w = 2.0 * np.pi / length
    e3 = algebra.su2_basis()[2]
    xs = np.arange(L) * h
    S = xs[:, None, None, None]
    T = xs[None, :, None, None]
    X = xs[None, None, :, None]
    Y = xs[None, None, None, :]
    phase = w * S + 2.0 * w * T + w * X + 1.0
    cy = np.cos(w * Y + 0.4)
    chi = amp * np.sin(phase) * cy
    chi_s = amp * w * np.cos(phase) * cy
    chi_t = amp * 2.0 * w * np.cos(phase) * cy
    a = c.a
    chi6 = chi[..., None, None] * e3
    for ax in (2, 3):
        a.comps[(ax,)] = a.comps[(ax,)] + (shift(chi6, ax) - chi6)
    a.comps[(0,)] = a.comps[(0,)] + (h * chi_s)[..., None, None] * e3
    a.comps[(1,)] = a.comps[(1,)] + (h * chi_t)[..., None, None] * e3
    return Connection(c.ref, a, c.weights)


def make_beltrami_path(n_cells: int, length: float = 1.0, mode: int = 1,
                       delta: float = 0.05, s_cells: int = None,
                       s_spacing: float = None) -> Connection:
    """Abelian decaying path a(s) = delta e^{-mu s} v on a cylinder grid
    ("S","I","Sigma","Sigma"), with v a circularly polarized curl
    eigenfield (curl v = mu v, mu = 2 pi mode / length) living on the
    (I, Sigma) components and varying along the last axis.

    The continuum path is exactly ASD (a downward Chern-Simons gradient
    trajectory), so inst energy over the window equals CS(start) - CS(end).
    """
    L = n_cells
    h = length / L
    Ls = s_cells if s_cells is not None else L
    hs = s_spacing if s_spacing is not None else h
    grid = GridSpec((Ls, L, L, L), (hs, h, h, h), ("S", "I", "Sigma", "Sigma"))
    mu = 2.0 * np.pi * mode / length
    e3 = algebra.su2_basis()[2]
    x3 = np.arange(L) * h
    v1 = delta * np.cos(mu * x3)  # component along axis 1
    v2 = -delta * np.sin(mu * x3)  # component along axis 2
    s_phys = np.arange(Ls) * hs
    f = np.exp(-mu * s_phys)
    a = Cochain.zeros(1, grid)
    a.comps[(1,)] = (f[:, None, None, None, None, None]
                     * v1[None, None, None, :, None, None]
                     * h * np.ones(grid.dims)[..., None, None] * e3)
    a.comps[(2,)] = (f[:, None, None, None, None, None]
                     * v2[None, None, None, :, None, None]
                     * h * np.ones(grid.dims)[..., None, None] * e3)
    return Connection(trivial_reference(grid), a, hodge_weights(grid, 1.0))


def windowed_inst_energy(c: Connection, s_axis: int = 0) -> float:
    """Energy over the truncated cylinder [0, (L-1) h_s] x Y: trapezoidal
    weights on the Y-faces at the two end slices, wrap-layer cells excluded."""
    g = c.grid
    L = g.dims[s_axis]
    f = curvature(c)
    w = c.weights
    total = 0.0
    for axes, v in f.comps.items():
        dens = algebra.inner(v, v)
        if s_axis in axes:
            sl = [slice(None)] * g.ndim
            sl[s_axis] = slice(0, L - 1)
            total += 0.5 * w.weight(axes) * float(np.sum(dens[tuple(sl)]))
        else:
            wt = np.ones(L)
            wt[0] = wt[-1] = 0.5
            shp = [1] * g.ndim
            shp[s_axis] = L
            total += 0.5 * w.weight(axes) * float(np.sum(dens * wt.reshape(shp)))
    return total


def end_slice(c: Connection, s_axis: int, index: int) -> Connection:
    """Extract the 3D connection at a fixed s-index."""
    fiber = tuple(a for a in range(c.grid.ndim) if a != s_axis)
    dec = SliceDecomposition(c, (s_axis,), fiber)
    return dec.alpha((index,))


def chern_simons_energy_check(c: Connection, s_axis: int = 0,
                              flat_tol: float = 1e-2) -> dict:
    """Compare windowed inst energy against CS(start slice) - CS(end slice).

    The end slices must be flat within flat_tol (curvature norm).
    """
    L = c.grid.dims[s_axis]
    a_minus = end_slice(c, s_axis, 0)
    a_plus = end_slice(c, s_axis, L - 1)
    f_minus = mesh.norm(curvature(a_minus), a_minus.weights)
    f_plus = mesh.norm(curvature(a_plus), a_plus.weights)
    if max(f_minus, f_plus) > flat_tol:
        raise ValueError(
            f"end slices not flat within {flat_tol:g} "
            f"(|F-| = {f_minus:g}, |F+| = {f_plus:g})")
    cs_minus = chern_simons(a_minus)
    cs_plus = chern_simons(a_plus)
    e = windowed_inst_energy(c, s_axis)
    return {
        "inst_energy": e,
        "cs_minus": cs_minus,
        "cs_plus": cs_plus,
        "cs_difference": cs_minus - cs_plus,
        "defect": e - (cs_minus - cs_plus),
        "end_curvatures": (f_minus, f_plus),
    }


def nabla_s_bound_probe(c: Connection, s_axis: int = None,
                        floor: float = 1e-14) -> dict:
    """Measured constant C = (||cov_s F|| + ||cov_s^2 F||) / ||F|| in
    eps-weighted norms, with covariant centered s-differences of the fiber
    curvature (base-vertex frame transport along the s-links)."""
    g = c.grid
    s_axes, f_axes = _product_axes(g)
    s = s_axes[0] if s_axis is None else s_axis
    hs = g.spacing[s]
    links = c.links()
    f = curvature(c)
    fk = f.comps[tuple(sorted(f_axes))]
    u = links[s]
    udag = np.swapaxes(u, -1, -2).conj()
    fwd = algebra.adjoint(u, shift(fk, s))
    u_back = shift(u, s, -1)
    bwd = algebra.adjoint(np.swapaxes(u_back, -1, -2).conj(), shift(fk, s, -1))
    d1 = (fwd - bwd) / (2.0 * hs)
    d2 = (fwd - 2.0 * fk + bwd) / hs ** 2

    def wnorm(arr):
        y = Cochain.zeros(2, g, c.n)
        y.comps[tuple(sorted(f_axes))] = arr
        return mesh.norm(y, c.weights)

    nf = wnorm(fk)
    n1, n2 = wnorm(d1), wnorm(d2)
    return {
        "norm_F": nf,
        "norm_dsF": n1,
        "norm_ds2F": n2,
        "C": (n1 + n2) / (nf + floor),
        "epsilon": c.weights.epsilon,
    }
