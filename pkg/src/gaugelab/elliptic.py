"""Covariant Hodge Laplacians, harmonic spaces, and Poisson solves.

Cochains are flattened to real coordinate vectors scaled by the square roots
of the metric weights, so every operator built from covariant_d and its
adjoint becomes symmetric in the plain Euclidean dot product. Small problems
go through dense symmetric eigendecompositions; Poisson solves use conjugate
gradients with explicit deflation of the (numerically detected) kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from . import algebra, mesh
from .connection import Connection, covariant_d, covariant_d_adjoint
from .mesh import Cochain, GridSpec, MetricWeights

__all__ = [
    "pack",
    "unpack",
    "laplacian",
    "laplacian_matrix",
    "HarmonicSpace",
    "harmonic_basis",
    "harmonic_project",
    "solve_poisson",
    "hodge_decompose",
    "HodgeParts",
]

_COORD_DIM = {2: 3}  # algebra coordinate dimension per matrix size


def _ncoord(n: int) -> int:
    if n not in _COORD_DIM:
        raise ValueError("coordinate packing implemented for n=2 only")
    return _COORD_DIM[n]


def pack(x: Cochain, w: MetricWeights) -> np.ndarray:
    """Real vector of algebra coordinates scaled by sqrt(component weight)."""
    parts = []
    for axes in sorted(x.comps):
        c = algebra.to_coords(x.comps[axes])
        parts.append((np.sqrt(w.weight(axes)) * c).ravel())
    return np.concatenate(parts)


def unpack(vec: np.ndarray, degree: int, grid: GridSpec, w: MetricWeights,
           n: int = 2) -> Cochain:
    out = Cochain.zeros(degree, grid, n)
    nc = _ncoord(n)
    block = int(np.prod(grid.dims)) * nc
    pos = 0
    for axes in sorted(out.comps):
        c = vec[pos:pos + block].reshape(grid.dims + (nc,))
        out.comps[axes] = algebra.from_coords(c / np.sqrt(w.weight(axes)))
        pos += block
    return out


def laplacian(c: Connection, x: Cochain) -> Cochain:
    """Hodge Laplacian d* d x + d d* x at the connection's weights."""
    out = None
    if x.degree < x.grid.ndim:
        out = covariant_d_adjoint(c, covariant_d(c, x))
    if x.degree > 0:
        up = covariant_d(c, covariant_d_adjoint(c, x))
        out = up if out is None else out + up
    return out


def _packed_op(c: Connection, degree: int):
    grid, w, n = c.grid, c.weights, c.n
    dim = len(mesh.axis_subsets(grid.ndim, degree)) * int(np.prod(grid.dims)) * _ncoord(n)

    def mv(v):
        return pack(laplacian(c, unpack(v, degree, grid, w, n)), w)

    return dim, mv


def laplacian_matrix(c: Connection, degree: int) -> np.ndarray:
    """Dense symmetric matrix of the packed Laplacian (small grids)."""
    dim, mv = _packed_op(c, degree)
    m = np.empty((dim, dim))
    e = np.zeros(dim)
    for j in range(dim):
        e[j] = 1.0
        m[:, j] = mv(e)
        e[j] = 0.0
    return 0.5 * (m + m.T)


@dataclass
class HarmonicSpace:
    """Orthonormal packed kernel basis plus the spectral gap evidence."""

    degree: int
    basis: np.ndarray  # shape (dim, k), possibly k=0
    kernel_eigs: np.ndarray
    first_positive: float

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def harmonic_basis(c: Connection, degree: int, rel_tol: float = 1e-8,
                   gap_factor: float = 100.0) -> HarmonicSpace:
    """Kernel of the degree-k Hodge Laplacian by dense eigendecomposition.

    The kernel cut is eigenvalues below rel_tol * lambda_max; the split must
    be separated from the first kept eigenvalue by gap_factor, otherwise the
    numerical kernel is ill-defined and we raise.
    """
    m = laplacian_matrix(c, degree)
    lam, vec = np.linalg.eigh(m)
    lmax = max(float(lam[-1]), 1e-300)
    cut = rel_tol * lmax
    k = int(np.searchsorted(lam, cut))
    if k < len(lam):
        first_pos = float(lam[k])
        top_kernel = float(lam[k - 1]) if k > 0 else 0.0
        if top_kernel > 0 and first_pos < gap_factor * max(top_kernel, cut / gap_factor):
            raise ValueError(
                f"harmonic kernel gap too small at degree {degree}: "
                f"{top_kernel:g} .. {first_pos:g}")
    else:
        first_pos = np.inf
    return HarmonicSpace(degree, vec[:, :k].copy(), lam[:k].copy(), first_pos)


def harmonic_project(c: Connection, x: Cochain,
                     space: HarmonicSpace = None) -> Cochain:
    """Orthogonal projection of x onto the harmonic space."""
    if space is None:
        space = harmonic_basis(c, x.degree)
    v = pack(x, c.weights)
    proj = space.basis @ (space.basis.T @ v)
    return unpack(proj, x.degree, c.grid, c.weights, c.n)


def solve_poisson(c: Connection, rhs: Cochain, space: HarmonicSpace = None,
                  tol: float = 1e-12, maxiter: int = None) -> Cochain:
    """Least-squares solve of laplacian(c, x) = rhs by deflated CG.

    The kernel component of rhs is discarded (deflation), so the result is
    the unique solution orthogonal to the harmonic space.
    """
    grid, w, n = c.grid, c.weights, c.n
    dim, mv = _packed_op(c, rhs.degree)
    if space is None:
        space = harmonic_basis(c, rhs.degree)
    basis = space.basis

    def defl(v):
        return v - basis @ (basis.T @ v) if basis.shape[1] else v

    op = LinearOperator((dim, dim), matvec=lambda v: defl(mv(defl(v))) +
                        (basis @ (basis.T @ v) if basis.shape[1] else 0.0))
    b = defl(pack(rhs, w))
    sol, info = cg(op, b, rtol=tol, atol=0.0,
                   maxiter=maxiter if maxiter is not None else 20 * dim)
    if info != 0:
        raise RuntimeError(f"deflated CG did not converge (info={info})")
    return unpack(defl(sol), rhs.degree, grid, w, n)


@dataclass
class HodgeParts:
    """x = exact + coexact + harmonic."""

    exact: Cochain
    coexact: Cochain
    harmonic: Cochain

    def residual(self, x: Cochain) -> Cochain:
        return x - self.exact - self.coexact - self.harmonic


def hodge_decompose(c: Connection, x: Cochain, tol: float = 1e-12) -> HodgeParts:
    """Covariant Hodge decomposition of a k-cochain, 0 < k < ndim.

    exact = d xi with laplacian_{k-1} xi = d* x; coexact likewise from above;
    harmonic is the remainder (it lands in the kernel because the two solves
    capture the full image of d and d*).
    """
    if not (0 < x.degree < x.grid.ndim):
        raise ValueError("hodge_decompose needs an intermediate degree")
    dstar_x = covariant_d_adjoint(c, x)
    xi = solve_poisson(c, dstar_x, tol=tol)
    exact = covariant_d(c, xi)
    d_x = covariant_d(c, x)
    eta = solve_poisson(c, d_x, tol=tol)
    coexact = covariant_d_adjoint(c, eta)
    harmonic = x - exact - coexact
    return HodgeParts(exact, coexact, harmonic)
