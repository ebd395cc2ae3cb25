"""Matrix Lie group/algebra kernel for su(n)/SU(n), default n=2.

Elements are plain complex numpy arrays; all operations are vectorized over
leading axes, so a field of matrices (shape ``dims + (n, n)``) goes through
the same code path as a single matrix. The inner product is
``<x, y> = -kappa * tr(x y)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "InnerProductSpec",
    "PAULI",
    "su2_basis",
    "bracket",
    "inner",
    "exp_map",
    "log_map",
    "adjoint",
    "adjoint_rotation",
    "to_coords",
    "from_coords",
    "check_algebra",
    "check_group",
    "random_algebra",
    "random_group",
    "CutLocusError",
]

PAULI = np.array(
    [
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ],
    dtype=np.complex128,
)


class CutLocusError(ValueError):
    """log_map input too close to -I (n=2) / to a branch point."""


@dataclass(frozen=True)
class InnerProductSpec:
    """Normalization kappa of <x,y> = -kappa tr(xy)."""

    kappa: float = 1.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")


def su2_basis() -> np.ndarray:
    """Orthogonal su(2) basis e_k = -(i/2) sigma_k, shape (3, 2, 2).

    Satisfies [e_1, e_2] = e_3 (cyclically) and <e_j, e_k> = (kappa/2) delta_jk.
    """
    return -0.5j * PAULI


def bracket(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Matrix commutator xy - yx."""
    return x @ y - y @ x


def inner(x: np.ndarray, y: np.ndarray, spec: InnerProductSpec = InnerProductSpec()) -> np.ndarray:
    """Pointwise <x,y> = -kappa tr(xy); real-valued for su(n) arguments.

    Returns an array over the leading axes (scalar for single matrices).
    """
    tr = np.einsum("...ij,...ji->...", x, y)
    return -spec.kappa * tr.real


def _is_su2(x: np.ndarray) -> bool:
    return x.shape[-1] == 2 and x.shape[-2] == 2


def exp_map(x: np.ndarray) -> np.ndarray:
    """Matrix exponential of anti-Hermitian traceless x (vectorized).

    For n=2 uses the closed form exp(x) = cos(r) I + sinc(r) x with
    r^2 = det(x); otherwise an eigendecomposition of the Hermitian -i x.
    """
    if _is_su2(x):
        # for x in su(2): x^2 = -det(x) I with det(x) >= 0
        r2 = (x[..., 0, 0] * x[..., 1, 1] - x[..., 0, 1] * x[..., 1, 0]).real
        r = np.sqrt(np.maximum(r2, 0.0))
        c = np.cos(r)
        s = np.where(r > 1e-30, np.sin(np.maximum(r, 1e-30)) / np.maximum(r, 1e-30), 1.0)
        eye = np.eye(2, dtype=np.complex128)
        return c[..., None, None] * eye + s[..., None, None] * x
    lam, v = np.linalg.eigh(-1j * x)
    phase = np.exp(1j * lam)
    return np.einsum("...ik,...k,...jk->...ij", v, phase, v.conj())


def log_map(u: np.ndarray, cut_tol: float = 1e-6) -> np.ndarray:
    """Principal logarithm of special-unitary u (eigenangles in (-pi, pi]).

    Raises CutLocusError when u is within cut_tol of the cut locus
    (-I for n=2; coincident -1 eigenvalue pair in general).
    """
    if _is_su2(u):
        t = np.clip(0.5 * np.trace(u, axis1=-2, axis2=-1).real, -1.0, 1.0)
        # distance to -I in Frobenius norm: ||u + I||
        d = np.linalg.norm(u + np.eye(2), axis=(-2, -1))
        if np.any(d <= cut_tol):
            raise CutLocusError("log_map: input within %g of -I" % cut_tol)
        theta = np.arccos(t)
        s = np.sin(theta)
        f = np.where(s > 1e-30, theta / np.maximum(s, 1e-30), 1.0)
        return f[..., None, None] * 0.5 * (u - np.swapaxes(u, -1, -2).conj())
    lam, v = np.linalg.eig(u)
    ang = np.angle(lam)
    if np.any(np.abs(np.abs(ang) - np.pi) < cut_tol):
        raise CutLocusError("log_map: eigenvalue within %g of the branch cut" % cut_tol)
    # re-orthonormalize eigenvectors (u is normal)
    q, _ = np.linalg.qr(v)
    log_u = np.einsum("...ik,...k,...jk->...ij", q, 1j * ang, q.conj())
    # project to traceless anti-Hermitian to clean round-off
    log_u = 0.5 * (log_u - np.swapaxes(log_u, -1, -2).conj())
    n = u.shape[-1]
    tr = np.trace(log_u, axis1=-2, axis2=-1) / n
    return log_u - tr[..., None, None] * np.eye(n)


def adjoint(g: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Pointwise adjoint action g x g^{-1} (g unitary)."""
    return g @ x @ np.swapaxes(g, -1, -2).conj()


def adjoint_rotation(g: np.ndarray) -> np.ndarray:
    """Real 3x3 rotation R with Ad(g) e_j = sum_k R[k, j] e_k (n=2 only).

    Vectorized: input (..., 2, 2) -> output (..., 3, 3).
    """
    e = su2_basis()
    ge = np.einsum("...ab,kbc,...dc->k...ad", g, e, g.conj())  # Ad(g) e_k, index k first
    # R[j, k] = 2 * <Ad(g)e_k, e_j> = -2 tr(Ad(g)e_k e_j)
    r = -2.0 * np.einsum("k...ab,jba->...jk", ge, e).real
    return r


def to_coords(x: np.ndarray) -> np.ndarray:
    """su(2) coordinates x = sum_k c_k e_k, output shape (..., 3)."""
    e = su2_basis()
    return -2.0 * np.einsum("...ab,kba->...k", x, e).real


def from_coords(c: np.ndarray) -> np.ndarray:
    """Inverse of to_coords; input (..., 3) -> (..., 2, 2)."""
    e = su2_basis()
    return np.einsum("...k,kab->...ab", np.asarray(c, dtype=np.float64), e)


def check_algebra(x: np.ndarray, tol: float = 1e-10) -> None:
    """Validate anti-Hermitian traceless within tol (relative)."""
    scale = max(float(np.max(np.abs(x))), 1.0)
    herm = float(np.max(np.abs(x + np.swapaxes(x, -1, -2).conj())))
    tr = float(np.max(np.abs(np.trace(x, axis1=-2, axis2=-1))))
    if herm > tol * scale or tr > tol * scale:
        raise ValueError(f"not an algebra element: herm defect {herm:g}, trace {tr:g}")


def check_group(u: np.ndarray, tol: float = 1e-10) -> None:
    """Validate unitary with det 1 within tol."""
    n = u.shape[-1]
    uni = float(np.max(np.abs(np.swapaxes(u, -1, -2).conj() @ u - np.eye(n))))
    det = float(np.max(np.abs(np.linalg.det(u) - 1.0)))
    if uni > tol or det > tol:
        raise ValueError(f"not a group element: unitarity defect {uni:g}, det defect {det:g}")


def random_algebra(rng: np.random.Generator, shape=(), n: int = 2, scale: float = 1.0) -> np.ndarray:
    """Random anti-Hermitian traceless matrices, Gaussian coordinates."""
    if n == 2:
        return from_coords(rng.normal(scale=scale, size=tuple(shape) + (3,)))
    a = rng.normal(size=tuple(shape) + (n, n)) + 1j * rng.normal(size=tuple(shape) + (n, n))
    a = 0.5 * (a - np.swapaxes(a, -1, -2).conj())
    tr = np.trace(a, axis1=-2, axis2=-1) / n
    return scale * (a - tr[..., None, None] * np.eye(n))


def random_group(rng: np.random.Generator, shape=(), n: int = 2, scale: float = 1.0) -> np.ndarray:
    """exp of random_algebra."""
    return exp_map(random_algebra(rng, shape, n, scale))
