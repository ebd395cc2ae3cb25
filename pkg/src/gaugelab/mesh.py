"""Discrete exterior calculus on periodic structured grids (dims 2-4).

Conventions
-----------
* A k-cochain stores one algebra value per axis-aligned k-cell. Cells are
  indexed by (base vertex, sorted axis tuple); component arrays have shape
  ``dims + (n, n)``.
* Values live in the *integrated* convention: a component approximates the
  integral of the corresponding k-form over the cell, so the coboundary is a
  pure integer-signed sum and d.d = 0 holds to round-off.
* Metric data enters only through `MetricWeights`: the L2 weight of a
  component I is len(I^c)/len(I), where each axis length is spacing, scaled
  by epsilon on Sigma-block axes (the adiabatic block metric that shrinks
  the fiber: g_S + eps^2 g_Sigma, equivalently eps^-2 g_S + g_Sigma up to
  conformal factor).
* The diagonal Hodge star is unstaggered: (star x)_J at a vertex is
  sign(perm(J, J^c)) * (len_J/len_{J^c}) * x_{J^c} at the same vertex. The
  sign convention is pinned by sum <mu ^ nu> = inner(mu, star nu) on 2D
  1-cochains.
"""

from __future__ import annotations

import io
import itertools
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import algebra

__all__ = [
    "GridSpec",
    "Cochain",
    "MetricWeights",
    "coboundary",
    "hodge_weights",
    "hodge_star",
    "inner_product",
    "norm",
    "wedge_bracket",
    "pairing_topological",
    "pairing_averaged",
    "axis_subsets",
    "perm_sign",
]

_BLOCKS = ("S", "Sigma", "I")


@dataclass(frozen=True)
class GridSpec:
    """Periodic structured grid: axis lengths, spacings, metric-block tags."""

    dims: tuple
    spacing: tuple
    axis_block: tuple

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        object.__setattr__(self, "axis_block", tuple(self.axis_block))
        if not (2 <= len(self.dims) <= 4):
            raise ValueError("grid dimension must be 2..4")
        if len(self.spacing) != len(self.dims) or len(self.axis_block) != len(self.dims):
            raise ValueError("dims/spacing/axis_block length mismatch")
        if any(d < 2 for d in self.dims):
            raise ValueError("all dims must be >= 2")
        if any(h <= 0 for h in self.spacing):
            raise ValueError("all spacings must be > 0")
        if any(b not in _BLOCKS for b in self.axis_block):
            raise ValueError(f"axis_block entries must be in {_BLOCKS}")
        if sum(1 for b in self.axis_block if b == "Sigma") > 2:
            raise ValueError("at most two Sigma-axes")

    @property
    def ndim(self) -> int:
        return len(self.dims)

    def axes_of(self, block: str) -> tuple:
        return tuple(i for i, b in enumerate(self.axis_block) if b == block)

    def n_cells(self, k: int) -> int:
        from math import comb, prod

        return comb(self.ndim, k) * prod(self.dims)


def axis_subsets(ndim: int, k: int):
    """Sorted k-subsets of range(ndim), lexicographic."""
    return list(itertools.combinations(range(ndim), k))


def perm_sign(seq) -> int:
    """Sign of the permutation given as a sequence of distinct ints."""
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@dataclass
class Cochain:
    """Degree-k lattice field of algebra values (see module docstring)."""

    degree: int
    grid: GridSpec
    comps: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, degree: int, grid: GridSpec, n: int = 2) -> "Cochain":
        if degree > grid.ndim:
            raise ValueError("degree exceeds grid dimension")
        comps = {
            axes: np.zeros(grid.dims + (n, n), dtype=np.complex128)
            for axes in axis_subsets(grid.ndim, degree)
        }
        return cls(degree, grid, comps)

    @classmethod
    def random(cls, degree: int, grid: GridSpec, rng: np.random.Generator,
               scale: float = 1.0, n: int = 2) -> "Cochain":
        c = cls.zeros(degree, grid, n)
        for axes in c.comps:
            c.comps[axes] = algebra.random_algebra(rng, grid.dims, n, scale)
        return c

    @property
    def n(self) -> int:
        return next(iter(self.comps.values())).shape[-1]

    def copy(self) -> "Cochain":
        return Cochain(self.degree, self.grid, {a: v.copy() for a, v in self.comps.items()})

    def __add__(self, other: "Cochain") -> "Cochain":
        self._compat(other)
        return Cochain(self.degree, self.grid,
                       {a: self.comps[a] + other.comps[a] for a in self.comps})

    def __sub__(self, other: "Cochain") -> "Cochain":
        self._compat(other)
        return Cochain(self.degree, self.grid,
                       {a: self.comps[a] - other.comps[a] for a in self.comps})

    def __mul__(self, s: float) -> "Cochain":
        return Cochain(self.degree, self.grid, {a: v * s for a, v in self.comps.items()})

    __rmul__ = __mul__

    def __neg__(self) -> "Cochain":
        return self * (-1.0)

    def _compat(self, other: "Cochain") -> None:
        if self.degree != other.degree or self.grid != other.grid:
            raise ValueError("cochain degree/grid mismatch")

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(v))) for v in self.comps.values())

    # -- serialization (header: degree, dims, n; row-major c128 little-endian) --

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        nd = self.grid.ndim
        buf.write(struct.pack("<4sII", b"GLC1", self.degree, nd))
        buf.write(struct.pack("<%dI" % nd, *self.grid.dims))
        buf.write(struct.pack("<%dd" % nd, *self.grid.spacing))
        buf.write(struct.pack("<%dB" % nd, *(_BLOCKS.index(b) for b in self.grid.axis_block)))
        buf.write(struct.pack("<I", self.n))
        for axes in axis_subsets(nd, self.degree):
            arr = np.ascontiguousarray(self.comps[axes], dtype="<c16")
            buf.write(arr.tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Cochain":
        buf = io.BytesIO(data)
        magic, degree, nd = struct.unpack("<4sII", buf.read(12))
        if magic != b"GLC1":
            raise ValueError("bad cochain magic")
        dims = struct.unpack("<%dI" % nd, buf.read(4 * nd))
        spacing = struct.unpack("<%dd" % nd, buf.read(8 * nd))
        blocks = tuple(_BLOCKS[i] for i in struct.unpack("<%dB" % nd, buf.read(nd)))
        (n,) = struct.unpack("<I", buf.read(4))
        grid = GridSpec(dims, spacing, blocks)
        comps = {}
        count = int(np.prod(dims)) * n * n
        for axes in axis_subsets(nd, degree):
            raw = np.frombuffer(buf.read(16 * count), dtype="<c16")
            comps[axes] = raw.reshape(dims + (n, n)).astype(np.complex128)
        return cls(degree, grid, comps)

    def to_debug_json(self) -> str:
        obj = {
            "degree": self.degree,
            "dims": list(self.grid.dims),
            "spacing": list(self.grid.spacing),
            "axis_block": list(self.grid.axis_block),
            "n": self.n,
            "components": {
                ",".join(map(str, axes)): {
                    "re": np.round(v.real, 15).tolist(),
                    "im": np.round(v.imag, 15).tolist(),
                }
                for axes, v in self.comps.items()
            },
        }
        return json.dumps(obj, sort_keys=True)


def shift(arr: np.ndarray, axis: int, steps: int = 1) -> np.ndarray:
    """Value at v + steps*e_axis (periodic): roll by -steps."""
    return np.roll(arr, -steps, axis=axis)


def coboundary(x: Cochain) -> Cochain:
    """Signed sum of boundary values per (k+1)-cell; d(d(x)) = 0."""
    if x.degree >= x.grid.ndim:
        raise ValueError("coboundary of top-degree cochain")
    out = Cochain.zeros(x.degree + 1, x.grid, x.n)
    for axes_out in out.comps:
        acc = out.comps[axes_out]
        for m, j in enumerate(axes_out):
            face = tuple(a for a in axes_out if a != j)
            sign = (-1) ** m
            diff = shift(x.comps[face], j) - x.comps[face]
            acc += sign * diff
    return out


@dataclass(frozen=True)
class MetricWeights:
    """Diagonal L2/star weights for the fiber-shrinking block metric."""

    grid: GridSpec
    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")

    @property
    def lengths(self) -> np.ndarray:
        return np.array(
            [h * (self.epsilon if b == "Sigma" else 1.0)
             for h, b in zip(self.grid.spacing, self.grid.axis_block)]
        )

    def cell_len(self, axes) -> float:
        ell = self.lengths
        out = 1.0
        for a in axes:
            out *= ell[a]
        return float(out)

    def weight(self, axes) -> float:
        """L2 weight of component `axes`: len(complement)/len(axes)."""
        comp = tuple(a for a in range(self.grid.ndim) if a not in axes)
        return self.cell_len(comp) / self.cell_len(axes)

    def total_volume(self) -> float:
        return self.cell_len(tuple(range(self.grid.ndim))) * float(np.prod(self.grid.dims))


def hodge_weights(grid: GridSpec, epsilon: float) -> MetricWeights:
    """Metric weights with epsilon applied to Sigma-block axes."""
    return MetricWeights(grid, epsilon)


def inner_product(x: Cochain, y: Cochain, w: MetricWeights,
                  spec: algebra.InnerProductSpec = algebra.InnerProductSpec()) -> float:
    """Weighted L2 pairing sum_I w_I sum_v <x_I(v), y_I(v)>."""
    x._compat(y)
    total = 0.0
    for axes, v in x.comps.items():
        total += w.weight(axes) * float(np.sum(algebra.inner(v, y.comps[axes], spec)))
    return total


def norm(x: Cochain, w: MetricWeights,
         spec: algebra.InnerProductSpec = algebra.InnerProductSpec()) -> float:
    return float(np.sqrt(max(inner_product(x, x, w, spec), 0.0)))


def hodge_star(x: Cochain, w: MetricWeights) -> Cochain:
    """Diagonal star; see module docstring for the orientation convention."""
    nd = x.grid.ndim
    out = Cochain.zeros(nd - x.degree, x.grid, x.n)
    for axes_out in out.comps:
        src = tuple(a for a in range(nd) if a not in axes_out)
        sgn = perm_sign(axes_out + src)
        ratio = w.cell_len(axes_out) / w.cell_len(src)
        out.comps[axes_out] = (sgn * ratio) * x.comps[src]
    return out


def _edge_mean(a: Cochain, i: int, other_axes) -> np.ndarray:
    """Mean of the parallel i-edge copies of a face/cell spanned with other_axes."""
    v = a.comps[(i,)]
    acc = v.copy()
    cnt = 1
    for combo_r in range(1, len(other_axes) + 1):
        for combo in itertools.combinations(other_axes, combo_r):
            u = v
            for ax in combo:
                u = shift(u, ax)
            acc = acc + u
            cnt += 1
    return acc / cnt


def wedge_bracket(a: Cochain, b: Cochain) -> Cochain:
    """[a ^ b] of two 1-cochains: per face (i,j),
    (1/2)([a_i~, b_j~] - [a_j~, b_i~]) with parallel-edge averages; symmetric."""
    if a.degree != 1 or b.degree != 1:
        raise ValueError("wedge_bracket expects 1-cochains")
    a._compat(b)
    out = Cochain.zeros(2, a.grid, a.n)
    for (i, j) in out.comps:
        ai = _edge_mean(a, i, (j,))
        aj = _edge_mean(a, j, (i,))
        bi = _edge_mean(b, i, (j,))
        bj = _edge_mean(b, j, (i,))
        out.comps[(i, j)] = 0.5 * (algebra.bracket(ai, bj) - algebra.bracket(aj, bi))
    return out


def pairing_topological(x: Cochain, y: Cochain,
                        spec: algebra.InnerProductSpec = algebra.InnerProductSpec()) -> float:
    """sum over vertices of <x ^ y> with same-base-vertex component products.

    Degrees must be complementary. Exactly gauge-invariant (all factors sit at
    the same base vertex) and exactly equal to the weighted pairing
    (x, star y)_w for any epsilon.
    """
    nd = x.grid.ndim
    if x.degree + y.degree != nd or x.grid != y.grid:
        raise ValueError("pairing needs complementary degrees on one grid")
    total = 0.0
    for axes, v in x.comps.items():
        comp = tuple(a for a in range(nd) if a not in axes)
        sgn = perm_sign(axes + comp)
        total += sgn * float(np.sum(algebra.inner(v, y.comps[comp], spec)))
    return total


def pairing_averaged(x: Cochain, y: Cochain,
                     spec: algebra.InnerProductSpec = algebra.InnerProductSpec()) -> float:
    """Like pairing_topological but with components averaged to the top-cell
    center over their transverse axes; O(h^2) against smooth fields."""
    nd = x.grid.ndim
    if x.degree + y.degree != nd or x.grid != y.grid:
        raise ValueError("pairing needs complementary degrees on one grid")
    total = 0.0
    for axes, v in x.comps.items():
        comp = tuple(a for a in range(nd) if a not in axes)
        sgn = perm_sign(axes + comp)
        xm = _avg_over(v, comp)
        ym = _avg_over(y.comps[comp], axes)
        total += sgn * float(np.sum(algebra.inner(xm, ym, spec)))
    return total


def _avg_over(arr: np.ndarray, axes) -> np.ndarray:
    out = arr
    for ax in axes:
        out = 0.5 * (out + shift(out, ax))
    return out
