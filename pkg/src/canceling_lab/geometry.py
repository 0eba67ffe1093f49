"""Loomis-Whitney inequality along nonorthogonal directions, on voxel sets.

Shadows of voxel unions are rasterised: a projected voxel is the zonotope
spanned by the projected cell edges, and a raster cell of the hyperplane
counts as covered when its centre lies in some projected voxel.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .rearrangement import exact_sum
from .subspaces import null_space


class DegenerateBasisError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class VoxelSet:
    n: int
    h: float
    cells: np.ndarray  # (count, n) integer lattice coordinates

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, self.n)
        if self.h <= 0:
            raise ValueError("voxel spacing must be positive")
        object.__setattr__(self, "cells", np.unique(cells, axis=0))

    @property
    def count(self):
        return self.cells.shape[0]

    @property
    def measure(self):
        return self.count * self.h ** self.n

    def boundary_count(self):
        """Voxels with at least one face-neighbour outside the set."""
        if self.count == 0:
            return 0
        present = {tuple(c) for c in self.cells.tolist()}
        count = 0
        for c in self.cells.tolist():
            for k in range(self.n):
                for s in (-1, 1):
                    nb = list(c)
                    nb[k] += s
                    if tuple(nb) not in present:
                        count += 1
                        break
                else:
                    continue
                break
        return count

    def to_json(self):
        return {"n": self.n, "h": self.h, "cells": self.cells.tolist()}


def _lattice_candidates(n, h, lo, hi):
    ranges = [np.arange(math.floor(lo[k] / h) - 1, math.ceil(hi[k] / h) + 1) for k in range(n)]
    grids = np.meshgrid(*ranges, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def voxel_ball(n, h, radius, center=None):
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    cand = _lattice_candidates(n, h, c - radius, c + radius)
    centers = (cand + 0.5) * h
    keep = np.sum((centers - c) ** 2, axis=1) <= radius ** 2
    return VoxelSet(n, h, cand[keep])


def voxel_parallelepiped(h, vectors, origin=None):
    """Voxels whose centres lie in origin + sum_i t_i vectors[i], t in [0, 1]^n."""
    vectors = np.asarray(vectors, dtype=float)
    n = vectors.shape[0]
    o = np.zeros(n) if origin is None else np.asarray(origin, dtype=float)
    corners = np.array([o + np.array(bits) @ vectors
                        for bits in np.ndindex(*([2] * n))])
    cand = _lattice_candidates(n, h, corners.min(axis=0), corners.max(axis=0))
    centers = (cand + 0.5) * h
    t = np.linalg.solve(vectors.T, (centers - o).T).T
    eps = 1e-12
    keep = np.all((t >= -eps) & (t <= 1 + eps), axis=1)
    return VoxelSet(n, h, cand[keep])


def voxel_box(h, lower, upper):
    """Voxels with index in [lower, upper) per axis."""
    ranges = [np.arange(a, b) for a, b in zip(lower, upper)]
    grids = np.meshgrid(*ranges, indexing="ij")
    return VoxelSet(len(lower), h, np.stack([g.ravel() for g in grids], axis=1))


def voxels_from_spec(spec):
    n, h = spec["n"], float(spec["h"])
    if "cells" in spec:
        return VoxelSet(n, h, np.asarray(spec["cells"]))
    gen = spec.get("generator")
    if gen is None:
        raise ValueError("voxel spec needs 'cells' or 'generator'")
    params = gen.get("params", {})
    if gen["name"] == "ball":
        return voxel_ball(n, h, params["radius"], params.get("center"))
    if gen["name"] == "parallelepiped":
        vecs = np.asarray(params["vectors"], dtype=float)
        if vecs.shape != (n, n):
            raise ValueError("parallelepiped needs n spanning vectors of length n")
        return voxel_parallelepiped(h, vecs, params.get("origin"))
    if gen["name"] == "box":
        return voxel_box(h, params["lower"], params["upper"])
    raise KeyError(f"unknown voxel generator {gen['name']!r}")


@dataclass(frozen=True, eq=False)
class DirectionBasis:
    """n unit vectors w_i (rows of ``w``) spanning R^n."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("basis must be an n x n array of row vectors")
        norms = np.linalg.norm(w, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("basis vectors must have unit length")
        if abs(np.linalg.det(w)) <= 1e-10:
            raise DegenerateBasisError("basis vectors are (numerically) dependent")
        object.__setattr__(self, "w", w)

    @classmethod
    def from_vectors(cls, vectors):
        v = np.asarray(vectors, dtype=float)
        return cls(v / np.linalg.norm(v, axis=1, keepdims=True))

    @property
    def n(self):
        return self.w.shape[0]

    @property
    def abs_det(self):
        return abs(float(np.linalg.det(self.w)))


@dataclass
class Shadow:
    measure: float
    covered: int
    boundary: int
    raster_h: float
    dim: int

    @property
    def tolerance(self):
        # a raster cell cut by the shadow boundary is misjudged by about half its measure
        return 0.5 * self.boundary * self.raster_h ** self.dim


def _zonotope(generators):
    """Halfspace form (A, b), A x + b <= 0, of the zonotope sum_k [0, 1] g_k (d >= 2)."""
    corners = np.array([np.array(bits) @ generators
                        for bits in np.ndindex(*([2] * generators.shape[0]))])
    hull = ConvexHull(corners)
    return hull.equations[:, :-1], hull.equations[:, -1], corners


def shadow(voxels, w, raster_h, chunk=4096):
    """Rasterised (n-1)-measure of the orthogonal projection of `voxels` on w-perp."""
    w = np.asarray(w, dtype=float)
    norm = np.linalg.norm(w)
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    if raster_h > voxels.h / 2 * (1 + 1e-12):
        raise ValueError("raster_h must be at most h/2")
    n, h = voxels.n, voxels.h
    d = n - 1
    if voxels.count == 0:
        return Shadow(0.0, 0, 0, raster_h, d)
    frame = null_space((w / norm)[None, :], scale=1.0)  # (n, d)
    origins = (voxels.cells * h) @ frame
    gens = h * frame  # row k: projection of h e_k
    eps = 1e-9 * raster_h
    if d == 1:
        lo = origins[:, 0] + np.minimum(gens[:, 0], 0).sum()
        hi = origins[:, 0] + np.maximum(gens[:, 0], 0).sum()
        j_lo = np.ceil((lo - eps) / raster_h - 0.5).astype(np.int64)
        j_hi = np.floor((hi + eps) / raster_h - 0.5).astype(np.int64)
        ok = j_hi >= j_lo
        j_lo, j_hi = j_lo[ok], j_hi[ok]
        base = j_lo.min()
        diff = np.zeros(j_hi.max() - base + 2, dtype=np.int64)
        np.add.at(diff, j_lo - base, 1)
        np.add.at(diff, j_hi - base + 1, -1)
        covered = np.cumsum(diff)[:-1] > 0
    else:
        a_mat, b_vec, corners = _zonotope(gens)
        zmin, zmax = corners.min(axis=0), corners.max(axis=0)
        span = np.ceil((zmax - zmin) / raster_h).astype(int) + 2
        offsets = np.stack([g.ravel() for g in np.meshgrid(*[np.arange(s) for s in span],
                                                            indexing="ij")], axis=1)
        start = np.floor((origins + zmin) / raster_h).astype(np.int64)
        gmin = start.min(axis=0)
        gmax = start.max(axis=0) + span
        covered = np.zeros(tuple(gmax - gmin + 1), dtype=bool)
        for s in range(0, origins.shape[0], chunk):
            idx = start[s:s + chunk, None, :] + offsets[None, :, :]
            centres = (idx + 0.5) * raster_h - origins[s:s + chunk, None, :]
            inside = np.all(centres @ a_mat.T + b_vec <= eps, axis=2)
            hit = idx[inside] - gmin
            covered[tuple(hit.T)] = True
    count = int(covered.sum())
    boundary = _raster_boundary(covered)
    return Shadow(count * raster_h ** d, count, boundary, raster_h, d)


def _raster_boundary(covered):
    padded = np.pad(covered, 1)
    interior = padded.copy()
    for axis in range(covered.ndim):
        interior &= np.roll(padded, 1, axis=axis) & np.roll(padded, -1, axis=axis)
    return int((padded & ~interior).sum())


def shadow_measure(voxels, w, raster_h):
    return shadow(voxels, w, raster_h).measure


@dataclass
class LoomisWhitneyReport:
    lhs: float
    rhs: float
    ratio: float
    raster_tolerance: float
    voxel_tolerance: float
    shadows: list
    abs_det: float

    @property
    def holds(self):
        return self.ratio <= 1.0 + self.raster_tolerance

    def to_json(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio,
                "raster_tolerance": self.raster_tolerance,
                "voxel_tolerance": self.voxel_tolerance,
                "shadows": [s.measure for s in self.shadows], "abs_det": self.abs_det,
                "holds": self.holds}


def loomis_whitney_check(voxels, basis, raster_h):
    """Compare |K|^{n-1} with prod_i H^{n-1}(Pi_i K) / |det(w)|."""
    if basis.n != voxels.n:
        raise ValueError("basis and voxel set dimensions differ")
    n = voxels.n
    shadows = [shadow(voxels, wi, raster_h) for wi in basis.w]
    lhs = voxels.measure ** (n - 1)
    rhs = float(np.prod([s.measure for s in shadows])) / basis.abs_det
    ratio = lhs / rhs if rhs > 0 else (math.nan if lhs == 0 else math.inf)
    lows = [s.measure - s.tolerance for s in shadows]
    if min(lows) > 0:
        raster_tol = float(np.prod([s.measure / lo for s, lo in zip(shadows, lows)])) - 1.0
    else:
        raster_tol = math.inf
    interior = max(1, voxels.count - voxels.boundary_count())
    # discretisation deficit of the voxel set itself, C = 1
    voxel_tol = voxels.boundary_count() / interior
    return LoomisWhitneyReport(lhs, rhs, ratio, raster_tol, voxel_tol, shadows, basis.abs_det)


def gram_jacobian(basis, i, tol=1e-10):
    """sqrt(det Gram({Pi_i w_j : j != i})), checked against |det(w)|."""
    w = basis.w
    wi = w[i]
    others = np.delete(w, i, axis=0)
    proj = others - np.outer(others @ wi, wi)
    jac = math.sqrt(max(np.linalg.det(proj @ proj.T), 0.0))
    det = basis.abs_det
    if abs(jac - det) > tol * max(1.0, det):
        raise DegenerateBasisError(f"Jacobian {jac!r} differs from |det| {det!r}")
    return jac


@dataclass
class GagliardoReport:
    integral: float
    bound: float
    signed_input: bool

    @property
    def holds(self):
        return self.integral <= self.bound * (1 + 1e-10)

    def to_json(self):
        return {"integral": self.integral, "bound": self.bound,
                "signed_input": self.signed_input, "holds": self.holds}


def _full_shape(shapes, n):
    full = [None] * n
    for i, shp in enumerate(shapes):
        axes = [k for k in range(n) if k != i]
        if len(shp) != n - 1:
            raise ValueError(f"f_{i + 1} must be {n - 1}-dimensional")
        for k, size in zip(axes, shp):
            if full[k] is None:
                full[k] = size
            elif full[k] != size:
                raise ValueError(f"grid mismatch on axis {k + 1}")
    return tuple(full)


def gagliardo_product_bound(fs, h=None):
    """int prod_i f_i(P_i z) dz against prod_i ||f_i||_{L^{n-1}}.

    ``fs`` holds n arrays (or SampledFields) on (n-1)-dimensional grids of a
    common pitch, f_i living on the coordinates other than i. Signed inputs
    are replaced by their absolute values.
    """
    n = len(fs)
    if n < 2:
        raise ValueError("need n >= 2 functions")
    pitches = {getattr(f, "h", h) for f in fs}
    if None in pitches:
        raise ValueError("grid pitch h is required for plain arrays")
    if len(pitches) != 1:
        raise ValueError("all f_i must share the grid pitch")
    pitch = pitches.pop()
    arrays = [np.asarray(getattr(f, "values", f), dtype=float) for f in fs]
    _full_shape([a.shape for a in arrays], n)
    signed = any(np.any(a < 0) for a in arrays)
    arrays = [np.abs(a) for a in arrays]
    prod = np.ones([1] * n)
    for i, a in enumerate(arrays):
        prod = prod * np.expand_dims(a, axis=i)
    integral = exact_sum(prod) * pitch ** n
    bound = 1.0
    for a in arrays:
        bound *= (exact_sum(a ** (n - 1)) * pitch ** (n - 1)) ** (1.0 / (n - 1))
    return GagliardoReport(integral, bound, signed)
