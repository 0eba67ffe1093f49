"""Linear subspaces with orthonormal bases, and finite unions of them."""

from dataclasses import dataclass, field

import numpy as np

# Singular values below RANK_TOL * scale count as zero, everywhere.
RANK_TOL = 1e-9
ORTHONORMAL_TOL = 1e-12


def _canonical_signs(basis):
    # Flip each column so its largest-magnitude entry is positive.
    if basis.shape[1] == 0:
        return basis
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def orth(matrix, rank_tol=RANK_TOL, scale=None):
    """Orthonormal basis of the column space of `matrix`.

    Singular values at or below rank_tol * scale are dropped; scale defaults
    to the largest singular value.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    rows = matrix.shape[0]
    if matrix.size == 0:
        return np.zeros((rows, 0))
    u, s, _ = np.linalg.svd(matrix, full_matrices=False)
    ref = s[0] if scale is None else scale
    if ref <= 0.0:
        return np.zeros((rows, 0))
    rank = int(np.sum(s > rank_tol * ref))
    return _canonical_signs(u[:, :rank])


def null_space(matrix, rank_tol=RANK_TOL, scale=None):
    """Orthonormal basis of {x : matrix @ x = 0}."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    cols = matrix.shape[1]
    if matrix.shape[0] == 0:
        return np.eye(cols)
    _, s, vt = np.linalg.svd(matrix, full_matrices=True)
    ref = (s[0] if s.size else 0.0) if scale is None else scale
    rank = int(np.sum(s > rank_tol * ref)) if ref > 0.0 else 0
    return _canonical_signs(vt[rank:].T.copy())


@dataclass(frozen=True, eq=False)
class Subspace:
    """A linear subspace of R^ambient_dim given by an orthonormal basis."""

    basis: np.ndarray
    rank_tol: float = RANK_TOL

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim != 2:
            raise ValueError("basis must be a 2-d array of columns")
        if basis.shape[1] > basis.shape[0]:
            raise ValueError("more basis columns than ambient dimension")
        if basis.shape[1]:
            gram = basis.T @ basis
            err = np.linalg.norm(gram - np.eye(basis.shape[1]), 2)
            if err > ORTHONORMAL_TOL * 10:
                raise ValueError(f"basis not orthonormal (error {err:.3g})")
        object.__setattr__(self, "basis", basis)

    @classmethod
    def span(cls, vectors, rank_tol=RANK_TOL, scale=None):
        """Span of the columns of `vectors`."""
        return cls(orth(vectors, rank_tol, scale), rank_tol)

    @classmethod
    def full(cls, dim):
        return cls(np.eye(dim))

    @classmethod
    def zero(cls, dim):
        return cls(np.zeros((dim, 0)))

    @classmethod
    def annihilator(cls, covectors, dim, rank_tol=RANK_TOL):
        """{x : <c, x> = 0 for every row c of covectors}."""
        covectors = np.asarray(covectors, dtype=float).reshape(-1, dim)
        if covectors.shape[0] == 0:
            return cls.full(dim)
        return cls(null_space(covectors, rank_tol), rank_tol)

    @property
    def ambient_dim(self):
        return self.basis.shape[0]

    @property
    def dim(self):
        return self.basis.shape[1]

    @property
    def is_zero(self):
        return self.dim == 0

    def complement(self):
        if self.dim == 0:
            return Subspace.full(self.ambient_dim)
        return Subspace(null_space(self.basis.T, self.rank_tol, scale=1.0), self.rank_tol)

    def residual(self, x):
        """Component of x orthogonal to this subspace."""
        x = np.asarray(x, dtype=float)
        return x - self.basis @ (self.basis.T @ x)

    def contains_vector(self, x):
        x = np.asarray(x, dtype=float)
        norm = np.linalg.norm(x)
        return norm == 0.0 or np.linalg.norm(self.residual(x)) <= self.rank_tol * norm

    def contains(self, other):
        """True when `other` is a subspace of self (rank of concatenated bases)."""
        if other.dim == 0:
            return True
        if other.dim > self.dim:
            return False
        stacked = np.hstack([self.basis, other.basis])
        s = np.linalg.svd(stacked, compute_uv=False)
        return int(np.sum(s > self.rank_tol)) == self.dim

    def equals(self, other):
        return self.dim == other.dim and self.contains(other)

    def intersect(self, other):
        if self.ambient_dim != other.ambient_dim:
            raise ValueError("ambient dimensions differ")
        if self.dim == 0 or other.dim == 0:
            return Subspace.zero(self.ambient_dim)
        normals = np.hstack([self.complement().basis, other.complement().basis])
        if normals.shape[1] == 0:
            return Subspace.full(self.ambient_dim)
        return Subspace(null_space(normals.T, self.rank_tol, scale=1.0), self.rank_tol)

    def intersect_hyperplane(self, covector):
        """self intersected with the kernel of `covector`."""
        covector = np.asarray(covector, dtype=float)
        norm = np.linalg.norm(covector)
        if norm == 0.0:
            raise ValueError("covector must be nonzero")
        if self.dim == 0:
            return self
        row = (covector @ self.basis)[None, :]
        coeffs = null_space(row, self.rank_tol, scale=norm)
        if coeffs.shape[1] == self.dim:
            return self
        return Subspace(_canonical_signs(self.basis @ coeffs), self.rank_tol)

    def to_json(self):
        return {"ambient_dim": self.ambient_dim, "dim": self.dim, "basis": self.basis.T.tolist()}

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim})"


@dataclass(frozen=True, eq=False)
class SubspaceArrangement:
    """Finite union of subspaces, pruned so no component contains another.

    The zero arrangement is stored as the single zero subspace.
    """

    ambient_dim: int
    components: tuple = field(default_factory=tuple)

    def __post_init__(self):
        kept = []
        for comp in self.components:
            if comp.ambient_dim != self.ambient_dim:
                raise ValueError("component ambient dimension mismatch")
            if comp.dim == 0:
                continue
            if any(k.contains(comp) for k in kept):
                continue
            kept = [k for k in kept if not comp.contains(k)]
            kept.append(comp)
        if not kept:
            kept = [Subspace.zero(self.ambient_dim)]
        object.__setattr__(self, "components", tuple(kept))

    @classmethod
    def whole(cls, dim):
        return cls(dim, (Subspace.full(dim),))

    @property
    def is_zero(self):
        return self.components[0].dim == 0

    @property
    def max_dim(self):
        return max(c.dim for c in self.components)

    def dimension_profile(self):
        """Component counts per dimension, from ambient_dim down to 1."""
        return tuple(sum(1 for c in self.components if c.dim == d)
                     for d in range(self.ambient_dim, 0, -1))

    def size_key(self):
        """(max dim, number of components of max dim); strictly drops along a descending chain."""
        if self.is_zero:
            return (0, 0)
        top = self.max_dim
        return (top, sum(1 for c in self.components if c.dim == top))

    def contains_vector(self, x):
        return any(c.contains_vector(x) for c in self.components)

    def to_json(self):
        return {"ambient_dim": self.ambient_dim,
                "components": [c.to_json() for c in self.components]}

    def __repr__(self):
        dims = [c.dim for c in self.components]
        return f"SubspaceArrangement(ambient_dim={self.ambient_dim}, dims={dims})"


def arrangement_intersect_union(arrangement, covectors):
    """X intersected with the union of the hyperplanes ker(v_i)."""
    covectors = np.atleast_2d(np.asarray(covectors, dtype=float))
    if covectors.shape[1] != arrangement.ambient_dim:
        raise ValueError("covector length does not match ambient dimension")
    if np.any(np.linalg.norm(covectors, axis=1) == 0.0):
        raise ValueError("covectors must be nonzero")
    pieces = []
    for comp in arrangement.components:
        for v in covectors:
            pieces.append(comp.intersect_hyperplane(v))
    return SubspaceArrangement(arrangement.ambient_dim, tuple(pieces))


def pick_nonzero(arrangement):
    """First basis vector of the largest component (earliest on ties), or None."""
    if arrangement.is_zero:
        return None
    best = max(range(len(arrangement.components)),
               key=lambda k: (arrangement.components[k].dim, -k))
    return arrangement.components[best].basis[:, 0].copy()
