"""Low-discrepancy sampling on unit spheres and derivative-free refinement."""

import math

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc


def sphere_points(dim, count, seed=0):
    """Return at least `count` deterministic unit vectors in R^dim.

    dim == 1 gives the two points {+1, -1}; dim == 2 uses equispaced angles
    (which include the coordinate axes when count is a multiple of 4);
    higher dimensions push a scrambled Sobol sequence through the inverse
    normal CDF and normalise.
    """
    if dim < 1:
        raise ValueError("sphere dimension must be >= 1")
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        theta = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(theta), np.sin(theta)])
    m = max(1, math.ceil(math.log2(max(count, 2))))
    sobol = qmc.Sobol(d=dim, scramble=True, seed=seed)
    u = sobol.random_base2(m)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    x = ndtri(u)
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def sphere_descent(f, x0, steps=60, step0=0.1):
    """Minimise `f` over the unit sphere by coordinate pattern search.

    Each sweep tries x +/- delta*e_k (renormalised) for every axis k and
    halves delta when no move improves. Returns (x, f(x)).
    """
    x = np.asarray(x0, dtype=float)
    x = x / np.linalg.norm(x)
    fx = f(x)
    if x.size == 1:
        return x, fx
    delta = step0
    for _ in range(steps):
        improved = False
        for k in range(x.size):
            for sign in (1.0, -1.0):
                y = x.copy()
                y[k] += sign * delta
                norm = np.linalg.norm(y)
                if norm == 0.0:
                    continue
                y /= norm
                fy = f(y)
                if fy < fx:
                    x, fx = y, fy
                    improved = True
        if not improved:
            delta *= 0.5
    return x, fx


def random_subspace_basis(rng, ambient_dim, dim):
    """Orthonormal basis (ambient_dim x dim) of a Haar-random subspace."""
    if dim == 0:
        return np.zeros((ambient_dim, 0))
    g = rng.standard_normal((ambient_dim, dim))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))
