"""Discrete verification of Lorentz-scale Sobolev inequalities on grid fields.

Derivatives are central differences (one-sided on the outermost cells, where
compactly supported fields vanish anyway). Every quantity that appears on
both sides of an algebraic identity is computed from the same stencil, so
identities such as <v, Du[w]> = <e, A(D)u> survive discretisation.
"""

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import algebra
from .algebra import maximally_linearly_independent, first_dependent_subset, gamma_lower_bound
from .fields import SampledField
from .rearrangement import exact_sum, lorentz_norm


class CertificateMismatchError(ValueError):
    """Pointwise certificate identity fails on the grid."""


@dataclass
class VerificationReport:
    case_id: str
    lhs: float
    rhs: float
    h: float
    shape: tuple
    provenance: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def degenerate(self):
        return self.rhs == 0.0 and self.lhs == 0.0

    @property
    def anomaly(self):
        return self.rhs == 0.0 and self.lhs > 0.0

    @property
    def ratio(self):
        if self.rhs == 0.0:
            return None
        return self.lhs / self.rhs

    @property
    def constant_estimate(self):
        return self.ratio

    def to_json(self):
        return {"case": self.case_id, "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio,
                "constant_estimate": self.constant_estimate, "degenerate": self.degenerate,
                "anomaly": self.anomaly, "h": self.h, "shape": list(self.shape),
                "cells": int(np.prod(self.shape)), "provenance": self.provenance,
                "extras": self.extras}

    def csv_row(self, seed=None):
        ratio = "degenerate" if self.degenerate else self.ratio
        return [self.case_id, self.lhs, self.rhs, ratio, self.h, int(np.prod(self.shape)), seed]


def derivative_tensor(u):
    """Du[..., a, k] = d u_a / d x_k."""
    u.require_support()
    comps = u.components()
    n = u.n
    out = np.empty(u.shape + (comps.shape[-1], n))
    for a in range(comps.shape[-1]):
        for k in range(n):
            if u.shape[k] < 2:
                out[..., a, k] = 0.0
            else:
                out[..., a, k] = np.gradient(comps[..., a], u.h, axis=k)
    return out


def pointwise_norm(arr, axes=1):
    """Euclidean norm over the trailing `axes` axes."""
    sq = arr ** 2
    for _ in range(axes):
        sq = np.sum(sq, axis=-1)
    return np.sqrt(sq)


def l1(u, values):
    return exact_sum(np.abs(values)) * u.cell_measure


def apply_operator(op, u, du=None):
    """A(D)u = sum_k A_k du/dx_k as an E-valued field."""
    if u.dim_v != op.dim_v or u.n != op.n:
        raise ValueError("field and operator dimensions differ")
    du = derivative_tensor(u) if du is None else du
    out = np.einsum("kea,...ak->...e", op.coeffs, du)
    return u.with_values(out, kind="vector")


def directional_values(du, w, v):
    """<v, Du[w]> on every cell."""
    return np.einsum("...ak,a,k->...", du, np.asarray(v, dtype=float), np.asarray(w, dtype=float))


def directional_derivative_l1(u, w, v, du=None):
    du = derivative_tensor(u) if du is None else du
    return l1(u, directional_values(du, w, v))


@dataclass(frozen=True, eq=False)
class DirectionalFamily:
    """Blocks j of n directions w_i^j in R^n and covectors v_i^j on V."""

    w: np.ndarray  # (ell, n, n)
    v: np.ndarray  # (ell, n, dimV)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if w.ndim != 3 or v.ndim != 3 or w.shape[:2] != v.shape[:2] or w.shape[1] != w.shape[2]:
            raise ValueError("family arrays must have shapes (ell, n, n) and (ell, n, dimV)")
        for j, block in enumerate(w):
            if abs(np.linalg.det(block)) <= 1e-12 * np.prod(np.linalg.norm(block, axis=1)):
                raise ValueError(f"directions of block {j + 1} are not independent")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "v", v)

    @property
    def ell(self):
        return self.w.shape[0]

    @property
    def n(self):
        return self.w.shape[1]

    def gamma(self, seed=0):
        return gamma_lower_bound(self.v, seed=seed)

    def to_json(self):
        return {"ell": self.ell, "w": self.w.tolist(), "v": self.v.tolist()}


def alvino_family(n, dim_v=1):
    """ell = dim V blocks; block j pairs the canonical directions with coordinate j."""
    w = np.broadcast_to(np.eye(n), (dim_v, n, n)).copy()
    v = np.zeros((dim_v, n, dim_v))
    for j in range(dim_v):
        v[j, :, j] = 1.0
    return DirectionalFamily(w, v)


def de_figueiredo_expand(ws, vs):
    """Family indexed by all n-subsets of n + m - 1 maximally independent pairs."""
    ws = np.asarray(ws, dtype=float)
    vs = np.asarray(vs, dtype=float)
    if vs.ndim == 1:
        vs = vs[:, None]
    n, m = ws.shape[1], vs.shape[1]
    count = n + m - 1
    if ws.shape[0] != count or vs.shape[0] != count:
        raise algebra.PreconditionError(f"need exactly n + m - 1 = {count} vectors of each kind")
    for name, vecs in (("w", ws), ("v", vs)):
        if not maximally_linearly_independent(vecs):
            bad = first_dependent_subset(vecs)
            raise algebra.PreconditionError(
                f"{name} vectors are not maximally linearly independent: subset "
                f"{[i + 1 for i in bad]} is dependent")
    subsets = list(combinations(range(count), n))
    fam = DirectionalFamily(np.array([ws[list(s)] for s in subsets]),
                            np.array([vs[list(s)] for s in subsets]))
    return fam


def _lorentz_lhs(u):
    return lorentz_norm(u, u.n / (u.n - 1), 1)


def _family_rhs(u, du, fam):
    n = u.n
    total = []
    for j in range(fam.ell):
        prod = 1.0
        for i in range(n):
            prod *= directional_derivative_l1(u, fam.w[j, i], fam.v[j, i], du) ** (1.0 / n)
        total.append(prod)
    return math.fsum(total)


def _provenance(u, extra=None):
    out = {"h": u.h, "shape": list(u.shape)}
    out.update(extra or {})
    return out


def verify_directional_theorem(u, fam, case_id="directional", provenance=None, with_gamma=True):
    """||u||_{n/(n-1),1} against sum_j prod_i ||<v_i^j, Du[w_i^j]>||_1^{1/n}."""
    if fam.n != u.n or fam.v.shape[2] != u.dim_v:
        raise ValueError("family does not match the field")
    du = derivative_tensor(u)
    extras = {"ell": fam.ell}
    if with_gamma:
        extras["gamma"] = fam.gamma().value
    return VerificationReport(case_id, _lorentz_lhs(u), _family_rhs(u, du, fam), u.h, u.shape,
                              _provenance(u, provenance), extras)


def verify_alvino(u, case_id="alvino", provenance=None):
    """||u||_{n/(n-1),1} against ||Du||_1 for scalar u."""
    if u.kind != "scalar":
        raise ValueError("Alvino check takes a scalar field")
    du = derivative_tensor(u)
    rhs = l1(u, pointwise_norm(du[..., 0, :]))
    return VerificationReport(case_id, _lorentz_lhs(u), rhs, u.h, u.shape, _provenance(u, provenance))


def symmetric_gradient(du):
    return 0.5 * (du + np.swapaxes(du, -1, -2))


def verify_korn_sobolev(u, case_id="korn", provenance=None):
    """||u||_{n/(n-1),1} against ||Eu||_1 with the Frobenius norm of Eu."""
    if u.kind != "vector" or u.dim_v != u.n:
        raise ValueError("Korn-Sobolev check takes an R^n-valued field")
    du = derivative_tensor(u)
    rhs = l1(u, pointwise_norm(symmetric_gradient(du), axes=2))
    return VerificationReport(case_id, _lorentz_lhs(u), rhs, u.h, u.shape, _provenance(u, provenance))


def verify_certificate_inequality(op, cert, u, case_id="certificate", provenance=None, tol=1e-8):
    """||u||_{n/(n-1),1} against ||A(D)u||_1, after checking the grid identity.

    The identity <v_i^j, Du[w_i^j]> = <e_i^j, A(D)u> is checked cell by cell;
    the certificate-weighted right-hand side of the directional estimate is
    reported as an extra.
    """
    du = derivative_tensor(u)
    au = apply_operator(op, u, du).values
    scale = max(np.abs(au).max(), np.abs(du).max(), 1e-300)
    worst = 0.0
    weighted = []
    for j in range(cert.m):
        prod = 1.0
        for i in range(op.n):
            left = directional_values(du, cert.w[j, i], cert.v[j, i])
            right = au @ cert.e[j, i]
            mag = scale * max(1.0, np.linalg.norm(cert.e[j, i]),
                              np.linalg.norm(cert.w[j, i]) * np.linalg.norm(cert.v[j, i]))
            worst = max(worst, float(np.abs(left - right).max()) / mag)
            prod *= l1(u, right) ** (1.0 / op.n)
        weighted.append(prod)
    if worst > tol:
        raise CertificateMismatchError(f"certificate identity residual {worst:.3g} exceeds {tol}")
    lhs = _lorentz_lhs(u)
    rhs = l1(u, pointwise_norm(au))
    cert_rhs = math.fsum(weighted)
    extras = {"identity_residual": worst, "certificate_rhs": cert_rhs,
              "certificate_ratio": lhs / cert_rhs if cert_rhs > 0 else None, "m": cert.m}
    return VerificationReport(case_id, lhs, rhs, u.h, u.shape, _provenance(u, provenance), extras)


# ---------------------------------------------------------------- planar mechanics

def _count_above(sorted_vals, t):
    return sorted_vals.size - np.searchsorted(sorted_vals, t, side="right")


def _diag_max(g, anti=False):
    n1, n2 = g.shape
    i, j = np.indices(g.shape)
    key = (i + j) if anti else (i - j + n2 - 1)
    out = np.zeros(n1 + n2 - 1)
    np.maximum.at(out, key.ravel(), np.abs(g).ravel())
    return out


@dataclass
class PlanarItem:
    name: str
    lhs: float
    rhs: float
    slack: float

    @property
    def holds(self):
        return self.lhs <= self.rhs + self.slack

    def to_json(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack,
                "holds": self.holds}


@dataclass
class PlanarReport:
    items: list

    @property
    def holds(self):
        return all(it.holds for it in self.items)

    def item(self, name):
        return next(it for it in self.items if it.name == name)

    def to_json(self):
        return {"holds": self.holds, "items": [it.to_json() for it in self.items]}


def planar_checks(u, area_thresholds=64, fd_slack=0.05):
    """Set-splitting, diagonal and fibre estimates for a planar vector field.

    (a) sqrt|{|u1|>t}| <= sqrt|{|u1|>t,|u1+u2|>t}| + sqrt|{|u1|>t,|u1-u2|>t}|,
        worst excess over all thresholds t in the value set of |u1|;
    (b) int sup_{x1-x2=s} |u1+u2| ds <= int |(d1+d2)(u1+u2)|, and (b') the
        mirror estimate along x1+x2 = s;
    (c) int sup_{x2} |u1| dx1 <= int |d2 u1|, and (c') with the roles swapped;
    (d) |{|u1|>t,|u1+u2|>t}| <= sqrt2 * (diagonal extent) * (x1 extent).
    """
    if u.n != 2 or u.kind != "vector" or u.dim_v != 2:
        raise ValueError("planar checks take an R^2-valued field on a 2-d grid")
    du = derivative_tensor(u)
    h, cell = u.h, u.cell_measure
    u1, u2 = u.values[..., 0], u.values[..., 1]
    a1 = np.abs(u1)
    plus, minus = np.abs(u1 + u2), np.abs(u1 - u2)
    s1 = np.sort(a1.ravel())
    sp = np.sort(np.minimum(a1, plus).ravel())
    sm = np.sort(np.minimum(a1, minus).ravel())
    thresholds = np.unique(s1[s1 > 0])
    items = []
    if thresholds.size:
        excess = (np.sqrt(_count_above(s1, thresholds) * cell)
                  - np.sqrt(_count_above(sp, thresholds) * cell)
                  - np.sqrt(_count_above(sm, thresholds) * cell))
        worst = float(excess.max())
    else:
        worst = 0.0
    items.append(PlanarItem("a_two_pieces", worst, 0.0, h))

    d1u1, d2u1 = du[..., 0, 0], du[..., 0, 1]
    d1u2, d2u2 = du[..., 1, 0], du[..., 1, 1]
    for name, g, deriv, anti in (
            ("b_diagonal", u1 + u2, d1u1 + d2u2 + d2u1 + d1u2, False),
            ("b_antidiagonal", u1 - u2, d1u1 + d2u2 - (d2u1 + d1u2), True)):
        lhs = math.fsum(_diag_max(g, anti).tolist()) * h
        rhs = exact_sum(np.abs(deriv)) * cell
        items.append(PlanarItem(name, lhs, rhs, fd_slack * rhs))
    items.append(PlanarItem("c_fibre_x2", exact_sum(a1.max(axis=1)) * h,
                            exact_sum(np.abs(d2u1)) * cell, 0.0))
    items.append(PlanarItem("c_fibre_x1", exact_sum(a1.max(axis=0)) * h,
                            exact_sum(np.abs(d1u1)) * cell, 0.0))

    worst_area = -math.inf
    if thresholds.size:
        picks = thresholds[np.unique(np.linspace(0, thresholds.size - 1, area_thresholds).astype(int))]
        i, j = np.indices(a1.shape)
        for t in picks:
            mask = (a1 > t) & (plus > t)
            if not mask.any():
                continue
            area = mask.sum() * cell
            diag = np.unique((i - j)[mask]).size * h
            cols = np.unique(i[mask]).size * h
            worst_area = max(worst_area, area - math.sqrt(2.0) * diag * cols)
    items.append(PlanarItem("d_area", worst_area if worst_area > -math.inf else 0.0, 0.0, 0.0))
    return PlanarReport(items)
