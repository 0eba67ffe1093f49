"""First-order constant-coefficient operators: ellipticity, cancellation and
certificate construction.

An operator A(D) = sum_k A_k d/dx_k acting on V-valued maps is stored as its
coefficient tensor ``coeffs[k, e, v]``; its symbol is A(xi) = sum_k xi_k A_k.
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .sphere import random_subspace_basis, sphere_descent, sphere_points
from .subspaces import (
    RANK_TOL,
    Subspace,
    SubspaceArrangement,
    arrangement_intersect_union,
    orth,
    pick_nonzero,
)


class PreconditionError(ValueError):
    """An operation was called on input violating its hypotheses."""


class ConstructionError(RuntimeError):
    """Certificate construction could not be completed.

    ``diagnostic`` is a JSON-serialisable dict describing where it stopped.
    """

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


@dataclass(frozen=True, eq=False)
class OperatorSymbol:
    coeffs: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim != 3 or min(coeffs.shape) < 1:
            raise ValueError("coeffs must have shape (n, dimE, dimV) with positive extents")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n(self):
        return self.coeffs.shape[0]

    @property
    def dim_e(self):
        return self.coeffs.shape[1]

    @property
    def dim_v(self):
        return self.coeffs.shape[2]

    def __call__(self, xi):
        return symbol_eval(self, xi)

    def adjoint_action(self, xi, e):
        """A(xi)^T e, a covector on V."""
        return symbol_eval(self, xi).T @ np.asarray(e, dtype=float)

    def to_json(self):
        return {"n": self.n, "dimV": self.dim_v, "dimE": self.dim_e,
                "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_json(cls, data):
        coeffs = np.asarray(data["coeffs"], dtype=float)
        expected = (data["n"], data["dimE"], data["dimV"])
        if coeffs.shape != tuple(expected):
            raise ValueError(f"coeffs shape {coeffs.shape} does not match (n, dimE, dimV) = {expected}")
        return cls(coeffs, data.get("name", "custom"))


def symbol_eval(op, xi):
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (op.n,):
        raise ValueError(f"xi must have length {op.n}, got shape {xi.shape}")
    return np.einsum("k,kev->ev", xi, op.coeffs)


# ---------------------------------------------------------------- presets

def gradient(n):
    """u : R^n -> R, A(D)u = Du."""
    coeffs = np.zeros((n, n, 1))
    for k in range(n):
        coeffs[k, k, 0] = 1.0
    return OperatorSymbol(coeffs, f"gradient{n}")


def sym_pairs(n):
    """Index pairs (i, j), i <= j, ordering the coordinates of sym(n x n)."""
    return [(k, k) for k in range(n)] + list(combinations(range(n), 2))


def deformation(n):
    """u : R^n -> R^n, A(D)u = (Du + Du^T)/2 in isometric coordinates.

    Off-diagonal entries carry a factor sqrt(2) so the Euclidean norm of the
    coordinate vector is the Frobenius norm of the symmetric matrix.
    """
    pairs = sym_pairs(n)
    coeffs = np.zeros((n, len(pairs), n))
    for e, (i, j) in enumerate(pairs):
        if i == j:
            coeffs[i, e, i] = 1.0
        else:
            c = 1.0 / np.sqrt(2.0)
            coeffs[i, e, j] += c
            coeffs[j, e, i] += c
    return OperatorSymbol(coeffs, f"deformation{n}")


def sym_coordinates_to_matrix(vec, n):
    out = np.zeros(vec.shape[:-1] + (n, n))
    for e, (i, j) in enumerate(sym_pairs(n)):
        if i == j:
            out[..., i, i] = vec[..., e]
        else:
            out[..., i, j] = out[..., j, i] = vec[..., e] / np.sqrt(2.0)
    return out


def cauchy_riemann():
    """A(xi) = [[xi1, -xi2], [xi2, xi1]]."""
    coeffs = np.array([[[1.0, 0.0], [0.0, 1.0]],
                       [[0.0, -1.0], [1.0, 0.0]]])
    return OperatorSymbol(coeffs, "cauchy_riemann")


def partial_first(n=2):
    """Scalar operator u -> du/dx_1."""
    coeffs = np.zeros((n, 1, 1))
    coeffs[0, 0, 0] = 1.0
    return OperatorSymbol(coeffs, "partial_1")


def zero_operator(n, dim_e=1, dim_v=1):
    return OperatorSymbol(np.zeros((n, dim_e, dim_v)), "zero")


PRESETS = {
    "gradient": gradient,
    "deformation": deformation,
    "cauchy_riemann": lambda n=2: cauchy_riemann(),
    "partial_1": partial_first,
    "zero": zero_operator,
}


def preset(name, n=2):
    if name not in PRESETS:
        raise KeyError(f"unknown operator preset {name!r}; choose from {sorted(PRESETS)}")
    if name == "cauchy_riemann" and n != 2:
        raise ValueError("the Cauchy-Riemann preset is planar (n = 2)")
    return PRESETS[name](n)


# ---------------------------------------------------------------- ellipticity

def _smallest_singular(op, xi):
    mat = symbol_eval(op, xi)
    if op.dim_e < op.dim_v:
        return 0.0
    return float(np.linalg.svd(mat, compute_uv=False)[op.dim_v - 1])


@dataclass
class EllipticityVerdict:
    elliptic: bool
    min_singular: float
    witness: np.ndarray
    operator_norm: float
    samples: int
    tol: float

    def to_json(self):
        return {"elliptic": self.elliptic, "min_singular": self.min_singular,
                "witness": self.witness.tolist(), "operator_norm": self.operator_norm,
                "samples": self.samples, "tol": self.tol, "method": "sampled"}


def is_elliptic(op, samples=None, tol=1e-8, seed=0, refine_steps=60):
    """Sampled ellipticity test.

    The verdict is elliptic when the smallest singular value of A(xi) over
    the sampled unit sphere, refined by pattern search from the worst sample,
    exceeds tol * ||A||. This is evidence, not a proof.
    """
    n = op.n
    if samples is None:
        samples = max(256, 2 * n)
    if samples < 2 * n:
        raise ValueError("samples must be at least 2n")
    if tol <= 0:
        raise ValueError("tol must be positive")
    points = sphere_points(n, samples, seed)
    sigma = np.array([_smallest_singular(op, xi) for xi in points])
    norm = max(float(np.linalg.norm(symbol_eval(op, xi), 2)) for xi in points)
    worst = points[int(np.argmin(sigma))]
    xi, smin = sphere_descent(lambda x: _smallest_singular(op, x), worst, steps=max(refine_steps, 50))
    smin = min(smin, float(sigma.min()))
    nz = np.flatnonzero(np.abs(xi) > 1e-12)
    if nz.size and xi[nz[0]] < 0:
        xi = -xi
    elliptic = norm > 0.0 and smin > tol * norm
    return EllipticityVerdict(elliptic, smin, xi, norm, len(points), tol)


# ---------------------------------------------------------------- cancellation

def span_image(op, subspace, rank_tol=RANK_TOL):
    """span{A(xi)v : xi in W, v in V} as a subspace of E."""
    if subspace.ambient_dim != op.n:
        raise ValueError("subspace must live in R^n")
    if subspace.dim == 0:
        return Subspace.zero(op.dim_e)
    blocks = [symbol_eval(op, b) for b in subspace.basis.T]
    return Subspace.span(np.hstack(blocks), rank_tol)


def intersect_spans(op, subspaces):
    """Intersection over the given W of span_image(op, W)."""
    current = Subspace.full(op.dim_e)
    for w in subspaces:
        current = current.intersect(span_image(op, w))
    return current


@dataclass
class CancelingVerdict:
    level: int
    canceling: bool
    residual: Subspace
    witnesses: list = field(default_factory=list)
    rounds: int = 0
    seed: int = 0
    method: str = "sampled"

    def to_json(self):
        return {"level": self.level, "canceling": self.canceling,
                "residual_dim": self.residual.dim, "residual": self.residual.to_json(),
                "witnesses": [w.basis.T.tolist() for w in self.witnesses],
                "rounds": self.rounds, "seed": self.seed, "method": self.method}


def is_l_canceling(op, level, max_rounds=128, seed=0):
    """Heuristic test of l-cancellation by intersecting spans over random W.

    l = 0 is canceling by convention and l = n holds iff every coefficient is
    zero. Otherwise random l-dimensional W are drawn until the running
    intersection reaches {0} (canceling) or dimE consecutive draws fail to
    shrink it (reported as a residual subspace).
    """
    n = op.n
    if not 0 <= level <= n:
        raise ValueError(f"level must lie in [0, {n}]")
    if level == 0:
        return CancelingVerdict(0, True, Subspace.zero(op.dim_e), method="convention", seed=seed)
    if level == n:
        zero = not np.any(op.coeffs)
        residual = span_image(op, Subspace.full(n))
        return CancelingVerdict(n, zero, residual, [Subspace.full(n)], 1, seed, "exact")
    rng = np.random.default_rng(seed)
    current = Subspace.full(op.dim_e)
    witnesses = []
    stall = 0
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        w = Subspace(random_subspace_basis(rng, n, level))
        candidate = current.intersect(span_image(op, w))
        if candidate.dim < current.dim:
            current = candidate
            witnesses.append(w)
            stall = 0
            if current.dim == 0:
                return CancelingVerdict(level, True, current, witnesses, rounds, seed)
        else:
            stall += 1
            if stall >= op.dim_e:
                break
    return CancelingVerdict(level, False, current, witnesses, rounds, seed)


# ---------------------------------------------------------------- certificates

class RoundVectors(NamedTuple):
    xi: np.ndarray  # (n, n) rows xi_i
    w: np.ndarray   # (n, n) rows w_i
    e: np.ndarray   # (n, dimE) rows e_i


def _hyperplane_normals(n, rng):
    # Coordinate hyperplanes first, then uniform random normals.
    yield from np.eye(n)
    while True:
        g = rng.standard_normal(n)
        yield g / np.linalg.norm(g)


def vectors_1dir(op, v_star, prior_w=(), *, rng=None, seed=0, budget=256,
                 check_ellipticity=True, accept_quality=0.05, tol=1e-9):
    """One round of the inductive construction for a fixed nonzero v_star.

    Returns RoundVectors(xi, w, e) with, for every i: w_1..w_n independent,
    <e_i, A(xi_i) v_star> = 1, <xi_i, w_i> = 1 and
    <e_i, A(xi) v> = <xi, w_i> <A(xi_i)^T e_i, v> for all xi, v.
    """
    n = op.n
    v_star = np.asarray(v_star, dtype=float)
    if v_star.shape != (op.dim_v,) or not np.any(v_star):
        raise PreconditionError("v_star must be a nonzero vector of V")
    if check_ellipticity and not is_elliptic(op).elliptic:
        raise PreconditionError("operator is not elliptic")
    if rng is None:
        rng = np.random.default_rng(seed)
    xis, ws, es = [], [np.asarray(w, dtype=float) for w in prior_w], []
    start = len(ws)
    for step in range(start, n):
        xi = Subspace.annihilator(np.array(ws).reshape(-1, n), n).basis[:, 0]
        target = symbol_eval(op, xi) @ v_star
        tnorm = np.linalg.norm(target)
        if tnorm <= tol * np.linalg.norm(op.coeffs):
            raise PreconditionError(f"A(xi) v_star vanishes at step {step + 1}; operator not elliptic")
        best = None
        normals = _hyperplane_normals(n, rng)
        for trial in range(budget):
            nu = next(normals)
            pairing = float(xi @ nu)
            if abs(pairing) < 1e-12:
                continue
            image = span_image(op, Subspace.annihilator(nu, n))
            r = image.residual(target)
            quality = min(np.linalg.norm(r) / tnorm, abs(pairing))
            if best is None or quality > best[0]:
                best = (quality, nu, pairing, r)
            if quality >= accept_quality:
                break
        if best is None or best[0] <= 1e-6:
            raise ConstructionError(
                "no hyperplane W with A(xi) v_star outside span A(W)V within budget",
                {"step": step + 1, "xi": xi.tolist(), "budget": budget,
                 "best_quality": None if best is None else best[0]})
        _, nu, pairing, r = best
        w = nu / pairing
        e = r / float(r @ target)
        xis.append(xi)
        ws.append(w)
        es.append(e)
    result = RoundVectors(np.array(xis), np.array(ws[start:]), np.array(es))
    _check_round(op, v_star, result, np.array(ws))
    return result


def _check_round(op, v_star, rv, all_w, tol=1e-9):
    n = op.n
    if abs(np.linalg.det(all_w)) <= RANK_TOL * np.prod(np.linalg.norm(all_w, axis=1)):
        raise ConstructionError("w vectors are not independent", {"w": all_w.tolist()})
    for i in range(len(rv.xi)):
        a_i = symbol_eval(op, rv.xi[i])
        v_i = a_i.T @ rv.e[i]
        lhs = np.einsum("e,kev->kv", rv.e[i], op.coeffs)
        rhs = np.outer(rv.w[i], v_i)
        scale = max(1.0, np.abs(lhs).max(), np.abs(rhs).max())
        checks = {
            "nontrivial": abs(rv.e[i] @ a_i @ v_star - 1.0),
            "biorthogonal": abs(rv.xi[i] @ rv.w[i] - 1.0),
            "representation": np.abs(lhs - rhs).max() / scale,
        }
        bad = {k: float(v) for k, v in checks.items() if v > tol}
        if bad:
            raise ConstructionError(f"postcondition failed at i={i + 1}", {"failed": bad, "n": n})


@dataclass
class CancelingCertificate:
    w: np.ndarray   # (m, n, n)
    v: np.ndarray   # (m, n, dimV)
    e: np.ndarray   # (m, n, dimE)
    xi: np.ndarray  # (m, n, n)
    chain: list = field(default_factory=list)
    seed: int = 0
    budget: int = 256

    @property
    def m(self):
        return self.w.shape[0]

    def to_json(self):
        return {"m": self.m, "w": self.w.tolist(), "v": self.v.tolist(),
                "e": self.e.tolist(), "xi": self.xi.tolist(), "chain": self.chain,
                "seed": self.seed, "budget": self.budget}

    @classmethod
    def from_json(cls, data):
        arr = {k: np.asarray(data[k], dtype=float) for k in ("w", "v", "e", "xi")}
        cert = cls(arr["w"], arr["v"], arr["e"], arr["xi"], data.get("chain", []),
                   data.get("seed", 0), data.get("budget", 256))
        if "m" in data and data["m"] != cert.m:
            raise ValueError("certificate m does not match array extents")
        return cert


def _chain_entry(arr):
    return {"size_key": list(arr.size_key()), "profile": list(arr.dimension_profile()),
            "dims": [c.dim for c in arr.components]}


def construct_certificate(op, seed=0, budget=256, max_rounds=64, cancel_rounds=128):
    """Build (w, v, e) families realising the certificate identities.

    Iterates X_0 = V, X_{l+1} = X_l intersected with the union of ker v_i^{l+1},
    picking v_star in X_l at each round, until X_l = {0}.
    """
    ell = is_elliptic(op, seed=seed)
    if not ell.elliptic:
        raise PreconditionError(
            f"operator is not elliptic (sigma_min {ell.min_singular:.3g} at xi={ell.witness.tolist()})")
    if op.n >= 2:
        canc = is_l_canceling(op, op.n - 1, max_rounds=cancel_rounds, seed=seed)
        if not canc.canceling:
            raise ConstructionError(
                f"operator is not ({op.n - 1})-canceling: residual of dimension {canc.residual.dim}",
                {"stage": "precondition", "level": op.n - 1, "residual_dim": canc.residual.dim,
                 "residual": canc.residual.to_json()})
    rng = np.random.default_rng(seed)
    arrangement = SubspaceArrangement.whole(op.dim_v)
    chain = [_chain_entry(arrangement)]
    ws, vs, es, xis = [], [], [], []
    for round_no in range(1, max_rounds + 1):
        v_star = pick_nonzero(arrangement)
        if v_star is None:
            break
        rv = vectors_1dir(op, v_star, rng=rng, budget=budget, check_ellipticity=False)
        v_fam = np.array([op.adjoint_action(rv.xi[i], rv.e[i]) for i in range(op.n)])
        pairings = v_fam @ v_star
        if np.max(np.abs(pairings - 1.0)) > 1e-8:
            raise ConstructionError("v_star not separated by new covectors",
                                    {"round": round_no, "pairings": pairings.tolist()})
        new = arrangement_intersect_union(arrangement, v_fam)
        if new.contains_vector(v_star) or not new.size_key() < arrangement.size_key():
            raise ConstructionError("arrangement chain failed to decrease strictly",
                                    {"round": round_no, "before": _chain_entry(arrangement),
                                     "after": _chain_entry(new)})
        arrangement = new
        chain.append(_chain_entry(arrangement))
        ws.append(rv.w)
        vs.append(v_fam)
        es.append(rv.e)
        xis.append(rv.xi)
    else:
        if not arrangement.is_zero:
            raise ConstructionError("round limit reached before X = {0}",
                                    {"max_rounds": max_rounds, "last": _chain_entry(arrangement)})
    return CancelingCertificate(np.array(ws), np.array(vs), np.array(es), np.array(xis),
                                chain, seed, budget)


@dataclass
class GammaBound:
    value: float
    minimiser: np.ndarray
    samples: int
    arrangement_zero: bool
    arrangement: SubspaceArrangement

    def __float__(self):
        return self.value

    def to_json(self):
        return {"value": self.value, "minimiser": self.minimiser.tolist(),
                "samples": self.samples, "arrangement_zero": self.arrangement_zero,
                "arrangement_dims": [c.dim for c in self.arrangement.components]}


def gamma_function(v_families, points):
    """max_j min_i |<v_i^j, p>| for each row p of points."""
    vals = np.abs(np.einsum("jid,pd->pji", v_families, points))
    return vals.min(axis=2).max(axis=1)


def gamma_lower_bound(v_families, samples=16384, seed=0, refine=8):
    """Estimate min over the unit sphere of max_j min_i |<v_i^j, v>|.

    Also runs the exact arrangement chain; ``arrangement_zero`` reports
    whether the intersection over j of the unions of ker v_i^j is {0}.
    """
    fam = np.asarray(v_families, dtype=float)
    if fam.ndim != 3:
        raise ValueError("v_families must have shape (l, n, dimV)")
    dim = fam.shape[2]
    points = sphere_points(dim, samples, seed)
    vals = gamma_function(fam, points)
    order = np.argsort(vals, kind="stable")[:refine]
    best_x, best = points[order[0]], float(vals[order[0]])
    f = lambda x: float(gamma_function(fam, x[None, :])[0])
    for idx in order:
        x, fx = sphere_descent(f, points[idx], steps=80, step0=0.05)
        if fx < best:
            best_x, best = x, fx
    arrangement = SubspaceArrangement.whole(dim)
    for block in fam:
        nonzero = block[np.linalg.norm(block, axis=1) > 0]
        if len(nonzero) == 0:
            continue
        arrangement = arrangement_intersect_union(arrangement, nonzero)
    return GammaBound(best, best_x, len(points), arrangement.is_zero, arrangement)


@dataclass
class CertificateReport:
    identity_residual: float
    identity_scale: float
    independence_margins: list
    gamma: GammaBound
    residual_tol: float = 1e-10
    margin_tol: float = 1e-8

    @property
    def identity_ok(self):
        return self.identity_residual <= self.residual_tol * max(1.0, self.identity_scale)

    @property
    def independence_ok(self):
        return all(m > self.margin_tol for m in self.independence_margins)

    @property
    def gamma_ok(self):
        return self.gamma.value > 0.0 and self.gamma.arrangement_zero

    @property
    def passed(self):
        return self.identity_ok and self.independence_ok and self.gamma_ok

    def to_json(self):
        return {"identity_residual": self.identity_residual, "identity_scale": self.identity_scale,
                "independence_margins": list(self.independence_margins),
                "gamma": self.gamma.to_json(), "identity_ok": self.identity_ok,
                "independence_ok": self.independence_ok, "gamma_ok": self.gamma_ok,
                "passed": self.passed, "residual_tol": self.residual_tol,
                "margin_tol": self.margin_tol}


def verify_certificate(op, cert, seed=0):
    """Check the three certificate properties on canonical basis pairs."""
    m, n = cert.w.shape[:2]
    if n != op.n or cert.v.shape[2] != op.dim_v or cert.e.shape[2] != op.dim_e:
        raise ValueError("certificate dimensions do not match the operator")
    # lhs[j, i, k, a] = <w_i^j, e_k> <v_i^j, e_a>;  rhs = <e_i^j, A_k e_a>
    lhs = np.einsum("jik,jia->jika", cert.w, cert.v)
    rhs = np.einsum("jie,kea->jika", cert.e, op.coeffs)
    residual = float(np.abs(lhs - rhs).max()) if lhs.size else 0.0
    scale = float(max(np.abs(lhs).max(), np.abs(rhs).max())) if lhs.size else 0.0
    margins = [float(abs(np.linalg.det(cert.w[j]))) for j in range(m)]
    gamma = gamma_lower_bound(cert.v, seed=seed)
    return CertificateReport(residual, scale, margins, gamma)


def maximally_linearly_independent(vectors, dim=None, rank_tol=RANK_TOL):
    """True iff every subset of `vectors` spans the space or is independent."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim == 1:
        vectors = vectors[:, None]
    count = vectors.shape[0]
    if count > 20:
        raise ValueError("refusing subset enumeration for more than 20 vectors")
    dim = vectors.shape[1] if dim is None else dim
    k = min(count, dim)
    for subset in combinations(range(count), k):
        if _rank(vectors[list(subset)], rank_tol) < k:
            return False
    return True


def first_dependent_subset(vectors, rank_tol=RANK_TOL):
    vectors = np.asarray(vectors, dtype=float)
    k = min(vectors.shape[0], vectors.shape[1])
    for subset in combinations(range(vectors.shape[0]), k):
        if _rank(vectors[list(subset)], rank_tol) < k:
            return subset
    return None


def _rank(rows, rank_tol):
    return orth(rows.T, rank_tol).shape[1]
