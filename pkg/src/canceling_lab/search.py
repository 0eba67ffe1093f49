"""Derivative-free search for fields with large inequality ratios."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import algebra, lab
from .fields import generate


class SearchRejected(RuntimeError):
    """Every evaluated field was degenerate."""


PROBLEMS = ("alvino", "korn", "certificate")


@dataclass
class SearchProblem:
    problem: str
    generator: str
    n: int
    shape: tuple
    h: float
    bounds: dict
    fixed: dict = field(default_factory=dict)
    operator: object = None
    certificate: object = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"problem must be one of {PROBLEMS}")
        if not 1 <= len(self.bounds) <= 8:
            raise ValueError("search space must have between 1 and 8 parameters")
        for name, (lo, hi) in self.bounds.items():
            if not lo < hi:
                raise ValueError(f"empty bounds for {name}")
        if self.problem == "certificate" and self.certificate is None:
            if self.operator is None:
                raise ValueError("certificate problem needs an operator")
            self.certificate = algebra.construct_certificate(self.operator)

    @property
    def names(self):
        return list(self.bounds)

    def field_for(self, x, refine=1):
        params = dict(self.fixed)
        params.update({k: float(v) for k, v in zip(self.names, x)})
        shape = tuple(s * refine for s in self.shape)
        return generate(self.generator, self.n, shape, self.h / refine, **params), params

    def evaluate(self, x, refine=1):
        u, params = self.field_for(x, refine)
        prov = {"generator": self.generator, "params": params}
        if self.problem == "alvino":
            return lab.verify_alvino(u, "alvino", prov)
        if self.problem == "korn":
            return lab.verify_korn_sobolev(u, "korn", prov)
        return lab.verify_certificate_inequality(self.operator, self.certificate, u,
                                                 "certificate", prov)


@dataclass
class SearchResult:
    best: lab.VerificationReport
    refined: lab.VerificationReport
    x: list
    evaluations: int
    rejected: int
    history: list

    def to_json(self):
        return {"best": self.best.to_json(), "refined": self.refined.to_json(),
                "x": self.x, "evaluations": self.evaluations, "rejected": self.rejected,
                "history": self.history}


def extremizer_search(problem, budget, seed=0):
    """Maximise the ratio over the parameter box with bounded Nelder-Mead.

    The starting simplex is drawn from the box with the given seed; the best
    point is re-evaluated on a grid refined by a factor 2.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in problem.bounds.values()], dtype=float)
    hi = np.array([b[1] for b in problem.bounds.values()], dtype=float)
    dim = lo.size
    simplex = lo + (hi - lo) * (0.25 + 0.5 * rng.random((dim + 1, dim)))
    history = []
    best = {"value": -math.inf, "x": None, "report": None}
    rejected = 0

    def objective(x):
        nonlocal rejected
        x = np.clip(x, lo, hi)
        report = problem.evaluate(x)
        ratio = report.ratio
        history.append({"x": x.tolist(), "ratio": ratio, "degenerate": report.degenerate})
        if ratio is None or not math.isfinite(ratio):
            rejected += 1
            return 1e300
        if ratio > best["value"]:
            best.update(value=ratio, x=x.copy(), report=report)
        return -ratio

    if budget <= dim + 1:
        for x in simplex[:budget]:
            objective(x)
    else:
        minimize(objective, simplex[0], method="Nelder-Mead",
                 bounds=list(zip(lo, hi)),
                 options={"maxfev": budget, "initial_simplex": simplex,
                          "xatol": 1e-4, "fatol": 1e-7})
    if best["report"] is None:
        raise SearchRejected(f"all {len(history)} evaluated fields were degenerate")
    refined = problem.evaluate(best["x"], refine=2)
    return SearchResult(best["report"], refined, best["x"].tolist(), len(history), rejected, history)


def problem_from_spec(spec):
    grid = spec["grid"]
    op = None
    if spec["problem"] == "certificate":
        from .cli import resolve_operator
        op = resolve_operator(spec["operator"])
    return SearchProblem(spec["problem"], spec["generator"], grid["n"], tuple(grid["shape"]),
                         float(grid["h"]), {k: tuple(v) for k, v in spec["bounds"].items()},
                         dict(spec.get("fixed", {})), op)
