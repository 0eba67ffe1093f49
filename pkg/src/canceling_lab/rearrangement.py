"""Distribution functions, rearrangements and Lorentz norms of grid fields.

Fields are treated as piecewise constant on cells of measure h^n, so every
quantity here is computed in closed form without quadrature error. Sums use
math.fsum, which is correctly rounded and therefore independent of the order
of the cells.
"""

import math
from dataclasses import dataclass

import numpy as np

from .fields import SampledField


def exact_sum(values):
    return math.fsum(np.ravel(values).tolist())


@dataclass(frozen=True, eq=False)
class DistributionProfile:
    """mu(t) = |{|u| > t}| for a piecewise-constant field.

    thresholds are the distinct positive values a_1 > ... > a_K of |u| and
    measures[k] = h^n * #{|u| >= a_k}; mu(t) = measures[k] on [a_{k+1}, a_k)
    with a_{K+1} = 0, and mu(t) = 0 for t >= a_1.
    """

    thresholds: np.ndarray
    measures: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        # number of thresholds strictly greater than t
        k = np.searchsorted(-self.thresholds, -t, side="left")
        padded = np.concatenate([[0.0], self.measures])
        return padded[k]


def rearrangement(field):
    """Steps of |u|^*: values sorted in nonincreasing order, one per cell of measure h^n."""
    mag = field.magnitude() if isinstance(field, SampledField) else np.abs(np.asarray(field))
    return np.sort(np.ravel(mag))[::-1]


def distribution(field):
    if field.cells == 0:
        raise ValueError("empty field")
    steps = rearrangement(field)
    positive = steps[steps > 0]
    if positive.size == 0:
        return DistributionProfile(np.zeros(0), np.zeros(0))
    # positive is sorted descending; last index of each distinct value
    change = np.flatnonzero(np.diff(positive) != 0)
    last = np.concatenate([change, [positive.size - 1]])
    return DistributionProfile(positive[last], (last + 1) * field.cell_measure)


def _power_increments(count, r):
    """k^r - (k-1)^r for k = 1..count, accurate to rounding."""
    k = np.arange(1, count + 1, dtype=float)
    out = np.ones(count)
    km1 = k[1:] - 1.0
    out[1:] = km1 ** r * np.expm1(r * np.log1p(1.0 / km1))
    return out


def lorentz_norm(field, p, q):
    """||u||_{L^{p,q}} = (int_0^inf (s^{1/p} u^*(s))^q ds/s)^{1/q}, or sup s^{1/p} u^*(s) for q = inf.

    Equal to (p int_0^inf (t mu(t)^{1/p})^q dt/t)^{1/q}; evaluated exactly on
    each step of the rearrangement.
    """
    if not p > 1:
        raise ValueError("only p > 1 is supported")
    if not (q == math.inf or q >= 1):
        raise ValueError("q must be >= 1 or infinity")
    if field.cells == 0:
        raise ValueError("empty field")
    steps = rearrangement(field)
    cell = field.cell_measure
    if q == math.inf:
        k = np.arange(1, steps.size + 1, dtype=float)
        return float(np.max(steps * (k * cell) ** (1.0 / p)))
    r = q / p
    weights = _power_increments(steps.size, r) * (p / q) * cell ** r
    total = exact_sum(steps ** q * weights)
    return total ** (1.0 / q)


def lp_norm(field, p):
    return exact_sum(field.magnitude() ** p * field.cell_measure) ** (1.0 / p)


def unit_ball_volume(n):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def _inverse_radius_average(field, sub=8):
    """Cell averages of 1/|x|; cells touching the origin are averaged over sub^n points."""
    x = field.mesh()
    r = np.sqrt(sum(c ** 2 for c in x))
    avg = np.zeros(field.shape)
    near = np.ones(field.shape, dtype=bool)
    for k in range(field.n):
        near &= np.abs(x[k]) <= field.h * 0.5 * (1 + 1e-12)
    far = ~near
    avg[far] = 1.0 / r[far]
    offsets = (np.arange(sub) + 0.5) / sub - 0.5
    grid = np.meshgrid(*([offsets] * field.n), indexing="ij")
    for idx in zip(*np.nonzero(near)):
        pts = [x[k][idx] + field.h * grid[k] for k in range(field.n)]
        rr = np.sqrt(sum(p ** 2 for p in pts))
        if np.any(rr == 0.0):
            raise ValueError("origin subsampling hit the singularity")
        avg[idx] = np.mean(1.0 / rr)
    return avg


@dataclass
class HardyReport:
    integral: float
    grad_l1: float
    lorentz: float
    weight_weak_norm: float
    holder_bound: float
    ratio_grad: float
    ratio_lorentz: float

    @property
    def holder_ok(self):
        return self.integral <= self.holder_bound * (1 + 1e-12)

    def to_json(self):
        out = dict(self.__dict__)
        out["holder_ok"] = self.holder_ok
        return out


def _ratio(num, den):
    if num == 0.0:
        return 0.0
    return num / den if den > 0 else math.inf


def lorentz_holder_hardy(field, grad_l1):
    """Weighted integral int |u|/|x| against ||Du||_1 and the Lorentz pairing.

    The pairing bound is ||u||_{n/(n-1),1} * || |x|^{-1} ||_{n,inf}, with the
    weak norm taken of the discretised weight itself so the discrete
    inequality is exact.
    """
    n = field.n
    if n < 2:
        raise ValueError("Hardy check needs n >= 2")
    field.require_support()
    weight = _inverse_radius_average(field)
    integral = exact_sum(field.magnitude() * weight) * field.cell_measure
    lor = lorentz_norm(field, n / (n - 1), 1)
    weak = lorentz_norm(field.with_values(weight, kind="scalar"), n, math.inf)
    return HardyReport(integral, grad_l1, lor, weak, lor * weak,
                       _ratio(integral, grad_l1), _ratio(integral, lor))
