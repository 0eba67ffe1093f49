"""Grid-sampled scalar and vector fields and the named field generators.

A field is piecewise constant on the cells of a uniform grid of spacing h;
cell ``idx`` covers ``lower + h*[idx, idx+1)`` along every axis. Generated
fields are centred on the origin and multiplied by a smooth window that
vanishes on a boundary layer of BOUNDARY_LAYER cells.
"""

import base64
from dataclasses import dataclass

import numpy as np

BOUNDARY_LAYER = 3
RAMP_CELLS = 4


class SupportError(ValueError):
    """Field does not vanish on the boundary layer of its grid."""


@dataclass(frozen=True, eq=False)
class SampledField:
    values: np.ndarray
    h: float
    kind: str = "scalar"
    lower: tuple = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if self.kind not in ("scalar", "vector"):
            raise ValueError("kind must be 'scalar' or 'vector'")
        if self.h <= 0:
            raise ValueError("grid spacing must be positive")
        if self.kind == "vector" and values.ndim < 2:
            raise ValueError("vector fields need a trailing component axis")
        object.__setattr__(self, "values", values)
        if self.lower is None:
            object.__setattr__(self, "lower", tuple(-0.5 * s * self.h for s in self.shape))
        elif len(self.lower) != self.n:
            raise ValueError("lower corner has wrong length")

    @property
    def shape(self):
        return self.values.shape[:-1] if self.kind == "vector" else self.values.shape

    @property
    def n(self):
        return len(self.shape)

    @property
    def dim_v(self):
        return self.values.shape[-1] if self.kind == "vector" else 1

    @property
    def cells(self):
        return int(np.prod(self.shape))

    @property
    def cell_measure(self):
        return self.h ** self.n

    def components(self):
        """Values with a trailing component axis, also for scalars."""
        return self.values if self.kind == "vector" else self.values[..., None]

    def magnitude(self):
        """Pointwise |u|: absolute value, or Euclidean norm on V."""
        if self.kind == "vector":
            return np.sqrt(np.sum(self.values ** 2, axis=-1))
        return np.abs(self.values)

    def axis_coords(self, axis):
        return self.lower[axis] + self.h * (np.arange(self.shape[axis]) + 0.5)

    def mesh(self):
        return np.meshgrid(*[self.axis_coords(k) for k in range(self.n)], indexing="ij")

    def support_flag(self, layer=BOUNDARY_LAYER):
        mag = self.magnitude()
        if any(s <= 2 * layer for s in self.shape):
            return not np.any(mag)
        inner = tuple(slice(layer, s - layer) for s in self.shape)
        outer = mag.copy()
        outer[inner] = 0.0
        return not np.any(outer)

    def require_support(self, layer=BOUNDARY_LAYER):
        if not self.support_flag(layer):
            raise SupportError(f"field is nonzero within {layer} cells of the grid boundary")

    def with_values(self, values, kind=None):
        return SampledField(values, self.h, kind or self.kind, self.lower)

    def rescaled(self, lam):
        """u_lam(x) = u(lam x), sampled on the grid scaled by 1/lam."""
        return SampledField(self.values, self.h / lam, self.kind,
                            tuple(c / lam for c in self.lower))

    def shifted(self, offset):
        """Translate the samples by whole cells (values wrap; needs compact support)."""
        axes = tuple(range(self.n))
        return self.with_values(np.roll(self.values, tuple(offset), axis=axes))

    def to_json(self):
        raw = base64.b64encode(self.values.astype("<f8").tobytes()).decode("ascii")
        return {"n": self.n, "shape": list(self.shape), "h": self.h, "kind": self.kind,
                "dimV": self.dim_v, "lower": list(self.lower), "raw": raw}


def smootherstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def boundary_window(shape):
    """Product window: zero on the boundary layer, ramping to 1 over RAMP_CELLS."""
    win = np.ones(shape)
    for axis, size in enumerate(shape):
        idx = np.arange(size)
        dist = np.minimum(idx, size - 1 - idx)
        ramp = smootherstep((dist - (BOUNDARY_LAYER - 1)) / RAMP_CELLS)
        bshape = [1] * len(shape)
        bshape[axis] = size
        win = win * ramp.reshape(bshape)
    return win


def _grid(n, shape, h):
    shape = tuple(int(s) for s in shape)
    if len(shape) != n:
        raise ValueError("shape length must equal n")
    proto = SampledField(np.zeros(shape), h)
    return proto, proto.mesh()


def _finish(proto, scalar, direction, window=True):
    if window:
        scalar = scalar * boundary_window(proto.shape)
    if direction is None:
        return proto.with_values(scalar)
    direction = np.asarray(direction, dtype=float)
    return proto.with_values(scalar[..., None] * direction, kind="vector")


def gaussian_bump(n, shape, h, sigma=1.0, amplitude=1.0, center=None, direction=None):
    """amplitude * exp(-|x - c|^2 / (2 sigma^2)); vector-valued along `direction`."""
    proto, x = _grid(n, shape, h)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    r2 = sum((x[k] - c[k]) ** 2 for k in range(n))
    return _finish(proto, amplitude * np.exp(-r2 / (2.0 * sigma ** 2)), direction)


def mollified_ball_indicator(n, shape, h, radius=1.0, width=0.25, amplitude=1.0,
                             center=None, direction=None):
    """Radial profile equal to 1 on |x| <= radius - width, 0 beyond radius."""
    proto, x = _grid(n, shape, h)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    r = np.sqrt(sum((x[k] - c[k]) ** 2 for k in range(n)))
    profile = 1.0 - smootherstep((r - (radius - width)) / width)
    return _finish(proto, amplitude * profile, direction)


def anisotropic_gaussian(n, shape, h, sigma=1.0, anisotropy=1.0, angle=0.0,
                         amplitude=1.0, direction=None):
    """Gaussian with axis lengths sigma*a and sigma/a in the (x1, x2) plane, rotated by angle."""
    proto, x = _grid(n, shape, h)
    ca, sa = np.cos(angle), np.sin(angle)
    y1 = ca * x[0] + sa * x[1]
    y2 = -sa * x[0] + ca * x[1]
    q = (y1 / (sigma * anisotropy)) ** 2 + (y2 * anisotropy / sigma) ** 2
    q = q + sum((x[k] / sigma) ** 2 for k in range(2, n))
    return _finish(proto, amplitude * np.exp(-0.5 * q), direction)


def rigid_motion_windowed(n, shape, h, omega=1.0, translation=None, radius=1.0, width=0.25):
    """(a + omega * R x) times a mollified ball indicator, R the rotation generator in (x1, x2)."""
    if n < 2:
        raise ValueError("rigid motions need n >= 2")
    proto, x = _grid(n, shape, h)
    a = np.zeros(n) if translation is None else np.asarray(translation, dtype=float)
    r = np.sqrt(sum(x[k] ** 2 for k in range(n)))
    chi = (1.0 - smootherstep((r - (radius - width)) / width)) * boundary_window(proto.shape)
    u = np.zeros(proto.shape + (n,))
    for k in range(n):
        u[..., k] = a[k]
    u[..., 0] += -omega * x[1]
    u[..., 1] += omega * x[0]
    return proto.with_values(u * chi[..., None], kind="vector")


def gaussian_gradient(n, shape, h, sigma=1.0, amplitude=1.0):
    """u = D phi for phi a Gaussian (analytic gradient), windowed."""
    proto, x = _grid(n, shape, h)
    r2 = sum(x[k] ** 2 for k in range(n))
    phi = amplitude * np.exp(-r2 / (2.0 * sigma ** 2))
    u = np.stack([-x[k] / sigma ** 2 * phi for k in range(n)], axis=-1)
    return proto.with_values(u * boundary_window(proto.shape)[..., None], kind="vector")


def zero_field(n, shape, h, dim_v=None):
    proto, _ = _grid(n, shape, h)
    if dim_v is None:
        return proto
    return proto.with_values(np.zeros(proto.shape + (dim_v,)), kind="vector")


GENERATORS = {
    "gaussian_bump": gaussian_bump,
    "mollified_ball_indicator": mollified_ball_indicator,
    "anisotropic_gaussian": anisotropic_gaussian,
    "rigid_motion_windowed": rigid_motion_windowed,
    "gaussian_gradient": gaussian_gradient,
    "zero": zero_field,
}


def generate(name, n, shape, h, **params):
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise KeyError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}") from None
    return gen(n, shape, h, **params)


def field_from_spec(spec):
    """Build a SampledField from its JSON description (generator or raw samples)."""
    n, shape, h = spec["n"], tuple(spec["shape"]), float(spec["h"])
    kind = spec.get("kind", "scalar")
    if "raw" in spec:
        data = np.frombuffer(base64.b64decode(spec["raw"]), dtype="<f8").astype(float)
        full = shape + ((spec["dimV"],) if kind == "vector" else ())
        if data.size != int(np.prod(full)):
            raise ValueError(f"raw data has {data.size} values, expected {int(np.prod(full))}")
        lower = tuple(spec["lower"]) if "lower" in spec else None
        return SampledField(data.reshape(full), h, kind, lower)
    gen = spec.get("generator")
    if gen is None:
        raise ValueError("field spec needs 'generator' or 'raw'")
    if isinstance(gen, str):
        gen = {"name": gen}
    params = dict(gen.get("params", {}))
    if gen["name"] == "zero" and kind == "vector":
        params.setdefault("dim_v", spec.get("dimV", n))
    f = generate(gen["name"], n, shape, h, **params)
    if f.kind != kind:
        raise ValueError(f"generator {gen['name']!r} produced a {f.kind} field, spec says {kind}")
    return f
