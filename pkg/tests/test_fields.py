import numpy as np
import pytest

from canceling_lab.fields import (
    BOUNDARY_LAYER,
    SampledField,
    SupportError,
    boundary_window,
    field_from_spec,
    generate,
    smootherstep,
)


def test_cells_are_centred_by_default():
    u = SampledField(np.zeros((4, 2)), 0.5)
    assert np.allclose(u.axis_coords(0), [-0.75, -0.25, 0.25, 0.75])
    assert u.cells == 8 and u.cell_measure == 0.25


def test_smootherstep_endpoints_and_symmetry():
    t = np.linspace(0, 1, 11)
    s = smootherstep(t)
    assert s[0] == 0.0 and s[-1] == 1.0
    assert np.allclose(s + s[::-1], 1.0)
    assert np.all(np.diff(s) >= 0)


def test_window_vanishes_on_boundary_layer():
    win = boundary_window((20, 20))
    assert not np.any(win[:BOUNDARY_LAYER]) and not np.any(win[:, -BOUNDARY_LAYER:])
    assert win[10, 10] == 1.0


@pytest.mark.parametrize("name,params,kind", [
    ("gaussian_bump", {}, "scalar"),
    ("mollified_ball_indicator", {"radius": 1.5}, "scalar"),
    ("anisotropic_gaussian", {"anisotropy": 2.0, "angle": 0.3}, "scalar"),
    ("rigid_motion_windowed", {}, "vector"),
    ("gaussian_gradient", {}, "vector"),
    ("gaussian_bump", {"direction": [1.0, -1.0]}, "vector"),
])
def test_generators_are_compactly_supported(name, params, kind):
    u = generate(name, 2, (48, 40), 0.2, **params)
    assert u.kind == kind and u.support_flag()
    assert np.any(u.values)


def test_require_support_raises():
    u = SampledField(np.ones((10, 10)), 1.0)
    with pytest.raises(SupportError):
        u.require_support()


def test_json_roundtrip_is_bit_exact():
    u = generate("gaussian_bump", 2, (16, 12), 0.3, direction=[0.2, 1.0])
    back = field_from_spec(u.to_json())
    assert np.array_equal(back.values, u.values)
    assert back.lower == pytest.approx(u.lower) and back.kind == "vector"


def test_field_spec_errors():
    with pytest.raises(ValueError):
        field_from_spec({"n": 2, "shape": [4, 4], "h": 1.0})
    with pytest.raises(KeyError):
        field_from_spec({"n": 2, "shape": [4, 4], "h": 1.0, "generator": "nope"})
    with pytest.raises(ValueError):
        field_from_spec({"n": 2, "shape": [4, 4], "h": 1.0, "kind": "vector",
                         "generator": "gaussian_bump"})


def test_rescaled_samples_u_of_lambda_x():
    u = generate("gaussian_bump", 2, (32, 32), 0.25)
    v = u.rescaled(2.0)
    x = v.mesh()
    # v(x) = u(2x): same samples on a grid shrunk by 2
    assert np.allclose(x[0] * 2.0, u.mesh()[0])
    assert np.array_equal(v.values, u.values)


def test_shift_moves_values():
    u = generate("gaussian_bump", 2, (32, 32), 0.25)
    s = u.shifted((2, -1))
    assert s.values[18, 15] == u.values[16, 16]
