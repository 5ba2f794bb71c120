import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kgbohm.geometry import (
    FoliationField,
    FourVector,
    Hypersurface,
    Patch,
    boost_normal,
    lower,
    minkowski_dot,
    surface_measure,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)
vec4 = arrays(np.float64, 4, elements=finite)


def test_minkowski_examples():
    assert minkowski_dot((1, 0, 0, 0), (1, 0, 0, 0)) == 1
    assert minkowski_dot((1, 1, 0, 0), (1, 1, 0, 0)) == 0
    assert minkowski_dot((2, 1, 0, 0), (1, 3, 0, 0)) == -1


def test_fourvector_square_and_roundtrip():
    v = FourVector(2.0, 1.0, 0.5, -0.5)
    assert v.square() == 4 - 1 - 0.25 - 0.25
    assert FourVector.from_array(np.asarray(v)) == v
    with pytest.raises(ValueError):
        FourVector.from_array([1, 2, 3])


@given(vec4, vec4)
def test_minkowski_symmetric(a, b):
    assert minkowski_dot(a, b) == minkowski_dot(b, a)


@given(vec4, vec4, vec4, st.floats(-10, 10))
def test_minkowski_bilinear(a, b, c, lam):
    lhs = minkowski_dot(lam * a + b, c)
    rhs = lam * minkowski_dot(a, c) + minkowski_dot(b, c)
    assert np.isclose(lhs, rhs, rtol=1e-9, atol=1e-6)


def test_minkowski_broadcasts():
    a = np.random.default_rng(0).normal(size=(5, 3, 4))
    out = minkowski_dot(a, np.array([1.0, 0, 0, 0]))
    assert out.shape == (5, 3)
    assert np.array_equal(out, a[..., 0])


def test_lower_flips_spatial_part():
    assert np.array_equal(lower([1.0, 2.0, 3.0, 4.0]), [1.0, -2.0, -3.0, -4.0])


def test_surface_measure_constant_time():
    h = Hypersurface.constant_time(0.0, (1.0,))
    assert np.allclose(surface_measure(h, 0, 0.001), [0.001, 0, 0, 0])
    assert h.patches[0].metric_factor == 1.0


def test_surface_measure_boosted():
    h0 = Hypersurface.boosted_plane(0.0, np.zeros(4), [(0, 1)])
    assert np.allclose(surface_measure(h0, 0, 1.0), [1, 0, 0, 0])
    h = Hypersurface.boosted_plane(0.5, np.zeros(4), [(0, 1)])
    dS = surface_measure(h, 0, 1.0)
    assert np.allclose(dS, [np.cosh(0.5), np.sinh(0.5), 0, 0], atol=1e-15)
    assert abs(minkowski_dot(dS, dS) - 1) < 1e-12


def test_surface_measure_bad_index():
    h = Hypersurface.constant_time(0.0, (1.0,))
    with pytest.raises(IndexError):
        surface_measure(h, 1, 1.0)


@given(st.floats(0, 1e3), st.floats(0, 1e3))
def test_surface_measure_linear(a, b):
    h = Hypersurface.boosted_plane(0.3, np.zeros(4), [(0, 1)])
    assert np.allclose(surface_measure(h, 0, a + b), surface_measure(h, 0, a) + surface_measure(h, 0, b))


@given(st.floats(-3, 3), st.integers(1, 3))
def test_spacelike_patches_unit_future(zeta, axis):
    n = boost_normal(zeta, axis)
    p = Patch(n * 2.5, np.zeros(4), ((0, 1),))
    assert p.spacelike
    assert abs(minkowski_dot(p.normal, p.normal) - 1) < 1e-12
    assert p.normal[0] > 0


def test_past_normal_is_flipped():
    p = Patch(np.array([-1.0, 0, 0, 0]), np.zeros(4), ((0, 1),))
    assert p.normal[0] == 1.0


def test_timelike_patch_flagged_and_null_rejected():
    p = Patch(np.array([0.0, 1.0, 0, 0]), np.zeros(4), ((0, 1),))
    assert not p.spacelike
    assert not Hypersurface("piecewise-planar", (p,)).spacelike
    with pytest.raises(ValueError):
        Patch(np.array([1.0, 1.0, 0, 0]), np.zeros(4), ((0, 1),))


def test_patch_coordinates_roundtrip():
    p = Patch(boost_normal(0.4), np.array([1.0, 2.0, 0, 0]), ((0, 1), (0, 1)))
    u = np.array([[0.3, 0.7], [-1.0, 2.0]])
    x = p.embed(u)
    assert np.allclose(p.signed_distance(x), 0, atol=1e-14)
    assert np.allclose(p.coordinates(x), u)


def test_periodic_contains_and_fold():
    h = Hypersurface.constant_time(1.0, (2.0,))
    x = np.array([[1.0, 0.5, 0, 0], [1.0, 2.5, 0, 0], [1.0, -1.5, 0, 0]])
    assert h.contains(0, x).all()
    assert np.allclose(h.fold(0, x)[:, 0], [0.5, 0.5, 0.5])
    hb = Hypersurface.constant_time(1.0, (2.0,), periodic=False)
    assert list(hb.contains(0, x)) == [True, False, False]


def test_midpoint_grid():
    h = Hypersurface.constant_time(0.3, (2.0, 4.0))
    pts, cell = h.midpoint_grid(0, 4)
    assert pts.shape == (16, 4)
    assert cell == 0.5
    assert np.allclose(pts[:, 0], 0.3)
    assert np.isclose(pts[:, 1].min(), 0.25) and np.isclose(pts[:, 2].max(), 3.5)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        Hypersurface("sphere", (Patch(np.array([1.0, 0, 0, 0]), np.zeros(4), ((0, 1),)),))


def test_foliation_default_and_boosted():
    f = FoliationField()
    x = np.random.default_rng(1).normal(size=(10, 4))
    assert np.allclose(f.normal(x), [1, 0, 0, 0])
    assert np.allclose(f.divergence(x), 0)
    fb = FoliationField.boosted(0.7)
    n = fb.normal(x)
    assert np.allclose(minkowski_dot(n, n), 1)
    assert np.allclose(fb.leaf_time(x), minkowski_dot(boost_normal(0.7), x))


def test_foliation_rejects_bad_normals():
    with pytest.raises(ValueError):
        FoliationField(constant=np.array([2.0, 0, 0, 0]))
    with pytest.raises(ValueError):
        FoliationField(constant=np.array([-1.0, 0, 0, 0]))
    with pytest.raises(ValueError):
        FoliationField(normal_fn=lambda x: x)


def test_custom_foliation_divergence_free():
    # a rotation-free field of boosts depending on y: N = (cosh a(y), sinh a(y), 0, 0)
    def normal(x):
        a = 0.3 * np.sin(np.asarray(x)[..., 2])
        return np.stack([np.cosh(a), np.sinh(a), 0 * a, 0 * a], axis=-1)

    f = FoliationField(normal_fn=normal, time_function=lambda x: np.asarray(x)[..., 0])
    x = np.random.default_rng(2).normal(size=(50, 4))
    assert np.max(np.abs(f.divergence(x))) < 1e-8
    with pytest.raises(ValueError):
        FoliationField(normal_fn=lambda x: 2 * normal(x), time_function=lambda x: x[..., 0]).normal(x)
