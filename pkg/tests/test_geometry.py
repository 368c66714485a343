import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact import geometry
from artifact.geometry import discretize, make_curve

CLOSED_BUILTINS = ["unit-circle", "rocket", "cavity"]


def test_unit_circle_at_zero():
    c = make_curve("unit-circle")
    np.testing.assert_allclose(c.position(np.array([0.0]))[0], [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(c.derivative(np.array([0.0]))[0], [0.0, 1.0], atol=1e-15)


def test_arc_spans_complement_of_aperture():
    c = make_curve("circular-arc", radius=1.0, aperture=1.25)
    ends = c.position(np.array([-1.0, 1.0]))
    ang = np.arctan2(ends[:, 1], ends[:, 0])
    # the opening sits between the two endpoints, centred on -y
    gap = (ang[0] - ang[1]) % (2 * np.pi)
    assert gap == pytest.approx(1.25, abs=1e-14)
    assert c.arclength() == pytest.approx(2 * np.pi - 1.25, abs=1e-12)
    np.testing.assert_allclose(np.hypot(*c.position(np.linspace(-1, 1, 50)).T), 1.0, atol=1e-15)


def test_rocket_radius_at_zero():
    c = make_curve("rocket")
    r0 = 0.35 + 0.1 + 0.12 + 0.15 + 0.1 + 0.1 + 0.05
    assert r0 == pytest.approx(0.97)
    np.testing.assert_allclose(c.position(np.array([0.0]))[0], [0.97, 0.0], atol=1e-14)


def test_open_rocket_excludes_gap():
    c = make_curve("rocket", open=True)
    closed = make_curve("rocket")
    ends = c.position(np.array([-1.0, 1.0]))
    ref = closed.position(np.array([5.427, 5.338 + 2 * np.pi - 2 * np.pi]))
    np.testing.assert_allclose(ends[0], ref[0], atol=1e-12)
    np.testing.assert_allclose(ends[1], ref[1], atol=1e-12)


@pytest.mark.parametrize("ap", [0.0, -1.0, 2 * np.pi, 7.0])
def test_bad_aperture(ap):
    with pytest.raises(ValueError):
        make_curve("circular-arc", aperture=ap)


def test_unknown_builtin():
    with pytest.raises(ValueError, match="unknown builtin"):
        make_curve("teapot")


def test_circle_n4_nodes():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = discretize(make_curve("unit-circle"), 4)
    np.testing.assert_allclose(d.nodes, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)


def test_small_n_warns():
    with pytest.warns(UserWarning):
        discretize(make_curve("unit-circle"), 8)


def test_odd_closed_n_rejected():
    with pytest.raises(ValueError):
        discretize(make_curve("unit-circle"), 65)


def test_circumference(circle64):
    assert np.sum(circle64.jacobians * 2 * np.pi / 64) == pytest.approx(2 * np.pi, abs=1e-13)


def test_arc_nodes_interior():
    d = discretize(make_curve("circular-arc", aperture=1.25), 32)
    assert d.N == 32
    assert np.all(np.abs(d.params) < 1)
    theta = np.pi * (2 * np.arange(32) + 1) / 64
    np.testing.assert_allclose(d.params, np.cos(theta), atol=1e-15)


# the rocket's fingers pinch C(s) close to zero, so its speed needs many more nodes
@pytest.mark.parametrize("kind,N", [("unit-circle", 64), ("rocket", 1024), ("cavity", 512)])
def test_trapezoid_arclength_spectral(kind, N):
    c = make_curve(kind)
    d = discretize(c, N)
    trap = np.sum(d.jacobians) * 2 * np.pi / d.N
    assert trap == pytest.approx(c.arclength(), abs=1e-10)


@pytest.mark.parametrize("kind", CLOSED_BUILTINS)
def test_normals(kind):
    d = discretize(make_curve(kind), 128)
    np.testing.assert_allclose(np.einsum("ij,ij->i", d.normals, d.d1), 0, atol=1e-13)
    np.testing.assert_allclose(np.hypot(*d.normals.T), 1, atol=1e-14)


@pytest.mark.parametrize("kind", CLOSED_BUILTINS)
def test_normals_point_outward(kind):
    # exterior check: a small step along the normal leaves the polygon
    from artifact.helmholtz import _inside_closed
    d = discretize(make_curve(kind), 256)
    assert not np.any(_inside_closed(d, d.nodes + 1e-3 * d.normals))
    assert np.all(_inside_closed(d, d.nodes - 1e-3 * d.normals))


@pytest.mark.parametrize("kind", CLOSED_BUILTINS)
@pytest.mark.parametrize("deriv", ["position", "derivative", "second_derivative"])
def test_closed_periodicity(kind, deriv):
    f = getattr(make_curve(kind), deriv)
    s = np.linspace(0, 2 * np.pi, 17)
    np.testing.assert_allclose(f(s + 2 * np.pi), f(s), atol=1e-13)


@pytest.mark.parametrize("kind", ["unit-circle", "rocket", "cavity", "circular-arc"])
def test_regular_curve(kind):
    c = make_curve(kind)
    a, b = c.parameter_domain
    d1 = c.derivative(np.linspace(a, b, 2001))
    assert np.hypot(*d1.T).min() > 1e-3


@pytest.mark.parametrize("kind", ["unit-circle", "rocket", "cavity", "circular-arc"])
def test_analytic_derivatives_match_finite_differences(kind):
    c = make_curve(kind)
    a, b = c.parameter_domain
    s = np.linspace(a + 0.1, b - 0.1, 9)
    h = 1e-5
    fd1 = (c.position(s + h) - c.position(s - h)) / (2 * h)
    fd2 = (c.derivative(s + h) - c.derivative(s - h)) / (2 * h)
    np.testing.assert_allclose(c.derivative(s), fd1, atol=1e-7)
    np.testing.assert_allclose(c.second_derivative(s), fd2, atol=1e-7)


def test_parabolic_pair_two_segments():
    d = discretize(make_curve("parabolic-mirror-pair"), 32)
    assert d.N == 64 and len(d.segments) == 2 and not d.closed


def test_fourier_file_roundtrip(tmp_path):
    path = tmp_path / "ellipse.txt"
    path.write_text("# m ax bx ay by\n1 2.0 0.0 0.0 1.0\n")
    c = geometry.load_fourier_curve(str(path))
    s = np.linspace(0, 2 * np.pi, 7)
    np.testing.assert_allclose(c.position(s), np.stack([2 * np.cos(s), np.sin(s)], 1), atol=1e-15)
    d = discretize(c, 128)
    # ellipse perimeter with semi-axes 2, 1
    from scipy.special import ellipe
    assert np.sum(d.jacobians) * 2 * np.pi / 128 == pytest.approx(4 * 2 * ellipe(1 - 0.25), abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(N=st.integers(8, 200).map(lambda n: 2 * n))
def test_circle_discretization_property(N):
    d = discretize(make_curve("unit-circle"), N)
    np.testing.assert_allclose(d.params, 2 * np.pi * np.arange(N) / N)
    np.testing.assert_allclose(np.hypot(*d.nodes.T), 1, atol=1e-15)
    assert np.sum(d.l2_weights()) == pytest.approx(2 * np.pi, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(ap=st.floats(0.05, 2 * math.pi - 0.05), N=st.integers(16, 128))
def test_arc_weights_integrate_length(ap, N):
    c = make_curve("circular-arc", aperture=ap)
    d = discretize(c, N)
    # integral of 1 ds over the arc equals its length
    assert np.sum(d.l2_weights()) == pytest.approx(2 * np.pi - ap, rel=1e-10)
