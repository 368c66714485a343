import numpy as np
import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from artifact import _kernels_py, geometry, helmholtz, kernels, mie
from artifact.helmholtz import (DensitySolver, NearFieldError, OperatorMatrix, assemble_arc, assemble_closed,
                                eval_potential, green, plane_wave_trace, solve_density)
from artifact.special import bessel_j0, bessel_y0, hankel_h0, hankel_h1


def mp_green(k, r):
    return complex(0.25j * mp.hankel1(0, mp.mpc(k) * r))


# ---------------------------------------------------------------- special functions

def test_special_functions_against_mpmath(rng):
    mag = 10 ** rng.uniform(-8, 3, 300)
    z = mag * np.exp(1j * rng.uniform(-np.pi / 2, 0, 300))
    z.imag = np.maximum(z.imag, -10)
    for f, ref in ((hankel_h0, lambda x: mp.hankel1(0, x)), (hankel_h1, lambda x: mp.hankel1(1, x)),
                   (bessel_j0, lambda x: mp.besselj(0, x)), (bessel_y0, lambda x: mp.bessely(0, x))):
        with mp.workdps(30):
            want = np.array([complex(ref(mp.mpc(w))) for w in z])
        got = f(z)
        assert np.max(np.abs(got - want) / np.abs(want)) < 1e-12


def test_hankel_real_argument_identity():
    x = np.linspace(0.01, 200, 1001)
    np.testing.assert_allclose(hankel_h0(x), special.j0(x) + 1j * special.y0(x), rtol=1e-12)
    np.testing.assert_allclose(hankel_h0(x + 0j), hankel_h0(x), rtol=1e-12)


# ---------------------------------------------------------------- Green's function

def test_green_value():
    g = green(1.0, np.array([0.0, 0.0]), np.array([1.0, 0.0]))
    assert g == pytest.approx(-0.02206424 + 0.19129942j, abs=5e-9)
    assert g == pytest.approx(mp_green(1, 1), rel=1e-13)


def test_green_complex_frequency():
    g = green(1 - 0.3j, np.array([0.0, 0.0]), np.array([0.0, 2.0]))
    assert abs(g - mp_green(1 - 0.3j, 2)) / abs(g) < 1e-12


@settings(max_examples=50, deadline=None)
@given(w=st.complex_numbers(max_magnitude=50).filter(lambda z: abs(z) > 1e-3 and z.imag <= 0),
       a=st.tuples(st.floats(-5, 5), st.floats(-5, 5)), b=st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_green_reciprocity(w, a, b):
    a, b = np.array(a), np.array(b)
    if np.hypot(*(a - b)) < 1e-6:
        return
    assert green(w, a, b) == green(w, b, a)


# ---------------------------------------------------------------- plane wave

def test_plane_wave_zero_frequency(circle64):
    np.testing.assert_array_equal(plane_wave_trace(circle64, 0.0, (1.0, 0.0)), np.ones(64))


def test_plane_wave_small_circle():
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = geometry.discretize(geometry.make_curve("unit-circle"), 4)
    np.testing.assert_allclose(plane_wave_trace(d, np.pi, (0.0, 1.0)), [1, -1, 1, -1], atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(w=st.floats(-100, 100), th=st.floats(0, 2 * np.pi))
def test_plane_wave_unimodular(circle64, w, th):
    b = plane_wave_trace(circle64, w, (np.cos(th), np.sin(th)))
    np.testing.assert_allclose(np.abs(b), 1, atol=1e-14)


def test_plane_wave_rejects_non_unit(circle64):
    with pytest.raises(ValueError):
        plane_wave_trace(circle64, 1.0, (1.0, 1.0))


# ---------------------------------------------------------------- closed operator

def test_closed_constant_density(circle128):
    op = assemble_closed(circle128, 1.0, 0.0)
    lam = mie.disk_operator_eigs(1.0, 1.0, 0.0, 0)
    np.testing.assert_allclose(op.matrix @ np.ones(128), lam, atol=1e-10)


@pytest.mark.parametrize("n", [1, 3, 7])
def test_closed_fourier_modes_are_eigenvectors(circle128, n):
    w, eta = 4.0 - 0.2j, -4.0
    op = assemble_closed(circle128, w, eta)
    v = np.exp(1j * n * circle128.params)
    lam = mie.disk_operator_eigs(w, 1.0, eta, n)
    np.testing.assert_allclose(op.matrix @ v, lam * v, atol=1e-10)


def test_eta_linearity(circle64):
    a = assemble_closed(circle64, 3.0, -1.0)
    b = assemble_closed(circle64, 3.0, -5.0)
    np.testing.assert_allclose(a.matrix - b.matrix, -1j * 4.0 * a.S / 2, atol=1e-14)


def test_closed_self_convergence():
    c = geometry.make_curve("unit-circle")
    psi = {}
    for N in (128, 256):
        d = geometry.discretize(c, N)
        psi[N] = DensitySolver(d, (1.0, 0.0), -5.0)(5.0)
    assert np.max(np.abs(psi[256][::2] - psi[128])) < 1e-10


def test_closed_spectral_convergence():
    c = geometry.make_curve("unit-circle")
    pt = np.array([[2.0, 0.5]])
    ref = mie.disk_field(5.0, 1.0, pt)
    errs = []
    for N in (16, 24, 32):
        d = geometry.discretize(c, N)
        psi = DensitySolver(d, (1.0, 0.0), -5.0)(5.0)
        errs.append(abs(eval_potential(d, psi, 5.0, pt, eta=-5.0)[0] - ref[0]))
    # faster than N^-8 between successive resolutions
    assert errs[1] < errs[0] * (16 / 24) ** 8
    assert errs[2] < errs[1] * (24 / 32) ** 8


def test_no_real_axis_singularity_scan():
    d = geometry.discretize(geometry.make_curve("unit-circle"), 160)
    for w in np.linspace(1, 50, 500):
        op = assemble_closed(d, w, helmholtz.default_eta(w))
        op.factorize(check=True)


def test_eta_zero_condition_spikes():
    d = geometry.discretize(geometry.make_curve("unit-circle"), 64)
    # the eta = 0 operator loses invertibility at the zeros of J_n'
    spikes = [special.jnp_zeros(n, 1)[0] for n in (1, 2, 3)]
    for w in spikes:
        bad = 1 / assemble_closed(d, w, 0.0).rcond()
        good = 1 / assemble_closed(d, w, -max(1.0, w)).rcond()
        assert bad > 1e6
        assert good < 1e2


def test_default_eta_sign():
    for w in (-20.0, -0.5, 0.5, 20.0):
        assert np.sign(helmholtz.default_eta(w)) == -np.sign(w)
        assert abs(helmholtz.default_eta(w)) == max(1.0, abs(w))


def test_zero_frequency_rejected(circle64, arc128):
    with pytest.raises(ValueError):
        assemble_closed(circle64, 0.0, -1.0)
    with pytest.raises(ValueError):
        assemble_arc(arc128, 0.0)


# ---------------------------------------------------------------- open arc

def _strip():
    return geometry.Curve(geometry.OPEN, lambda t: np.stack([t, 0 * t], 1),
                          lambda t: np.stack([1 + 0 * t, 0 * t], 1), lambda t: np.zeros((len(t), 2)))


def test_flat_strip_small_frequency():
    N, k = 64, 1e-6
    d = geometry.discretize(_strip(), N)
    psi = solve_density(assemble_arc(d, k), np.ones(N)).values
    # Chebyshev coefficients of psi, then the exact log-kernel action at 2N new points
    a = np.polynomial.chebyshev.chebfit(d.params, psi, N - 1)
    c0 = 0.25j - (np.log(k / 2) + np.euler_gamma) / (2 * np.pi)
    t2 = np.cos(np.pi * (2 * np.arange(2 * N) + 1) / (4 * N))
    n = np.arange(1, N)
    Tn = np.cos(np.outer(np.arccos(t2), n))
    Sv = -(1 / (2 * np.pi)) * (a[0] * (-np.pi * np.log(2)) + Tn @ (a[1:] * (-np.pi / n))) + c0 * np.pi * a[0]
    assert np.max(np.abs(Sv - 1)) < 1e-10


def test_arc_symmetry():
    d = geometry.discretize(geometry.make_curve("circular-arc", aperture=1.25), 128)
    psi = DensitySolver(d, (0.0, 1.0))(8.5)
    np.testing.assert_allclose(psi, psi[::-1], atol=1e-12 * np.abs(psi).max())


def test_arc_self_convergence():
    c = geometry.make_curve("circular-arc", aperture=1.25)
    d1, d2 = geometry.discretize(c, 96), geometry.discretize(c, 192)
    p1 = DensitySolver(d1, (1.0, 0.0))(8.5)
    p2 = DensitySolver(d2, (1.0, 0.0))(8.5)
    coef = np.polynomial.chebyshev.chebfit(d2.params, p2, 191)
    p2_on_1 = np.polynomial.chebyshev.chebval(d1.params, coef)
    assert np.max(np.abs(p2_on_1 - p1)) < 1e-9


# ---------------------------------------------------------------- solves and potentials

def test_identity_solve(rng):
    b = rng.standard_normal(10) + 1j * rng.standard_normal(10)
    op = OperatorMatrix(1.0, None, np.eye(10, dtype=complex), "closed")
    np.testing.assert_allclose(solve_density(op, b).values, b, atol=1e-15)


def test_solve_linearity(circle64, rng):
    op = assemble_closed(circle64, 3.0, -3.0)
    b = plane_wave_trace(circle64, 3.0, (1.0, 0.0))
    alpha = 2.5 - 1.5j
    np.testing.assert_allclose(solve_density(op, alpha * b).values, alpha * solve_density(op, b).values,
                               atol=1e-13)


@pytest.mark.parametrize("pt", [(2.0, 0.0), (3.0, 0.0)])
def test_disk_field_matches_mie(circle128, pt):
    psi = DensitySolver(circle128, (1.0, 0.0), -2.0)(2.0)
    u = eval_potential(circle128, psi, 2.0, [pt], eta=-2.0)
    assert abs(u[0] - mie.disk_field(2.0, 1.0, np.array([pt]))[0]) < 1e-9


def test_zero_density_zero_field(circle64):
    assert np.all(eval_potential(circle64, np.zeros(64), 2.0, [(3.0, 0.0)], eta=-2.0) == 0)


def test_complex_frequency_potential(circle128):
    w, eta, r = 2 - 0.1j, -2.0, np.array([5.0, 0.0])

    def kern(s):
        y = np.array([np.cos(s), np.sin(s)])
        d = r - y
        dist = np.hypot(*d)
        dG = 0.25j * w * special.hankel1(1, w * dist) * (d @ y) / dist
        return dG - 1j * eta * 0.25j * special.hankel1(0, w * dist)

    re = integrate.quad(lambda s: kern(s).real, 0, 2 * np.pi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    im = integrate.quad(lambda s: kern(s).imag, 0, 2 * np.pi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    u = eval_potential(circle128, np.ones(128), w, [r], eta=eta)[0]
    assert abs(u - (re + 1j * im)) < 1e-10


def test_near_field_and_interior_rejected(circle64, arc128):
    with pytest.raises(NearFieldError):
        helmholtz.check_points(circle64, [(1.01, 0.0)])
    with pytest.raises(NearFieldError):
        helmholtz.check_points(circle64, [(0.2, 0.0)])
    # the arc has no interior
    helmholtz.check_points(arc128, [(0.0, 0.0)])


def test_negative_frequency_symmetry(circle64):
    s = DensitySolver(circle64, (1.0, 0.0), -3.0)
    np.testing.assert_array_equal(s(-3.0), np.conj(s(3.0)))


def test_operator_dump_roundtrip(tmp_path, circle64):
    op = assemble_closed(circle64, 2.5 - 0.1j, -2.5)
    helmholtz.dump_operator(op, tmp_path / "op.bin")
    M, w, eta = helmholtz.load_operator(tmp_path / "op.bin")
    np.testing.assert_array_equal(M, op.matrix)
    assert w == op.omega and eta == -2.5
    raw = (tmp_path / "op.bin").read_bytes()
    assert int.from_bytes(raw[:8], "little") == 64
    assert len(raw) == 32 + 64 * 64 * 16


# ---------------------------------------------------------------- backends

@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
@pytest.mark.parametrize("k", [7.0, 7.0 - 0.4j])
def test_backends_agree(circle64, arc128, k):
    from artifact import _kernels
    R, lg = helmholtz._closed_tables(64)
    args = [np.ascontiguousarray(a) for a in (circle64.nodes, circle64.d1, circle64.d2)]
    for a, b in zip(_kernels.closed_blocks(*args, k, R, lg), _kernels_py.closed_blocks(*args, k, R, lg)):
        np.testing.assert_allclose(a, b, atol=1e-13)
    W, lnc = helmholtz._arc_tables(128)
    args = [np.ascontiguousarray(a) for a in (arc128.nodes, arc128.jacobians)]
    np.testing.assert_allclose(_kernels.arc_matrix(*args, lnc, W, k), _kernels_py.arc_matrix(*args, lnc, W, k),
                               atol=1e-13)
    r = np.ascontiguousarray(np.linspace(0.1, 3, 12).reshape(3, 4))
    for a, b in zip(_kernels.hankel01(k, r), _kernels_py.hankel01(k, r)):
        np.testing.assert_allclose(a, b, rtol=1e-14)


def test_pure_python_backend_env(monkeypatch):
    import importlib
    monkeypatch.setenv("ARTIFACT_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("ARTIFACT_PURE_PYTHON")
        importlib.reload(kernels)
