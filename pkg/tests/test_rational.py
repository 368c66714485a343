import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact import rational as R


def resolvent(Z, poles, coef):
    return sum(np.outer(1 / (Z - p), c) for p, c in zip(poles, coef))


def match(a, b):
    a, b = np.sort_complex(np.asarray(a)), np.sort_complex(np.asarray(b))
    assert a.size == b.size
    return max(np.abs(a[:, None] - b[None, :]).min(axis=1)) if a.size else 0.0


# ---------------------------------------------------------------- aaa_scalar

def test_scalar_degree_one():
    Z = np.linspace(0, 4, 100)
    r = R.aaa_scalar(Z, 1 / (Z - (2 - 0.3j)))
    assert r.converged and r.m <= 2
    ps = R.poles_and_residues(r)
    assert ps.poles.size == 1
    assert abs(ps.poles[0] - (2 - 0.3j)) < 1e-12
    assert abs(ps.residues[0, 0] - 1) < 1e-12


def test_scalar_exponential():
    Z = np.linspace(0, 1, 200)
    r = R.aaa_scalar(Z, np.exp(Z), tol=1e-10)
    assert r.converged and r.achieved_error < 1e-10 and r.m < 15
    zt = np.linspace(0, 1, 1000)
    assert np.max(np.abs(r(zt) - np.exp(zt))) < 1e-9


def test_scalar_constant():
    Z = np.linspace(0, 1, 20)
    r = R.aaa_scalar(Z, np.full(20, 7.0))
    assert r.m == 1
    np.testing.assert_allclose(r(np.linspace(-3, 3, 50) + 0.5j), 7.0, rtol=1e-15)


def test_scalar_errors():
    with pytest.raises(ValueError):
        R.aaa_scalar([0, 1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        R.aaa_scalar(np.zeros(10), np.ones(10))
    with pytest.raises(ValueError):
        R.aaa_scalar(np.arange(10.0), np.r_[np.ones(9), np.nan])


def test_m_max_capped_at_half_samples():
    Z = np.linspace(0, 1, 20)
    r = R.aaa_scalar(Z, np.abs(Z - 0.5), tol=1e-15, m_max=100)
    assert r.m <= 10 and not r.converged


# ---------------------------------------------------------------- aaa_vector

def test_vector_duplicate_components():
    Z = np.linspace(0, 2, 80)
    f = 1 / (Z - (1 - 0.1j))
    rv = R.aaa_vector(Z, np.stack([f, f], 1))
    rs = R.aaa_scalar(Z, f)
    np.testing.assert_array_equal(rv.support, rs.support)
    p = R.poles_and_residues(rv).poles
    assert abs(p[0] - (1 - 0.1j)) < 1e-12


def test_vector_two_poles():
    Z = np.linspace(0, 8, 200)
    rho = [3 - 0.2j, 5 - 0.4j]
    F = np.stack([1 / (Z - rho[0]), 1 / (Z - rho[1])], 1)
    r = R.aaa_vector(Z, F)
    ps = R.poles_and_residues(r)
    assert match(ps.poles, rho) < 1e-10
    assert all(R.denominator_root_ok(r, p) for p in ps.poles)
    zt = np.linspace(0.01, 7.99, 997)
    Ft = np.stack([1 / (zt - rho[0]), 1 / (zt - rho[1])], 1)
    assert np.max(np.abs(r(zt) - Ft)) < 1e-9


def test_vector_single_component_is_scalar(rng):
    Z = np.linspace(0, 3, 60)
    f = np.tan(Z / 2) + 0.1j
    a = R.aaa_vector(Z, f[:, None])
    b = R.aaa_scalar(Z, f)
    np.testing.assert_array_equal(a.support, b.support)
    np.testing.assert_array_equal(a.weights, b.weights)


# ---------------------------------------------------------------- aaa_sketch

def test_sketch_identical_rows():
    Z = np.linspace(0, 4, 120)
    f = 1 / (Z - (2 - 0.3j)) + 2 / (Z - (3 - 0.5j))
    F = np.tile(f[:, None], (1, 50))
    a = R.poles_and_residues(R.aaa_sketch(Z, F, ell=2, seed=3)).poles
    b = R.poles_and_residues(R.aaa_scalar(Z, f)).poles
    assert match(a, b) < 1e-10


def _manufactured(rng, ndim=200):
    poles = 10 + 10 * rng.random(6) - 0.3j * rng.random(6) - 0.02j
    coef = rng.standard_normal((6, ndim)) + 1j * rng.standard_normal((6, ndim))
    Z = np.linspace(9, 21, 400)
    return Z, resolvent(Z, poles, coef), poles


def test_sketch_manufactured_resolvent():
    Z, F, poles = _manufactured(np.random.default_rng(11))
    r = R.aaa_sketch(Z, F, ell=4, seed=0)
    assert r.converged
    assert match(R.poles_and_residues(r).poles, poles) < 1e-8


def test_sketch_seed_robust():
    Z, F, _ = _manufactured(np.random.default_rng(11))
    a = R.poles_and_residues(R.aaa_sketch(Z, F, ell=4, seed=1)).poles
    b = R.poles_and_residues(R.aaa_sketch(Z, F, ell=4, seed=2)).poles
    assert match(a, b) < 1e-8


def test_sketch_falls_back(caplog):
    Z = np.linspace(0, 4, 50)
    F = np.stack([1 / (Z - 1 + 0.1j), 1 / (Z - 3 + 0.2j)], 1)
    with caplog.at_level("INFO"):
        a = R.aaa_sketch(Z, F, ell=2)
    b = R.aaa_vector(Z, F)
    np.testing.assert_array_equal(a.weights, b.weights)
    assert "aaa_vector" in caplog.text


def test_sketch_deterministic():
    Z, F, _ = _manufactured(np.random.default_rng(5), 40)
    a, b = R.aaa_sketch(Z, F, ell=3, seed=9), R.aaa_sketch(Z, F, ell=3, seed=9)
    np.testing.assert_array_equal(a.weights, b.weights)


@pytest.mark.parametrize("ndim", [2, 5, 8])
def test_sketch_full_size_matches_vector(ndim):
    rng = np.random.default_rng(ndim)
    poles = np.array([2 - 0.1j, 4 - 0.3j, 6 - 0.2j])
    Z = np.linspace(1, 7, 150)
    F = resolvent(Z, poles, rng.standard_normal((3, ndim)) + 1j)
    a = R.poles_and_residues(R.aaa_sketch(Z, F, ell=ndim)).poles
    b = R.poles_and_residues(R.aaa_vector(Z, F)).poles
    assert match(a, b) < 1e-9


# ---------------------------------------------------------------- poles and residues

def test_residues_two_terms():
    Z = np.linspace(0, 5, 150)
    rho, c = np.array([1 - 0.1j, 4 - 0.2j]), np.array([2, -1 + 1j])
    r = R.aaa_scalar(Z, c[0] / (Z - rho[0]) + c[1] / (Z - rho[1]))
    ps = R.poles_and_residues(r)
    np.testing.assert_allclose(ps.poles, rho, atol=1e-10)
    np.testing.assert_allclose(ps.residues[:, 0], c, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 5), seed=st.integers(0, 10 ** 6))
def test_pole_count_bound_and_root_property(n, seed):
    rng = np.random.default_rng(seed)
    poles = rng.uniform(0, 10, n) - 1j * rng.uniform(0.05, 1, n)
    Z = np.linspace(-1, 11, 120)
    f = resolvent(Z, poles, rng.standard_normal((n, 1)) + 1.5)[:, 0]
    r = R.aaa_scalar(Z, f)
    ps = R.poles_and_residues(r)
    assert ps.poles.size <= r.m - 1
    assert np.all(np.isfinite(ps.poles))
    assert abs(np.linalg.norm(r.weights) - 1) < 1e-14
    np.testing.assert_array_equal(r(r.support), r.values[:, 0])
    for p in ps.poles:
        assert R.denominator_root_ok(r, p)


def test_support_points_distinct():
    Z = np.linspace(0, 1, 200)
    r = R.aaa_scalar(Z, np.exp(Z), tol=1e-16, m_max=40)
    assert len(np.unique(r.support)) == r.m


# ---------------------------------------------------------------- cleanup

def test_cleanup_removes_doublets():
    Z = np.linspace(0, 1, 200)
    r = R.aaa_scalar(Z, np.exp(Z), tol=1e-16, m_max=40)
    res = np.abs(R.poles_and_residues(r).residues).max(axis=1)
    assert (res < 1e-13).any()
    c = R.cleanup(r, Z, 1e-13)
    res_c = np.abs(R.poles_and_residues(c).residues).max(axis=1)
    assert not (res_c < 1e-13).any()
    err = np.abs(c(Z) - np.exp(Z)).max()
    assert err <= 2 * max(np.abs(r(Z) - np.exp(Z)).max(), 1e-15)
    assert abs(np.linalg.norm(c.weights) - 1) < 1e-14


def test_cleanup_noop_cases():
    Z = np.linspace(0, 4, 100)
    r = R.aaa_scalar(Z, 1 / (Z - (2 - 0.3j)) + 1 / (Z - (1 - 0.2j)))
    assert R.cleanup(r, Z, 1e-13) is r
    doublets = R.aaa_scalar(np.linspace(0, 1, 200), np.exp(np.linspace(0, 1, 200)), tol=1e-16, m_max=40)
    assert R.cleanup(doublets, None, 0.0) is doublets


# ---------------------------------------------------------------- serialization

def test_record_roundtrip():
    Z = np.linspace(0, 8, 100)
    F = np.stack([1 / (Z - 3 + 0.2j), np.sin(Z)], 1)
    r = R.aaa_vector(Z, F, meta={"interval": [0, 8]})
    s = R.RationalApproximant.from_record(__import__("json").loads(r.dumps()))
    np.testing.assert_array_equal(s.support, r.support)
    np.testing.assert_array_equal(s.weights, r.weights)
    np.testing.assert_array_equal(s(Z), r(Z))
    assert s.meta["interval"] == [0, 8]


def test_eval_deflated_matches_plain():
    Z = np.linspace(0, 4, 120)
    r = R.aaa_vector(Z, (2 / (Z - (2 - 0.1j)) + np.sin(Z))[:, None])
    ps = R.poles_and_residues(r).poles
    p = ps[np.argmin(np.abs(ps - (2 - 0.1j)))]
    z = np.array([1.0 + 0.5j, 3.0 - 0.2j, 0.5j])
    plain = (z - p)[:, None] * r.eval(z)
    np.testing.assert_allclose(r.eval_deflated(z, p), plain, rtol=1e-9)
    # close to the pole the deflated form stays at the residue
    near = p + 1e-9 * np.exp(2j * np.pi * np.arange(8) / 8)
    assert np.abs(r.eval_deflated(near, p)[:, 0] - 2).max() < 1e-9
