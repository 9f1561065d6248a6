import numpy as np
import pytest
from hypothesis import given, strategies as st

from rproj import lie_core as lc
from rproj.errors import DomainError, FormMismatchError

FORMS = ["sig22", "sig31"]
coef = st.floats(-1, 1, allow_nan=False)


def _r_elem(form, c):
    return np.einsum("k,kij->ij", np.asarray(c), np.array(lc.r_basis(form)))


@pytest.mark.parametrize("tag", FORMS)
def test_sigma_is_involution(tag):
    f = lc.get_form(tag)
    s = lc.sigma_matrix(f)
    assert np.max(np.abs(s @ s - np.eye(15))) < 1e-12


@pytest.mark.parametrize("tag", FORMS)
def test_split_dimensions(tag):
    f = lc.get_form(tag)
    assert len(lc.h_basis(f)) == 6
    assert len(lc.r_basis(f)) == 9


@pytest.mark.parametrize("tag", FORMS)
def test_h_basis_preserves_form(tag):
    f = lc.get_form(tag)
    q = f.q_matrix
    for x in lc.h_basis(f):
        assert lc.norm(x.T @ q + q @ x) < 1e-12


@pytest.mark.parametrize("tag", FORMS)
@given(c=st.lists(coef, min_size=15, max_size=15))
def test_split_recombines(tag, c):
    f = lc.get_form(tag)
    x = np.einsum("k,kij->ij", np.array(c), np.array(lc.sl4_basis()))
    h, r = lc.split_h_r(f, x)
    assert lc.norm(h + r - x) < 1e-12
    assert lc.norm(lc.sigma(f, h) - h) < 1e-12
    assert lc.norm(lc.sigma(f, r) + r) < 1e-12


@pytest.mark.parametrize("tag", FORMS)
@given(c1=st.lists(coef, min_size=9, max_size=9), c2=st.lists(coef, min_size=9, max_size=9))
def test_bracket_of_r_lies_in_h(tag, c1, c2):
    f = lc.get_form(tag)
    b = lc.bracket(_r_elem(f, c1), _r_elem(f, c2))
    assert lc.norm(lc.split_h_r(f, b)[1]) < 1e-12


def test_ideals_commute_sig22():
    f = lc.get_form("sig22")
    b1, b2 = lc.so22_ideals(f)
    for x in b1:
        for y in b2:
            assert lc.norm(lc.bracket(x, y)) == 0.0


def test_ideals_sig31_rejected():
    with pytest.raises(FormMismatchError):
        lc.so22_ideals(lc.get_form("sig31"))


@pytest.mark.parametrize("tag", FORMS)
def test_u_rs_is_exponential_of_generators(tag):
    f = lc.get_form(tag)
    xr, xs = lc.u_generators(f)
    for r, s in [(0.3, -0.7), (1.0, 1.0), (-0.2, 0.0)]:
        assert lc.norm(lc.mat_exp(r * xr + s * xs) - lc.u_rs(f, r, s)) < 1e-14
        assert lc.in_h_group(f, lc.u_rs(f, r, s))


def test_mat_exp_matches_scipy(rng):
    from scipy.linalg import expm
    for _ in range(20):
        x = rng.normal(size=(4, 4)) * rng.uniform(0.01, 3)
        e = lc.mat_exp(x)
        assert np.allclose(e, expm(x), rtol=1e-12, atol=1e-12 * np.abs(e).max())


@given(c=st.lists(st.floats(-0.1, 0.1), min_size=15, max_size=15))
def test_log_exp_roundtrip(c):
    x = np.einsum("k,kij->ij", np.array(c), np.array(lc.sl4_basis()))
    assert lc.norm(lc.mat_log(lc.mat_exp(x)) - x) < 1e-12


def test_mat_log_domain():
    with pytest.raises(DomainError):
        lc.mat_log(3 * np.eye(4))


@pytest.mark.parametrize("tag", FORMS)
def test_bch_roundtrip_and_sandwich(tag, rng):
    f = lc.get_form(tag)
    for _ in range(30):
        w1 = _r_elem(f, rng.normal(size=9))
        w2 = _r_elem(f, rng.normal(size=9))
        w1 *= 0.02 / lc.norm(w1)
        w2 *= 0.015 / lc.norm(w2)
        g = lc.mat_exp(w1) @ lc.mat_exp(-w2)
        h, wbar = lc.bch_factorize(f, g, eta0=0.2)
        assert lc.norm(h @ lc.mat_exp(wbar) - g) < 1e-9
        assert lc.in_h_group(f, h, 1e-9)
        assert lc.norm(lc.split_h_r(f, wbar)[0]) < 1e-12
        d = lc.norm(w1 - w2)
        assert 0.5 * d <= lc.norm(wbar) <= 1.5 * d


def test_bch_far_from_identity():
    f = lc.get_form("sig22")
    with pytest.raises(DomainError):
        lc.bch_factorize(f, 2 * np.eye(4))


def test_unknown_form():
    with pytest.raises(Exception):
        lc.get_form("sig40")
