import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rproj import lie_core as lc
from rproj import weight_rep as wr
from rproj.errors import PreconditionError

FORMS = ["sig22", "sig31"]
unit = st.floats(-1, 1, allow_nan=False)


@pytest.mark.parametrize("tag", FORMS)
def test_basis_is_orthonormal_and_weighted(tag):
    wb = wr.build_weight_basis(tag)
    g = np.einsum("iab,jab->ij", wb.vectors, wb.vectors)
    assert np.allclose(g, np.eye(9), atol=1e-13)
    assert list(wb.weights) == list(wr.WEIGHTS)
    for v, lam in zip(wb.vectors, wb.weights):
        assert lc.norm(lc.bracket(lc.A_GEN, v) - lam * v) < 1e-13


def test_multiplicities():
    assert tuple(int(np.sum(wr.WEIGHTS == l)) for l in range(-2, 3)) == wr.MULTIPLICITY
    assert wr.FLAG_DIM == {-2: 9, -1: 8, 0: 6, 1: 3, 2: 1}


@pytest.mark.parametrize("tag", FORMS)
@given(t=st.floats(-3, 3))
def test_ad_a_is_diagonal(tag, t):
    m = wr.conj_matrix(tag, lc.a_t(t))
    target = np.diag(np.exp(wr.WEIGHTS * t))
    assert np.max(np.abs(m - target)) <= 1e-9 * np.max(target)
    assert np.allclose(wr.ad_a(tag, t), target, rtol=1e-15)


@pytest.mark.parametrize("tag", FORMS)
@given(r=unit, s=unit)
def test_flags_are_invariant(tag, r, s):
    m = wr.ad_u(tag, r, s)
    for start in wr.FLAG_START.values():
        assert np.max(np.abs(m[:start, start:]), initial=0.0) <= 1e-12


@pytest.mark.parametrize("tag", FORMS)
@given(r1=unit, s1=unit, r2=unit, s2=unit)
def test_u_additivity(tag, r1, s1, r2, s2):
    lhs = wr.ad_u(tag, r1, s1) @ wr.ad_u(tag, r2, s2)
    assert np.max(np.abs(lhs - wr.ad_u(tag, r1 + r2, s1 + s2))) <= 1e-13


@pytest.mark.parametrize("tag", FORMS)
def test_batch_matches_scalar(tag, rng):
    r, s = rng.uniform(-1, 1, 50), rng.uniform(-1, 1, 50)
    batch = wr.ad_u_batch(tag, r, s)
    for k in range(50):
        assert np.allclose(batch[k], wr.ad_u(tag, r[k], s[k]), atol=1e-13)


@pytest.mark.parametrize("tag", FORMS)
def test_transpose_relation(tag):
    for r, s in [(0.3, 0.4), (-1, 0.5)]:
        assert np.allclose(wr.ad_u_transpose(tag, r, s), wr.ad_u(tag, r, s).T, atol=1e-13)


@pytest.mark.parametrize("tag", FORMS)
def test_ad_u_is_lower_unipotent(tag):
    m = wr.ad_u(tag, 0.7, -0.3)
    assert np.allclose(np.diag(m), 1.0)


def test_pi_flag_and_projector():
    w = np.arange(9.0)
    assert list(wr.pi_flag(1, w)) == [0, 0, 0, 0, 0, 0, 6, 7, 8]
    assert np.allclose(wr.projector(1) @ w, wr.pi_flag(1, w))
    assert list(wr.pi_flag(-2, w)) == list(w)


def test_subspace_angle():
    e = np.eye(9)
    assert wr.subspace_angle([e[:3], e[3:6]]) == pytest.approx(1.0)
    assert wr.subspace_angle([e[:3], e[2:4]]) == pytest.approx(0.0, abs=1e-12)
    v = np.array([math.cos(0.3), math.sin(0.3)] + [0.0] * 7)
    assert wr.subspace_angle([e[:1], v[None]]) == pytest.approx(math.sin(0.3))
    with pytest.raises(PreconditionError):
        wr.subspace_angle([2 * e[:1], e[1:2]])


@pytest.mark.parametrize("tag", FORMS)
def test_weyl_element_reverses_weights(tag):
    w = wr.weyl_element(tag)
    f = lc.get_form(tag)
    assert lc.in_h_group(f, w)
    m = wr.conj_matrix(tag, w)
    # Ad(w) maps weight lam to weight -lam
    for j, lam in enumerate(wr.WEIGHTS):
        col = m[:, j]
        assert np.all(np.abs(col[wr.WEIGHTS != -lam]) < 1e-12)
