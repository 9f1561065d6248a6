import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rproj.errors import PreconditionError
from rproj.partition_cover import Grid, PointSet, RTuple, TubePartition, covering_number
from rproj.regularize import (Filtration, bourgain_regularize_measure, bourgain_regularize_set,
                              is_regular_measure, is_regular_set, measure_ratio_profile,
                              regular_exhaust, set_sigma_profile, submodular_select)
from rproj.suites import random_clustered_set, random_filtration


def axis_grid(**exps):
    # exps keyed by coordinate index, in 64ths
    e = [0] * 9
    for k, v in exps.items():
        e[int(k[1:])] = v
    return Grid(tuple(e))


def line_points(coord8, coord7=0.25, coord6=0.25):
    pts = np.full((len(coord8), 9), 0.5)
    pts[:, 8] = coord8
    pts[:, 7] = coord7
    pts[:, 6] = coord6
    return pts


def line_filtration(levels=3):
    return Filtration([axis_grid(c8=64 * k) for k in range(levels + 1)])


def test_filtration_checks():
    with pytest.raises(PreconditionError):
        Filtration([axis_grid(c8=64), axis_grid(c8=0)])
    with pytest.raises(PreconditionError):
        Filtration([axis_grid(c8=64), axis_grid(c8=96)])
    f = Filtration([axis_grid(), axis_grid(c8=192), axis_grid(c8=192, c7=64)])
    assert f.branching() == [3.0, 1.0]
    assert f.loss_factor() == pytest.approx(1 / 8 * 1 / 4)


def test_singleton_regular():
    filt = line_filtration()
    a = PointSet(line_points([0.3]))
    assert is_regular_set(a, filt, (1, 1, 1))
    assert is_regular_measure(a, filt, (1, 1, 1))


def test_full_grid_regular():
    # uniform binary branching: exactly two children per atom, so sigma_i = d_i + 1
    filt = line_filtration()
    a = PointSet(line_points((np.arange(8) + 0.5) / 8))
    assert filt.branching() == [1.0, 1.0, 1.0]
    assert is_regular_set(a, filt, (2, 2, 2))
    assert not is_regular_set(a, filt, (1, 1, 1))
    assert is_regular_measure(a, filt, (1.5, 1.5, 1.5))


def test_mixed_branching_never_regular():
    filt = Filtration([axis_grid(), axis_grid(c7=64), axis_grid(c7=64, c8=192)])
    left = line_points((np.arange(2) + 0.5) / 8, coord7=0.25)
    right = line_points((np.arange(5) + 0.5) / 8, coord7=0.75)
    a = PointSet(np.vstack([left, right]))
    assert sorted(set_sigma_profile(a, filt)[1]) == [2, 5]
    for s in np.linspace(1, 4, 301):
        assert not is_regular_set(a, filt, (2, s))


def four_parent_instance():
    # coarse atoms from coordinates 6, 7; children along coordinate 8
    filt = Filtration([axis_grid(c6=64, c7=64), axis_grid(c6=64, c7=64, c8=192)])
    parts = []
    for c6, c7 in [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25)]:
        parts.append(line_points([0.1], c7, c6))
    parts.append(line_points((np.arange(8) + 0.5) / 8, 0.75, 0.75))
    return PointSet(np.vstack(parts)), filt


def test_set_regularization_pigeonhole_example():
    a, filt = four_parent_instance()
    res = bourgain_regularize_set(a, filt)
    kept = covering_number(res.subset, filt.levels[-1])
    # classes: three atoms with one child (3 atoms) or one with eight (8 atoms)
    assert kept == 8
    assert res.sigma == (4,)
    assert kept >= 11 / (2 * (1 + 3))


def test_set_regularization_keeps_regular_sets():
    filt = line_filtration()
    a = PointSet(line_points((np.arange(8) + 0.5) / 8))
    res = bourgain_regularize_set(a, filt)
    assert len(res.indices) == len(a)
    sub, sigma = res
    assert sigma == (2, 2, 2)


def test_measure_uniform_survives():
    filt = line_filtration()
    a = PointSet(line_points((np.arange(8) + 0.5) / 8))
    res = bourgain_regularize_measure(a, filt)
    assert len(res.indices) == 8
    assert res.info["mass"] == pytest.approx(1.0)


def test_measure_skewed_two_atoms():
    filt = line_filtration(1)
    a = PointSet(line_points([0.25, 0.75]), [0.9, 0.1])
    res = bourgain_regularize_measure(a, filt)
    assert list(res.indices) == [0]
    assert res.info["mass"] == pytest.approx(0.9)
    assert res.info["mass"] >= 1 / (2 * (1 + 1))


def test_exhaust_examples():
    filt = line_filtration()
    a = PointSet(line_points((np.arange(8) + 0.5) / 8))
    blocks, rep = regular_exhaust(a, filt, 0.5)
    assert len(blocks) == 1 and len(blocks[0]) == 8
    # two separated clusters, one uniform and one skewed, equal total mass
    left = line_points([0.03, 0.09], coord7=0.25)
    right = line_points([0.53, 0.59, 0.97], coord7=0.75)
    filt2 = Filtration([axis_grid(), axis_grid(c7=64), axis_grid(c7=64, c8=64),
                        axis_grid(c7=64, c8=256)])
    b = PointSet(np.vstack([left, right]), [0.25, 0.25, 0.3, 0.1, 0.1])
    blocks, rep = regular_exhaust(b, filt2, 0.1)
    assert rep["cover_ok"] and rep["block_mass_ok"]
    assert len(blocks) >= 2
    assert sorted(np.concatenate(blocks).tolist()) == sorted(set(np.concatenate(blocks).tolist()))


@settings(max_examples=15)
@given(seed=st.integers(0, 10 ** 6), weighted=st.booleans())
def test_regularization_properties(seed, weighted):
    rng = np.random.default_rng(seed)
    filt = random_filtration(rng)
    a = random_clustered_set(rng, 1500, weighted=weighted)
    lam = filt.loss_factor()
    rs = bourgain_regularize_set(a, filt)
    assert is_regular_set(rs.subset, filt, rs.sigma)
    assert all(s == int(s) for s in rs.sigma)
    assert covering_number(rs.subset, filt.levels[-1]) >= covering_number(a, filt.levels[-1]) * lam
    rm = bourgain_regularize_measure(a, filt)
    assert is_regular_measure(rm.subset, filt, rm.sigma)
    assert a.mass_vector()[rm.indices].sum() >= lam * (1 - 1e-12)
    blocks, rep = regular_exhaust(a, filt, 0.1)
    assert rep["cover_ok"] and rep["block_mass_ok"]
    allidx = np.concatenate(blocks)
    assert len(allidx) == len(np.unique(allidx))


@settings(max_examples=15)
@given(seed=st.integers(0, 10 ** 6))
def test_weaker_regular_consequence(seed):
    rng = np.random.default_rng(seed)
    filt = random_filtration(rng)
    a = bourgain_regularize_set(random_clustered_set(rng, 1500), filt).subset
    counts = [covering_number(a, p) for p in filt.levels]
    for i, cnt in enumerate(set_sigma_profile(a, filt), start=1):
        ratio = counts[i] / counts[i - 1]
        assert np.all(cnt >= 0.5 * ratio) and np.all(cnt <= 2 * ratio)


@settings(max_examples=15)
@given(seed=st.integers(0, 10 ** 6))
def test_regular_measure_vs_set(seed):
    rng = np.random.default_rng(seed)
    filt = random_filtration(rng)
    f = bourgain_regularize_measure(random_clustered_set(rng, 1500, weighted=True), filt).subset
    # keep one coarsest atom
    lab = filt.labels(f.points)[0]
    f = f.subset(np.nonzero(lab == lab[0])[0])
    sig = bourgain_regularize_measure(f, filt)
    assert len(sig.indices) == len(f)
    sub = f.subset(rng.choice(len(f), size=max(1, len(f) // 3), replace=False))
    mass = f.mass_vector()
    idx = np.nonzero(np.isin(f.points, sub.points).all(axis=1))[0]
    lhs = covering_number(sub, filt.levels[-1]) / covering_number(f, filt.levels[-1])
    assert lhs >= 2.0 ** -filt.n * mass[idx].sum() - 1e-12


def test_measure_profile_ratios_in_unit_interval(rng):
    filt = random_filtration(rng)
    a = random_clustered_set(rng, 800, weighted=True)
    for r in measure_ratio_profile(a, filt):
        assert np.all((r > 0) & (r <= 1))


def test_submodular_single_atom():
    # S = P ^ Q only cuts coordinate 8, which is constant on A
    p = TubePartition(3, RTuple.of([0, 0, 0, 0, 1]))
    q = TubePartition(3, RTuple.of([0, 0, 1, 1, 1]))
    pts = np.full((30, 9), 0.5)
    pts[:, 3:8] = np.random.default_rng(1).uniform(0, 1, size=(30, 5))
    rep = submodular_select(PointSet(pts), p, q, 0.3)
    assert rep.count_s_sub == 1 and len(rep.indices) == 30
    assert rep.count_p * rep.count_q >= (0.3 ** 2 / 4) * rep.count_r


def test_submodular_product_set():
    # X along coordinate 8, Y along coordinate 6, on a 16 x 16 grid
    p = TubePartition(4, RTuple.of([0, 0, 0, 0, 1]))
    q = TubePartition(4, RTuple.of([0, 0, 0, 1, 1]))
    g = (np.arange(16) + 0.5) / 16
    xx, yy = np.meshgrid(g, g, indexing="ij")
    pts = np.full((256, 9), 0.5)
    pts[:, 8] = xx.ravel()
    pts[:, 6] = yy.ravel()
    rep = submodular_select(PointSet(pts), p, q, 0.5)
    assert (rep.count_p, rep.count_q, rep.count_r) == (16, 256, 256)
    assert rep.retained_ok and rep.product_ok
    # equality regime |A|_P |A|_Q = |A|_R |A|_S for the full set
    assert rep.count_p * rep.count_q == rep.count_r * 16


@settings(max_examples=25)
@given(seed=st.integers(0, 10 ** 6))
def test_submodular_random(seed):
    rng = np.random.default_rng(seed)
    pts = np.floor(rng.uniform(0, 1, size=(300, 9)) ** 2 * 32) / 32
    rts = [RTuple(tuple(sorted(rng.integers(0, 65, size=5)))) for _ in range(2)]
    c = float(rng.uniform(0.05, 0.95))
    rep = submodular_select(PointSet(pts), TubePartition(3, rts[0]), TubePartition(3, rts[1]), c)
    assert rep.retained_ok and rep.product_ok
    assert rep.count_r_sub >= math.ceil((1 - c) * rep.count_r - 1e-9)


def test_bad_c():
    with pytest.raises(ValueError):
        submodular_select(PointSet(np.zeros((1, 9))), TubePartition.cube(1), TubePartition.cube(1), 1.0)
    with pytest.raises(ValueError):
        regular_exhaust(PointSet(np.zeros((1, 9))), line_filtration(), 0)
