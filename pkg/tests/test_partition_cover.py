import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from rproj.errors import PreconditionError
from rproj.partition_cover import (Grid, PointSet, RTuple, TubePartition, atom_key, atom_labels,
                                   covering_number, cube_grid, join, meet, refinement_constant,
                                   refines)

pts_strategy = arrays(np.float64, st.tuples(st.integers(1, 40), st.just(9)),
                      elements=st.floats(0, 1, allow_nan=False, width=64))
r64_strategy = st.lists(st.integers(0, 64), min_size=5, max_size=5).map(lambda v: RTuple(tuple(sorted(v))))


def brute_count(pts, exps):
    sides = [2.0 ** (-e / 64) for e in exps]
    return len({tuple(math.floor(c / s) for c, s in zip(row, sides)) for row in pts})


def test_rtuple_validation():
    with pytest.raises(ValueError):
        RTuple((10, 5, 20, 30, 40))
    with pytest.raises(ValueError):
        RTuple.of([0, 0.3, 0.5, 0.75, 1])
    assert RTuple.of([0, 0.25, 0.5, 0.75, 1]).r64 == (0, 16, 32, 48, 64)
    assert RTuple.of([Fraction(1, 4)] * 5).values == (Fraction(1, 4),) * 5


def test_atom_key_cube_collapse():
    w = np.linspace(0.01, 0.99, 9)
    p = TubePartition(4, RTuple.constant(1))
    assert atom_key(p, w) == tuple(int(math.floor(c * 16)) for c in w)


def test_atom_key_top_weight_only():
    w = np.full(9, 0.77)
    w[8] = 0.3
    key = atom_key(TubePartition(4, RTuple.of([0, 0, 0, 0, 1])), w)
    assert key == (0,) * 8 + (4,)


def test_per_weight_scales():
    p = TubePartition(8, RTuple.of([0, 0.25, 0.5, 0.75, 1]))
    sc = p.grid().scales()
    assert list(sc) == [1.0, 2 ** -2, 2 ** -2, 2 ** -4, 2 ** -4, 2 ** -4, 2 ** -6, 2 ** -6, 2 ** -8]


def test_boxes_half_open():
    p = TubePartition.cube(3)
    assert atom_key(p, np.full(9, 0.125))[0] == 1
    assert atom_key(p, np.full(9, np.nextafter(0.125, 0)))[0] == 0
    assert atom_key(p, np.full(9, -0.125))[0] == -1


def test_covering_examples():
    assert covering_number(PointSet(np.zeros(9)), TubePartition.cube(5)) == 1
    e = np.zeros(9)
    e[8] = 1.0
    d = 2.0 ** -5
    pts = np.array([0 * e, d * e, 2 * d * e])
    assert covering_number(pts, TubePartition.cube(5)) == 3
    n = 16
    g = np.zeros((n * n, 9))
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    g[:, 6] = ii.ravel() / n
    g[:, 7] = jj.ravel() / n
    assert covering_number(g, TubePartition.cube(4)) == n * n


@given(pts=pts_strategy, rt=r64_strategy, n=st.integers(1, 8))
def test_covering_matches_bruteforce(pts, rt, n):
    p = TubePartition(n, rt)
    assert covering_number(pts, p) == brute_count(pts, p.exps)


@given(pts=pts_strategy, n=st.integers(1, 6))
def test_translation_consistency(pts, n):
    p = TubePartition.cube(n)
    pts = np.floor(pts * 2 ** 20) / 2 ** 20    # dyadic points so the shift is exact
    shift = 3 * 2.0 ** -n
    assert covering_number(pts + shift, p) == covering_number(pts, p)


@given(pts=pts_strategy, rt=r64_strategy, rt2=r64_strategy, n=st.integers(1, 6))
def test_monotonicity_and_join(pts, rt, rt2, n):
    p, q = TubePartition(n, rt), TubePartition(n, rt2)
    half = pts[: max(1, len(pts) // 2)]
    assert covering_number(half, p) <= covering_number(pts, p)
    j = join(p, q)
    assert covering_number(pts, j) <= covering_number(pts, p) * covering_number(pts, q)
    assert covering_number(pts, meet(p, q)) <= covering_number(pts, p)
    if all(e % 64 == 0 for e in p.exps):    # cube cells nest in p's cells only for dyadic sides
        assert covering_number(pts, TubePartition.cube(n)) >= covering_number(pts, p)


@given(rt=r64_strategy, n=st.integers(1, 20))
def test_volume_bookkeeping(rt, n):
    p = TubePartition(n, rt)
    assert p.log2_volume() == p.grid().log2_volume()
    assert p.log2_volume() == -n * sum(Fraction(m * r, 64) for m, r in zip((1, 2, 3, 2, 1), rt.r64))


def test_join_meet_tuple_algebra():
    r = RTuple.of([0, 0.25, 0.5, 0.75, 1])
    p = TubePartition(8, r)
    assert join(p, p) == p
    t3 = join(p, TubePartition(8, RTuple.constant(0.75)))
    assert t3.rt == RTuple.of([0.75, 0.75, 0.75, 0.75, 1])
    t = meet(p, TubePartition(8, RTuple.constant(0.25)))
    assert t.rt == RTuple.of([0, 0.25, 0.25, 0.25, 0.25])
    with pytest.raises(ValueError):
        join(p, TubePartition(7, r))


def test_refinement_constants():
    c3, c2 = TubePartition.cube(3), TubePartition.cube(2)
    assert refinement_constant(c3, c3) == 1
    assert refinement_constant(c3, c2) == 512
    p = TubePartition(8, RTuple.of([0, 0.25, 0.5, 0.75, 1]))
    assert refinement_constant(TubePartition.cube(8), p) == 2 ** 36
    with pytest.raises(PreconditionError):
        refinement_constant(c2, c3)
    assert refines(c3, c2) and not refines(c2, c3)
    # non-nested rough refinement: ratio 2^(1/2) needs 2 atoms per coordinate
    assert refinement_constant(Grid((32,)), Grid((0,))) == 2


def test_refinement_constant_is_attained(rng):
    pts = rng.uniform(0, 1, size=(20000, 9)) * 0.25
    fine, coarse = Grid((128,) * 9), Grid((64,) * 9)
    n, lab = atom_labels(pts, coarse)
    worst = max(covering_number(pts[lab == k], fine) for k in range(n))
    assert worst <= refinement_constant(fine, coarse)


@given(pts=pts_strategy)
def test_csv_roundtrip(pts):
    a = PointSet(pts)
    b = PointSet.from_csv(a.to_csv())
    assert np.array_equal(a.points, b.points)
    w = PointSet(pts, np.arange(1, len(pts) + 1))
    w2 = PointSet.from_csv(w.to_csv())
    assert np.array_equal(w.weights, w2.weights)


def test_pointset_validation():
    with pytest.raises(ValueError):
        PointSet(np.zeros((0, 9)))
    with pytest.raises(ValueError):
        PointSet(np.full((1, 9), np.nan))
    w = PointSet(np.zeros((2, 9)), [1, 3])
    assert w.mass_vector().sum() == pytest.approx(1.0, abs=1e-12)


def test_cube_grid_scales():
    assert list(cube_grid(3).scales()) == [0.125] * 9
