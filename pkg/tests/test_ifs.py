import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fractalnets.ifs import (
    AffineMap, AmbiguousBoundary, BlowupLimit, BUILTIN_NAMES, IndexOutOfRange, MarginTooLarge,
    Region, SingularMatrix, UnknownName, IteratedFunctionSystem, address_of, builtin_ifs,
    check_assumptions, compose_address, ifs_from_text, ifs_to_text, map_eval, margin_membership,
    membership, min_cell_inradius, rewrite_blocked,
)


def cantor_cells(n):
    """Level-n Cantor intervals by plain interval arithmetic."""
    cells = [(0.0, 1.0)]
    for _ in range(n):
        cells = [c for lo, hi in cells
                 for c in ((lo, lo + (hi - lo) / 3), (hi - (hi - lo) / 3, hi))]
    return cells


def in_cantor(x, n):
    return any(lo - 1e-12 <= x <= hi + 1e-12 for lo, hi in cantor_cells(n))


# affine maps

def test_forward_cantor_right_map():
    f = builtin_ifs("cantor1d").maps[1]
    assert map_eval(f, [0.0])[0] == pytest.approx(2 / 3, abs=1e-15)


def test_inverse_round_trip():
    f = builtin_ifs("cantor1d").maps[1]
    assert map_eval(f, map_eval(f, [0.37]), "inverse")[0] == pytest.approx(0.37, abs=1e-12)


def test_corner_map_fixed_point():
    f = AffineMap(np.eye(2) / 3, [2 / 3, 2 / 3])
    np.testing.assert_allclose(map_eval(f, [1.0, 1.0]), [1.0, 1.0], atol=1e-15)


def test_singular_map_rejected():
    with pytest.raises(SingularMatrix):
        AffineMap([[1.0, 2.0], [2.0, 4.0]], [0, 0]).inverse()


def test_bad_direction():
    with pytest.raises(ValueError):
        map_eval(AffineMap.identity(1), [0.0], "sideways")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4), st.lists(st.floats(-1, 1), min_size=2, max_size=2),
       st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_round_trip_property(entries, offset, x):
    M = np.array(entries).reshape(2, 2)
    if abs(np.linalg.det(M)) < 0.1:
        return
    f = AffineMap(M, offset)
    np.testing.assert_allclose(f.inverse()(f(np.array(x))), x, atol=1e-12 * (1 + np.linalg.cond(M)))


# addresses

def test_empty_address_is_identity():
    f = compose_address(builtin_ifs("cantor2d"), ())
    np.testing.assert_array_equal(f.matrix, np.eye(2))
    np.testing.assert_array_equal(f.offset, [0, 0])


def test_address_one_one():
    f = compose_address(builtin_ifs("cantor1d"), (1, 1))
    assert f.matrix[0, 0] == pytest.approx(1 / 9)
    assert f.offset[0] == pytest.approx(0.0)


def test_address_two_one():
    f = compose_address(builtin_ifs("cantor1d"), (2, 1))
    assert f.matrix[0, 0] == pytest.approx(1 / 9)
    assert f.offset[0] == pytest.approx(6 / 9)
    image = sorted((f(np.array([0.0]))[0], f(np.array([1.0]))[0]))
    assert image == pytest.approx([2 / 3, 2 / 3 + 1 / 9])


def test_address_out_of_range():
    with pytest.raises(IndexOutOfRange):
        compose_address(builtin_ifs("cantor1d"), (1, 3))


# assumptions

@pytest.mark.parametrize("name,r,eps", [
    ("cantor1d", 2, 1 / 3), ("cantor2d", 4, 1 / 3), ("sierpinski", 3, 0.1), ("vicsek", 5, 0.05),
])
def test_builtin_separation(name, r, eps):
    ifs = builtin_ifs(name)
    rep = check_assumptions(ifs)
    assert ifs.r == r
    assert rep.separation == pytest.approx(eps, abs=1e-12)
    assert rep.ok


def test_pentaflake_passes():
    ifs = builtin_ifs("pentaflake")
    assert ifs.r == 5 and ifs.dim == 2
    assert ifs.assumptions.ok and ifs.separation > 0


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_separation_against_sampling(name):
    # sampled pairs of image points can only overestimate the true distance
    ifs = builtin_ifs(name)
    rng = np.random.default_rng(0)
    U = rng.random((4000, ifs.dim))
    best = np.inf
    for f, g in itertools.combinations(ifs.unit_maps, 2):
        A, B = f(U), g(U)
        for k in range(0, 4000, 500):
            dist = np.linalg.norm(A[k:k + 500, None] - B[None, :], axis=2)
            best = min(best, dist.min())
    assert ifs.separation <= best + 1e-12
    assert best - ifs.separation < 0.02


def test_overlapping_images_flagged():
    ifs = IteratedFunctionSystem([AffineMap([[0.6]], [0.0]), AffineMap([[0.6]], [0.4])])
    rep = check_assumptions(ifs)
    assert rep.separation == 0 and not rep.ok


def test_three_dimensional_separation():
    third = 1 / 3
    maps = [AffineMap(np.eye(3) * third, [0, 0, 0]), AffineMap(np.eye(3) * third, [2 * third, 0, 0])]
    ifs = IteratedFunctionSystem(maps)
    assert ifs.separation == pytest.approx(1 / 3, abs=1e-9)


def test_unknown_name():
    with pytest.raises(UnknownName):
        builtin_ifs("koch")


# membership and addresses

def test_membership_examples():
    c1, c2 = builtin_ifs("cantor1d"), builtin_ifs("cantor2d")
    assert not membership(c1, 0.5, 1)
    assert all(membership(c1, 1 / 3, n) for n in range(8))
    assert not membership(c2, [0.5, 0.5], 1)


def test_membership_matches_interval_oracle():
    ifs = builtin_ifs("cantor1d")
    x = np.random.default_rng(1).random(3000)
    for n in (1, 2, 4):
        expect = np.array([in_cantor(v, n) for v in x])
        np.testing.assert_array_equal(membership(ifs, x[:, None], n), expect)


def test_address_examples():
    ifs = builtin_ifs("cantor1d")
    assert address_of(ifs, 0.1, 2) == (1, 1)
    assert address_of(ifs, 0.5, 1) is None
    assert address_of(ifs, 0.7, 2) == (2, 1)


def test_ambiguous_boundary():
    ifs = IteratedFunctionSystem([AffineMap([[0.5]], [0.0]), AffineMap([[0.5]], [0.5])])
    with pytest.raises(AmbiguousBoundary):
        address_of(ifs, 0.5, 1)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_nesting_and_address_consistency(name):
    ifs = builtin_ifs(name)
    X = np.random.default_rng(2).random((2000, ifs.dim))
    inside = [membership(ifs, X, n) for n in range(4)]
    for m in range(3):
        assert np.all(~inside[m + 1] | inside[m])
    for x, ok in zip(X[:300], inside[3][:300]):
        addr = address_of(ifs, x, 3)
        assert (addr is not None) == ok
        if addr:
            u = compose_address(ifs, addr).inverse()(x)
            assert np.all(u >= -1e-9) and np.all(u <= 1 + 1e-9)


# margins

def test_margin_examples():
    ifs = builtin_ifs("cantor1d")
    assert margin_membership(ifs, 1 / 6, 1, 0.01) == Region.INSIDE_WITH_MARGIN
    assert margin_membership(ifs, 1 / 3, 1, 0.01) == Region.BOUNDARY_BAND
    assert margin_membership(ifs, 0.5, 1, 0.01) == Region.OUTSIDE


def test_margin_matches_interval_oracle():
    ifs = builtin_ifs("cantor1d")
    n, g = 3, 0.005
    x = np.random.default_rng(3).random(5000)
    got = margin_membership(ifs, x[:, None], n, g)
    for v, r in zip(x, got):
        deep = any(lo + g <= v <= hi - g for lo, hi in cantor_cells(n))
        inside = in_cantor(v, n)
        expect = Region.INSIDE_WITH_MARGIN if deep else (Region.BOUNDARY_BAND if inside else Region.OUTSIDE)
        if abs(min(min(abs(v - lo - g), abs(v - hi + g)) for lo, hi in cantor_cells(n))) > 1e-12:
            assert r == expect


def test_margin_cap():
    ifs = builtin_ifs("cantor1d")
    assert min_cell_inradius(ifs, 2) == pytest.approx(1 / 18)
    with pytest.raises(MarginTooLarge):
        margin_membership(ifs, 0.1, 2, 0.06)
    with pytest.raises(MarginTooLarge):
        margin_membership(ifs, 0.1, 2, 0.0)


def test_inradius_bound_for_large_levels():
    # above the enumeration cap the similitude bound is used; it is exact here
    assert min_cell_inradius(builtin_ifs("cantor2d"), 7) == pytest.approx(0.5 * 3.0 ** -7)


# blocking and text form

def test_blocked_identity_and_scale():
    ifs = builtin_ifs("cantor1d")
    assert rewrite_blocked(ifs, 1) is ifs
    b = rewrite_blocked(ifs, 2)
    assert b.r == 4
    assert all(m.matrix[0, 0] == pytest.approx(1 / 9) for m in b.maps)


@pytest.mark.parametrize("name", ["cantor1d", "cantor2d", "vicsek"])
def test_blocked_level_equivalence(name):
    ifs = builtin_ifs(name)
    X = np.random.default_rng(4).random((1000, ifs.dim))
    np.testing.assert_array_equal(membership(ifs, X, 4), membership(rewrite_blocked(ifs, 2), X, 2))


def test_blowup_cap():
    with pytest.raises(BlowupLimit):
        rewrite_blocked(builtin_ifs("vicsek"), 6)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_text_round_trip(name):
    ifs = builtin_ifs(name)
    back = ifs_from_text(ifs_to_text(ifs))
    for f, g in zip(ifs.maps, back.maps):
        np.testing.assert_array_equal(f.matrix, g.matrix)
        np.testing.assert_array_equal(f.offset, g.offset)


def test_nonunit_base_box():
    # the same Cantor system written on [-1, 1]
    maps = [AffineMap([[1 / 3]], [-2 / 3]), AffineMap([[1 / 3]], [2 / 3])]
    ifs = IteratedFunctionSystem(maps, base_box=(-1.0, 1.0))
    assert ifs.separation == pytest.approx(1 / 3)
    assert membership(ifs, -1 / 3, 3) and not membership(ifs, 0.0, 1)
    assert margin_membership(ifs, -2 / 3, 1, 0.05) == Region.INSIDE_WITH_MARGIN
