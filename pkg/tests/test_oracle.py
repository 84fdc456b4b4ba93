from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnotfill.carnot import get_group
from carnotfill.filling import multiscale_fill
from carnotfill.grid import Chain, boundary, commutator_loop, random_chain, random_cycle, sphere_cycle
from carnotfill.oracle import (
    OracleError,
    WindowComplex,
    WindowTooLarge,
    certify_dual,
    intersection_constant,
    minimal_filling_lp,
    translate_intersection_sum,
    unique_top_filling,
)

from .reference import box_volume_filling, brute_translate_sum, dense_boundary

H3 = get_group("H3")
H5 = get_group("H5")
T3 = H3.weight_table()
T5 = H5.weight_table()


def test_window_boundary_matrix_matches_reference():
    W = WindowComplex(T3, (0, 0, 0), (2, 2, 3))
    D = W.boundary_matrix(2).toarray()
    rows = W.index(1)
    for col, cell in enumerate(W.cells(2)):
        expected = np.zeros(len(rows), dtype=np.int64)
        for c, v in dense_boundary({cell: 1}).items():
            expected[rows[c]] = v
        assert np.array_equal(D[:, col], expected)
    assert not (W.boundary_matrix(1) @ W.boundary_matrix(2)).count_nonzero()


@pytest.mark.parametrize("method", ["exact", "highs"])
def test_lp_boundary_of_one_cell(method):
    cell = Chain(T3, 0, 2, {((0, 2), (1, 0, 1)): 1})
    res = minimal_filling_lp(boundary(cell), method=method)
    assert res.lower_bound == 1 and res.optimal
    assert res.filling == cell


def test_lp_zero():
    res = minimal_filling_lp(Chain.zero(T3, 0, 1))
    assert res.lower_bound == 0 and res.filling_mass == 0


@pytest.mark.parametrize("r,expected", [(1, 2), (2, 8)])
def test_lp_commutator_vs_construction(r, expected):
    loop = commutator_loop(T3, H3, r)
    W = WindowComplex.around(loop, pad=1)
    assert all(s <= lim for s, lim in zip(W.shape, (6, 6, 12)))
    res = minimal_filling_lp(loop, W)
    assert res.optimal and res.lower_bound == expected
    _, report = multiscale_fill(loop)
    assert res.lower_bound <= report.total_mass <= 20 * res.lower_bound


@settings(max_examples=15)
@given(st.integers(0, 10**6))
def test_exact_and_highs_agree(seed):
    z = random_cycle(T3, 1, (2, 2, 3), seed=seed, ncells=4)
    if not z:
        return
    W = WindowComplex(T3, (0, 0, 0), (2, 2, 3))
    a = minimal_filling_lp(z, W, method="exact")
    b = minimal_filling_lp(z, W, method="highs")
    assert a.lower_bound == b.lower_bound
    assert a.optimal and b.optimal


@settings(max_examples=15)
@given(st.integers(0, 10**6))
def test_dual_certificate_is_a_valid_bound(seed):
    z = random_cycle(T3, 1, (3, 3, 4), seed=seed, ncells=5)
    if not z:
        return
    W = WindowComplex(T3, (0, 0, 0), (3, 3, 4))
    res = minimal_filling_lp(z, W)
    # any filling in the window, e.g. the integral one found, bounds it from above
    assert res.filling is not None and boundary(res.filling) == z
    assert certify_dual(W, z, res.dual) == res.lower_bound <= res.filling_mass


def test_lp_cap_and_support_errors():
    loop = commutator_loop(T3, H3, 2)
    with pytest.raises(WindowTooLarge):
        minimal_filling_lp(loop, cap=10)
    with pytest.raises(OracleError):
        minimal_filling_lp(loop, WindowComplex(T3, (0, 0, 0), (1, 1, 1)))
    with pytest.raises(OracleError):
        minimal_filling_lp(Chain(T3, 0, 1, {((0,), (0, 0, 0)): 1}))


@pytest.mark.parametrize("r", [2, 4, 8])
def test_unique_top_filling_spheres(r):
    b = unique_top_filling(sphere_cycle(T3, r))
    assert b.coeffs == box_volume_filling((r, r, r * r))
    assert b.mass() == r**4


def test_unique_top_filling_zero_and_h5():
    assert not unique_top_filling(Chain.zero(T3, 0, 2))
    b = unique_top_filling(sphere_cycle(T5, 2))
    assert b.mass() == 2**4 * 4


@settings(max_examples=100)
@given(st.integers(0, 10**6), st.integers(1, 20))
def test_unique_top_filling_roundtrip(seed, k):
    top = random_chain(T3, 3, (4, 3, 5), seed=seed, ncells=k)
    got = unique_top_filling(boundary(top))
    assert got == top


def test_unique_top_filling_rejects_non_cycle():
    with pytest.raises(OracleError):
        unique_top_filling(Chain(T3, 0, 2, {((0, 1), (0, 0, 0)): 1}))


def test_translate_sum_examples():
    vertex = Chain(T3, 0, 0, {((), (0, 0, 0)): 1})
    cube = Chain(T3, 0, 3, {((0, 1, 2), (0, 0, 0)): 1})
    assert translate_intersection_sum(vertex, cube) == 1
    xedge = Chain(T3, 0, 1, {((0,), (0, 0, 0)): 1})
    yz = Chain(T3, 0, 2, {((1, 2), (0, 0, 0)): 1})
    assert translate_intersection_sum(xedge, yz) == 1
    assert translate_intersection_sum(Chain.zero(T3, 0, 1), yz) == 0
    assert intersection_constant(Chain.zero(T3, 0, 1), yz) is None
    with pytest.raises(OracleError):
        translate_intersection_sum(xedge, xedge)


@settings(max_examples=100)
@given(st.integers(1, 2), st.integers(0, 10**6), st.integers(0, 10**6))
def test_translate_sum_matches_enumeration(d, s1, s2):
    a = random_chain(T3, d, 2, seed=s1, ncells=3)
    b = random_chain(T3, 3 - d, 2, seed=s2, ncells=3)
    if not a or not b:
        return
    total = translate_intersection_sum(a, b)
    assert total == brute_translate_sum(a, b)
    assert total <= a.l1() * b.l1()  # the c_cap bound, with constant 1 at unit scale


def test_intersection_constant_value():
    a = Chain(T3, 0, 1, {((0,), (0, 0, 0)): 2})
    b = Chain(T3, 0, 2, {((1, 2), (0, 0, 0)): 3})
    assert intersection_constant(a, b) == Fraction(6, 6)
