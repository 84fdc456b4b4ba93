from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnotfill.carnot import get_group
from carnotfill.coarsen import (
    DualCell,
    all_offsets,
    averaging_constant,
    best_offset,
    coarse_l1_by_offset,
    coarsen,
    dual_mass_sum,
    dual_of,
    intersection_number,
    offset_l1_average,
    zero_offset,
)
from carnotfill.grid import Chain, ChainError, boundary, random_chain, random_cycle, sphere_cycle, subdivide

from .reference import brute_coarsen

H3 = get_group("H3")
H5 = get_group("H5")
T3 = H3.weight_table()
T5 = H5.weight_table()


def small_chains(table, scale=0, extent=6):
    return st.builds(
        lambda d, seed, k: random_chain(table, d, extent, seed, ncells=k, scale=scale),
        st.integers(1, table.n - 1),
        st.integers(0, 10**6),
        st.integers(1, 10),
    )


def test_offset_domain():
    assert len(all_offsets(T3)) == 2 ** T3.kappa
    assert len(all_offsets(T5)) == 2 ** T5.kappa
    assert zero_offset(T3) == (0, 0, 0)


@pytest.mark.parametrize("axes", [(0,), (1, 2), (0, 1, 2), (2,)])
def test_subdivided_cell_meets_its_dual_once(axes):
    coarse = Chain(T3, 1, len(axes), {(axes, (3, -1, 2)): 5})
    fine = subdivide(coarse)
    assert intersection_number(fine, dual_of(T3, axes, (3, -1, 2), zero_offset(T3))) == 5


def test_non_transverse_cells_ignored():
    d = dual_of(T3, (0,), (0, 0, 0), (0, 0, 0))
    c = Chain(T3, 0, 1, {((1,), (0, 0, 0)): 1})
    assert intersection_number(c, d) == 0
    with pytest.raises(ChainError):
        intersection_number(Chain(T3, 0, 2, {((0, 1), (0, 0, 0)): 1}), d)


def test_far_cell_misses_dual():
    d = DualCell(T3, (0, 1), (0, 0, 0), (0, 0, 0))
    c = Chain(T3, 0, 2, {((0, 1), (40, 40, 0)): 1})
    assert intersection_number(c, d) == 0


def test_projection_example():
    coarse = boundary(Chain(T3, 1, 2, {((0, 2), (0, 0, 0)): 1}))
    assert coarsen(subdivide(coarse), zero_offset(T3)) == coarse


def test_square_missing_all_slabs():
    # x-edges sit at odd x, y-edges at odd y: no edge crosses a dual slab at offset 0
    sq = boundary(Chain(T3, 0, 2, {((0, 1), (1, 1, 0)): 1}))
    assert not coarsen(sq, (0, 0, 0))
    assert not brute_coarsen(sq, (0, 0, 0))


def test_zero_chain():
    z = Chain.zero(T3, 0, 1)
    assert not coarsen(z, (1, 0, 2))
    assert offset_l1_average(z) == 0
    o, c = best_offset(z)
    assert o == (0, 0, 0) and not c
    assert averaging_constant(z) is None


def test_dual_mass_sum():
    # H3 edges: duals of x, y, z edges have relative volume 1/2, 1/2, 1/4
    assert dual_mass_sum(T3, 1) == Fraction(5, 4)


@settings(max_examples=150)
@given(st.sampled_from([T3, T5]), st.data())
def test_coarsen_equals_intersection_numbers(table, data):
    c = data.draw(small_chains(table, extent=4))
    o = data.draw(st.sampled_from(all_offsets(table)))
    got = coarsen(c, o)
    # coarse cells are indexed from the coarse grid origin, the fine origin moved by the offset
    assert got.origin == tuple(x + y for x, y in zip(c.origin, o))
    assert got.coeffs == brute_coarsen(c, o)


@settings(max_examples=150)
@given(st.sampled_from([T3, T5]), st.data())
def test_chain_map(table, data):
    c = data.draw(small_chains(table))
    o = data.draw(st.sampled_from(all_offsets(table)))
    assert boundary(coarsen(c, o)) == coarsen(boundary(c), o)


@settings(max_examples=100)
@given(st.sampled_from([T3, T5]), st.data())
def test_projection(table, data):
    c = data.draw(small_chains(table, scale=1, extent=3))
    assert coarsen(subdivide(c), zero_offset(table)) == c


@settings(max_examples=60)
@given(small_chains(T3))
def test_coarsening_contracts_l1(c):
    for o in all_offsets(T3):
        assert coarsen(c, o).l1() <= c.l1()


def test_numpy_offset_scan_matches_direct():
    c = sphere_cycle(T3, 8)
    assert len(c.coeffs) >= 64
    fast = coarse_l1_by_offset(c)
    assert fast == {o: coarsen(c, o).l1() for o in all_offsets(T3)}


def test_average_on_subdivided_cycle():
    C = boundary(random_chain(T3, 2, 4, seed=9, ncells=6, scale=1))
    fine = subdivide(C)
    assert offset_l1_average(fine) <= fine.l1()
    o, out = best_offset(fine)
    assert o == zero_offset(T3) and out == C


@pytest.mark.parametrize("seed", range(5))
def test_best_offset_not_worse_than_mean(seed):
    c = random_cycle(T3, 1, 6, seed=seed, ncells=10)
    _, out = best_offset(c)
    assert out.l1() <= offset_l1_average(c)


def test_sphere_averaging_constant_is_stable():
    vals = [averaging_constant(sphere_cycle(T3, r)) for r in (4, 8, 16)]
    assert max(vals) / min(vals) < 2


def test_offset_validation():
    with pytest.raises(ChainError):
        coarsen(sphere_cycle(T3, 1), (2, 0, 0))
    with pytest.raises(ChainError):
        coarsen(sphere_cycle(T3, 1), (0, 0))


def test_coarse_origin_tracks_offset():
    c = Chain(T3, 0, 1, {((0,), (0, 0, 0)): 1})
    out = coarsen(c, (1, 0, 3))
    assert out.origin == (1, 0, 3) and out.scale == 1
