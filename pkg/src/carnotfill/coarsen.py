"""Approximation of fine chains on the next coarser (translated) grid.

The coarse grid at scale ``i+1`` is translated against the fine grid by an
offset ``o`` with ``0 <= o_j < R_j = 2**w_j`` fine cells per axis.  A coarse
cell ``sigma`` spanning ``A`` has a dual box spanning the complementary axes,
centred on ``sigma``'s centre and one coarse cell wide.  The coefficient of
``sigma`` in the approximation is the intersection number of the fine chain
with that dual.

Duals are pushed by a fixed ``-epsilon`` in every coordinate (a generic
translate).  In fine units, with ``h = R/2``, this gives

* a fine cell along a spanned axis ``j`` (edge ``[c, c+1]``) crosses the dual
  iff ``c + 1 == center_j``;
* a fine cell's fixed coordinate ``p`` along an unspanned axis lies in the dual
  iff ``center_j - h <= p < center_j + h``.

Both rules are products of 1-dimensional chain maps, so the operator commutes
with the boundary and fixes subdivided coarse chains at offset zero.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .carnot import WeightTable
from .grid import Chain, ChainError

Offset = tuple[int, ...]


def all_offsets(table: WeightTable) -> list[Offset]:
    """Every grid translate, in lexicographic order (2**kappa of them)."""
    return list(itertools.product(*(range(table.ratio(j)) for j in range(table.n))))


def zero_offset(table: WeightTable) -> Offset:
    return (0,) * table.n


def _check_offset(table: WeightTable, offset) -> Offset:
    offset = tuple(offset)
    if len(offset) != table.n or any(not 0 <= o < table.ratio(j) for j, o in enumerate(offset)):
        raise ChainError(f"offset {offset} outside the fundamental domain")
    return offset


def coarse_origin(c: Chain, offset: Offset) -> tuple[int, ...]:
    return tuple(org + (o << (c.scale * w)) for org, o, w in zip(c.origin, offset, c.table.axis_weights))


# ---------------------------------------------------------------- duals


@dataclass(frozen=True)
class DualCell:
    """Dual box of the coarse cell ``(axes, corner)`` for one offset.

    Coordinates are fine-grid units relative to the fine chain's origin.
    """

    table: WeightTable
    axes: tuple[int, ...]
    corner: tuple[int, ...]
    offset: Offset

    @property
    def dim(self) -> int:
        return self.table.n - len(self.axes)

    def center(self) -> tuple[int, ...]:
        out = []
        for j, (cj, oj) in enumerate(zip(self.corner, self.offset)):
            r = self.table.ratio(j)
            out.append(r * cj + oj + (r // 2 if j in self.axes else 0))
        return tuple(out)

    def footprint(self) -> list[tuple[int, int]]:
        """Half-open ``[lo, hi)`` per complementary axis; ``(center, center)`` along spanned ones."""
        out = []
        for j, m in enumerate(self.center()):
            h = self.table.ratio(j) // 2
            out.append((m, m) if j in self.axes else (m - h, m + h))
        return out

    def meets(self, axes, corner) -> bool:
        """Whether the fine cell ``(axes, corner)`` crosses this dual (after the -epsilon push)."""
        if tuple(axes) != self.axes:
            return False
        for j, (lo, hi) in enumerate(self.footprint()):
            c = corner[j]
            if j in self.axes:
                # plane at lo - eps strictly inside (c, c + 1)
                if not (c, 0) < (lo, -1) < (c + 1, 0):
                    return False
            elif not (lo, -1) <= (c, 0) < (hi, -1):
                return False
        return True


def dual_of(table: WeightTable, axes, corner, offset) -> DualCell:
    return DualCell(table, tuple(axes), tuple(corner), _check_offset(table, offset))


def intersection_number(c: Chain, dual: DualCell, offset=None) -> int:
    """Signed count of fine cells of ``c`` crossing ``dual`` (all orientations standard)."""
    if offset is not None and tuple(offset) != dual.offset:
        raise ChainError("offset does not match the dual cell")
    if c.dim + dual.dim != c.table.n:
        raise ChainError(f"dimension mismatch: {c.dim} + {dual.dim} != {c.table.n}")
    return sum(v for (axes, corner), v in c.coeffs.items() if dual.meets(axes, corner))


def dual_mass_sum(table: WeightTable, d: int) -> Fraction:
    """Sum over coarse cell types (axis sets) of dual volume / fundamental-domain volume."""
    w = table.axis_weights
    return sum(
        (Fraction(1, 2 ** sum(w[j] for j in A)) for A in itertools.combinations(range(table.n), d)),
        Fraction(0),
    )


# ---------------------------------------------------------------- operator P


def _axis_maps(table: WeightTable, offset: Offset):
    return [(table.ratio(j), table.ratio(j) // 2, offset[j]) for j in range(table.n)]


def coarse_cell(table: WeightTable, axes, corner, offset) -> tuple[int, ...] | None:
    """Corner of the coarse cell a fine cell is sent to, or None if it misses every dual."""
    out = []
    for j, (r, h, o) in enumerate(_axis_maps(table, offset)):
        cj = corner[j]
        if j in axes:
            q, rem = divmod(cj - o - h + 1, r)
            if rem:
                return None
            out.append(q)
        else:
            out.append((cj - o + h) // r)
    return tuple(out)


def coarsen(c: Chain, offset=None) -> Chain:
    """Approximate a scale-i chain on the scale-(i+1) grid translated by ``offset``."""
    table = c.table
    offset = _check_offset(table, offset if offset is not None else zero_offset(table))
    maps = _axis_maps(table, offset)
    acc: dict = {}
    for (axes, corner), v in c.coeffs.items():
        out = []
        for j, (r, h, o) in enumerate(maps):
            cj = corner[j]
            if j in axes:
                q, rem = divmod(cj - o - h + 1, r)
                if rem:
                    break
                out.append(q)
            else:
                out.append((cj - o + h) // r)
        else:
            key = (axes, tuple(out))
            acc[key] = acc.get(key, 0) + v
    return Chain(table, c.scale + 1, c.dim, acc, coarse_origin(c, offset))


class _Arrays:
    """Columnar copy of a chain grouped by axis set, for fast offset scans."""

    def __init__(self, c: Chain):
        groups: dict = {}
        for (axes, corner), v in c.coeffs.items():
            groups.setdefault(axes, ([], []))
            groups[axes][0].append(corner)
            groups[axes][1].append(v)
        self.groups = {a: (np.asarray(cs, dtype=np.int64).reshape(-1, c.table.n), np.asarray(vs, dtype=np.int64)) for a, (cs, vs) in groups.items()}

    def coarse_l1(self, table: WeightTable, offset: Offset) -> int:
        total = 0
        for axes, (corners, vals) in self.groups.items():
            keep = np.ones(len(vals), dtype=bool)
            cols = []
            for j, (r, h, o) in enumerate(_axis_maps(table, offset)):
                if j in axes:
                    t = corners[:, j] - (o + h - 1)
                    keep &= (t % r) == 0
                    cols.append(t // r)
                else:
                    cols.append((corners[:, j] - o + h) // r)
            if not keep.any():
                continue
            key = np.stack(cols, axis=1)[keep]
            v = vals[keep]
            _, inverse = np.unique(key, axis=0, return_inverse=True)
            sums = np.bincount(inverse.ravel(), weights=v, minlength=inverse.max() + 1)
            total += int(np.abs(sums).sum())
        return total


def coarse_l1_by_offset(c: Chain) -> dict[Offset, int]:
    """l1 norm of ``coarsen(c, o)`` for every offset ``o``."""
    offsets = all_offsets(c.table)
    if not c.coeffs:
        return {o: 0 for o in offsets}
    if len(c.coeffs) < 64:
        return {o: coarsen(c, o).l1() for o in offsets}
    arrays = _Arrays(c)
    return {o: arrays.coarse_l1(c.table, o) for o in offsets}


def offset_l1_average(c: Chain, d: int | None = None) -> Fraction:
    """Exact mean of ``l1(coarsen(c, o))`` over the whole offset domain."""
    if d is not None and d != c.dim:
        raise ChainError(f"chain has dimension {c.dim}, not {d}")
    vals = coarse_l1_by_offset(c)
    return Fraction(sum(vals.values()), len(vals))


def averaging_constant(c: Chain) -> Fraction | None:
    """c_avg = mean coarse l1 / (l1(c) * dual_mass_sum); None for the zero chain."""
    if not c.coeffs:
        return None
    return offset_l1_average(c) / (c.l1() * dual_mass_sum(c.table, c.dim))


def best_offset(c: Chain) -> tuple[Offset, Chain]:
    """Offset minimising the coarse l1 norm; ties go to the lexicographically first."""
    vals = coarse_l1_by_offset(c)
    best = min(vals, key=lambda o: (vals[o], o))
    return best, coarsen(c, best)
