"""Chain homotopy between a fine chain and its subdivided coarse approximation.

``Q`` is built cell by cell, by induction on dimension:

* a vertex ``v`` goes to the monotone lattice path from ``v`` to the coarse
  vertex it is assigned to;
* a ``d``-cell ``t`` goes to ``contract_box(S P(t) - t - Q(boundary t), carrier(t))``.

With ``S`` subdivision and ``P`` the coarsening, ``boundary Q + Q boundary = S P - id``.
``Q`` commutes with translations by whole coarse cells, so it is computed once
per (axis set, position inside the coarse cell) and then translated.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass

from .carnot import WeightTable
from .coarsen import Offset, _check_offset, coarse_cell, coarsen, zero_offset
from .grid import Cell, Chain, ChainError, boundary, subdivide


class HomotopyError(ChainError):
    pass


@dataclass(frozen=True)
class CarrierBox:
    """Closed box ``prod_j [lo_j, hi_j]`` in fine-cell units (``lo_j == hi_j`` allowed)."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def contains(self, axes, corner) -> bool:
        for j, (a, b) in enumerate(zip(self.lo, self.hi)):
            c = corner[j]
            if j in axes:
                if not (a <= c and c + 1 <= b):
                    return False
            elif not a <= c <= b:
                return False
        return True

    def contains_box(self, other: "CarrierBox") -> bool:
        return all(a <= c and d <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))


def carrier(table: WeightTable, axes, corner, offset) -> CarrierBox:
    """Closure of the smallest translated coarse cell containing the fine cell."""
    lo, hi = [], []
    for j in range(table.n):
        r, o, c = table.ratio(j), offset[j], corner[j]
        base = ((c - o) // r) * r + o
        if j not in axes and c == base:
            lo.append(c)
            hi.append(c)
        else:
            lo.append(base)
            hi.append(base + r)
    return CarrierBox(tuple(lo), tuple(hi))


# ---------------------------------------------------------------- contraction


def _contract(coeffs: dict[Cell, int], lo: tuple[int, ...], n: int) -> dict[Cell, int]:
    """Prism contraction of a box complex towards its lower corner.

    H = sum_k eps_0 x ... x eps_{k-1} x h_k x 1, where eps collapses an axis to
    ``lo`` and h_k is the path from ``lo_k`` along axis k.  Satisfies
    boundary H + H boundary = id - eps_all.
    """
    out: dict[Cell, int] = defaultdict(int)
    for (axes, corner), v in coeffs.items():
        first = axes[0] if axes else n
        for k in range(first):
            # prefix axes j < k collapse to lo_j: nonzero only if unspanned (true for j < first)
            ck = corner[k]
            if ck == lo[k]:
                continue
            new_axes = (k,) + axes
            head = lo[:k]
            tail = corner[k + 1 :]
            if ck > lo[k]:
                for t in range(lo[k], ck):
                    out[(new_axes, head + (t,) + tail)] += v
            else:
                for t in range(ck, lo[k]):
                    out[(new_axes, head + (t,) + tail)] -= v
    return out


def contract_box(z: Chain, box: CarrierBox) -> Chain:
    """Filling of a cycle supported in a box, supported in the same box."""
    if z.dim >= z.table.n and z:
        raise HomotopyError("internal error: nonzero top-dimensional cycle in a box")
    for axes, corner in z.coeffs:
        if not box.contains(axes, corner):
            raise HomotopyError(f"cell {(axes, corner)} escapes the box {box}")
    if z.dim == 0:
        if sum(z.coeffs.values()):
            raise HomotopyError("0-chain with nonzero augmentation is not a cycle")
    elif boundary(z):
        raise HomotopyError("input is not a cycle")
    f = Chain(z.table, z.scale, z.dim + 1, _contract(z.coeffs, box.lo, z.table.n), z.origin)
    if boundary(f) != z:
        raise HomotopyError("internal error: contraction failed to fill the cycle")
    return f


# ---------------------------------------------------------------- Q


class HomotopyOperator:
    """P, S P and Q for one fine grid and one coarse offset (fine units, origin-relative)."""

    def __init__(self, table: WeightTable, offset: Offset | None = None, check: bool = True):
        self.table = table
        self.offset = _check_offset(table, offset if offset is not None else zero_offset(table))
        self.check = check
        self._templates: dict[tuple, dict[Cell, int]] = {}

    def _split(self, corner):
        base, res = [], []
        for j, c in enumerate(corner):
            r, o = self.table.ratio(j), self.offset[j]
            b = ((c - o) // r) * r
            base.append(b)
            res.append(c - b)
        return tuple(base), tuple(res)

    def carrier(self, axes, corner) -> CarrierBox:
        return carrier(self.table, axes, corner, self.offset)

    def sp_cell(self, axes, corner) -> dict[Cell, int]:
        """Subdivided coarse image S P(cell), as fine cells."""
        C = coarse_cell(self.table, axes, corner, self.offset)
        if C is None:
            return {}
        base = [self.table.ratio(j) * C[j] + self.offset[j] for j in range(self.table.n)]
        out = {}
        for t in itertools.product(*(range(self.table.ratio(a)) for a in axes)):
            ch = list(base)
            for a, ti in zip(axes, t):
                ch[a] += ti
            out[(axes, tuple(ch))] = 1
        return out

    def q_cell(self, axes, corner) -> dict[Cell, int]:
        axes, corner = tuple(axes), tuple(corner)
        base, res = self._split(corner)
        key = (axes, res)
        tpl = self._templates.get(key)
        if tpl is None:
            tpl = self._build(axes, res)
            self._templates[key] = tpl
        if not any(base):
            return tpl
        return {(a, tuple(x + b for x, b in zip(c, base))): v for (a, c), v in tpl.items()}

    def _build(self, axes, corner) -> dict[Cell, int]:
        n = self.table.n
        if not axes:
            C = coarse_cell(self.table, axes, corner, self.offset)
            target = [self.table.ratio(j) * C[j] + self.offset[j] for j in range(n)]
            return _monotone_path(corner, target)
        rho: dict[Cell, int] = defaultdict(int)
        for c, v in self.sp_cell(axes, corner).items():
            rho[c] += v
        rho[(axes, corner)] -= 1
        for k, a in enumerate(axes):
            fa = axes[:k] + axes[k + 1 :]
            s = 1 if k % 2 == 0 else -1
            up = corner[:a] + (corner[a] + 1,) + corner[a + 1 :]
            for c, v in self.q_cell(fa, up).items():
                rho[c] -= s * v
            for c, v in self.q_cell(fa, corner).items():
                rho[c] += s * v
        rho = {c: v for c, v in rho.items() if v}
        box = self.carrier(axes, corner)
        z = Chain(self.table, 0, len(axes), rho)
        if self.check:
            # contract_box re-checks the cycle condition and support
            return contract_box(z, box).coeffs
        return {c: v for c, v in _contract(rho, box.lo, n).items() if v}

    def apply(self, c: Chain) -> Chain:
        """Q(c) as a (dim+1)-chain on the same fine grid."""
        acc: dict[Cell, int] = defaultdict(int)
        for (axes, corner), v in c.coeffs.items():
            for cell, w in self.q_cell(axes, corner).items():
                acc[cell] += v * w
        return Chain(c.table, c.scale, c.dim + 1, acc, c.origin)


def _monotone_path(start, target) -> dict[Cell, int]:
    out: dict[Cell, int] = {}
    p = list(start)
    for j in range(len(p)):
        while p[j] < target[j]:
            out[((j,), tuple(p))] = 1
            p[j] += 1
        while p[j] > target[j]:
            p[j] -= 1
            out[((j,), tuple(p))] = -1
    return out


@dataclass
class HomotopyStep:
    """One coarsening step with the bridge chain H: boundary(H) = subdivide(alpha_out) - alpha_in."""

    alpha_in: Chain
    offset: Offset
    alpha_out: Chain
    bridge: Chain

    @property
    def bridge_mass(self) -> int:
        return self.bridge.mass()

    def identity_holds(self) -> bool:
        lhs = boundary(self.bridge) if self.bridge.dim > 0 else self.bridge
        rhs = subdivide(self.alpha_out) - self.alpha_in
        return lhs == rhs


def chain_homotopy_Q(alpha: Chain, offset=None, *, check: bool = True, operator: HomotopyOperator | None = None) -> HomotopyStep:
    """Bridge between a cycle and its coarse approximation at ``offset``."""
    table = alpha.table
    offset = _check_offset(table, offset if offset is not None else zero_offset(table))
    if alpha.dim >= table.n:
        raise HomotopyError("top-dimensional chains have no bridge")
    if alpha.dim > 0 and boundary(alpha):
        raise HomotopyError("input is not a cycle")
    op = operator or HomotopyOperator(table, offset, check=check)
    out = coarsen(alpha, offset)
    H = op.apply(alpha)
    step = HomotopyStep(alpha, offset, out, H)
    if check and not step.identity_holds():
        raise HomotopyError("internal error: bridge boundary identity failed")
    return step


_OPERATORS: dict[tuple, HomotopyOperator] = {}


def operator_for(table: WeightTable, offset: Offset) -> HomotopyOperator:
    """Shared unchecked operator per (table, offset); templates are reused across calls."""
    key = (table, tuple(offset))
    op = _OPERATORS.get(key)
    if op is None:
        op = _OPERATORS[key] = HomotopyOperator(table, offset, check=False)
    return op
