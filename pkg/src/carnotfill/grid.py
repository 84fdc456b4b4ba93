"""Nested anisotropic cubical chain complexes at dyadic scales.

A cell at scale ``i`` is an axis-aligned box spanning ``axes``; along axis ``j``
it occupies ``[corner_j, corner_j + 1)`` in scale-``i`` units, i.e.
``origin_j + corner_j * 2**(i * w_j)`` onward in base units.  A scale-``i+1``
cell is tiled by ``prod_{j in axes} 2**w_j`` scale-``i`` cells.

Chains are sparse maps ``(axes, corner) -> int`` sharing one scale, one
dimension and one grid origin.  The origin records translates of the grid
(the offsets chosen while coarsening); it is in base units.
"""

from __future__ import annotations

import itertools
import json
import random
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

from .carnot import GroupSpec, WeightTable, horizontal_runs, apply_runs, inv

Cell = tuple[tuple[int, ...], tuple[int, ...]]  # (axes, corner)


class ChainError(ValueError):
    pass


class GridCell(NamedTuple):
    scale: int
    axes: tuple[int, ...]
    corner: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.axes)

    def footprint(self, table: WeightTable, origin: tuple[int, ...] | None = None) -> list[tuple[int, int]]:
        """Per-axis ``(lo, hi)`` in base units; ``lo == hi`` for unspanned axes."""
        out = []
        for j, c in enumerate(self.corner):
            size = 1 << (self.scale * table.axis_weights[j])
            lo = (origin[j] if origin else 0) + c * size
            out.append((lo, lo + size) if j in self.axes else (lo, lo))
        return out


class Chain:
    """Integer chain on the scale-``scale`` grid translated by ``origin``."""

    __slots__ = ("table", "scale", "dim", "origin", "coeffs")

    def __init__(self, table: WeightTable, scale: int, dim: int, coeffs=None, origin=None, *, clean=True):
        if scale < 0 or not 0 <= dim <= table.n:
            raise ChainError(f"bad scale/dim {scale}/{dim}")
        self.table = table
        self.scale = scale
        self.dim = dim
        self.origin = tuple(origin) if origin is not None else (0,) * table.n
        coeffs = dict(coeffs or {})
        if clean:
            coeffs = {c: v for c, v in coeffs.items() if v}
        self.coeffs: dict[Cell, int] = coeffs

    # -- construction helpers
    @classmethod
    def zero(cls, table, scale=0, dim=0, origin=None) -> "Chain":
        return cls(table, scale, dim, {}, origin)

    @classmethod
    def from_cells(cls, table, cells: Iterable[GridCell], coeff: int = 1, origin=None) -> "Chain":
        cells = list(cells)
        if not cells:
            raise ChainError("from_cells needs at least one cell")
        scale, dim = cells[0].scale, cells[0].dim
        acc: dict[Cell, int] = defaultdict(int)
        for c in cells:
            if c.scale != scale or c.dim != dim:
                raise ChainError("cells must share scale and dimension")
            _validate_cell(table, c.axes, c.corner)
            acc[(tuple(c.axes), tuple(c.corner))] += coeff
        return cls(table, scale, dim, acc, origin)

    def _like(self, coeffs, **kw) -> "Chain":
        args = dict(table=self.table, scale=self.scale, dim=self.dim, origin=self.origin)
        args.update(kw)
        return Chain(args["table"], args["scale"], args["dim"], coeffs, args["origin"])

    # -- value semantics
    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __len__(self) -> int:
        return len(self.coeffs)

    def __iter__(self) -> Iterator[tuple[GridCell, int]]:
        for (axes, corner), v in self.coeffs.items():
            yield GridCell(self.scale, axes, corner), v

    def __eq__(self, other) -> bool:
        if not isinstance(other, Chain):
            return NotImplemented
        if not self.coeffs and not other.coeffs:
            return True
        if (self.scale, self.dim) != (other.scale, other.dim):
            return False
        if self.origin != other.origin:
            try:
                other = other.rebased(self.origin)
            except ChainError:
                return False
        return self.coeffs == other.coeffs

    def __repr__(self) -> str:
        return f"Chain(scale={self.scale}, dim={self.dim}, cells={len(self.coeffs)}, l1={self.l1()})"

    def _aligned(self, other: "Chain") -> "Chain":
        if not other.coeffs:
            return other
        if not self.coeffs:
            return other
        if (self.scale, self.dim) != (other.scale, other.dim):
            raise ChainError(f"cannot combine scale/dim {self.scale}/{self.dim} with {other.scale}/{other.dim}")
        return other if other.origin == self.origin else other.rebased(self.origin)

    def __add__(self, other: "Chain") -> "Chain":
        if not self.coeffs:
            return other
        other = self._aligned(other)
        acc = dict(self.coeffs)
        for c, v in other.coeffs.items():
            acc[c] = acc.get(c, 0) + v
        return self._like(acc)

    def __neg__(self) -> "Chain":
        return self._like({c: -v for c, v in self.coeffs.items()})

    def __sub__(self, other: "Chain") -> "Chain":
        return self + (-other)

    def __rmul__(self, k: int) -> "Chain":
        return self._like({c: k * v for c, v in self.coeffs.items()})

    # -- geometry
    def rebased(self, origin) -> "Chain":
        """Same chain expressed on the grid translated to ``origin``."""
        origin = tuple(origin)
        shift = []
        for j, (a, b) in enumerate(zip(self.origin, origin)):
            size = 1 << (self.scale * self.table.axis_weights[j])
            q, r = divmod(a - b, size)
            if r:
                raise ChainError(f"origin {origin} is not a scale-{self.scale} grid translate of {self.origin}")
            shift.append(q)
        if not any(shift):
            return self._like(self.coeffs, origin=origin)
        out = {(axes, tuple(c + s for c, s in zip(corner, shift))): v for (axes, corner), v in self.coeffs.items()}
        return self._like(out, origin=origin)

    def cells(self) -> list[GridCell]:
        return [GridCell(self.scale, a, c) for a, c in self.coeffs]

    def l1(self) -> int:
        return sum(abs(v) for v in self.coeffs.values())

    def mass(self) -> int:
        return self.l1() * self.table.cell_weight(self.scale, self.dim)

    def bbox(self) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
        """Bounding box ``(lo, hi)`` of the support in this chain's own cell units."""
        if not self.coeffs:
            return None
        n = self.table.n
        lo = [min(corner[j] for _, corner in self.coeffs) for j in range(n)]
        hi = [max(corner[j] + (j in axes) for axes, corner in self.coeffs) for j in range(n)]
        return tuple(lo), tuple(hi)


def _validate_cell(table: WeightTable, axes, corner) -> None:
    if len(corner) != table.n:
        raise ChainError(f"corner {corner} has wrong length for n={table.n}")
    if list(axes) != sorted(set(axes)) or any(not 0 <= a < table.n for a in axes):
        raise ChainError(f"axes {axes} must be strictly ascending indices")


# ---------------------------------------------------------------- operators


def boundary(c: Chain) -> Chain:
    """Cubical boundary: sum_k (-1)^k (upper_k face - lower_k face) over spanned axes."""
    if c.dim == 0:
        raise ChainError("boundary of a 0-chain is undefined")
    acc: dict[Cell, int] = defaultdict(int)
    for (axes, corner), v in c.coeffs.items():
        for k, a in enumerate(axes):
            fa = axes[:k] + axes[k + 1 :]
            s = v if k % 2 == 0 else -v
            up = corner[:a] + (corner[a] + 1,) + corner[a + 1 :]
            acc[(fa, up)] += s
            acc[(fa, corner)] -= s
    return Chain(c.table, c.scale, c.dim - 1, acc, c.origin)


def is_cycle(c: Chain) -> bool:
    return c.dim == 0 or not boundary(c)


def subdivide(c: Chain) -> Chain:
    """Refine a scale-``i`` chain to scale ``i-1``; each cell splits into prod 2^{w_j} children."""
    if c.scale == 0:
        raise ChainError("cannot subdivide below scale 0")
    ratios = [1 << w for w in c.table.axis_weights]
    acc: dict[Cell, int] = {}
    for (axes, corner), v in c.coeffs.items():
        base = [x * r for x, r in zip(corner, ratios)]
        for t in itertools.product(*(range(ratios[a]) for a in axes)):
            ch = list(base)
            for a, ti in zip(axes, t):
                ch[a] += ti
            acc[(axes, tuple(ch))] = v  # children of distinct parents are distinct
    return Chain(c.table, c.scale - 1, c.dim, acc, c.origin, clean=False)


def subdivide_to(c: Chain, scale: int) -> Chain:
    while c.scale > scale:
        c = subdivide(c)
    if c.scale < scale:
        raise ChainError("cannot subdivide upward")
    return c


def mass(c: Chain) -> int:
    return c.mass()


def l1(c: Chain) -> int:
    return c.l1()


@dataclass
class MultiscaleChain:
    """A formal sum of same-dimension chains living at distinct scales."""

    parts: dict[int, Chain]

    def __post_init__(self):
        self.parts = {s: c for s, c in sorted(self.parts.items()) if c}
        dims = {c.dim for c in self.parts.values()}
        if len(dims) > 1:
            raise ChainError("multiscale parts must share a dimension")
        for s, c in self.parts.items():
            if c.scale != s:
                raise ChainError("part keyed under the wrong scale")

    @property
    def dim(self) -> int | None:
        return next(iter(self.parts.values())).dim if self.parts else None

    def mass(self) -> int:
        return sum(c.mass() for c in self.parts.values())

    def l1(self) -> int:
        return sum(c.l1() for c in self.parts.values())

    def flatten(self, scale: int = 0, origin=None) -> Chain | None:
        """Subdivide every part to ``scale`` and sum (can be large)."""
        acc = None
        for s in sorted(self.parts, reverse=True):
            part = self.parts[s]
            if acc is not None:
                acc = subdivide_to(acc, s)
            acc = part if acc is None else part + acc
        if acc is None:
            return None
        acc = subdivide_to(acc, scale)
        return acc.rebased(origin) if origin is not None else acc

    def boundary(self, scale: int | None = None) -> Chain | None:
        """Boundary of :meth:`flatten` without materialising it.

        Boundaries of the parts are subdivided top-down and accumulated;
        this equals ``boundary(flatten())`` because subdivision is a chain map.
        """
        if not self.parts:
            return None
        target = min(self.parts) if scale is None else scale
        acc = None
        for s in sorted(self.parts, reverse=True):
            b = boundary(self.parts[s])
            if acc is not None:
                acc = subdivide_to(acc, s)
                acc = b + acc
            else:
                acc = b
        return subdivide_to(acc, target)


# ---------------------------------------------------------------- families


def box_boundary(table: WeightTable, extents: tuple[int, ...], scale: int = 0) -> Chain:
    """Boundary of the solid box prod_j [0, extents_j] at the given scale."""
    n = table.n
    acc: dict[Cell, int] = {}
    full = tuple(range(n))
    if any(e <= 0 for e in extents):
        return Chain.zero(table, scale, n - 1)
    for k in range(n):
        fa = full[:k] + full[k + 1 :]
        s = 1 if k % 2 == 0 else -1
        ranges = [range(extents[j]) if j != k else (0,) for j in range(n)]
        for corner in itertools.product(*ranges):
            lower = corner
            upper = corner[:k] + (extents[k],) + corner[k + 1 :]
            acc[(fa, upper)] = s
            acc[(fa, lower)] = -s
    return Chain(table, scale, n - 1, acc)


def solid_box(table: WeightTable, extents: tuple[int, ...], scale: int = 0) -> Chain:
    full = tuple(range(table.n))
    return Chain(table, scale, table.n, {(full, c): 1 for c in itertools.product(*map(range, extents))})


def sphere_extents(table: WeightTable, r: int) -> tuple[int, ...]:
    return tuple(r**w for w in table.axis_weights)


def sphere_cycle(table: WeightTable, r: int) -> Chain:
    """Boundary of the anisotropic box prod_j [0, r^{w_j}], an (n-1)-cycle at scale 0."""
    if r < 1:
        raise ChainError("sphere radius must be >= 1")
    return box_boundary(table, sphere_extents(table, r))


def path_chain(table: WeightTable, group: GroupSpec, runs, start=None) -> Chain:
    """Edge chain traced by a horizontal word, projected to the horizontal grid plane."""
    m1 = group.m1
    p = list(start[:m1]) if start is not None else [0] * m1
    acc: dict[Cell, int] = defaultdict(int)
    pad = (0,) * group.m2
    for axis, sign, count in runs:
        for _ in range(count):
            if sign > 0:
                acc[((axis,), tuple(p) + pad)] += 1
                p[axis] += 1
            else:
                p[axis] -= 1
                acc[((axis,), tuple(p) + pad)] -= 1
    return Chain(table, 0, 1, acc)


def commutator_word_runs(group: GroupSpec, r: int):
    """Closed horizontal word: x^r y^r x^-r y^-r followed by the path realising its inverse."""
    a, b = _first_bracket_pair(group)
    from .carnot import Run

    head = [Run(a, 1, r), Run(b, 1, r), Run(a, -1, r), Run(b, -1, r)]
    end = apply_runs(group, head)
    return head + horizontal_runs(group, inv(group, end))


def commutator_loop(table: WeightTable, group: GroupSpec, r: int) -> Chain:
    """1-cycle of length Theta(r) drawn by the closed commutator word (see README)."""
    if r < 1:
        raise ChainError("loop size must be >= 1")
    return path_chain(table, group, commutator_word_runs(group, r))


def _first_bracket_pair(group: GroupSpec) -> tuple[int, int]:
    for a in range(group.m1):
        for b in range(a + 1, group.m1):
            if any(group.bracket(a, b)):
                return a, b
    raise ChainError("group has no nonzero bracket")


def random_chain(table: WeightTable, dim: int, extent, seed: int, ncells: int = 8, scale: int = 0, maxcoeff: int = 3) -> Chain:
    """Random ``dim``-chain with cells inside prod_j [0, extent_j] (scale units)."""
    n = table.n
    extent = _extent_tuple(extent, n)
    rng = random.Random(seed)
    axis_sets = list(itertools.combinations(range(n), dim))
    acc: dict[Cell, int] = defaultdict(int)
    if any(e <= 0 for e in extent) and dim > 0:
        return Chain.zero(table, scale, dim)
    for _ in range(ncells):
        axes = rng.choice(axis_sets)
        corner = tuple(rng.randrange(0, extent[j] - (j in axes) + 1) for j in range(n))
        if any(corner[j] + 1 > extent[j] for j in axes):
            continue
        acc[(axes, corner)] += rng.choice([-1, 1]) * rng.randint(1, maxcoeff)
    return Chain(table, scale, dim, acc)


def random_cycle(table: WeightTable, dim: int, extent, seed: int, ncells: int = 8, scale: int = 0) -> Chain:
    """Boundary of a random (dim+1)-chain in the box, hence a cycle."""
    if not 0 <= dim < table.n:
        raise ChainError("random_cycle needs 0 <= dim < n")
    n = table.n
    extent = _extent_tuple(extent, n)
    if any(e < 0 for e in extent):
        raise ChainError("box extent must be non-negative")
    if any(e == 0 for e in extent):
        return Chain.zero(table, scale, dim)
    return boundary(random_chain(table, dim + 1, extent, seed, ncells, scale))


def _extent_tuple(extent, n) -> tuple[int, ...]:
    return tuple(extent) if isinstance(extent, (tuple, list)) else (int(extent),) * n


# ---------------------------------------------------------------- files


def chain_lines(c: Chain) -> Iterator[str]:
    with_origin = any(c.origin)
    for (axes, corner), v in sorted(c.coeffs.items()):
        rec = {"scale": c.scale, "dim": c.dim, "axes": list(axes), "corner": list(corner), "coeff": v}
        if with_origin:
            rec["origin"] = list(c.origin)
        yield json.dumps(rec, separators=(",", ":"))


def write_chain(path, c: Chain | MultiscaleChain) -> None:
    parts = c.parts.values() if isinstance(c, MultiscaleChain) else [c]
    with open(path, "w") as fh:
        for part in parts:
            for line in chain_lines(part):
                fh.write(line + "\n")


def _read_records(path) -> list[dict]:
    recs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            for key in ("scale", "dim", "axes", "corner", "coeff"):
                rec[key]
        except (json.JSONDecodeError, KeyError) as exc:
            raise ChainError(f"{path}:{lineno}: malformed cell record ({exc})") from None
        recs.append(rec)
    return recs


def _chain_from_records(table: WeightTable, recs: list[dict]) -> Chain:
    scale, dim = recs[0]["scale"], recs[0]["dim"]
    origin = tuple(recs[0].get("origin", (0,) * table.n))
    acc: dict[Cell, int] = defaultdict(int)
    for rec in recs:
        if rec["scale"] != scale or rec["dim"] != dim:
            raise ChainError("chain file mixes scales or dimensions")
        if tuple(rec.get("origin", (0,) * table.n)) != origin:
            raise ChainError("chain file mixes grid origins within one scale")
        axes, corner = tuple(rec["axes"]), tuple(rec["corner"])
        _validate_cell(table, axes, corner)
        if len(axes) != dim:
            raise ChainError(f"cell {axes} does not have dimension {dim}")
        acc[(axes, corner)] += int(rec["coeff"])
    return Chain(table, scale, dim, acc, origin)


def read_chain(path, table: WeightTable) -> Chain:
    recs = _read_records(path)
    if not recs:
        return Chain.zero(table)
    return _chain_from_records(table, recs)


def read_multiscale(path, table: WeightTable) -> MultiscaleChain:
    recs = _read_records(path)
    by_scale: dict[int, list[dict]] = defaultdict(list)
    for rec in recs:
        by_scale[rec["scale"]].append(rec)
    return MultiscaleChain({s: _chain_from_records(table, rs) for s, rs in by_scale.items()})
