"""Exact integer arithmetic in step-2 Carnot groups.

Points are integer tuples ``(x1..., x2...)`` in exponential coordinates adapted
to the grading; the product is

    p * q = (x1 + y1, x2 + y2 + beta(x1, y1))

for an integer bilinear form ``beta``.  Because everything is integral, the
integer points form the lattice and all operations stay exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

Point = tuple[int, ...]


class GroupError(ValueError):
    pass


class GeneratorStep(NamedTuple):
    axis: int
    sign: int

    def label(self) -> str:
        return f"{self.axis}{'+' if self.sign > 0 else '-'}"


@dataclass(frozen=True)
class GroupSpec:
    """A step-2 graded group with ``m1`` horizontal and ``m2`` vertical coordinates.

    ``beta`` is a sparse list of ``(i, j, k, value)`` entries meaning
    ``beta(e_i, e_j)`` has ``value`` in vertical coordinate ``k``.
    """

    name: str
    m1: int
    m2: int
    beta: tuple[tuple[int, int, int, int], ...]
    k_override: tuple[tuple[int, int], ...] = ()
    _tensor: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.m2 < 1 or self.m1 < 1 or self.m1 + self.m2 < 3:
            raise GroupError(f"need m1 >= 1, m2 >= 1 and m1 + m2 >= 3, got m1={self.m1} m2={self.m2}")
        tensor: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for i, j, k, v in self.beta:
            if not (0 <= i < self.m1 and 0 <= j < self.m1 and 0 <= k < self.m2):
                raise GroupError(f"beta entry {(i, j, k, v)} out of range")
            if v:
                tensor.setdefault((i, j), []).append((k, v))
        object.__setattr__(self, "_tensor", tensor)
        if _bracket_lattice_basis(self) is None:
            raise GroupError(f"{self.name}: brackets do not generate the integer vertical lattice")

    @property
    def n(self) -> int:
        return self.m1 + self.m2

    @property
    def identity(self) -> Point:
        return (0,) * self.n

    @property
    def axis_weights(self) -> tuple[int, ...]:
        return (1,) * self.m1 + (2,) * self.m2

    @property
    def kappa(self) -> int:
        return self.m1 + 2 * self.m2

    def beta_apply(self, x: Sequence[int], y: Sequence[int]) -> list[int]:
        out = [0] * self.m2
        for (i, j), entries in self._tensor.items():
            xy = x[i] * y[j]
            if xy:
                for k, v in entries:
                    out[k] += v * xy
        return out

    def bracket(self, a: int, b: int) -> tuple[int, ...]:
        """Vertical vector ``[e_a, e_b] = beta(e_a, e_b) - beta(e_b, e_a)``."""
        out = [0] * self.m2
        for k, v in self._tensor.get((a, b), ()):
            out[k] += v
        for k, v in self._tensor.get((b, a), ()):
            out[k] -= v
        return tuple(out)

    def is_heisenberg(self) -> bool:
        if self.m2 != 1 or self.m1 % 2:
            return False
        form = [[self.bracket(a, b)[0] for b in range(self.m1)] for a in range(self.m1)]
        return _integer_det(form) != 0

    def weight_table(self) -> "WeightTable":
        return WeightTable.for_group(self)

    def to_json(self) -> dict:
        out = {"name": self.name, "m1": self.m1, "m2": self.m2, "beta": [list(e) for e in self.beta]}
        if self.k_override:
            out["k"] = {str(d): k for d, k in self.k_override}
        return out

    @classmethod
    def from_json(cls, data: dict) -> "GroupSpec":
        try:
            beta = tuple(tuple(int(v) for v in e) for e in data["beta"])
            if any(len(e) != 4 for e in beta):
                raise GroupError("beta entries must be (i, j, k, value)")
            k = tuple(sorted((int(d), int(v)) for d, v in data.get("k", {}).items()))
            return cls(str(data.get("name", "custom")), int(data["m1"]), int(data["m2"]), beta, k)
        except KeyError as exc:
            raise GroupError(f"group file missing field {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "GroupSpec":
        return cls.from_json(json.loads(Path(path).read_text()))


def heisenberg(n: int) -> GroupSpec:
    """H_{2n+1} with coordinates (x1, y1, ..., xn, yn, z) and beta(e_x_i, e_y_i) = e_z."""
    beta = tuple((2 * i, 2 * i + 1, 0, 1) for i in range(n))
    return GroupSpec(f"H{2 * n + 1}", 2 * n, 1, beta)


PRESETS = {"H3": lambda: heisenberg(1), "H5": lambda: heisenberg(2), "H7": lambda: heisenberg(3)}


def get_group(name_or_path: str) -> GroupSpec:
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]()
    path = Path(name_or_path)
    if path.exists():
        return GroupSpec.load(path)
    raise GroupError(f"unknown group preset or file: {name_or_path!r}")


@dataclass(frozen=True)
class WeightTable:
    """Per-dimension mass exponents ``k(d)`` together with axis weights and kappa."""

    axis_weights: tuple[int, ...]
    k: tuple[int, ...]  # k[d] for d = 0..n; k[0] = 0
    kappa: int

    def __post_init__(self):
        n = len(self.axis_weights)
        if len(self.k) != n + 1:
            raise GroupError("k table must cover dimensions 0..n")
        if self.kappa != sum(self.axis_weights):
            raise GroupError("kappa must equal the sum of axis weights")
        if self.k[n] != self.kappa:
            raise GroupError("k(n) must equal kappa")
        if any(self.k[d] > self.k[d + 1] for d in range(n)):
            raise GroupError(f"k must be nondecreasing, got {self.k}")
        if any(self.k[d] < d for d in range(n + 1)):
            raise GroupError(f"k(d) >= d required, got {self.k}")

    @property
    def n(self) -> int:
        return len(self.axis_weights)

    def ratio(self, axis: int) -> int:
        return 1 << self.axis_weights[axis]

    def cell_weight(self, scale: int, dim: int) -> int:
        return 1 << (scale * self.k[dim])

    def subdivision_ratio(self, axes: Iterable[int]) -> Fraction:
        """mass(subdivide(cell)) / mass(cell) for a cell spanning ``axes``."""
        axes = tuple(axes)
        return Fraction(2) ** (sum(self.axis_weights[j] for j in axes) - self.k[len(axes)])

    @classmethod
    def for_group(cls, group: GroupSpec) -> "WeightTable":
        n, kappa = group.n, group.kappa
        w = group.axis_weights
        if group.is_heisenberg():
            half = group.m1 // 2
            k = [0] + [d if d <= half else d + 1 for d in range(1, n + 1)]
        else:
            # worst-case Euclidean scaling of a d-cell: heaviest d axes
            heavy = sorted(w, reverse=True)
            k = [sum(heavy[:d]) for d in range(n + 1)]
            k[1] = 1
            k[n - 1] = kappa - 1
        for d, v in group.k_override:
            k[d] = v
        return cls(w, tuple(k), kappa)


# ---------------------------------------------------------------- group law


def _check(group: GroupSpec, *points: Sequence[int]) -> None:
    for p in points:
        if len(p) != group.n:
            raise GroupError(f"point {tuple(p)} does not belong to {group.name} (dimension {group.n})")


def mul(group: GroupSpec, p: Sequence[int], q: Sequence[int]) -> Point:
    _check(group, p, q)
    m1 = group.m1
    b = group.beta_apply(p[:m1], q[:m1])
    return tuple(p[j] + q[j] for j in range(m1)) + tuple(p[m1 + k] + q[m1 + k] + b[k] for k in range(group.m2))


def inv(group: GroupSpec, p: Sequence[int]) -> Point:
    _check(group, p)
    m1 = group.m1
    x1 = p[:m1]
    b = group.beta_apply(x1, x1)
    return tuple(-v for v in x1) + tuple(b[k] - p[m1 + k] for k in range(group.m2))


def scale(group: GroupSpec, i: int, p: Sequence[int]) -> Point:
    """Dyadic dilation s_{2^i}: weight-w coordinates are multiplied by 2^{i w}."""
    if i < 0:
        raise GroupError("only non-negative dyadic exponents keep the lattice invariant")
    _check(group, p)
    return tuple(v << (i * w) for v, w in zip(p, group.axis_weights))


def quasi_norm(group: GroupSpec, p: Sequence[int]) -> int:
    """max(|x1|_inf, ceil(sqrt(|x2|_inf))), a homogeneous quasi-norm in integers."""
    _check(group, p)
    h = max((abs(v) for v in p[: group.m1]), default=0)
    v = max((abs(v) for v in p[group.m1 :]), default=0)
    return max(h, _ceil_sqrt(v))


def _ceil_sqrt(v: int) -> int:
    return 0 if v <= 0 else math.isqrt(v - 1) + 1


class Run(NamedTuple):
    """``count`` consecutive copies of one generator step."""

    axis: int
    sign: int
    count: int


def _runs_of(steps: Iterable[GeneratorStep]) -> list[Run]:
    runs: list[Run] = []
    for axis, sign in steps:
        if runs and runs[-1].axis == axis and runs[-1].sign == sign:
            runs[-1] = Run(axis, sign, runs[-1].count + 1)
        else:
            runs.append(Run(axis, sign, 1))
    return runs


def apply_runs(group: GroupSpec, runs: Iterable[Run], start: Sequence[int] | None = None) -> Point:
    """Right-multiply ``start`` by each run ``e_axis^(sign*count)`` in closed form."""
    p = list(start) if start is not None else list(group.identity)
    m1 = group.m1
    for axis, sign, count in runs:
        # e^m = (m e, beta(e, e) m(m-1)/2) for the unit generator e
        e = [0] * m1
        e[axis] = sign
        b_pe = group.beta_apply(p[:m1], e)
        b_ee = group.beta_apply(e, e)
        tri = count * (count - 1) // 2
        p[axis] += sign * count
        for k in range(group.m2):
            p[m1 + k] += count * b_pe[k] + tri * b_ee[k]
    return tuple(p)


def apply_steps(group: GroupSpec, steps: Iterable[GeneratorStep], start: Sequence[int] | None = None) -> Point:
    return apply_runs(group, _runs_of(steps), start)


def path_vertices(group: GroupSpec, steps: Sequence[GeneratorStep], start: Sequence[int] | None = None) -> list[Point]:
    pts = [tuple(start) if start is not None else group.identity]
    for s in steps:
        pts.append(apply_runs(group, [Run(s.axis, s.sign, 1)], pts[-1]))
    return pts


def _rect(a: int, b: int, p: int, q: int, mirrored: bool) -> list[Run]:
    """Commutator loop [a^p, b^q] (signed area +pq), or its mirror image (-pq)."""
    sa = -1 if mirrored else 1
    return [Run(a, sa, p), Run(b, 1, q), Run(a, -sa, p), Run(b, -1, q)]


def commutator_runs(a: int, b: int, amount: int) -> list[Run]:
    """Loops on generators a, b whose net effect is ``amount * [e_a, e_b]``.

    One square of side ceil(sqrt|amount|) overshoots by e >= 0; the overshoot is
    removed with at most two thin rectangles of the opposite orientation.
    """
    if amount == 0:
        return []
    mirrored = amount < 0
    r = abs(amount)
    s = _ceil_sqrt(r)
    runs = _rect(a, b, s, s, mirrored)
    q, t = divmod(s * s - r, s)
    if q:
        runs += _rect(a, b, s, q, not mirrored)
    if t:
        runs += _rect(a, b, 1, t, not mirrored)
    return runs


def horizontal_runs(group: GroupSpec, p: Sequence[int]) -> list[Run]:
    """Run-length form of :func:`horizontal_path`."""
    _check(group, p)
    m1 = group.m1
    runs = [Run(a, 1 if p[a] > 0 else -1, abs(p[a])) for a in range(m1) if p[a]]
    reached = apply_runs(group, runs)
    residual = [p[m1 + k] - reached[m1 + k] for k in range(group.m2)]
    if any(residual):
        pairs, basis = _bracket_lattice_basis(group)
        # residual = sum_k residual_k e_k = sum_k residual_k sum_j basis[k][j] [pair_j]
        coeff = [sum(residual[k] * basis[k][j] for k in range(group.m2)) for j in range(len(pairs))]
        for (a, b), c in zip(pairs, coeff):
            runs += commutator_runs(a, b, c)
    return runs


def horizontal_path(group: GroupSpec, p: Sequence[int]) -> list[GeneratorStep]:
    """Word in unit horizontal generators whose product from the identity is ``p``.

    Moves the horizontal coordinates first (ascending axis order), then fixes the
    vertical residual with commutator loops.
    """
    return [GeneratorStep(r.axis, r.sign) for r in horizontal_runs(group, p) for _ in range(r.count)]


def path_length(runs: Iterable[Run]) -> int:
    return sum(r.count for r in runs)


def _bracket_lattice_basis(group: GroupSpec):
    """Integer combinations of generator brackets giving each vertical unit vector.

    Returns (pairs, basis) with sum_j basis[k][j] * bracket(pairs[j]) = e_k, or None
    when the brackets do not span the integer vertical lattice.
    """
    pairs = [(a, b) for a in range(group.m1) for b in range(a + 1, group.m1) if any(group.bracket(a, b))]
    if not pairs:
        return None
    m2 = group.m2
    # column-style extended elimination: rows are (bracket vector | unit tag)
    rows = [list(group.bracket(a, b)) + [int(i == j) for j in range(len(pairs))] for i, (a, b) in enumerate(pairs)]
    pivots = []
    r0 = 0
    for col in range(m2):
        # gcd-reduce column col among rows r0..
        while True:
            nz = [i for i in range(r0, len(rows)) if rows[i][col]]
            if not nz:
                return None
            piv = min(nz, key=lambda i: abs(rows[i][col]))
            rows[r0], rows[piv] = rows[piv], rows[r0]
            done = True
            for i in range(r0 + 1, len(rows)):
                if rows[i][col]:
                    f = rows[i][col] // rows[r0][col]
                    rows[i] = [x - f * y for x, y in zip(rows[i], rows[r0])]
                    if rows[i][col]:
                        done = False
            if done:
                break
        if abs(rows[r0][col]) != 1:
            return None
        if rows[r0][col] < 0:
            rows[r0] = [-x for x in rows[r0]]
        pivots.append(r0)
        r0 += 1
    # back-substitute to make the pivot block the identity
    for c in reversed(range(m2)):
        for i in range(c):
            f = rows[i][c]
            if f:
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[c])]
    basis = [rows[k][m2:] for k in range(m2)]
    return pairs, basis


def _integer_det(m: list[list[int]]) -> int:
    m = [[Fraction(v) for v in row] for row in m]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c]), None)
        if piv is None:
            return 0
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            if f:
                m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return int(det)
