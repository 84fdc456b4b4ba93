"""Ground truth at desk scale: minimal fillings in a box window and translation sums."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog, milp, LinearConstraint, Bounds

from .carnot import WeightTable
from .grid import Cell, Chain, ChainError, boundary
from .simplex import solve_standard_form

log = logging.getLogger(__name__)

DEFAULT_VARIABLE_CAP = 100_000
EXACT_SIMPLEX_LIMIT = 400  # split variables; above this HiGHS solves and we certify exactly


class OracleError(RuntimeError):
    pass


class WindowTooLarge(OracleError):
    pass


class WindowComplex:
    """Scale-0 cells inside the box prod_j [lo_j, hi_j] (base units, grid origin 0)."""

    def __init__(self, table: WeightTable, lo, hi):
        self.table = table
        self.lo = tuple(lo)
        self.hi = tuple(hi)
        if len(self.lo) != table.n or any(a > b for a, b in zip(self.lo, self.hi)):
            raise OracleError(f"bad window {self.lo}..{self.hi}")
        self._cells: dict[int, list[Cell]] = {}
        self._index: dict[int, dict[Cell, int]] = {}

    @classmethod
    def around(cls, c: Chain, pad: int = 0) -> "WindowComplex":
        box = c.bbox()
        if box is None:
            return cls(c.table, (0,) * c.table.n, (0,) * c.table.n)
        lo, hi = box
        return cls(c.table, [v - pad for v in lo], [v + pad for v in hi])

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    def count(self, d: int) -> int:
        total = 0
        for axes in itertools.combinations(range(self.table.n), d):
            k = 1
            for j, s in enumerate(self.shape):
                k *= s if j in axes else s + 1
            total += k
        return total

    def cells(self, d: int) -> list[Cell]:
        if d not in self._cells:
            out = []
            for axes in itertools.combinations(range(self.table.n), d):
                ranges = [range(a, b) if j in axes else range(a, b + 1) for j, (a, b) in enumerate(zip(self.lo, self.hi))]
                out.extend((axes, corner) for corner in itertools.product(*ranges))
            self._cells[d] = out
            self._index[d] = {c: i for i, c in enumerate(out)}
        return self._cells[d]

    def index(self, d: int) -> dict[Cell, int]:
        self.cells(d)
        return self._index[d]

    def contains(self, c: Chain) -> bool:
        if c.scale != 0:
            return False
        c = c.rebased((0,) * self.table.n)
        for axes, corner in c.coeffs:
            for j, (a, b) in enumerate(zip(self.lo, self.hi)):
                if not (a <= corner[j] and corner[j] + (j in axes) <= b):
                    return False
        return True

    def boundary_matrix(self, d: int) -> sp.csr_matrix:
        """Integer matrix of boundary from d-cells (columns) to (d-1)-cells (rows)."""
        rows_idx = self.index(d - 1)
        r, cidx, vals = [], [], []
        for col, (axes, corner) in enumerate(self.cells(d)):
            for k, a in enumerate(axes):
                fa = axes[:k] + axes[k + 1 :]
                s = 1 if k % 2 == 0 else -1
                up = corner[:a] + (corner[a] + 1,) + corner[a + 1 :]
                r += [rows_idx[(fa, up)], rows_idx[(fa, corner)]]
                cidx += [col, col]
                vals += [s, -s]
        return sp.csr_matrix((vals, (r, cidx)), shape=(len(rows_idx), len(self.cells(d))), dtype=np.int64)

    def vector(self, c: Chain) -> np.ndarray:
        idx = self.index(c.dim)
        v = np.zeros(len(idx), dtype=np.int64)
        for cell, coeff in c.coeffs.items():
            if cell not in idx:
                raise OracleError(f"cell {cell} lies outside the window")
            v[idx[cell]] = coeff
        return v


@dataclass
class LPResult:
    lower_bound: Fraction
    filling: Chain | None = None
    filling_mass: int | None = None
    optimal: bool = False
    method: str = ""
    dual: dict[Cell, Fraction] = field(default_factory=dict)

    @property
    def value(self) -> Fraction:
        return self.lower_bound


def _weights(W: WindowComplex, d: int) -> list[int]:
    return [W.table.cell_weight(0, d)] * len(W.cells(d))


def certify_dual(W: WindowComplex, zeta: Chain, y: dict[Cell, Fraction]) -> Fraction:
    """Exact lower bound zeta . y after scaling y into the dual feasible region.

    For any b with boundary b = zeta: zeta . y = sum_s b_s (boundary^T y)_s
    <= sum_s w_s |b_s| whenever |boundary^T y| <= w.
    """
    d = zeta.dim
    weight = W.table.cell_weight(0, d + 1)
    worst = Fraction(0)
    for axes, corner in W.cells(d + 1):
        s = Fraction(0)
        for k, a in enumerate(axes):
            fa = axes[:k] + axes[k + 1 :]
            sign = 1 if k % 2 == 0 else -1
            up = corner[:a] + (corner[a] + 1,) + corner[a + 1 :]
            s += sign * (y.get((fa, up), 0) - y.get((fa, corner), 0))
        worst = max(worst, abs(s) / weight)
    scale = max(Fraction(1), worst)
    return sum((v * y.get(c, 0) for c, v in zeta.coeffs.items()), Fraction(0)) / scale


def minimal_filling_lp(zeta: Chain, W: WindowComplex | None = None, *, cap: int = DEFAULT_VARIABLE_CAP, method: str = "auto") -> LPResult:
    """Minimum-mass (d+1)-chain in W with boundary zeta: LP bound plus an integral filling."""
    table = zeta.table
    if zeta.scale != 0:
        raise OracleError("oracle works on scale-0 chains")
    if zeta.dim >= table.n:
        raise OracleError("cycle dimension must be below n")
    if zeta.dim > 0 and boundary(zeta):
        raise OracleError("input is not a cycle")
    if not zeta:
        return LPResult(Fraction(0), Chain.zero(table, 0, zeta.dim + 1), 0, True, "trivial")
    zeta = zeta.rebased((0,) * table.n)
    W = W or WindowComplex.around(zeta, pad=1)
    if not W.contains(zeta):
        raise OracleError("cycle is not supported in the window")
    d = zeta.dim
    ncols = len(W.cells(d + 1))
    if 2 * ncols > cap:
        raise WindowTooLarge(f"{2 * ncols} LP variables exceed the cap {cap}")
    D = W.boundary_matrix(d + 1)
    z = W.vector(zeta)
    w = np.array(_weights(W, d + 1), dtype=np.int64)
    rows = W.cells(d)
    if method == "auto":
        method = "exact" if 2 * ncols <= EXACT_SIMPLEX_LIMIT else "highs"
    if method == "exact":
        Dd = D.toarray()
        A = np.hstack([Dd, -Dd]).tolist()
        res = solve_standard_form(list(w) + list(w), A, z.tolist())
        y = {rows[i]: v for i, v in enumerate(res.y) if v}
        bvec = [res.x[j] - res.x[j + ncols] for j in range(ncols)]
        lower = certify_dual(W, zeta, y)
        if lower != res.value:
            raise OracleError("internal error: exact dual does not certify the primal value")
        if all(v.denominator == 1 for v in bvec):
            filling = _chain_from_vector(W, d + 1, [int(v) for v in bvec])
        else:
            filling = _integral_filling(W, D, z, w, d + 1)
    elif method == "highs":
        A = sp.hstack([D, -D]).tocsr()
        sol = linprog(np.concatenate([w, w]), A_eq=A, b_eq=z, bounds=(0, None), method="highs")
        if sol.status != 0:
            raise OracleError(f"internal error: LP solver status {sol.status}: {sol.message}")
        ymarg = sol.eqlin.marginals
        y = {rows[i]: Fraction(float(v)).limit_denominator(10**6) for i, v in enumerate(ymarg) if abs(v) > 1e-12}
        lower = certify_dual(W, zeta, y)
        x = sol.x[:ncols] - sol.x[ncols:]
        rounded = np.rint(x).astype(np.int64)
        if np.allclose(x, rounded, atol=1e-7) and np.array_equal(D @ rounded, z):
            filling = _chain_from_vector(W, d + 1, rounded.tolist())
        else:
            filling = _integral_filling(W, D, z, w, d + 1)
    else:
        raise ValueError(f"unknown method {method!r}")
    if filling is not None and not _fills(filling, zeta):
        raise OracleError("internal error: returned filling has the wrong boundary")
    fmass = filling.mass() if filling is not None else None
    return LPResult(lower, filling, fmass, fmass is not None and Fraction(fmass) == lower, method, y)


def _fills(b: Chain, zeta: Chain) -> bool:
    return boundary(b) == zeta


def _chain_from_vector(W: WindowComplex, d: int, vec) -> Chain:
    cells = W.cells(d)
    return Chain(W.table, 0, d, {cells[i]: int(v) for i, v in enumerate(vec) if v})


def _integral_filling(W, D, z, w, dim: int) -> Chain | None:
    """Branch-and-bound for an integral minimiser (HiGHS MIP); checked exactly by the caller."""
    ncols = D.shape[1]
    A = sp.hstack([D, -D]).tocsr()
    res = milp(
        np.concatenate([w, w]).astype(float),
        constraints=LinearConstraint(A, z, z),
        integrality=np.ones(2 * ncols),
        bounds=Bounds(0, np.inf),
    )
    if res.status != 0:
        log.warning("integral refinement failed: %s", res.message)
        return None
    x = np.rint(res.x[:ncols] - res.x[ncols:]).astype(np.int64)
    if not np.array_equal(D @ x, z):
        return None
    return _chain_from_vector(W, dim, x.tolist())


# ---------------------------------------------------------------- top dimension


def unique_top_filling(zeta: Chain, W: WindowComplex | None = None) -> Chain:
    """The unique n-chain in W whose boundary is the (n-1)-cycle ``zeta``.

    Sweeps along axis 0: with b[p] the cell [p, p+1], the face at p carries
    b[p-1] - b[p], so b is minus the running sum of zeta's faces.
    """
    table = zeta.table
    n = table.n
    if zeta.dim != n - 1:
        raise OracleError(f"expected an (n-1)-cycle, got dimension {zeta.dim}")
    if not zeta:
        return Chain.zero(table, 0, n)
    zeta = zeta.rebased((0,) * n) if zeta.scale == 0 else None
    if zeta is None:
        raise OracleError("oracle works on scale-0 chains")
    W = W or WindowComplex.around(zeta)
    if not W.contains(zeta):
        raise OracleError("cycle is not supported in the window")
    faces = _densify_faces(zeta, W)
    shape = W.shape
    b = -np.cumsum(faces[0], axis=0)[: shape[0]]
    top = _dense_top_boundary(b)
    if any(not np.array_equal(top[k], faces[k]) for k in range(n)):
        raise OracleError("no filling in the window: cycle is not a boundary there")
    nz = np.nonzero(b)
    full = tuple(range(n))
    lo = np.array(W.lo)
    coords = (np.stack(nz, axis=1) + lo).tolist()
    vals = b[nz].tolist()
    return Chain(table, 0, n, {(full, tuple(c)): v for c, v in zip(coords, vals)})


def _densify_faces(zeta: Chain, W: WindowComplex) -> list[np.ndarray]:
    n = zeta.table.n
    shape = W.shape
    full = tuple(range(n))
    arrays = []
    for k in range(n):
        sh = tuple(s + 1 if j == k else s for j, s in enumerate(shape))
        arrays.append(np.zeros(sh, dtype=np.int64))
    for (axes, corner), v in zeta.coeffs.items():
        k = next(j for j in full if j not in axes)
        arrays[k][tuple(c - a for c, a in zip(corner, W.lo))] = v
    return arrays


def _dense_top_boundary(b: np.ndarray) -> list[np.ndarray]:
    n = b.ndim
    out = []
    for k in range(n):
        pad_before = [(0, 0)] * n
        pad_after = [(0, 0)] * n
        pad_before[k] = (1, 0)
        pad_after[k] = (0, 1)
        s = 1 if k % 2 == 0 else -1
        out.append(s * (np.pad(b, pad_before) - np.pad(b, pad_after)))
    return out


# ---------------------------------------------------------------- translation sums


def _shuffle_sign(A, B) -> int:
    perm = list(A) + list(B)
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def translate_intersection_sum(a: Chain, b: Chain, W: WindowComplex | None = None) -> int:
    """sum over integer translations g of |i(g.a, b)| under the half-open convention.

    Complementary cells tau (axes A) and sigma meet after translating tau by g
    exactly when g = corner(sigma) - corner(tau).
    """
    table = a.table
    if a.dim + b.dim != table.n:
        raise OracleError(f"dimension mismatch: {a.dim} + {b.dim} != {table.n}")
    if a.scale != b.scale:
        raise OracleError("chains must live at the same scale")
    if W is not None and not W.contains(b):
        raise OracleError("second chain is not supported in the window")
    full = set(range(table.n))
    by_axes: dict[tuple, list] = {}
    for (axes, corner), v in b.coeffs.items():
        by_axes.setdefault(axes, []).append((corner, v))
    acc: dict[tuple, int] = {}
    for (axes, corner), v in a.coeffs.items():
        comp = tuple(sorted(full - set(axes)))
        partners = by_axes.get(comp)
        if not partners:
            continue
        sign = _shuffle_sign(axes, comp) * v
        for c2, v2 in partners:
            g = tuple(x - y for x, y in zip(c2, corner))
            acc[g] = acc.get(g, 0) + sign * v2
    return sum(abs(v) for v in acc.values())


def intersection_constant(a: Chain, b: Chain) -> Fraction | None:
    if not a or not b:
        return None
    return Fraction(translate_intersection_sum(a, b), a.l1() * b.l1())
