"""Multiscale fillings: coarsen a cycle scale by scale until it vanishes, keep the bridges."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .carnot import WeightTable
from .coarsen import Offset, best_offset, coarsen, zero_offset
from .grid import Chain, ChainError, MultiscaleChain, boundary, subdivide_to
from .homotopy import HomotopyStep, chain_homotopy_Q, operator_for


class PlanError(ValueError):
    pass


class FillingError(RuntimeError):
    def __init__(self, msg: str, report: "FillingReport | None" = None):
        super().__init__(msg)
        self.report = report


@dataclass(frozen=True)
class FillingPlan:
    d: int
    V: int
    I: int
    predicted_exponent: Fraction
    table: WeightTable
    c_plan: Fraction = Fraction(1)

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "V": self.V,
            "I": self.I,
            "predicted_exponent": str(self.predicted_exponent),
            "c_plan": str(self.c_plan),
            "k": list(self.table.k),
            "kappa": self.table.kappa,
        }


def check_hypotheses(d: int, table: WeightTable) -> None:
    n, k, kappa = table.n, table.k, table.kappa
    if not 1 <= d < n:
        raise PlanError(f"cycle dimension must satisfy 1 <= d < {n}, got {d}")
    if not k[d + 1] + k[n - d] > kappa:
        raise PlanError(f"k({d + 1}) + k({n - d}) = {k[d + 1] + k[n - d]} must exceed kappa = {kappa}")
    if not k[n - d] < kappa:
        # k(n-d) == kappa makes the scale inequality unsatisfiable
        raise PlanError(f"k({n - d}) = {k[n - d]} must be below kappa = {kappa}")


def predicted_exponent(d: int, table: WeightTable) -> Fraction:
    check_hypotheses(d, table)
    return Fraction(table.k[d + 1], table.kappa - table.k[table.n - d])


def plan(V: int, d: int, table: WeightTable, c_plan=1) -> FillingPlan:
    """Smallest I >= 1 with c_plan * V * 2^(I k(n-d)) < 2^(kappa I)."""
    check_hypotheses(d, table)
    c_plan = Fraction(c_plan)
    if c_plan <= 0:
        raise PlanError("c_plan must be positive")
    gap = table.kappa - table.k[table.n - d]
    I = 1
    while not c_plan * V < Fraction(2) ** (gap * I):
        I += 1
    return FillingPlan(d, V, I, predicted_exponent(d, table), table, c_plan)


@dataclass
class StepRecord:
    scale: int
    offset: Offset
    l1_in: int
    l1_out: int
    bridge_l1: int
    bridge_mass: int


@dataclass
class FillingReport:
    plan: FillingPlan
    steps: list[StepRecord] = field(default_factory=list)
    residual_l1: int = 0
    total_mass: int = 0
    verified: bool = False
    vanished_at: int | None = None
    wall_time: float = 0.0

    @property
    def scales_used(self) -> int:
        return len(self.steps)

    def to_json(self, timing: bool = False) -> dict:
        out = {
            "plan": self.plan.to_json(),
            "steps": [asdict(s) | {"offset": list(s.offset)} for s in self.steps],
            "residual_l1": self.residual_l1,
            "total_mass": self.total_mass,
            "verified": self.verified,
            "vanished_at": self.vanished_at,
        }
        if timing:
            out["wall_time"] = self.wall_time
        return out


def multiscale_fill(
    alpha: Chain,
    c_plan=1,
    *,
    max_extra: int = 8,
    offset_policy: str = "best",
    check_steps: bool = False,
    keep_steps: bool = False,
):
    """Fill a scale-0 cycle; returns (filling, report) or (filling, report, steps).

    Stops once the coarsened cycle vanishes; if it survives the planned scale
    count, keeps coarsening up to ``max_extra`` further scales.
    """
    t0 = time.perf_counter()
    table = alpha.table
    if alpha.scale != 0:
        raise ChainError("multiscale_fill expects a scale-0 cycle")
    if alpha.dim > 0 and boundary(alpha):
        raise ChainError("input is not a cycle")
    the_plan = plan(alpha.mass(), alpha.dim, table, c_plan)
    report = FillingReport(the_plan)
    parts: dict[int, Chain] = {}
    steps: list[HomotopyStep] = []
    current = alpha
    cap = the_plan.I + max_extra
    i = 0
    while current and i < cap:
        if offset_policy == "best":
            o, _ = best_offset(current)
        elif offset_policy == "fixed":
            o = zero_offset(table)
        else:
            raise ValueError(f"unknown offset policy {offset_policy!r}")
        step = chain_homotopy_Q(current, o, check=check_steps, operator=operator_for(table, o))
        report.steps.append(
            StepRecord(i, o, current.l1(), step.alpha_out.l1(), step.bridge.l1(), step.bridge.mass())
        )
        if keep_steps:
            steps.append(step)
        if step.bridge:
            parts[i] = -step.bridge
        current = step.alpha_out
        i += 1
    filling = MultiscaleChain(parts)
    report.residual_l1 = current.l1()
    report.total_mass = filling.mass()
    report.vanished_at = None if current else i
    if current:
        report.wall_time = time.perf_counter() - t0
        raise FillingError(f"residual of l1 {current.l1()} survives {cap} scales", report)
    report.verified = verify_filling(filling, alpha)
    report.wall_time = time.perf_counter() - t0
    if keep_steps:
        return filling, report, steps
    return filling, report


def verify_filling(beta: MultiscaleChain, alpha: Chain) -> bool:
    """Exact check that the scale-0 flattening of ``beta`` has boundary ``alpha``."""
    if not beta.parts:
        return not alpha
    if beta.dim != alpha.dim + 1:
        return False
    b = beta.boundary(scale=0)
    b = subdivide_to(b, 0) if b.scale else b
    return b == subdivide_to(alpha, 0)


def fit_exponent(series) -> tuple[float, float]:
    """Least-squares slope of log(mass) against log(V), with its standard error."""
    pts = list(series)
    if len(pts) < 3:
        raise ValueError("need at least 3 points to fit an exponent")
    if any(v <= 0 or m <= 0 for v, m in pts):
        raise ValueError("values must be positive")
    x = np.log(np.array([float(v) for v, _ in pts]))
    y = np.log(np.array([float(m) for _, m in pts]))
    xm = x - x.mean()
    sxx = float(xm @ xm)
    slope = float(xm @ (y - y.mean())) / sxx
    resid = y - y.mean() - slope * xm
    dof = len(pts) - 2
    stderr = math.sqrt(float(resid @ resid) / dof / sxx) if dof > 0 else 0.0
    return slope, stderr
