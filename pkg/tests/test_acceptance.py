"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest -v tests/test_acceptance.py``; the verdict lines are repeated
in an "acceptance" section of the terminal summary.
"""

import random
import time

import pytest

from carnotfill.carnot import GeneratorStep, apply_runs, get_group, horizontal_runs, path_length, quasi_norm
from carnotfill.cli import _probe, build_family
from carnotfill.coarsen import all_offsets, averaging_constant, coarsen, zero_offset
from carnotfill.filling import fit_exponent, multiscale_fill, verify_filling
from carnotfill.grid import Chain, boundary, commutator_loop, random_chain, sphere_cycle, subdivide
from carnotfill.homotopy import operator_for
from carnotfill.oracle import WindowComplex, intersection_constant, minimal_filling_lp, unique_top_filling

from .reference import walk

H3 = get_group("H3")
H5 = get_group("H5")
T3 = H3.weight_table()
T5 = H5.weight_table()

SPHERE_SIZES = [2, 4, 8, 16, 32]
COMMUTATOR_SIZES = [4, 8, 16, 32, 64]
LINES: list[str] = []


def verdict(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} [{number}] {detail}"
    LINES.append(line)
    print("\n" + line)
    assert ok, line


@pytest.fixture(scope="module")
def sphere_runs():
    out = {}
    for r in SPHERE_SIZES:
        alpha = sphere_cycle(T3, r)
        t0 = time.perf_counter()
        beta, report, steps = multiscale_fill(alpha, keep_steps=True)
        out[r] = (alpha, beta, report, steps, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def commutator_runs():
    out = {}
    for r in [1, 2] + COMMUTATOR_SIZES:
        alpha = commutator_loop(T3, H3, r)
        beta, report, steps = multiscale_fill(alpha, keep_steps=True)
        out[r] = (alpha, beta, report, steps)
    return out


def test_1_chain_map_identity():
    t0 = time.perf_counter()
    bad = checked = 0
    for table in (T3, T5):
        offsets = all_offsets(table)
        for i in range(500):
            d = 1 + i % (table.n - 1)
            c = random_chain(table, d, 5, seed=i, ncells=6)
            if i % 2:
                c = boundary(random_chain(table, d + 1, 5, seed=i, ncells=4))  # cycles too
            bc = boundary(c)
            for o in offsets:
                checked += 1
                bad += boundary(coarsen(c, o)) != coarsen(bc, o)
    dt = time.perf_counter() - t0
    verdict(1, bad == 0 and dt < 60, f"chain map: {checked} (chain, offset) pairs on H3+H5, {bad} failures, {dt:.1f}s (< 60s)")


def test_2_projection_identity():
    bad = 0
    for table in (T3, T5):
        for i in range(500):
            c = random_chain(table, 1 + i % table.n, 4, seed=10_000 + i, ncells=6, scale=1)
            bad += coarsen(subdivide(c), zero_offset(table)) != c
    verdict(2, bad == 0, f"projection: coarsen(subdivide(c), 0) == c on 2x500 coarse chains, {bad} failures")


def _per_cell_ok(op, table, axes, corner):
    t = Chain(table, 0, len(axes), {(axes, corner): 1})
    lhs = boundary(op.apply(t))
    if axes:
        lhs = lhs + op.apply(boundary(t))
    return lhs == Chain(table, 0, len(axes), op.sp_cell(axes, corner)) - t


def test_3_homotopy_identity(sphere_runs, commutator_runs):
    steps_checked = cells_checked = 0
    bad = []
    runs = [("sphere", r, v[3]) for r, v in sphere_runs.items()] + [("commutator", r, v[3]) for r, v in commutator_runs.items()]
    for fam, r, steps in runs:
        for s in steps:
            steps_checked += 1
            if not s.identity_holds():
                bad.append(f"{fam} r={r} end-to-end")
            # per-cell identity on every cell of the input; Q is translation
            # equivariant, so one representative per (axes, residue) class suffices
            op = operator_for(s.alpha_in.table, s.offset)
            seen = set()
            for axes, corner in s.alpha_in.coeffs:
                key = (axes, op._split(corner)[1])
                if key in seen:
                    continue
                seen.add(key)
                cells_checked += 1
                faces = [(axes[:k] + axes[k + 1 :], corner) for k in range(len(axes))]
                for a, c in [(axes, corner)] + faces:
                    if not _per_cell_ok(op, s.alpha_in.table, a, c):
                        bad.append(f"{fam} r={r} cell {a}@{c}")
    verdict(
        3,
        not bad,
        f"homotopy: boundary(H) == S(alpha_out) - alpha_in on {steps_checked} steps (sphere r<=32, commutator r<=64); "
        f"per-cell identity on {cells_checked} cell classes; failures {bad[:3]}",
    )


def test_4_filling_validity(sphere_runs, commutator_runs):
    problems = []
    for fam, runs in (("sphere", sphere_runs), ("commutator", commutator_runs)):
        for r, (alpha, beta, report, *_rest) in runs.items():
            if not (report.verified and verify_filling(beta, alpha)):
                problems.append(f"{fam} r={r} not verified")
            if report.vanished_at is None or report.vanished_at > report.plan.I + 2:
                problems.append(f"{fam} r={r} vanished at {report.vanished_at}, planned {report.plan.I}")
    t32 = sphere_runs[32][4]
    ok = not problems and t32 < 300
    verdict(4, ok, f"filling validity: all fills verified, residual vanishes by I+2; sphere r=32 in {t32:.1f}s (< 300s); {problems}")


def test_5_top_dimension_exponent(sphere_runs):
    series = [(sphere_runs[r][0].mass(), sphere_runs[r][2].total_mass) for r in SPHERE_SIZES]
    slope, err = fit_exponent(series)
    oracle = [(sphere_runs[r][0].mass(), unique_top_filling(sphere_runs[r][0]).mass()) for r in SPHERE_SIZES]
    exact_ok = all(m == r**4 for (_, m), r in zip(oracle, SPHERE_SIZES))
    oslope, _ = fit_exponent(oracle)
    ok = abs(slope - 4 / 3) <= 0.15 and abs(oslope - 4 / 3) <= 0.1 and exact_ok
    verdict(5, ok, f"sphere slope {slope:.4f} +- {err:.4f} (4/3 +- 0.15); oracle masses r^4 {exact_ok}, slope {oslope:.4f} (4/3 +- 0.1)")


def test_6_curve_filling_exponent(commutator_runs):
    series = [(commutator_runs[r][0].mass(), commutator_runs[r][2].total_mass) for r in COMMUTATOR_SIZES]
    slope, err = fit_exponent(series)
    verdict(6, abs(slope - 3) <= 0.3, f"commutator slope {slope:.4f} +- {err:.4f} (3 +- 0.3)")


def test_7_averaging_bounds():
    details, ok = [], True
    for fam, sizes in (("sphere", [4, 8, 16, 32]), ("commutator", COMMUTATOR_SIZES)):
        c_avg, c_cap = [], []
        for r in sizes:
            alpha = build_family(H3, fam, r)
            c_avg.append(averaging_constant(alpha))
            c_cap.append(intersection_constant(alpha, _probe(H3, alpha.dim, 0)))
        for name, vals in (("c_avg", c_avg), ("c_cap", c_cap)):
            spread = max(vals) / min(vals)
            ok &= spread < 2
            details.append(f"{fam} {name} in [{float(min(vals)):.3f}, {float(max(vals)):.3f}] spread {float(spread):.2f}")
    verdict(7, ok, "averaging constants vary < 2x: " + "; ".join(details))


def test_8_oracle_gap(commutator_runs):
    ratios, ok = [], True
    for r in (1, 2):
        alpha, _, report, _ = commutator_runs[r]
        W = WindowComplex.around(alpha, pad=1)
        fits = all(s <= lim for s, lim in zip(W.shape, (6, 6, 12)))
        res = minimal_filling_lp(alpha, W)
        ratio = report.total_mass / res.lower_bound
        ok &= fits and ratio <= 20
        ratios.append(f"r={r} window {W.shape} constructed {report.total_mass} / LP {res.lower_bound} = {float(ratio):.2f}")
    verdict(8, ok, "oracle gap <= 20: " + "; ".join(ratios))


def test_9_horizontal_paths():
    rng = random.Random(2024)
    worst, bad = 0.0, 0
    for i in range(10_000):
        group = H3 if i % 2 == 0 else H5
        e = rng.randint(0, 13)
        hmax, vmax = 2**e, 4**e
        p = tuple(rng.randint(-hmax, hmax) for _ in range(group.m1)) + tuple(rng.randint(-vmax, vmax) for _ in range(group.m2))
        runs = horizontal_runs(group, p)
        bad += apply_runs(group, runs) != p
        q = quasi_norm(group, p)
        if q:
            worst = max(worst, path_length(runs) / q)
        if e <= 5:
            # independent check: multiply the generators out one at a time
            steps = [GeneratorStep(run.axis, run.sign) for run in runs for _ in range(run.count)]
            bad += walk(group, steps) != p
    verdict(9, bad == 0 and worst <= 20, f"horizontal paths: 10^4 targets on H3/H5, {bad} endpoint errors, C_path = {worst:.2f} (<= 20)")

