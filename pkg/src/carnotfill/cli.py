"""Experiment driver: ``carnotfill {fill,sweep,avg,oracle,fit}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .carnot import GroupError, GroupSpec, get_group
from .coarsen import averaging_constant, coarse_l1_by_offset, offset_l1_average
from .filling import FillingError, PlanError, fit_exponent, multiscale_fill
from .grid import (
    Chain,
    ChainError,
    commutator_loop,
    random_chain,
    random_cycle,
    read_chain,
    sphere_cycle,
    write_chain,
)
from .oracle import OracleError, WindowComplex, WindowTooLarge, intersection_constant, minimal_filling_lp, unique_top_filling

log = logging.getLogger("carnotfill")

FAMILIES = ("sphere", "commutator", "random", "sphere-shifted", "commutator-shifted")
SERIES_HEADER = ["group", "family", "r", "d", "V", "mass", "I", "slope_running"]
AVG_HEADER = ["group", "family", "r", "d", "l1", "mean_coarse_l1", "c_avg", "c_cap"]
ORACLE_HEADER = ["group", "family", "r", "d", "V", "constructed_mass", "oracle_bound", "oracle_mass", "ratio", "status"]


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    group: str = "H3"
    spec: str | None = None
    family: str = "sphere"
    sizes: list[int] = field(default_factory=list)
    dim: int | None = None
    seed: int = 0
    c_plan: Fraction = Fraction(1)
    offset_policy: str = "best"
    oracle: bool = False
    out: str | None = None
    jobs: int = 1
    max_extra: int = 8
    oracle_cap: int = 100_000
    min_sizes: int = 0

    def load_group(self) -> GroupSpec:
        try:
            return GroupSpec.load(self.spec) if self.spec else get_group(self.group)
        except (GroupError, OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot load group: {exc}") from None

    @property
    def group_name(self) -> str:
        return self.load_group().name

    def validate(self) -> "ExperimentConfig":
        group = self.load_group()
        if self.family not in FAMILIES:
            raise UsageError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if any(r < 1 for r in self.sizes) and self.family != "random":
            raise UsageError("sizes must be positive")
        if any(r < 0 for r in self.sizes):
            raise UsageError("sizes must be non-negative")
        if len(self.sizes) < self.min_sizes:
            raise UsageError(f"need at least {self.min_sizes} sizes, got {len(self.sizes)}")
        if self.c_plan <= 0:
            raise UsageError("--c-plan must be positive")
        if self.offset_policy not in ("best", "fixed", "average-study"):
            raise UsageError(f"unknown offset policy {self.offset_policy!r}")
        if self.family == "random":
            if self.dim is None:
                self.dim = group.n - 1
            if not 1 <= self.dim < group.n:
                raise UsageError(f"--dim must be in 1..{group.n - 1}")
        if self.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        return self


def build_family(group: GroupSpec, family: str, r: int, dim: int | None = None, seed: int = 0) -> Chain:
    table = group.weight_table()
    if family.startswith("sphere"):
        c = sphere_cycle(table, r)
    elif family.startswith("commutator"):
        c = commutator_loop(table, group, r)
    elif family == "random":
        c = random_cycle(table, dim if dim is not None else group.n - 1, r, seed=seed * 1_000_003 + r, ncells=4 * r + 4)
    else:
        raise UsageError(f"unknown family {family!r}")
    if family.endswith("-shifted"):
        # translate off the coarse grids: one unit horizontally, three vertically
        shift = (1,) * group.m1 + (3,) * group.m2
        c = Chain(table, 0, c.dim, c.coeffs, origin=shift).rebased((0,) * table.n)
    return c


# ---------------------------------------------------------------- runs


def _fill(cfg: ExperimentConfig, alpha: Chain):
    """Fill under the configured policy; ``average-study`` also scans every offset per scale."""
    policy = "fixed" if cfg.offset_policy == "fixed" else "best"
    if cfg.offset_policy != "average-study":
        beta, report = multiscale_fill(alpha, cfg.c_plan, max_extra=cfg.max_extra, offset_policy=policy)
        return beta, report, None
    beta, report, steps = multiscale_fill(alpha, cfg.c_plan, max_extra=cfg.max_extra, keep_steps=True)
    study = []
    for step in steps:
        vals = coarse_l1_by_offset(step.alpha_in)
        study.append(
            {
                "scale": step.alpha_in.scale,
                "chosen_l1": step.alpha_out.l1(),
                "min_l1": min(vals.values()),
                "mean_l1": str(Fraction(sum(vals.values()), len(vals))),
                "max_l1": max(vals.values()),
            }
        )
    return beta, report, study


def _fill_one(args):
    cfg, r = args
    group = cfg.load_group()
    alpha = build_family(group, cfg.family, r, cfg.dim, cfg.seed)
    beta, report, study = _fill(cfg, alpha)
    return r, alpha, beta, report, study


def _write_csv(path: Path | None, header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if path is not None:
        path.write_text(text)
    return text


def _out_dir(cfg: ExperimentConfig) -> Path | None:
    if cfg.out is None:
        return None
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    if isinstance(x, Fraction):
        return f"{float(x):.6f}"
    return str(x)


def cmd_fill(cfg: ExperimentConfig, input_path: str | None = None) -> int:
    group = cfg.load_group()
    table = group.weight_table()
    if input_path:
        try:
            alpha = read_chain(input_path, table)
        except (ChainError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    else:
        if len(cfg.sizes) != 1:
            raise UsageError("fill needs exactly one --size (or --input)")
        alpha = build_family(group, cfg.family, cfg.sizes[0], cfg.dim, cfg.seed)
    out = _out_dir(cfg)
    try:
        beta, report, study = _fill(cfg, alpha)
    except ChainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PlanError as exc:
        print(f"error: plan rejected: {exc}", file=sys.stderr)
        return 1
    except FillingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if out and exc.report is not None:
            (out / "report.json").write_text(json.dumps(exc.report.to_json(), indent=2) + "\n")
        return 1
    doc = {"group": group.name, "family": cfg.family if not input_path else "file", "V": alpha.mass()} | report.to_json()
    if study is not None:
        doc["offset_study"] = study
    if cfg.oracle and alpha.dim == table.n - 1:
        doc["oracle_mass"] = unique_top_filling(alpha).mass()
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        (out / "report.json").write_text(text)
        write_chain(out / "cycle.jsonl", alpha)
        write_chain(out / "filling.jsonl", beta)
    else:
        sys.stdout.write(text)
    print(f"verified={report.verified} mass={report.total_mass} I={report.plan.I} time={report.wall_time:.2f}s", file=sys.stderr)
    return 0 if report.verified else 1


def cmd_sweep(cfg: ExperimentConfig) -> int:
    cfg.min_sizes = 3
    cfg.validate()
    group = cfg.load_group()
    out = _out_dir(cfg)
    sizes = sorted(cfg.sizes)
    jobs = [(cfg, r) for r in sizes]
    try:
        if cfg.jobs > 1:
            with ProcessPoolExecutor(cfg.jobs) as pool:
                results = list(pool.map(_fill_one, jobs))
        else:
            results = [_fill_one(j) for j in jobs]
    except FillingError as exc:
        print(f"error: sweep aborted: {exc}", file=sys.stderr)
        return 1
    rows, series, offsets, studies = [], [], {}, {}
    for r, alpha, beta, report, study in results:
        if not report.verified:
            print(f"error: sweep aborted: size {r} failed verification", file=sys.stderr)
            return 1
        series.append((alpha.mass(), report.total_mass))
        running = fit_exponent(series)[0] if len(series) >= 3 else None
        rows.append([group.name, cfg.family, r, alpha.dim, alpha.mass(), report.total_mass, report.plan.I, _fmt(running)])
        offsets[r] = [list(s.offset) for s in report.steps]
        if study is not None:
            studies[str(r)] = study
        if out:
            write_chain(out / f"cycle_r{r}.jsonl", alpha)
            write_chain(out / f"filling_r{r}.jsonl", beta)
    slope, stderr = fit_exponent(series)
    summary = {
        "group": group.name,
        "family": cfg.family,
        "d": results[0][1].dim,
        "predicted_exponent": str(results[0][3].plan.predicted_exponent),
        "slope": slope,
        "stderr": stderr,
        "offsets": {str(r): o for r, o in offsets.items()},
    }
    if studies:
        summary["offset_study"] = studies
    if cfg.oracle and results[0][1].dim == group.n - 1:
        oracle_series = [(a.mass(), unique_top_filling(a).mass()) for _, a, _, _, _ in results]
        summary["oracle_masses"] = [m for _, m in oracle_series]
        summary["oracle_slope"] = fit_exponent(oracle_series)[0]
    text = _write_csv(out / "series.csv" if out else None, SERIES_HEADER, rows)
    if out:
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    else:
        sys.stdout.write(text)
    print(f"slope={slope:.4f} +- {stderr:.4f} (predicted {summary['predicted_exponent']})", file=sys.stderr)
    return 0


def _probe(group: GroupSpec, d: int, seed: int) -> Chain:
    return random_chain(group.weight_table(), group.n - d, 4, seed=seed + 7919, ncells=16)


def cmd_avg(cfg: ExperimentConfig) -> int:
    cfg.validate()
    group = cfg.load_group()
    out = _out_dir(cfg)
    rows = []
    for r in sorted(cfg.sizes):
        alpha = build_family(group, cfg.family, r, cfg.dim, cfg.seed) if r > 0 else Chain.zero(group.weight_table(), 0, cfg.dim or group.n - 1)
        d = alpha.dim
        if not alpha:
            rows.append([group.name, cfg.family, r, d, 0, 0, 0, 0])
            continue
        probe = _probe(group, d, cfg.seed)
        c_cap = intersection_constant(alpha, probe)
        rows.append([group.name, cfg.family, r, d, alpha.l1(), _fmt(offset_l1_average(alpha)), _fmt(averaging_constant(alpha)), _fmt(c_cap)])
    text = _write_csv(out / "averaging.csv" if out else None, AVG_HEADER, rows)
    if not out:
        sys.stdout.write(text)
    return 0


def oracle_row(group: GroupSpec, family: str, r: int, alpha: Chain, constructed: int, cap: int, window: WindowComplex | None = None):
    table = group.weight_table()
    d = alpha.dim
    try:
        if d == table.n - 1:
            m = unique_top_filling(alpha).mass()
            bound, omass, status = Fraction(m), m, "exact"
        else:
            res = minimal_filling_lp(alpha, window or WindowComplex.around(alpha, pad=1), cap=cap)
            bound, omass, status = res.lower_bound, res.filling_mass, "optimal" if res.optimal else "bound"
    except WindowTooLarge as exc:
        log.warning("skipping r=%s: %s", r, exc)
        return [group.name, family, r, d, alpha.mass(), constructed, "", "", "", "skipped: window too large"]
    ratio = Fraction(constructed) / bound if bound else None
    return [group.name, family, r, d, alpha.mass(), constructed, _fmt(bound), _fmt(omass), _fmt(ratio), status]


def cmd_oracle(cfg: ExperimentConfig) -> int:
    cfg.validate()
    group = cfg.load_group()
    out = _out_dir(cfg)
    rows = []
    for r in sorted(cfg.sizes):
        alpha = build_family(group, cfg.family, r, cfg.dim, cfg.seed)
        _, report = multiscale_fill(alpha, cfg.c_plan, max_extra=cfg.max_extra)
        rows.append(oracle_row(group, cfg.family, r, alpha, report.total_mass, cfg.oracle_cap))
    text = _write_csv(out / "oracle.csv" if out else None, ORACLE_HEADER, rows)
    if not out:
        sys.stdout.write(text)
    return 0


def cmd_fit(csv_path: str | None, points: str | None) -> int:
    if csv_path:
        with open(csv_path) as fh:
            series = [(int(row["V"]), int(row["mass"])) for row in csv.DictReader(fh)]
    elif points:
        series = [tuple(int(v) for v in p.split(":")) for p in points.split(",") if p]
    else:
        raise UsageError("fit needs --csv or --points")
    try:
        slope, stderr = fit_exponent(series)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.write(json.dumps({"n": len(series), "slope": slope, "stderr": stderr}) + "\n")
    return 0


# ---------------------------------------------------------------- parsing


def parse_sizes(text: str) -> list[int]:
    """``2,4,8`` or ``4..64`` (powers of two from 4 to 64)."""
    text = text.strip()
    if not text:
        return []
    out: list[int] = []
    for part in text.split(","):
        if ".." in part:
            a, b = (int(v) for v in part.split(".."))
            if a < 1 or b < a:
                raise UsageError(f"bad size range {part!r}")
            r = a
            while r <= b:
                out.append(r)
                r *= 2
        else:
            out.append(int(part))
    return out


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--group", default="H3", help="preset group (H3, H5, H7)")
    g.add_argument("--spec", help="group JSON file {name, m1, m2, beta}")
    p.add_argument("--family", default="sphere", choices=FAMILIES)
    p.add_argument("--dim", type=int, help="cycle dimension for the random family")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c-plan", default="1", help="scale-count constant (rational)")
    p.add_argument("--offset-policy", default="best", choices=["best", "fixed", "average-study"], help="per-scale offset choice; fixed may fail to vanish")
    p.add_argument("--oracle", action="store_true", help="also compute oracle values")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--max-extra", type=int, default=8, help="extra scales allowed past the plan")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carnotfill", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("fill", help="fill one cycle and verify")
    _common(p)
    p.add_argument("--size", type=int)
    p.add_argument("--input", help="chain file (JSON lines) to fill instead of a family member")
    for name, helptext in [("sweep", "exponent sweep over sizes"), ("avg", "offset-averaging study"), ("oracle", "compare with exact fillings")]:
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--sizes", default="" if name == "oracle" else None, required=name != "oracle")
        if name == "oracle":
            p.add_argument("--cap", type=int, default=100_000, help="LP variable cap")
    p = sub.add_parser("fit", help="least-squares exponent of a series")
    p.add_argument("--csv")
    p.add_argument("--points", help="V:mass pairs, comma separated")
    return parser


def _config(ns) -> ExperimentConfig:
    sizes = parse_sizes(ns.sizes) if getattr(ns, "sizes", None) is not None else []
    if getattr(ns, "size", None) is not None:
        sizes = [ns.size]
    try:
        c_plan = Fraction(ns.c_plan)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad --c-plan {ns.c_plan!r}") from None
    return ExperimentConfig(
        group=ns.group,
        spec=ns.spec,
        family=ns.family,
        sizes=sizes,
        dim=ns.dim,
        seed=ns.seed,
        c_plan=c_plan,
        offset_policy=ns.offset_policy,
        oracle=ns.oracle,
        out=ns.out,
        jobs=ns.jobs,
        max_extra=ns.max_extra,
        oracle_cap=getattr(ns, "cap", 100_000),
    )


def main(argv=None) -> int:
    parser = make_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if ns.cmd == "fit":
            return cmd_fit(ns.csv, ns.points)
        cfg = _config(ns)
        if ns.cmd == "fill":
            if ns.input is None:
                if ns.size is None:
                    raise UsageError("fill needs --size or --input")
                if ns.size < 1:
                    raise UsageError("--size must be >= 1")
                cfg.validate()
            else:
                cfg.load_group()
            return cmd_fill(cfg, ns.input)
        if ns.cmd == "sweep":
            return cmd_sweep(cfg)
        if ns.cmd == "avg":
            return cmd_avg(cfg)
        if ns.cmd == "oracle":
            return cmd_oracle(cfg)
    except UsageError as exc:
        parser.error(str(exc))
    except OracleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
