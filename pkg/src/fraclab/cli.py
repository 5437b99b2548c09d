"""Batch runner: ``fraclab <subcommand> [--config FILE] [flags]``.

Each subcommand sweeps the parameter grid (delta x p x q x tau x kappa), the
resolution ladder and the fixture list, and writes ``results.csv`` (one row
per report), ``results.json`` (full reports, assertion outcomes and skipped
combinations) and, where relevant, decomposition dumps as JSON lines.

The exit status is 1 when an assertion-tier check fails (a geometric
invariant or an inequality whose constant is known), 2 on a malformed
configuration, and 0 otherwise.  Measured constants never affect it.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import reports
from .assouad import corollary_conditions
from .capacity import CapacityProblem, capacity_estimate, disc_compact
from .chains import build_chains
from .fixtures import fixture_family, parse_family
from .functional import FracParams
from .geometry import make_domain
from .grid import Lattice, parse_h
from .inequality import (
    InequalityReport,
    check_hardy,
    check_mazya_criterion,
    check_sobolev_poincare,
    check_truncation_transfer,
    check_weak_sobolev_poincare,
    check_whitney_capacity_sum,
    counterexample_functions,
    exhaustion_study,
)
from .whitney import uncovered_measure, whitney_decompose

log = logging.getLogger("fraclab")

COMMANDS = (
    "whitney",
    "chains",
    "capacity",
    "check-sp",
    "check-weak",
    "check-hardy",
    "check-mazya",
    "check-whitney-sum",
    "counterexample",
    "assouad",
    "exhaustion",
)

GROWTH_THRESHOLD = 3.0


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    domain: str = "unit_square"
    domain_params: dict = field(default_factory=dict)
    delta: list = field(default_factory=lambda: [0.5])
    p: list = field(default_factory=lambda: [2.0])
    q: list = field(default_factory=lambda: [None])
    tau: list = field(default_factory=lambda: [0.5])
    kappa: list = field(default_factory=lambda: [None])
    fixtures: list = field(default_factory=lambda: ["linear"])
    fixture_count: int = 1
    h: list = field(default_factory=lambda: ["1/64"])
    seed: int = 0
    out: str = "."
    max_level: int = 7
    m_max: int = 6
    cells: int = 256
    control: bool = False
    budget: int = 500
    radius: float = 0.125
    sizes: list = field(default_factory=lambda: [2.0, 4.0, 8.0, 16.0, 32.0])
    points: int = 4000

    @classmethod
    def from_toml(cls, path: str | Path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_mapping(data)

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        """Map a nested table onto the config: ``[domain]``, ``[params]`` and flat keys."""
        data = dict(data)
        kw: dict = {}
        dom = data.pop("domain", None)
        if isinstance(dom, dict):
            dom = dict(dom)
            if "name" not in dom:
                raise ConfigError("[domain] table needs a name")
            kw["domain"] = dom.pop("name")
            kw["domain_params"] = dom
        elif dom is not None:
            kw["domain"] = dom
        params = data.pop("params", {})
        if not isinstance(params, dict):
            raise ConfigError("params must be a table")
        data.update(params)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for k, v in data.items():
            if k in ("delta", "p", "q", "tau", "kappa", "h", "sizes", "fixtures") and not isinstance(v, list):
                v = [v]
            kw[k] = v
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for name in self.fixtures:
            try:
                parse_family(name)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        try:
            [parse_h(h) for h in self.h]
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad resolution: {exc}") from exc
        if self.fixture_count < 1:
            raise ConfigError("fixture_count must be >= 1")

    def params_grid(self):
        """All parameter combinations; yields ``(FracParams | None, description, reason)``."""
        for d, p, q, t, k in itertools.product(self.delta, self.p, self.q, self.tau, self.kappa):
            desc = f"delta={d} p={p} q={q} tau={t} kappa={k}"
            try:
                yield FracParams(float(d), float(p), float(t), None if k is None else float(k),
                                 None if q is None else float(q)), desc, ""
            except ValueError as exc:
                yield None, desc, str(exc)


class Run:
    """Collects rows, assertion outcomes and skipped combinations in task order."""

    def __init__(self, command: str, cfg: ExperimentConfig):
        self.command = command
        self.cfg = cfg
        self.rows: list[dict] = []
        self.details: list[dict] = []
        self.assertions: list[dict] = []
        self.skipped: list[dict] = []
        self.dumps: dict[str, list] = {}

    def add(self, rep: InequalityReport | dict, detail: dict | None = None) -> None:
        if isinstance(rep, InequalityReport):
            self.rows.append(rep.row())
            self.details.append(rep.to_json())
        else:
            self.rows.append(rep)
            self.details.append({**rep, **(detail or {})})

    def check(self, name: str, passed: bool, detail: str = "") -> None:
        self.assertions.append({"check": name, "passed": bool(passed), "detail": detail})
        if not passed:
            log.error("assertion failed: %s %s", name, detail)

    def skip(self, what: str, reason: str) -> None:
        self.skipped.append({"task": what, "reason": reason})
        log.warning("skipped %s: %s", what, reason)

    @property
    def failed(self) -> bool:
        return any(not a["passed"] for a in self.assertions)

    def write(self) -> Path:
        out = Path(self.cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        reports.write_csv(self.rows, out / "results.csv")
        reports.write_json(
            {
                "command": self.command,
                "config": asdict(self.cfg),
                "reports": self.details,
                "assertions": self.assertions,
                "skipped": self.skipped,
            },
            out / "results.json",
        )
        for name, records in self.dumps.items():
            reports.write_jsonl(records, out / name)
        return out


def _row(name: str, domain: str, lhs, rhs, P: FracParams | None = None, q=None, h=None) -> dict:
    ratio = lhs / rhs if (rhs not in (None, 0) and lhs is not None) else None
    return {
        "name": name,
        "domain": domain,
        "delta": P.delta if P else None,
        "p": P.p if P else None,
        "q": q,
        "tau": P.tau if P else None,
        "h": h,
        "lhs": lhs,
        "rhs": rhs,
        "ratio": ratio,
    }


def _domain(cfg: ExperimentConfig):
    try:
        return make_domain(cfg.domain, **cfg.domain_params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _lattices(run: Run, D):
    for h in run.cfg.h:
        try:
            yield Lattice.over(D.window, parse_h(h))
        except ValueError as exc:
            run.skip(f"h={h}", str(exc))


def _fixtures(run: Run, lat, D):
    for name in run.cfg.fixtures:
        for i, u in enumerate(fixture_family(name, run.cfg.seed, lat, D, run.cfg.fixture_count)):
            yield f"{name}#{i}", u


# ---------------------------------------------------------------------------
# subcommands


def cmd_whitney(run: Run) -> None:
    D = _domain(run.cfg)
    W = whitney_decompose(D, run.cfg.max_level)
    ratio = W.dists / W.diams
    lo, hi = float(ratio.min()), float(ratio.max())
    run.add(_row("whitney_diam_over_dist_max", D.name, float((1.0 / ratio).max()), 1.0))
    run.add(_row("whitney_dist_over_4diam_max", D.name, hi / 4.0, 1.0))
    run.add(_row("whitney_uncovered_measure", D.name, uncovered_measure(W), 2.0 ** -12),
            {"cubes": len(W), "unresolved": len(W.unresolved)})
    run.check("whitney diam <= dist", lo >= 1.0 - 1e-12, f"min dist/diam = {lo!r}")
    run.check("whitney dist <= 4 diam", hi <= 4.0 + 1e-12, f"max dist/diam = {hi!r}")
    run.dumps["whitney.jsonl"] = [json.loads(s) for s in W.to_jsonl().splitlines()]


def cmd_chains(run: Run) -> None:
    D = _domain(run.cfg)
    if not D.bounded:
        D = D.truncated()
    W = whitney_decompose(D, run.cfg.max_level)
    C = build_chains(W)
    qs = [q for q in run.cfg.q if q is not None] or [1.0, 2.0, 4.0]
    for q in qs:
        run.add(_row("chain_sigma", D.name, C.sigma(float(q)), None, q=float(q)),
                {"rho": C.rho, "per_level_max": C.per_level_max()})
    run.add(_row("chain_rho", D.name, float(C.rho), None), {"per_level_max": C.per_level_max()})
    bad = C.duality_mismatches()
    run.check("shadow/chain duality", bad == 0, f"{bad} mismatching shadows")
    run.dumps["chains.jsonl"] = [
        {"cube": [c.level, list(c.index)], "chain": [[r.level, list(r.index)] for r in C.chains[c]]}
        for c in W.cubes
    ]


def _compact(run: Run, lat, D):
    return disc_compact(lat, D, D.center_point, run.cfg.radius)


def cmd_capacity(run: Run) -> None:
    D = _domain(run.cfg)
    for P, desc, why in run.cfg.params_grid():
        if P is None:
            run.skip(desc, why)
            continue
        for lat in _lattices(run, D):
            try:
                prob = CapacityProblem(_compact(run, lat, D), D, P, lat)
            except ValueError as exc:
                run.skip(f"{desc} h={lat.h}", str(exc))
                continue
            res = capacity_estimate(prob, budget=run.cfg.budget)
            run.add(_row("capacity", D.name, res.value_upper, None, P, h=lat.h),
                    {"converged": res.converged, "iterations": res.iterations, "method": res.method})


def _needs_critical(run: Run, P: FracParams, n: int, desc: str) -> bool:
    try:
        P.q_or_critical(n)
        return True
    except ValueError as exc:
        run.skip(desc, str(exc))
        return False


def cmd_check_sp(run: Run) -> None:
    D = _domain(run.cfg)
    for P, desc, why in run.cfg.params_grid():
        if P is None:
            run.skip(desc, why)
            continue
        if not _needs_critical(run, P, D.dim, desc):
            continue
        for lat in _lattices(run, D):
            for fid, u in _fixtures(run, lat, D):
                run.add(check_sobolev_poincare(u, None, P, fixture=fid))


def cmd_check_weak(run: Run) -> None:
    D = _domain(run.cfg)
    for P, desc, why in run.cfg.params_grid():
        if P is None:
            run.skip(desc, why)
            continue
        if not _needs_critical(run, P, D.dim, desc):
            continue
        for lat in _lattices(run, D):
            aligned = lat.dyadic_level() is not None
            for fid, u in _fixtures(run, lat, D):
                rep = check_weak_sobolev_poincare(u, None, P, fixture=fid, with_a_functional=aligned)
                run.add(rep)
                strong = rep.extra["strong_lhs"]
                run.check("chebyshev weak <= strong", rep.lhs <= strong * (1 + 1e-12),
                          f"{fid} {desc}: weak={rep.lhs!r} strong={strong!r}")
                if aligned:
                    lower, upper = rep.extra["a_lower"], rep.extra["a_upper"]
                    run.check("packing lower <= sqrt(n)^(n/p+delta) seminorm_tau", lower <= upper * (1 + 1e-12),
                              f"{fid} {desc}: lower={lower!r} upper={upper!r}")


def cmd_check_hardy(run: Run) -> None:
    D = _domain(run.cfg)
    for P, desc, why in run.cfg.params_grid():
        if P is None:
            run.skip(desc, why)
            continue
        for lat in _lattices(run, D):
            for fid, u in _fixtures(run, lat, D):
                try:
                    run.add(check_hardy(u, None, P, fixture=fid))
                except ValueError as exc:
                    run.skip(f"{fid} {desc}", str(exc))


def cmd_check_mazya(run: Run) -> None:
    D = _domain(run.cfg)
    for P, desc, why in run.cfg.params_grid():
        if P is None:
            run.skip(desc, why)
            continue
        for lat in _lattices(run, D):
            try:
                run.add(check_mazya_criterion(_compact(run, lat, D), lat, P, budget=run.cfg.budget))
            except ValueError as exc:
                run.skip(f"{desc} h={lat.h}", str(exc))
                continue
            for fid, u in _fixtures(run, lat, D):
                res = check_truncation_transfer(u, None, P)
                if res.get("trivial"):
                    run.skip(f"{fid} {desc}", "fixture vanishes identically")
                    continue
                q = P.q if P.q is not None else P.p
                run.add(_row("truncation_transfer", D.name, res["factor"], res["constant"], P, q=q, h=lat.h),
                        {"fixture": fid, "c2_measured": res["c2_measured"], "chain_holds": res["chain_holds"],
                         "audit": res["audit"]})
                audit = res["audit"]
                run.check("truncation pointwise bounds",
                          audit["lipschitz_violations"] == 0 and audit["cross_level_violations"] == 0,
                          f"{fid} {desc}: {audit}")
                run.check("truncation constant bounds the factor", res["factor"] <= res["constant"],
                          f"{fid} {desc}: factor={res['factor']!r} constant={res['constant']!r}")


def cmd_check_whitney_sum(run: Run) -> None:
    D = _domain(run.cfg)
    for P, desc, why in run.cfg.params_grid():
        if P is None:
            run.skip(desc, why)
            continue
        for lat in _lattices(run, D):
            try:
                rep = check_whitney_capacity_sum(_compact(run, lat, D), lat, P, budget=run.cfg.budget)
            except ValueError as exc:
                run.skip(f"{desc} h={lat.h}", str(exc))
                continue
            run.add(rep)
            run.check("capacity of each piece <= capacity of K", rep.extra["subadditive"], f"{desc} h={lat.h}")


def cmd_counterexample(run: Run) -> None:
    cfg = run.cfg
    delta, p = float(cfg.delta[0]), float(cfg.p[0])
    q = None if cfg.q[0] is None else float(cfg.q[0])
    if not cfg.control and abs(delta * p - 1.0) > 1e-12:
        run.skip(f"delta={delta} p={p}", "the failure regime needs delta = 1/p (use --control otherwise)")
        return
    P = FracParams(delta, p, q=q)
    funcs = counterexample_functions(cfg.m_max, cfg.cells)
    trace = []
    for m, u in enumerate(funcs, start=1):
        rep = check_hardy(u, None, P, fixture=f"log_collapse_m{m}")
        rep.name = f"counterexample_m{m}"
        run.add(rep)
        trace.append(rep.ratio)
    growth = trace[-1] / trace[0]
    spread = max(trace) / min(trace)
    run.add(_row("counterexample_growth", "plane_minus_segment", trace[-1], trace[0], P, q=rep.q, h=rep.h),
            {"trace": trace, "spread": spread, "control": cfg.control})
    if cfg.control:
        log.info("control spread max/min = %.4g", spread)
        return
    increasing = all(b > a for a, b in zip(trace, trace[1:]))
    run.check("counterexample trace increasing", increasing, f"trace={trace}")
    run.check(f"counterexample growth >= {GROWTH_THRESHOLD}", growth >= GROWTH_THRESHOLD, f"growth={growth!r}")


def cmd_assouad(run: Run) -> None:
    D = _domain(run.cfg)
    profile_written = False
    for P, desc, why in run.cfg.params_grid():
        if P is None:
            run.skip(desc, why)
            continue
        res = corollary_conditions(D, P, points=run.cfg.points)
        prof = res.pop("profile")
        run.add(_row("assouad_upper", D.name, res["upper"], res["threshold"], P), {"conditions": res})
        run.add(_row("assouad_lower", D.name, res["lower"], res["threshold"], P), {"conditions": res})
        if not profile_written:
            out = Path(run.cfg.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "assouad_profile.csv").write_text(prof.to_csv())
            profile_written = True


def cmd_exhaustion(run: Run) -> None:
    D = _domain(run.cfg)
    if D.bounded:
        run.skip(D.name, "exhaustion needs an unbounded domain")
        return
    c = np.asarray(D.center_point, dtype=float)
    r = run.cfg.radius

    def bump(x):
        return np.clip(1.0 - np.sum((x - c) ** 2, -1) / r**2, 0.0, None) ** 2

    for P, desc, why in run.cfg.params_grid():
        if P is None:
            run.skip(desc, why)
            continue
        if not _needs_critical(run, P, D.dim, desc):
            continue
        for h in run.cfg.h:
            try:
                res = exhaustion_study(bump, D, P, run.cfg.sizes, parse_h(h), r, center=c)
            except ValueError as exc:
                run.skip(f"{desc} h={h}", str(exc))
                continue
            for row in res["rows"]:
                run.add(_row("exhaustion_mean", D.name, abs(row["mean"]), row["holder_bound"], P,
                             q=res["q"], h=parse_h(h)), {"size": row["size"], "a_star": row["a_star"]})
            last = res["rows"][-1]
            run.add(_row("exhaustion_zero_shift", D.name, last["lhs_zero"], last["lhs_inf"], P,
                         q=res["q"], h=parse_h(h)), {"size": last["size"]})
            run.check("exhaustion holder bound", res["holder_ok"], f"{desc} h={h}")


HANDLERS: dict[str, Callable[[Run], None]] = {
    "whitney": cmd_whitney,
    "chains": cmd_chains,
    "capacity": cmd_capacity,
    "check-sp": cmd_check_sp,
    "check-weak": cmd_check_weak,
    "check-hardy": cmd_check_hardy,
    "check-mazya": cmd_check_mazya,
    "check-whitney-sum": cmd_check_whitney_sum,
    "counterexample": cmd_counterexample,
    "assouad": cmd_assouad,
    "exhaustion": cmd_exhaustion,
}


# ---------------------------------------------------------------------------
# argument parsing


def _floats_or_none(text: str) -> list:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok.lower() in ("", "none", "auto"):
            out.append(None)
        else:
            out.append(float(parse_h(tok)))
    return out


def _strings(text: str) -> list:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment file; flags override its keys")
    common.add_argument("--out", help="output directory (default: current)")
    common.add_argument("--seed", type=int)
    common.add_argument("--domain", help="gallery member name")
    common.add_argument("--window-size", type=float, dest="window_size", help="window of unbounded members")
    common.add_argument("--delta", type=_floats_or_none, help="comma list")
    common.add_argument("--p", type=_floats_or_none, help="comma list")
    common.add_argument("--q", type=_floats_or_none, help="comma list; 'auto' for the default exponent")
    common.add_argument("--tau", type=_floats_or_none, help="comma list")
    common.add_argument("--kappa", type=_floats_or_none, help="comma list; 'auto' derives it from tau")
    common.add_argument("--h", type=_strings, help="comma list of mesh sizes, e.g. 1/64,1/128")
    common.add_argument("--fixtures", type=_strings, help="comma list of families; empty for none")
    common.add_argument("--fixture-count", type=int, dest="fixture_count")
    common.add_argument("--max-level", type=int, dest="max_level")
    common.add_argument("--m-max", type=int, dest="m_max")
    common.add_argument("--cells", type=int, help="cells per side for the counterexample lattice")
    common.add_argument("--control", action="store_true", default=None, help="run the subcritical comparison")
    common.add_argument("--budget", type=int, help="optimizer iteration budget")
    common.add_argument("--radius", type=float, help="radius of the compact disc / exhaustion bump")
    common.add_argument("--sizes", type=_floats_or_none, help="window sizes for the exhaustion")
    common.add_argument("--points", type=int, help="boundary sample size for dimension estimates")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="fraclab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HANDLERS[name].__name__.removeprefix("cmd_").replace("_", " "))
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.from_toml(args.config) if args.config else ExperimentConfig()
    for f in fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    if args.window_size is not None:
        cfg.domain_params = {**cfg.domain_params, "window_size": args.window_size}
    cfg.validate()
    return cfg


def _set_threads() -> None:
    n = os.environ.get("FRACLAB_THREADS")
    if not n:
        return
    import numba

    try:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
    except ValueError:
        log.warning("ignoring FRACLAB_THREADS=%r", n)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        _set_threads()
        run = Run(args.command, cfg)
        HANDLERS[args.command](run)
    except ConfigError as exc:
        log.error("%s", exc)
        return 2
    out = run.write()
    log.info("wrote %d rows to %s", len(run.rows), out / "results.csv")
    return 1 if run.failed else 0


if __name__ == "__main__":
    sys.exit(main())
