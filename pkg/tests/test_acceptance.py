"""Acceptance criteria, one test each.

Every criterion is a function returning ``(passed, detail)``.  Under pytest
the outcomes are collected and printed as one PASS/FAIL line per criterion in
the terminal summary; ``python tests/test_acceptance.py`` prints the same
lines directly.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from fraclab.assouad import corollary_conditions, lower_assouad_estimate, upper_assouad_estimate
from fraclab.capacity import CapacityProblem, capacity_estimate, compact_from_mask, disc_compact
from fraclab.chains import build_chains, verify_chain_properties
from fraclab.cli import main as cli_main
from fraclab.fixtures import fixture_family
from fraclab.functional import (
    FracParams,
    a_functional_bounds,
    inf_shift_lq,
    seminorm_full,
    weak_quasinorm,
)
from fraclab.geometry import GALLERY, make_domain
from fraclab.grid import GridFunction, Lattice
from fraclab.inequality import check_sobolev_poincare, check_truncation_transfer, counterexample_sequence
from fraclab.whitney import uncovered_measure, whitney_decompose

sys.path.insert(0, str(Path(__file__).parent))
from test_capacity import dense_capacity  # noqa: E402
from test_functional import MC_SEMINORM  # noqa: E402

RESULTS: dict[int, tuple[str, bool, str]] = {}

BOUNDED = ["unit_square", "ball", "l_shape"]


def criterion_1():
    worst_lo, worst_hi, worst_gap, slowest = math.inf, 0.0, 0.0, 0.0
    for name in sorted(GALLERY):
        t0 = time.perf_counter()
        W = whitney_decompose(make_domain(name), 7)
        slowest = max(slowest, time.perf_counter() - t0)
        r = W.dists / W.diams
        worst_lo, worst_hi = min(worst_lo, r.min()), max(worst_hi, r.max())
        worst_gap = max(worst_gap, uncovered_measure(W))
    ok = worst_lo >= 1 - 1e-12 and worst_hi <= 4 + 1e-12 and worst_gap <= 2.0**-12 and slowest < 5
    return ok, f"dist/diam in [{worst_lo:.6g}, {worst_hi:.6g}], uncovered {worst_gap:.3g}, slowest {slowest:.2f}s"


def criterion_2():
    D = make_domain("unit_square")
    lat = Lattice.cells(D.window, 64)
    combos = [FracParams(0.5, 2.0, 0.5), FracParams(0.3, 1.5, 0.5), FracParams(0.7, 2.0, 0.3)]
    funcs = fixture_family("random_smooth(4)", 2024, lat, D, count=50)
    t0 = time.perf_counter()
    violations, worst = 0, 0.0
    for P in combos:
        for u in funcs:
            lo, hi = a_functional_bounds(u, D, P)
            violations += lo > hi
            worst = max(worst, lo / hi)
    el = time.perf_counter() - t0
    return violations == 0 and el < 60, f"{violations} violations, max lower/upper {worst:.4g}, {el:.1f}s"


def criterion_3():
    D = make_domain("unit_square")
    P = FracParams(0.5, 2.0)
    errs = []
    for cells in (64, 128):
        u = GridFunction.from_callable(Lattice.cells(D.window, cells), D, lambda x: x[..., 0])
        errs.append(abs(seminorm_full(u, D, P) / MC_SEMINORM - 1))
    return errs[0] <= 0.02 and errs[1] <= 0.01, f"relative error {errs[0]:.4%} at 1/64, {errs[1]:.4%} at 1/128"


def _level_fixtures(count=20):
    D = make_domain("ball")
    lat = Lattice.cells(D.window, 32)
    bumps = fixture_family("radial_bump", 11, lat, D, count=count // 2)
    logs = fixture_family("log_bump", 11, lat, D, count=count - count // 2)
    # spread the values across several dyadic levels
    return D, [12.0 * u for u in bumps] + [2.0 * u for u in logs]


def criterion_4():
    D, funcs = _level_fixtures(20)
    P = FracParams(0.5, 2.0)
    lip = cross = 0
    pairs = 0
    worst_factor, const, exhaustive, chain = 0.0, 0.0, True, True
    for u in funcs:
        T = check_truncation_transfer(u, D, P)
        a = T["audit"]
        lip += a["lipschitz_violations"]
        cross += a["cross_level_violations"]
        pairs += a["pairs"]
        exhaustive &= a["exhaustive"]
        chain &= T["chain_holds"]
        worst_factor = max(worst_factor, T["factor"])
        const = T["constant"]
    ok = lip == 0 and cross == 0 and exhaustive and chain and worst_factor <= const
    return ok, (f"{pairs} pairs: {lip} Lipschitz and {cross} cross-level violations; "
                f"max factor {worst_factor:.4g} <= constant {const:.4g}")


def criterion_5():
    viol = 0
    checked = 0
    mean_err = 0.0
    median_ok = True
    for name in ("unit_square", "ball", "l_shape"):
        D = make_domain(name)
        lat = Lattice.cells(D.window, 32)
        funcs = []
        for fam in ("linear", "radial_bump", "log_bump", "two_level", "random_smooth(4)"):
            funcs += fixture_family(fam, 5, lat, D, count=4)
        for u in funcs:
            v = np.sort(u.values[u.inside])
            for q in (1.0, 2.0, 4.0):
                for a in (u.mean(), v[len(v) // 2]):
                    checked += 1
                    viol += weak_quasinorm(u, a, q) > u.lq_power(q, a)
            a2, _ = inf_shift_lq(u, D, 2.0)
            mean_err = max(mean_err, abs(a2 - v.mean()))
            a1, _ = inf_shift_lq(u, D, 1.0)
            # any minimizer of the L^1 deviation lies between the two central values
            lo, hi = v[(len(v) - 1) // 2], v[len(v) // 2]
            step = np.diff(np.unique(v)).min() if len(np.unique(v)) > 1 else 0.0
            median_ok &= lo - step <= a1 <= hi + step
    ok = viol == 0 and mean_err <= 1e-8 and median_ok
    return ok, f"{viol}/{checked} Chebyshev violations, |a*-mean| <= {mean_err:.2g}, median within one value: {median_ok}"


def criterion_6():
    D = make_domain("unit_square")
    P = FracParams(0.5, 2.0)
    lat = Lattice.cells(D.window, 16)
    mask = np.zeros(lat.shape, bool)
    mask[8, 8] = True
    res = capacity_estimate(CapacityProblem(compact_from_mask(lat, D, mask), D, P, lat))
    ref, _ = dense_capacity(lat, mask, P.s)
    err = abs(res.value_upper / ref - 1)
    lat32 = Lattice.cells(D.window, 32)
    vals = [capacity_estimate(CapacityProblem(disc_compact(lat32, D, (0.5, 0.5), r), D, P, lat32)).value_upper
            for r in (0.05, 0.1, 0.15, 0.2, 0.3)]
    mono = all(a <= b * (1 + 1e-3) for a, b in zip(vals, vals[1:]))
    return err <= 0.01 and mono, f"single cell {res.value_upper:.8g} vs oracle {ref:.8g} ({err:.2e}); nested monotone: {mono}"


def criterion_7():
    P = FracParams(0.5, 2.0, 0.5)
    t0 = time.perf_counter()
    worst, where = 0.0, ""
    for name in BOUNDED:
        D = make_domain(name)
        for fam in ("linear", "radial_bump", "random_smooth(4)"):
            r = []
            for h in ("1/64", "1/128"):
                lat = Lattice.over(D.window, h)
                r.append(check_sobolev_poincare(fixture_family(fam, 0, lat, D)[0], D, P).ratio)
            change = abs(r[1] / r[0] - 1)
            if change > worst:
                worst, where = change, f"{name}/{fam}"
    el = time.perf_counter() - t0
    return worst < 0.10 and el < 600, f"max change {worst:.2%} ({where}), {el:.0f}s"


def criterion_8():
    t0 = time.perf_counter()
    _, trace = counterexample_sequence(6, 0.5, 2.0, 2.0, N=256)
    _, control = counterexample_sequence(6, 0.3, 2.0, 2.0, N=256, control=True)
    el = time.perf_counter() - t0
    increasing = all(b > a for a, b in zip(trace, trace[1:]))
    growth = trace[-1] / trace[0]
    spread = max(control) / min(control)
    ok = increasing and growth >= 3 and spread <= 1.2 and el < 300
    return ok, f"growth {growth:.3f} (increasing: {increasing}), control max/min {spread:.3f}, {el:.0f}s"


def criterion_9():
    rho, finite, dual, drift = 0, True, 0, 0.0
    for name in BOUNDED:
        sig = []
        for level in (6, 7):
            C = build_chains(whitney_decompose(make_domain(name), level))
            rep = verify_chain_properties(C, 4.0)
            rho = max(rho, rep.rho)
            finite &= math.isfinite(rep.sigma_measured)
            dual += C.duality_mismatches()
            sig.append(rep.sigma_measured)
        drift = max(drift, abs(sig[1] / sig[0] - 1))
    ok = rho <= 3 and finite and dual == 0 and drift <= 0.05
    return ok, f"rho {rho}, sigma finite: {finite}, duality mismatches {dual}, sigma drift 6->7 {drift:.1%}"


def criterion_10():
    seg = np.stack([np.linspace(0, 1, 10_000), np.zeros(10_000)], 1)
    sq = make_domain("unit_square").boundary_sample(1 / 1000)
    ests = [f(E)[0] for E in (seg, sq) for f in (upper_assouad_estimate, lower_assouad_estimate)]
    in_band = all(0.85 <= e <= 1.15 for e in ests)
    point = upper_assouad_estimate(np.zeros((1000, 2)))[0] == 0.0
    cov = all(upper_assouad_estimate(s * seg)[0] == ests[0] and lower_assouad_estimate(s * seg)[0] == ests[1]
              for s in (0.5, 2.0))
    expected = [("plane_minus_segment", 0.3, "A", "holds"), ("plane_minus_segment", 0.5, "A", "inconclusive"),
                ("cone", 0.6, "B", "holds")]
    got = [corollary_conditions(make_domain(n), FracParams(d, 2.0))[k] for n, d, k, _ in expected]
    match = got == [e[3] for e in expected]
    ok = in_band and point and cov and match
    return ok, (f"estimates {', '.join(f'{e:.3f}' for e in ests)}; point 0: {point}; "
                f"scale covariance: {cov}; corollary {got}")


def criterion_11(tmp: Path):
    runs = [
        ["check-sp", "--domain", "ball", "--fixtures", "linear,radial_bump,random_smooth(4)", "--fixture-count", "3",
         "--h", "1/32"],
        ["check-weak", "--domain", "l_shape", "--fixtures", "random_smooth(3)", "--fixture-count", "4", "--h", "1/32"],
        ["capacity", "--h", "1/32"],
    ]
    same = True
    for i, args in enumerate(runs):
        outs = []
        for rep in ("a", "b"):
            out = tmp / f"{i}{rep}"
            cli_main(args + ["--seed", "17", "--out", str(out)])
            outs.append((out / "results.csv").read_bytes())
        same &= outs[0] == outs[1] and len(outs[0].splitlines()) > 1
    return same, f"{len(runs)} subcommands run twice: byte-identical {same}"


TITLES = {
    1: "Whitney invariants",
    2: "packing functional below restricted seminorm",
    3: "seminorm against Monte-Carlo oracle",
    4: "truncation machinery",
    5: "Chebyshev and optimal shift",
    6: "capacity oracle and monotonicity",
    7: "Sobolev-Poincare ratio stability",
    8: "counterexample regression",
    9: "chain properties",
    10: "Assouad estimates",
    11: "CLI determinism",
}


def _run(n, *args):
    t0 = time.perf_counter()
    ok, detail = globals()[f"criterion_{n}"](*args)
    RESULTS[n] = (TITLES[n], bool(ok), f"{detail} [{time.perf_counter() - t0:.1f}s]")
    return ok, detail


@pytest.mark.parametrize("n", range(1, 11))
def test_criterion(n):
    ok, detail = _run(n)
    assert ok, detail


def test_criterion_11(tmp_path):
    ok, detail = _run(11, tmp_path)
    assert ok, detail


def summary_lines():
    return [f"{'PASS' if ok else 'FAIL'} criterion {n:2d} {title}: {detail}"
            for n, (title, ok, detail) in sorted(RESULTS.items())]


if __name__ == "__main__":
    import tempfile

    for n in range(1, 12):
        if n == 11:
            with tempfile.TemporaryDirectory() as d:
                _run(n, Path(d))
        else:
            _run(n)
        print(summary_lines()[-1], flush=True)
