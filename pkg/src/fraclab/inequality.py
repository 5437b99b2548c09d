"""Checkers that evaluate both sides of the fractional inequalities on grid functions.

Every checker returns measured quantities; none of them asserts a continuum
constant.  Ratios are ``lhs / rhs`` and are invariant under ``u -> lambda u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .capacity import (
    CapacityProblem,
    capacity_estimate,
    compact_from_mask,
    truncate_levels,
)
from .functional import (
    FracParams,
    a_functional_bounds,
    hardy_exponent,
    hardy_lhs,
    inf_shift_lq,
    kernel_table,
    seminorm_energy,
    seminorm_tau_energy,
    weak_quasinorm,
)
from .geometry import CompactSet, Domain, make_domain
from .grid import GridFunction, Lattice
from .whitney import whitney_decompose

__all__ = [
    "InequalityReport",
    "check_sobolev_poincare",
    "check_weak_sobolev_poincare",
    "check_truncation_transfer",
    "check_hardy",
    "check_mazya_criterion",
    "check_whitney_capacity_sum",
    "counterexample_functions",
    "counterexample_sequence",
    "exhaustion_study",
    "level_labels",
    "refinement_trace",
    "mazya_constant",
    "geometric_series_bound",
]

ZERO_LEVEL = -(2 ** 40)  # label of cells where u vanishes, below every level

REPORT_FIELDS = ("name", "domain", "delta", "p", "q", "tau", "h", "lhs", "rhs", "ratio")


@dataclass
class InequalityReport:
    name: str
    params: FracParams
    lhs: float
    rhs: float
    ratio: float
    domain: str = ""
    fixture: str = ""
    h: float = float("nan")
    q: float = float("nan")
    refinement_trace: list[tuple[float, float]] = field(default_factory=list)
    notes: str = ""
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {
            "name": self.name,
            "domain": self.domain,
            "delta": self.params.delta,
            "p": self.params.p,
            "q": self.q,
            "tau": self.params.tau,
            "h": self.h,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
        }

    def to_json(self) -> dict:
        out = self.row()
        out.update(
            fixture=self.fixture,
            refinement_trace=[list(t) for t in self.refinement_trace],
            notes=self.notes,
            extra=_jsonable(self.extra),
        )
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _ratio(lhs: float, rhs: float, what: str) -> tuple[float, str]:
    if rhs == 0:
        if lhs == 0:
            return float("nan"), "degenerate 0/0, inequality vacuous"
        raise ArithmeticError(f"{what}: right side vanishes with positive left side (quadrature bug)")
    return lhs / rhs, ""


# ---------------------------------------------------------------------------
# Sobolev-Poincare


def _shift(u: GridFunction, q: float, shift: str | float | None) -> float:
    if isinstance(shift, (int, float)):
        return float(shift)
    if shift is None:
        shift = "mean" if u.domain.bounded else "inf"
    if shift == "mean":
        return u.mean()
    if shift == "inf":
        return inf_shift_lq(u, None, q)[0]
    raise ValueError(f"unknown shift {shift!r}")


def check_sobolev_poincare(u: GridFunction, D: Domain | None = None, P: FracParams | None = None,
                           shift: str | float | None = None, fixture: str = "") -> InequalityReport:
    """Strong inequality: ``sum |u - a|^q h^n`` against ``seminorm_tau(u)^q``.

    ``a`` is the mean on bounded domains and the optimal shift otherwise; ``q``
    defaults to the critical exponent.
    """
    n = u.n
    q = P.q_or_critical(n)
    a = _shift(u, q, shift)
    lhs = u.lq_power(q, a)
    rhs = seminorm_tau_energy(u, P) ** (q / P.p)
    ratio, note = _ratio(lhs, rhs, "sobolev-poincare")
    return InequalityReport("sobolev_poincare", P, lhs, rhs, ratio, u.domain.name, fixture, u.h, q,
                            notes=note, extra={"shift": a})


def check_weak_sobolev_poincare(u: GridFunction, D: Domain | None = None, P: FracParams | None = None,
                                fixture: str = "", with_a_functional: bool = True) -> InequalityReport:
    """Weak inequality with two right sides: the restricted seminorm and the packing functional.

    ``lhs = min over a in {u_D, a*}`` of the weak quasinorm.  ``extra`` carries
    the packing-functional ratios and the strong/weak factor.
    """
    n = u.n
    q = P.q_or_critical(n)
    mean = u.mean()
    a_star = inf_shift_lq(u, None, q)[0]
    weak = min(weak_quasinorm(u, mean, q), weak_quasinorm(u, a_star, q))
    strong = u.lq_power(q, a_star)
    rhs = seminorm_tau_energy(u, P) ** (q / P.p)
    ratio, note = _ratio(weak, rhs, "weak sobolev-poincare")
    extra = {"strong_lhs": strong, "a_mean": mean, "a_star": a_star}
    if weak > 0:
        extra["strong_over_weak"] = strong / weak
    if with_a_functional and u.lattice.dyadic_level() is not None:
        lower, upper = a_functional_bounds(u, None, P)
        extra["a_lower"] = lower
        extra["a_upper"] = upper
        extra["ratio_a_upper"] = weak / upper ** q if upper > 0 else float("nan")
        extra["ratio_a_lower"] = weak / lower ** q if lower > 0 else float("nan")
    return InequalityReport("weak_sobolev_poincare", P, weak, rhs, ratio, u.domain.name, fixture, u.h, q,
                            notes=note, extra=extra)


def refinement_trace(make_u: Callable[[Lattice], GridFunction], D: Domain, P: FracParams,
                     counts: Sequence[int], check=check_sobolev_poincare) -> list[tuple[float, float]]:
    """``(h, ratio)`` for a fixture sampled on successively finer lattices."""
    out = []
    for m in counts:
        lat = Lattice.cells(D.window, m)
        rep = check(make_u(lat), D, P)
        out.append((lat.h, rep.ratio))
    return out


# ---------------------------------------------------------------------------
# Hardy and Maz'ya


def _hardy_q(P: FracParams, n: int, q: float | None) -> float:
    q = q if q is not None else (P.q if P.q is not None else P.p)
    gap = 1.0 / P.p - 1.0 / q
    if gap < -1e-12 or gap > P.delta / n + 1e-12:
        raise ValueError(f"need 0 <= 1/p - 1/q <= delta/n, got {gap:.6g} (delta/n = {P.delta / n:.6g})")
    return q


def check_hardy(u: GridFunction, D: Domain | None = None, P: FracParams | None = None, q: float | None = None,
                fixture: str = "", margin: float | None = None) -> InequalityReport:
    """Weighted left side ``hardy_lhs`` against ``seminorm_full(u)^q``."""
    q = _hardy_q(P, u.n, q)
    lhs = hardy_lhs(u, None, P, q, margin)
    rhs = seminorm_energy(u, P) ** (q / P.p)
    ratio, note = _ratio(lhs, rhs, "hardy")
    return InequalityReport("hardy", P, lhs, rhs, ratio, u.domain.name, fixture, u.h, q, notes=note,
                            extra={"weight_exponent": hardy_exponent(P.delta, P.p, q, u.n)})


def check_mazya_criterion(K: CompactSet, lattice: Lattice, P: FracParams, q: float | None = None,
                          budget: int = 500) -> InequalityReport:
    """``∫_K dist^-w`` against the capacity upper bound to the power ``q/p``.

    The capacity is only bounded from above, so a small ratio here does not
    certify the criterion; a large or growing ratio is meaningful.
    """
    D = K.domain
    q = _hardy_q(P, lattice.n, q)
    w = hardy_exponent(P.delta, P.p, q, lattice.n)
    if K.empty:
        return InequalityReport("mazya", P, 0.0, 0.0, float("nan"), D.name, "", lattice.h, q,
                                notes="empty compact set: 0 <= 0")
    d = D.dist_boundary(lattice.centers[K.cells])
    lhs = math.fsum(d ** (-w)) * lattice.cell_volume
    cap = capacity_estimate(CapacityProblem(K, D, P, lattice), budget=budget)
    rhs = cap.value_upper ** (q / P.p)
    ratio, note = _ratio(lhs, rhs, "mazya")
    return InequalityReport("mazya", P, lhs, rhs, ratio, D.name, "", lattice.h, q,
                            notes="capacity is an upper bound: the ratio bounds the constant from below only",
                            extra={"capacity_upper": cap.value_upper, "converged": cap.converged})


def check_whitney_capacity_sum(K: CompactSet, lattice: Lattice, P: FracParams, q: float | None = None,
                               max_level: int | None = None, budget: int = 500) -> InequalityReport:
    """Measured ``N`` in ``(sum_Q cap(K ∩ Q)^(q/p))^(p/q) <= N cap(K)`` over Whitney cubes meeting ``K``."""
    D = K.domain
    q = _hardy_q(P, lattice.n, q)
    J = max_level if max_level is not None else int(round(-math.log2(lattice.h))) - 1
    W = whitney_decompose(D, J)
    whole = capacity_estimate(CapacityProblem(K, D, P, lattice), budget=budget).value_upper
    terms = []
    for Q in W.cubes:
        mask = np.zeros(lattice.shape, dtype=bool)
        mask[lattice.cube_slice(Q)] = True
        part = mask & K.cells
        if not part.any():
            continue
        cap = capacity_estimate(CapacityProblem(compact_from_mask(lattice, D, part), D, P, lattice),
                                budget=budget).value_upper
        terms.append({"level": Q.level, "index": list(Q.index), "cells": int(part.sum()), "capacity": cap})
    lhs = math.fsum(t["capacity"] ** (q / P.p) for t in terms) ** (P.p / q) if terms else 0.0
    ratio, note = _ratio(lhs, whole, "whitney capacity sum")
    return InequalityReport("whitney_capacity_sum", P, lhs, whole, ratio, D.name, "", lattice.h, q, notes=note,
                            extra={"terms": terms, "subadditive": all(t["capacity"] <= whole * (1 + 1e-3) for t in terms)})


# ---------------------------------------------------------------------------
# truncation machinery


def mazya_constant(p: float, q: float) -> float:
    """Assembled factor ``2^(3q + 2q/p) (1 - 2^-p)^(-q/p)``."""
    return 2.0 ** (3 * q + 2 * q / p) * (1.0 - 2.0 ** (-p)) ** (-q / p)


def geometric_series_bound(p: float, terms: int = 60) -> tuple[float, float]:
    """``(sum_{m=0}^{terms-1} 2^(-m p), 1 / (1 - 2^-p))``."""
    return math.fsum(2.0 ** (-m * p) for m in range(terms)), 1.0 / (1.0 - 2.0 ** (-p))


def level_labels(values: np.ndarray) -> np.ndarray:
    """Index ``k`` of the level set ``A_k = {2^k < |u| <= 2^(k+1)}``; a large negative sentinel where ``u = 0``."""
    a = np.abs(np.asarray(values, dtype=float))
    mant, expo = np.frexp(a)
    expo = expo.astype(np.int64)
    k = np.where(mant == 0.5, expo - 2, expo - 1)
    return np.where(a > 0, k, ZERO_LEVEL)


def _dense_pairs(u: GridFunction, P: FracParams):
    """Support x domain pair weights ``|x - y|^(-n - delta p) h^(2n)`` (small fixtures only)."""
    lat = u.lattice
    supp_idx = np.argwhere(u.support_mask)
    dom_idx = np.argwhere(u.inside)
    K = kernel_table(lat, P.s)
    off = np.abs(supp_idx[:, None, :] - dom_idx[None, :, :])
    return supp_idx, dom_idx, K[tuple(off[..., d] for d in range(lat.n))]


def check_truncation_transfer(u: GridFunction, D: Domain | None = None, P: FracParams | None = None,
                              q: float | None = None, max_pairs: int = 12_000_000) -> dict:
    """Run the level-set transfer from the capacity condition to the weighted inequality on one function.

    With weight ``omega = dist^-w`` and ``u_k`` the level truncations, the
    measured capacity-side constant is
    ``C2 = max_k ∫_{A_(k+1)} omega / E(u_k)^(q/p)`` (``u_k`` is an admissible
    test function for the closure of ``A_(k+1)``).  Every step of the chain

        ∫|u|^q omega <= sum_k 2^((k+2)q) ∫_{A_(k+1)} omega
                     <= C2 2^(2q) sum_k 2^(kq) E(u_k)^(q/p)
                     <= C2 2^(3q + 2q/p) (1 - 2^-p)^(-q/p) E(u)^(q/p)

    is evaluated, together with the pairwise Lipschitz transfers
    ``|u_k(x) - u_k(y)| <= 2^-k |u(x) - u(y)|`` and, for ``x ∈ A_i``,
    ``y ∈ A_j``, ``i <= k <= j``: ``<= 2 * 2^-j |u(x) - u(y)|``.
    """
    q = _hardy_q(P, u.n, q)
    lat = u.lattice
    w = hardy_exponent(P.delta, P.p, q, u.n)
    supp = u.support_mask
    vol = lat.cell_volume
    if not supp.any():
        return {"trivial": True}
    dist = u.domain.dist_boundary(lat.centers)
    omega = np.zeros(lat.shape)
    omega[supp] = dist[supp] ** (-w)
    labels = level_labels(u.values)
    levels = sorted(set(labels[supp].tolist()))
    strong = math.fsum((np.abs(u.values[supp]) ** q) * omega[supp]) * vol
    energy = seminorm_energy(u, P)

    # partition identity: the level sets tile the support
    parts = {k: math.fsum((np.abs(u.values[supp & (labels == k)]) ** q) * omega[supp & (labels == k)]) * vol
             for k in levels}
    partition_gap = abs(math.fsum(parts.values()) - strong)

    # step 1: |u| <= 2^(k+2) on A_(k+1)
    step1 = math.fsum(2.0 ** ((k + 1) * q) * math.fsum(omega[supp & (labels == k)]) * vol for k in levels)
    # truncation energies and the measured C2
    trunc_energy = {}
    c2 = 0.0
    for k in [lv - 1 for lv in levels]:
        Ek = seminorm_energy(truncate_levels(u, k), P)
        trunc_energy[k] = Ek
        mass = math.fsum(omega[supp & (labels == k + 1)]) * vol
        if mass > 0:
            if Ek == 0:
                raise ValueError(f"truncation u_{k} is constant: u must vanish near the boundary")
            c2 = max(c2, mass / Ek ** (q / P.p))
    step2 = c2 * 2.0 ** (2 * q) * math.fsum(2.0 ** (k * q) * trunc_energy[k] ** (q / P.p) for k in trunc_energy)
    const = mazya_constant(P.p, q)
    final = c2 * const * energy ** (q / P.p)

    # pairwise transfers (exhaustive over support x domain pairs)
    audit = {"pairs": 0, "lipschitz_violations": 0, "cross_level_violations": 0}
    n_pairs = int(supp.sum()) * int(u.inside.sum())
    if n_pairs <= max_pairs:
        supp_idx, dom_idx, _ = _dense_pairs(u, P)
        ux = u.values[tuple(supp_idx.T)]
        uy = u.values[tuple(dom_idx.T)]
        lx = labels[tuple(supp_idx.T)]
        ly = labels[tuple(dom_idx.T)]
        du = np.abs(ux[:, None] - uy[None, :])
        for k in [lv - 1 for lv in levels] + levels:
            uk = truncate_levels(u, k).values
            dk = np.abs(uk[tuple(supp_idx.T)][:, None] - uk[tuple(dom_idx.T)][None, :])
            audit["lipschitz_violations"] += int(np.count_nonzero(dk > 2.0 ** (-k) * du * (1 + 1e-12) + 1e-300))
            lo_lab = np.minimum(lx[:, None], ly[None, :])
            hi_lab = np.maximum(lx[:, None], ly[None, :])
            # zero cells carry a sentinel label below every level, so they count as i <= k
            both = (lo_lab <= k) & (k <= hi_lab)
            bound = 2.0 * np.exp2(-hi_lab.astype(float)) * du
            audit["cross_level_violations"] += int(np.count_nonzero(both & (dk > bound * (1 + 1e-12) + 1e-300)))
        audit["pairs"] = int(du.size)
        audit["exhaustive"] = True
    else:
        audit["exhaustive"] = False

    return {
        "q": q,
        "levels": levels,
        "nonempty_levels": len(levels),
        "strong": strong,
        "energy": energy,
        "partition_gap": partition_gap,
        "step1": step1,
        "step2": step2,
        "final": final,
        "c2_measured": c2,
        "strong_ratio": strong / energy ** (q / P.p) if energy > 0 else float("nan"),
        "factor": (strong / energy ** (q / P.p)) / c2 if c2 > 0 else float("nan"),
        "constant": const,
        "chain_holds": strong <= step1 * (1 + 1e-12) and step1 <= step2 * (1 + 1e-12)
        and strong <= final * (1 + 1e-12),
        "truncation_energies": trunc_energy,
        "audit": audit,
    }


# ---------------------------------------------------------------------------
# counterexample


def counterexample_functions(m_max: int = 6, N: int = 256, R: float = 0.6,
                             window_size: float = 3.0) -> list[GridFunction]:
    """Truncated logarithms ``clip(1 - log(d / r_m) / log(R / r_m), 0, 1)`` around the slit, ``r_m = 2^-m``."""
    D = make_domain("plane_minus_segment", window_size=window_size)
    lat = Lattice.cells(D.window, N)
    d = D.dist_boundary(lat.centers)
    out = []
    for m in range(1, m_max + 1):
        r = 2.0 ** (-m)
        if r >= R:
            raise ValueError("need r_m < R")
        with np.errstate(divide="ignore"):
            v = np.clip(1.0 - np.log(d / r) / math.log(R / r), 0.0, 1.0)
        out.append(GridFunction(lat, D, v))
    return out


def counterexample_sequence(m_max: int = 6, delta: float = 0.5, p: float = 2.0, q: float | None = None,
                            N: int = 256, R: float = 0.6, window_size: float = 3.0,
                            control: bool = False) -> tuple[list[GridFunction], list[float]]:
    """Hardy ratios of the collapsing logarithmic family on the plane minus a segment.

    ``delta * p = 1`` is required unless ``control`` is set (the subcritical
    comparison run).  Returns the functions and the ratio trace in ``m``.
    """
    if not control and abs(delta * p - 1.0) > 1e-12:
        raise ValueError("the failure regime needs delta = 1/p")
    P = FracParams(delta, p, q=q)
    funcs = counterexample_functions(m_max, N, R, window_size)
    trace = [check_hardy(u, None, P).ratio for u in funcs]
    return funcs, trace


# ---------------------------------------------------------------------------
# exhaustion


def exhaustion_study(f: Callable[[np.ndarray], np.ndarray], D: Domain, P: FracParams, sizes: Sequence[float],
                     h: float, support_radius: float, center=None) -> dict:
    """Means over nested windows ``D_i = D ∩ window_i`` of a fixed compactly supported function.

    ``f`` maps points to values and must vanish outside
    ``B(center, support_radius)``; ``sizes`` are the window sizes.  Reports
    ``|u_{D_i}|`` against the Hölder bound ``|D_i|^(-1/p) |u|_p`` and the
    critical-exponent left side with ``a = 0`` against the optimal shift.
    """
    if D.bounded:
        raise ValueError("exhaustion needs an unbounded domain")
    q = P.q_or_critical(D.dim)
    name = D.name
    base = {k: v for k, v in D.params.items() if k != "window_size"}
    rows = []
    for s in sizes:
        Di = make_domain(name, window_size=s, **base)
        lat = Lattice.over(Di.window, h)
        u = GridFunction.from_callable(lat, Di, f)
        supp = u.support_mask
        c = np.asarray(center if center is not None else Di.center_point)
        if np.any(np.linalg.norm(lat.centers[supp] - c, axis=-1) > support_radius):
            raise ValueError("function is not supported in the stated ball")
        meas = u.measure()
        vals = u.values[u.inside]
        mean = u.mean()
        lp = u.lq_power(P.p) ** (1.0 / P.p)
        a_star, inf_lhs = inf_shift_lq(u, None, q)
        rows.append({
            "size": s,
            "measure": meas,
            "mean": mean,
            "holder_bound": meas ** (-1.0 / P.p) * lp,
            "lhs_zero": u.lq_power(q, 0.0),
            "lhs_inf": inf_lhs,
            "a_star": a_star,
            "cells": int(vals.size),
        })
    means = [abs(r["mean"]) for r in rows]
    last = rows[-1]
    return {
        "q": q,
        "rows": rows,
        "means_decreasing": all(b <= a * (1 + 1e-12) for a, b in zip(means, means[1:])),
        "holder_ok": all(abs(r["mean"]) <= r["holder_bound"] * (1 + 1e-12) for r in rows),
        "zero_shift_ratio": last["lhs_zero"] / last["lhs_inf"] if last["lhs_inf"] > 0 else float("nan"),
    }
