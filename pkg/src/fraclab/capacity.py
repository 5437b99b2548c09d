"""Discrete (delta, p)-capacity and the explicit test functions built from cubes and levels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg
from scipy.spatial import cKDTree

from . import _kernels
from .functional import FracParams, convolve_kernel, kernel_table, seminorm_energy, zero_partner_weights, _strides
from .geometry import CompactSet, DyadicCube, Domain
from .grid import GridFunction, Lattice

__all__ = [
    "CapacityProblem",
    "CapacityResult",
    "support_cells",
    "capacity_estimate",
    "cutoff_phi",
    "truncate_levels",
    "compact_from_mask",
    "disc_compact",
]


def support_cells(lattice: Lattice, domain: Domain) -> np.ndarray:
    """Cells whose closed square lies inside the open domain."""
    lo = lattice.centers - 0.5 * lattice.h
    hi = lattice.centers + 0.5 * lattice.h
    d = domain.box_distance(lo.reshape(-1, lattice.n), hi.reshape(-1, lattice.n))
    return (d > 0).reshape(lattice.shape)


def compact_from_mask(lattice: Lattice, domain: Domain, mask) -> CompactSet:
    return CompactSet(np.asarray(mask, dtype=bool), domain, lattice.centers)


def disc_compact(lattice: Lattice, domain: Domain, center, radius: float) -> CompactSet:
    """Cells centered in the closed ball ``B(center, radius)``."""
    d = np.linalg.norm(lattice.centers - np.asarray(center, dtype=float), axis=-1)
    return compact_from_mask(lattice, domain, d <= radius)


@dataclass(frozen=True)
class CapacityProblem:
    """Minimize the full seminorm energy over ``u >= 1`` on ``K``, ``u = 0`` off the support cells."""

    K: CompactSet
    domain: Domain
    params: FracParams
    lattice: Lattice

    def __post_init__(self):
        if self.K.cells.shape != self.lattice.shape:
            raise ValueError("compact set does not match the lattice")
        if self.K.count and not np.all(self.support[self.K.cells]):
            raise ValueError("empty admissible set: K touches cells whose closure leaves the domain")

    @property
    def support(self) -> np.ndarray:
        return support_cells(self.lattice, self.domain)

    def to_json(self) -> dict:
        return {
            "domain": self.domain.to_json(),
            "params": self.params.to_json(),
            "lattice": self.lattice.to_json(),
            "K_cells": np.argwhere(self.K.cells).tolist(),
        }


@dataclass
class CapacityResult:
    value_upper: float
    minimizer: GridFunction | None
    trace: list[float] = field(default_factory=list)
    converged: bool = True
    iterations: int = 0
    method: str = ""

    def to_json(self) -> dict:
        return {
            "value_upper": self.value_upper,
            "trace": self.trace,
            "converged": self.converged,
            "iterations": self.iterations,
            "method": self.method,
        }


def _initial_guess(prob: CapacityProblem, support: np.ndarray) -> np.ndarray:
    lat = prob.lattice
    Kc = lat.centers[prob.K.cells]
    pts = lat.centers[support]
    dK, _ = cKDTree(Kc).query(pts)
    dD = prob.domain.dist_boundary(pts)
    u = np.zeros(lat.shape)
    u[support] = np.clip(1.0 - dK / np.maximum(dK + dD, 1e-300), 0.0, 1.0)
    u[prob.K.cells] = 1.0
    return u


def capacity_estimate(prob: CapacityProblem, budget: int = 500, tol: float = 1e-10,
                      method: str = "auto") -> CapacityResult:
    """Upper bound for the discrete capacity of ``K``.

    ``p = 2`` solves the reduced linear system of the quadratic energy with
    Jacobi-preconditioned conjugate gradients (kernel products by FFT).  Other
    ``p`` run projected subgradient descent with steps ``s0 / sqrt(t)``,
    ``s0 = 1 / |g_0|``; the projection clamps to ``[0, 1]``, sets ``u = 1`` on
    ``K`` and ``u = 0`` off the support cells.  The reported value is the energy
    of the best admissible iterate, recomputed from scratch.

    The subgradient run is flagged ``converged`` when the best value improved
    by less than ``1e-4`` (relative) over the last tenth of the budget.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    lat = prob.lattice
    P = prob.params
    if prob.K.empty:
        return CapacityResult(0.0, GridFunction(lat, prob.domain, np.zeros(lat.shape)), [0.0], True, 0, "empty")
    support = prob.support
    if method == "auto":
        method = "pcg" if P.p == 2 else "subgradient"
    probe = GridFunction(lat, prob.domain, support.astype(float))
    Z = zero_partner_weights(probe, P.s, support)  # weights on support cells
    if method == "pcg":
        return _solve_quadratic(prob, support, Z, budget, tol)
    if method == "subgradient":
        return _subgradient(prob, support, Z, budget)
    raise ValueError(f"unknown method {method!r}")


def _solve_quadratic(prob, support, Z, budget, tol):
    lat = prob.lattice
    s = prob.params.s
    Kmask = prob.K.cells
    free = support & ~Kmask
    ones_A = support.astype(float)
    row_A = convolve_kernel(lat, s, ones_A)  # sum over support partners (self term is zero)
    diag_full = np.zeros(lat.shape)
    diag_full[support] = row_A[support] + Z
    fidx = np.flatnonzero(free.ravel())

    def apply_A(field):
        return 2.0 * (diag_full * field - convolve_kernel(lat, s, field))

    def matvec(x):
        f = np.zeros(lat.size)
        f[fidx] = np.ravel(x)
        return apply_A(f.reshape(lat.shape)).ravel()[fidx]

    rhs = -apply_A(Kmask.astype(float)).ravel()[fidx]
    dvals = 2.0 * diag_full.ravel()[fidx]
    m = len(fidx)
    A = LinearOperator((m, m), matvec=matvec, dtype=float)
    M = LinearOperator((m, m), matvec=lambda r: np.ravel(r) / dvals, dtype=float)
    trace: list[float] = []

    def energy_of(x):
        full = np.where(Kmask, 1.0, 0.0).ravel()
        full[fidx] = x
        return full

    it = [0]

    def cb(xk):
        it[0] += 1
        full = energy_of(xk).reshape(lat.shape)
        trace.append(float(np.sum(full * apply_A(full)) / 2.0))

    x0 = _initial_guess(prob, support).ravel()[fidx]
    if m:
        x, info = cg(A, rhs, x0=x0, rtol=tol, maxiter=budget, M=M, callback=cb)
    else:
        x, info = np.zeros(0), 0
    u = energy_of(np.clip(x, 0.0, 1.0)).reshape(lat.shape)
    g = GridFunction(lat, prob.domain, u)
    value = seminorm_energy(g, prob.params)
    return CapacityResult(value, g, trace, info == 0, it[0], "pcg")


def _subgradient(prob, support, Z, budget):
    lat = prob.lattice
    P = prob.params
    act = np.argwhere(support).astype(np.int64)
    Kmask = prob.K.cells[support]
    kern = kernel_table(lat, P.s).ravel()
    strides = _strides(lat.shape)
    u = _initial_guess(prob, support)[support]

    def project(v):
        v = np.clip(v, 0.0, 1.0)
        v[Kmask] = 1.0
        return v

    def evaluate(v):
        rows, grad = _kernels.pair_grad(act, v, Z, kern, strides, float(P.p))
        return math.fsum(rows), grad

    u = project(u)
    f, g = evaluate(u)
    g[Kmask] = 0.0
    gnorm = float(np.linalg.norm(g))
    s0 = 1.0 / gnorm if gnorm > 0 else 1.0
    best_f, best_u = f, u.copy()
    trace = [f]
    for t in range(1, budget + 1):
        if gnorm == 0:
            break
        u = project(u - (s0 / math.sqrt(t)) * g)
        f, g = evaluate(u)
        g[Kmask] = 0.0
        gnorm = float(np.linalg.norm(g))
        if f < best_f:
            best_f, best_u = f, u.copy()
        trace.append(best_f)
    tail = max(1, len(trace) // 10)
    ref = trace[-tail - 1] if len(trace) > tail else trace[0]
    converged = (ref - trace[-1]) <= 1e-4 * abs(ref) or gnorm == 0
    full = np.zeros(lat.shape)
    full[support] = best_u
    gfun = GridFunction(lat, prob.domain, full)
    return CapacityResult(seminorm_energy(gfun, P), gfun, trace, converged, len(trace) - 1, "subgradient")


def cutoff_phi(Q: DyadicCube, lattice: Lattice, domain: Domain) -> GridFunction:
    """Ramp equal to 1 on ``Q``, 0 outside ``(17/16) Q``, linear in the sup-distance between.

    The ramp has width ``side/32`` on each side, so its Lipschitz constant in the
    sup-norm is ``32 / side``.

    Raises
    ------
    ValueError
        The dilated cube leaves the lattice window.
    """
    hat = Q.dilate(17.0 / 16.0)
    if not lattice.window.contains_box(hat):
        raise ValueError("the dilated cube leaves the window")
    ell = Q.side
    r = np.abs(lattice.centers - Q.center).max(axis=-1)
    vals = np.clip((17.0 * ell / 32.0 - r) / (ell / 32.0), 0.0, 1.0)
    return GridFunction(lattice, domain, vals)


def truncate_levels(u: GridFunction, k: int) -> GridFunction:
    """Level truncation ``u_k``: 1 where ``|u| >= 2^(k+1)``, ``|u|/2^k - 1`` between, 0 where ``|u| <= 2^k``."""
    a = np.abs(u.values)
    lo = 2.0 ** k
    out = np.clip(a / lo - 1.0, 0.0, 1.0)
    out[a >= 2.0 * lo] = 1.0
    out[a <= lo] = 0.0
    return u.with_values(out)
