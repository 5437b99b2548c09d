"""Fractional seminorms and the other integral functionals on grid functions.

Seminorm routines return the root ``|u|``; the matching ``*_energy`` routines
return the ``p``-th power that is actually summed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gamma

from . import _kernels
from .geometry import DyadicCube, Domain, _face_angle_nodes, _fibonacci_sphere
from .grid import GridFunction, Lattice
from .whitney import admissible_candidates, greedy_disjoint_families, kappa_for_tau

__all__ = [
    "FracParams",
    "critical_q",
    "hardy_exponent",
    "kernel_table",
    "tail_weights",
    "zero_partner_weights",
    "seminorm_energy",
    "seminorm_full",
    "seminorm_tau_energy",
    "seminorm_tau",
    "same_cell_bound",
    "cube_oscillation",
    "a_functional_bounds",
    "inf_shift_lq",
    "hardy_lhs",
    "weak_quasinorm",
]


def critical_q(delta: float, p: float, n: int) -> float:
    """Sobolev-critical exponent ``np / (n - delta p)``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if delta * p >= n:
        raise ValueError(f"need p < n/delta, got p = {p}, n/delta = {n / delta}")
    return n * p / (n - delta * p)


def hardy_exponent(delta: float, p: float, q: float, n: int) -> float:
    """Weight exponent ``q (delta + n (1/q - 1/p))`` of the Hardy-type left side."""
    return q * (delta + n * (1.0 / q - 1.0 / p))


@dataclass(frozen=True)
class FracParams:
    """Fractional parameters.

    ``kappa`` defaults to the smallest value compatible with ``tau`` (see
    :func:`fraclab.whitney.kappa_for_tau`); ``q`` defaults to the critical
    exponent where one is needed.
    """

    delta: float
    p: float
    tau: float = 0.5
    kappa: float | None = None
    q: float | None = None

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        if self.kappa is not None and self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.q is not None and self.q < 1:
            raise ValueError("q must be >= 1")

    @property
    def s(self) -> float:
        """Kernel excess ``delta * p``."""
        return self.delta * self.p

    def kappa_for(self, n: int) -> float:
        return kappa_for_tau(n, self.tau) if self.kappa is None else self.kappa

    def q_critical(self, n: int) -> float:
        return critical_q(self.delta, self.p, n)

    def q_or_critical(self, n: int) -> float:
        return self.q if self.q is not None else self.q_critical(n)

    def with_(self, **kw) -> "FracParams":
        return replace(self, **kw)

    def to_json(self) -> dict:
        return {"delta": self.delta, "p": self.p, "tau": self.tau, "kappa": self.kappa, "q": self.q}


# ---------------------------------------------------------------------------
# kernel tables and zero-partner weights


@lru_cache(maxsize=32)
def _kernel_table_cached(shape: tuple, h: float, s: float) -> np.ndarray:
    n = len(shape)
    grids = np.meshgrid(*[np.arange(m, dtype=float) for m in shape], indexing="ij")
    r2 = sum(g * g for g in grids) * h * h
    with np.errstate(divide="ignore"):
        K = r2 ** (-(n + s) / 2.0) * h ** (2 * n)
    K.flat[0] = 0.0
    K.setflags(write=False)
    return K


def kernel_table(lattice: Lattice, s: float) -> np.ndarray:
    """``|h k|^(-n-s) h^(2n)`` over absolute integer offsets ``k``; zero at ``k = 0``."""
    return _kernel_table_cached(tuple(lattice.shape), float(lattice.h), float(s))


def _full_kernel(lattice: Lattice, s: float) -> np.ndarray:
    K = kernel_table(lattice, s)
    for ax in range(K.ndim):
        K = np.concatenate([np.flip(np.delete(K, 0, axis=ax), axis=ax), K], axis=ax)
    return K


def convolve_kernel(lattice: Lattice, s: float, field: np.ndarray) -> np.ndarray:
    """``sum_y K(x - y) field(y)`` for every lattice cell ``x`` (FFT)."""
    return fftconvolve(field, _full_kernel(lattice, s), mode="same")


def tail_weights(lattice: Lattice, domain: Domain, s: float, cells: np.ndarray, order: int = 24,
                 directions: int = 4000) -> np.ndarray:
    """``∫_{D \\ window} |x - y|^(-n-s) dy`` for the given cell centers.

    Zero for bounded domains.  In the plane the angular integral runs per
    window face with Gauss-Legendre nodes; in space over a Fibonacci sphere.
    """
    x = np.asarray(cells, dtype=float)
    if domain.bounded or len(x) == 0:
        return np.zeros(len(x))
    W = lattice.window
    if lattice.n == 2:
        theta, w, rho = _face_angle_nodes(x, W, order)
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        e = domain.tail_extent(x, dirs, rho)
        with np.errstate(divide="ignore", over="ignore"):
            integrand = (rho ** (-s) - np.where(np.isinf(e), 0.0, e ** (-s))) / s
        return (integrand * w).sum(axis=1)
    dirs = _fibonacci_sphere(directions)
    lo, hi = np.asarray(W.lo), np.asarray(W.hi)
    with np.errstate(divide="ignore"):
        t_hi = (hi[None, None, :] - x[:, None, :]) / dirs[None, :, :]
        t_lo = (lo[None, None, :] - x[:, None, :]) / dirs[None, :, :]
    exit_t = np.where(dirs[None] > 0, t_hi, np.where(dirs[None] < 0, t_lo, np.inf)).min(axis=-1)
    D3 = np.broadcast_to(dirs, (len(x),) + dirs.shape)
    e = domain.tail_extent(x, D3, exit_t)
    integrand = (exit_t ** (-s) - np.where(np.isinf(e), 0.0, e ** (-s))) / s
    return integrand.sum(axis=1) * (4 * np.pi / directions)


def zero_partner_weights(u: GridFunction, s: float, active: np.ndarray) -> np.ndarray:
    """``Z_x`` for active cells: kernel mass of inactive domain cells plus the outside-window tail.

    Multiplied by ``2 |u(x)|^p`` this is the whole contribution of pairs
    between an active cell and a cell where ``u`` vanishes.
    """
    lat = u.lattice
    other = (u.inside & ~active).astype(float)
    Z = convolve_kernel(lat, s, other)[active]
    Z = np.maximum(Z, 0.0)
    cells = lat.centers[active]
    return Z + lat.cell_volume * tail_weights(lat, u.domain, s, cells)


# ---------------------------------------------------------------------------
# seminorms


def _strides(shape) -> np.ndarray:
    return np.array([int(np.prod(shape[d + 1:])) for d in range(len(shape))], dtype=np.int64)


def seminorm_energy(u: GridFunction, P: FracParams, method: str = "auto", swap: bool = False) -> float:
    """``sum_{x != y} |u(x) - u(y)|^p |x - y|^(-n - delta p) h^(2n)`` over domain cells.

    For unbounded domains, pairs with one point outside the window (where
    ``u`` vanishes) are added through :func:`tail_weights`.

    Parameters
    ----------
    method : {"auto", "direct", "fft"}
        ``direct`` loops over (support cell, domain cell) pairs; ``fft`` uses
        the quadratic identity and requires ``p = 2``.
    swap : bool
        Direct route with the roles of ``x`` and ``y`` exchanged.
    """
    if method == "auto":
        method = "fft" if P.p == 2 else "direct"
    lat = u.lattice
    s = P.s
    supp = u.support_mask
    if not supp.any():
        return 0.0
    vol = lat.cell_volume
    tails = vol * tail_weights(lat, u.domain, s, lat.centers[supp])
    tail_part = 2.0 * math.fsum(np.abs(u.values[supp]) ** P.p * tails)
    if method == "fft":
        if P.p != 2:
            raise ValueError("the FFT route needs p = 2")
        v = u.values
        ins = u.inside.astype(float)
        S = convolve_kernel(lat, s, ins)
        Kv = convolve_kernel(lat, s, v)
        rows = 2.0 * v * v * S - 2.0 * v * Kv
        return math.fsum(rows[u.inside]) + tail_part
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    act = np.argwhere(supp).astype(np.int64)
    part = np.argwhere(u.inside).astype(np.int64)
    pweight = np.where(supp[u.inside], 1.0, 2.0)
    K = kernel_table(lat, s).ravel()
    rows = _kernels.pair_rows(act, u.values[supp], part, u.values[u.inside], pweight, K,
                              _strides(lat.shape), float(P.p), swap)
    return math.fsum(rows) + tail_part


def seminorm_full(u: GridFunction, D: Domain | None = None, P: FracParams | None = None, method: str = "auto") -> float:
    """Fractional seminorm ``|u|_{W^{delta,p}(D)}`` (the root)."""
    if P is None:
        raise ValueError("parameters are required")
    _check_domain(u, D)
    return seminorm_energy(u, P, method) ** (1.0 / P.p)


def seminorm_tau_energy(u: GridFunction, P: FracParams) -> float:
    """Restricted pair sum: ``y`` in the ball ``B(x, tau dist(x, ∂D))`` centered at ``x``."""
    lat = u.lattice
    dist = np.where(u.inside, u.domain.dist_boundary(lat.centers), 0.0)
    args = (np.ascontiguousarray(u.values), np.ascontiguousarray(u.inside), dist, float(lat.h),
            float(P.tau), float(P.s), float(P.p))
    if lat.n == 2:
        rows = _kernels.tau_rows_2d(*args)
    elif lat.n == 3:
        rows = _kernels.tau_rows_3d(*args)
    else:
        raise ValueError("only n = 2, 3 are supported")
    return math.fsum(rows)


def seminorm_tau(u: GridFunction, D: Domain | None = None, P: FracParams | None = None) -> float:
    if P is None:
        raise ValueError("parameters are required")
    _check_domain(u, D)
    return seminorm_tau_energy(u, P) ** (1.0 / P.p)


def _check_domain(u: GridFunction, D: Domain | None):
    if D is not None and D is not u.domain and D.to_json() != u.domain.to_json():
        raise ValueError("grid function lives on a different domain")


def lipschitz_estimate(u: GridFunction) -> float:
    """Largest neighbor difference quotient over domain cells."""
    best = 0.0
    for ax in range(u.n):
        a = [slice(None)] * u.n
        b = [slice(None)] * u.n
        a[ax] = slice(1, None)
        b[ax] = slice(None, -1)
        both = u.inside[tuple(a)] & u.inside[tuple(b)]
        if both.any():
            d = np.abs(u.values[tuple(a)] - u.values[tuple(b)])[both]
            best = max(best, float(d.max()))
    return best / u.h


def same_cell_bound(u: GridFunction, P: FracParams) -> float:
    """Error band for the omitted same-cell pairs.

    ``Lip(u)^p |D_h| ∫_{|z| < h sqrt(n)} |z|^(p - n - delta p) dz``, finite
    because ``p - delta p > 0``.
    """
    n = u.n
    a = P.p - P.s
    sphere = 2 * math.pi ** (n / 2) / gamma(n / 2)
    r = u.h * math.sqrt(n)
    return lipschitz_estimate(u) ** P.p * u.measure() * sphere * r ** a / a


# ---------------------------------------------------------------------------
# A-functional


def cube_oscillation(u: GridFunction, Q: DyadicCube) -> tuple[float, float]:
    """``(∫_Q |u - u_Q|, |Q ∩ D|)`` on lattice cells centered in ``Q``."""
    sl = u.lattice.cube_slice(Q)
    ins = u.inside[sl]
    if not ins.any():
        return 0.0, 0.0
    v = u.values[sl][ins]
    vol = u.lattice.cell_volume
    return math.fsum(np.abs(v - v.mean())) * vol, len(v) * vol


def _cube_term(u: GridFunction, Q: DyadicCube, P: FracParams) -> float:
    osc, _ = cube_oscillation(u, Q)
    n = u.n
    return Q.volume ** (1.0 - P.p - P.s / n) * osc ** P.p


def a_functional_bounds(u: GridFunction, D: Domain | None = None, P: FracParams | None = None,
                        candidates: list[DyadicCube] | None = None) -> tuple[float, float]:
    """Greedy lower bound for the packing functional and the seminorm upper bound.

    ``lower`` is the best ``(sum_Q |Q|^(1 - p - delta p/n) (∫_Q |u - u_Q|)^p)^(1/p)``
    over greedy families of disjoint dyadic cubes with ``kappa Q ⊂ D``, cubes
    at least two lattice cells wide.  ``upper`` is
    ``sqrt(n)^(n/p + delta) * seminorm_tau(u)``.
    """
    if P is None:
        raise ValueError("parameters are required")
    _check_domain(u, D)
    n = u.n
    kappa = P.kappa_for(n)
    if candidates is None:
        J = u.lattice.dyadic_level()
        if J is None:
            raise ValueError("lattice must be aligned with the dyadic grid")
        candidates = admissible_candidates(u.domain, kappa, J - 1)
    scores = {Q: _cube_term(u, Q, P) for Q in candidates}
    lower = 0.0
    for fam in greedy_disjoint_families(None, kappa, scores, candidates=candidates):
        lower = max(lower, math.fsum(scores[Q] for Q in fam))
    upper = math.sqrt(n) ** (n / P.p + P.delta) * seminorm_tau(u, None, P)
    return lower ** (1.0 / P.p), upper


# ---------------------------------------------------------------------------
# shifts, Hardy side, weak quasinorm


def inf_shift_lq(u: GridFunction, D: Domain | None = None, q: float = 2.0,
                 rtol: float = 1e-10) -> tuple[float, float]:
    """Minimize ``phi(a) = sum |u - a|^q h^n`` by golden-section search on ``[min u, max u]``.

    ``phi`` is convex for ``q >= 1``, so the bracket always holds the minimizer.
    For ``q > 1`` the result is polished by bisection on the sign of ``phi'``.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    _check_domain(u, D)
    v = u.values[u.inside]
    vol = u.lattice.cell_volume
    lo, hi = float(v.min()), float(v.max())

    def phi(a):
        return math.fsum(np.abs(v - a) ** q) * vol

    if hi == lo:
        return lo, 0.0
    tol = rtol * (hi - lo)
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = phi(c), phi(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = phi(d)
    best = 0.5 * (a + b)
    if q > 1:
        best = _polish_root(v, q, best, hi - lo, lo, hi)
    # the convex minimum can sit on a data value; compare the bracket ends too
    cands = [(phi(best), best), (phi(lo), lo), (phi(hi), hi)]
    val, arg = min(cands)
    return arg, val


def _polish_root(v: np.ndarray, q: float, guess: float, width: float, lo: float, hi: float) -> float:
    """Bisect on the sign of ``phi'(a) = -q sum sign(v - a) |v - a|^(q-1)`` around ``guess``.

    Value comparisons stop resolving the minimizer near ``sqrt(eps) * width``
    because ``phi`` is flat there; the derivative sign stays reliable.
    """

    def slope(a):
        d = v - a
        return -math.fsum(np.sign(d) * np.abs(d) ** (q - 1))

    a, b = max(lo, guess - 1e-6 * width), min(hi, guess + 1e-6 * width)
    if slope(a) > 0 or slope(b) < 0:
        a, b = lo, hi
    for _ in range(200):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        if slope(m) < 0:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def hardy_lhs(u: GridFunction, D: Domain | None = None, P: FracParams | None = None,
              q: float | None = None, margin: float | None = None) -> float:
    """``sum |u(x)|^q dist(x, ∂D)^(-w) h^n`` with ``w = q (delta + n (1/q - 1/p))``.

    ``q`` defaults to ``P.q`` and then to ``P.p``.

    Raises
    ------
    ValueError
        A support cell center lies within ``margin`` (default half a cell) of
        the boundary, where the weight is not resolved.
    """
    if P is None:
        raise ValueError("parameters are required")
    _check_domain(u, D)
    q = q if q is not None else (P.q if P.q is not None else P.p)
    w = hardy_exponent(P.delta, P.p, q, u.n)
    supp = u.support_mask
    if not supp.any():
        return 0.0
    d = u.domain.dist_boundary(u.lattice.centers[supp])
    m = 0.5 * u.h if margin is None else margin
    if np.any(d < m * (1 - 1e-12)):
        raise ValueError("support touches the boundary: Hardy weight unbounded there")
    vals = np.abs(u.values[supp]) ** q * d ** (-w)
    return math.fsum(vals) * u.lattice.cell_volume


def weak_quasinorm(u: GridFunction, a: float, q: float) -> float:
    """``sup_t t^q |{|u - a| > t}|`` evaluated over the data values.

    The distribution function is right-continuous and drops at each data value
    ``v``; the supremum is the left limit ``v^q |{|u - a| >= v}|``.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    v = np.sort(np.abs(u.values[u.inside] - a))[::-1]
    if len(v) == 0 or v[0] == 0:
        return 0.0
    vals, first = np.unique(v[::-1], return_index=True)
    # count of entries >= each distinct value
    counts_ge = len(v) - first
    best = vals ** q * counts_ge
    return float(best.max()) * u.lattice.cell_volume
