"""Whitney decompositions, kappa-refined families and greedy disjoint cube families."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse

from .geometry import Box, DyadicCube, Domain

__all__ = [
    "WhitneyFamily",
    "whitney_decompose",
    "refine_kappa",
    "kappa_for_tau",
    "split_depth",
    "adjacency",
    "greedy_disjoint_families",
    "admissible_candidates",
    "uncovered_measure",
    "dilation_overlap",
]

STAR = 9.0 / 8.0


@dataclass(frozen=True)
class WhitneyFamily:
    """Dyadic cubes with pairwise disjoint interiors, stored as parallel arrays.

    ``domain`` is the set actually decomposed (the windowed truncation for
    unbounded members).  ``unresolved_*`` hold the cells still straddling or
    too close to the boundary at ``max_level``.
    """

    levels: np.ndarray
    indices: np.ndarray
    domain: Domain
    max_level: int
    kappa: float = 1.0
    unresolved_levels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    unresolved_indices: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def __post_init__(self):
        for name in ("levels", "indices", "unresolved_levels", "unresolved_indices"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def n(self) -> int:
        return self.domain.dim

    @cached_property
    def sides(self) -> np.ndarray:
        return np.exp2(-self.levels.astype(float))

    @cached_property
    def lo(self) -> np.ndarray:
        return self.indices * self.sides[:, None]

    @cached_property
    def hi(self) -> np.ndarray:
        return (self.indices + 1) * self.sides[:, None]

    @cached_property
    def centers(self) -> np.ndarray:
        return (self.indices + 0.5) * self.sides[:, None]

    @cached_property
    def diams(self) -> np.ndarray:
        return math.sqrt(self.n) * self.sides

    @cached_property
    def dists(self) -> np.ndarray:
        """``dist(Q, complement)`` per cube, closed form."""
        return self.domain.box_distance(self.lo, self.hi)

    @cached_property
    def cubes(self) -> tuple[DyadicCube, ...]:
        return tuple(DyadicCube(int(j), tuple(int(k) for k in idx)) for j, idx in zip(self.levels, self.indices))

    @cached_property
    def unresolved(self) -> tuple[DyadicCube, ...]:
        return tuple(
            DyadicCube(int(j), tuple(int(k) for k in idx))
            for j, idx in zip(self.unresolved_levels, self.unresolved_indices)
        )

    @cached_property
    def by_level(self) -> dict[int, list[DyadicCube]]:
        out: dict[int, list[DyadicCube]] = {}
        for Q in self.cubes:
            out.setdefault(Q.level, []).append(Q)
        return out

    @cached_property
    def position(self) -> dict[DyadicCube, int]:
        return {Q: i for i, Q in enumerate(self.cubes)}

    def kappa_ok(self, kappa: float | None = None) -> np.ndarray:
        """Whether ``kappa * (9/8) Q`` lies in the domain, per cube."""
        k = self.kappa if kappa is None else kappa
        half = 0.5 * k * STAR * self.sides[:, None]
        return self.domain.box_distance(self.centers - half, self.centers + half) > 0

    def to_jsonl(self) -> str:
        ok = self.kappa_ok()
        lines = [
            json.dumps({"level": int(j), "index": [int(k) for k in idx], "dist": float(d), "kappa_ok": bool(o)})
            for j, idx, d, o in zip(self.levels, self.indices, self.dists, ok)
        ]
        return "\n".join(lines) + ("\n" if lines else "")


def _children(levels: np.ndarray, indices: np.ndarray, depth: int = 1):
    n = indices.shape[1]
    m = 1 << depth
    offsets = np.array(list(product(range(m), repeat=n)), dtype=np.int64)
    child_idx = (indices[:, None, :] * m + offsets[None, :, :]).reshape(-1, n)
    child_lev = np.repeat(levels + depth, len(offsets))
    return child_lev, child_idx


def coarsest_level(window: Box) -> int:
    """Largest dyadic level whose cubes are at least as large as the window."""
    return int(math.floor(-math.log2(window.side)))


def whitney_decompose(D: Domain, max_level: int) -> WhitneyFamily:
    """Top-down dyadic Whitney decomposition of ``D`` (windowed if unbounded).

    A cube meeting the set is accepted when ``diam <= dist(Q, boundary)``, and
    subdivided otherwise.  Starting above the window size guarantees every
    accepted cube has a rejected parent, which yields ``dist <= 4 diam``.
    Cells still rejected at ``max_level`` are returned as unresolved.

    Raises
    ------
    ValueError
        ``max_level`` coarser than the window.
    """
    G = D.truncated()
    n = G.dim
    top = coarsest_level(G.window)
    if max_level < top:
        raise ValueError(f"max_level {max_level} is coarser than the window (level {top})")
    scale = 2.0 ** top
    lo_idx = np.floor(np.asarray(G.window.lo) * scale).astype(np.int64)
    hi_idx = np.ceil(np.asarray(G.window.hi) * scale).astype(np.int64)
    grids = np.meshgrid(*[np.arange(a, b) for a, b in zip(lo_idx, hi_idx)], indexing="ij")
    indices = np.stack([g.ravel() for g in grids], axis=1)
    levels = np.full(len(indices), top, dtype=np.int64)

    acc_lev, acc_idx = [], []
    unres_lev = np.zeros(0, dtype=np.int64)
    unres_idx = np.zeros((0, n), dtype=np.int64)
    for j in range(top, max_level + 1):
        side = 2.0 ** (-j)
        lo = indices * side
        hi = lo + side
        keep = G.box_meets(lo, hi)
        indices, levels, lo, hi = indices[keep], levels[keep], lo[keep], hi[keep]
        dist = G.box_distance(lo, hi)
        ok = dist >= math.sqrt(n) * side
        acc_lev.append(levels[ok])
        acc_idx.append(indices[ok])
        rest_lev, rest_idx = levels[~ok], indices[~ok]
        if j == max_level:
            unres_lev, unres_idx = rest_lev, rest_idx
        else:
            levels, indices = _children(rest_lev, rest_idx)
    levels = np.concatenate(acc_lev)
    indices = np.concatenate(acc_idx) if acc_idx else np.zeros((0, n), dtype=np.int64)
    return WhitneyFamily(levels, indices, G, max_level, 1.0, unres_lev, unres_idx)


def kappa_for_tau(n: int, tau: float) -> float:
    """Smallest kappa with ``Q ⊂ B(x, tau dist(x, ∂G))`` for all ``x ∈ Q ∈ W^kappa``.

    The worst point is a corner of Q, which must reach the opposite corner:
    ``diam(Q) <= tau * dist(x)``.  Since ``kappa Q ⊂ G`` keeps every ``x ∈ Q``
    at distance ``(kappa - 1) side / 2`` from the complement, it suffices that
    ``tau (kappa - 1) / 2 >= sqrt(n)``.
    """
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    return 1.0 + 2.0 * math.sqrt(n) / tau


def split_depth(kappa: float) -> int:
    """Uniform number of dyadic halvings that makes ``kappa (9/8) Q ⊂ G`` for Whitney children.

    A depth-``s`` child of a Whitney cube ``Q`` keeps distance at least
    ``diam(Q)`` from the boundary, so its ``kappa (9/8)`` dilation stays inside
    as soon as ``(kappa * 9/8 - 1) / 2 < 2**s``.  Depends on kappa only (the
    diameter ratio is dimension free).
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    need = (kappa * STAR - 1.0) / 2.0
    s = 0
    while 2.0 ** s <= need:
        s += 1
    return s


def refine_kappa(W: WhitneyFamily, kappa: float) -> WhitneyFamily:
    """Split every Whitney cube into ``2^{sn}`` dyadic children so that ``kappa (9/8) child ⊂ G``.

    ``s = split_depth(kappa)``; containment is then re-verified exactly and any
    failing child is split further (never triggered on the gallery).
    """
    s = split_depth(kappa)
    levels, indices = _children(W.levels, W.indices, s) if s else (W.levels, W.indices)
    G = W.domain
    done_lev, done_idx = [], []
    for _ in range(8):
        side = np.exp2(-levels.astype(float))[:, None]
        c = (indices + 0.5) * side
        half = 0.5 * kappa * STAR * side
        ok = G.box_distance(c - half, c + half) > 0
        done_lev.append(levels[ok])
        done_idx.append(indices[ok])
        if ok.all():
            break
        levels, indices = _children(levels[~ok], indices[~ok])
    else:
        raise RuntimeError("kappa refinement did not terminate")
    order_lev = np.concatenate(done_lev)
    order_idx = np.concatenate(done_idx)
    return WhitneyFamily(order_lev, order_idx, G, W.max_level + s, float(kappa),
                         W.unresolved_levels, W.unresolved_indices)


def _touching_pairs(lo: np.ndarray, hi: np.ndarray, tol: float = 1e-12, chunk: int = 512):
    m = len(lo)
    rows, cols = [], []
    for s in range(0, m, chunk):
        a_lo, a_hi = lo[s:s + chunk, None, :], hi[s:s + chunk, None, :]
        touch = np.all((a_lo <= hi[None] + tol) & (lo[None] <= a_hi + tol), axis=-1)
        r, c = np.nonzero(touch)
        r = r + s
        keep = r != c
        rows.append(r[keep])
        cols.append(c[keep])
    return np.concatenate(rows), np.concatenate(cols)


def adjacency(W: WhitneyFamily) -> sparse.csr_matrix:
    """Symmetric 0/1 adjacency of cubes whose closures touch."""
    r, c = _touching_pairs(W.lo, W.hi)
    m = len(W)
    return sparse.csr_matrix((np.ones(len(r)), (r, c)), shape=(m, m))


def admissible_candidates(W: WhitneyFamily | Domain, kappa: float, finest_level: int | None = None) -> list[DyadicCube]:
    """All dyadic cubes of the window, down to ``finest_level``, with ``kappa Q ⊂ G``.

    The whole dyadic tree is walked from the coarsest window level, so parents
    of Whitney cubes are included whenever they are admissible.
    """
    if isinstance(W, WhitneyFamily):
        G = W.domain
        finest = W.max_level if finest_level is None else finest_level
    else:
        G = W.truncated()
        if finest_level is None:
            raise ValueError("finest_level is required when passing a domain")
        finest = finest_level
    top = coarsest_level(G.window)
    scale = 2.0 ** top
    lo_idx = np.floor(np.asarray(G.window.lo) * scale).astype(np.int64)
    hi_idx = np.ceil(np.asarray(G.window.hi) * scale).astype(np.int64)
    grids = np.meshgrid(*[np.arange(a, b) for a, b in zip(lo_idx, hi_idx)], indexing="ij")
    indices = np.stack([g.ravel() for g in grids], axis=1)
    levels = np.full(len(indices), top, dtype=np.int64)
    out: list[DyadicCube] = []
    for j in range(top, finest + 1):
        side = 2.0 ** (-j)
        lo = indices * side
        meets = G.box_meets(lo, lo + side)
        levels, indices = levels[meets], indices[meets]
        c = (indices + 0.5) * side
        half = 0.5 * kappa * side
        ok = G.box_distance(c - half, c + half) > 0
        out.extend(DyadicCube(j, tuple(int(k) for k in idx)) for idx in indices[ok])
        if j < finest:
            levels, indices = _children(levels, indices)
    return out


def _greedy(order: Sequence[DyadicCube]) -> list[DyadicCube]:
    chosen: set[DyadicCube] = set()
    covered: set[DyadicCube] = set()  # chosen cubes and all their ancestors
    min_level = min((Q.level for Q in order), default=0)
    picked: list[DyadicCube] = []
    for Q in order:
        if Q in covered:
            continue  # Q contains a chosen cube
        if any(Q.ancestor(j) in chosen for j in range(min_level, Q.level)):
            continue  # Q sits inside a chosen cube
        chosen.add(Q)
        picked.append(Q)
        for j in range(min_level, Q.level + 1):
            covered.add(Q.ancestor(j))
    return picked


def greedy_disjoint_families(
    W: WhitneyFamily | None,
    kappa: float,
    score: Callable[[DyadicCube], float] | dict,
    candidates: Iterable[DyadicCube] | None = None,
) -> list[list[DyadicCube]]:
    """Maximal families of interior-disjoint dyadic cubes picked by descending score.

    One family is produced per starting level (cubes coarser than the start
    are excluded), so both coarse and fine packings are explored.  Ties break
    by level, then lexicographic index.  Dyadic cubes are either nested or
    interior-disjoint, which makes the disjointness test an ancestor lookup.

    Parameters
    ----------
    W : WhitneyFamily or None
        Source of candidates when ``candidates`` is omitted.
    kappa : float
        Admissibility: ``kappa Q`` must lie in the domain.
    score : callable or mapping
        Cube -> real.
    candidates : iterable of DyadicCube, optional
        Explicit candidate list, assumed admissible.
    """
    if candidates is None:
        if W is None:
            raise ValueError("either W or candidates is required")
        candidates = admissible_candidates(W, kappa)
    cands = list(dict.fromkeys(candidates))
    if not cands:
        return []
    get = score.__getitem__ if isinstance(score, dict) else score
    scored = {Q: float(get(Q)) for Q in cands}
    order = sorted(cands, key=lambda Q: (-scored[Q], Q.level, Q.index))
    families: list[list[DyadicCube]] = []
    seen: set[tuple] = set()
    for start in sorted({Q.level for Q in cands}):
        fam = _greedy([Q for Q in order if Q.level >= start])
        key = tuple(sorted(fam))
        if key not in seen:
            seen.add(key)
            families.append(fam)
    return families


def _cell_slices(lo: np.ndarray, hi: np.ndarray, origin: np.ndarray, cell: float, shape) -> list[tuple]:
    a = np.clip(np.ceil((lo - origin) / cell - 0.5 - 1e-9).astype(int), 0, None)
    b = np.minimum(np.floor((hi - origin) / cell - 0.5 + 1e-9).astype(int) + 1, np.asarray(shape))
    return [tuple(slice(x, y) for x, y in zip(ra, rb)) for ra, rb in zip(a, b)]


def uncovered_measure(W: WhitneyFamily, resolution_level: int | None = None) -> float:
    """Measure of ``domain ∩ window`` not covered by accepted or unresolved cubes.

    Evaluated on the cell centers of a dyadic lattice one level finer than the
    family, where dyadic cubes are unions of lattice cells.
    """
    G = W.domain
    L = (W.max_level + 1) if resolution_level is None else resolution_level
    cell = 2.0 ** (-L)
    origin = np.asarray(G.window.lo)
    shape = tuple(int(round(s / cell)) for s in G.window.sides)
    covered = np.zeros(shape, dtype=bool)
    lo = np.concatenate([W.lo, W.unresolved_indices * np.exp2(-W.unresolved_levels.astype(float))[:, None]])
    hi = np.concatenate([W.hi, (W.unresolved_indices + 1) * np.exp2(-W.unresolved_levels.astype(float))[:, None]])
    for sl in _cell_slices(lo, hi, origin, cell, shape):
        covered[sl] = True
    axes = [origin[d] + (np.arange(shape[d]) + 0.5) * cell for d in range(G.dim)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    inside = G.inside(pts)
    return float(np.count_nonzero(inside & ~covered)) * cell ** G.dim


def dilation_overlap(W: WhitneyFamily, factor: float = STAR, resolution_level: int | None = None) -> int:
    """Pointwise maximum of ``sum_Q chi_{factor Q}`` on a fine lattice."""
    G = W.domain
    L = (W.max_level + 2) if resolution_level is None else resolution_level
    cell = 2.0 ** (-L)
    pad = (factor - 1) * W.sides.max() if len(W) else 0.0
    origin = np.asarray(G.window.lo) - pad
    shape = tuple(int(math.ceil((s + 2 * pad) / cell)) for s in G.window.sides)
    counts = np.zeros(shape, dtype=np.int32)
    half = 0.5 * factor * W.sides[:, None]
    for sl in _cell_slices(W.centers - half, W.centers + half, origin, cell, shape):
        counts[sl] += 1
    return int(counts.max()) if counts.size else 0
