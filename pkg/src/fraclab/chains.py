"""Chain decompositions joining Whitney cubes to a central cube, and their shadows."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components, dijkstra

from .geometry import Box, DyadicCube, Domain
from .grid import GridFunction
from .whitney import STAR, WhitneyFamily, adjacency

__all__ = [
    "ChainDecomposition",
    "ChainReport",
    "john_center",
    "build_chains",
    "verify_chain_properties",
    "telescoping_constant",
    "telescoping_audit",
]


def john_center(D: Domain, W: WhitneyFamily) -> DyadicCube:
    """A cube of maximal side; ties go to the larger boundary distance, then smallest index."""
    if len(W) == 0:
        raise ValueError("empty Whitney family")
    keys = sorted(
        range(len(W)),
        key=lambda i: (W.levels[i], -W.dists[i], tuple(W.indices[i])),
    )
    return W.cubes[keys[0]]


@dataclass(frozen=True)
class ChainDecomposition:
    """Shortest-path chains over a Whitney family.

    ``parent[i]`` is the predecessor of cube ``i`` on its chain (``-1`` at the
    center), so chains form a tree rooted at ``center``.
    """

    family: WhitneyFamily
    center_index: int
    parent: np.ndarray

    @property
    def center_cube(self) -> DyadicCube:
        return self.family.cubes[self.center_index]

    def chain_indices(self, i: int) -> list[int]:
        out = [i]
        while out[-1] != self.center_index:
            out.append(int(self.parent[out[-1]]))
        return out[::-1]

    @cached_property
    def chains(self) -> dict[DyadicCube, tuple[DyadicCube, ...]]:
        cubes = self.family.cubes
        return {cubes[i]: tuple(cubes[k] for k in self.chain_indices(i)) for i in range(len(cubes))}

    @cached_property
    def shadows(self) -> dict[DyadicCube, frozenset[DyadicCube]]:
        acc: dict[DyadicCube, set[DyadicCube]] = {Q: set() for Q in self.family.cubes}
        for Q, chain in self.chains.items():
            for R in chain:
                acc[R].add(Q)
        return {R: frozenset(v) for R, v in acc.items()}

    @cached_property
    def _pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """All (Q, R) index pairs with ``R`` on the chain of ``Q``."""
        qs, rs = [], []
        for i in range(len(self.family)):
            c = self.chain_indices(i)
            qs.extend([i] * len(c))
            rs.extend(c)
        return np.asarray(qs, dtype=np.int64), np.asarray(rs, dtype=np.int64)

    @cached_property
    def rho(self) -> int:
        """Smallest integer making chain properties (1) and (2) hold."""
        qs, rs = self._pairs
        lev = self.family.levels
        size_gap = int(max(0, (lev[rs] - lev[qs]).max())) if len(qs) else 0
        # per-level multiplicity along each chain
        key = qs * (lev.max() + 1 - lev.min() + 1) + (lev[rs] - lev.min())
        _, counts = np.unique(key, return_counts=True)
        mult = int(counts.max()) if len(counts) else 1
        return max(size_gap, int(math.ceil(math.log2(mult))) if mult > 1 else 0)

    def per_level_max(self) -> int:
        qs, rs = self._pairs
        lev = self.family.levels
        key = qs * (lev.max() + 1 - lev.min() + 1) + (lev[rs] - lev.min())
        _, counts = np.unique(key, return_counts=True)
        return int(counts.max()) if len(counts) else 0

    def shadow_sums(self, q: float, rho: int | None = None) -> np.ndarray:
        """Per cube ``R``: ``|R|^-1 sum_{Q in S(R)} |Q| (rho + 1 + k - j)^q`` (side ``2^-j`` for R, ``2^-k`` for Q)."""
        rho = self.rho if rho is None else rho
        qs, rs = self._pairs
        lev = self.family.levels
        n = self.family.n
        k, j = lev[qs], lev[rs]
        if np.any(k < j - rho):
            raise ValueError("chain property (1) fails for the given rho")
        terms = np.exp2(-n * (k - j).astype(float)) * (rho + 1.0 + k - j) ** q
        out = np.zeros(len(self.family))
        # fixed summation order: pairs are grouped by Q then chain position
        np.add.at(out, rs, terms)
        return out

    def sigma(self, q: float) -> float:
        return float(self.shadow_sums(q).max())

    def duality_mismatches(self) -> int:
        """Count cubes whose shadow differs from their subtree in the predecessor tree.

        The subtree is built top-down from the child lists, independently of
        the chains, so zero means ``R ∈ C(Q) ⇔ Q ∈ S(R)`` holds exactly.
        """
        cubes = self.family.cubes
        kids: list[list[int]] = [[] for _ in cubes]
        for i, p in enumerate(self.parent):
            if p >= 0:
                kids[int(p)].append(i)
        bad = 0
        for r in range(len(cubes)):
            stack, seen = [r], set()
            while stack:
                v = stack.pop()
                seen.add(cubes[v])
                stack.extend(kids[v])
            bad += seen != self.shadows[cubes[r]]
        return bad

    def to_json(self) -> dict:
        cubes = self.family.cubes
        return {
            "center": {"level": self.center_cube.level, "index": list(self.center_cube.index)},
            "chains": [
                [[cubes[k].level, list(cubes[k].index)] for k in self.chain_indices(i)] for i in range(len(cubes))
            ],
        }


def build_chains(W: WhitneyFamily, center: DyadicCube | None = None) -> ChainDecomposition:
    """Chains as shortest paths from ``center`` with edge weight ``1/side`` of the entered cube.

    Raises
    ------
    ValueError
        The cube adjacency graph is disconnected; the message lists component sizes.
    """
    if center is None:
        center = john_center(W.domain, W)
    try:
        c = W.position[center]
    except KeyError:
        raise ValueError(f"{center} is not a cube of the family") from None
    A = adjacency(W).tocoo()
    weights = 1.0 / W.sides[A.col]
    graph = sparse.csr_matrix((weights, (A.row, A.col)), shape=A.shape)
    ncomp, labels = connected_components(graph, directed=False)
    if ncomp > 1:
        sizes = np.bincount(labels)
        raise ValueError(f"adjacency graph has {ncomp} components of sizes {sorted(sizes.tolist(), reverse=True)}")
    _, pred = dijkstra(graph, directed=True, indices=c, return_predecessors=True)
    pred = pred.astype(np.int64)
    pred[c] = -1
    return ChainDecomposition(W, c, pred)


@dataclass(frozen=True)
class ChainReport:
    rho: int
    per_level_max: int
    sigma_measured: float
    q: float

    def to_json(self) -> dict:
        return {"rho": self.rho, "per_level_max": self.per_level_max, "sigma_measured": self.sigma_measured, "q": self.q}


def verify_chain_properties(C: ChainDecomposition, q: float) -> ChainReport:
    """Evaluate chain properties (1)-(3) exactly over the finite family."""
    if q < 1:
        raise ValueError("q must be >= 1")
    rho = C.rho
    qs, rs = C._pairs
    lev = C.family.levels
    if np.any(lev[qs] < lev[rs] - rho):
        raise AssertionError("property (1) violated")
    if C.per_level_max() > 2 ** rho:
        raise AssertionError("property (2) violated")
    sigma = C.sigma(q)
    if not math.isfinite(sigma):
        raise AssertionError("shadow sum is not finite")
    return ChainReport(rho, C.per_level_max(), sigma, float(q))


def telescoping_constant(C: ChainDecomposition, u: GridFunction) -> float:
    """Lattice version of the chain telescoping constant.

    For consecutive chain cubes ``R, R'`` with overlap ``I = R* ∩ R'*``,
    ``|u_{R*} - u_{R'*}| <= |R*|/|I| osc(R*) + |R'*|/|I| osc(R'*)``.  Each
    cube enters at most two consecutive pairs, so twice the largest
    ``|R*|/|I|`` bounds the whole telescoping sum.  Measures are lattice cell
    counts.
    """
    W = C.family
    lat = u.lattice
    worst = 0.0
    for i in range(len(W)):
        p = int(C.parent[i])
        if p < 0:
            continue
        a = _star_cells(lat, W, i)
        b = _star_cells(lat, W, p)
        inter = np.count_nonzero(a & b & u.inside)
        if inter == 0:
            return math.inf
        worst = max(worst, np.count_nonzero(a & u.inside) / inter, np.count_nonzero(b & u.inside) / inter)
    return 2.0 * worst


def _star_cells(lat, W: WhitneyFamily, i: int) -> np.ndarray:
    half = 0.5 * STAR * W.sides[i]
    box = Box(tuple(W.centers[i] - half), tuple(W.centers[i] + half))
    mask = np.zeros(lat.shape, dtype=bool)
    mask[lat.cube_slice(box)] = True
    return mask


def telescoping_audit(C: ChainDecomposition, u: GridFunction, constant: float) -> float:
    """Largest ``|u_{Q*} - u_{Q0*}| / (constant * sum_{R in C(Q)} osc(R*))`` over the family.

    Values at most 1 confirm the telescoping bound; ``osc(R*)`` is the lattice
    mean of ``|u - u_{R*}|`` over ``R*``.
    """
    W = C.family
    means = np.empty(len(W))
    osc = np.empty(len(W))
    for i in range(len(W)):
        m = _star_cells(u.lattice, W, i) & u.inside
        v = u.values[m]
        means[i] = v.mean()
        osc[i] = np.abs(v - means[i]).mean()
    worst = 0.0
    c0 = C.center_index
    for i in range(len(W)):
        chain = C.chain_indices(i)
        lhs = abs(means[i] - means[c0])
        rhs = constant * math.fsum(osc[chain])
        if lhs == 0:
            continue
        worst = max(worst, lhs / rhs if rhs > 0 else math.inf)
    return worst
