"""Domains, dyadic cubes and the domain gallery.

Every gallery member carries a closed-form distance to its complement, so the
Whitney machinery downstream can test its invariants with equalities rather
than sampled estimates.  Points are plain numpy arrays of shape ``(..., n)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Any

import numpy as np
import shapely

__all__ = [
    "Box",
    "DyadicCube",
    "Domain",
    "CompactSet",
    "GALLERY",
    "make_domain",
    "domain_from_json",
    "dist_to_cube_set",
    "john_curve_exists",
]


@dataclass(frozen=True)
class Box:
    """Closed axis-parallel box ``[lo, hi]``; cubes and their dilations."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have the same dimension")
        if any(b <= a for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"degenerate box {self.lo} - {self.hi}")

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    @property
    def sides(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def side(self) -> float:
        return float(self.sides.max())

    @property
    def diam(self) -> float:
        return float(np.linalg.norm(self.sides))

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    def dilate(self, r: float) -> "Box":
        """Dilation about the center by factor ``r``."""
        c = self.center
        half = 0.5 * r * self.sides
        return Box(tuple(c - half), tuple(c + half))

    def contains_box(self, other: "Box") -> bool:
        return all(a <= c and d <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def to_json(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True, order=True)
class DyadicCube:
    """The closed cube ``2**-level * (index + [0, 1]^n)``."""

    level: int
    index: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.index, dtype=float) * self.side

    @property
    def hi(self) -> np.ndarray:
        return (np.asarray(self.index, dtype=float) + 1.0) * self.side

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.index, dtype=float) + 0.5) * self.side

    @property
    def diam(self) -> float:
        return math.sqrt(self.n) * self.side

    @property
    def volume(self) -> float:
        return self.side ** self.n

    def box(self) -> Box:
        return Box(tuple(self.lo), tuple(self.hi))

    def dilate(self, r: float) -> Box:
        return self.box().dilate(r)

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.level - 1, tuple(k >> 1 for k in self.index))

    def ancestor(self, level: int) -> "DyadicCube":
        if level > self.level:
            raise ValueError("ancestor level must not exceed the cube level")
        shift = self.level - level
        return DyadicCube(level, tuple(k >> shift for k in self.index))

    def children(self, depth: int = 1) -> list["DyadicCube"]:
        m = 1 << depth
        base = [k * m for k in self.index]
        return [
            DyadicCube(self.level + depth, tuple(b + o for b, o in zip(base, off)))
            for off in product(range(m), repeat=self.n)
        ]

    def contains_cube(self, other: "DyadicCube") -> bool:
        return other.level >= self.level and other.ancestor(self.level) == self

    def touches(self, other: "DyadicCube") -> bool:
        """Closures intersect (shared face, edge or corner, or nesting)."""
        return bool(np.all(self.lo <= other.hi) and np.all(other.lo <= self.hi))


# ---------------------------------------------------------------------------
# domains


def _as_points(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _corners(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """All 2^n corners of each box; shape (m, 2^n, n)."""
    n = lo.shape[-1]
    sel = np.array(list(product((0, 1), repeat=n)), dtype=bool)
    return np.where(sel[None, :, :], hi[:, None, :], lo[:, None, :])


def _window_face_distance(x: np.ndarray, window: Box) -> np.ndarray:
    lo = np.asarray(window.lo)
    hi = np.asarray(window.hi)
    d = np.minimum(x - lo, hi - x).min(axis=-1)
    return np.maximum(d, 0.0)


def _window_box_distance(lo: np.ndarray, hi: np.ndarray, window: Box) -> np.ndarray:
    wlo = np.asarray(window.lo)
    whi = np.asarray(window.hi)
    d = np.minimum(lo - wlo, whi - hi).min(axis=-1)
    return np.maximum(d, 0.0)


def _point_segment_distance(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    t = np.clip(((x - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(x - (a + t[..., None] * ab), axis=-1)


def _face_angle_nodes(x: np.ndarray, window: Box, order: int = 24):
    """Gauss-Legendre directions per window face, seen from each point.

    Returns (theta, weights, rho) with shapes (m, 4*order); ``rho`` is the exit
    distance from the window along each direction.  Only n = 2.
    """
    lo = np.asarray(window.lo)
    hi = np.asarray(window.hi)
    corners = np.array([[hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]], [lo[0], lo[1]]])
    rel = corners[None, :, :] - x[:, None, :]
    ang = np.arctan2(rel[..., 1], rel[..., 0])  # (m, 4) corner directions, CCW order
    # faces between consecutive corners: bottom (c3->c0), right (c0->c1), top (c1->c2), left (c2->c3)
    a0 = np.stack([ang[:, 3], ang[:, 0], ang[:, 1], ang[:, 2]], axis=1)
    a1 = np.stack([ang[:, 0], ang[:, 1], ang[:, 2], ang[:, 3]], axis=1)
    a1 = np.where(a1 < a0, a1 + 2 * np.pi, a1)
    g, w = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (a0 + a1)
    half = 0.5 * (a1 - a0)
    theta = mid[..., None] + half[..., None] * g  # (m, 4, order)
    weights = half[..., None] * w
    c, s = np.cos(theta), np.sin(theta)
    px, py = x[:, 0][:, None, None], x[:, 1][:, None, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.stack(
            [
                (lo[1] - py[:, 0]) / s[:, 0],
                (hi[0] - px[:, 0]) / c[:, 1],
                (hi[1] - py[:, 0]) / s[:, 2],
                (lo[0] - px[:, 0]) / c[:, 3],
            ],
            axis=1,
        )
    m = x.shape[0]
    return theta.reshape(m, -1), weights.reshape(m, -1), rho.reshape(m, -1)


def _fibonacci_sphere(count: int) -> np.ndarray:
    i = np.arange(count) + 0.5
    phi = np.arccos(1 - 2 * i / count)
    theta = np.pi * (1 + 5 ** 0.5) * i
    return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)


class Domain:
    """An open set with exact distance to its complement and a computation window.

    ``dist_boundary(x)`` is ``dist(x, R^n \\ D)``: positive exactly on ``D`` and
    1-Lipschitz everywhere.  Unbounded members carry a finite ``window`` and
    ``bounded = False``.
    """

    name: str = "domain"
    bounded: bool = True
    boundary_unbounded: bool = False

    def __init__(self, dim: int, window: Box, params: dict | None = None,
                 john_constant: float | None = None):
        if dim not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {dim}")
        if window.n != dim:
            raise ValueError("window dimension mismatch")
        if john_constant is not None and john_constant < 1:
            raise ValueError("John constant must be >= 1")
        self.dim = dim
        self.window = window
        self.params = dict(params or {})
        self.john_constant = john_constant

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"

    # -- geometry primitives, overridden per member
    def dist_boundary(self, x) -> np.ndarray:
        raise NotImplementedError

    def box_distance(self, lo, hi) -> np.ndarray:
        """Exact ``dist(box, R^n \\ D)`` for closed boxes; 0 when a box meets the complement."""
        raise NotImplementedError

    def box_meets(self, lo, hi) -> np.ndarray:
        """Whether the open box intersects ``D``."""
        raise NotImplementedError

    def boundary_sample(self, spacing: float) -> np.ndarray:
        raise NotImplementedError

    def tail_extent(self, x: np.ndarray, dirs: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """Far end of ``D`` along rays leaving the window.

        For each point ``x`` (inside the window) and unit direction, the part of
        the ray ``x + t*dir`` with ``t > rho`` lying in ``D`` is ``rho < t < e``;
        returns ``e`` (possibly ``inf``).  Bounded members never reach past
        their window.
        """
        return np.broadcast_to(rho, np.broadcast_shapes(rho.shape)).copy()

    # -- derived
    def inside(self, x) -> np.ndarray:
        return self.dist_boundary(x) > 0

    @property
    def center_point(self) -> np.ndarray:
        return self.window.center

    def truncated(self) -> "Domain":
        """The bounded open set ``D ∩ int(window)``; bounded members return themselves."""
        if self.bounded:
            return self
        return TruncatedDomain(self)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "params": self.params,
            "window": self.window.to_json(),
            "john_constant": self.john_constant,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


class _ConvexDomain(Domain):
    """Convex members: ``dist_boundary`` is concave on ``D``, so its minimum on a box is at a corner."""

    def box_distance(self, lo, hi):
        lo = np.atleast_2d(_as_points(lo))
        hi = np.atleast_2d(_as_points(hi))
        d = self.dist_boundary(_corners(lo, hi))
        return np.where(np.all(d > 0, axis=1), d.min(axis=1), 0.0)


class UnitCube(_ConvexDomain):
    name = "unit_square"

    def __init__(self, dim: int = 2):
        super().__init__(dim, Box((0.0,) * dim, (1.0,) * dim), {"dim": dim})

    def dist_boundary(self, x):
        x = _as_points(x)
        return np.maximum(np.minimum(x, 1.0 - x).min(axis=-1), 0.0)

    def box_distance(self, lo, hi):
        lo = np.atleast_2d(_as_points(lo))
        hi = np.atleast_2d(_as_points(hi))
        return np.maximum(np.minimum(lo, 1.0 - hi).min(axis=-1), 0.0)

    def box_meets(self, lo, hi):
        lo = np.atleast_2d(_as_points(lo))
        hi = np.atleast_2d(_as_points(hi))
        return np.all((lo < 1.0) & (hi > 0.0), axis=-1)

    def boundary_sample(self, spacing):
        if self.dim != 2:
            raise NotImplementedError("boundary sampling is implemented for n = 2")
        m = max(int(round(1.0 / spacing)), 1)
        t = np.arange(m) / m
        z, o = np.zeros(m), np.ones(m)
        return np.concatenate([
            np.stack([t, z], 1), np.stack([o, t], 1), np.stack([1 - t, o], 1), np.stack([z, 1 - t], 1),
        ])


class Ball(_ConvexDomain):
    name = "ball"

    def __init__(self, r: float = 1.0, dim: int = 2):
        if r <= 0:
            raise ValueError("ball radius must be positive")
        half = 2.0 ** math.ceil(math.log2(r))
        super().__init__(dim, Box((-half,) * dim, (half,) * dim), {"r": r, "dim": dim})
        self.r = float(r)

    def dist_boundary(self, x):
        x = _as_points(x)
        return np.maximum(self.r - np.linalg.norm(x, axis=-1), 0.0)

    def box_meets(self, lo, hi):
        lo = np.atleast_2d(_as_points(lo))
        hi = np.atleast_2d(_as_points(hi))
        nearest = np.clip(0.0, lo, hi)
        return np.linalg.norm(nearest, axis=-1) < self.r

    @property
    def center_point(self):
        return np.zeros(self.dim)

    def boundary_sample(self, spacing):
        if self.dim == 2:
            m = max(int(math.ceil(2 * math.pi * self.r / spacing)), 8)
            t = 2 * np.pi * np.arange(m) / m
            return self.r * np.stack([np.cos(t), np.sin(t)], 1)
        m = max(int(math.ceil(4 * math.pi * self.r ** 2 / spacing ** 2)), 32)
        return self.r * _fibonacci_sphere(m)


class Cone(_ConvexDomain):
    """``{x_n > cot(aperture) * |x'|}``; aperture is the half-angle (pi/4 gives ``x_n > |x'|``)."""

    name = "cone"
    bounded = False
    boundary_unbounded = True

    def __init__(self, aperture: float = math.pi / 4, window_size: float = 4.0, dim: int = 2):
        if not 0 < aperture < math.pi / 2:
            raise ValueError("cone aperture must lie in (0, pi/2)")
        if window_size <= 0:
            raise ValueError("window_size must be positive")
        s = float(window_size)
        lo = (-s / 2,) * (dim - 1) + (0.0,)
        hi = (s / 2,) * (dim - 1) + (s,)
        super().__init__(dim, Box(lo, hi), {"aperture": aperture, "window_size": s, "dim": dim})
        self.aperture = float(aperture)
        self._sin = math.sin(aperture)
        self._cos = math.cos(aperture)
        self._cot = self._cos / self._sin

    def dist_boundary(self, x):
        x = _as_points(x)
        radial = np.linalg.norm(x[..., :-1], axis=-1)
        return np.maximum(x[..., -1] * self._sin - radial * self._cos, 0.0)

    def box_meets(self, lo, hi):
        lo = np.atleast_2d(_as_points(lo))
        hi = np.atleast_2d(_as_points(hi))
        nearest = np.clip(0.0, lo[:, :-1], hi[:, :-1])
        return hi[:, -1] - self._cot * np.linalg.norm(nearest, axis=-1) > 0

    @property
    def center_point(self):
        c = np.zeros(self.dim)
        c[-1] = self.window.hi[-1] / 4
        return c

    def tail_extent(self, x, dirs, rho):
        # first exit of the ray from the cone: root of (a+tb)^2 = cot^2 |p+tw|^2 with a+tb >= 0
        a = x[..., -1][..., None]
        p = x[..., :-1]
        b = dirs[..., -1]
        w = dirs[..., :-1]
        c2 = self._cot ** 2
        pw = np.einsum("...k,...jk->...j", p, w) if w.ndim == 3 else (p[..., None, :] * w).sum(-1)
        ww = (w * w).sum(-1)
        pp = (p * p).sum(-1)[..., None]
        A = b * b - c2 * ww
        B = 2 * (a * b - c2 * pw)
        C = a * a - c2 * pp
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = B * B - 4 * A * C
            sq = np.sqrt(np.maximum(disc, 0.0))
            r1 = (-B - sq) / (2 * A)
            r2 = (-B + sq) / (2 * A)
            lin = -C / B
        roots = np.where(np.abs(A) < 1e-14, np.stack([lin, lin]), np.stack([r1, r2]))
        ok = (roots > 0) & (a + roots * b >= 0) & (disc >= 0)[None] | (np.abs(A) < 1e-14)[None] & (roots > 0)
        e = np.where(ok, roots, np.inf).min(axis=0)
        return np.maximum(e, rho)

    def boundary_sample(self, spacing):
        if self.dim != 2:
            raise NotImplementedError("boundary sampling is implemented for n = 2")
        s = self.window.hi[-1]
        length = min(s / self._cos, (s / 2) / self._sin)
        t = np.arange(0.0, length, spacing)
        right = np.stack([t * self._sin, t * self._cos], 1)
        left = np.stack([-t[1:] * self._sin, t[1:] * self._cos], 1)
        return np.concatenate([right, left])


class HalfSpace(_ConvexDomain):
    name = "half_space"
    bounded = False
    boundary_unbounded = True

    def __init__(self, window_size: float = 2.0, dim: int = 2):
        if window_size <= 0:
            raise ValueError("window_size must be positive")
        s = float(window_size)
        lo = (-s / 2,) * (dim - 1) + (0.0,)
        hi = (s / 2,) * (dim - 1) + (s,)
        super().__init__(dim, Box(lo, hi), {"window_size": s, "dim": dim})

    def dist_boundary(self, x):
        x = _as_points(x)
        return np.maximum(x[..., -1], 0.0)

    def box_distance(self, lo, hi):
        lo = np.atleast_2d(_as_points(lo))
        return np.maximum(lo[:, -1], 0.0)

    def box_meets(self, lo, hi):
        hi = np.atleast_2d(_as_points(hi))
        return hi[:, -1] > 0

    @property
    def center_point(self):
        c = np.zeros(self.dim)
        c[-1] = self.window.hi[-1] / 4
        return c

    def tail_extent(self, x, dirs, rho):
        a = x[..., -1][..., None]
        b = dirs[..., -1]
        with np.errstate(divide="ignore"):
            e = np.where(b < 0, -a / b, np.inf)
        return np.maximum(e, rho)

    def boundary_sample(self, spacing):
        if self.dim != 2:
            raise NotImplementedError("boundary sampling is implemented for n = 2")
        s = self.window.hi[-1]
        t = np.arange(-s / 2, s / 2 + 0.5 * spacing, spacing)
        return np.stack([t, np.zeros_like(t)], 1)


class PlaneMinusSegment(Domain):
    """``R^2`` minus the closed segment ``[0, 1] x {0}``."""

    name = "plane_minus_segment"
    bounded = False

    def __init__(self, window_size: float = 2.0):
        if window_size <= 0:
            raise ValueError("window_size must be positive")
        s = float(window_size)
        if s <= 1.0:
            raise ValueError("window must contain the slit: window_size > 1")
        super().__init__(2, Box((0.5 - s / 2, -s / 2), (0.5 + s / 2, s / 2)), {"window_size": s})
        self._a = np.array([0.0, 0.0])
        self._b = np.array([1.0, 0.0])

    def dist_boundary(self, x):
        x = _as_points(x)
        dx = np.maximum(np.maximum(-x[..., 0], x[..., 0] - 1.0), 0.0)
        return np.hypot(dx, x[..., 1])

    def box_distance(self, lo, hi):
        lo = np.atleast_2d(_as_points(lo))
        hi = np.atleast_2d(_as_points(hi))
        dx = np.maximum(np.maximum(lo[:, 0] - 1.0, -hi[:, 0]), 0.0)
        dy = np.maximum(np.maximum(lo[:, 1], -hi[:, 1]), 0.0)
        return np.hypot(dx, dy)

    def box_meets(self, lo, hi):
        return np.ones(np.atleast_2d(lo).shape[0], dtype=bool)

    @property
    def center_point(self):
        return np.array([0.5, 0.5])

    def tail_extent(self, x, dirs, rho):
        return np.full(np.broadcast_shapes(rho.shape), np.inf)

    def boundary_sample(self, spacing):
        m = max(int(round(1.0 / spacing)), 1)
        t = np.arange(m + 1) / m
        return np.stack([t, np.zeros_like(t)], 1)


class LShape(Domain):
    """``(-1, 1)^2`` minus the closed lower-right quadrant ``[0, 1) x (-1, 0]``."""

    name = "l_shape"
    _vertices = np.array([[-1.0, -1.0], [0.0, -1.0], [0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [-1.0, 1.0]])

    def __init__(self):
        super().__init__(2, Box((-1.0, -1.0), (1.0, 1.0)), {})
        self._ring = shapely.LinearRing(self._vertices)

    def _inside_open(self, x):
        in_square = np.all(np.abs(x) < 1.0, axis=-1)
        notch = (x[..., 0] >= 0.0) & (x[..., 1] <= 0.0)
        return in_square & ~notch

    def dist_boundary(self, x):
        x = _as_points(x)
        v = self._vertices
        d = np.min(
            np.stack([_point_segment_distance(x, v[i], v[(i + 1) % len(v)]) for i in range(len(v))]),
            axis=0,
        )
        return np.where(self._inside_open(x), d, 0.0)

    def box_distance(self, lo, hi):
        lo = np.atleast_2d(_as_points(lo))
        hi = np.atleast_2d(_as_points(hi))
        in_square = np.all((lo > -1.0) & (hi < 1.0), axis=-1)
        hits_notch = (hi[:, 0] >= 0.0) & (lo[:, 1] <= 0.0)
        contained = in_square & ~hits_notch
        out = np.zeros(lo.shape[0])
        if contained.any():
            boxes = shapely.box(lo[contained, 0], lo[contained, 1], hi[contained, 0], hi[contained, 1])
            out[contained] = shapely.distance(boxes, self._ring)
        return out

    def box_meets(self, lo, hi):
        lo = np.atleast_2d(_as_points(lo))
        hi = np.atleast_2d(_as_points(hi))

        def meets(rlo, rhi):
            return np.all((lo < rhi) & (hi > rlo), axis=-1)

        return meets(np.array([-1.0, 0.0]), np.array([1.0, 1.0])) | meets(
            np.array([-1.0, -1.0]), np.array([0.0, 1.0])
        )

    @property
    def center_point(self):
        return np.array([-0.5, 0.5])

    def boundary_sample(self, spacing):
        v = self._vertices
        pts = []
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            m = max(int(round(np.linalg.norm(b - a) / spacing)), 1)
            t = np.arange(m)[:, None] / m
            pts.append(a + t * (b - a))
        return np.concatenate(pts)


class TruncatedDomain(Domain):
    """``D ∩ int(window)`` for an unbounded member ``D``: a bounded open set."""

    bounded = True

    def __init__(self, base: Domain):
        super().__init__(base.dim, base.window, base.params, base.john_constant)
        self.base = base
        self.name = base.name

    def __repr__(self):
        return f"TruncatedDomain({self.base!r})"

    def dist_boundary(self, x):
        x = _as_points(x)
        return np.minimum(self.base.dist_boundary(x), _window_face_distance(x, self.window))

    def box_distance(self, lo, hi):
        lo = np.atleast_2d(_as_points(lo))
        hi = np.atleast_2d(_as_points(hi))
        return np.minimum(self.base.box_distance(lo, hi), _window_box_distance(lo, hi, self.window))

    def box_meets(self, lo, hi):
        lo = np.atleast_2d(_as_points(lo))
        hi = np.atleast_2d(_as_points(hi))
        wlo, whi = np.asarray(self.window.lo), np.asarray(self.window.hi)
        in_window = np.all((lo < whi) & (hi > wlo), axis=-1)
        return in_window & self.base.box_meets(lo, hi)

    @property
    def center_point(self):
        return self.base.center_point

    def boundary_sample(self, spacing):
        return self.base.boundary_sample(spacing)

    def truncated(self):
        return self


GALLERY = {
    "unit_square": UnitCube,
    "ball": Ball,
    "cone": Cone,
    "plane_minus_segment": PlaneMinusSegment,
    "l_shape": LShape,
    "half_space": HalfSpace,
}


def make_domain(name: str, **params: Any) -> Domain:
    """Build a gallery domain by name.

    Parameters
    ----------
    name : str
        One of ``unit_square``, ``ball``, ``cone``, ``plane_minus_segment``,
        ``l_shape``, ``half_space``.
    **params
        Member parameters: ``r`` (ball), ``aperture`` (cone half-angle),
        ``window_size`` (unbounded members), ``dim`` (2 or 3 where supported).

    Raises
    ------
    ValueError
        Unknown name, unknown parameter or nonpositive size.
    """
    try:
        cls = GALLERY[name]
    except KeyError:
        raise ValueError(f"unknown gallery domain {name!r}; choose from {sorted(GALLERY)}") from None
    john = params.pop("john_constant", None)
    try:
        dom = cls(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {name}: {exc}") from None
    if john is not None:
        if john < 1:
            raise ValueError("John constant must be >= 1")
        dom.john_constant = float(john)
    return dom


def domain_from_json(data: dict | str) -> Domain:
    if isinstance(data, str):
        data = json.loads(data)
    params = dict(data.get("params", {}))
    if data.get("john_constant") is not None:
        params["john_constant"] = data["john_constant"]
    return make_domain(data["name"], **params)


@dataclass(frozen=True)
class CompactSet:
    """Lattice cells marked as ``K``, all strictly inside ``domain``."""

    cells: np.ndarray  # boolean mask over a lattice
    domain: Domain
    centers: np.ndarray = field(repr=False)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=bool)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        if cells.any():
            d = self.domain.dist_boundary(self.centers[cells])
            if np.any(d <= 0):
                raise ValueError("compact set must lie strictly inside the domain")

    @cached_property
    def count(self) -> int:
        return int(self.cells.sum())

    @property
    def empty(self) -> bool:
        return self.count == 0


def dist_to_cube_set(Q: DyadicCube | Box, D: Domain) -> float:
    """Distance from the closed cube ``Q`` to the complement of ``D``.

    Exact for every gallery member (corner minimum on convex members, segment
    and polygon distances otherwise).  Returns 0 when ``Q`` meets ``∂D``.
    """
    box = Q.box() if isinstance(Q, DyadicCube) else Q
    return float(D.box_distance(np.asarray(box.lo)[None], np.asarray(box.hi)[None])[0])


def _cigar_ok(D: Domain, pts: np.ndarray, c: float, samples: int = 64) -> bool:
    seg = np.diff(pts, axis=0)
    lens = np.linalg.norm(seg, axis=1)
    total = lens.sum()
    if total == 0:
        return True
    start = np.concatenate([[0.0], np.cumsum(lens)[:-1]])
    t = np.linspace(0.0, 1.0, samples)
    along = pts[:-1, None, :] + t[None, :, None] * seg[:, None, :]
    arclen = start[:, None] + t[None, :] * lens[:, None]
    need = np.minimum(arclen, total - arclen) / c
    return bool(np.all(D.dist_boundary(along) >= need - 1e-12))


def john_curve_exists(D: Domain, x1, x2, c: float, max_level: int = 6):
    """Search a polyline witness for the John (cigar) condition between two points.

    Candidate curves run through centers of Whitney cubes along shortest paths
    in the cube adjacency graph, under two edge weightings (Euclidean length,
    and length scaled by inverse cube size).  A returned ``True`` comes with a
    verified witness; ``False`` means no witness was found at this resolution,
    not that none exists.

    Returns
    -------
    (bool, ndarray or None)
        Success flag and the polyline vertices of the witness.
    """
    from scipy.sparse.csgraph import dijkstra

    from .whitney import adjacency, whitney_decompose

    x1 = _as_points(x1)
    x2 = _as_points(x2)
    if not (D.inside(x1) and D.inside(x2)):
        raise ValueError("both points must lie inside the domain")
    if np.array_equal(x1, x2):
        return True, np.stack([x1, x2])
    straight = np.stack([x1, x2])
    if _cigar_ok(D, straight, c):
        return True, straight
    W = whitney_decompose(D, max_level)
    centers = W.centers
    G = D.truncated()

    def locate(x):
        inside = np.all((W.lo <= x) & (x <= W.hi), axis=1)
        if inside.any():
            return int(np.flatnonzero(inside)[0])
        return int(np.argmin(np.linalg.norm(centers - x, axis=1)))

    i1, i2 = locate(x1), locate(x2)
    A = adjacency(W).tocoo()
    length = np.linalg.norm(centers[A.row] - centers[A.col], axis=1)
    sides = W.sides
    for weights in (length, length / np.minimum(sides[A.row], sides[A.col])):
        from scipy.sparse import coo_matrix

        graph = coo_matrix((weights, (A.row, A.col)), shape=A.shape).tocsr()
        _, pred = dijkstra(graph, indices=i1, return_predecessors=True)
        if pred[i2] < 0 and i1 != i2:
            continue
        path = [i2]
        while path[-1] != i1:
            path.append(int(pred[path[-1]]))
        pts = np.vstack([x1[None], centers[path[::-1]], x2[None]])
        if _cigar_ok(G, pts, c):
            return True, pts
    return False, None
