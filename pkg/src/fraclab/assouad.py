"""Upper and lower Assouad dimension estimates from greedy covering counts.

For a center ``x`` and a pair ``(R, r)`` the count ``N(x, R, r)`` is the size
of a greedy ``r``-net of ``E ∩ B(x, R)``.  A net is ``r``-separated and covers
with ``r``-balls, so it sits between the minimal covers at radii ``r`` and
``r/2``; that constant-factor slack only moves the intercept of the
log-log fit, not its slope.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .functional import FracParams
from .geometry import Domain

__all__ = [
    "MIN_POINTS",
    "SLACK",
    "CoveringProfile",
    "scale_ladder",
    "greedy_net_count",
    "covering_profile",
    "upper_assouad_estimate",
    "lower_assouad_estimate",
    "corollary_conditions",
]

MIN_POINTS = 1000
SLACK = 0.1  # relative half-width of the reported slope interval


def _diameter(E: np.ndarray) -> float:
    """Diameter of a point cloud (exact on the convex hull for n = 2, bounding-box bound otherwise)."""
    if len(E) < 2:
        return 0.0
    ext = E.max(axis=0) - E.min(axis=0)
    if not np.any(ext > 0):
        return 0.0
    if E.shape[1] == 2 and len(E) >= 3:
        from scipy.spatial import ConvexHull, QhullError

        try:
            hull = E[ConvexHull(E).vertices]
        except QhullError:  # collinear points
            axis = int(np.argmax(ext))
            lo, hi = E[np.argmin(E[:, axis])], E[np.argmax(E[:, axis])]
            return float(np.linalg.norm(hi - lo))
        d = np.linalg.norm(hull[:, None, :] - hull[None, :, :], axis=-1)
        return float(d.max())
    return float(np.linalg.norm(ext))


def scale_ladder(diam: float, a_values=range(1, 5), b_values=range(2, 6)) -> list[tuple[float, float]]:
    """Pairs ``R = 2^-a diam``, ``r = 2^-b R``."""
    return [(diam * 2.0 ** (-a), diam * 2.0 ** (-a - b)) for a in a_values for b in b_values]


def greedy_net_count(points: np.ndarray, r: float, tree: cKDTree | None = None) -> int:
    """Size of the greedy ``r``-net of ``points`` taken in their given order."""
    m = len(points)
    if m == 0:
        return 0
    tree = tree if tree is not None else cKDTree(points)
    covered = np.zeros(m, dtype=bool)
    count = 0
    for i in range(m):
        if covered[i]:
            continue
        count += 1
        covered[tree.query_ball_point(points[i], r)] = True
    return count


@dataclass
class CoveringProfile:
    """Counts ``N(x, R, r)`` for a set of centers and scale pairs, with per-center slopes."""

    scale_pairs: list[tuple[float, float]]
    center_ids: np.ndarray
    counts: np.ndarray  # (centers, pairs)
    slopes: np.ndarray = field(init=False)
    residuals: np.ndarray = field(init=False)

    def __post_init__(self):
        if np.any(self.counts < 1):
            raise ValueError("covering counts must be >= 1")
        ratios = np.array([math.log(R / r) for R, r in self.scale_pairs])
        logs = np.log(self.counts.astype(float))
        if np.ptp(ratios) == 0:
            self.slopes = np.zeros(len(self.center_ids))
            self.residuals = np.zeros(len(self.center_ids))
            return
        X = np.stack([ratios, np.ones_like(ratios)], axis=1)
        coef, *_ = np.linalg.lstsq(X, logs.T, rcond=None)
        self.slopes = coef[0]
        fit = X @ coef
        self.residuals = np.sqrt(np.mean((logs.T - fit) ** 2, axis=0))

    @property
    def upper(self) -> float:
        return float(self.slopes.max())

    @property
    def lower(self) -> float:
        return float(self.slopes.min())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["center_id", "R", "r", "count"])
        for i, cid in enumerate(self.center_ids):
            for j, (R, r) in enumerate(self.scale_pairs):
                w.writerow([int(cid), repr(float(R)), repr(float(r)), int(self.counts[i, j])])
        return buf.getvalue()


def covering_profile(E, scale_pairs=None, centers: int = 64, resolution: float | None = None) -> CoveringProfile:
    """Greedy covering counts of ``E`` around evenly spaced sample centers.

    Parameters
    ----------
    E : (m, n) array
        Point sample of the set, at least ``MIN_POINTS`` points.
    scale_pairs : list of (R, r), optional
        Defaults to :func:`scale_ladder` of the sample diameter.
    centers : int
        Number of centers, taken at evenly spaced sample indices.
    resolution : float, optional
        Sampling spacing; radii ``r`` below it are rejected.

    Raises
    ------
    ValueError
        Too few points, invalid scale pairs, or ``r`` below the resolution.
    """
    E = np.asarray(E, dtype=float)
    if E.ndim != 2 or len(E) < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} sample points, got {len(E)}")
    diam = _diameter(E)
    if scale_pairs is None:
        if diam == 0:
            # a single point: every ball holds one point at every scale
            pairs = scale_ladder(1.0)
            ids = np.zeros(1, dtype=int)
            return CoveringProfile(pairs, ids, np.ones((1, len(pairs)), dtype=int))
        scale_pairs = scale_ladder(diam)
    scale_pairs = [(float(R), float(r)) for R, r in scale_pairs]
    for R, r in scale_pairs:
        if not (0 < r < R):
            raise ValueError(f"need 0 < r < R, got ({R}, {r})")
        if R / r < 4:
            raise ValueError(f"scale pair ({R}, {r}) has R/r < 4")
        if diam > 0 and R >= 2 * diam:
            raise ValueError(f"R = {R} exceeds twice the diameter {diam}")
        if resolution is not None and r < resolution:
            raise ValueError(f"r = {r} is below the sample resolution {resolution}")
    ids = np.unique(np.linspace(0, len(E) - 1, min(centers, len(E))).round().astype(int))
    tree = cKDTree(E)
    counts = np.empty((len(ids), len(scale_pairs)), dtype=np.int64)
    for i, cid in enumerate(ids):
        local_trees: dict[float, tuple[np.ndarray, cKDTree]] = {}
        for j, (R, r) in enumerate(scale_pairs):
            if R not in local_trees:
                pts = E[np.sort(tree.query_ball_point(E[cid], R))]
                local_trees[R] = (pts, cKDTree(pts))
            pts, sub = local_trees[R]
            counts[i, j] = greedy_net_count(pts, r, sub)
    return CoveringProfile(scale_pairs, ids, counts)


def _interval(slope: float) -> tuple[float, float]:
    return slope / (1.0 + SLACK), slope * (1.0 + SLACK)


def upper_assouad_estimate(E, scale_pairs=None, centers: int = 64, resolution: float | None = None):
    """Max over centers of the log-log slope; returns ``(estimate, (lo, hi), profile)``."""
    prof = covering_profile(E, scale_pairs, centers, resolution)
    lam = prof.upper
    return lam, _interval(lam), prof


def lower_assouad_estimate(E, scale_pairs=None, centers: int = 64, resolution: float | None = None):
    """Min over centers of the log-log slope; returns ``(estimate, (lo, hi), profile)``."""
    prof = covering_profile(E, scale_pairs, centers, resolution)
    lam = prof.lower
    return lam, _interval(lam), prof


def _compare(lo: float, hi: float, threshold: float, below: bool) -> str:
    """'holds' when the whole interval is on the required side of ``threshold``."""
    if below:
        return "holds" if hi < threshold else ("fails" if lo >= threshold else "inconclusive")
    return "holds" if lo > threshold else ("fails" if hi <= threshold else "inconclusive")


def corollary_conditions(D: Domain, P: FracParams, points: int = 4000) -> dict:
    """Compare boundary dimension estimates with ``n - delta p``.

    Condition A asks for an upper dimension below the threshold; condition B
    for a lower dimension above it together with an unbounded boundary.  Each
    entry is ``"holds"``, ``"fails"`` or ``"inconclusive"``; ``"profile"``
    holds the covering counts behind both estimates.
    """
    n = D.dim
    thr = n - P.delta * P.p
    spacing = _boundary_spacing(D, points)
    E = D.boundary_sample(spacing)
    prof = covering_profile(E, resolution=spacing)
    up, low = prof.upper, prof.lower
    up_iv, low_iv = _interval(up), _interval(low)
    A = _compare(*up_iv, thr, below=True)
    if not D.boundary_unbounded:
        B = "fails"
    else:
        B = _compare(*low_iv, thr, below=False)
    return {
        "threshold": thr,
        "upper": up,
        "upper_interval": list(up_iv),
        "lower": low,
        "lower_interval": list(low_iv),
        "boundary_unbounded": bool(D.boundary_unbounded),
        "A": A,
        "B": B,
        "profile": prof,
    }


def _boundary_spacing(D: Domain, points: int) -> float:
    """Spacing giving roughly ``points`` boundary samples (never fewer than ``MIN_POINTS``)."""
    probe = D.boundary_sample(D.window.side / 256)
    length = max(len(probe) - 1, 1) * D.window.side / 256
    spacing = length / max(points, MIN_POINTS)
    while len(D.boundary_sample(spacing)) < MIN_POINTS:
        spacing /= 2
    return spacing
