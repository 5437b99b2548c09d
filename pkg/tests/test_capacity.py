import math

import numpy as np
import pytest

from fraclab.capacity import (
    CapacityProblem,
    capacity_estimate,
    compact_from_mask,
    cutoff_phi,
    disc_compact,
    support_cells,
    truncate_levels,
)
from fraclab.fixtures import fixture_family
from fraclab.functional import FracParams, seminorm_energy
from fraclab.geometry import DyadicCube, make_domain
from fraclab.grid import GridFunction, Lattice
from fraclab.inequality import geometric_series_bound

P = FracParams(0.5, 2.0)
SQ = make_domain("unit_square")


def dense_capacity(lat, K_mask, s):
    """Quadratic energy as an explicit weighted graph Laplacian, solved with K fixed to 1.

    On the unit square every cell is a domain cell and the admissible
    functions vanish on the outer ring of cells (their closures touch the
    boundary).  The constrained minimizer stays in [0, 1] by the maximum
    principle, so the linear solve is the exact discrete minimizer.
    """
    m = lat.shape[0]
    idx = np.array(list(np.ndindex(*lat.shape)))
    diff = (idx[:, None, :] - idx[None, :, :]) * lat.h
    r = np.linalg.norm(diff, axis=-1)
    with np.errstate(divide="ignore"):
        W = np.where(r > 0, r ** (-(2 + s)), 0.0) * lat.h**4
    L = np.diag(W.sum(1)) - W
    ring = (idx.min(1) == 0) | (idx.max(1) == m - 1)
    K = K_mask.ravel()
    free = ~ring & ~K
    u = np.zeros(len(idx))
    u[K] = 1.0
    u[free] = np.linalg.solve(L[np.ix_(free, free)], -L[np.ix_(free, K)] @ np.ones(K.sum()))
    return 2.0 * u @ L @ u, u


def test_pcg_matches_dense_oracle():
    lat = Lattice.cells(SQ.window, 16)
    K = disc_compact(lat, SQ, (0.5, 0.5), 0.15)
    res = capacity_estimate(CapacityProblem(K, SQ, P, lat))
    ref, u = dense_capacity(lat, K.cells, P.s)
    assert u.min() >= -1e-12 and u.max() <= 1 + 1e-12
    assert res.converged and res.method == "pcg"
    assert res.value_upper == pytest.approx(ref, rel=0.01)


def test_support_cells_exclude_boundary_ring():
    lat = Lattice.cells(SQ.window, 8)
    s = support_cells(lat, SQ)
    assert s.sum() == 36 and not s[0].any() and s[1:-1, 1:-1].all()


def test_empty_compact_has_zero_capacity():
    lat = Lattice.cells(SQ.window, 16)
    K = compact_from_mask(lat, SQ, np.zeros(lat.shape, bool))
    res = capacity_estimate(CapacityProblem(K, SQ, P, lat))
    assert res.value_upper == 0.0 and res.method == "empty"


def test_compact_touching_boundary_cells_rejected():
    lat = Lattice.cells(SQ.window, 16)
    mask = np.zeros(lat.shape, bool)
    mask[0, 5] = True
    with pytest.raises(ValueError, match="admissible"):
        CapacityProblem(compact_from_mask(lat, SQ, mask), SQ, P, lat)


def test_nested_discs_monotone():
    lat = Lattice.cells(SQ.window, 32)
    vals = [capacity_estimate(CapacityProblem(disc_compact(lat, SQ, (0.5, 0.5), r), SQ, P, lat)).value_upper
            for r in (0.05, 0.1, 0.2, 0.3)]
    for a, b in zip(vals, vals[1:]):
        assert a <= b * (1 + 1e-3)


def test_subgradient_for_p_three_halves():
    lat = Lattice.cells(SQ.window, 16)
    Q = FracParams(0.5, 1.5)
    K = disc_compact(lat, SQ, (0.5, 0.5), 0.15)
    res = capacity_estimate(CapacityProblem(K, SQ, Q, lat), budget=200)
    assert res.method == "subgradient" and len(res.trace) == res.iterations + 1
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))
    u = res.minimizer
    assert np.all(u.values[K.cells] == 1.0)
    assert np.all(u.values[~support_cells(lat, SQ)] == 0.0)
    assert res.value_upper == pytest.approx(seminorm_energy(u, Q), rel=1e-12)
    assert res.value_upper <= res.trace[0] * (1 + 1e-12)


@pytest.mark.parametrize("p", [2.0, 1.5])
def test_capacity_below_cutoff_energy(p):
    lat = Lattice.cells(SQ.window, 32)
    Q = DyadicCube(2, (1, 1))
    phi = cutoff_phi(Q, lat, SQ)
    K = compact_from_mask(lat, SQ, phi.values >= 1.0)
    Pp = FracParams(0.5, p)
    res = capacity_estimate(CapacityProblem(K, SQ, Pp, lat), budget=150)
    assert res.value_upper <= seminorm_energy(phi, Pp) * (1 + 1e-9)


def test_cutoff_phi_shape():
    lat = Lattice.cells(SQ.window, 128)
    Q = DyadicCube(2, (1, 2))
    phi = cutoff_phi(Q, lat, SQ)
    c = lat.centers
    inQ = np.all((c >= Q.lo) & (c <= Q.hi), axis=-1)
    hat = Q.dilate(17 / 16)
    out = ~np.all((c > hat.lo) & (c < hat.hi), axis=-1)
    assert np.all(phi.values[inQ] == 1.0) and np.all(phi.values[out] == 0.0)
    dx = np.abs(np.diff(phi.values, axis=0)).max() / lat.h
    dy = np.abs(np.diff(phi.values, axis=1)).max() / lat.h
    assert max(dx, dy) <= 32 / Q.side * (1 + 1e-12)
    with pytest.raises(ValueError):
        cutoff_phi(DyadicCube(1, (0, 0)), lat, SQ)


def test_truncate_levels_examples():
    lat = Lattice.cells(SQ.window, 2)
    u = GridFunction(lat, SQ, np.array([[0.0, 1.0], [3.0, 1.5]]))
    assert truncate_levels(u, 0).values.tolist() == [[0.0, 0.0], [1.0, 0.5]]
    assert truncate_levels(-1.0 * u, 0).values.tolist() == [[0.0, 0.0], [1.0, 0.5]]


def test_truncation_range_and_lipschitz_transfer():
    lat = Lattice.cells(SQ.window, 32)
    for u in fixture_family("random_smooth(4)", 6, lat, SQ, count=10):
        u = 8.0 * u
        for k in (-2, 0, 1, 2):
            t = truncate_levels(u, k)
            assert t.values.min() >= 0 and t.values.max() <= 1
            v, w = u.values.ravel(), t.values.ravel()
            dv = np.abs(v[:, None] - v[None, :])
            dw = np.abs(w[:, None] - w[None, :])
            assert np.all(dw <= 2.0 ** (-k) * dv * (1 + 1e-12) + 1e-15)
            assert seminorm_energy(t, P) <= 2.0 ** (-k * P.p) * seminorm_energy(u, P) * (1 + 1e-12)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_geometric_series_matches_closed_form(p):
    partial, closed = geometric_series_bound(p)
    assert partial == pytest.approx(closed, rel=1e-12)
    assert math.isclose(closed, 1 / (1 - 2**-p))
