import csv
import io
import math

import numpy as np
import pytest

from fraclab.assouad import (
    MIN_POINTS,
    corollary_conditions,
    covering_profile,
    greedy_net_count,
    lower_assouad_estimate,
    scale_ladder,
    upper_assouad_estimate,
)
from fraclab.functional import FracParams
from fraclab.geometry import make_domain

P = FracParams(0.5, 2.0)


def segment(m=4000):
    return np.stack([np.linspace(0, 1, m), np.zeros(m)], 1)


def filled_square(m=128):
    g = np.linspace(0, 1, m)
    return np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)


def cantor_dust(level=7):
    c = np.array([0.0])
    for _ in range(level):
        c = np.concatenate([c / 3, c / 3 + 2 / 3])
    return np.stack(np.meshgrid(c, c, indexing="ij"), -1).reshape(-1, 2)


def within(value, interval):
    return interval[0] <= value <= interval[1]


def test_segment_has_dimension_one():
    lam, iv, _ = upper_assouad_estimate(segment())
    assert within(1.0, iv) and lam == pytest.approx(1.0, abs=0.02)
    low, low_iv, _ = lower_assouad_estimate(segment())
    assert within(1.0, low_iv)


def test_filled_square_has_dimension_two():
    E = filled_square()
    pairs = scale_ladder(math.sqrt(2), range(1, 3), range(2, 5))
    lam, iv, _ = upper_assouad_estimate(E, pairs, resolution=1 / 127)
    assert within(2.0, iv)


def test_cantor_dust_dimension():
    lam, iv, _ = upper_assouad_estimate(cantor_dust(), resolution=3.0**-7)
    assert within(math.log(4) / math.log(3), iv)


def test_single_point_has_dimension_zero():
    E = np.zeros((MIN_POINTS, 2))
    lam, iv, prof = upper_assouad_estimate(E)
    assert lam == 0.0 and iv == (0.0, 0.0)
    assert np.all(prof.counts == 1)


def test_greedy_net_examples():
    E = segment(1001)
    assert greedy_net_count(E, 0.1) == 10
    assert greedy_net_count(E[:0], 0.1) == 0
    assert greedy_net_count(E, 2.0) == 1


def test_counts_monotone_in_r():
    E = cantor_dust(6)
    R = 0.5
    counts = [covering_profile(E, [(R, R / 2**b)], centers=8).counts for b in (2, 3, 4, 5)]
    for a, b in zip(counts, counts[1:]):
        assert np.all(a <= b)


def test_ladder_and_profile_csv():
    pairs = scale_ladder(2.0)
    assert len(pairs) == 16
    assert pairs[0] == (1.0, 0.25) and pairs[-1] == (2.0 / 16, 2.0 / 16 / 32)
    prof = covering_profile(segment(), centers=5)
    rows = list(csv.reader(io.StringIO(prof.to_csv())))
    assert rows[0] == ["center_id", "R", "r", "count"]
    assert len(rows) == 1 + 5 * 16
    assert prof.center_ids[0] == 0 and prof.center_ids[-1] == 3999


@pytest.mark.parametrize("kwargs", [
    dict(E=segment(999)),
    dict(E=segment(), scale_pairs=[(0.1, 0.2)]),
    dict(E=segment(), scale_pairs=[(0.1, 0.05)]),
    dict(E=segment(), scale_pairs=[(2.5, 0.1)]),
    dict(E=segment(), scale_pairs=[(0.5, 0.0001)], resolution=0.001),
])
def test_profile_rejects_bad_input(kwargs):
    with pytest.raises(ValueError):
        covering_profile(**kwargs)


def test_corollary_half_plane_is_inconclusive():
    # boundary line has dimension exactly n - delta p = 1
    r = corollary_conditions(make_domain("half_space"), P)
    assert r["threshold"] == 1.0
    assert r["A"] == "inconclusive" and r["B"] == "inconclusive"
    assert r["boundary_unbounded"]


@pytest.mark.parametrize("name", ["unit_square", "plane_minus_segment"])
def test_corollary_bounded_boundary_fails_b(name):
    r = corollary_conditions(make_domain(name), P)
    assert r["B"] == "fails" and not r["boundary_unbounded"]


def test_corollary_small_delta_p_holds_a():
    # threshold 2 - 0.2 = 1.8 lies above the whole interval around 1
    r = corollary_conditions(make_domain("half_space"), FracParams(0.1, 2.0))
    assert r["A"] == "holds" and r["B"] == "fails"


@pytest.mark.parametrize("name,delta,A,B", [("plane_minus_segment", 0.3, "holds", "fails"),
                                            ("plane_minus_segment", 0.5, "inconclusive", "fails"),
                                            ("cone", 0.6, "fails", "holds")])
def test_corollary_examples(name, delta, A, B):
    r = corollary_conditions(make_domain(name), FracParams(delta, 2.0))
    assert (r["A"], r["B"]) == (A, B)


@pytest.mark.parametrize("s", [0.5, 2.0])
def test_scale_covariance_exact(s):
    E = segment(10_000)
    assert upper_assouad_estimate(s * E)[0] == upper_assouad_estimate(E)[0]
    assert lower_assouad_estimate(s * E)[0] == lower_assouad_estimate(E)[0]


def test_lower_never_exceeds_upper():
    for E in (segment(), cantor_dust(6), make_domain("unit_square").boundary_sample(1 / 1000)):
        prof = covering_profile(E, centers=16)
        assert prof.lower <= prof.upper


def test_square_boundary_dimension_one():
    E = make_domain("unit_square").boundary_sample(1 / 1000)
    assert 0.85 <= upper_assouad_estimate(E)[0] <= 1.15
    assert 0.85 <= lower_assouad_estimate(E)[0] <= 1.15
