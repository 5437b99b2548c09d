import numpy as np
import pytest

from fraclab.chains import (
    build_chains,
    john_center,
    telescoping_audit,
    telescoping_constant,
    verify_chain_properties,
)
from fraclab.fixtures import fixture_family
from fraclab.geometry import DyadicCube, make_domain
from fraclab.grid import Lattice
from fraclab.whitney import WhitneyFamily, adjacency, whitney_decompose

BOUNDED = ["unit_square", "ball", "l_shape"]


@pytest.fixture(scope="module")
def square7():
    return build_chains(whitney_decompose(make_domain("unit_square"), 7))


def test_john_center_square_is_lexicographic_eighth(square7):
    # largest square Whitney cubes have side 1/8; ties resolved by distance then index
    assert square7.center_cube == DyadicCube(3, (3, 3))


def test_john_center_ball_contains_origin():
    W = whitney_decompose(make_domain("ball"), 6)
    Q = john_center(W.domain, W)
    assert Q.side == W.sides.max()
    assert np.all(Q.lo <= 0) and np.all(Q.hi >= 0)


def test_single_cube_family():
    D = make_domain("unit_square")
    W = WhitneyFamily(np.array([0]), np.array([[0, 0]]), D, 0)
    assert john_center(D, W) == DyadicCube(0, (0, 0))
    C = build_chains(W)
    rep = verify_chain_properties(C, 3.0)
    assert rep.rho == 0 and rep.sigma_measured == 1.0


def test_empty_family_rejected():
    D = make_domain("unit_square")
    W = WhitneyFamily(np.zeros(0, dtype=int), np.zeros((0, 2), dtype=int), D, 0)
    with pytest.raises(ValueError):
        john_center(D, W)


def test_center_chain_is_itself(square7):
    assert square7.chains[square7.center_cube] == (square7.center_cube,)


def test_chains_are_adjacent_paths(square7):
    W = square7.family
    A = adjacency(W).tocsr()
    for i in range(len(W)):
        c = square7.chain_indices(i)
        assert c[0] == square7.center_index and c[-1] == i
        assert all(A[a, b] for a, b in zip(c, c[1:]))


@pytest.mark.parametrize("name", BOUNDED)
def test_chain_properties_and_duality(name):
    C = build_chains(whitney_decompose(make_domain(name), 6))
    sig = [verify_chain_properties(C, q).sigma_measured for q in (1.0, 2.0, 4.0)]
    assert C.rho <= 3
    assert np.all(np.isfinite(sig)) and sig[0] <= sig[1] <= sig[2]
    assert C.duality_mismatches() == 0
    qs, rs = C._pairs
    assert np.all(C.family.levels[qs] >= C.family.levels[rs] - C.rho)
    assert C.per_level_max() <= 2 ** C.rho


def test_duality_definition_exhaustive(square7):
    chains, shadows = square7.chains, square7.shadows
    for Q, chain in chains.items():
        for R in chain:
            assert Q in shadows[R]
    for R, S in shadows.items():
        for Q in S:
            assert R in chains[Q]


def test_disconnected_family_rejected():
    D = make_domain("unit_square")
    W = WhitneyFamily(np.array([3, 3]), np.array([[0, 0], [5, 5]]), D, 3)
    with pytest.raises(ValueError, match="components"):
        build_chains(W)


def test_q_below_one_rejected(square7):
    with pytest.raises(ValueError):
        verify_chain_properties(square7, 0.5)


def test_telescoping_bound_random_functions():
    D = make_domain("unit_square")
    C = build_chains(whitney_decompose(D, 5))
    lat = Lattice.over(D.window, 1 / 256)
    funcs = fixture_family("random_smooth(4)", 3, lat, D, count=50)
    constants = [telescoping_constant(C, u) for u in funcs]
    assert np.isfinite(constants).all()
    for u, K in zip(funcs, constants):
        assert telescoping_audit(C, u, K) <= 1.0 + 1e-12


def test_sigma_grows_under_refinement_on_square():
    # recorded behaviour: the central cube's shadow keeps gaining finer layers
    s6 = build_chains(whitney_decompose(make_domain("unit_square"), 6)).sigma(4.0)
    s7 = build_chains(whitney_decompose(make_domain("unit_square"), 7)).sigma(4.0)
    assert s7 > s6


def test_measured_constants_comparable_on_convex_members():
    sq = build_chains(whitney_decompose(make_domain("unit_square"), 6))
    ball = build_chains(whitney_decompose(make_domain("ball"), 6))
    assert sq.rho == ball.rho
    a, b = sq.sigma(4.0), ball.sigma(4.0)
    assert max(a, b) / min(a, b) < 2
