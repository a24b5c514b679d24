import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LENS_C, interior_ids, two_disk_union_area
from wmdm import mmspace as M
from wmdm.mmspace import SpaceError


def test_lens_oracle_matches_closed_form():
    assert LENS_C ** 2 == pytest.approx(4 * math.pi / 3 + math.sqrt(3) / 2, rel=1e-14)
    assert two_disk_union_area(1.0, 2.5) == pytest.approx(2 * math.pi)
    assert two_disk_union_area(1.0, 0.0) == pytest.approx(math.pi)


def test_two_points():
    sp = M.build_space([[0, 0], [1, 0]], weights=[0.5, 0.5])
    assert sp.dist(0, 1) == 1.0
    assert sp.total_mass == 1.0
    cell = M.build_space([[0, 0], [1, 0]], area=2.0)
    assert cell.total_mass == pytest.approx(2.0)
    assert cell.weights[0] == pytest.approx(1.0)


def test_square_mass_and_count():
    sp = M.square(64)
    assert sp.n == 64 * 64
    assert sp.total_mass == pytest.approx(1.0, abs=1e-9)
    assert M.square(8).n == 64 and M.square(8).total_mass == pytest.approx(1.0)


def test_snowflake_distances(sq16, rng):
    sn = sq16.snowflake(0.5)
    for _ in range(50):
        i, j = rng.integers(0, sq16.n, 2)
        assert sn.dist(int(i), int(j)) == pytest.approx(sq16.dist(int(i), int(j)) ** 0.5, abs=1e-15)


def test_build_space_rejections():
    with pytest.raises(SpaceError) as e:
        M.build_space([[0, 0], [1, 0], [0, 0]])
    assert e.value.index == 2
    with pytest.raises(SpaceError) as e:
        M.build_space([[0, 0], [1, 0]], weights=[1, -1])
    assert e.value.index == 1
    with pytest.raises(SpaceError):
        M.build_space(None, [[0, 1], [2, 0]])
    with pytest.raises(SpaceError):
        M.build_space(None, [[1, 1], [1, 0]])
    with pytest.raises(SpaceError):
        M.build_space([[0, 0]])
    with pytest.raises(SpaceError):
        M.build_space([[0, 0], [1, 0]], ("snowflake", 1.5))
    with pytest.raises(SpaceError):
        M.build_space(None, [[0, 1, 5], [1, 0, 1], [5, 1, 0]])


def test_ball_whole_and_singleton(sq16):
    c = 100
    assert M.ball(sq16, c, 10.0).mass == pytest.approx(sq16.total_mass)
    b = M.ball(sq16, c, 0.5 * sq16.pitch)
    assert list(b.members) == [c] and b.mass == sq16.weights[c]
    with pytest.raises(SpaceError):
        M.ball(sq16, sq16.n, 0.1)
    with pytest.raises(SpaceError):
        M.ball(sq16, 0, 0.0)


def test_ball_disk_area():
    sp = M.square(64)
    c = int(np.argmin(np.hypot(*(sp.coords - 0.5).T)))
    assert M.ball(sp, c, 0.25).mass == pytest.approx(math.pi * 0.25 ** 2, rel=0.1)


def test_pair_ball_isolated_points():
    sp = M.build_space([[0, 0], [1, 0], [10, 0]], weights=[1, 1, 1])
    assert M.pair_ball(sp, 0, 1).mass == 2.0
    with pytest.raises(SpaceError):
        M.pair_ball(sp, 1, 1)


def test_pair_ball_lens_area():
    sp = M.square(64)
    ids = interior_ids(sp, 0.3)
    x = ids[len(ids) // 2]
    for off in (3, 5, 7):
        y = x + off
        t = sp.dist(x, y)
        assert M.pair_ball(sp, x, y).mass == pytest.approx(two_disk_union_area(t, t), rel=0.1)


def test_pair_ball_snowflake_set_equality(sq16, rng):
    sn = sq16.snowflake(0.5)
    for _ in range(40):
        x, y = (int(v) for v in rng.choice(sq16.n, 2, replace=False))
        a, b = M.pair_ball(sq16, x, y), M.pair_ball(sn, x, y)
        assert np.array_equal(a.members, b.members) and np.array_equal(a.shell, b.shell)
        assert a.mass == b.mass


def test_vector_masses_match_scalar(sq16, rng):
    pairs = np.array([rng.choice(sq16.n, 2, replace=False) for _ in range(30)])
    vec = M.pair_ball_masses(sq16, pairs)
    assert np.allclose(vec, [M.pair_ball(sq16, int(a), int(b)).mass for a, b in pairs], rtol=0, atol=1e-15)
    radii = rng.uniform(0.01, 0.5, 30)
    centers = rng.integers(0, sq16.n, 30)
    vec = M.ball_masses(sq16, centers, radii)
    assert np.allclose(vec, [M.ball(sq16, int(c), r).mass for c, r in zip(centers, radii)], atol=1e-15)


def test_generators():
    ann = M.annulus(1, 2, 64)
    assert np.hypot(*ann.coords.T).min() >= 1 - 1e-12
    assert set(ann.boundary) == {"inner", "outer"}
    assert ann.total_mass == pytest.approx(3 * math.pi)
    cd = M.circle_domain_space([((-0.5, 0), 0.2), ((0.5, 0), 0.2)], 32)
    assert set(cd.boundary) == {"A1", "A2", "outer"}
    with pytest.raises(SpaceError) as e:
        M.circle_domain_space([((0, 0), 0.5), ((0.6, 0), 0.5)], 32)
    assert e.value.index == (0, 1)
    with pytest.raises(SpaceError):
        M.square(4)
    w = M.generate("weighted(step):square(16)")
    assert w.total_mass == pytest.approx(2.5)
    assert M.generate({"kind": "annulus", "r": 1, "R": 2, "n": 16}).n == M.annulus(1, 2, 16).n
    assert M.generate("snowflake(1/2):square(8)").metric.theta == 0.5
    with pytest.raises(SpaceError):
        M.generate("hexagon(3)")


def test_matrix_space_balls():
    D = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], float)
    sp = M.build_space(None, D, weights=[1, 2, 3])
    assert M.ball(sp, 0, 1.5).mass == 3.0
    assert M.ball(sp, 0, 1.0).mass == 1.0 + 0.5 * 2.0
    assert M.pair_ball(sp, 0, 2).mass == 6.0
    assert np.allclose(M.pair_ball_masses(sp, [[0, 2], [0, 1]]), [6.0, M.pair_ball(sp, 0, 1).mass])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 255), st.integers(0, 255), st.floats(0.2, 1.0))
def test_pair_ball_contains_balls_and_invariant(x, y, theta):
    sp = M.square(16)
    if x == y:
        return
    pb = M.pair_ball(sp, x, y)
    r = sp.dist(x, y)
    for c in (x, y):
        b = M.ball(sp, c, r)
        assert set(b.members) <= set(pb.members) | set(pb.shell)
        assert b.mass <= pb.mass + 1e-15
    sn = M.pair_ball(sp.snowflake(theta), x, y)
    assert np.array_equal(sn.members, pb.members)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 63), min_size=3, max_size=3, unique=True), st.floats(0.1, 1.0))
def test_triangle_inequality(t, theta):
    sp = M.square(8).snowflake(theta)
    a, b, c = t
    assert sp.dist(a, c) <= sp.dist(a, b) + sp.dist(b, c) + 1e-12


def test_space_json_roundtrip(tmp_path):
    from wmdm import io

    sp = M.generate("snowflake(1/2):annulus(1,2,16)")
    io.write_space(sp, tmp_path / "s.json")
    back = io.read_space(tmp_path / "s.json")
    assert back.n == sp.n and np.array_equal(back.coords, sp.coords)
    assert np.array_equal(back.weights, sp.weights)
    assert back.metric == sp.metric and back.pitch == sp.pitch
    assert {k: list(v) for k, v in back.boundary.items()} == {k: list(v) for k, v in sp.boundary.items()}
