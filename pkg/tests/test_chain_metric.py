import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LENS_C, interior_ids
from wmdm import chain_metric as cm
from wmdm import mmspace as M
from wmdm.mmspace import SpaceError


# ---------------------------------------------------------------------------
# independent oracles: pair-ball masses by direct membership, chain infima by
# Floyd-Warshall and by enumerating every simple chain
# ---------------------------------------------------------------------------

def oracle_pair_mass(space, x, y):
    D = space.dist_matrix
    r = D[x, y]
    tol = 1e-9 * r
    m = 0.0
    for z in range(space.n):
        a, b = D[x, z], D[y, z]
        if a < r - tol or b < r - tol:
            m += space.weights[z]
        elif abs(a - r) <= tol or abs(b - r) <= tol:
            m += 0.5 * space.weights[z]
    return m


def oracle_costs(space, delta):
    n = space.n
    C = np.full((n, n), np.inf)
    np.fill_diagonal(C, 0.0)
    D = space.dist_matrix
    for x in range(n):
        for y in range(x + 1, n):
            if D[x, y] <= delta * (1 + 1e-9):
                C[x, y] = C[y, x] = math.sqrt(oracle_pair_mass(space, x, y))
    return C


def floyd(C):
    Q = C.copy()
    for k in range(len(Q)):
        Q = np.minimum(Q, Q[:, k:k + 1] + Q[k:k + 1, :])
    return Q


def all_chains_min(C, x, y):
    n = len(C)
    best = math.inf
    others = [v for v in range(n) if v not in (x, y)]
    for k in range(len(others) + 1):
        for mid in itertools.permutations(others, k):
            chain = (x, *mid, y)
            cost = sum(C[a, b] for a, b in zip(chain, chain[1:]))
            best = min(best, cost)
    return best


def test_exhaustive_chains_on_small_grid():
    sp = M.square(8)
    pts = [i * 8 + j for i in range(3) for j in range(3)]
    sub = M.build_space(sp.coords[pts], weights=sp.weights[pts], pitch=sp.pitch)
    delta = 2.0 * sp.pitch
    C = oracle_costs(sub, delta)
    Q = cm.q_matrix(cm.chain_graph(sub, delta))
    for x, y in [(0, 8), (0, 4), (2, 6), (1, 7)]:
        assert Q[x, y] == pytest.approx(all_chains_min(C, x, y), abs=1e-12)


def small_grid(n, density=None):
    h = 1.0 / n
    P = (np.array([[i, j] for i in range(n) for j in range(n)]) + 0.5) * h
    return M.build_space(P, weights=density or "uniform-cell", area=1.0, pitch=h)


@pytest.mark.parametrize("n,density", [(5, None), (6, M.step_density)])
def test_shortest_path_reduction(n, density):
    sp = small_grid(n, density)
    delta = 4.0 * sp.pitch
    Q = cm.q_matrix(cm.chain_graph(sp, delta))
    assert np.allclose(Q, floyd(oracle_costs(sp, delta)), rtol=0, atol=1e-6)


def test_two_point_space():
    sp = M.build_space([[0, 0], [1, 0]], weights=[1, 1])
    g = cm.chain_graph(sp, 1.0)
    assert g.n_edges == 1 and g.costs[0] == pytest.approx(math.sqrt(2))
    assert cm.q_delta(g, 0, 1) == pytest.approx(math.sqrt(2)) and cm.q_delta(g, 1, 1) == 0.0
    assert cm.wmdm_constant(sp, g, [[0, 1]]).value == pytest.approx(1.0)
    rev = cm.reverse_constant(sp, g, [[0, 1]])
    assert rev.C_S == pytest.approx(1.0) and rev.r_x == {0: math.inf, 1: math.inf}
    qs = cm.q_space(sp, 1.0)
    assert qs.dist(0, 1) == pytest.approx(math.sqrt(2))
    assert cm.q_estimate(sp, 0, 1, [1.0]).q == pytest.approx(math.sqrt(2))


def test_disconnected_signal():
    sp = M.build_space([[0, 0], [1, 0], [5, 0]], weights=[1, 1, 1])
    with pytest.raises(cm.DisconnectedError) as e:
        cm.chain_graph(sp, 1.5)
    assert len(e.value.components) == 2
    with pytest.raises(SpaceError):
        cm.chain_graph(sp, 1.0, s=0)


def test_edge_costs_within_lens_bounds(sq32):
    h = sq32.pitch
    g = cm.chain_graph(sq32, 2 * h)
    d = np.hypot(*(sq32.coords[g.pairs[:, 0]] - sq32.coords[g.pairs[:, 1]]).T)
    full = LENS_C * d
    assert np.all(g.costs <= full * 1.35)
    inner = np.isin(g.pairs, interior_ids(sq32, 4 * h)).all(axis=1)
    assert np.all(g.costs[inner] >= 0.6 * full[inner])


def test_corner_to_corner():
    sp = M.square(64)
    g = cm.chain_graph(sp, 4 * sp.pitch)
    assert cm.q_delta(g, 0, sp.n - 1) == pytest.approx(LENS_C * math.sqrt(2), rel=0.1)


def test_snowflake_matched_delta_identical_costs(sq16):
    delta = 3 * sq16.pitch
    a = cm.chain_graph(sq16, delta)
    b = cm.chain_graph(sq16.snowflake(0.5), delta ** 0.5)
    assert np.array_equal(a.pairs, b.pairs)
    assert np.array_equal(a.costs, b.costs)


def test_q_estimate_flat_for_central_pair():
    sp = M.square(64)
    x, y = 28 * 64 + 28, 36 * 64 + 36
    est = cm.q_estimate(sp, x, y)
    vals = [v for _, v in est.table]
    assert max(vals) <= min(vals) * 1.05
    assert est.monotone and not est.flagged
    with pytest.raises(SpaceError):
        cm.q_estimate(sp, x, y, [0.1, 0.2])


def test_weighted_interface_heavier(sq16):
    w = M.generate("weighted(step):square(16)")
    g0, g1 = cm.chain_graph(sq16, 4 * sq16.pitch), cm.chain_graph(w, 4 * w.pitch)
    P = sq16.coords
    a = int(np.argmin(np.hypot(P[:, 0] - 0.1, P[:, 1] - 0.5)))
    b = int(np.argmin(np.hypot(P[:, 0] - 0.9, P[:, 1] - 0.5)))
    q0, q1 = cm.q_delta(g0, a, b), cm.q_delta(g1, a, b)
    # the density lies between 1 and 4, so q lies between 1x and 2x
    assert q0 < q1 < 2 * q0


def test_wmdm_constants_square():
    sp = M.square(64)
    ids = interior_ids(sp, 0.3)
    g = cm.chain_graph(sp, cm.finest_delta(sp))
    adj = np.array([[i, i + 1] for i in ids[:40]])
    assert cm.wmdm_constant(sp, g, adj).value == pytest.approx(1.0, abs=0.05)
    w = cm.wmdm_constant(sp, g, cm.sample_pairs(sp, 1000, 1))
    assert 1.0 <= w.value <= 1.5
    sn = sp.snowflake(0.5)
    gs = cm.chain_graph(sn, cm.finest_delta(sn))
    assert cm.wmdm_constant(sn, gs, cm.sample_pairs(sn, 1000, 1)).value == w.value


def test_reverse_constant_and_theoretical_bound(sq32):
    Q = cm.q_matrix(cm.chain_graph(sq32, cm.finest_delta(sq32)))
    ids = interior_ids(sq32, 0.25)
    pairs = cm.sample_pairs(sq32, 1500, 0, ids=ids)
    rev = cm.reverse_constant(sq32, Q, pairs)
    assert 0.9 <= rev.C_S <= 1.6
    ledger = cm.ConstantLedger(1.054, 5.0, 1.287, rev.C_S)
    assert ledger.ell == 1
    assert ledger.C_S_bound == pytest.approx(16 * 1.054 * 5.0 ** 44)
    assert ledger.C_2 == pytest.approx(4 * 1.054 * 5.0 ** 43)
    assert ledger.C_S_bound >= rev.C_S
    assert cm.ell_of(1.0) == 0 and cm.ell_of(2.0) == 1 and cm.ell_of(2.1) == 2


def test_q_space_flattens_snowflake():
    sp = M.square(32)
    for s in (sp, sp.snowflake(0.5)):
        qs = cm.q_space(s)
        ids = interior_ids(sp, 0.2)
        D = sp.dist_matrix[np.ix_(ids, ids)]
        Qm = qs.dist_matrix[np.ix_(ids, ids)]
        far = D > 3 * sp.pitch
        ratio = Qm[far] / D[far] / LENS_C
        assert ratio.min() >= 0.9 and ratio.max() <= 1.1


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(0, 143), st.integers(0, 143))
def test_measure_scaling_covariance(sigma, x, y):
    sp = M.square(12)
    scaled = sp.with_weights(sp.weights * sigma ** 2)
    d = 3 * sp.pitch
    a, b = cm.chain_graph(sp, d), cm.chain_graph(scaled, d)
    assert cm.q_delta(b, x, y) == pytest.approx(sigma * cm.q_delta(a, x, y), rel=1e-12, abs=1e-15)
    if x != y:
        pairs = np.array([[min(x, y), max(x, y)]])
        assert cm.wmdm_constant(scaled, b, pairs).value == pytest.approx(
            cm.wmdm_constant(sp, a, pairs).value, rel=1e-12)


def test_delta_monotonicity(sq16):
    h = sq16.pitch
    Qs = [cm.q_matrix(cm.chain_graph(sq16, k * h)) for k in (8, 6, 4, 3, 2)]
    for a, b in zip(Qs, Qs[1:]):
        assert np.all(b >= a * (1 - 1e-12))


def test_q_is_metric(sq16, rng):
    Q = cm.q_matrix(cm.chain_graph(sq16, 2 * sq16.pitch))
    assert np.array_equal(Q, Q.T) and np.all(np.diag(Q) == 0)
    assert np.all(Q + np.eye(sq16.n) > 0)
    for _ in range(200):
        a, b, c = rng.integers(0, sq16.n, 3)
        assert Q[a, c] <= Q[a, b] + Q[b, c] + 1e-12
