import itertools
import math

import numpy as np
import pytest

from wmdm import chain_metric as cm
from wmdm import mmspace as M
from wmdm import qs_check as Q
from wmdm.mmspace import SpaceError
from wmdm.regularity import UndefinedConstant


def brute_weak_qs(fmap, gate):
    """Triple loop over every ordered triple of distinct points."""
    Ds, Dt, f = fmap.source.dist_matrix, fmap.target.dist_matrix, fmap.f
    best = -math.inf
    for a, b, c in itertools.permutations(range(fmap.source.n), 3):
        d1, d2 = Ds[a, b], Ds[a, c]
        if d1 <= d2 * (1 + 1e-12) and (gate is None or d2 <= gate * (1 + 1e-12)):
            best = max(best, Dt[f[a], f[b]] / Dt[f[a], f[c]])
    return best


def relabel(space, perm):
    return M.build_space(space.coords[perm], weights=space.weights[perm], pitch=space.pitch)


@pytest.mark.parametrize("gate", [None, 0.5, 0.25])
def test_weak_qs_matches_brute_force(gate, rng):
    sp = M.build_space(rng.uniform(0, 1, (14, 2)))
    tgt = M.build_space(rng.uniform(0, 1, (14, 2)))
    fmap = Q.DiscreteMap(sp, tgt, rng.permutation(14))
    rep = Q.weak_qs_constant(fmap, gate=gate)
    ref = brute_weak_qs(fmap, gate)
    assert rep.raw_max == pytest.approx(ref, rel=1e-12)
    y0, y1, y2 = rep.witness
    Dt = tgt.dist_matrix
    assert Dt[fmap.f[y0], fmap.f[y1]] / Dt[fmap.f[y0], fmap.f[y2]] == pytest.approx(ref, rel=1e-12)


def test_weak_qs_ties_on_grid():
    sp = M.square(8)
    tgt = M.build_space(sp.coords ** 1.5)
    fmap = Q.DiscreteMap.identity(sp, tgt)
    assert Q.weak_qs_constant(fmap, gate=0.3).raw_max == pytest.approx(brute_weak_qs(fmap, 0.3), rel=1e-12)


def test_identity_and_similarity():
    sp = M.square(16)
    assert Q.weak_qs_constant(Q.DiscreteMap.identity(sp, sp)).t == 1.0
    for sigma in (0.37, 12.0):
        big = M.build_space(sp.coords * sigma + [3, -1], pitch=sp.pitch * sigma)
        rep = Q.weak_qs_constant(Q.DiscreteMap.identity(sp, big))
        assert rep.raw_max == pytest.approx(1.0, abs=1e-12)
        back = Q.weak_qs_constant(Q.DiscreteMap.identity(big, sp), gate=None)
        assert back.raw_max == pytest.approx(1.0, abs=1e-12)


def dyadic_points(rng, n):
    # on a 2^-10 grid, so the similarities below are exact in floating point
    return rng.integers(0, 1024, (n, 2)) / 1024.0


def test_similarity_invariance_of_general_map():
    rng = np.random.default_rng(60)
    sp = M.build_space(dyadic_points(rng, 30))
    tgt = M.build_space(dyadic_points(rng, 30) ** 2)
    f = rng.permutation(30)
    base = Q.weak_qs_constant(Q.DiscreteMap(sp, tgt, f), gate=None).raw_max
    big_s = M.build_space(sp.coords * 7.0)
    big_t = M.build_space(tgt.coords * (3 / 256) + 5)
    for a, b in ((big_s, tgt), (sp, big_t), (big_s, big_t)):
        assert Q.weak_qs_constant(Q.DiscreteMap(a, b, f), gate=None).raw_max == pytest.approx(base, rel=1e-12)


def test_snowflake_power_law():
    sp = M.square(16)
    sn = sp.snowflake(0.5)
    T = Q.sample_triples(sp.n, 5000, seed=1)
    env = Q.eta_estimate(Q.DiscreteMap.identity(sn, sp), T)
    assert np.allclose(env.observed, env.s ** 2, rtol=1e-12)
    env = Q.eta_estimate(Q.DiscreteMap.identity(sp, sn), T)
    assert np.allclose(env.observed, np.sqrt(env.s), rtol=1e-12)
    # a monotone power map never reverses an admitted pair, so t stays 1
    assert Q.weak_qs_constant(Q.DiscreteMap.identity(sp, sn), gate=0.3).t == 1.0


def test_eta_identity_and_envelope():
    sp = M.square(12)
    env = Q.eta_estimate(Q.DiscreteMap.identity(sp, sp), count=3000)
    assert np.allclose(env.observed, env.s, rtol=1e-12)
    assert np.all(np.diff(env.envelope) >= 0) and np.all(np.diff(env.s) >= 0)
    assert np.all(env.envelope >= env.observed)
    assert float(env(0.5)) <= 0.5 + 1e-12 and float(env(-1.0)) == 0.0
    with pytest.raises(SpaceError):
        Q.eta_estimate(Q.DiscreteMap.identity(sp, sp), [[0, 0, 1]])


def test_stratified_spread():
    sp = M.square(64)
    T = Q.stratified_triples(sp, 20000, seed=0)
    x, y, z = T.T
    s = np.hypot(*(sp.coords[x] - sp.coords[y]).T) / np.hypot(*(sp.coords[x] - sp.coords[z]).T)
    assert np.mean(s < 0.1) > 0.2 and np.mean(s > 0.5) > 0.1


def test_q_deformation_bounded():
    sp = M.square(16)
    sn = sp.snowflake(0.5)
    fmap = Q.DiscreteMap.identity(sn, cm.q_space(sn))
    env = Q.eta_estimate(fmap, count=20000)
    on = env.s <= 1
    C = (env.observed[on] / np.maximum(env.s[on] ** 2, env.s[on] ** 0.5)).max()
    assert C < 10


def test_no_triples():
    sp = M.square(8)
    with pytest.raises(Q.NoTriples):
        Q.weak_qs_constant(Q.DiscreteMap.identity(sp, sp), gate=1e-6)


def test_map_validation():
    sp = M.square(8)
    with pytest.raises(SpaceError):
        Q.DiscreteMap(sp, sp, np.zeros(sp.n, int))
    with pytest.raises(SpaceError):
        Q.DiscreteMap(sp, sp, np.arange(sp.n) + 1)
    with pytest.raises(SpaceError):
        Q.DiscreteMap(sp, sp, np.arange(5))
    perm = np.random.default_rng(0).permutation(sp.n)
    f = Q.DiscreteMap(sp, sp, perm)
    assert np.array_equal(f.compose(f.inverse()).f, np.arange(sp.n))


def test_moebius_and_stereographic(rng):
    m = Q.Moebius.to_standard(1 + 1j, 2 - 1j, -3j)
    assert m(1 + 1j) == pytest.approx(0) and m(2 - 1j) == pytest.approx(1) and np.isinf(m(-3j))
    z = rng.normal(size=5) + 1j * rng.normal(size=5)
    assert np.allclose(m.inverse()(m(z)), z)
    P = rng.normal(size=(20, 2))
    assert np.allclose(Q.stereographic(Q.inverse_stereographic(P)), P)


def test_normalization():
    sp = M.square(12)
    f = Q.DiscreteMap.identity(sp, sp)
    n = Q.normalize_map(f, marked=(0, 11, 143))
    assert n.identity and n.triple == (0, 11, 143) and n.margin > 0
    n = Q.normalize_map(f, marked=(0, 1, 2))
    D = sp.dist_matrix
    before = min(D[0, 1], D[0, 2], D[1, 2])
    assert not n.identity and n.min_image_distance > before and n.margin > 0
    a0, a1, ainf = n.triple
    w = n.source_points
    assert w[a0] == pytest.approx([0, 0], abs=1e-12) and w[a1] == pytest.approx([1, 0], abs=1e-12)
    assert not np.all(np.isfinite(w[ainf]))
    sph = Q.inverse_stereographic(sp.coords)
    m = Q.normalize_map(f, marked=(0, 1, 2), plane=sph)
    assert m.triple == n.triple
    assert np.allclose(m.source_points[np.isfinite(w).all(axis=1)], w[np.isfinite(w).all(axis=1)])


C = {"C_W": 1.05, "C_S": 1.55, "C_D": 5.0}


@pytest.fixture(scope="module")
def sq24q():
    sp = M.square(24)
    c = int(np.argmin(np.hypot(*(sp.coords - 0.5).T)))
    return sp, cm.q_space(sp), c


def test_annulus_bound_k2(sq24q):
    sp, q, c = sq24q
    ab = Q.annulus_density_bound(sp, q, c, 0.05, 0.2, C)
    assert ab.k == 2
    assert ab.bound == pytest.approx(math.pi * 1.05 ** 2 * 1.55 ** 2 * 5.0 ** 6, rel=1e-14)
    assert ab.admissible and ab.shortest >= 1
    assert ab.modulus <= ab.objective <= ab.bound
    assert all(r.status == "pass" for r in ab.reports)


def test_annulus_count_and_bound_scaling(sq24q):
    sp, q, c = sq24q
    ab = Q.annulus_density_bound(sp, q, c, 0.05, 0.4, C, cross_check=False)
    assert ab.k == 3 and ab.admissible
    assert Q.annulus_count(0.05, 0.8) == 4
    assert Q.inaali_bound(4, 1, 1, 1) / Q.inaali_bound(3, 1, 1, 1) == pytest.approx(3 / 4)
    with pytest.raises(UndefinedConstant):
        Q.annulus_count(0.05, 0.15)


def test_final_ratio_bound():
    assert Q.final_ratio_bound(1, 1, 1, 1, 1.0) == pytest.approx(180 * math.pi ** 3, rel=1e-14)
    assert Q.final_ratio_bound(1, 1, 1, 2, 0.25) == pytest.approx(4 * Q.final_ratio_bound(1, 1, 1, 2, 0.5))
    assert Q.log2_final_ratio_bound(1.1, 1.5, 4, 2, -3.0) == pytest.approx(
        math.log2(Q.final_ratio_bound(1.1, 1.5, 4, 2, 0.125)), rel=1e-12)
    assert Q.log2_weak_qs_bound(10, 2.0) == 13


def test_qs_report_json_and_check():
    sp = M.square(12)
    rep, reps = Q.qs_reports(Q.DiscreteMap.identity(sp, sp), t_max=1.5)
    js = rep.to_json()
    assert js["t"] == 1.0 and len(js["eta_samples"]) > 10
    assert reps[0].status == "pass"
    _, reps = Q.qs_reports(Q.DiscreteMap(sp, sp, np.random.default_rng(1).permutation(sp.n)), t_max=1.5)
    assert reps[0].status == "fail"
