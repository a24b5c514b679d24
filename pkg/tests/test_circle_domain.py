import json
import math
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from scipy.spatial import cKDTree

from wmdm import circle_domain as cd

ONES = {"C_W": 1.0, "C_D": 1.0, "C_X": 1.0}


def test_relative_distance_examples():
    dom = cd.CircleDomain((((0, 0), 1), ((4, 0), 1)))
    assert cd.relative_distance(dom, 0, 1) == 2
    dom = cd.CircleDomain((((0, 0), 1), ((6, 0), 3)))
    assert cd.relative_distance(dom, 0, 1) == 2
    with pytest.raises(cd.DomainError):
        cd.relative_distance(dom, 1, 1)
    with pytest.raises(cd.DomainError) as e:
        cd.CircleDomain((((0, 0), 1), ((2, 0), 1)))
    assert e.value.index == (0, 1)
    loose = cd.CircleDomain((((0, 0), 1), ((2, 0), 1)), strict=False)
    assert loose.tangencies() == [(0, 1)]
    with pytest.raises(cd.DomainError):
        cd.CircleDomain((((0, 0), 0),))
    with pytest.raises(cd.DomainError):
        cd.CircleDomain((((0, 0), 1),), outer=((0.5, 0), 1.2))


def test_alpha_and_beta():
    a = cd.alpha_constant(1, 1, 1, 2)
    assert a == pytest.approx(2 ** (-6 - math.pi ** 2 / (8 * math.log(2))), rel=1e-14)
    assert a == pytest.approx(4.5502e-3, rel=1e-4)
    assert cd.alpha_constant(1, 2, 1, 2) < a
    assert cd.alpha_constant(1, 1, 1, 3) == pytest.approx(a / 4, rel=1e-14)
    assert cd.beta_constant(1.0, 1) == pytest.approx(1 / (20 * math.pi), rel=1e-15)
    b = cd.beta_constant(a, 2)
    assert b == pytest.approx(a * a / (2 * math.pi * 400), rel=1e-14)
    assert b == pytest.approx(8.238e-9, rel=1e-3)
    assert b < cd.harakka_bound(a, 2)
    with pytest.raises(cd.DomainError):
        cd.beta_constant(0.0, 1)
    # base-2 logarithm in the exponent, as an alternative reading
    assert cd.log2_alpha(1, 1, 1, 2, log_base=2) == pytest.approx(-6 - math.pi ** 2 / 8)


def test_free_radii_exact():
    iso = cd.CircleDomain((((0, 0), 1),))
    fr = cd.free_radii(iso, 0, Fraction(1, 2))
    assert fr.intervals == [(1, Fraction(3, 2))] and fr.measure == Fraction(1, 2)
    dom = cd.CircleDomain((((0, 0), 1), ((Fraction(13, 10), 0), Fraction(1, 10))))
    fr = cd.free_radii(dom, 0, 1)
    assert fr.intervals == [(1, Fraction(6, 5)), (Fraction(7, 5), 2)]
    assert fr.measure == Fraction(4, 5)
    assert Fraction(11, 10) in fr and Fraction(13, 10) not in fr
    # outer disk removes a tail
    out = cd.CircleDomain((((0, 0), 1),), outer=((0, 0), Fraction(3, 2)))
    assert cd.free_radii(out, 0, 1).measure == Fraction(1, 2)


def circle_hits_disk(c, r, d):
    e = float(np.hypot(*(np.asarray(c, float) - d.zf)))
    return abs(e - r) <= float(d.r)


def test_free_radii_membership_matches_geometry(rng):
    dom = cd.random_domain(rng, 4)
    for i in range(4):
        fr = cd.free_radii(dom, i, 1.0)
        di = dom.disks[i]
        for t in np.linspace(1.001, 1.999, 300):
            hit = any(circle_hits_disk(di.zf, t * float(di.r), d) for j, d in enumerate(dom.disks) if j != i)
            assert (t in fr) == (not hit)


@pytest.mark.parametrize("alpha", [0.05, 0.2, 0.5, 1.0])
def test_harakka_on_generated(alpha, rng):
    for _ in range(5):
        dom = cd.random_domain(rng, 3, gap=0.3)
        reps = cd.harakka_check(dom, alpha)
        if reps[0].status == "skipped":
            deltas = [float(cd.relative_distance(dom, i, j)) for i in range(3) for j in range(i + 1, 3)]
            assert min(deltas) < alpha
            continue
        assert all(r.status == "pass" for r in reps)


def u(th):
    return np.array([math.cos(th), math.sin(th)])


def radial(th, lo=0.9, hi=1.1):
    return np.array([lo * u(th), hi * u(th)])


def test_connector_single_circle():
    dom = cd.CircleDomain(())
    p = cd.connector_path(dom, [1.2], (0, 0), 1.0, 1.2 * radial(-2 * math.pi / 3), 1.2 * radial(-math.pi / 3))
    assert len(p.arcs) == 1 and p.injective
    assert p.length == pytest.approx(1.2 * math.pi / 3, rel=1e-12)


def arrangement_oracle(dom, circles, E1, E2, k=4000, eps=2e-3):
    """Dense sampling of the circles; nearby samples on different circles are joined."""
    G = nx.Graph()
    pts = []
    for c, r in circles:
        a = 2 * np.pi * np.arange(k) / k
        P = np.column_stack([c[0] + r * np.cos(a), c[1] + r * np.sin(a)])
        ok = dom.contains(P)
        base = len(pts)
        pts.extend(P)
        for i in range(k):
            j = (i + 1) % k
            if ok[i] and ok[j]:
                G.add_edge(base + i, base + j, w=float(np.hypot(*(P[i] - P[j]))))
    pts = np.array(pts)
    for i, j in cKDTree(pts).query_pairs(eps):
        if i in G and j in G:
            G.add_edge(i, j, w=float(np.hypot(*(pts[i] - pts[j]))))
    for name, E in (("s", E1), ("t", E2)):
        for i in np.flatnonzero(cd._polyline_dist(E, pts) < eps):
            if i in G:
                G.add_edge(name, int(i), w=0.0)
    return nx.dijkstra_path_length(G, "s", "t", weight="w")


def test_connector_detours_around_disk():
    dom = cd.CircleDomain((((0.0, -1.0), 0.3),))
    E1, E2 = radial(-2 * math.pi / 3), radial(-math.pi / 3)
    p = cd.connector_path(dom, [1.0, 1.3], (0, 0), 1.0, E1, E2)
    assert p.injective and len(p.arcs) >= 3
    ref = arrangement_oracle(dom, [(np.zeros(2), 1.0), (np.array([0, -1.0]), 0.39)], E1, E2)
    assert p.length == pytest.approx(ref, rel=0.01)
    assert p.length < 4 * math.pi / 3
    assert np.all(dom.contains(p.polyline()))


def test_connector_preconditions():
    dom = cd.CircleDomain((((0.0, -1.0), 0.3),))
    E1, E2 = radial(-2 * math.pi / 3), radial(-math.pi / 3)
    with pytest.raises(cd.PreconditionError):
        cd.connector_path(dom, [2.0, 1.3], (0, 0), 1.0, E1, E2)
    with pytest.raises(cd.PreconditionError):
        cd.connector_path(dom, [1.0], (0, 0), 1.0, E1, E2)
    with pytest.raises(cd.PreconditionError):
        cd.connector_path(dom, [1.0, 1.3], (0, 0), 1.0, E1 + 5, E2)


def test_connectors_on_random_domains():
    rng = np.random.default_rng(7)
    found = 0
    for _ in range(5):
        dom = cd.random_domain(rng, 3)
        for _ in range(8):
            E1, E2 = cd.random_continua(dom, rng)
            zr = cd.find_center(E1, E2)
            if zr is None:
                continue
            T = cd.random_T(dom, 0.3, rng)
            try:
                p = cd.connector_path(dom, T, zr[0], zr[1], E1, E2)
            except cd.PreconditionError:
                continue
            assert p.injective and np.all(dom.contains(p.polyline()))
            found += 1
    assert found >= 10


def test_find_center_circles_meet_both():
    E1 = np.array([[-0.5, -0.1], [0.5, -0.1]])
    E2 = np.array([[-0.5, 0.1], [0.5, 0.1]])
    z0, r0 = cd.find_center(E1, E2)
    for t in np.linspace(1, math.sqrt(3), 7):
        for E in (E1, E2):
            D = cd._densify(E, 1e-3)
            rad = np.hypot(*(D - z0).T)
            assert rad.min() <= t * r0 * (1 + 1e-9) and rad.max() >= t * r0 * (1 - 1e-9)


def test_key_estimate_parallel_segments():
    dom = cd.CircleDomain(())
    E1 = np.array([[-0.5, -0.1], [0.5, -0.1]])
    E2 = np.array([[-0.5, 0.1], [0.5, 0.1]])
    rep = cd.key_estimate_check(dom, E1, E2, ONES)
    assert rep.status == "pass" and rep.lhs == pytest.approx(1 / (8 * math.pi))
    # the straight segments between them alone carry modulus 1 / 0.2
    sp = dom.space(48)
    h = sp.pitch
    from wmdm.modulus import PathFamily, domain_graph, modulus_solve

    fam = PathFamily(cd._node_set(sp, E1, h), cd._node_set(sp, E2, h))
    assert modulus_solve(domain_graph(sp), fam).value >= 0.9 * 5


def test_key_estimate_two_disks_and_fars_gate():
    dom = cd.CircleDomain((((-0.6, 0.5), 0.2), ((0.6, 0.5), 0.2)))
    E1 = np.array([[-0.4, -0.2], [0.4, -0.2]])
    E2 = np.array([[-0.4, 0.1], [0.4, 0.1]])
    rep = cd.key_estimate_check(dom, E1, E2, {"C_W": 1.05, "C_D": 4.0, "C_X": 4.0})
    assert rep.status == "pass" and rep.margin > 0
    short = np.array([[0.0, 0.1], [0.05, 0.1]])
    assert cd.key_estimate_check(dom, E1, short, ONES).status == "skipped"
    with pytest.raises(cd.PreconditionError):
        cd.key_estimate_check(dom, E1, np.array([[-0.6, 0.5], [0, 0.5]]), ONES)


def test_separation_far_disks():
    dom = cd.CircleDomain((((-0.5, 0), 0.1), ((0.5, 0), 0.1)), outer=((0, 0), 1.2))
    reps = cd.separation_check(dom, {"C_W": 1.05, "C_D": 4.0, "C_X": 6.0}, n=32)
    assert {r.inequality for r in reps} == {"mollo"}
    assert all(r.status == "pass" for r in reps)


def test_separation_close_disks_contradiction():
    dom = cd.CircleDomain((((-0.3005, 0), 0.3), ((0.3005, 0), 0.3)))
    assert float(cd.relative_distance(dom, 0, 1)) < cd.alpha_constant(1, 1, 1, 2)
    reps = {r.inequality: r for r in cd.separation_check(dom, ONES)}
    assert reps["foro"].status == "pass" and reps["goro"].status == "pass"
    assert reps["counting"].status == "pass"
    # the modulus exceeds the budget, as in the argument by contradiction
    assert reps["mollo"].status == "fail" and reps["mollo"].lhs > reps["mollo"].rhs == math.pi / 2


def ring_modulus(d, r1, r2):
    """Modulus between two disjoint disks in the plane, by inversive distance."""
    return 2 * math.pi / math.acosh(abs(d * d - r1 * r1 - r2 * r2) / (2 * r1 * r2))


def test_pair_modulus_mobius():
    # disk inside the outer circle: a ring domain, M = 2
    dom = cd.CircleDomain((((0.3, 0), 0.3),), outer=((0, 0), 1.0))
    assert dom.M == 2
    ref = ring_modulus(0.3, 0.3, 1.0)
    assert ref == pytest.approx(2 * math.pi / math.log(3))
    assert cd.pair_modulus(dom, 0, "outer", n=32).value == pytest.approx(ref, rel=0.1)
    # whole plane: the truncated mesh can only lose paths
    two = cd.CircleDomain((((-0.5, 0), 0.3), ((0.5, 0), 0.3)))
    val = cd.pair_modulus(two, 0, 1, n=32).value
    assert 0.75 * ring_modulus(1.0, 0.3, 0.3) <= val <= ring_modulus(1.0, 0.3, 0.3)


def test_similarity_invariance():
    dom = cd.CircleDomain((((Fraction(-1, 2), 0), Fraction(1, 5)), ((Fraction(1, 2), 0), Fraction(1, 10))),
                          outer=((0, 0), 1))
    big = dom.scaled(3, shift=(1, -2))
    assert cd.relative_distance(dom, 0, 1) == cd.relative_distance(big, 0, 1)
    assert cd.free_radii(dom, 0, 1).intervals == cd.free_radii(big, 0, 1).intervals
    assert [r.status for r in cd.harakka_check(dom, 0.2)] == [r.status for r in cd.harakka_check(big, 0.2)]
    a = cd.pair_modulus(dom, 0, 1, n=24).value
    b = cd.pair_modulus(big, 0, 1, n=24).value
    assert a == pytest.approx(b, rel=1e-9)


def test_domain_json_roundtrip():
    dom = cd.CircleDomain((((-0.5, 0), 0.2), ((0.5, 0.1), 0.1)), outer=((0, 0), 1.0))
    back = cd.CircleDomain.from_json(json.loads(json.dumps(dom.to_json())))
    assert back.to_json() == dom.to_json() and back.M == 3
    with pytest.raises(cd.DomainError):
        cd.CircleDomain.from_json({"disks": [{"z": [0, 0]}]})
