import math

import networkx as nx
import numpy as np
import pytest

from conftest import LENS_C, interior_ids
from wmdm import chain_metric as cm
from wmdm import mmspace as M
from wmdm import regularity as R


def test_two_point_doubling():
    sp = M.build_space([[0, 0], [1, 0]], weights=[1, 1])
    rep = R.doubling_constant(sp, [(0, 1.5)])
    assert rep.C_D == 1.0


def test_interior_doubling_near_four():
    sp = M.square(64)
    h = sp.pitch
    sample = [(int(c), r) for c in interior_ids(sp, 0.3)[::37] for r in (4 * h, 6 * h, 8 * h)]
    rep = R.doubling_constant(sp, sample)
    assert rep.C_D == pytest.approx(4.0, rel=0.15)
    c, r = rep.worst_case["C_D"]
    again = M.ball(sp, c, 2 * r).mass / M.ball(sp, c, r).mass
    assert again == pytest.approx(rep.C_D, rel=1e-12)


def test_weight_density_raises_doubling(sq32):
    w = M.weighted(sq32, M.DENSITIES["radial2"])
    sample = R.dyadic_sample(sq32, max_centers=64)
    assert R.doubling_constant(w, sample).C_D > R.doubling_constant(sq32, sample).C_D


def test_doubite_exponents():
    sp = M.square(64)
    h = sp.pitch
    ids = interior_ids(sp, 0.3)[::37]
    sample = [(int(c), r, Rr) for c in ids for r in (2 * h, 4 * h) for Rr in (8 * h, 16 * h)]
    fit = R.doubite_check(sp, 5.0, sample)
    assert fit.upper_exponent == pytest.approx(2.0, rel=0.1) and fit.passed
    assert fit.alpha_bound == pytest.approx(math.log2(5.0))
    sn = sp.snowflake(0.5)
    fit = R.doubite_check(sn, 21.0, [(c, math.sqrt(r), math.sqrt(Rr)) for c, r, Rr in sample])
    assert fit.upper_exponent == pytest.approx(4.0, rel=0.1)
    single = R.doubite_check(sp, 5.0, [(int(ids[0]), 4 * h, 4 * h)])
    assert single.C >= 1.0


def slit_annulus(n=40):
    """Annulus 1 <= |p| <= 2 with the sector |angle| < 0.15 removed."""
    sp = M.annulus(1, 2, n)
    ang = np.arctan2(sp.coords[:, 1], sp.coords[:, 0])
    keep = np.abs(ang) > 0.15
    return M.build_space(sp.coords[keep], weights=sp.weights[keep], pitch=sp.pitch)


def brute_lam(space, x, r, inner, lams):
    """Least ``lam`` on the grid ``lams`` passing one LLC condition at ``(x, r)``."""
    eps = 2.0 * space.pitch * (1 + 1e-9)
    d = space.dist_from(x)
    G = nx.Graph()
    P = space.coords
    for i in range(space.n):
        G.add_node(i)
    D = np.hypot(P[:, None, 0] - P[None, :, 0], P[:, None, 1] - P[None, :, 1])
    ii, jj = np.nonzero(np.triu(D <= eps, 1))
    G.add_edges_from(zip(ii.tolist(), jj.tolist()))
    marked = np.flatnonzero(d < r) if inner else np.flatnonzero(d >= r)
    for lam in lams:
        keep = np.flatnonzero(d <= lam * r) if inner else np.flatnonzero(d >= r / lam)
        H = G.subgraph(keep.tolist())
        comp = {v: k for k, cc in enumerate(nx.connected_components(H)) for v in cc}
        if len({comp[v] for v in marked.tolist()}) <= 1:
            return lam
    return math.inf


def test_llc_detour_matches_brute_force():
    sp = slit_annulus()
    P = sp.coords
    x = int(np.argmin(np.hypot(P[:, 0] - 1.5, P[:, 1] - 0.35)))
    r = 0.8
    res = R.llc_check(sp, samples=[(x, r)])
    lams = np.arange(1.0, 6.0, 0.01)
    ref = brute_lam(sp, x, r, True, lams)
    assert res.lam_inner > 1.5
    assert ref - 0.01 <= res.lam_inner <= ref + 1e-9
    assert R.llc_passes(sp, res.lam, [(x, r)])
    assert not R.llc_passes(sp, res.lam_inner * 0.95, [(x, r)])


def test_llc_square_and_annulus():
    res = R.llc_check(M.square(32))
    assert res.lam_inner == pytest.approx(1.0, abs=2 / 32)
    assert res.lam >= 1.0
    # round annulus: arcs towards the centre's angle only get closer, so (i) needs no detour
    ann = R.llc_check(M.annulus(1, 2, 32))
    assert ann.lam_inner == pytest.approx(1.0, abs=0.05)
    vac = R.llc_check(M.square(16), samples=[(0, 10.0)])
    assert vac.lam_outer == 1.0


def test_llc_monotone():
    sp = slit_annulus(24)
    samples = R.dyadic_sample(sp, max_centers=12)
    lam = R.llc_check(sp, samples=samples).lam
    for l2 in (lam, lam * 1.1, lam * 2):
        assert R.llc_passes(sp, l2, samples)


def test_c_x():
    cd = M.circle_domain_space([((-0.25, 0), 0.1), ((0.25, 0), 0.1)], 64, outer=((0, 0), 1.0))
    assert R.c_x_constant(cd, ["A1", "A2"]) == pytest.approx(2 / 0.3, rel=0.03)
    two = M.build_space([[0, 0], [1, 0]], weights=[1, 1], boundary={"A": [0], "B": [1]})
    assert R.c_x_constant(two) == 1.0
    one = M.build_space([[0, 0], [1, 0]], weights=[1, 1], boundary={"A": [0]})
    with pytest.raises(R.UndefinedConstant):
        R.c_x_constant(one)


def test_hausdorff_content_square():
    sp = M.square(64)
    q = cm.q_space(sp)
    D = q.dist_matrix
    res = float(np.min(D + np.eye(sp.n) * 9, axis=1).max())
    vals = [R.hausdorff2_content(q, np.arange(sp.n), k * res).content for k in (16, 8, 4)]
    assert vals[-1] == pytest.approx(LENS_C ** 2, rel=0.2)
    assert vals[0] >= vals[1] * 0.99 and vals[1] >= vals[2] * 0.99
    single = R.hausdorff2_content(q, [100], 4 * res)
    assert single.content <= math.pi * (4 * res) ** 2
    with pytest.raises(R.UnresolvableScale):
        R.hausdorff2_content(q, np.arange(sp.n), 0.5 * res)


def test_hausdorff_snowflake_comparable():
    sp = M.square(32)
    q = cm.q_space(sp.snowflake(0.5))
    res = float(np.min(q.dist_matrix + np.eye(sp.n) * 9, axis=1).max())
    c = R.hausdorff2_content(q, np.arange(sp.n), 4 * res).content
    C_W, C_S, C_D = 1.054, 2.73, 21.0
    assert c / (2 * math.pi * C_S ** 2 * C_D ** 4) <= sp.total_mass <= C_W ** 2 * c / math.pi


@pytest.fixture(scope="module")
def square_q():
    sp = M.square(24)
    Q = cm.q_matrix(cm.chain_graph(sp, cm.finest_delta(sp)))
    pairs = cm.sample_pairs(sp, 2000, 0)
    C_W = cm.wmdm_constant(sp, Q, pairs).value
    rev = cm.reverse_constant(sp, Q, pairs)
    C_D = R.doubling_constant(sp).C_D
    return sp, Q, {"C_W": C_W, "C_S": rev.C_S, "C_D": C_D}, rev.r_x


def test_ball_comparison_passes_with_measured(square_q):
    sp, Q, C, r_x = square_q
    reps = R.ball_comparison_check(sp, Q, C, r_x=r_x)
    names = {r.inequality for r in reps}
    assert {"clash", "clash2", "nort_lower", "nort_upper", "nort2"} <= names
    assert all(r.status == "pass" and r.margin > 0 for r in reps)


def test_ball_comparison_forced_violation(square_q):
    sp, Q, C, r_x = square_q
    half = {k: v / 2 for k, v in C.items()}
    reps = R.ball_comparison_check(sp, Q, half, r_x=r_x)
    bad = [r for r in reps if r.status == "fail"]
    assert bad and all(r.witness is not None for r in bad)


def test_ball_comparison_scale_covariant(square_q):
    sp, Q, C, r_x = square_q
    sigma = 3.0
    a = R.ball_comparison_check(sp, Q, C, r_x=r_x)
    b = R.ball_comparison_check(sp.with_weights(sp.weights * sigma ** 2), Q * sigma, C,
                                r_x={k: v for k, v in r_x.items()})
    assert [r.status for r in a] == [r.status for r in b]
    for ra, rb in zip(a, b):
        assert ra.margin == pytest.approx(rb.margin, abs=1e-9)


def test_report_json_schema(square_q):
    import jsonschema

    from wmdm.reports import schema

    sp, Q, C, r_x = square_q
    for r in R.ball_comparison_check(sp, Q, C, r_x=r_x):
        jsonschema.validate(r.to_json(), schema())
