from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import csgraph

from conftest import interior
from skinlab.cover import BallCover, build_skin_cover, covering_number_stats
from skinlab.skinfield import (SkinError, SkinField, brute_force_skin_oracle, convex_combine,
                               edge_lipschitz, metric_skin_transform, regularity_scale,
                               restrict_to_link, sublevel_sets, verify_axioms, whitney_smooth)
from skinlab.surface import (DiscreteHypersurface, dist_to_sigma, generate_hyperplane,
                             generate_lawson_cone, generate_link, scale_surface, snap_lengths)


def _direct(H, alpha):
    """max_y min(|A|(y), alpha/d(x, y)) from scipy all-pairs distances (no singular set)."""
    D = csgraph.dijkstra(H.adjacency, directed=False)
    with np.errstate(divide="ignore"):
        return np.max(np.minimum(H.a_norm[None, :], alpha / D), axis=1)


def test_hyperplane_is_zero(plane):
    sk = metric_skin_transform(plane, 1.0)
    assert np.all(sk.values == 0) and np.all(np.isinf(sk.delta))
    assert np.all(brute_force_skin_oracle(plane, 1.0).values == 0)
    assert np.all(np.isinf(regularity_scale(plane).values))
    rep = verify_axioms(plane, sk)
    assert rep.s1_pass and rep.all_pass
    assert any("totally geodesic" in n for n in rep.notes)


def test_alpha_errors(plane):
    for a in (0.0, -1.0, np.inf):
        with pytest.raises(SkinError):
            metric_skin_transform(plane, a)


def test_oracle_cap(ref_cone):
    with pytest.raises(SkinError):
        brute_force_skin_oracle(ref_cone, 1.0)


def test_spike_on_flat_patch():
    P = generate_hyperplane(1.0, 17)
    spike = 8 * 17 + 8
    a = np.zeros(P.n_vertices)
    a[spike] = 50.0
    H = replace(P, a_norm=a)
    d = csgraph.dijkstra(H.adjacency, directed=False, indices=spike)
    for alpha in (0.1, 1.0):
        with np.errstate(divide="ignore"):
            want = np.minimum(50.0, alpha / d)
        want[spike] = 50.0
        got = metric_skin_transform(H, alpha).values
        assert np.allclose(got, want, rtol=1e-13, atol=0)


@settings(max_examples=25, deadline=None)
@given(st.integers(4, 40), st.integers(0, 10 ** 6), st.floats(0.05, 20.0))
def test_random_graphs_match_direct_evaluation(n, seed, alpha):
    rng = np.random.default_rng(seed)
    # a spanning path plus random chords
    e = [(i, i + 1) for i in range(n - 1)]
    e += [tuple(sorted(rng.choice(n, 2, replace=False))) for _ in range(n)]
    e = np.unique(np.array(e), axis=0)
    H = DiscreteHypersurface(kind="loaded", dim=1, vertices=rng.random((n, 2)), edges=e,
                             lengths=rng.uniform(0.1, 2.0, len(e)),
                             a_norm=rng.choice([0.0, 0.5, 1.0, 3.0, 7.0], n),
                             sigma_idx=np.zeros(0, dtype=np.int64), sigma_offset=np.zeros(0),
                             outer_boundary=np.zeros(0, dtype=np.int64), mesh_dim=1)
    got = metric_skin_transform(H, alpha).values
    assert np.allclose(got, _direct(H, alpha), rtol=1e-13, atol=0)
    # raw lengths: path sums round differently in the two sweeps, so agreement is to an ulp
    r, d1 = regularity_scale(H).values, metric_skin_transform(H, 1.0).delta
    fin = np.isfinite(d1)
    assert np.array_equal(fin, np.isfinite(r))
    assert np.all(np.abs(r[fin] - d1[fin]) <= 4 * np.spacing(d1[fin]))
    # dyadic lengths, as every generator produces: exact identity
    G = replace(H, lengths=snap_lengths(H.lengths))
    assert np.array_equal(regularity_scale(G).values, metric_skin_transform(G, 1.0).delta)


def test_oracle_on_small_meshes(small_meshes):
    for H in small_meshes.values():
        f = metric_skin_transform(H, 0.7)
        o = brute_force_skin_oracle(H, 0.7)
        fin = np.isfinite(o.delta)
        assert np.array_equal(np.isfinite(f.delta), fin)
        assert np.allclose(f.delta[fin], o.delta[fin], rtol=1e-12, atol=0)
        assert o.provenance == "oracle" and f.provenance == "exact"


def test_regularity_constant_curvature(link):
    r = regularity_scale(link).values
    assert np.allclose(r, 1 / link.a_norm[0], rtol=1e-15)


def test_dominance_and_fault_injection(small_cone):
    H = small_cone
    sk = metric_skin_transform(H, 1.0)
    assert np.all(sk.values >= H.a_norm)
    rep = verify_axioms(H, sk)
    assert rep.all_pass and rep.s4_lipschitz_constant <= 1.0
    bad = replace(sk, values=0.5 * H.a_norm, delta=2 / H.a_norm, provenance="oracle")
    rep = verify_axioms(H, bad)
    assert not rep.s2_pass and rep.s2_dominance_gap < 0


def test_growth_bound_on_cone(small_cone):
    H = small_cone
    dist = dist_to_sigma(H).values
    for alpha in (0.1, 1.0, 10.0):
        sk = metric_skin_transform(H, alpha)
        assert np.all(sk.values * dist >= alpha * (1 - 1e-12))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 100.0), st.floats(0.01, 100.0))
def test_monotone_in_alpha(small_cone, a, b):
    lo, hi = sorted((a, b))
    assert np.all(metric_skin_transform(small_cone, hi).values
                  >= metric_skin_transform(small_cone, lo).values)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 100.0))
def test_lipschitz_exact(catenoid, alpha):
    sk = metric_skin_transform(catenoid, alpha)
    assert edge_lipschitz(catenoid, sk.delta) <= 1 / alpha


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.1, 10.0))
def test_anticommutes_with_scaling(small_cone, lam, alpha):
    sk = metric_skin_transform(small_cone, alpha).values
    sg = metric_skin_transform(scale_surface(small_cone, lam), alpha).values
    assert np.max(np.abs(sg * lam / sk - 1)) <= 1e-9


def test_naturality_on_matched_cone(small_cone):
    rep = verify_axioms(small_cone, metric_skin_transform(small_cone, 1.0), lam=2.0)
    assert rep.s5_scaling_residual is not None and rep.s5_scaling_residual <= 1e-9


def test_convex_combine(small_cone, plane):
    H = small_cone
    s1, s2 = metric_skin_transform(H, 1.0), metric_skin_transform(H, 3.0)
    assert convex_combine(s1, s2, 1.0, H) is s1
    c = convex_combine(s1, s2, 0.3, H)
    assert c.provenance == "combined(0.3)"
    assert np.allclose(c.values, 0.3 * s1.values + 0.7 * s2.values, rtol=1e-15)
    assert np.all(c.values >= H.a_norm)
    assert c.lipschitz_bound == edge_lipschitz(H, c.delta)
    assert c.info["within_max"] == (c.lipschitz_bound
                                    <= max(s1.lipschitz_bound, s2.lipschitz_bound))
    with pytest.raises(SkinError):
        convex_combine(s1, metric_skin_transform(plane, 1.0), 0.5, H)
    with pytest.raises(SkinError):
        convex_combine(s1, s2, 0.0, H)


def test_restrict_to_link():
    cone = generate_lawson_cone(3, 3, 0.25, 4.0, 8, 41)
    link = generate_link(3, 3, 8)
    sk = metric_skin_transform(cone, 1.0)
    res = restrict_to_link(sk, cone, link)
    assert res.provenance == "restricted" and res.surface_id == link.surface_id
    assert np.all(res.values >= link.a_norm)
    assert np.ptp(res.values) <= 1e-12 * res.values[0]
    rebuilt = metric_skin_transform(link, 1.0).values
    assert np.allclose(res.info["rebuilt_values"], rebuilt)
    assert res.info["max_difference"] > 0.1
    with pytest.raises(SkinError):
        restrict_to_link(sk, cone, generate_link(3, 3, 6))
    with pytest.raises(SkinError):
        restrict_to_link(sk, generate_lawson_cone(3, 3, 0.3, 4.0, 8, 41), link)


def test_whitney_constant_delta(link):
    sk = metric_skin_transform(link, 1.0)
    cover = build_skin_cover(link, sk, 0.3, xi_max=0.5)
    sm = whitney_smooth(link, sk, cover)
    ratio = sm.delta / sk.delta
    nmax = covering_number_stats(link, cover, 2.0)["max"]
    assert 1.0 <= ratio.min() and ratio.max() <= nmax
    assert sm.info["c1"] == ratio.min() and sm.info["c2"] == ratio.max()
    assert sm.provenance == "smoothed"


def test_whitney_cone_and_scaling(small_cone):
    H = small_cone
    sk = metric_skin_transform(H, 1.0)
    cover = build_skin_cover(H, sk, 0.2, xi_max=0.5)
    sm = whitney_smooth(H, sk, cover)
    assert 0 < sm.info["c1"] <= sm.info["c2"] < np.inf
    assert sm.info["gradient_ratio"] <= sm.info["c3"]
    G = scale_surface(H, 2.0)
    skg = metric_skin_transform(G, 1.0)
    cg = replace(cover, theta=cover.theta * 2, surface_id=G.surface_id, skin_id=skg.skin_id)
    smg = whitney_smooth(G, skg, cg)
    m = ~H.excluded_mask
    assert np.max(np.abs(smg.delta[m] / (2 * sm.delta[m]) - 1)) <= 1e-12


def test_whitney_needs_cover(small_cone):
    H = small_cone
    sk = metric_skin_transform(H, 1.0)
    c = BallCover(centers=np.array([700]), theta=np.array([0.01]), xi=0.1,
                  family=np.array([1]), surface_id=H.surface_id, skin_id=sk.skin_id)
    with pytest.raises(SkinError):
        whitney_smooth(H, sk, c)


def test_sublevel_sets(small_cone):
    H = small_cone
    sk = metric_skin_transform(H, 1.0)
    E, I = sublevel_sets(H, sk, sk.delta.max() * 2)
    assert E.size == 0 and I.size == H.n_vertices
    E, I = sublevel_sets(H, sk, sk.delta.min() / 2)
    assert E.size == H.n_vertices and I.size == 0
    a = 0.3
    E, _ = sublevel_sets(H, sk, a)
    want = interior(H) & (H.radius >= (1 + H.params["kappa"]) * a * 1.05)
    got = np.zeros(H.n_vertices, dtype=bool)
    got[E] = True
    assert np.all(got[want])
    with pytest.raises(SkinError):
        sublevel_sets(H, sk, 0.0)


def test_skinfield_is_frozen(small_cone):
    sk = metric_skin_transform(small_cone, 1.0)
    with pytest.raises(Exception):
        sk.alpha = 2.0
    assert isinstance(sk, SkinField)
