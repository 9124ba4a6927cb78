import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from skinlab.surface import (SurfaceError, check_connectivity, dist_to_sigma, generate_catenoid,
                             generate_hyperplane, generate_lawson_cone, generate_link,
                             geodesic_distance, lawson_kappa, lawson_parametrization,
                             scale_surface, second_fundamental_oracle, sphere_parametrization)


def _ray(H, link_index=0):
    m = H.params["angular_res"]
    return np.arange(link_index, H.n_vertices, m * m)


def test_cone_kappa_and_profile(small_cone):
    H = small_cone
    k = oracles.lawson_kappa(3, 3)
    assert H.params["kappa"] == pytest.approx(k, rel=1e-6)
    prof = H.a_norm * H.radius
    assert np.max(np.abs(prof - k)) / k <= 0.02
    assert H.dim == 7 and H.vertices.shape[1] == 8
    assert np.all(H.sigma_offset == 0.05)
    assert np.allclose(H.radius[H.sigma_idx], 0.05)
    assert np.allclose(H.radius[H.outer_boundary], 4.0)


@pytest.mark.parametrize("p,q", [(1, 5), (2, 4), (2, 2)])
def test_other_cones_kappa(p, q):
    H = generate_lawson_cone(p, q, 0.05, 4.0, 6, 11)
    k = oracles.lawson_kappa(p, q)
    assert H.params["kappa"] == pytest.approx(k, rel=1e-6)
    assert np.ptp(H.a_norm * H.radius) <= 1e-12 * k


def test_oracle_sphere_plane_and_cone_radii():
    assert second_fundamental_oracle(sphere_parametrization(2, 2.0), (0.7, 0.4)) == \
        pytest.approx(oracles.sphere_a_norm(2, 2.0), rel=1e-5)
    assert second_fundamental_oracle(sphere_parametrization(3, 0.5), (0.7, 1.1, 0.4)) == \
        pytest.approx(oracles.sphere_a_norm(3, 0.5), rel=1e-5)
    plane = lambda u: np.array([u[0], u[1], 0.0])  # noqa: E731
    assert second_fundamental_oracle(plane, (0.2, 0.3)) == 0.0
    f = lawson_parametrization(3, 3)
    u = np.array([1.0, 0.9, 0.9, 0.9, 1.1, 1.1, 1.1])
    at = []
    for r in (0.5, 2.0):
        v = u.copy()
        v[0] = r
        at.append(second_fundamental_oracle(f, v) * r)
    assert at[0] == pytest.approx(at[1], rel=1e-5)
    assert at[0] == pytest.approx(np.sqrt(6), rel=1e-5)
    assert lawson_kappa(3, 3) == pytest.approx(np.sqrt(6), rel=1e-6)


def test_generator_errors():
    with pytest.raises(SurfaceError):
        generate_lawson_cone(3, 3, 0.05, 4.0, 2, 11)
    with pytest.raises(SurfaceError):
        generate_lawson_cone(3, 3, 4.0, 0.05, 6, 11)
    with pytest.raises(SurfaceError):
        generate_lawson_cone(0, 3)
    with pytest.raises(SurfaceError):
        generate_link(3, 3, 2)
    with pytest.raises(SurfaceError):
        generate_hyperplane(1.0, 2)
    with pytest.raises(SurfaceError):
        scale_surface(generate_hyperplane(1.0, 5), 0.0)
    with pytest.raises(SurfaceError):
        scale_surface(generate_hyperplane(1.0, 5), -1.0)


def test_link(link, small_cone):
    k = oracles.lawson_kappa(3, 3)
    assert np.allclose(link.a_norm, link.a_norm[0])
    assert link.a_norm[0] == pytest.approx(k, rel=1e-6)
    assert not link.is_singular
    # the flat torus S^1(a) x S^1(b) with a^2 + b^2 = 1 has diameter pi
    diam = geodesic_distance(link, [0]).values.max()
    assert np.pi * 0.99 <= diam <= 2 * np.pi
    # cone at r = 1 restricted to the ring nearest r = 1, rescaled
    H = generate_lawson_cone(3, 3, 0.5, 2.0, 16, 3)
    ring = np.flatnonzero(np.isclose(H.radius, 1.0))
    assert ring.size == 256
    assert np.allclose(H.a_norm[ring], link.a_norm)


def test_hyperplane(plane):
    assert np.all(plane.a_norm == 0)
    assert not plane.is_singular
    assert check_connectivity(plane)[0]
    d = geodesic_distance(plane, [0]).values
    far = plane.n_vertices - 1
    # 8-neighbour grid: the diagonal is exact
    assert d[far] == pytest.approx(np.sqrt(2), rel=1e-12)
    assert np.all(np.isinf(dist_to_sigma(plane).values))


def test_catenoid(catenoid):
    H = catenoid
    v = H.vertices[:, 2]
    assert H.a_norm.argmax() in np.flatnonzero(np.isclose(v, 0.0))
    assert np.allclose(H.a_norm, oracles.catenoid_a_norm(v), rtol=1e-5)
    assert H.a_norm[np.isclose(np.abs(v), 1.5)].max() < 0.2 * H.a_norm.max()
    assert not H.is_singular
    assert H.sigma_idx.size == 0


def test_scaling(small_cone):
    H = small_cone
    G = scale_surface(H, 2.0)
    assert np.allclose(G.a_norm, H.a_norm / 2, rtol=0, atol=0)
    assert np.array_equal(G.lengths, H.lengths * 2)
    assert scale_surface(H, 1.0) is H
    back = scale_surface(G, 0.5)
    assert np.max(np.abs(back.lengths - H.lengths)) <= 1e-12
    assert np.max(np.abs(back.a_norm - H.a_norm) / H.a_norm) <= 1e-12
    assert back.scale == 1.0
    # self-similarity: a regenerated cone at doubled radii has the same a_norm * r profile
    R = generate_lawson_cone(3, 3, 0.1, 8.0, 8, 21)
    assert np.max(np.abs(R.a_norm * R.radius - G.a_norm * G.radius)) <= 1e-12


def test_geodesic_distance_examples(small_cone):
    H = small_cone
    assert geodesic_distance(H, [5]).values[5] == 0
    (i, j), L = H.edges[0], H.lengths[0]
    assert geodesic_distance(H, [i]).values[j] == L
    ray = _ray(H, 3)
    d = geodesic_distance(H, [ray[2]]).values
    want = H.radius[ray[-1]] - H.radius[ray[2]]
    assert d[ray[-1]] == pytest.approx(want, rel=1e-10)
    with pytest.raises(SurfaceError):
        geodesic_distance(H, [])
    with pytest.raises(SurfaceError):
        geodesic_distance(H, [H.n_vertices])


def test_dist_to_sigma(small_cone):
    H = small_cone
    d = dist_to_sigma(H).values
    assert np.array_equal(d[H.sigma_idx], H.sigma_offset)
    assert np.max(np.abs(d - H.radius) / H.radius) <= 0.02
    ok = np.abs(d[H.edges[:, 0]] - d[H.edges[:, 1]]) <= H.lengths * (1 + 1e-12)
    assert ok.all()


def test_connectivity(small_cone):
    H = small_cone
    assert check_connectivity(H)[0]
    assert check_connectivity(H, H.sigma_idx)[0]
    m = H.params["angular_res"]
    ring = np.arange(5 * m * m, 6 * m * m)
    ok, sizes = check_connectivity(H, ring)
    assert not ok and len(sizes) == 2
    assert sum(sizes) == H.n_vertices - ring.size


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 1343), min_size=3, max_size=3))
def test_triangle_inequality(small_cone, tri):
    H = small_cone
    a, b, c = tri
    da = geodesic_distance(H, [a]).values
    db = geodesic_distance(H, [b]).values
    assert da[c] <= da[b] + db[c]
    assert da[b] == db[a]


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 100.0))
def test_dist_to_sigma_scales(small_cone, lam):
    H = small_cone
    d = dist_to_sigma(H).values
    dg = dist_to_sigma(scale_surface(H, lam)).values
    assert np.max(np.abs(dg - lam * d) / (lam * d)) <= 1e-12
