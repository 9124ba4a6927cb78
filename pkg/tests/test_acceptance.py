"""Acceptance criteria on the reference cone (3,3), r in [0.05, 4], 16 x 81 grid.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary.  Expected values come from tests/oracles.py or from independent
recomputation with scipy, never from the code under test.
"""
import numpy as np
import pytest
from scipy.sparse import csgraph

import oracles
from conftest import interior, record
from skinlab.cover import (build_skin_cover, covering_number_stats, qt_perturb, verify_cover,
                           verify_qt)
from skinlab.skinfield import (brute_force_skin_oracle, edge_lipschitz, metric_skin_transform,
                               regularity_scale, verify_axioms, whitney_smooth)
from skinlab.spectral import (assemble_forms, dyadic_growth, four_point_delta, hardy_constant,
                              quasi_hyperbolic_distances, rayleigh_quotient,
                              skin_metric_distances)
from skinlab.surface import (check_connectivity, dist_to_sigma, generate_lawson_cone,
                             scale_surface)
from skinlab.uniformity import (DomainError, blow_up_invariance_check, bubbled_hull,
                                build_link_space, singular_endpoint_check, skin_uniform_curve,
                                verify_domain)

ALPHAS = (0.01, 0.1, 1.0, 10.0, 100.0)


def _pairs(H, n, seed=7):
    """n distinct deterministic interior pairs."""
    rng = np.random.default_rng(seed)
    live = np.flatnonzero(interior(H))
    out = set()
    while len(out) < n:
        a, b = (int(v) for v in rng.choice(live, 2, replace=False))
        out.add((min(a, b), max(a, b)))
    return sorted(out)


@pytest.fixture(scope="module")
def cover05(ref_cone, ref_skin):
    return build_skin_cover(ref_cone, ref_skin, 0.05, xi_max=0.5)


@pytest.fixture(scope="module")
def qt05(ref_cone, ref_skin, cover05):
    return qt_perturb(ref_cone, ref_skin, cover05, 0.05)


def test_c01_oracle_equivalence(small_meshes):
    worst = 0.0
    for H in small_meshes.values():
        assert H.n_vertices <= 5000
        for a in (0.3, 1.0, 3.0):
            f = metric_skin_transform(H, a).values
            o = brute_force_skin_oracle(H, a).values
            assert np.array_equal(np.isfinite(f), np.isfinite(o))
            fin = np.isfinite(o)
            if fin.any():
                err = np.abs(f[fin] - o[fin]) / np.where(o[fin] > 0, o[fin], 1.0)
                worst = max(worst, float(err.max()))
    ok = worst <= 1e-12
    record(1, ok, f"max relative deviation {worst:.3g} over {len(small_meshes)} meshes (tol 1e-12)")
    assert ok


def test_c02_regularity_identity(small_meshes, ref_cone, ref_skin):
    meshes = dict(small_meshes, reference=ref_cone)
    res = {}
    for name, H in meshes.items():
        d1 = ref_skin.delta if H is ref_cone else metric_skin_transform(H, 1.0).delta
        res[name] = bool(np.array_equal(regularity_scale(H).values, d1))
    ok = all(res.values())
    record(2, ok, f"bitwise identity on {sum(res.values())}/{len(res)} meshes")
    assert ok


def test_c03_lipschitz(small_meshes, ref_cone):
    meshes = dict(small_meshes, reference=ref_cone)
    worst = 0.0
    ok = True
    for H in meshes.values():
        for a in ALPHAS:
            L = edge_lipschitz(H, metric_skin_transform(H, a).delta)
            ok &= L <= 1.0 / a
            worst = max(worst, L * a)
    record(3, ok, f"max alpha * edge ratio {worst:.17g} (bound 1, exact)")
    assert ok


def test_c04_closed_form(ref_cone, ref_skin):
    kappa = oracles.lawson_kappa(3, 3)
    m = interior(ref_cone)
    want = oracles.cone_skin_value(ref_cone.radius, 1.0, kappa)
    dev = float(np.max(np.abs(ref_skin.values / want - 1)[m]))
    ok = dev <= 0.05
    record(4, ok, f"max |<A>_1 r/(1+kappa) - 1| = {dev:.4g} (tol 0.05)")
    assert ok


def test_c05_interpolation_limits(ref_cone):
    H = ref_cone
    m = interior(H)
    sweep = [metric_skin_transform(H, a).values for a in ALPHAS]
    mono = all(np.all(b >= a) for a, b in zip(sweep, sweep[1:]))
    # |A| and dist to the tip from closed forms
    kappa = oracles.lawson_kappa(3, 3)
    a_true = kappa / H.radius
    small = float(np.max(np.abs(sweep[0] / a_true - 1)[m]))
    dist = dist_to_sigma(H).values
    large = float(np.max(np.abs(sweep[-1] * dist / ALPHAS[-1] - 1)[m]))
    ok = mono and small <= 0.05 and large <= 0.05
    record(5, ok, f"monotone={mono}, alpha=0.01 deviation {small:.4g}, "
                  f"alpha=100 deviation {large:.4g} (tol 0.05)")
    assert ok


def test_c06_scaling(ref_cone, ref_skin):
    worst = 0.0
    ok = True
    for lam in (0.5, 2.0, 8.0):
        rep = verify_axioms(ref_cone, ref_skin, 0.0, 1e-9, lam=lam)
        res = [rep.s2_scaling_residual] + ([rep.s5_scaling_residual]
                                           if rep.s5_scaling_residual is not None else [])
        worst = max([worst] + res)
        ok &= rep.s2_pass and rep.s5_pass
    # direct recomputation on the rescaled mesh
    G = scale_surface(ref_cone, 2.0)
    direct = float(np.max(np.abs(metric_skin_transform(G, 1.0).values * 2.0 / ref_skin.values - 1)))
    worst = max(worst, direct)
    ok &= worst <= 1e-9
    record(6, ok, f"max scaling residual {worst:.3g} over lambda in (1/2, 2, 8) (tol 1e-9)")
    assert ok


def _ball_scan(H, centers, radii, chunk=256):
    """Yield (slot, vertex, distance) rows of closed balls with scipy's Dijkstra."""
    order = np.argsort(radii, kind="stable")
    A = H.adjacency
    for s in range(0, order.size, chunk):
        sl = order[s:s + chunk]
        D = csgraph.dijkstra(A, directed=False, indices=centers[sl], limit=radii[sl].max() * (1 + 1e-12))
        for row, j in zip(D, sl):
            idx = np.flatnonzero(row <= radii[j])
            yield j, idx, row[idx]


def test_c07_cover_invariants(ref_cone, ref_skin, cover05):
    H = ref_cone
    c = cover05
    chk = verify_cover(H, c)
    # independent scan of coverage, center exclusion and 10 Theta disjointness
    covered = H.excluded_mask.copy()
    pos = np.full(H.n_vertices, -1)
    pos[c.centers] = np.arange(c.centers.size)
    excl = fam = 0
    for j, idx, d in _ball_scan(H, c.centers, 20 * c.theta):
        covered[idx[d <= c.theta[j]]] = True
        k = pos[idx]
        hit = (k >= 0) & (k != j)
        k, dk = k[hit], d[hit]
        excl += int(np.sum(dk <= c.theta[j]))
        same = (c.family[k] == c.family[j]) & (dk < 10 * (c.theta[j] + c.theta[k]))
        fam += int(np.sum(same))
    again = build_skin_cover(H, ref_skin, 0.05, xi_max=0.5)
    stable = (np.array_equal(again.centers, c.centers) and np.array_equal(again.family, c.family)
              and again.stats["max"] == c.stats["max"])
    ok = (chk["ok"] and covered.all() and excl == 0 and fam == 0 and stable
          and c.n_families <= 64 and c.stats["max"] <= 64)
    record(7, ok, f"coverage {covered.mean():.0%}, {fam} family overlaps, {excl} exclusion "
                  f"violations, {c.n_families} families, covering max {c.stats['max']}, "
                  f"stable={stable}")
    assert ok


def test_c08_qt(ref_cone, qt05):
    passed, worst, slack, _ = verify_qt(ref_cone, qt05, 0.05)
    chk = verify_cover(ref_cone, qt05)
    ok = qt05.qt_margin >= 0.02 and passed and slack >= 0.02 and chk["ok"]
    record(8, ok, f"qt margin {qt05.qt_margin:.4g}, min pair slack {slack:.4g}, "
                  f"{qt05.stats['moved']} centers moved, cover still valid={chk['ok']}")
    assert ok


def test_c09_whitney(ref_cone, ref_skin):
    H = ref_cone
    cover = build_skin_cover(H, ref_skin, 0.2, xi_max=0.5)
    sm = whitney_smooth(H, ref_skin, cover)
    i = sm.info
    m = ~H.excluded_mask
    ratio = sm.delta[m] / ref_skin.delta[m]
    sandwich = bool(ratio.min() >= i["c1"] * (1 - 1e-12) and ratio.max() <= i["c2"] * (1 + 1e-12))
    grad = edge_lipschitz(H, sm.delta)
    # every bump lives on a doubled ball, so the multiplicity at rho = 2 bounds the sum
    nmax = covering_number_stats(H, cover, 2.0)["max"]
    ok = (0 < i["c1"] <= i["c2"] < np.inf and i["c2"] / i["c1"] <= nmax
          and sandwich and grad <= i["c3"])
    record(9, ok, f"c1={i['c1']:.5g} c2={i['c2']:.5g} ratio {i['c2'] / i['c1']:.4g} <= covering "
                  f"max {nmax} (rho 2); gradient {grad:.4g} <= c3={i['c3']:.4g}")
    assert ok


def test_c10_hardy(ref_cone, ref_skin):
    H = ref_cone
    bands = (0.0, 0.05, 0.1, 0.2)
    reps = [hardy_constant(assemble_forms(H, ref_skin, b)) for b in bands]
    lam = [r.lambda_min for r in reps]
    mono = all(y >= x * (1 - 1e-9) for x, y in zip(lam, lam[1:]))
    G = scale_surface(H, 2.0)
    rq = rayleigh_quotient(assemble_forms(G, metric_skin_transform(G, 1.0)), reps[0].vector)
    scale_dev = abs(rq - lam[0]) / lam[0]
    C = generate_lawson_cone(3, 3, 0.05, 4.0, 12, 41)
    lc = hardy_constant(assemble_forms(C, metric_skin_transform(C, 1.0))).lambda_min
    drift = abs(lam[0] - lc) / lam[0]
    bound = oracles.radial_hardy(7, oracles.lawson_kappa(3, 3), 1.0, 0.05, 4.0)
    ok = (lam[0] > 0 and drift <= 0.10 and mono and scale_dev <= 1e-9
          and min(lam[0], lc) >= bound * 0.95)
    record(10, ok, f"lambda_min {lam[0]:.6g} (coarse {lc:.6g}, drift {drift:.3g}), "
                   f"bands monotone={mono}, Rayleigh scale deviation {scale_dev:.3g}, "
                   f"radial oracle {bound:.6g}")
    assert ok


def test_c11_uniform_curves(ref_cone, ref_skin):
    H = ref_cone
    pairs = _pairs(H, 100)
    cs = np.array([skin_uniform_curve(H, ref_skin, p, q, "constrained_search").c for p, q in pairs])
    cp = np.array([skin_uniform_curve(H, ref_skin, p, q, "pipeline").c for p, q in pairs])
    finite = bool(np.all(np.isfinite(cs)) and np.all(np.isfinite(cp)))
    order = bool(np.all(cs <= cp + 1e-9))
    drift = max(blow_up_invariance_check(H, ref_skin, [0.5, 2.0], pairs, m)["max_deviation"]
                for m in ("constrained_search", "pipeline"))
    sing = singular_endpoint_check(H)
    ok = finite and order and drift <= 1e-6 and sing["ok"]
    record(11, ok, f"{len(pairs)} pairs: c in [{cs.min():.3g}, {cs.max():.3g}] (constrained), "
                   f"max {cp.max():.3g} (pipeline); scale drift {drift:.3g}; singular endpoints "
                   f"{sing['connected_pairs']}/{sing['pairs']}")
    assert ok


def test_c12_domains(ref_cone, ref_skin, qt05):
    H, sk = ref_cone, ref_skin
    m = interior(H)
    a0 = 0.1 * float(sk.delta[m].max())
    kap, ok, note = [], True, ""
    E = ~H.excluded_mask
    for a in (a0, a0 / 2, a0 / 4):
        dom = bubbled_hull(H, sk, qt05, build_link_space(H, sk, a, 64))
        try:
            chk = verify_domain(H, sk, dom, 16)
        except DomainError as exc:
            ok, note = False, f"; a={a:.4g}: {exc}"
            break
        # the outer inclusions by a direct scan
        mem = np.zeros(H.n_vertices, dtype=bool)
        mem[dom.members] = True
        ok &= bool(np.all(mem[E & (sk.delta >= chk.iota * a)]))
        ok &= bool(np.all(sk.delta[mem & E] >= dom.alpha_prime * a / 4))
        ok &= bool(np.all(mem[E & (sk.delta >= a)]))
        kap.append(chk.kappa)
    spread = max(kap) / min(kap) if len(kap) == 3 else np.inf
    ok = ok and spread <= 3.0
    record(12, ok, "kappa(a) " + ", ".join(f"{k:.4g}" for k in kap)
           + f", spread {spread:.3g} (tol 3)" + note)
    assert ok


def test_c13_metrics(ref_cone, ref_skin):
    H, sk = ref_cone, ref_skin
    pairs = _pairs(H, 100, seed=11)
    ds = skin_metric_distances(H, sk, pairs)
    G = scale_surface(H, 2.0)
    skg = metric_skin_transform(G, 1.0)
    dg = skin_metric_distances(G, skg, pairs)
    scale_dev = float(np.max(np.abs(dg - ds) / ds))
    qh = quasi_hyperbolic_distances(H, pairs)
    dominance = bool(np.all(ds >= sk.alpha * qh * (1 - 1e-12)))
    g = dyadic_growth(H)
    dyadic = float(np.max(np.abs(g / np.log(2.0) - 1)))
    # quasi-hyperbolic length of a radial ray against the closed form
    ray = np.arange(0, H.n_vertices, H.n_vertices // H.params["radial_res"])
    i, j = ray[4], ray[-5]
    ray_dev = abs(quasi_hyperbolic_distances(H, [(int(i), int(j))])[0]
                  / oracles.quasi_hyperbolic_radial(H.radius[i], H.radius[j]) - 1)
    live = np.flatnonzero(interior(H))
    pick = live[np.linspace(0, live.size - 1, 24).round().astype(np.int64)]
    allp = [(int(a), int(b)) for a in pick for b in pick]
    d0 = four_point_delta(skin_metric_distances(H, sk, allp).reshape(24, 24))["delta"]
    d2 = four_point_delta(skin_metric_distances(G, skg, allp).reshape(24, 24))["delta"]
    hyp_dev = abs(d2 - d0) / d0
    ok = scale_dev <= 1e-9 and dominance and dyadic <= 0.10 and hyp_dev <= 1e-9
    record(13, ok, f"scale deviation {scale_dev:.3g}, dominance={dominance}, dyadic growth "
                   f"deviation {dyadic:.3g} ({g.size} halvings), ray vs log ratio {ray_dev:.3g}, "
                   f"four-point delta {d0:.4g} scale deviation {hyp_dev:.3g}")
    assert ok


def test_c14_connectivity(ref_cone):
    meshes = [ref_cone, scale_surface(ref_cone, 8.0)]
    meshes += [generate_lawson_cone(p, q, 0.05, 4.0, ang, rad)
               for p, q in ((3, 3), (2, 4), (1, 5), (2, 2))
               for ang, rad in ((6, 11), (10, 41))]
    ok = True
    for H in meshes:
        assert H.is_singular
        keep = np.setdiff1d(np.arange(H.n_vertices), H.sigma_idx)
        n, _ = csgraph.connected_components(H.adjacency[keep][:, keep], directed=False)
        ok &= n == 1 and check_connectivity(H, H.sigma_idx)[0]
    record(14, ok, f"graph minus sigma proxy connected on {len(meshes)} singular meshes")
    assert ok
