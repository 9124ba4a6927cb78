"""Skin uniform curves, blow-up checks and skin uniform domains.

A curve gamma from p to q is c-skin uniform when

    l(gamma) <= c d(p, q)   and   l_min(z) <= c delta(z) for interior z,

with l_min(z) the shorter of the two arcs of gamma cut at z.  Two constructions
are provided.  The pipeline joins dyadic chains of high-delta samples by
shortest paths inside superlevel sets of delta.  The constrained search finds
the smallest c admitting such a curve: for fixed c, grow shortest-path trees
from p and from q in which a vertex may be entered only at arc length
<= c delta; a c-uniform curve exists iff the two trees can be joined with total
length <= c d(p, q).  Every c-uniform curve splits at its midpoint into two
such pieces, so the test is exact and bisection on c yields the optimum.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .cover import BallCover, CoverError
from .skinfield import SkinField, _matched_cone, metric_skin_transform
from .surface import (DiscreteHypersurface, SurfaceError, ball_batches, check_connectivity,
                      dijkstra, generate_link, multi_source, shortest_path)

__all__ = [
    "UniformCurveCertificate",
    "LinkSpace",
    "SkinDomain",
    "DomainCheck",
    "UniformityError",
    "DomainError",
    "certify_constant",
    "annulus_sample",
    "pipeline_curve",
    "skin_uniform_curve",
    "blow_up_invariance_check",
    "project_to_link",
    "singular_endpoint_check",
    "build_link_space",
    "arc_hull",
    "bubbled_hull",
    "verify_domain",
]

_BISECT_RTOL = 1e-12


class UniformityError(ValueError):
    """Curve construction failed (empty annulus, disconnected subgraph, ...)."""


class DomainError(ValueError):
    """Domain inclusion failure or disconnected member subgraph.

    ``kind`` is "inclusion" or "disconnected".
    """

    def __init__(self, msg, kind="inclusion"):
        super().__init__(msg)
        self.kind = kind


@dataclass(frozen=True, eq=False)
class UniformCurveCertificate:
    """Vertex polyline from p to q with its certified uniformity constants."""

    path: np.ndarray
    length: float
    p: int
    q: int
    c_quasi: float
    c_cone: float
    c: float
    method: str
    surface_id: str
    l_min: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def cert_id(self) -> str:
        h = hashlib.sha256(self.surface_id.encode())
        h.update(self.method.encode())
        h.update(np.ascontiguousarray(self.path, dtype=np.int64).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class LinkSpace:
    """Curves linking a pair set over E(a) = {delta >= a}."""

    a: float
    members: np.ndarray
    curves: list
    policy: str
    worst_c: float
    surface_id: str
    skin_id: str


@dataclass(frozen=True, eq=False)
class SkinDomain:
    """Bubbled arc hull: union of doubled cover balls meeting the arc hull."""

    a: float
    centers: np.ndarray
    members: np.ndarray
    link: LinkSpace
    arc: np.ndarray
    alpha_prime: float
    xi: float
    iota: float | None = None
    kappa: float | None = None
    surface_id: str = ""
    skin_id: str = ""
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DomainCheck:
    """Result of verify_domain."""

    iota: float
    kappa: float
    passed: bool
    checks: dict


# ---------------------------------------------------------------------------
# certificates


def _path_lengths(H: DiscreteHypersurface, path: np.ndarray) -> np.ndarray:
    if path.size < 2:
        return np.zeros(0)
    u, v = path[:-1], path[1:]
    if np.any(u == v):
        raise UniformityError("path repeats a vertex consecutively")
    w = np.asarray(H.adjacency[u, v]).ravel()
    if np.any(w <= 0):
        k = int(np.flatnonzero(w <= 0)[0])
        raise UniformityError(f"path step {int(u[k])}->{int(v[k])} is not a graph edge")
    return w


def _pair_distance(H: DiscreteHypersurface, p: int, q: int) -> float:
    stop = np.zeros(H.n_vertices, dtype=bool)
    stop[q] = True
    _, dist, _ = dijkstra(H, [p], stop=stop)
    return float(dist[q])


def _evaluate(H, weight, path, d):
    """(length, l_min, c_quasi, c_cone) of a polyline against a positive weight."""
    path = np.asarray(path, dtype=np.int64)
    steps = _path_lengths(H, path)
    arc = np.concatenate([[0.0], np.cumsum(steps)])
    length = float(arc[-1])
    l_min = np.minimum(arc, length - arc)
    inner = slice(1, len(path) - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = l_min[inner] / weight[path[inner]]
    ratio = np.where(np.isinf(weight[path[inner]]), 0.0, ratio)
    c_cone = float(ratio.max()) if ratio.size else 0.0
    c_quasi = length / d if d > 0 else np.inf
    return length, l_min, float(c_quasi), c_cone


def certify_constant(H: DiscreteHypersurface, skin: SkinField, path,
                     d: float | None = None) -> tuple[float, float, float]:
    """Exact uniformity constants of a vertex polyline.

    Parameters
    ----------
    H, skin : surface and its skin field
    path : sequence of int
        Consecutive vertices must be joined by edges.
    d : float, optional
        Precomputed d(p, q).

    Returns
    -------
    c_quasi, c_cone, c : float
        length/d(p, q); max over interior vertices of l_min/delta; their max.
    """
    path = np.asarray(path, dtype=np.int64)
    if path.size < 2 or path[0] == path[-1]:
        raise UniformityError("a curve needs two distinct endpoints")
    if d is None:
        d = _pair_distance(H, int(path[0]), int(path[-1]))
    _, _, cq, cc = _evaluate(H, skin.delta, path, d)
    return cq, cc, max(cq, cc)


def _certificate(H, skin, path, method, d=None, info=None, weight=None) -> UniformCurveCertificate:
    path = np.asarray(path, dtype=np.int64)
    p, q = int(path[0]), int(path[-1])
    if d is None:
        d = _pair_distance(H, p, q)
    w = skin.delta if weight is None else weight
    length, l_min, cq, cc = _evaluate(H, w, path, d)
    info = dict(info or {})
    info["d"] = float(d)
    inner = path[1:-1]
    if inner.size:
        # vertex-only l_min misses extrema inside edges by at most one edge length
        info["subedge_bound"] = float(np.max(_path_lengths(H, path)) / np.min(w[path]))
    return UniformCurveCertificate(path=path, length=length, p=p, q=q, c_quasi=cq, c_cone=cc,
                                   c=max(cq, cc), method=method, surface_id=H.surface_id,
                                   l_min=l_min, info=info)


# ---------------------------------------------------------------------------
# masks and constrained paths


def _interior_mask(H: DiscreteHypersurface) -> np.ndarray:
    """Vertices a curve interior may visit: not excluded, not a singular proxy."""
    m = ~H.excluded_mask
    m[H.sigma_idx] = False
    return m


def _constrained_path(H, a, b, allowed) -> list[int] | None:
    """Shortest path a -> b whose interior stays in ``allowed``; None if none."""
    allowed = allowed.copy()
    allowed[b] = True
    stop = np.zeros(H.n_vertices, dtype=bool)
    stop[b] = True
    _, dist, pred = dijkstra(H, [a], allowed=allowed, stop=stop)
    if not np.isfinite(dist[b]):
        return None
    return shortest_path(pred, b)


def _bottleneck(H, a, b, delta, base) -> float:
    """Largest s with a, b joined inside {delta >= s} n base (bisection over levels)."""
    if a == b or _constrained_path(H, a, b, np.zeros(H.n_vertices, dtype=bool)) is not None:
        return np.inf
    levels = np.unique(delta[base])
    if _constrained_path(H, a, b, base) is None:
        return -np.inf
    lo, hi = 0, len(levels) - 1  # levels[lo] is feasible
    if _constrained_path(H, a, b, base & (delta >= levels[hi])) is not None:
        return float(levels[hi])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _constrained_path(H, a, b, base & (delta >= levels[mid])) is not None:
            lo = mid
        else:
            hi = mid
    return float(levels[lo])


# ---------------------------------------------------------------------------
# pipelines


def annulus_sample(H: DiscreteHypersurface, skin: SkinField, x: int, k: int, t: float = 0.0,
                   unit: float = 1.0) -> int:
    """Representative of E(2^-k t) in the dyadic annulus around ``x``.

    The annulus is 2^-k unit <= d(x, z) <= 2^-k+1 unit.  The vertex of largest
    delta is returned (+inf counts as largest), ties broken by index.

    Raises
    ------
    UniformityError
        If the annulus holds no admissible vertex.
    """
    lo = unit * 2.0 ** (-k)
    order, dist, _ = dijkstra(H, [x], 2 * lo)
    d = dist[order]
    ok = (d >= lo) & _interior_mask(H)[order]
    cand = order[ok]
    cand = cand[skin.delta[cand] >= lo * t]
    if cand.size == 0:
        raise UniformityError(f"empty annulus at k={k} around vertex {x}")
    pick = np.lexsort((cand, -skin.delta[cand]))[0]
    return int(cand[pick])


def _chain(H, skin, x, p0, unit, t):
    """p_1 = p0 followed by annulus samples p_2, p_3, ... until the annulus empties."""
    pts = [int(p0)]
    for k in range(2, 64):
        try:
            v = annulus_sample(H, skin, x, k, t, unit)
        except UniformityError:
            break
        if v != pts[-1]:
            pts.append(v)
    if pts[-1] != x:
        pts.append(int(x))
    return pts


def _chain_segments(pts, unit):
    # segment j joins chain points p_{j+1}, p_{j+2}; its level scale is 2^-(j+1) unit
    return [(pts[j], pts[j + 1], unit * 2.0 ** (-(j + 1))) for j in range(len(pts) - 1)]


def _assemble(H, skin, segments, tau):
    base = _interior_mask(H)
    path, lengths = [], []
    for a, b, scale, sstar in segments:
        s = min(tau * scale, sstar)
        seg = _constrained_path(H, a, b, base & (skin.delta >= s))
        if seg is None:  # cannot happen: s <= the segment bottleneck
            raise UniformityError(f"constrained subgraph disconnects between {a} and {b}")
        lengths.append(float(np.sum(_path_lengths(H, np.asarray(seg)))))
        path.extend(seg if not path else seg[1:])
    return path, lengths


def _pipelines(H, skin, starts, unit, t):
    """Chains from p0 to each x in ``starts`` [(x, p0)], with a common tube parameter."""
    base = _interior_mask(H)
    chains, segs = [], []
    for x, p0 in starts:
        pts = _chain(H, skin, x, p0, unit, t)
        rows = []
        for k, (a, b, scale) in enumerate(_chain_segments(pts, unit)):
            s = _bottleneck(H, a, b, skin.delta, base)
            if s == -np.inf:
                raise UniformityError(f"constrained subgraph disconnects at k={k + 1} "
                                      f"between {a} and {b}")
            rows.append((a, b, scale, s))
        chains.append(pts)
        segs.append(rows)
    ratios = [s / scale for rows in segs for (_, _, scale, s) in rows]
    tau = min(ratios) if ratios else np.inf
    return chains, segs, tau


def pipeline_curve(H: DiscreteHypersurface, skin: SkinField, x: int, p0: int, t: float = 0.0,
                   unit: float | None = None) -> UniformCurveCertificate:
    """Dyadic pipeline from ``p0`` down to ``x``.

    Chain points p_k are annulus samples at scale 2^-k ``unit`` (p_1 = p0);
    consecutive points are joined by shortest paths inside E(2^-k tau') for
    the largest tau' at which every segment stays connected.

    Parameters
    ----------
    x : int
        Target, possibly a singular proxy.
    p0 : int
        Start point in the unit annulus of x.
    unit : float, optional
        Annulus unit R; defaults to d(x, p0), so that p0 lies in [R/2, R].
    """
    x, p0 = int(x), int(p0)
    if x == p0:
        raise UniformityError("pipeline endpoints coincide")
    d = _pair_distance(H, p0, x)
    if unit is None:
        unit = d
    if np.isinf(skin.delta[x]) or np.all(np.isinf(skin.delta[_interior_mask(H)])):
        path = _constrained_path(H, p0, x, _interior_mask(H))
        if path is None:
            raise UniformityError("no admissible path")
        return _certificate(H, skin, path, "pipeline", d, {"degenerate": True})
    chains, segs, tau = _pipelines(H, skin, [(x, p0)], unit, t)
    path, lengths = _assemble(H, skin, segs[0], tau)
    info = {"tau": tau, "chain": chains[0], "segment_lengths": lengths, "unit": unit}
    return _certificate(H, skin, path, "pipeline", d, info)


def _pipeline_pair(H, skin, p, q, d, t):
    base = _interior_mask(H)
    if np.all(np.isinf(skin.delta[base])):
        return None, {"degenerate": True}
    unit = 2.0 * d / 3.0
    op, dp, _ = dijkstra(H, [p], unit)
    oq, dq, _ = dijkstra(H, [q], unit)
    both = np.zeros(H.n_vertices, dtype=bool)
    both[op[dp[op] >= unit / 2]] = True
    inq = np.zeros(H.n_vertices, dtype=bool)
    inq[oq[dq[oq] >= unit / 2]] = True
    cand = np.flatnonzero(both & inq & base & (skin.delta >= unit * t / 2))
    if cand.size == 0:
        return None, {"degenerate": True}
    p0 = int(cand[np.lexsort((cand, -skin.delta[cand]))[0]])
    chains, segs, tau = _pipelines(H, skin, [(p, p0), (q, p0)], unit, t)
    left, ll = _assemble(H, skin, segs[0], tau)
    right, lr = _assemble(H, skin, segs[1], tau)
    path = left[::-1] + right[1:]
    return path, {"tau": tau, "p0": p0, "chains": chains, "segment_lengths": [ll, lr],
                  "unit": unit}


def _min_c_curve(H, p, q, weight, allowed, d, hi_path):
    """Smallest c admitting a curve p -> q with length <= c d and
    l_min(z) <= c weight(z) on interior vertices inside ``allowed``.

    ``hi_path`` is any admissible curve; its constant brackets the search.
    """
    u, v = H.edges[:, 0], H.edges[:, 1]
    lens = H.lengths

    def trees(c):
        cap = np.where(allowed, c * weight, -np.inf)
        cp, cq = cap.copy(), cap.copy()
        cp[q] = np.inf
        cq[p] = np.inf
        _, dp, pp = dijkstra(H, [p], c * d, cap=cp)
        _, dq, pq = dijkstra(H, [q], c * d, cap=cq)
        return dp, pp, dq, pq

    def join(c):
        dp, pp, dq, pq = trees(c)
        jv = dp + dq
        ju = dp[u] + lens + dq[v]
        jw = dp[v] + lens + dq[u]
        best = min(jv.min(), ju.min(), jw.min())
        return best, (dp, pp, dq, pq, jv, ju, jw)

    def feasible(c):
        best, _ = join(c)
        return best <= c * d

    def curve(c):
        best, (dp, pp, dq, pq, jv, ju, jw) = join(c)
        if jv.min() == best:
            m = int(np.argmin(jv))
            return shortest_path(pp, m) + shortest_path(pq, m)[::-1][1:]
        if ju.min() == best:
            e = int(np.argmin(ju))
            a, b = int(u[e]), int(v[e])
        else:
            e = int(np.argmin(jw))
            a, b = int(v[e]), int(u[e])
        return shortest_path(pp, a) + shortest_path(pq, b)[::-1]

    _, _, cq, cc = _evaluate(H, weight, np.asarray(hi_path), d)
    hi = max(cq, cc)
    lo = 1.0
    if feasible(lo):
        return curve(lo), 0
    if not feasible(hi):  # rounding at the bracket; the bracket curve itself is admissible
        return list(hi_path), 0
    steps = 0
    while hi - lo > _BISECT_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
        steps += 1
    return curve(hi), steps


def _sweep_paths(H, skin, p, q, base, n_levels=16):
    """Shortest paths p -> q inside E(s) for s over delta quantiles."""
    vals = skin.delta[base]
    vals = vals[np.isfinite(vals)]
    levels = np.unique(np.quantile(vals, np.linspace(0.0, 0.95, n_levels))) if vals.size else []
    out = []
    path = _constrained_path(H, p, q, base)
    if path is not None:
        out.append(path)
    for s in levels:
        path = _constrained_path(H, p, q, base & (skin.delta >= s))
        if path is not None:
            out.append(path)
    return out


def skin_uniform_curve(H: DiscreteHypersurface, skin: SkinField, p: int, q: int,
                       method: str = "pipeline", t: float = 0.0,
                       allowed: np.ndarray | None = None) -> UniformCurveCertificate:
    """Skin uniform curve from ``p`` to ``q``.

    Parameters
    ----------
    method : {"pipeline", "constrained_search"}
        "pipeline": a common start p0 of largest delta in the intersection of
        the annuli d/3 <= d(., p), d(., q) <= 2d/3, and two dyadic pipelines
        from p0 with a shared tube parameter.  "constrained_search": shortest
        paths inside E(s) for s over delta quantiles, refined by the exact
        bisection on c; the curve with the smallest c is returned.
    allowed : bool array, optional
        Extra restriction of curve interiors (constrained search only).
    """
    p, q = int(p), int(q)
    if p == q:
        raise UniformityError("p and q must differ")
    ex = H.excluded_mask
    if ex[p] or ex[q]:
        raise UniformityError("endpoints must not be excluded vertices")
    d = _pair_distance(H, p, q)
    if not np.isfinite(d):
        raise UniformityError("no connecting path: graph disconnected")
    base = _interior_mask(H)
    if allowed is not None:
        base &= allowed
    if method == "pipeline":
        path, info = _pipeline_pair(H, skin, p, q, d, t)
        if path is None:
            path = _constrained_path(H, p, q, base)
            if path is None:
                raise UniformityError("no connecting path avoiding the singular set")
        return _certificate(H, skin, path, "pipeline", d, info)
    if method != "constrained_search":
        raise UniformityError(f"unknown method {method!r}")
    paths = _sweep_paths(H, skin, p, q, base)
    if not paths:
        raise UniformityError("no connecting path avoiding the singular set")
    certs = [_certificate(H, skin, pa, "constrained_search", d) for pa in paths]
    best = min(certs, key=lambda c: c.c)
    path, steps = _min_c_curve(H, p, q, skin.delta, base, d, best.path)
    cert = _certificate(H, skin, path, "constrained_search", d,
                        {"sweep_c": best.c, "bisection_steps": steps})
    return cert if cert.c <= best.c else replace(best, info={**best.info, "sweep_c": best.c})


# ---------------------------------------------------------------------------
# blow-ups and links


def project_to_link(cone: DiscreteHypersurface, path) -> np.ndarray:
    """Radial projection of a cone polyline onto the link grid (repeats removed)."""
    m = cone.params["angular_res"]
    proj = np.asarray(path, dtype=np.int64) % (m * m)
    keep = np.concatenate([[True], proj[1:] != proj[:-1]])
    return proj[keep]


def blow_up_invariance_check(H: DiscreteHypersurface, skin: SkinField, lambdas, pairs,
                             method: str = "pipeline") -> dict:
    """Certified constants of the same vertex pairs on rescaled, re-meshed cones.

    Returns
    -------
    dict
        ``c`` (base constants), ``max_deviation`` over lambda and pairs,
        ``deviation`` per lambda, and the link constants of radially projected
        base curves (``link_c``).
    """
    if not H.kind.startswith("lawson_cone"):
        raise SurfaceError("blow-up check needs a self-similar cone")
    pairs = [(int(a), int(b)) for a, b in pairs]
    base = [skin_uniform_curve(H, skin, a, b, method) for a, b in pairs]
    c0 = np.array([c.c for c in base])
    dev = {}
    for lam in lambdas:
        lam = float(lam)
        if lam == 1.0:
            dev[lam] = 0.0
            continue
        G = _matched_cone(H, lam)
        sk = metric_skin_transform(G, skin.alpha)
        c = np.array([skin_uniform_curve(G, sk, a, b, method).c for a, b in pairs])
        dev[lam] = float(np.max(np.abs(c - c0))) if c.size else 0.0
    link = generate_link(H.params["p"], H.params["q"], H.params["angular_res"])
    link_skin = metric_skin_transform(link, skin.alpha)
    link_c = []
    for cert in base:
        proj = project_to_link(H, cert.path)
        if proj.size < 2 or proj[0] == proj[-1]:
            continue
        link_c.append(certify_constant(link, link_skin, proj)[2])
    return {"c": c0, "deviation": dev, "max_deviation": max(dev.values(), default=0.0),
            "link_c": np.array(link_c)}


def singular_endpoint_check(H: DiscreteHypersurface) -> dict:
    """For every pair of singular proxies, is there a path whose interior avoids
    the proxies and the excluded vertices?"""
    sig = np.asarray(H.sigma_idx, dtype=np.int64)
    if sig.size < 2:
        return {"pairs": 0, "connected_pairs": 0, "ok": True}
    base = _interior_mask(H)
    A = H.adjacency[sig][:, base].tocsr()
    cols = np.flatnonzero(base)
    ok = 0
    for i, s in enumerate(sig):
        _, dist, _ = dijkstra(H, [s], allowed=base)
        # reach proxy j through an admissible neighbour
        reach = np.zeros(sig.size, dtype=bool)
        for j in range(sig.size):
            lo, hi = A.indptr[j], A.indptr[j + 1]
            reach[j] = np.any(np.isfinite(dist[cols[A.indices[lo:hi]]]))
        reach[i] = False
        ok += int(np.sum(reach[i + 1:]))
    n = sig.size * (sig.size - 1) // 2
    return {"pairs": n, "connected_pairs": ok, "ok": ok == n}


# ---------------------------------------------------------------------------
# link spaces and domains


def _superlevel(H, skin, a):
    return np.flatnonzero(~H.excluded_mask & (skin.delta >= a))


def _farthest_points(H, members, k):
    """Deterministic farthest-point sample of ``members``, starting from members[0]."""
    picks = [int(members[0])]
    dist = multi_source(H.adjacency, picks)
    while len(picks) < k:
        dm = dist[members]
        j = int(np.argmax(dm))
        if dm[j] == 0:
            break
        picks.append(int(members[j]))
        dist = np.minimum(dist, multi_source(H.adjacency, [members[j]]))
    return picks


def build_link_space(H: DiscreteHypersurface, skin: SkinField, a: float, pair_budget: int = 64,
                     method: str = "constrained_search") -> LinkSpace:
    """Curves joining a deterministic pair set over E(a).

    All pairs are linked when |E(a)| < 200 and the pair count fits the budget.
    Otherwise k farthest-point hubs are linked pairwise and the budget left
    is spent on spokes from further farthest-point samples to their nearest hub.
    """
    members = _superlevel(H, skin, a)
    if members.size == 0:
        raise UniformityError(f"E({a:g}) is empty")
    members = members[np.lexsort((members, -skin.delta[members]))]
    n = members.size
    if n == 1:
        pairs, policy = [], "all"
    elif n < 200 and n * (n - 1) // 2 <= pair_budget:
        pairs = [(int(members[i]), int(members[j])) for i in range(n) for j in range(i + 1, n)]
        policy = "all"
    else:
        k = 2
        while (k + 1) * k // 2 <= pair_budget // 2 and k + 1 <= n:
            k += 1
        spokes = max(0, min(pair_budget - k * (k - 1) // 2, n - k))
        pts = _farthest_points(H, members, k + spokes)
        hubs, rest = pts[:k], pts[k:]
        pairs = [(hubs[i], hubs[j]) for i in range(len(hubs)) for j in range(i + 1, len(hubs))]
        if rest:
            hub_d = np.stack([multi_source(H.adjacency, [h])[rest] for h in hubs])
            near = np.argmin(hub_d, axis=0)
            pairs += [(hubs[int(h)], r) for r, h in zip(rest, near)]
        policy = f"hub({len(hubs)})"
    allowed = ~H.excluded_mask
    curves = [skin_uniform_curve(H, skin, p, q, method, allowed=allowed) for p, q in pairs]
    worst = max((c.c for c in curves), default=0.0)
    return LinkSpace(a=float(a), members=np.sort(members), curves=curves, policy=policy,
                     worst_c=float(worst), surface_id=H.surface_id, skin_id=skin.skin_id)


def arc_hull(link: LinkSpace) -> np.ndarray:
    """E(a) together with the vertices of every curve in the link space."""
    parts = [link.members] + [c.path for c in link.curves]
    return np.unique(np.concatenate(parts))


def bubbled_hull(H: DiscreteHypersurface, skin: SkinField, cover: BallCover,
                 link: LinkSpace) -> SkinDomain:
    """Union of doubled balls B_2Theta(p) over centers whose Theta-ball meets the arc hull."""
    if cover.skin_id != skin.skin_id or link.skin_id != skin.skin_id:
        raise CoverError("cover, link space and skin field do not match")
    if cover.qt_margin is None:
        raise CoverError("bubbled hulls need a QT-certified cover")
    arc = arc_hull(link)
    g = multi_source(H.adjacency, arc)
    sel = np.flatnonzero(g[cover.centers] <= cover.theta)
    members = np.zeros(H.n_vertices, dtype=bool)
    for _, idx, _ in ball_batches(H, cover.centers[sel], 2 * cover.theta[sel]):
        members[idx] = True
    alpha_prime = 1.0 / (skin.lipschitz_bound * link.worst_c + 1.0)
    return SkinDomain(a=link.a, centers=sel, members=np.flatnonzero(members), link=link,
                      arc=arc, alpha_prime=float(alpha_prime), xi=cover.xi,
                      surface_id=H.surface_id, skin_id=skin.skin_id)


def _sample_pairs(vertices, n_pairs):
    v = np.asarray(vertices)
    if v.size < 2:
        return []
    n = min(2 * n_pairs, v.size)
    pick = v[np.unique(np.linspace(0, v.size - 1, n).round().astype(np.int64))]
    h = pick.size // 2
    return [(int(pick[i]), int(pick[i + h])) for i in range(h)]


def verify_domain(H: DiscreteHypersurface, skin: SkinField, domain: SkinDomain,
                  pair_budget: int = 16) -> DomainCheck:
    """Exhaustive inclusion scans and the domain uniformity constant.

    Checks E(a) in arc in E(alpha' a), U_{xi alpha' a/4}(arc) in B in
    E(alpha' a/4), reports the smallest iota with E(iota a) in B, and certifies
    kappa = max over sampled member pairs of the smallest c for which a curve
    inside B has length <= c d(p, q) and l_min(z) <= c min(L dist(z, dB), delta(z)).

    Raises
    ------
    DomainError
        On an inclusion failure or a disconnected member subgraph.
    """
    if domain.skin_id != skin.skin_id:
        raise DomainError("domain was built for another skin field")
    a, ap, delta = domain.a, domain.alpha_prime, skin.delta
    live = ~H.excluded_mask
    mem = np.zeros(H.n_vertices, dtype=bool)
    mem[domain.members] = True
    arc = np.zeros(H.n_vertices, dtype=bool)
    arc[domain.arc] = True
    E = live & (delta >= a)
    rho = domain.xi * ap * a / 4
    near = multi_source(H.adjacency, domain.arc, limit=rho) < rho
    checks = {
        "E_in_arc": bool(np.all(arc[E])),
        "arc_in_E_alpha": bool(np.all(delta[arc & live] >= ap * a)),
        "U_in_hull": bool(np.all(mem[near & live])),
        "hull_in_E_alpha4": bool(np.all(delta[mem & live] >= ap * a / 4)),
    }
    outside = live & ~mem
    top = float(delta[outside].max()) if outside.any() else 0.0
    iota = float(np.nextafter(top / a, np.inf))
    while np.any(outside & (delta >= iota * a)):
        iota = float(np.nextafter(iota, np.inf))
    checks["iota_inclusion"] = True
    bad = [k for k, v in checks.items() if not v]
    if bad:
        raise DomainError(f"inclusion failure: {', '.join(bad)}", "inclusion")
    ok, sizes = check_connectivity(H, exclude=np.flatnonzero(~mem))
    if not ok:
        raise DomainError(f"member subgraph disconnected, components {sizes[:5]}",
                          "disconnected")
    boundary = np.flatnonzero(outside)
    bd = multi_source(H.adjacency, boundary) if boundary.size else np.full(H.n_vertices, np.inf)
    weight = np.minimum(skin.lipschitz_bound * bd, delta)
    allowed = _interior_mask(H) & mem
    kappa, worst = 0.0, None
    for p, q in _sample_pairs(np.flatnonzero(allowed), pair_budget):
        d = _pair_distance(H, p, q)
        path = _constrained_path(H, p, q, allowed)
        if path is None:
            raise DomainError(f"no path inside the domain between {p} and {q}", "disconnected")
        path, _ = _min_c_curve(H, p, q, weight, allowed, d, path)
        _, _, cq, cc = _evaluate(H, weight, np.asarray(path), d)
        if max(cq, cc) > kappa:
            kappa, worst = max(cq, cc), (p, q)
    checks["kappa_pair"] = worst
    return DomainCheck(iota=iota, kappa=float(kappa), passed=True, checks=checks)
