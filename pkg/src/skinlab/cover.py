"""Skin adapted ball covers and the quantitative transversality perturbation.

Radii are Theta(p) = xi * delta(p).  Centers are chosen greedily; each new
center goes into the first family whose members are all farther than
10 Theta(m) + 10 Theta(p) away.  Centers are scanned in decreasing delta, so a
new ball is never larger than an earlier one: an uncovered vertex then cannot
swallow an earlier center, and center exclusion holds exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .skinfield import SkinField
from .surface import DiscreteHypersurface, ball_batches, dijkstra, local_dijkstra, shortest_path

__all__ = [
    "BallCover",
    "CoverError",
    "QTError",
    "build_skin_cover",
    "covering_number_stats",
    "verify_cover",
    "qt_perturb",
    "verify_qt",
    "tube_opening_check",
    "strict_xi_bound",
]


class CoverError(ValueError):
    """Invalid cover request or broken cover invariant."""


class QTError(CoverError):
    """No admissible replacement center within the perturbation budget."""

    def __init__(self, msg, pair=None):
        super().__init__(msg)
        self.pair = pair


@dataclass(frozen=True, eq=False)
class BallCover:
    """Centers, radii Theta = xi*delta and family labels 1..F."""

    centers: np.ndarray
    theta: np.ndarray
    xi: float
    family: np.ndarray
    surface_id: str
    skin_id: str
    lipschitz: float = 1.0
    qt_margin: float | None = None
    stats: dict = field(default_factory=dict)

    @property
    def n_families(self) -> int:
        return int(self.family.max()) if self.family.size else 0


def strict_xi_bound(skin: SkinField) -> float:
    """The a-priori admissible size bound 1/(1000 L)."""
    return 1.0 / (1000.0 * skin.lipschitz_bound) if skin.lipschitz_bound > 0 else np.inf


def _reach(theta: float, factor: float, xi: float, L: float) -> float:
    """Search radius that finds every m with d(p, m) <= factor*(Theta(p) + Theta(m)).

    Uses Theta(m) <= Theta(p) + xi*L*d, valid because delta is L-Lipschitz in
    the graph metric.
    """
    den = 1.0 - factor * xi * L
    return 2 * factor * theta / den if den > 0 else np.inf


def build_skin_cover(H: DiscreteHypersurface, skin: SkinField, xi: float,
                     xi_max: float | None = None) -> BallCover:
    """Greedy skin adapted cover.

    Parameters
    ----------
    H : DiscreteHypersurface
    skin : SkinField
    xi : float
        Size parameter.
    xi_max : float, optional
        Admissible upper bound for ``xi``.  Defaults to the strict a-priori
        bound 1/(1000 L) with L the certified Lipschitz constant of delta; a
        larger explicit value relaxes it.

    Returns
    -------
    BallCover
    """
    if skin.surface_id != H.surface_id:
        raise CoverError("skin field belongs to another surface")
    mask = ~H.excluded_mask
    if np.any(np.isinf(skin.delta[mask])):
        raise CoverError("delta is infinite (totally geodesic surface): no skin adapted cover")
    bound = strict_xi_bound(skin) if xi_max is None else float(xi_max)
    if not (0 < xi <= bound) or (xi_max is None and xi >= bound):
        raise CoverError(f"xi={xi} outside (0, {bound:g}]")
    L = skin.lipschitz_bound
    delta = skin.delta
    cand = np.flatnonzero(mask)
    order = cand[np.lexsort((cand, -delta[cand]))]  # delta descending, then index
    covered = ~mask  # excluded vertices need no ball
    centers, thetas, fams = [], [], []
    # slack[f][z] = min over centers m of family f of d(m, z) - 10 Theta(m).  Earlier
    # centers are at least as large, so a conflicting m has z within 20 Theta(m).
    slack: list[np.ndarray] = []
    for v in order:
        if covered[v]:
            continue
        th = xi * delta[v]
        f = next((k for k, s in enumerate(slack) if s[v] > 10 * th), None)
        if f is None:
            slack.append(np.full(H.n_vertices, np.inf))
            f = len(slack) - 1
        near, d = local_dijkstra(H, [v], 20 * th)
        covered[near[d <= th]] = True
        slack[f][near] = np.minimum(slack[f][near], d - 10 * th)
        centers.append(v)
        thetas.append(th)
        fams.append(f + 1)
    cover = BallCover(centers=np.array(centers, dtype=np.int64), theta=np.array(thetas),
                      xi=float(xi), family=np.array(fams, dtype=np.int64),
                      surface_id=H.surface_id, skin_id=skin.skin_id, lipschitz=float(L))
    stats = covering_number_stats(H, cover, 1.0)
    stats["families"] = cover.n_families
    stats["centers"] = int(len(centers))
    return replace(cover, stats=stats)


def covering_number_stats(H: DiscreteHypersurface, cover: BallCover, rho: float) -> dict:
    """Per-vertex count of centers x with z in the closed ball B_{rho Theta(x)}(x).

    Returns a dict with the histogram {count: vertices}, min and max over
    non-excluded vertices, and rho.
    """
    counts = np.zeros(H.n_vertices, dtype=np.int64)
    for j, idx, _ in ball_batches(H, cover.centers, rho * cover.theta):
        counts[idx] += 1
    c = counts[~H.excluded_mask]
    vals, freq = np.unique(c, return_counts=True)
    return {"rho": float(rho), "min": int(c.min()), "max": int(c.max()),
            "histogram": {int(a): int(b) for a, b in zip(vals, freq)}}


def _center_slots(H, cover) -> np.ndarray:
    pos = np.full(H.n_vertices, -1, dtype=np.int64)
    pos[cover.centers] = np.arange(len(cover.centers))
    return pos


def verify_cover(H: DiscreteHypersurface, cover: BallCover) -> dict:
    """Exhaustive check of coverage, 10 Theta family disjointness and center exclusion.

    Every pair closer than 10 Theta(p) + 10 Theta(q) is found from its larger
    center, whose search radius 20 Theta bounds the sum.
    """
    covered = H.excluded_mask.copy()
    pos = _center_slots(H, cover)
    fam_bad = excl_bad = 0
    for j, idx, d in ball_batches(H, cover.centers, 20 * cover.theta):
        th = cover.theta[j]
        covered[idx[d <= th]] = True
        k = pos[idx]
        hit = (k >= 0) & (k != j)
        k, dz = k[hit], d[hit]
        excl_bad += int(np.sum(dz <= th))
        # open 10 Theta balls overlap iff the centers are closer than the radius sum;
        # count each pair once, from the larger ball (ties by slot)
        own = (cover.theta[k] < th) | ((cover.theta[k] == th) & (k > j))
        same = cover.family[k] == cover.family[j]
        fam_bad += int(np.sum(own & same & (dz < 10 * th + 10 * cover.theta[k])))
    return {"coverage": float(np.mean(covered)), "uncovered": int(np.sum(~covered)),
            "family_overlaps": fam_bad, "exclusion_violations": excl_bad,
            "ok": bool(np.all(covered) and fam_bad == 0 and excl_bad == 0)}


def _pair_slack(d, s):
    """|d/S - 2|: largest tau for which the pair passes both QT conditions."""
    return np.abs(d / s - 2.0)


def qt_perturb(H: DiscreteHypersurface, skin: SkinField, cover: BallCover, tau_target: float,
               sample_budget: int = 64, eps: float | None = None) -> BallCover:
    """Move centers off the transversality shells, family by family.

    A pair (p, q) with S = Theta(p) + Theta(q) violates the conditions at tau when
    (2 - tau) S < d(p, q) <= (2 + tau) S, i.e. when doubled balls touch without
    a tau-margin either way.  Each violating center is replaced by the first
    vertex, in (distance, index) order within eps*Theta(p), that clears every
    shell; at most ``sample_budget`` candidates are tried.

    Returns
    -------
    BallCover
        With ``qt_margin`` = min(tau_target, smallest pair slack).

    Raises
    ------
    QTError
        If no admissible replacement exists; ``err.pair`` names the pair.
    """
    if cover.skin_id != skin.skin_id:
        raise CoverError("cover was built for another skin field")
    F = max(cover.n_families, 1)
    if eps is None:
        eps = 1.0 / (1e4 * F)
    L = skin.lipschitz_bound
    xi = cover.xi
    centers = cover.centers.copy()
    theta = cover.theta.copy()
    is_fixed = np.zeros(H.n_vertices, dtype=bool)
    slot = np.full(H.n_vertices, -1, dtype=np.int64)
    order = np.lexsort((np.arange(len(centers)), cover.family))
    moved = 0

    def clash(v, th):
        near, d = local_dijkstra(H, [v], _reach(th, 2.0 + tau_target, xi, L))
        keep = is_fixed[near] & (near != v)
        near, d = near[keep], d[keep]
        s = th + theta[slot[near]]
        return near[_pair_slack(d, s) < tau_target]

    for k in order:
        v = int(centers[k])
        bad = clash(v, theta[k])
        if bad.size:
            radius = eps * theta[k]
            cand, _ = local_dijkstra(H, [v], radius)  # already in (distance, index) order
            cand = cand[:sample_budget]
            for c in cand:
                c = int(c)
                if c == v or is_fixed[c]:
                    continue
                thc = xi * skin.delta[c]
                if clash(c, thc).size == 0:
                    centers[k], theta[k] = c, thc
                    v = c
                    moved += 1
                    break
            else:
                raise QTError(f"no admissible replacement for center {v} within "
                              f"{radius:.3g} (clashes with {int(bad[0])})",
                              pair=(v, int(bad[0])))
        is_fixed[v] = True
        slot[v] = k
    out = replace(cover, centers=centers, theta=theta)
    if moved:
        check = verify_cover(H, out)
        if not check["ok"]:
            raise CoverError(f"perturbation broke the cover invariants: {check}")
    ok, worst, slack, n_int = verify_qt(H, out, tau_target)
    margin = float(min(tau_target, slack))
    stats = dict(cover.stats)
    stats.update(covering_number_stats(H, out, 1.0))
    stats["moved"] = moved
    stats["intersecting_pairs"] = n_int
    return replace(out, qt_margin=margin, stats=stats)


def verify_qt(H: DiscreteHypersurface, cover: BallCover, tau: float):
    """Exhaustive pair scan for the transversality conditions at ``tau``.

    Returns
    -------
    passed : bool
    worst_pair : tuple or None
    min_slack : float
        Smallest |d/S - 2| over pairs with d <= (2 + tau) S (inf if none).
    n_intersecting : int
        Pairs whose doubled balls meet (d <= 2 S).
    """
    pos = _center_slots(H, cover)
    worst, slack, n_int = None, np.inf, 0
    # a pair with d <= (2 + tau)(Theta(p) + Theta(q)) is within 2 (2 + tau) Theta of its larger center
    for j, idx, d in ball_batches(H, cover.centers, 2 * (2.0 + tau) * cover.theta):
        th = cover.theta[j]
        k = pos[idx]
        hit = (k >= 0) & (k != j)
        k, dz = k[hit], d[hit]
        own = (cover.theta[k] < th) | ((cover.theta[k] == th) & (k > j))
        k, dz = k[own], dz[own]
        s = th + cover.theta[k]
        rel = dz <= (2.0 + tau) * s
        k, dz, s = k[rel], dz[rel], s[rel]
        if k.size == 0:
            continue
        n_int += int(np.sum(dz <= 2 * s))
        sl = _pair_slack(dz, s)
        i = int(np.argmin(sl))
        if sl[i] < slack:
            slack, worst = float(sl[i]), (int(cover.centers[j]), int(cover.centers[k[i]]))
    return bool(slack >= tau), worst, slack, n_int


def tube_opening_check(H: DiscreteHypersurface, cover: BallCover) -> dict:
    """Opening of geodesic tubes inside unions of intersecting doubled balls.

    For each pair whose closed doubled balls share a vertex, the shortest path
    between the centers is computed and omega is the largest value with
    {z : d(z, path) < omega*Theta} inside B_2Theta(p) u B_2Theta(q), where
    Theta = min(Theta(p), Theta(q)).
    """
    from scipy import sparse

    balls = [idx for _, idx, _ in ball_batches(H, cover.centers, 2 * cover.theta)]
    rows = np.repeat(np.arange(len(balls)), [len(b) for b in balls])
    M = sparse.csr_matrix((np.ones(rows.size), (rows, np.concatenate(balls))),
                          shape=(len(balls), H.n_vertices))
    P = sparse.triu(M @ M.T, k=1).tocoo()
    pairs = sorted(zip(P.row.tolist(), P.col.tolist()))
    inside = np.zeros(H.n_vertices, dtype=bool)
    target = np.zeros(H.n_vertices, dtype=bool)
    omegas = np.empty(len(pairs))
    for n, (a, b) in enumerate(pairs):
        p, q = int(cover.centers[a]), int(cover.centers[b])
        target[q] = True
        _, _, pred = dijkstra(H, [p], stop=target)
        target[q] = False
        path = shortest_path(pred, q)
        inside[balls[a]] = True
        inside[balls[b]] = True
        th = min(cover.theta[a], cover.theta[b])
        if not np.all(inside[path]):
            omegas[n] = 0.0
        else:
            # the search halts on the first settled vertex outside the union
            order, dg, _ = dijkstra(H, path, stop=~inside)
            last = order[-1]
            omegas[n] = (dg[last] if not inside[last] else np.inf) / th
        inside[balls[a]] = False
        inside[balls[b]] = False
    return {"pairs": len(pairs),
            "min_omega": float(omegas.min()) if omegas.size else None,
            "omegas": omegas}
