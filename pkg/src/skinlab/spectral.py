"""Discrete Hardy forms, their smallest eigenvalues, and conformal metrics.

Quadratic forms on vertex functions f:

    N(f) = sum_e w_e (f(u) - f(v))^2 + sum_v m_v |A|(v)^2 f(v)^2
    D(f) = sum_v m_v W(v) f(v)^2,          W = <A>^2 or 1/dist(., Sigma)^2.

Vertex masses m_v are lumped cell volumes: the volume of the convex hull of v
and its neighbours (in a local tangent frame, with intrinsic edge lengths)
divided by 2^d, d the mesh dimension, times the volume density of the
directions not meshed.  Conductances are fitted per vertex by non-negative
least squares so that sum_e w_e t_e t_e^T = 2 m_v I on the incident edge
vectors t_e, which makes N exact on linear functions; an edge takes the mean
of its two endpoint fits.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import nnls
from scipy.sparse.linalg import splu
from scipy.spatial import ConvexHull
from scipy.stats import qmc

from .skinfield import SkinField
from .surface import (DiscreteHypersurface, _dijkstra_kernel, dist_to_sigma, local_dijkstra,
                      multi_source)

__all__ = [
    "QuadraticForms",
    "SpectralReport",
    "SpectralError",
    "vertex_masses",
    "assemble_forms",
    "hardy_constant",
    "hardy_dist_variant",
    "neumann_ball_eigenvalue",
    "rayleigh_quotient",
    "skin_metric_distances",
    "quasi_hyperbolic_distances",
    "four_point_delta",
    "radial_hardy_oracle",
    "dyadic_growth",
]


class SpectralError(ValueError):
    """Invalid form request or eigensolver failure."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class QuadraticForms:
    """Numerator matrix N (CSR), denominator diagonal D, masses and Dirichlet mask."""

    N: sparse.csr_matrix
    D: np.ndarray
    masses: np.ndarray
    conductances: np.ndarray
    dirichlet: np.ndarray
    band: float
    outer_condition: str
    surface_id: str
    info: dict = field(default_factory=dict)

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet)


@dataclass(frozen=True, eq=False)
class SpectralReport:
    """Smallest generalized eigenvalue of (N, D) on the free vertices."""

    lambda_min: float
    iterations: int
    residual: float
    band: float
    refinement: str | None
    vector: np.ndarray
    converged: bool
    info: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# assembly

_RIDGE = 1e-4


def _wrap(k, m):
    return (k + m // 2) % m - m // 2


def _edge_tangents(H: DiscreteHypersurface) -> np.ndarray:
    """Chart displacement at v of every directed CSR entry v -> w.

    Cones use polar coordinates (r' - r, r dX e) at v, with e the unit torus
    direction, and links the flat torus chart; the stencil is very anisotropic
    and these are the charts in which the radial profiles are linear to first
    order.  Other surfaces project chords, rescaled to the edge length, onto
    the leading singular directions of the neighbour chords.
    """
    indptr, indices, data = H._csr
    rows = np.repeat(np.arange(H.n_vertices), np.diff(indptr))
    P = H.params
    if H.kind.startswith(("lawson_cone", "link")):
        m = P["angular_res"]
        cone = H.kind.startswith("lawson_cone")
        lv = rows % (m * m) if cone else rows
        lw = indices % (m * m) if cone else indices
        dt = _wrap(lw // m - lv // m, m) * (2 * np.pi / m) * P["a"]
        dp = _wrap(lw % m - lv % m, m) * (2 * np.pi / m) * P["b"]
        dX = np.hypot(dt, dp)
        with np.errstate(invalid="ignore", divide="ignore"):
            e = np.where(dX[:, None] > 0, np.stack([dt, dp], axis=1) / dX[:, None], 0.0)
        if cone:
            r = H.radius[rows]
            return np.column_stack([H.radius[indices] - r, (r * dX)[:, None] * e])
        return np.stack([dt, dp], axis=1)
    else:
        X = H.vertices
        t = np.empty((data.size, H.mesh_dim))
        for v in range(H.n_vertices):
            sl = slice(indptr[v], indptr[v + 1])
            chords = X[indices[sl]] - X[v]
            _, _, vt = np.linalg.svd(chords, full_matrices=False)
            t[sl] = chords @ vt[:H.mesh_dim].T
    return t * (data / np.linalg.norm(t, axis=1))[:, None]


def vertex_masses(H: DiscreteHypersurface) -> tuple[np.ndarray, np.ndarray, dict]:
    """Lumped masses and fitted conductances.

    Returns
    -------
    masses : ndarray (V,)
        Cell volume times ``volume_weight``.
    conductances : ndarray (E,)
        Per edge of ``H.edges``.
    info : dict
        Largest relative residual of the per-vertex conductance fits.
    """
    d = H.mesh_dim
    iu = np.triu_indices(d)
    target = 2 * np.eye(d)[iu]
    indptr, indices, _ = H._csr
    T = _edge_tangents(H)
    cell = np.empty(H.n_vertices)
    half = np.empty(T.shape[0])
    worst = 0.0
    # congruent stencils (e.g. all vertices of a cone ring) share one fit
    memo: dict = {}
    for v in range(H.n_vertices):
        sl = slice(indptr[v], indptr[v + 1])
        t = T[sl]
        order = np.lexsort(t.T[::-1])
        key = np.round(t[order], 12).tobytes()
        if key not in memo:
            ts = t[order]
            vol = ConvexHull(np.vstack([np.zeros(d), ts])).volume / 2 ** d
            # each column is the upper triangle of t_e t_e^T
            A = (ts[:, :, None] * ts[:, None, :])[:, iu[0], iu[1]].T
            # a small ridge makes the fit unique, hence as symmetric as the stencil
            ridge = _RIDGE * np.linalg.norm(A, 2)
            Ar = np.vstack([A, ridge * np.eye(A.shape[1])])
            w, _ = nnls(Ar, np.concatenate([target * vol, np.zeros(A.shape[1])]))
            res = np.linalg.norm(A @ w - target * vol)
            memo[key] = (vol, w, res / (np.linalg.norm(target) * vol))
        vol, w, res = memo[key]
        worst = max(worst, res)
        cell[v] = vol
        half[np.arange(sl.start, sl.stop)[order]] = w
    vw = np.broadcast_to(np.asarray(H.volume_weight, dtype=float), (H.n_vertices,))
    rows = np.repeat(np.arange(H.n_vertices), np.diff(indptr))
    half *= vw[rows]
    # average the two endpoint fits of every edge
    W = sparse.csr_matrix((half, (rows, indices)), shape=(H.n_vertices,) * 2)
    u, v = H.edges[:, 0], H.edges[:, 1]
    cond = 0.5 * (np.asarray(W[u, v]).ravel() + np.asarray(W[v, u]).ravel())
    return cell * vw, cond, {"fit_residual": float(worst), "stencils": len(memo)}


_MASS_CACHE: dict = {}


def _cached_masses(H):
    key = H.surface_id
    if key not in _MASS_CACHE:
        if len(_MASS_CACHE) > 16:
            _MASS_CACHE.clear()
        _MASS_CACHE[key] = vertex_masses(H)
    return _MASS_CACHE[key]


def _laplacian(n, edges, w):
    u, v = edges[:, 0], edges[:, 1]
    L = sparse.coo_matrix((np.concatenate([-w, -w]), (np.concatenate([u, v]),
                                                      np.concatenate([v, u]))), shape=(n, n))
    deg = np.bincount(u, w, n) + np.bincount(v, w, n)
    return (L + sparse.diags(deg)).tocsr()


def _dirichlet_mask(H, band, outer_condition):
    mask = np.zeros(H.n_vertices, dtype=bool)
    if H.is_singular:
        mask |= multi_source(H.adjacency, H.sigma_idx, limit=band) <= band
    if outer_condition == "dirichlet":
        mask[H.outer_boundary] = True
    elif outer_condition != "neumann":
        raise SpectralError(f"unknown outer condition {outer_condition!r}")
    return mask


def assemble_forms(H: DiscreteHypersurface, skin: SkinField | None = None, band: float = 0.0,
                   outer_condition: str = "dirichlet", weight: np.ndarray | None = None
                   ) -> QuadraticForms:
    """Hardy numerator and denominator forms.

    Parameters
    ----------
    H : DiscreteHypersurface
    skin : SkinField
        Denominator weight <A>^2 (ignored when ``weight`` is given).
    band : float
        Vertices within graph distance ``band`` of the singular proxies are
        Dirichlet (the proxies themselves always are).
    outer_condition : {"dirichlet", "neumann"}
        Treatment of the outer truncation.
    weight : ndarray, optional
        Explicit pointwise denominator weight W.

    Raises
    ------
    SpectralError
        If no free vertex remains.
    """
    if band < 0:
        raise SpectralError("band must be non-negative")
    if weight is None:
        if skin is None:
            raise SpectralError("need a skin field or an explicit weight")
        if skin.surface_id != H.surface_id:
            raise SpectralError("skin field belongs to another surface")
        weight = skin.values ** 2
    m, cond, info = _cached_masses(H)
    dirichlet = _dirichlet_mask(H, band, outer_condition)
    if dirichlet.all():
        raise SpectralError(f"band {band:g} leaves no free vertex")
    N = _laplacian(H.n_vertices, H.edges, cond) + sparse.diags(m * H.a_norm ** 2)
    D = m * np.asarray(weight, dtype=float)
    return QuadraticForms(N=N.tocsr(), D=D, masses=m, conductances=cond, dirichlet=dirichlet,
                          band=float(band), outer_condition=outer_condition,
                          surface_id=H.surface_id, info=dict(info))


# ---------------------------------------------------------------------------
# eigenvalues


def rayleigh_quotient(forms: QuadraticForms, f: np.ndarray) -> float:
    """N(f)/D(f) for a full-length vertex function (Dirichlet entries zeroed)."""
    f = np.where(forms.dirichlet, 0.0, np.asarray(f, dtype=float))
    return float(f @ (forms.N @ f)) / float(f @ (forms.D * f))


def _factor(M):
    # symmetric ordering: far less fill than the default on these stencils
    return splu(M.tocsc(), permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})


def _smallest_pair(N, D, tol, maxiter, stage_tol=1e-2):
    """Inverse iteration for the smallest eigenpair of N x = lambda D x.

    Starts below the spectrum; once the relative residual drops below
    ``stage_tol`` the shift moves once to lambda - residual, which stays below
    the eigenvalue the iteration approaches, and the iteration continues there.
    """
    if np.any(D <= 0) or not np.all(np.isfinite(D)):
        raise SpectralError("denominator form is not positive definite on the free vertices")
    scale = float(np.max(N.diagonal() / D))
    sigma = -1e-8 * scale  # keeps N - sigma D definite when constants are in the kernel
    Dm = sparse.diags(D)
    lu = _factor(N - sigma * Dm)
    x = np.ones(N.shape[0])
    x /= np.sqrt(x @ (D * x))
    lam, res, shifted = np.inf, np.inf, False
    for it in range(1, maxiter + 1):
        y = lu.solve(D * x)
        x = y / np.sqrt(y @ (D * y))
        Nx = N @ x
        lam = float(x @ Nx)
        r = Nx - lam * D * x
        res = float(np.sqrt(r @ (r / D)))
        floor = max(abs(lam), 1e-12 * scale)
        if res <= tol * floor:
            return lam, x, it, res, True
        if not shifted and res <= stage_tol * floor and lam - res > sigma:
            sigma, shifted = lam - res, True
            lu = _factor(N - sigma * Dm)
    return lam, x, maxiter, res, False


def _solve(forms: QuadraticForms, tol, maxiter, refinement=None) -> SpectralReport:
    free = forms.free
    N = forms.N[free][:, free]
    lam, x, it, res, ok = _smallest_pair(N, forms.D[free], tol, maxiter)
    if not ok:
        raise SpectralError(f"inverse iteration did not converge in {maxiter} steps "
                            f"(residual {res:.3g})", residual=res)
    v = np.zeros(forms.N.shape[0])
    v[free] = x
    return SpectralReport(lambda_min=lam, iterations=it, residual=res, band=forms.band,
                          refinement=refinement, vector=v, converged=ok,
                          info={"free": int(free.size)})


def hardy_constant(forms: QuadraticForms, tol: float = 1e-10, maxiter: int = 2000,
                   refinement: str | None = None) -> SpectralReport:
    """Smallest eigenvalue of N v = lambda D v on the free vertices.

    Shifted inverse iteration from the all-ones vector; converged when the
    D^-1 norm of N v - lambda D v, for D-normalised v, is below ``tol`` times
    lambda.

    Raises
    ------
    SpectralError
        On non-convergence (``err.residual`` holds the last residual).
    """
    return _solve(forms, tol, maxiter, refinement)


def radial_hardy_oracle(n: int, kappa: float, alpha: float, r0: float, r1: float,
                        npts: int = 4000) -> float:
    """Hardy constant of radial functions on a cone of dimension ``n``.

    Minimizes int (f'^2 + kappa^2 f^2 / r^2) r^(n-1) dr over
    int (alpha + kappa)^2 f^2 / r^2 r^(n-1) dr with f(r0) = f(r1) = 0, by a
    three-point scheme on a uniform grid in log r (exact closed-form weights).
    Radial functions are admissible on the cone, so this bounds the cone's
    constant from above; the mesh value should sit within discretization
    error of it.
    """
    if not (0 < r0 < r1) or npts < 4:
        raise SpectralError("need 0 < r0 < r1 and at least 4 grid points")
    t = np.linspace(np.log(r0), np.log(r1), npts)
    h = t[1] - t[0]
    wm = np.exp((n - 2) * (t[:-1] + h / 2))
    w = np.exp((n - 2) * t[1:-1])
    diag = (wm[:-1] + wm[1:]) / h ** 2 + kappa ** 2 * w
    off = -wm[1:-1] / h ** 2
    s = 1.0 / ((alpha + kappa) * np.sqrt(w))
    ev = eigh_tridiagonal(diag * s * s, off * s[:-1] * s[1:], eigvals_only=True,
                          select="i", select_range=(0, 0))
    return float(ev[0])


def hardy_dist_variant(H: DiscreteHypersurface, band: float = 0.0,
                       outer_condition: str = "dirichlet", tol: float = 1e-10,
                       maxiter: int = 2000) -> SpectralReport:
    """Hardy constant with denominator weight 1/dist(., Sigma)^2."""
    if not H.is_singular:
        raise SpectralError("distance variant needs a singular set")
    dist = dist_to_sigma(H).values
    forms = assemble_forms(H, band=band, outer_condition=outer_condition, weight=1.0 / dist ** 2)
    return _solve(forms, tol, maxiter)


def neumann_ball_eigenvalue(H: DiscreteHypersurface, skin: SkinField, center: int, mu: float,
                            tol: float = 1e-10, maxiter: int = 2000) -> float:
    """Smallest eigenvalue of (N, D) on B_{mu alpha delta(center)}(center), free boundary.

    Raises
    ------
    SpectralError
        If the ball holds fewer than 4 vertices.
    """
    radius = mu * skin.alpha * skin.delta[center]
    idx, _ = local_dijkstra(H, [center], radius)
    if idx.size < 4:
        raise SpectralError(f"ball around {center} holds {idx.size} < 4 vertices")
    idx = np.sort(idx)
    m, cond, _ = _cached_masses(H)
    inside = np.zeros(H.n_vertices, dtype=bool)
    inside[idx] = True
    keep = inside[H.edges[:, 0]] & inside[H.edges[:, 1]]
    pos = np.full(H.n_vertices, -1, dtype=np.int64)
    pos[idx] = np.arange(idx.size)
    N = _laplacian(idx.size, pos[H.edges[keep]], cond[keep]) + sparse.diags(
        m[idx] * H.a_norm[idx] ** 2)
    lam, _, _, res, ok = _smallest_pair(N.tocsr(), m[idx] * skin.values[idx] ** 2, tol, maxiter)
    if not ok:
        raise SpectralError(f"ball eigenvalue did not converge (residual {res:.3g})", residual=res)
    return max(lam, 0.0) if abs(lam) <= tol * 10 else lam


# ---------------------------------------------------------------------------
# conformal metrics


def _conformal_distances(H, edge_weight, pairs):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    indptr, indices, data = H._csr
    rows = np.repeat(np.arange(H.n_vertices), np.diff(indptr))
    w = edge_weight(rows, indices, data)
    out = np.empty(len(pairs))
    inf_cap = np.full(H.n_vertices, np.inf)
    no_stop = np.zeros(H.n_vertices, dtype=bool)
    for s in np.unique(pairs[:, 0]):
        _, dist, _ = _dijkstra_kernel(indptr, indices, w, np.array([s]), np.zeros(1), np.inf,
                                      inf_cap, True, no_stop)
        sel = pairs[:, 0] == s
        out[sel] = dist[pairs[sel, 1]]
    return out


def skin_metric_distances(H: DiscreteHypersurface, skin: SkinField, pairs) -> np.ndarray:
    """Skin metric: shortest paths with edge weight len (<A>(u) + <A>(v)) / 2."""
    val = skin.values
    return _conformal_distances(H, lambda r, c, ln: ln * (val[r] + val[c]) / 2, pairs)


def quasi_hyperbolic_distances(H: DiscreteHypersurface, pairs) -> np.ndarray:
    """Quasi-hyperbolic metric: edge weight len / harmonic mean of dist(., Sigma)."""
    if not H.is_singular:
        raise SpectralError("quasi-hyperbolic distance needs a singular set")
    inv = 1.0 / dist_to_sigma(H).values
    return _conformal_distances(H, lambda r, c, ln: ln * (inv[r] + inv[c]) / 2, pairs)


def dyadic_growth(H: DiscreteHypersurface, ray: int = 0) -> np.ndarray:
    """Quasi-hyperbolic length per halving of r along one radial line of a cone.

    Pairs each ring with the ring closest to half its radius and returns
    k(x_i, x_j) * ln 2 / ln(r_i / r_j); the continuum value is ln 2.
    """
    if H.radius is None or not H.is_singular:
        raise SpectralError("dyadic growth needs a cone")
    m2 = H.n_vertices // H.params["radial_res"]
    line = np.arange(ray, H.n_vertices, m2)
    r = H.radius[line]
    pairs, ratios = [], []
    for i in range(len(line) - 1, 0, -1):
        j = int(np.argmin(np.abs(r[:i] - r[i] / 2)))
        if abs(np.log(r[i] / r[j]) - np.log(2.0)) > 0.1 * np.log(2.0):
            break
        pairs.append((int(line[i]), int(line[j])))
        ratios.append(np.log(r[i] / r[j]))
    if not pairs:
        raise SpectralError("mesh too coarse for a dyadic pair")
    k = quasi_hyperbolic_distances(H, pairs)
    return k * np.log(2.0) / np.array(ratios)


def four_point_delta(dist: np.ndarray, quadruple_budget: int = 20000) -> dict:
    """Largest four-point defect over sampled quadruples of a distance matrix.

    For (x, y, z, w) the three pair sums are sorted, and the defect is half
    the gap between the two largest.  All quadruples are used when they fit
    the budget; otherwise an unscrambled Halton sequence picks them.

    Returns
    -------
    dict
        ``delta``, ``quadruples`` and the ``worst`` index quadruple.
    """
    D = np.asarray(dist, dtype=float)
    k = D.shape[0]
    if k < 4:
        raise SpectralError("need at least 4 sample points")
    from math import comb
    if comb(k, 4) <= quadruple_budget:
        from itertools import combinations
        Q = np.array(list(combinations(range(k), 4)), dtype=np.int64)
    else:
        Q = np.floor(qmc.Halton(d=4, scramble=False).random(quadruple_budget + 1)[1:] * k)
        Q = Q.astype(np.int64)
        Q = Q[(Q[:, 0] != Q[:, 1]) & (Q[:, 0] != Q[:, 2]) & (Q[:, 0] != Q[:, 3])
              & (Q[:, 1] != Q[:, 2]) & (Q[:, 1] != Q[:, 3]) & (Q[:, 2] != Q[:, 3])]
    x, y, z, w = Q.T
    S = np.sort(np.stack([D[x, y] + D[z, w], D[x, z] + D[y, w], D[x, w] + D[y, z]]), axis=0)
    defect = (S[2] - S[1]) / 2
    i = int(np.argmax(defect)) if defect.size else 0
    return {"delta": float(defect[i]) if defect.size else 0.0, "quadruples": int(len(Q)),
            "worst": Q[i].tolist() if defect.size else None}
