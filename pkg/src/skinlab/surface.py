"""Discretized hypersurfaces with a marked singular set.

A surface is a vertex-weighted metric graph.  Edge lengths are intrinsic
(geodesic) lengths of the underlying smooth surface, snapped to a dyadic grid
so that path sums are exact in double precision.  That makes shortest-path
distances independent of summation order, which several exact identities
downstream rely on.
"""
from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from numba import njit
from scipy import sparse
from scipy.sparse import csgraph

__all__ = [
    "DiscreteHypersurface",
    "ScalarField",
    "SurfaceError",
    "generate_lawson_cone",
    "generate_link",
    "generate_hyperplane",
    "generate_catenoid",
    "scale_surface",
    "geodesic_distance",
    "dist_to_sigma",
    "second_fundamental_oracle",
    "lawson_kappa",
    "check_connectivity",
    "lawson_parametrization",
    "sphere_parametrization",
    "catenoid_parametrization",
]


class SurfaceError(ValueError):
    """Invalid surface construction or query."""


# bits of relative resolution kept for edge lengths
_SNAP_BITS = 40


def _snap_quantum(lengths: np.ndarray) -> float:
    # power of two tied to the largest length, so scaling by 2^k commutes with snapping
    _, e = np.frexp(np.max(lengths))
    return float(np.ldexp(1.0, int(e) - _SNAP_BITS))


def snap_lengths(lengths: np.ndarray) -> np.ndarray:
    """Round lengths to a dyadic grid (relative resolution 2^-40)."""
    lengths = np.asarray(lengths, dtype=float)
    if lengths.size == 0:
        return lengths
    qu = _snap_quantum(lengths)
    out = np.round(lengths / qu) * qu
    return np.maximum(out, qu)


@dataclass(frozen=True, eq=False)
class DiscreteHypersurface:
    """Metric graph discretizing H minus its singular set.

    Attributes
    ----------
    kind : str
        Generator tag.
    dim : int
        Intrinsic dimension n of the hypersurface.
    vertices : ndarray (V, n+1)
        Ambient positions.
    edges : ndarray (E, 2) of int
        Vertex pairs with ``edges[:, 0] < edges[:, 1]``.
    lengths : ndarray (E,)
        Intrinsic edge lengths.
    a_norm : ndarray (V,)
        Second fundamental form norm |A|.
    sigma_idx, sigma_offset : ndarray
        Proxy vertices next to the excised singular set and their analytic
        distance to it.
    outer_boundary : ndarray of int
        Truncation vertices excluded from statistics.
    scale : float
        Cumulative rescaling factor.
    mesh_dim : int
        Dimension of the meshed slice (may be smaller than ``dim``).
    radius : ndarray or None
        Distance to the cone tip, for cones.
    volume_weight : ndarray (V,)
        Density factor converting slice volume into n-volume (r^(n - mesh_dim)
        on cones, 1 elsewhere).
    params : dict
        Generator parameters.
    """

    kind: str
    dim: int
    vertices: np.ndarray
    edges: np.ndarray
    lengths: np.ndarray
    a_norm: np.ndarray
    sigma_idx: np.ndarray
    sigma_offset: np.ndarray
    outer_boundary: np.ndarray
    scale: float = 1.0
    mesh_dim: int = 2
    radius: np.ndarray | None = None
    volume_weight: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.volume_weight is None:
            object.__setattr__(self, "volume_weight", np.ones(self.n_vertices))
        for name in ("vertices", "lengths", "a_norm", "sigma_offset", "volume_weight"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("edges", "sigma_idx", "outer_boundary"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.radius is not None:
            r = np.asarray(self.radius, dtype=float)
            r.setflags(write=False)
            object.__setattr__(self, "radius", r)
        if self.edges.ndim != 2 or (self.edges.size and self.edges.shape[1] != 2):
            raise SurfaceError("edges must be an (E, 2) array")
        if np.any(self.lengths <= 0):
            raise SurfaceError("edge lengths must be positive")
        if np.any(self.a_norm < 0) or np.any(~np.isfinite(self.a_norm)):
            raise SurfaceError("a_norm must be finite and non-negative")
        if len(self.a_norm) != self.n_vertices:
            raise SurfaceError("a_norm length does not match vertex count")

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def is_singular(self) -> bool:
        return self.sigma_idx.size > 0

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric CSR matrix of edge lengths."""
        V = self.n_vertices
        i, j = self.edges[:, 0], self.edges[:, 1]
        A = sparse.coo_matrix(
            (np.concatenate([self.lengths, self.lengths]),
             (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(V, V)).tocsr()
        A.sort_indices()
        return A

    @cached_property
    def excluded_mask(self) -> np.ndarray:
        """True on vertices excluded from sup/inf statistics."""
        m = np.zeros(self.n_vertices, dtype=bool)
        m[self.outer_boundary] = True
        return m

    @cached_property
    def surface_id(self) -> str:
        h = hashlib.sha256()
        h.update(self.kind.encode())
        for arr in (self.vertices, self.edges, self.lengths, self.a_norm,
                    self.sigma_idx, self.sigma_offset, self.outer_boundary):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(np.float64(self.scale).tobytes())
        return h.hexdigest()[:16]

    @cached_property
    def _csr(self):
        A = self.adjacency
        return (A.indptr.astype(np.int64), A.indices.astype(np.int64),
                np.ascontiguousarray(A.data, dtype=float))

    @cached_property
    def _no_cap(self):
        return np.full(self.n_vertices, np.inf)

    @cached_property
    def _no_stop(self):
        return np.zeros(self.n_vertices, dtype=np.bool_)

    def neighbors(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        A = self.adjacency
        sl = slice(A.indptr[v], A.indptr[v + 1])
        return A.indices[sl], A.data[sl]


@dataclass(frozen=True)
class ScalarField:
    """Per-vertex values on a surface."""

    values: np.ndarray
    surface_id: str
    name: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(np.isnan(v)):
            raise SurfaceError(f"field {self.name!r} contains NaN")
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]


# ---------------------------------------------------------------------------
# parametrizations and the curvature oracle


def _sphere_coords(angles: np.ndarray) -> np.ndarray:
    """Unit sphere S^k in R^{k+1} from k hyperspherical angles."""
    k = len(angles)
    out = np.ones(k + 1)
    s = 1.0
    for i, t in enumerate(angles):
        out[i] = s * np.cos(t)
        s = s * np.sin(t)
    out[k] = s
    return out


def sphere_parametrization(n: int, R: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Round sphere S^n(R) in R^{n+1}, parametrized by n angles."""
    return lambda u: R * _sphere_coords(np.asarray(u, dtype=float))


def lawson_parametrization(p: int, q: int) -> Callable[[np.ndarray], np.ndarray]:
    """Cone over S^p(a) x S^q(b) in R^{p+q+2}; coordinates (r, p angles, q angles)."""
    a = np.sqrt(p / (p + q))
    b = np.sqrt(q / (p + q))

    def f(u):
        u = np.asarray(u, dtype=float)
        r = u[0]
        return r * np.concatenate([a * _sphere_coords(u[1:1 + p]),
                                   b * _sphere_coords(u[1 + p:])])
    return f


def catenoid_parametrization(c: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Catenoid with neck radius c; coordinates (u, v), axis along v."""
    def f(w):
        u, v = w
        ch = c * np.cosh(v / c)
        return np.array([ch * np.cos(u), ch * np.sin(u), v])
    return f


def _shape_norm(f, u: np.ndarray, h: float) -> float:
    n = len(u)
    E = np.eye(n) * h
    J = np.stack([(f(u + E[i]) - f(u - E[i])) / (2 * h) for i in range(n)], axis=1)
    g = J.T @ J
    if np.linalg.cond(g) > 1e10:
        raise SurfaceError("ill-conditioned metric at the oracle point")
    U, _, _ = np.linalg.svd(J, full_matrices=True)
    N = U[:, -1]
    f0 = f(u)
    hh = np.empty((n, n))
    for i in range(n):
        hh[i, i] = (f(u + E[i]) - 2 * f0 + f(u - E[i])) @ N / h**2
        for j in range(i + 1, n):
            d = (f(u + E[i] + E[j]) - f(u + E[i] - E[j])
                 - f(u - E[i] + E[j]) + f(u - E[i] - E[j])) @ N / (4 * h**2)
            hh[i, j] = hh[j, i] = d
    # principal curvatures = generalized eigenvalues of (h, g)
    S = np.linalg.solve(g, hh)
    k = np.linalg.eigvals(S).real
    return float(np.sqrt(np.sum(k**2)))


def second_fundamental_oracle(param: Callable[[np.ndarray], np.ndarray],
                              point: Sequence[float],
                              steps: Iterable[float] | None = None) -> float:
    """|A| of a parametrized hypersurface by finite differences.

    The first fundamental form comes from central differences of the
    parametrization, the normal from the SVD of the Jacobian, and the second
    fundamental form from second differences projected on the normal.  The
    step size is swept and the value at the most stable step is returned.

    Parameters
    ----------
    param : callable
        Map R^n -> R^{n+1}, twice differentiable near ``point``.
    point : sequence of float
        Parameter value.
    steps : iterable of float, optional
        Step sizes to try; default is a geometric sweep 1e-2 .. 1e-5.

    Returns
    -------
    float
    """
    u = np.asarray(point, dtype=float)
    if steps is None:
        steps = np.geomspace(1e-2, 1e-5, 13)
    vals = np.array([_shape_norm(param, u, h) for h in steps])
    scale = max(np.max(np.abs(vals)), 1e-300)
    jumps = np.abs(np.diff(vals))
    if np.all(vals < 1e-7 * max(1.0, scale)):
        return 0.0
    i = int(np.argmin(jumps))
    return float(0.5 * (vals[i] + vals[i + 1]))


@lru_cache(maxsize=None)
def lawson_kappa(p: int, q: int) -> float:
    """|A| of the Lawson cone at radius 1, from the finite-difference oracle."""
    # generic point away from the coordinate singularities of the angle charts
    u = np.concatenate([[1.0], np.full(p, 0.9), np.full(q, 1.1)])
    return second_fundamental_oracle(lawson_parametrization(p, q), u)


# ---------------------------------------------------------------------------
# generators


def _grid_edges(index: np.ndarray, offsets: Iterable[tuple[int, ...]],
                periodic: Sequence[bool]) -> np.ndarray:
    """Edges of a structured grid for the given neighbour offsets."""
    shape = index.shape
    pairs = []
    for off in offsets:
        src = [slice(None)] * len(shape)
        dst = [slice(None)] * len(shape)
        roll_axes = []
        ok = True
        for ax, o in enumerate(off):
            if o == 0:
                continue
            if periodic[ax]:
                roll_axes.append((ax, o))
            else:
                if o >= shape[ax]:
                    ok = False
                src[ax] = slice(0, shape[ax] - o) if o > 0 else slice(-o, None)
                dst[ax] = slice(o, None) if o > 0 else slice(0, shape[ax] + o)
        if not ok:
            continue
        target = index
        for ax, o in roll_axes:
            target = np.roll(target, -o, axis=ax)
        a = index[tuple(src)].ravel()
        b = target[tuple(dst)].ravel()
        pairs.append(np.stack([a, b], axis=1))
    e = np.concatenate(pairs)
    e = e[e[:, 0] != e[:, 1]]
    e = np.sort(e, axis=1)
    e = np.unique(e, axis=0)
    return e


def _half_offsets(ndim: int) -> list[tuple[int, ...]]:
    """Neighbour offsets in {-1,0,1}^ndim, one per +/- pair."""
    out = []
    for off in np.ndindex(*([3] * ndim)):
        o = tuple(int(x) - 1 for x in off)
        if any(o) and o > tuple(-x for x in o):
            out.append(o)
    return out


def _check_res(angular_res: int):
    if angular_res < 3:
        raise SurfaceError("angular resolution must be at least 3")


def _torus_step(delta_t, delta_p, a, b, res):
    dt = 2 * np.pi / res
    return np.sqrt((a * delta_t * dt) ** 2 + (b * delta_p * dt) ** 2)


def generate_lawson_cone(p: int = 3, q: int = 3, r_min: float = 0.05, r_max: float = 4.0,
                         angular_res: int = 16, radial_res: int = 81) -> DiscreteHypersurface:
    """Truncated Lawson cone over S^p(a) x S^q(b).

    The cone is n = p+q+1 dimensional.  It is meshed along the cone over the
    totally geodesic flat torus S^1(a) x S^1(b) of the link, which carries the
    intrinsic distances of the full cone; the remaining n-3 directions enter
    through the volume density r^(n-3).  Radial samples are geometric, and
    every vertex is joined to its 26 grid neighbours by exact cone geodesics.

    Parameters
    ----------
    p, q : int
        Sphere dimensions (>= 1).
    r_min, r_max : float
        Radial truncation; the ring at r_min is the singular-set proxy.
    angular_res : int
        Samples per circle factor.
    radial_res : int
        Number of radial rings.
    """
    if p < 1 or q < 1:
        raise SurfaceError("p and q must be >= 1")
    _check_res(angular_res)
    if radial_res < 2:
        raise SurfaceError("radial resolution must be at least 2")
    if not (0 < r_min < r_max):
        raise SurfaceError("need 0 < r_min < r_max")
    a = np.sqrt(p / (p + q))
    b = np.sqrt(q / (p + q))
    n = p + q + 1
    kappa = lawson_kappa(p, q)
    ratio = r_max / r_min
    radii = r_min * ratio ** (np.arange(radial_res) / (radial_res - 1))
    radii[-1] = r_max
    m = angular_res
    th = 2 * np.pi * np.arange(m) / m
    R, T, P = np.meshgrid(radii, th, th, indexing="ij")
    V = R.size
    index = np.arange(V).reshape(R.shape)
    pos = np.zeros((V, p + q + 2))
    pos[:, 0] = (R * a * np.cos(T)).ravel()
    pos[:, 1] = (R * a * np.sin(T)).ravel()
    pos[:, p + 1] = (R * b * np.cos(P)).ravel()
    pos[:, p + 2] = (R * b * np.sin(P)).ravel()

    pieces = []
    for off in _half_offsets(3):
        e = _grid_edges(index, [off], (False, True, True))
        r1 = radii[e[:, 0] // (m * m)]
        r2 = radii[e[:, 1] // (m * m)]
        dx = _torus_step(abs(off[1]), abs(off[2]), a, b, m)
        # cone geodesic: law of cosines, written to avoid cancellation
        L = np.sqrt((r2 - r1) ** 2 + 4 * r1 * r2 * np.sin(dx / 2) ** 2)
        pieces.append((e, L))
    edges = np.concatenate([e for e, _ in pieces])
    lengths = np.concatenate([L for _, L in pieces])
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges, lengths = edges[order], lengths[order]
    lengths = snap_lengths(lengths)

    r = R.ravel()
    a_norm = kappa / r
    inner = index[0].ravel()
    outer = index[-1].ravel()
    return DiscreteHypersurface(
        kind=f"lawson_cone({p},{q})", dim=n, vertices=pos, edges=edges, lengths=lengths,
        a_norm=a_norm, sigma_idx=inner, sigma_offset=np.full(inner.size, r_min),
        outer_boundary=outer, scale=1.0, mesh_dim=3, radius=r,
        volume_weight=r ** (n - 3),
        params=dict(p=p, q=q, r_min=r_min, r_max=r_max, angular_res=angular_res,
                    radial_res=radial_res, kappa=kappa, a=a, b=b))


def generate_link(p: int = 3, q: int = 3, angular_res: int = 16) -> DiscreteHypersurface:
    """Link S^p(a) x S^q(b) of the Lawson cone, meshed along its flat torus.

    Edge lengths are intrinsic product-metric geodesics; ``a_norm`` is the
    cone curvature at radius 1, constant over the link.
    """
    if p < 1 or q < 1:
        raise SurfaceError("p and q must be >= 1")
    _check_res(angular_res)
    a = np.sqrt(p / (p + q))
    b = np.sqrt(q / (p + q))
    kappa = lawson_kappa(p, q)
    m = angular_res
    th = 2 * np.pi * np.arange(m) / m
    T, P = np.meshgrid(th, th, indexing="ij")
    index = np.arange(m * m).reshape(m, m)
    pos = np.zeros((m * m, p + q + 2))
    pos[:, 0] = a * np.cos(T).ravel()
    pos[:, 1] = a * np.sin(T).ravel()
    pos[:, p + 1] = b * np.cos(P).ravel()
    pos[:, p + 2] = b * np.sin(P).ravel()
    pieces = []
    for off in _half_offsets(2):
        e = _grid_edges(index, [off], (True, True))
        pieces.append((e, np.full(len(e), _torus_step(abs(off[0]), abs(off[1]), a, b, m))))
    edges = np.concatenate([e for e, _ in pieces])
    lengths = np.concatenate([L for _, L in pieces])
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges, lengths = edges[order], snap_lengths(lengths[order])
    empty = np.zeros(0, dtype=np.int64)
    return DiscreteHypersurface(
        kind=f"link({p},{q})", dim=p + q, vertices=pos, edges=edges, lengths=lengths,
        a_norm=np.full(m * m, kappa), sigma_idx=empty, sigma_offset=np.zeros(0),
        outer_boundary=empty, scale=1.0, mesh_dim=2, radius=np.ones(m * m),
        params=dict(p=p, q=q, angular_res=angular_res, kappa=kappa, a=a, b=b))


def generate_hyperplane(extent: float = 1.0, res: int = 33) -> DiscreteHypersurface:
    """Flat square patch [0, extent]^2 in R^3 with an 8-neighbour grid."""
    if res < 3:
        raise SurfaceError("resolution must be at least 3")
    if extent <= 0:
        raise SurfaceError("extent must be positive")
    x = np.linspace(0.0, extent, res)
    X, Y = np.meshgrid(x, x, indexing="ij")
    index = np.arange(res * res).reshape(res, res)
    pos = np.stack([X.ravel(), Y.ravel(), np.zeros(res * res)], axis=1)
    edges = _grid_edges(index, _half_offsets(2), (False, False))
    lengths = snap_lengths(np.linalg.norm(pos[edges[:, 0]] - pos[edges[:, 1]], axis=1))
    empty = np.zeros(0, dtype=np.int64)
    return DiscreteHypersurface(
        kind="hyperplane", dim=2, vertices=pos, edges=edges, lengths=lengths,
        a_norm=np.zeros(res * res), sigma_idx=empty, sigma_offset=np.zeros(0),
        outer_boundary=empty, scale=1.0, mesh_dim=2,
        params=dict(extent=extent, res=res))


def generate_catenoid(height: float = 1.5, res: int = 32, neck: float = 1.0) -> DiscreteHypersurface:
    """Catenoid patch |v| <= height with neck radius ``neck``.

    A regular, non-flat minimal surface (not globally area minimizing); used
    as a smoke test.  Edge lengths are chords, |A| comes from the oracle.
    """
    if res < 3:
        raise SurfaceError("resolution must be at least 3")
    nu, nv = res, res + 1 - res % 2  # odd count puts a ring on the neck
    u = 2 * np.pi * np.arange(nu) / nu
    v = np.linspace(-height, height, nv)
    U, W = np.meshgrid(u, v, indexing="ij")
    f = catenoid_parametrization(neck)
    pos = np.stack([f((uu, vv)) for uu, vv in zip(U.ravel(), W.ravel())])
    index = np.arange(nu * nv).reshape(nu, nv)
    edges = _grid_edges(index, _half_offsets(2), (True, False))
    lengths = snap_lengths(np.linalg.norm(pos[edges[:, 0]] - pos[edges[:, 1]], axis=1))
    # |A| depends only on v; evaluate the oracle once per ring
    ring = np.array([second_fundamental_oracle(f, (0.3, vv)) for vv in v])
    a_norm = np.tile(ring, nu)
    empty = np.zeros(0, dtype=np.int64)
    outer = np.concatenate([index[:, 0], index[:, -1]])
    return DiscreteHypersurface(
        kind="catenoid", dim=2, vertices=pos, edges=edges, lengths=lengths,
        a_norm=a_norm, sigma_idx=empty, sigma_offset=np.zeros(0),
        outer_boundary=np.sort(outer), scale=1.0, mesh_dim=2,
        params=dict(height=height, res=res, neck=neck))


def scale_surface(H: DiscreteHypersurface, lam: float) -> DiscreteHypersurface:
    """Rescale by ``lam``: lengths and offsets times lam, |A| divided by lam."""
    lam = float(lam)
    if not np.isfinite(lam) or lam <= 0:
        raise SurfaceError("scale factor must be finite and positive")
    if lam == 1.0:
        return H
    return replace(
        H, vertices=H.vertices * lam, lengths=H.lengths * lam, a_norm=H.a_norm / lam,
        sigma_offset=H.sigma_offset * lam, scale=H.scale * lam,
        radius=None if H.radius is None else H.radius * lam,
        volume_weight=H.volume_weight * lam ** (H.dim - H.mesh_dim))


# ---------------------------------------------------------------------------
# distances


def _as_index(sources) -> np.ndarray:
    s = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    if s.size == 0:
        raise SurfaceError("source set is empty")
    return s


def multi_source(A: sparse.csr_matrix, sources, limit: float = np.inf) -> np.ndarray:
    """Distance to the nearest source on a CSR length graph (+inf if unreachable)."""
    return csgraph.dijkstra(A, directed=False, indices=_as_index(sources),
                            min_only=True, limit=limit)


@njit(cache=True)
def _dijkstra_kernel(indptr, indices, data, sources, init, limit, cap, closed, stop):
    V = indptr.size - 1
    dist = np.full(V, np.inf)
    pred = np.full(V, -1, np.int64)
    done = np.zeros(V, np.bool_)
    order = np.empty(V, np.int64)
    heap = [(0.0, np.int64(0))]
    heap.pop()
    for k in range(sources.size):
        s = sources[k]
        if init[k] < dist[s]:
            dist[s] = init[k]
            heapq.heappush(heap, (init[k], s))
    n = 0
    while len(heap) > 0:
        d, v = heapq.heappop(heap)
        if done[v] or d > dist[v]:
            continue
        done[v] = True
        order[n] = v
        n += 1
        if stop[v]:
            break
        for k in range(indptr[v], indptr[v + 1]):
            w = indices[k]
            if done[w]:
                continue
            nd = d + data[k]
            ok = nd <= limit if closed else nd < limit
            if ok and nd <= cap[w] and nd < dist[w]:
                dist[w] = nd
                pred[w] = v
                heapq.heappush(heap, (nd, w))
    return order[:n], dist, pred


def dijkstra(H: DiscreteHypersurface, sources, limit: float = np.inf, init=None,
             allowed: np.ndarray | None = None, closed: bool = True,
             stop: np.ndarray | None = None, cap: np.ndarray | None = None):
    """Truncated multi-source Dijkstra with optional start offsets and vertex mask.

    Vertices are settled in (distance, index) order, so the visiting order,
    the distances and the predecessor tree are deterministic.

    Parameters
    ----------
    H : DiscreteHypersurface
    sources : array of int
    limit : float
        Search radius; vertices farther away stay at +inf.
    init : array of float, optional
        Start distance of each source (default 0).
    allowed : bool array, optional
        Vertices the search may enter (sources are always allowed).
    closed : bool
        Keep vertices at distance exactly ``limit``.
    stop : bool array, optional
        Halt as soon as a vertex with ``stop[v]`` is settled.
    cap : float array, optional
        A vertex is entered only at distance <= cap[v]; combined with ``allowed``.

    Returns
    -------
    order : ndarray
        Settled vertices in settling order.
    dist : ndarray (V,)
    pred : ndarray (V,)
        Predecessor on a shortest path, -1 for sources and unreached vertices.
    """
    src = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    if init is None:
        init = np.zeros(src.size)
    if cap is None:
        cap = H._no_cap if allowed is None else np.where(allowed, np.inf, -np.inf)
    elif allowed is not None:
        cap = np.where(allowed, cap, -np.inf)
    if stop is None:
        stop = H._no_stop
    indptr, indices, data = H._csr
    return _dijkstra_kernel(indptr, indices, data, src, np.asarray(init, dtype=float),
                            float(limit), np.asarray(cap, dtype=float), bool(closed), stop)


def local_dijkstra(H: DiscreteHypersurface, sources, limit: float,
                   closed: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Vertices of the ball of radius ``limit`` around ``sources`` and their distances,
    sorted by (distance, index)."""
    order, dist, _ = dijkstra(H, sources, limit, closed=closed)
    return order, dist[order]


def shortest_path(pred: np.ndarray, target: int) -> list[int]:
    """Walk a predecessor array back from ``target`` to its source."""
    path = [int(target)]
    while pred[path[-1]] >= 0:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def geodesic_distance(H: DiscreteHypersurface, sources) -> ScalarField:
    """Shortest-path distance from a vertex set (+inf on unreachable vertices)."""
    s = _as_index(sources)
    if s.min() < 0 or s.max() >= H.n_vertices:
        raise SurfaceError("source index out of range")
    return ScalarField(multi_source(H.adjacency, s), H.surface_id, "geodesic_distance")


def offset_distance(A: sparse.csr_matrix, sources: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """min over sources of (offset + graph distance), via a virtual root."""
    V = A.shape[0]
    root = sparse.csr_matrix(
        (np.asarray(offsets, dtype=float), (np.zeros(len(sources), dtype=np.int64), sources)),
        shape=(1, V))
    # a zero offset would vanish from the sparse pattern; nudge to the smallest subnormal
    root.data = np.where(root.data == 0, np.nextafter(0, 1), root.data)
    B = sparse.bmat([[A, root.T], [root, None]], format="csr")
    d = csgraph.dijkstra(B, directed=False, indices=V)[:V]
    d[sources[np.asarray(offsets) == 0]] = 0.0
    return d


def dist_to_sigma(H: DiscreteHypersurface) -> ScalarField:
    """Distance to the singular set: graph distance to a proxy plus its offset."""
    if not H.is_singular:
        return ScalarField(np.full(H.n_vertices, np.inf), H.surface_id, "dist_to_sigma")
    d = offset_distance(H.adjacency, H.sigma_idx, H.sigma_offset)
    return ScalarField(d, H.surface_id, "dist_to_sigma")


def check_connectivity(H: DiscreteHypersurface, exclude=()) -> tuple[bool, list[int]]:
    """Connectivity of the graph with ``exclude`` removed.

    Returns
    -------
    connected : bool
    sizes : list of int
        Component sizes, largest first.
    """
    keep = np.ones(H.n_vertices, dtype=bool)
    ex = np.asarray(list(exclude) if not isinstance(exclude, np.ndarray) else exclude,
                    dtype=np.int64)
    keep[ex] = False
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        return True, []
    sub = H.adjacency[idx][:, idx]
    nc, labels = csgraph.connected_components(sub, directed=False)
    sizes = sorted(np.bincount(labels, minlength=nc).tolist(), reverse=True)
    return nc == 1, sizes


def ball_batches(H: DiscreteHypersurface, centers, radii, closed: bool = True):
    """Yield (position, vertex indices, distances) for the balls B_radius(center)."""
    centers = np.asarray(centers, dtype=np.int64)
    radii = np.broadcast_to(np.asarray(radii, dtype=float), centers.shape)
    for j, (c, r) in enumerate(zip(centers, radii)):
        idx, d = local_dijkstra(H, [c], float(r), closed=closed)
        yield j, idx, d
