"""JSON and CSV artifacts with fixed field order and atomic writes."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .cover import BallCover
from .skinfield import SkinField
from .surface import DiscreteHypersurface

__all__ = [
    "SchemaError",
    "atomic_write",
    "dump_json",
    "load_json",
    "file_hash",
    "surface_to_dict",
    "surface_from_dict",
    "skin_to_dict",
    "skin_from_dict",
    "cover_to_dict",
    "cover_from_dict",
    "certificate_to_dict",
    "emit_plot_data",
]


class SchemaError(ValueError):
    """Artifact of the wrong kind or with missing fields."""


def _plain(x):
    """numpy scalars and arrays to JSON-ready Python objects; inf/nan as strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def _num(x):
    if isinstance(x, str):
        return float(x)
    return x


def _floats(seq) -> np.ndarray:
    return np.array([_num(v) for v in seq], dtype=float)


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(path, obj: dict) -> None:
    atomic_write(path, json.dumps(_plain(obj), indent=1) + "\n")


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def load_json(path, artifact: str) -> dict:
    """Read an artifact and check its ``artifact`` tag."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing input file {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict) or data.get("artifact") != artifact:
        got = data.get("artifact") if isinstance(data, dict) else type(data).__name__
        raise SchemaError(f"{path}: expected a {artifact} artifact, found {got!r}")
    return data


# ---------------------------------------------------------------------------
# surfaces


def surface_to_dict(H: DiscreteHypersurface) -> dict:
    edges = [[int(i), int(j), float(w)] for (i, j), w in zip(H.edges, H.lengths)]
    return {
        "kind": H.kind,
        "dim": H.dim,
        "vertices": H.vertices,
        "edges": edges,
        "a_norm": H.a_norm,
        "sigma_proxy": [[int(i), float(o)] for i, o in zip(H.sigma_idx, H.sigma_offset)],
        "outer_boundary": H.outer_boundary,
        "scale": H.scale,
        "mesh_dim": H.mesh_dim,
        "radius": H.radius,
        "volume_weight": H.volume_weight,
        "params": H.params,
        "surface_id": H.surface_id,
        "artifact": "surface",
    }


def surface_from_dict(d: dict) -> DiscreteHypersurface:
    need = ("kind", "dim", "vertices", "edges", "a_norm", "sigma_proxy", "outer_boundary", "scale")
    miss = [k for k in need if k not in d]
    if miss:
        raise SchemaError(f"surface artifact lacks {', '.join(miss)}")
    E = np.array(d["edges"], dtype=float).reshape(-1, 3)
    sp = np.array(d["sigma_proxy"], dtype=float).reshape(-1, 2)
    H = DiscreteHypersurface(
        kind=d["kind"], dim=int(d["dim"]), vertices=np.array(d["vertices"], dtype=float),
        edges=E[:, :2].astype(np.int64), lengths=E[:, 2], a_norm=_floats(d["a_norm"]),
        sigma_idx=sp[:, 0].astype(np.int64), sigma_offset=sp[:, 1],
        outer_boundary=np.array(d["outer_boundary"], dtype=np.int64), scale=float(d["scale"]),
        mesh_dim=int(d.get("mesh_dim", 2)),
        radius=None if d.get("radius") is None else np.array(d["radius"], dtype=float),
        volume_weight=None if d.get("volume_weight") is None else _floats(d["volume_weight"]),
        params=d.get("params", {}))
    if "surface_id" in d and d["surface_id"] != H.surface_id:
        raise SchemaError("surface artifact is corrupted: content hash mismatch")
    return H


# ---------------------------------------------------------------------------
# skin fields and covers


def skin_to_dict(skin: SkinField) -> dict:
    return {
        "surface_id": skin.surface_id,
        "alpha": skin.alpha,
        "provenance": skin.provenance,
        "values": skin.values,
        "lipschitz_bound": skin.lipschitz_bound,
        "delta": skin.delta,
        "skin_id": skin.skin_id,
        "info": skin.info,
        "artifact": "skin",
    }


def skin_from_dict(d: dict) -> SkinField:
    for k in ("surface_id", "alpha", "provenance", "values", "lipschitz_bound", "delta"):
        if k not in d:
            raise SchemaError(f"skin artifact lacks {k}")
    sk = SkinField(alpha=float(d["alpha"]), values=_floats(d["values"]), delta=_floats(d["delta"]),
                   provenance=d["provenance"], lipschitz_bound=float(_num(d["lipschitz_bound"])),
                   surface_id=d["surface_id"], info=d.get("info", {}))
    if "skin_id" in d and d["skin_id"] != sk.skin_id:
        raise SchemaError("skin artifact is corrupted: content hash mismatch")
    return sk


def cover_to_dict(cover: BallCover) -> dict:
    return {
        "surface_id": cover.surface_id,
        "skin_id": cover.skin_id,
        "xi": cover.xi,
        "centers": cover.centers,
        "theta": cover.theta,
        "family": cover.family,
        "qt_margin": cover.qt_margin,
        "stats": cover.stats,
        "lipschitz": cover.lipschitz,
        "artifact": "cover",
    }


def cover_from_dict(d: dict) -> BallCover:
    for k in ("surface_id", "skin_id", "xi", "centers", "theta", "family"):
        if k not in d:
            raise SchemaError(f"cover artifact lacks {k}")
    stats = dict(d.get("stats", {}))
    if "histogram" in stats:
        stats["histogram"] = {int(k): v for k, v in stats["histogram"].items()}
    return BallCover(centers=np.array(d["centers"], dtype=np.int64), theta=_floats(d["theta"]),
                     xi=float(d["xi"]), family=np.array(d["family"], dtype=np.int64),
                     surface_id=d["surface_id"], skin_id=d["skin_id"],
                     lipschitz=float(d.get("lipschitz", 1.0)), qt_margin=d.get("qt_margin"),
                     stats=stats)


def certificate_to_dict(cert) -> dict:
    return {
        "surface_id": cert.surface_id,
        "p": cert.p,
        "q": cert.q,
        "method": cert.method,
        "path": cert.path,
        "length": cert.length,
        "c_quasi": cert.c_quasi,
        "c_cone": cert.c_cone,
        "c": cert.c,
        "cert_id": cert.cert_id,
    }


# ---------------------------------------------------------------------------
# plot data

_CSV_COLUMNS = {
    "radial": ("vertex", "r", "a_norm", "value", "delta"),
    "scatter": ("pair", "d", "length", "c"),
    "band-sweep": ("band", "lambda"),
    "refinement": ("refinement", "lambda"),
    "metric": ("p", "q", "skin_distance", "quasi_hyperbolic"),
}


def emit_plot_data(rows, kind: str) -> str:
    """CSV text with the fixed column order of ``kind``.

    ``rows`` is an iterable of dicts keyed by the column names.
    """
    if kind not in _CSV_COLUMNS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {sorted(_CSV_COLUMNS)}")
    cols = _CSV_COLUMNS[kind]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_csv_cell(r.get(c, "")) for c in cols])
    return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v
