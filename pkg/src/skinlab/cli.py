"""Command line front end.

Every subcommand reads its inputs from the output directory, writes JSON (and
CSV plot data) back into it and prints one summary line.  Exit codes: 0 when
all checks pass, 2 when a check fails, 1 on errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import io as sio
from .cover import (CoverError, QTError, build_skin_cover, covering_number_stats, qt_perturb,
                    tube_opening_check,
                    verify_cover, verify_qt)
from .skinfield import (ORACLE_CAP, SkinError, brute_force_skin_oracle, metric_skin_transform,
                        regularity_scale, verify_axioms, whitney_smooth)
from .spectral import (SpectralError, assemble_forms, dyadic_growth, four_point_delta,
                       hardy_constant, hardy_dist_variant, quasi_hyperbolic_distances,
                       radial_hardy_oracle, rayleigh_quotient, skin_metric_distances)
from .surface import (SurfaceError, check_connectivity, dist_to_sigma, generate_catenoid,
                      generate_hyperplane, generate_lawson_cone, generate_link, scale_surface)
from .uniformity import (DomainError, UniformityError, blow_up_invariance_check, bubbled_hull,
                         build_link_space, singular_endpoint_check, skin_uniform_curve,
                         verify_domain)

__all__ = ["RunConfig", "CLIError", "main", "run_subcommand"]

SUBCOMMANDS = ("generate", "skin", "axioms", "cover", "qt", "smooth", "curve", "domain",
               "hardy", "metric", "hyperbolicity", "report")

SCALINGS = (0.5, 2.0, 8.0)
ALPHA_SWEEP = (0.01, 0.1, 1.0, 10.0, 100.0)


class CLIError(Exception):
    """Invalid invocation or configuration; exit code 1."""


class CheckFailed(Exception):
    """A verification did not pass; exit code 2."""


@dataclass
class RunConfig:
    """Run parameters; ``--config`` supplies a JSON object of these fields and flags override it."""

    shape: str = "lawson"
    p: int = 3
    q: int = 3
    r_min: float = 0.05
    r_max: float = 4.0
    angular_res: int = 16
    radial_res: int = 81
    extent: float = 1.0
    res: int = 33
    height: float = 1.5
    alphas: list = field(default_factory=lambda: [1.0])
    xi: float = 0.05
    xi_max: float | None = 0.5
    tau_target: float = 0.05
    bands: list = field(default_factory=lambda: [0.0, 0.05, 0.1, 0.2])
    outer_condition: str = "dirichlet"
    pairs: list = field(default_factory=list)
    n_pairs: int = 100
    method: str = "constrained_search"
    a_frac: float = 0.1
    pair_budget: int = 16
    link_budget: int = 64
    samples: int = 24
    quadruple_budget: int = 20000
    tolerances: dict = field(default_factory=lambda: {
        "lipschitz": 0.0, "scaling": 1e-9, "oracle": 1e-12, "closed_form": 0.05,
        "limits": 0.05, "hardy": 1e-10, "hardy_drift": 0.10, "hardy_oracle": 0.05,
        "curve_scaling": 1e-6, "kappa_spread": 3.0, "dyadic": 0.10})
    deterministic: bool = True
    out: str = "skinlab_out"

    def validate(self) -> "RunConfig":
        checks = [
            (self.shape in ("lawson", "link", "hyperplane", "catenoid"), "shape"),
            (self.p >= 1 and self.q >= 1, "p, q >= 1"),
            (0 < self.r_min < self.r_max, "0 < r_min < r_max"),
            (self.angular_res >= 4 and self.radial_res >= 3 and self.res >= 3, "resolutions"),
            (self.extent > 0 and self.height > 0, "extent, height > 0"),
            (len(self.alphas) >= 1 and all(0 < a < np.inf for a in self.alphas), "alphas > 0"),
            (0 < self.xi < 1, "0 < xi < 1"),
            (self.xi_max is None or self.xi_max > 0, "xi_max > 0"),
            (0 < self.tau_target < 1, "0 < tau_target < 1"),
            (len(self.bands) >= 1 and all(b >= 0 for b in self.bands), "bands >= 0"),
            (self.outer_condition in ("dirichlet", "neumann"), "outer_condition"),
            (self.method in ("pipeline", "constrained_search"), "method"),
            (0 < self.a_frac <= 1, "0 < a_frac <= 1"),
            (min(self.n_pairs, self.pair_budget, self.link_budget) >= 1, "budgets >= 1"),
            (self.samples >= 4 and self.quadruple_budget >= 1, "samples >= 4"),
            (all(v >= 0 for v in self.tolerances.values()), "tolerances >= 0"),
            (self.deterministic is True, "determinism cannot be switched off"),
        ]
        bad = [name for ok, name in checks if not ok]
        if bad:
            raise CLIError(f"invalid configuration: {', '.join(bad)}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise CLIError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = sorted(set(d) - known)
        if extra:
            raise CLIError(f"unknown configuration keys: {', '.join(extra)}")
        d = dict(d)
        if "tolerances" in d:
            d["tolerances"] = {**cls().tolerances, **d["tolerances"]}
        try:
            return cls(**d).validate()
        except TypeError as exc:
            raise CLIError(f"invalid configuration: {exc}") from None

    def tol(self, key: str) -> float:
        return float(self.tolerances[key])


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message)


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated number list: {text!r}")


def _pairs(text):
    try:
        return [[int(a) for a in x.split(":")] for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"pairs must look like 1:2,3:4, got {text!r}")


def _parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields")
    common.add_argument("--out", help="artifact directory")
    ap = _Parser(prog="skinlab", description="Skin structures on discretized hypersurfaces.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help):
        return sub.add_parser(name, help=help, parents=[common])

    g = add("generate", "generate a surface")
    g.add_argument("--shape", choices=["lawson", "link", "hyperplane", "catenoid"])
    for name, typ in (("p", int), ("q", int), ("r-min", float), ("r-max", float),
                      ("angular-res", int), ("radial-res", int), ("extent", float),
                      ("res", int), ("height", float)):
        g.add_argument(f"--{name}", type=typ)
    s = add("skin", "exact metric skin transform")
    s.add_argument("--alpha", dest="alphas", type=_floats, help="alpha, or a comma list")
    a = add("axioms", "skin axioms and transform checks")
    a.add_argument("--alpha", dest="alphas", type=_floats)
    c = add("cover", "skin adapted cover")
    c.add_argument("--xi", type=float)
    c.add_argument("--xi-max", type=float)
    t = add("qt", "QT perturbation of the cover")
    t.add_argument("--tau-target", type=float)
    add("smooth", "Whitney smoothing")
    cu = add("curve", "skin uniform curves")
    cu.add_argument("--pairs", type=_pairs, help="comma separated p:q list")
    cu.add_argument("--n-pairs", type=int)
    cu.add_argument("--method", choices=["pipeline", "constrained_search"])
    d = add("domain", "skin uniform domains")
    d.add_argument("--a-frac", type=float, help="threshold a0 as a fraction of max delta")
    d.add_argument("--pair-budget", type=int)
    d.add_argument("--link-budget", type=int)
    h = add("hardy", "Hardy tightness band sweep")
    h.add_argument("--bands", type=_floats, help="comma separated band widths")
    h.add_argument("--outer-condition", choices=["dirichlet", "neumann"])
    m = add("metric", "skin and quasi-hyperbolic distances")
    m.add_argument("--pairs", type=_pairs)
    m.add_argument("--n-pairs", type=int)
    y = add("hyperbolicity", "four-point hyperbolicity estimate")
    y.add_argument("--samples", type=int)
    y.add_argument("--quadruple-budget", type=int)
    add("report", "aggregate all artifacts")
    return ap


def _config(ns) -> RunConfig:
    base = {}
    if ns.config:
        path = Path(ns.config)
        if not path.is_file():
            raise FileNotFoundError(f"config file {path}")
        try:
            base = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise sio.SchemaError(f"config {path} is not valid JSON ({exc})") from None
    cfg = RunConfig.from_dict(base)
    for k, v in vars(ns).items():
        if k not in ("config", "command") and v is not None:
            setattr(cfg, k, v)
    return cfg.validate()


# ---------------------------------------------------------------------------
# artifact plumbing


class _Store:
    def __init__(self, out):
        self.out = Path(out)

    def path(self, name):
        return self.out / name

    def write(self, name, obj, inputs=()):
        obj = dict(obj)
        obj["inputs"] = {n: sio.file_hash(self.path(n)) for n in inputs}
        sio.dump_json(self.path(name), obj)

    def csv(self, name, rows, kind):
        sio.atomic_write(self.path(name), sio.emit_plot_data(rows, kind))

    def surface(self):
        return sio.surface_from_dict(sio.load_json(self.path("surface.json"), "surface"))

    def skin(self, H):
        sk = sio.skin_from_dict(sio.load_json(self.path("skin.json"), "skin"))
        if sk.surface_id != H.surface_id:
            raise sio.SchemaError("skin.json belongs to another surface")
        return sk

    def cover(self, name, skin):
        cv = sio.cover_from_dict(sio.load_json(self.path(name), "cover"))
        if cv.skin_id != skin.skin_id:
            raise sio.SchemaError(f"{name} belongs to another skin field")
        return cv


def _is_cone(H):
    return H.kind.startswith("lawson_cone")


def _interior(H):
    m = ~H.excluded_mask
    m[H.sigma_idx] = False
    return m


def _default_pairs(H, n):
    """Deterministic interior pairs from two co-prime strides."""
    live = np.flatnonzero(_interior(H))
    k = np.arange(4 * n)
    a = live[(k * 7919) % live.size]
    b = live[(k * 104729 + live.size // 2) % live.size]
    out = []
    for x, y in zip(a.tolist(), b.tolist()):
        if x != y and (x, y) not in out:
            out.append((x, y))
        if len(out) == n:
            break
    return out


def _cmd_generate(cfg, st):
    if cfg.shape == "lawson":
        H = generate_lawson_cone(cfg.p, cfg.q, cfg.r_min, cfg.r_max, cfg.angular_res,
                                 cfg.radial_res)
    elif cfg.shape == "link":
        H = generate_link(cfg.p, cfg.q, cfg.angular_res)
    elif cfg.shape == "hyperplane":
        H = generate_hyperplane(cfg.extent, cfg.res)
    else:
        H = generate_catenoid(cfg.height, cfg.res)
    st.write("surface.json", sio.surface_to_dict(H))
    ok, _ = check_connectivity(H, H.sigma_idx)
    return ok, (f"{H.kind}: {H.n_vertices} vertices, {len(H.edges)} edges, "
                f"connected without sigma proxy: {ok}")


def _cmd_skin(cfg, st):
    H = st.surface()
    sk = metric_skin_transform(H, cfg.alphas[0])
    st.write("skin.json", sio.skin_to_dict(sk), ["surface.json"])
    r = H.radius if H.radius is not None else np.full(H.n_vertices, np.nan)
    rows = [{"vertex": v, "r": r[v], "a_norm": H.a_norm[v], "value": sk.values[v],
             "delta": sk.delta[v]} for v in range(H.n_vertices)]
    st.csv("skin_radial.csv", rows, "radial")
    return True, (f"skin alpha={sk.alpha:g} provenance={sk.provenance} "
                  f"max edge ratio {sk.lipschitz_bound:.6g}")


def _rel(x, y):
    fin = np.isfinite(y)
    if np.any(np.isfinite(x) != fin):
        return np.inf
    err = np.abs(x[fin] - y[fin])
    scale = np.abs(y[fin])
    # absolute error where the reference vanishes
    rel = np.divide(err, scale, out=err.copy(), where=scale > 0)
    return float(np.max(rel, initial=0.0))


def _cmd_axioms(cfg, st):
    H = st.surface()
    sk = st.skin(H)
    inner = _interior(H)
    reps = {lam: verify_axioms(H, sk, cfg.tol("lipschitz"), cfg.tol("scaling"), lam=lam)
            for lam in SCALINGS}
    rep = reps[2.0]
    out = {"artifact": "axioms", "surface_id": H.surface_id, "skin_id": sk.skin_id}
    out.update(asdict(rep))
    out["all_pass"] = rep.all_pass
    res2 = [r.s2_scaling_residual for r in reps.values()]
    res5 = [r.s5_scaling_residual for r in reps.values() if r.s5_scaling_residual is not None]
    out["scaling"] = {"lambdas": list(SCALINGS), "s2_residuals": res2, "s5_residuals": res5,
                      "pass": bool(max(res2 + res5) <= cfg.tol("scaling"))}
    out["lipschitz"] = {"max_edge_ratio": rep.s4_lipschitz_constant, "bound": 1.0 / sk.alpha,
                        "pass": rep.s4_pass}
    oracle = {"cap": ORACLE_CAP, "checked": H.n_vertices <= ORACLE_CAP}
    if oracle["checked"]:
        devs = [_rel(metric_skin_transform(H, a).values, brute_force_skin_oracle(H, a).values)
                for a in cfg.alphas]
        oracle.update({"alphas": cfg.alphas, "max_deviation": max(devs),
                       "pass": bool(max(devs) <= cfg.tol("oracle"))})
    out["oracle"] = oracle
    d1 = sk.delta if sk.alpha == 1.0 else metric_skin_transform(H, 1.0).delta
    out["regularity_identity"] = {"pass": bool(np.array_equal(regularity_scale(H).values, d1))}
    ok_conn, sizes = check_connectivity(H, H.sigma_idx)
    out["connectivity"] = {"pass": ok_conn, "components": sizes, "singular": H.is_singular}
    checks = [rep.all_pass, out["scaling"]["pass"], oracle.get("pass", True),
              out["regularity_identity"]["pass"], ok_conn]
    if _is_cone(H):
        kappa = H.params["kappa"]
        sweep = {a: metric_skin_transform(H, a).values for a in ALPHA_SWEEP}
        closed = float(np.max(np.abs(sk.values * H.radius / (sk.alpha + kappa) - 1)[inner]))
        mono = all(np.all(sweep[b] >= sweep[a]) for a, b in zip(ALPHA_SWEEP, ALPHA_SWEEP[1:]))
        dist = dist_to_sigma(H).values
        lo, hi = ALPHA_SWEEP[0], ALPHA_SWEEP[-1]
        lim_a = float(np.max((np.abs(sweep[lo] - H.a_norm) / H.a_norm)[inner]))
        lim_d = float(np.max(np.abs(sweep[hi] * dist / hi - 1)[inner]))
        growth = float(np.min(sk.values * dist / sk.alpha))
        out["cone"] = {
            "kappa": kappa,
            "closed_form_max_deviation": closed,
            "closed_form_pass": bool(closed <= cfg.tol("closed_form")),
            "alpha_sweep": list(ALPHA_SWEEP),
            "monotone": bool(mono),
            "small_alpha_deviation": lim_a,
            "large_alpha_deviation": lim_d,
            "limits_pass": bool(mono and max(lim_a, lim_d) <= cfg.tol("limits")),
            "growth_min_ratio": growth,
            "growth_pass": bool(growth >= 1 - 1e-12),
        }
        checks += [out["cone"]["closed_form_pass"], out["cone"]["limits_pass"],
                   out["cone"]["growth_pass"]]
    out["checks_pass"] = bool(all(checks))
    st.write("axioms.json", out, ["surface.json", "skin.json"])
    return out["checks_pass"], ("axioms " + ("pass" if out["checks_pass"] else "FAIL") + "; "
                                + "; ".join(rep.notes))


def _cmd_cover(cfg, st):
    H = st.surface()
    sk = st.skin(H)
    cover = build_skin_cover(H, sk, cfg.xi, cfg.xi_max)
    chk = verify_cover(H, cover)
    out = sio.cover_to_dict(cover)
    out["verification"] = chk
    st.write("cover.json", out, ["surface.json", "skin.json"])
    return chk["ok"], (f"cover xi={cover.xi:g}: {len(cover.centers)} centers, "
                       f"{cover.n_families} families, covering max {cover.stats['max']}")


def _cmd_qt(cfg, st):
    H = st.surface()
    sk = st.skin(H)
    cover = st.cover("cover.json", sk)
    try:
        qt = qt_perturb(H, sk, cover, cfg.tau_target)
    except QTError as exc:
        raise CheckFailed(f"QT perturbation failed: {exc}") from None
    ok, worst, slack, n_int = verify_qt(H, qt, cfg.tau_target)
    tube = tube_opening_check(H, qt)
    out = sio.cover_to_dict(qt)
    out["verify_qt"] = {"tau": cfg.tau_target, "passed": ok, "worst_pair": worst,
                        "min_slack": slack, "intersecting_pairs": n_int}
    out["tube_opening"] = {"pairs": tube["pairs"], "min_omega": tube["min_omega"]}
    st.write("qt_cover.json", out, ["surface.json", "skin.json", "cover.json"])
    return ok, (f"qt margin {qt.qt_margin:.4g} (target {cfg.tau_target:g}), "
                f"min slack {slack:.4g}, {qt.stats['moved']} centers moved")


def _cmd_smooth(cfg, st):
    H = st.surface()
    sk = st.skin(H)
    cover = st.cover("cover.json", sk)
    sm = whitney_smooth(H, sk, cover)
    i = sm.info
    # bumps are supported on doubled balls: multiplicity at rho = 2
    nmax = covering_number_stats(H, cover, 2.0)["max"]
    ok = bool(0 < i["c1"] <= i["c2"] < np.inf and i["c2"] / i["c1"] <= nmax
              and i["gradient_ratio"] <= i["c3"])
    out = sio.skin_to_dict(sm)
    out["covering_max"] = nmax
    out["checks_pass"] = ok
    st.write("smooth.json", out, ["surface.json", "skin.json", "cover.json"])
    return ok, (f"smoothing c1={i['c1']:.4g} c2={i['c2']:.4g} gradient {i['gradient_ratio']:.4g}"
                f" <= c3={i['c3']:.4g}")


def _cmd_curve(cfg, st):
    H = st.surface()
    sk = st.skin(H)
    pairs = [tuple(p) for p in cfg.pairs] or _default_pairs(H, cfg.n_pairs)
    methods = ("constrained_search", "pipeline")
    certs = {m: [skin_uniform_curve(H, sk, p, q, m) for p, q in pairs] for m in methods}
    cs = np.array([c.c for c in certs["constrained_search"]])
    cp = np.array([c.c for c in certs["pipeline"]])
    out = {"artifact": "curves", "surface_id": H.surface_id, "skin_id": sk.skin_id,
           "method": cfg.method, "pairs": pairs,
           "certificates": [sio.certificate_to_dict(c) for c in certs[cfg.method]],
           "c_constrained": cs, "c_pipeline": cp,
           "finite": bool(np.all(np.isfinite(cs)) and np.all(np.isfinite(cp))),
           "constrained_le_pipeline": bool(np.all(cs <= cp + 1e-9))}
    checks = [out["finite"], out["constrained_le_pipeline"]]
    if _is_cone(H):
        drift = {m: blow_up_invariance_check(H, sk, [0.5, 2.0], pairs, m)["max_deviation"]
                 for m in methods}
        sing = singular_endpoint_check(H)
        out["scale_drift"] = drift
        out["scale_pass"] = bool(max(drift.values()) <= cfg.tol("curve_scaling"))
        out["singular_endpoints"] = sing
        checks += [out["scale_pass"], sing["ok"]]
    out["checks_pass"] = bool(all(checks))
    st.write("curves.json", out, ["surface.json", "skin.json"])
    rows = [{"pair": f"{c.p}:{c.q}", "d": c.info["d"], "length": c.length, "c": c.c}
            for c in certs[cfg.method]]
    st.csv("curves.csv", rows, "scatter")
    return out["checks_pass"], (f"{len(pairs)} pairs: worst c {cs.max():.4g} (constrained), "
                                f"{cp.max():.4g} (pipeline)")


def _cmd_domain(cfg, st):
    H = st.surface()
    sk = st.skin(H)
    name = "qt_cover.json"
    cover = st.cover(name, sk)
    a0 = cfg.a_frac * float(np.max(sk.delta[_interior(H)]))
    levels = []
    for a in (a0, a0 / 2, a0 / 4):
        link = build_link_space(H, sk, a, cfg.link_budget)
        try:
            dom = bubbled_hull(H, sk, cover, link)
            chk = verify_domain(H, sk, dom, cfg.pair_budget)
        except DomainError as exc:
            raise CheckFailed(f"domain at a={a:.4g} failed ({exc.kind}): {exc}") from None
        levels.append({"a": a, "alpha_prime": dom.alpha_prime, "iota": chk.iota,
                       "kappa": chk.kappa, "passed": chk.passed, "link_policy": link.policy,
                       "link_worst_c": link.worst_c, "members": int(dom.members.size),
                       "centers": int(dom.centers.size), "checks": chk.checks})
    kap = [lv["kappa"] for lv in levels]
    spread = max(kap) / min(kap)
    ok = all(lv["passed"] for lv in levels) and spread <= cfg.tol("kappa_spread")
    out = {"artifact": "domain", "surface_id": H.surface_id, "skin_id": sk.skin_id,
           "levels": levels, "kappa_spread": spread, "checks_pass": bool(ok)}
    st.write("domain.json", out, ["surface.json", "skin.json", name])
    return ok, (f"domains at a0={a0:.4g}, a0/2, a0/4: kappa "
                + ", ".join(f"{k:.4g}" for k in kap) + f" (spread {spread:.3g})")


def _coarser(H):
    """Next coarser cone: 3/4 of the angular count (kept even), half the radial steps."""
    pr = H.params
    ang = max(4, 2 * round(3 * pr["angular_res"] / 8))
    rad = max(3, (pr["radial_res"] - 1) // 2 + 1)
    return generate_lawson_cone(pr["p"], pr["q"], pr["r_min"] * H.scale, pr["r_max"] * H.scale,
                                ang, rad)


def _cmd_hardy(cfg, st):
    H = st.surface()
    sk = st.skin(H)
    tol = cfg.tol("hardy")
    bands = sorted(cfg.bands)
    reps = [hardy_constant(assemble_forms(H, sk, b, cfg.outer_condition), tol=tol)
            for b in bands]
    lams = [r.lambda_min for r in reps]
    mono = all(y >= x * (1 - 1e-9) for x, y in zip(lams, lams[1:]))
    lam = lams[0]
    # the same vertex function on the rescaled surface
    G = scale_surface(H, 2.0)
    fg = assemble_forms(G, metric_skin_transform(G, sk.alpha), bands[0], cfg.outer_condition)
    rq = rayleigh_quotient(fg, reps[0].vector)
    out = {"artifact": "hardy", "surface_id": H.surface_id, "skin_id": sk.skin_id,
           "outer_condition": cfg.outer_condition,
           "sweep": [{"band": r.band, "lambda_min": r.lambda_min, "iterations": r.iterations,
                      "residual": r.residual, "free": r.info["free"]} for r in reps],
           "lambda_min": lam, "monotone": mono,
           "rayleigh_scale_deviation": abs(rq - lam) / lam}
    checks = [lam > 0, mono, out["rayleigh_scale_deviation"] <= cfg.tol("scaling")]
    rows = []
    if _is_cone(H):
        C = _coarser(H)
        lc = hardy_constant(assemble_forms(C, metric_skin_transform(C, sk.alpha), bands[0],
                                           cfg.outer_condition), tol=tol).lambda_min
        pr = H.params
        oracle = radial_hardy_oracle(H.dim, pr["kappa"], sk.alpha, pr["r_min"] * H.scale,
                                     pr["r_max"] * H.scale)
        drift = abs(lam - lc) / lam
        out["refinement"] = {"coarse": {"angular_res": C.params["angular_res"],
                                        "radial_res": C.params["radial_res"], "lambda_min": lc},
                             "drift": drift}
        out["radial_oracle"] = oracle
        out["oracle_pass"] = bool(min(lam, lc) >= oracle * (1 - cfg.tol("hardy_oracle")))
        checks += [drift <= cfg.tol("hardy_drift"), out["oracle_pass"]]
        rows = [{"refinement": f"{C.params['angular_res']}x{C.params['radial_res']}",
                 "lambda": lc},
                {"refinement": f"{pr['angular_res']}x{pr['radial_res']}", "lambda": lam},
                {"refinement": "radial oracle", "lambda": oracle}]
    if H.is_singular:
        dv = hardy_dist_variant(H, bands[0], cfg.outer_condition, tol=tol)
        out["dist_variant"] = {"lambda_min": dv.lambda_min, "iterations": dv.iterations,
                               "residual": dv.residual}
    out["checks_pass"] = bool(all(checks))
    st.write("hardy.json", out, ["surface.json", "skin.json"])
    st.csv("hardy_bands.csv", [{"band": r.band, "lambda": r.lambda_min} for r in reps],
           "band-sweep")
    if rows:
        st.csv("hardy_refinement.csv", rows, "refinement")
    return out["checks_pass"], f"hardy lambda_min={lam:.6g} over {len(lams)} bands, monotone={mono}"


def _cmd_metric(cfg, st):
    H = st.surface()
    sk = st.skin(H)
    pairs = [tuple(p) for p in cfg.pairs] or _default_pairs(H, cfg.n_pairs)
    ds = skin_metric_distances(H, sk, pairs)
    G = scale_surface(H, 2.0)
    dg = skin_metric_distances(G, metric_skin_transform(G, sk.alpha), pairs)
    fin = np.isfinite(ds)
    scale_dev = float(np.max(np.abs(dg[fin] - ds[fin]) / np.maximum(ds[fin], 1e-300),
                             initial=0.0))
    out = {"artifact": "metric", "surface_id": H.surface_id, "skin_id": sk.skin_id,
           "pairs": pairs, "skin_distance": ds, "scale_deviation": scale_dev}
    checks = [scale_dev <= cfg.tol("scaling")]
    qh = np.full(len(pairs), np.nan)
    if H.is_singular:
        qh = quasi_hyperbolic_distances(H, pairs)
        out["quasi_hyperbolic"] = qh
        out["weight_dominance"] = bool(np.all(ds >= sk.alpha * qh * (1 - 1e-12)))
        checks.append(out["weight_dominance"])
    if _is_cone(H):
        g = dyadic_growth(H)
        dev = float(np.max(np.abs(g / np.log(2.0) - 1)))
        out["dyadic_growth"] = {"per_halving": g, "max_deviation": dev,
                                "pass": bool(dev <= cfg.tol("dyadic"))}
        checks.append(out["dyadic_growth"]["pass"])
    out["checks_pass"] = bool(all(checks))
    st.write("metric.json", out, ["surface.json", "skin.json"])
    rows = [{"p": p, "q": q, "skin_distance": a, "quasi_hyperbolic": b}
            for (p, q), a, b in zip(pairs, ds, qh)]
    st.csv("metric.csv", rows, "metric")
    return out["checks_pass"], (f"{len(pairs)} metric pairs, scale deviation {scale_dev:.3g}, "
                                f"dominance={out.get('weight_dominance')}")


def _cmd_hyperbolicity(cfg, st):
    H = st.surface()
    sk = st.skin(H)
    live = np.flatnonzero(_interior(H))
    pick = np.unique(live[np.linspace(0, live.size - 1, cfg.samples).round().astype(np.int64)])
    pairs = [(int(a), int(b)) for a in pick for b in pick]
    D = skin_metric_distances(H, sk, pairs).reshape(len(pick), len(pick))
    res = four_point_delta(D, cfg.quadruple_budget)
    G = scale_surface(H, 2.0)
    Dg = skin_metric_distances(G, metric_skin_transform(G, sk.alpha), pairs)
    resg = four_point_delta(Dg.reshape(len(pick), len(pick)), cfg.quadruple_budget)
    dev = abs(resg["delta"] - res["delta"]) / max(res["delta"], 1e-300)
    out = {"artifact": "hyperbolicity", "surface_id": H.surface_id, "skin_id": sk.skin_id,
           "samples": pick, "delta_hyp": res["delta"], "quadruples": res["quadruples"],
           "worst": res["worst"], "diameter": float(D[np.isfinite(D)].max()),
           "scale_deviation": dev, "checks_pass": bool(dev <= cfg.tol("scaling"))}
    st.write("hyperbolicity.json", out, ["surface.json", "skin.json"])
    return out["checks_pass"], (f"four-point delta {res['delta']:.6g} over "
                                f"{res['quadruples']} quadruples, scale deviation {dev:.3g}")


_REPORT_SOURCES = {
    "axioms.json": "axioms", "cover.json": "cover", "qt_cover.json": "cover",
    "smooth.json": "skin", "curves.json": "curves", "domain.json": "domain",
    "hardy.json": "hardy", "metric.json": "metric", "hyperbolicity.json": "hyperbolicity",
}

CRITERIA = {
    1: "oracle equivalence", 2: "regularity-scale identity", 3: "Lipschitz axiom",
    4: "closed-form cone value", 5: "interpolation limits", 6: "scaling anticommutation",
    7: "cover invariants", 8: "QT certification", 9: "Whitney smoothing",
    10: "Hardy tightness", 11: "uniform curves", 12: "domains", 13: "metrics",
    14: "connectivity",
}


def _status(flag):
    return "not run" if flag is None else ("pass" if flag else "fail")


def _criteria(arts):
    """Status and headline value per criterion from whatever artifacts exist."""
    res = {k: (None, None) for k in CRITERIA}
    ax = arts.get("axioms.json")
    if ax:
        orc = ax["oracle"]
        res[1] = (orc.get("pass") if orc["checked"] else None, orc.get("max_deviation"))
        res[2] = (ax["regularity_identity"]["pass"], None)
        res[3] = (ax["lipschitz"]["pass"], ax["lipschitz"]["max_edge_ratio"])
        scl = ax["scaling"]
        res[6] = (scl["pass"] and ax["s2_pass"],
                  float(np.max(sio._floats(scl["s2_residuals"] + scl["s5_residuals"]))))
        if "cone" in ax:
            c = ax["cone"]
            res[4] = (c["closed_form_pass"], c["closed_form_max_deviation"])
            res[5] = (c["limits_pass"], [c["small_alpha_deviation"], c["large_alpha_deviation"]])
        if ax["connectivity"]["singular"]:
            res[14] = (ax["connectivity"]["pass"], ax["connectivity"]["components"])
    cv = arts.get("cover.json")
    if cv:
        ok = (cv["verification"]["ok"] and cv["stats"]["families"] <= 64
              and cv["stats"]["max"] <= 64)
        res[7] = (ok, {"families": cv["stats"]["families"], "covering_max": cv["stats"]["max"]})
    qt = arts.get("qt_cover.json")
    if qt:
        res[8] = (qt["verify_qt"]["passed"] and sio._num(qt["qt_margin"]) >= 0.02,
                  qt["qt_margin"])
    sm = arts.get("smooth.json")
    if sm:
        res[9] = (sm["checks_pass"],
                  {k: sm["info"][k] for k in ("c1", "c2", "c3", "gradient_ratio")})
    hd = arts.get("hardy.json")
    if hd:
        res[10] = (hd["checks_pass"], hd["lambda_min"])
    cu = arts.get("curves.json")
    if cu:
        res[11] = (cu["checks_pass"], float(np.max(sio._floats(cu["c_constrained"]))))
    dm = arts.get("domain.json")
    if dm:
        res[12] = (dm["checks_pass"], [lv["kappa"] for lv in dm["levels"]])
    mt, hy = arts.get("metric.json"), arts.get("hyperbolicity.json")
    if mt:
        ok = mt["checks_pass"] and (hy["checks_pass"] if hy else True)
        res[13] = (ok, mt["scale_deviation"])
    return res


def _cmd_report(cfg, st):
    arts = {}
    for name, kind in _REPORT_SOURCES.items():
        if st.path(name).is_file():
            arts[name] = sio.load_json(st.path(name), kind)
    if not arts:
        raise FileNotFoundError(f"no artifacts in {st.out}")
    res = _criteria(arts)
    table = {str(k): {"criterion": CRITERIA[k], "status": _status(ok), "value": val}
             for k, (ok, val) in res.items()}
    statuses = [v["status"] for v in table.values()]
    out = {"artifact": "report", "criteria": table, "artifacts": sorted(arts),
           "passed": statuses.count("pass"), "failed": statuses.count("fail"),
           "not_run": statuses.count("not run"), "all_pass": "fail" not in statuses}
    st.write("report.json", out, sorted(arts))
    return out["all_pass"], (f"report: {out['passed']} pass, {out['failed']} fail, "
                             f"{out['not_run']} not run")


_COMMANDS = {
    "generate": _cmd_generate, "skin": _cmd_skin, "axioms": _cmd_axioms, "cover": _cmd_cover,
    "qt": _cmd_qt, "smooth": _cmd_smooth, "curve": _cmd_curve, "domain": _cmd_domain,
    "hardy": _cmd_hardy, "metric": _cmd_metric, "hyperbolicity": _cmd_hyperbolicity,
    "report": _cmd_report,
}


def run_subcommand(argv) -> int:
    """Run one subcommand and return its exit code (0 pass, 2 check failed, 1 error)."""
    try:
        ns = _parser().parse_args(argv)
        if ns.command is None:
            raise CLIError(f"missing subcommand; choose from {', '.join(SUBCOMMANDS)}")
        cfg = _config(ns)
        ok, line = _COMMANDS[ns.command](cfg, _Store(cfg.out))
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 2
    except CLIError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 1
    except sio.SchemaError as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return 1
    except (SurfaceError, SkinError, CoverError, UniformityError, SpectralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(line)
    return 0 if ok else 2


def main(argv=None) -> None:
    sys.exit(run_subcommand(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
