"""Commands shared by the command line and the HTTP service.

Each command takes a RunConfig and returns a RunResult whose files are
already rendered to text, so a local run and a run through the service
write the same bytes.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import metric as mt
from .contour import ContourClass
from .factorization import (FixedPointCollision, InadmissibleRegion, MonodromySpec, canonical_factor_diag,
                            delta_closed_form, delta_grid, emd_closed_forms, emd_matrix, emd_pole_census,
                            kasner_factor, kasner_reference_constants, kasner_X_phi, kasner_Xtilde_phi,
                            labelled_points, m_plus_grid)
from .schemas import RunConfig, RunResult
from .spectral import PhiSpec, phi_eval
from .verify import (VerificationReport, bm_residual, curvature_scalars, field_eq_residual, interior_jump,
                     monodromy_constancy)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INADMISSIBLE = 2
EXIT_COLLISION = 3
EXIT_CHECKS = 4

CSV_COLUMNS = ["rho", "v", "Delta", "psi", "B", "g_tt", "g_rr", "g_vv", "g_phiphi", "g_tphi"]
CHART_COLUMNS = ["x1", "x2", "rho", "v", "Delta", "g_tt", "g_11", "g_22", "g_phiphi", "g_tphi", "g_12"]


class PipelineError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def threads() -> int:
    raw = os.environ.get("WEYL_FACTOR_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise PipelineError(f"WEYL_FACTOR_THREADS must be an integer, got {raw!r}", EXIT_USAGE)
    if n < 1:
        raise PipelineError("WEYL_FACTOR_THREADS must be at least 1", EXIT_USAGE)
    return n


def _quiet(fn):
    def call(x):
        with np.errstate(divide="ignore", invalid="ignore"):
            return fn(x)
    return call


def _pmap(fn, items):
    items = list(items)
    n = min(threads(), len(items)) or 1
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_quiet(fn), items))


def _run(fn):
    """Turn module errors into exit codes.  Points off the admissible region
    or on chart edges are carried as NaN on purpose, so the floating point
    warnings they raise are muted."""
    try:
        with np.errstate(divide="ignore", invalid="ignore"):
            return fn()
    except FixedPointCollision as e:
        raise PipelineError(str(e), EXIT_COLLISION) from e
    except (InadmissibleRegion, mt.SignatureViolation) as e:
        raise PipelineError(str(e), EXIT_INADMISSIBLE) from e


# ------------------------------------------------------------------ helpers

def monodromy_spec(cfg: RunConfig) -> MonodromySpec:
    if cfg.family == "eps1":
        return MonodromySpec.diag(1, cfg.m, cfg.sigma)
    if cfg.family == "eps0":
        return MonodromySpec.diag(0, cfg.m, cfg.sigma)
    if cfg.family == "kasner":
        return MonodromySpec.kasner(cfg.omega)
    return MonodromySpec.emd3(cfg.h1, cfg.h2, cfg.Q, cfg.P)


def _eps(cfg):
    return 1 if cfg.family == "eps1" else 0


def weyl_axes(cfg: RunConfig):
    g = cfg.weyl_grid()
    rho = np.linspace(g.x1[0], g.x1[1], g.n[0])
    v = np.linspace(g.x2[0], g.x2[1], g.n[1])
    if rho[0] <= 0:
        raise PipelineError("the Weyl grid must satisfy rho > 0", EXIT_INADMISSIBLE)
    return rho, v


def _diag(D):
    D = np.asarray(D)
    out = np.zeros(D.shape + (2, 2), dtype=np.result_type(D, float))
    out[..., 0, 0] = D
    out[..., 1, 1] = 1 / D
    return out


def _fmt(x) -> str:
    return f"{x:.17g}"


def render_csv(columns: list[str], data: list[np.ndarray]) -> str:
    flat = [np.asarray(c, dtype=float).ravel() for c in data]
    lines = [",".join(columns)]
    for row in zip(*flat):
        lines.append(",".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> dict[str, np.ndarray]:
    rows = text.strip().splitlines()
    head = rows[0].split(",")
    vals = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
    return {h: vals[:, i] for i, h in enumerate(head)}


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _rat(r) -> dict:
    c = complex(r.constant)
    return {"constant": [c.real, c.imag], "zeros": [[complex(z).real, complex(z).imag] for z in r.zeros],
            "poles": [[complex(p).real, complex(p).imag] for p in r.poles]}


# ------------------------------------------------------------------- fields

@dataclass
class Fields:
    rho: np.ndarray
    v: np.ndarray
    R: np.ndarray
    V: np.ndarray
    delta: np.ndarray
    M: np.ndarray
    flipped: np.ndarray
    clipped: int
    warnings: list
    extremal: bool = False


def delta_function(cfg: RunConfig):
    """Vectorized (rho, v) -> Delta for the configured solution (NaN off the region)."""
    spec = monodromy_spec(cfg)
    if cfg.family in ("eps0", "eps1"):
        def D(r, v):
            d = delta_grid(spec, cfg.cls, r, v, clip=True)[0]
            return 1 / d if cfg.inverse else d
        return D
    if cfg.family == "kasner":
        def D(r, v):
            r = np.asarray(r, float)
            v = np.asarray(v, float)
            ok = v * v > r * r
            rr, vv = np.where(ok, r, 1.0), np.where(ok, v, 2.0)
            d = rr ** 4 if cfg.kasner_mode == "meromorphic" else rr ** 4 * labelled_points(spec, rr, vv)["tau1_tilde"] ** 4
            d = np.where(ok, d, np.nan)
            return 1 / d if cfg.inverse else d
        return D

    def D(r, v):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            d = emd_closed_forms(spec, r, v, check_domain=False)
        ok = d["e2Sigma2"] > 0
        return np.where(ok, d["Delta"], np.nan)
    return D


def psi_function(cfg: RunConfig):
    """Closed-form psi where one is known, else None."""
    if cfg.family in ("eps0", "eps1"):
        return lambda r, v: mt.psi_closed_form(_eps(cfg), cfg.sigma, cfg.cls, r, v, cfg.m)
    if cfg.family == "emd3":
        spec = monodromy_spec(cfg)
        return lambda r, v: mt.emd_psi(spec, r, v, cfg.c1)
    if cfg.kasner_mode == "meromorphic":
        return lambda r, v: math.log(9.0) + 8 * np.log(np.asarray(r, float))
    return None


def compute_fields(cfg: RunConfig) -> Fields:
    rho, v = weyl_axes(cfg)
    R, V = np.meshgrid(rho, v, indexing="ij")
    notes = []
    spec = monodromy_spec(cfg)
    extremal = False
    if cfg.family in ("eps0", "eps1"):
        D, flipped = delta_grid(spec, cfg.cls, R, V, clip=True)
        if cfg.inverse:
            D = 1 / D
        M = _diag(D)
    elif cfg.family == "kasner":
        D = delta_function(cfg)(R, V)
        flipped = np.zeros(D.shape, bool)
        M = _diag(D)
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            d = emd_closed_forms(spec, R, V, check_domain=False)
            M = emd_matrix(spec, R, V, check_domain=False)
        extremal = any("extremal degeneracy" in str(w.message) for w in caught)
        if extremal:
            notes.append("extremal degeneracy: P~ = Q~, the dilaton is constant")
        ok = d["e2Sigma2"] > 0
        D = np.where(ok, d["Delta"], np.nan)
        M = np.where(ok[..., None, None], M, np.nan)
        flipped = np.zeros(D.shape, bool)
    bad = ~np.isfinite(D)
    clipped = int(bad.sum())
    if clipped == D.size:
        raise PipelineError("the whole grid lies outside the admissible region", EXIT_INADMISSIBLE)
    if clipped:
        notes.append(f"auto-clipped {clipped} of {D.size} grid points outside the admissible region")
    if cfg.perturb:
        noise = np.random.default_rng(cfg.seed).standard_normal(M.shape)
        M = M * (1 + cfg.perturb * noise)
    return Fields(rho, v, R, V, D, M, np.asarray(flipped, bool), clipped, notes, extremal)


def _psi_anchor_value(cfg, psi_cf, r0, v0):
    if cfg.anchor_value is not None:
        return float(cfg.anchor_value)
    if psi_cf is not None:
        return float(psi_cf(np.array(r0), np.array(v0)))
    return 0.0


def compute_psi(cfg: RunConfig, F: Fields) -> tuple[np.ndarray, dict]:
    """psi on the grid: line integral when the grid is fully admissible,
    closed form otherwise; the integration constant matches the closed form
    at the anchor (first grid point)."""
    psi_cf = psi_function(cfg)
    info = {"anchor": [float(F.rho[0]), float(F.v[0])]}
    if cfg.family == "emd3":
        info.update(source="closed form", c1=cfg.c1)
        return psi_cf(F.R, F.V), info
    if F.clipped or cfg.perturb:
        if psi_cf is None:
            raise PipelineError("psi needs a fully admissible grid for this family", EXIT_INADMISSIBLE)
        info.update(source="closed form")
        return psi_cf(F.R, F.V), info
    a0 = _psi_anchor_value(cfg, psi_cf, F.rho[0], F.v[0])
    D = delta_function(cfg)
    res = mt.integrate_psi(mt.diag_field(D), F.rho, F.v, cfg.sigma, anchor=(0, 0), anchor_value=a0,
                           tol=cfg.tol("psi_closure", 1e-7))
    info.update(source="line integral", anchor_value=a0, closure=res.closure)
    if psi_cf is not None:
        info["max_dev_closed_form"] = float(np.max(np.abs(res.psi - psi_cf(F.R, F.V))))
    return res.psi, info


def _B_grid(cfg, F):
    if cfg.family == "emd3":
        return mt.emd_B_field(monodromy_spec(cfg), F.R, F.V)
    return np.zeros_like(F.R)


def _grid_patch(cfg, D, psi, B):
    return mt.WeylPatch(lambda r, v: D, lambda r, v: psi, cfg.sigma, cfg.form, lambda r, v: B)


def closed_patch(cfg: RunConfig) -> mt.WeylPatch:
    psi = psi_function(cfg)
    if psi is None:
        raise PipelineError("no closed-form psi for this configuration", EXIT_USAGE)
    B = (lambda r, v: mt.emd_B_field(monodromy_spec(cfg), r, v)) if cfg.family == "emd3" else None
    return mt.assemble_patch(delta_function(cfg), psi, cfg.sigma, cfg.form, B=B, cls=cfg.cls)


def _signature(cfg, F, g):
    pts = mt.signature_violations(F.delta, g, F.R, F.V, seed=cfg.seed)
    if pts:
        raise mt.SignatureViolation(pts)


# ------------------------------------------------------------------ factorize

def _sample_points(F, k=3):
    ok = np.argwhere(np.isfinite(F.delta))
    picks = [ok[len(ok) // 2], ok[0], ok[-1]][:k]
    return [(float(F.R[tuple(i)]), float(F.V[tuple(i)])) for i in picks]


def _factor_at(cfg, spec, r, v):
    if cfg.family in ("eps0", "eps1"):
        cc = ContourClass.named(cfg.cls, cfg.sigma, _eps(cfg))
        f = canonical_factor_diag(spec, cc, r, v)
        d = 1 / f.delta if cfg.inverse else f.delta
        return {"rho": r, "v": v, "Delta": d, "sign_flip": f.sign_flip,
                "m_plus": _rat(f.factor.m_plus), "m_minus": _rat(f.factor.m_minus)}
    if cfg.family == "kasner":
        k = kasner_factor(cfg.kasner_mode, r, v)
        d = float(k.M[0, 0])
        return {"rho": r, "v": v, "Delta": 1 / d if cfg.inverse else d, "m_plus": _rat(k.m_plus),
                "declared_poles": [[float(p), n] for p, n in k.declared_poles]}
    d = emd_closed_forms(spec, r, v, check_domain=True)
    return {"rho": r, "v": v, "Delta": float(d["Delta"]), "poles": emd_pole_census(spec, r, v)}


def factorize(cfg: RunConfig) -> RunResult:
    def go():
        spec = monodromy_spec(cfg)
        summary = {}
        if cfg.point is not None:
            r, v = cfg.point
            summary["point"] = _factor_at(cfg, spec, float(r), float(v))
        F = compute_fields(cfg)
        samples = [_factor_at(cfg, spec, r, v) for r, v in _sample_points(F)]
        # the per-point factorization and the vectorized grid must agree
        dev = max(abs(s["Delta"] - float(delta_function(cfg)(np.array(s["rho"]), np.array(s["v"])))) / abs(s["Delta"])
                  for s in samples)
        summary.update(grid=[int(F.rho.size), int(F.v.size)], clipped_points=F.clipped,
                       sign_flips=int(F.flipped.sum()), pointwise_vs_grid=dev)
        if cfg.family in ("eps0", "eps1"):
            cf = delta_closed_form(_eps(cfg), cfg.sigma, cfg.cls, F.R, F.V, cfg.m)
            if cfg.inverse:
                cf = 1 / cf
            summary["max_rel_dev_closed_form"] = float(np.nanmax(np.abs(F.delta / cf - 1)))
        files = {"delta.csv": render_csv(["rho", "v", "Delta", "sign_flip"], [F.R, F.V, F.delta, F.flipped]),
                 "factors.json": _json({"config": cfg.model_dump(by_alias=True), "samples": samples,
                                        "point": summary.get("point")})}
        return RunResult(command="factorize", summary=summary, warnings=F.warnings, files=files)
    return _run(go)


# ---------------------------------------------------------------------- solve

def _metadata(cfg, F, psi_info, maps, checks, extra=None):
    meta = {"config": cfg.model_dump(by_alias=True), "family": cfg.family, "class": cfg.cls,
            "sigma": cfg.sigma, "two_d_signature": cfg.form, "inverse": cfg.inverse,
            "maps": maps, "sign_flips": int(F.flipped.sum()),
            "constants": psi_info, "flags": {"extremal_degeneracy": F.extremal,
                                             "auto_clipped_points": F.clipped},
            "checks": checks}
    if extra:
        meta.update(extra)
    return meta


def _field_eq(cfg, F, M=None) -> VerificationReport:
    return field_eq_residual(F.M if M is None else M, cfg.sigma, F.rho, F.v,
                             tol=cfg.tol("field_equation", 1e-6), mask=True)


def chart_data(cfg: RunConfig):
    if cfg.map not in mt.MAPS:
        raise PipelineError(f"unknown map {cfg.map!r}; choose from {sorted(mt.MAPS)}", EXIT_USAGE)
    cmap = mt.MAPS[cfg.map](cfg.m)
    c = cfg.chart
    a = np.linspace(c.x1[0], c.x1[1], c.n[0])
    b = np.linspace(c.x2[0], c.x2[1], c.n[1])
    A, Bc = np.meshgrid(a, b, indexing="ij")
    mp = mt.apply_map(closed_patch(cfg), cmap)
    with np.errstate(invalid="ignore"):
        g = mp.metric(A, Bc)
        rho, v = (np.real(x) for x in cmap.fmap(A, Bc))
        D = mp.delta(A, Bc)
    return cmap, A, Bc, rho, v, D, g


def _catalog_error(cfg, A, Bc, g):
    hit = mt.catalog_lookup(_eps(cfg), cfg.sigma, cfg.cls, cfg.inverse, cfg.form, cfg.map) \
        if cfg.family in ("eps0", "eps1") else None
    if hit is None:
        return None
    entry, _ = hit
    T = entry.metric(A, Bc, cfg.m)
    err = np.abs(g - T) / np.maximum(1.0, np.abs(T))
    return {"entry": entry.name, "target": entry.target, "max_error": float(np.nanmax(err))}


def solve(cfg: RunConfig) -> RunResult:
    def go():
        F = compute_fields(cfg)
        psi, info = compute_psi(cfg, F)
        B = _B_grid(cfg, F)
        patch = _grid_patch(cfg, F.delta, psi, B)
        comp = patch.components(F.R, F.V)
        g = patch.metric(F.R, F.V)
        _signature(cfg, F, g)
        fe = _field_eq(cfg, F)
        checks = {"field_equation": fe.value}
        files = {"solution.csv": render_csv(CSV_COLUMNS, [F.R, F.V] + [comp[k] for k in CSV_COLUMNS[2:]])}
        maps = []
        summary = {"field_equation": fe.value, "psi": info, "clipped_points": F.clipped}
        if cfg.map:
            cmap, A, Bc, rho, v, D, gc = chart_data(cfg)
            maps.append({"name": cmap.name, "orientation_flip": cfg.form == mt.FORM_B, "t_scale": cmap.t_scale})
            files["chart.csv"] = render_csv(CHART_COLUMNS, [A, Bc, rho, v, D, gc[..., 0, 0], gc[..., 1, 1],
                                                            gc[..., 2, 2], gc[..., 3, 3], gc[..., 0, 3], gc[..., 1, 2]])
            cat = _catalog_error(cfg, A, Bc, gc)
            if cat:
                summary["catalog"] = cat
        if F.extremal:
            summary["extremal_degeneracy"] = True
        files["metadata.json"] = _json(_metadata(cfg, F, info, maps, checks))
        return RunResult(command="solve", summary=summary, warnings=F.warnings, files=files)
    return _run(go)


# --------------------------------------------------------------------- verify

def _report(name, value, tol, passed=None, **details):
    ok = bool(value < tol) if passed is None else bool(passed)
    return VerificationReport(name, float(value), float(tol), ok, None, details)


def _curvature_checks(cfg, F):
    if cfg.family != "eps1" or cfg.inverse or cfg.perturb:
        return []
    patch = closed_patch(cfg)
    ok = np.argwhere(np.isfinite(F.delta))
    rng = np.random.default_rng(cfg.seed)
    idx = ok[rng.choice(len(ok), size=min(5, len(ok)), replace=False)]
    r = F.R[tuple(idx.T)]
    v = F.V[tuple(idx.T)]
    out = curvature_scalars(patch.metric, r, v)
    Kc = mt.kretschmann_closed_form(cfg.sigma, cfg.cls, r, v, cfg.m)
    rel = float(np.max(np.abs(out["K"] / Kc - 1)))
    ric = float(np.max(out["ricci_max"] / np.sqrt(np.abs(Kc))))
    return [_report("Kretschmann vs closed form", rel, cfg.tol("kretschmann", 1e-3), points=len(r)),
            _report("Ricci (vacuum)", ric, cfg.tol("ricci", 1e-4))]


def _kasner_checks(cfg, F):
    if cfg.family != "kasner" or cfg.perturb:
        return []
    rho = F.rho[:: max(1, F.rho.size // 30)]
    v = F.v[:: max(1, F.v.size // 30)]
    w = complex(cfg.omega)
    ps = PhiSpec(w if w.imag else complex(w.real, 1.0), -1, 1, (float(rho.mean()), float(v.mean())))
    phi = lambda a, b: phi_eval(ps, a, b)
    M = lambda a, b: _diag(np.asarray(a, float) ** 4).astype(complex)
    c, ct = kasner_reference_constants(ps.omega)
    X = lambda a, b: np.moveaxis(kasner_X_phi(c, phi(a, b), a), (0, 1), (-2, -1))
    Xt = lambda a, b: np.moveaxis(kasner_Xtilde_phi(ct, phi(a, b), a), (0, 1), (-1, -2))
    return [bm_residual(X, M, phi, -1, rho, v, tol=cfg.tol("linear_system", 1e-6)),
            monodromy_constancy(lambda a, b: Xt(a, b) @ M(a, b) @ X(a, b), rho, v, tol=cfg.tol("monodromy", 1e-8))]


def _linear_system_checks(cfg, F):
    """X = diag(m_plus, 1/m_plus) at tau = phi_omega against the grid solution."""
    if cfg.family != "eps1" or cfg.inverse or cfg.perturb or F.clipped:
        return []
    spec = monodromy_spec(cfg)
    rho = F.rho[:: max(1, F.rho.size // 30)]
    v = F.v[:: max(1, F.v.size // 30)]
    w = complex(cfg.omega)
    ps = PhiSpec(w if w.imag else complex(w.real, 1.0), cfg.sigma, 1, (float(rho.mean()), float(v.mean())))
    phi = lambda a, b: phi_eval(ps, a, b)
    D = delta_function(cfg)
    M = lambda a, b: _diag(D(a, b)).astype(complex)
    X = lambda a, b: _diag(m_plus_grid(spec, cfg.cls, a, b, phi(a, b)))
    return [bm_residual(X, M, phi, cfg.sigma, rho, v, tol=cfg.tol("linear_system", 1e-6))]


def _emd_checks(cfg, F):
    if cfg.family != "emd3":
        return []
    spec = monodromy_spec(cfg)
    ok = np.isfinite(F.delta)
    ii = np.unique(np.linspace(0, F.rho.size - 1, 20).round().astype(int))
    jj = np.unique(np.linspace(0, F.v.size - 1, 20).round().astype(int))
    R, V = np.meshgrid(F.rho[ii], F.v[jj], indexing="ij")
    sel = ok[np.ix_(ii, jj)]
    clo = mt.emd_psi_closure(spec, R[sel], V[sel])
    br, bv = mt.emd_B_residual(spec, R[sel], V[sel])
    return [_report("psi closure", clo, cfg.tol("psi_closure", 1e-8)),
            _report("twist relation", max(np.max(np.abs(br)), np.max(np.abs(bv))), cfg.tol("twist", 1e-6))]


def _extension_checks(cfg):
    if cfg.extension is None:
        return []
    m = cfg.m
    ext = mt.extend_interior(cfg.extension, m)
    t = np.arange(1, 101) / 128.0
    lines = {"I/II": ("I", "II", m - t * m, t * m), "I/IV": ("I", "IV", m - t * m, -t * m),
             "II/III": ("II", "III", m + t * m, t * m), "III/IV": ("III", "IV", m + t * m, -t * m)}
    cont = max(float(np.max(np.abs(ext["delta_on"](a, r, v) - ext["delta_on"](b, r, v))))
               for a, b, r, v in lines.values())
    rng = np.random.default_rng(cfg.seed)
    r = rng.uniform(0.02 * m, 1.98 * m, 400)
    th = rng.uniform(0.02, math.pi - 0.02, 400)
    lab = ext["region"](r, th)
    # only a triangle carrying the smooth class reproduces the interior form
    regs = ("I", "II", "III", "IV")
    smooth = {reg for reg, a, b in zip(regs, ext["classes"], mt.EXTENSIONS["smooth"]) if a == b}
    keep = np.array([x in smooth for x in lab])
    g = ext["metric_spherical"](r[keep], th[keep])
    err = float(np.nanmax(np.abs(g[..., 0, 0] - (2 * m / r[keep] - 1)) / np.maximum(1, np.abs(2 * m / r[keep] - 1))))
    J = interior_jump(cfg.extension, m, math.pi / 4)
    size = abs(J["tt"]) + abs(J["phiphi"])
    smooth_pair = tuple(ext["classes"][:2]) == tuple(mt.EXTENSIONS["smooth"][:2])
    expect_jump = not smooth_pair
    name = "extrinsic jump across rho = m - v" + (" (expected)" if expect_jump else "")
    return [_report("interior continuity", cont, cfg.tol("continuity", 1e-8)),
            _report("interior matches 2m/r - 1", err, cfg.tol("interior", 1e-9), triangles=sorted(smooth)),
            _report(name, size, 1e-5, passed=(size > 1e-5) == expect_jump, tt=float(J["tt"]),
                    phiphi=float(J["phiphi"]), expected_nonzero=expect_jump,
                    curvature_jump_expected=ext["curvature_jump_expected"])]


def run_checks(cfg: RunConfig, F: Fields, M=None) -> list[VerificationReport]:
    jobs = [lambda: [_field_eq(cfg, F, M)], lambda: _curvature_checks(cfg, F),
            lambda: _kasner_checks(cfg, F),
            lambda: _linear_system_checks(cfg, F), lambda: _emd_checks(cfg, F), lambda: _extension_checks(cfg)]
    if cfg.family in ("eps0", "eps1", "kasner") and not F.clipped and not cfg.perturb:
        def psi_job():
            psi, info = compute_psi(cfg, F)
            out = [_report("psi closure", info["closure"], cfg.tol("psi_closure", 1e-7))]
            if "max_dev_closed_form" in info:
                out.append(_report("psi vs closed form", info["max_dev_closed_form"], cfg.tol("psi", 1e-6)))
            return out
        jobs.append(psi_job)
    if not cfg.perturb:
        def sig_job():
            psi = psi_function(cfg)
            if psi is None:
                psi, _ = compute_psi(cfg, F)
            else:
                psi = psi(F.R, F.V)
            g = _grid_patch(cfg, F.delta, psi, _B_grid(cfg, F)).metric(F.R, F.V)
            pts = mt.signature_violations(F.delta, g, F.R, F.V, seed=cfg.seed)
            return [_report("Lorentzian signature", len(pts), 1, points_checked=100)]
        jobs.append(sig_job)
    if cfg.map:
        def map_job():
            _, A, Bc, rho, v, D, g = chart_data(cfg)
            cat = _catalog_error(cfg, A, Bc, g)
            if cat is None:
                return []
            return [_report(f"catalog: {cat['entry']}", cat["max_error"], cfg.tol("catalog", 1e-9))]
        jobs.append(map_job)
    out = []
    for chunk in _pmap(lambda f: f(), jobs):
        out.extend(chunk)
    return out


def verify(cfg: RunConfig, solution: dict[str, str] | None = None) -> RunResult:
    """Run every applicable check.  With `solution` (the files written by
    solve) the grid fields are re-read from the CSV instead of recomputed."""
    def go():
        nonlocal cfg
        extra = []
        M = None
        if solution is not None:
            meta = json.loads(solution["metadata.json"])
            cfg = RunConfig.model_validate(meta["config"])
            F = compute_fields(cfg)
            if cfg.family != "emd3":
                cols = parse_csv(solution["solution.csv"])
                D = cols["Delta"].reshape(F.R.shape)
                M = _diag(D)
                rt = field_eq_residual(M, cfg.sigma, F.rho, F.v, mask=True).value
                dev = abs(rt - meta["checks"]["field_equation"])
                extra.append(_report("round trip", dev, 1e-12, stored=meta["checks"]["field_equation"],
                                     recomputed=rt))
        else:
            F = compute_fields(cfg)
        reports = run_checks(cfg, F, M) + extra
        code = EXIT_OK if all(r.passed for r in reports) else EXIT_CHECKS
        table = "\n".join(r.line() for r in reports)
        files = {"report.json": _json({"config": cfg.model_dump(by_alias=True),
                                       "reports": [r.to_dict() for r in reports]})}
        return RunResult(command="verify", exit_code=code,
                         summary={"passed": code == EXIT_OK, "table": table,
                                  "checks": [r.to_dict() for r in reports]},
                         warnings=F.warnings, files=files)
    return _run(go)


# ---------------------------------------------------------------------- sweep

def _zero_curve(R, V, f):
    """Points where f changes sign between neighbours along rho, interpolated."""
    s = np.sign(f)
    pts = []
    for j in range(V.shape[1]):
        col = f[:, j]
        k = np.flatnonzero((s[:-1, j] * s[1:, j] < 0) & np.isfinite(col[:-1]) & np.isfinite(col[1:]))
        for i in k:
            t = col[i] / (col[i] - col[i + 1])
            pts.append((R[i, j] + t * (R[i + 1, j] - R[i, j]), V[i, j]))
    return pts


def sweep(cfg: RunConfig, param: str, values: list[float]) -> RunResult:
    """Scan one parameter.  For emd3 this traces the curve exp(2 Sigma_2) = 0;
    for the 2x2 families it records the range of Delta over the grid."""
    if not values:
        raise PipelineError("sweep needs at least one value", EXIT_USAGE)

    def one(val):
        c = cfg.model_copy(update={param: float(val)})
        c = RunConfig.model_validate(c.model_dump(by_alias=True))
        rho, v = weyl_axes(c)
        R, V = np.meshgrid(rho, v, indexing="ij")
        if c.family == "emd3":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                e = emd_closed_forms(monodromy_spec(c), R, V, check_domain=False)["e2Sigma2"]
            curve = _zero_curve(R, V, e)
            return {"value": float(val), "min": float(np.nanmin(e)), "max": float(np.nanmax(e)),
                    "sign_change": bool(curve)}, curve
        D = delta_function(c)(R, V)
        return {"value": float(val), "min": float(np.nanmin(D)), "max": float(np.nanmax(D)),
                "sign_change": False}, []

    try:
        results = _run(lambda: _pmap(one, values))
    except ValueError as e:
        raise PipelineError(str(e), EXIT_USAGE) from e
    rows = [r for r, _ in results]
    curve_rows = [(r["value"], a, b) for r, pts in results for a, b in pts]
    files = {"sweep.csv": render_csv(["value", "min", "max", "sign_change"],
                                     [np.array([r[k] for r in rows], float) for k in ("value", "min", "max", "sign_change")])}
    if cfg.family == "emd3":
        arr = np.array(curve_rows, float).reshape(-1, 3)
        files["curve.csv"] = render_csv(["value", "rho", "v"], [arr[:, 0], arr[:, 1], arr[:, 2]])
    files["sweep.json"] = _json({"config": cfg.model_dump(by_alias=True), "param": param, "rows": rows})
    return RunResult(command="sweep", summary={"param": param, "rows": rows}, files=files)


# -------------------------------------------------------------------- catalog

def catalog(check: bool = False, m: float = 1.0) -> RunResult:
    rows = mt.catalog_table()
    if check:
        errs = _run(lambda: _pmap(lambda e: mt.check_catalog_entry(e, m=m), mt.CATALOG))
        for row, err in zip(rows, errs):
            row["max_error"] = err
            row["passed"] = err < 1e-9
    width = max(len(r["name"]) for r in rows)
    lines = []
    for r in rows:
        tail = f"  err {r['max_error']:.1e}" if check else ""
        lines.append(f"{r['name']:<{width}}  {r['target']:<7}  {r['source']}{tail}")
    code = EXIT_OK if not check or all(r["passed"] for r in rows) else EXIT_CHECKS
    return RunResult(command="catalog", exit_code=code, summary={"table": "\n".join(lines), "rows": rows},
                     files={"catalog.json": _json(rows)})
