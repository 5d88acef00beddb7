"""Acceptance criteria, one PASS/FAIL line each (see the terminal summary)."""

import math
import warnings

import numpy as np
import pytest

from weylfactor import metric as mt
from weylfactor import pipeline
from weylfactor.contour import winding_number
from weylfactor.factorization import (MonodromySpec, delta_closed_form, emd_closed_forms, emd_matrix, kasner_factor,
                                      kasner_monodromy, kasner_reference_constants, kasner_X_phi, kasner_Xtilde_phi,
                                      m_plus_grid, solution_family_multiplier)
from weylfactor.schemas import RunConfig
from weylfactor.spectral import PhiSpec, fixed_points, involution, phi_eval
from weylfactor.verify import (bm_residual, curvature_scalars, derived_jump, field_eq_residual, interior_jump,
                               monodromy_constancy, quoted_jump)

from test_contour import random_witness


def expr_psi_i(rho, v, m):
    a = np.sqrt((v - m) ** 2 + rho ** 2)
    b = np.sqrt((v + m) ** 2 + rho ** 2)
    return np.log(0.5 * (v * v + rho * rho - m * m) / (a * b) + 0.5)


def expr_K(rho, v, m):
    a = np.sqrt((v - m) ** 2 + rho ** 2)
    b = np.sqrt((v + m) ** 2 + rho ** 2)
    return 48 * m * m * (2 / (2 * m + a + b)) ** 6


def diag2(a):
    a = np.asarray(a)
    out = np.zeros(a.shape + (2, 2), dtype=np.result_type(a, float))
    out[..., 0, 0] = a
    out[..., 1, 1] = 1 / a
    return out


# 1 ---------------------------------------------------------------------------

def test_c1_schwarzschild_reconstruction(criteria):
    m = 1.0
    cfg = RunConfig(family="eps1", sigma=1, m=m)
    r = np.linspace(2.2 * m, 10 * m, 100)
    th = np.linspace(0.01, math.pi - 0.01, 100)
    Rr, Th = np.meshgrid(r, th, indexing="ij")
    rho, v = mt.spherical_exterior(m).fmap(Rr, Th)
    D = pipeline.delta_function(cfg)(np.real(rho), np.real(v))
    err = float(np.max(np.abs(D - (1 - 2 * m / Rr))))
    ok1 = criteria.below("1 Delta on the exterior chart vs 1 - 2m/r", err, 1e-9)

    cfg = RunConfig(family="eps1", sigma=1, m=m, anchor_value=0.0)
    F = pipeline.compute_fields(cfg)
    psi, info = pipeline.compute_psi(cfg, F)
    assert info["source"] == "line integral"
    diff = psi - expr_psi_i(F.R, F.V, m)
    dev = float(np.max(np.abs(diff - diff[0, 0])))
    ok2 = criteria.below("1 integrated psi vs closed form (constant matched)", dev, 1e-6)
    assert ok1 and ok2


# 2 ---------------------------------------------------------------------------

CLASS_CASES = [(1, c, (1.0, 2.0), (-0.5, 0.5)) for c in ("i", "ii", "iii", "iv")] + \
              [(-1, c, (0.2, 0.4), (-0.2, 0.2)) for c in ("i", "ii", "iii", "iv")]


def test_c2_curvature_oracle(criteria):
    m = 1.0
    worst = 0.0
    for sigma, cls, rr, vv in CLASS_CASES:
        p = mt.assemble_patch(lambda r, v: delta_closed_form(1, sigma, cls, r, v, m),
                              lambda r, v: mt.psi_closed_form(1, sigma, cls, r, v, m), sigma)
        R, V = np.meshgrid(np.linspace(*rr, 6)[1:-1], np.linspace(*vv, 6)[1:-1], indexing="ij")
        K = curvature_scalars(p.metric, R.ravel(), V.ravel())["K"]
        Kc = mt.kretschmann_closed_form(sigma, cls, R.ravel(), V.ravel(), m)
        if sigma == 1 and cls == "i":
            assert np.allclose(Kc, expr_K(R.ravel(), V.ravel(), m), rtol=1e-13)
        worst = max(worst, float(np.max(np.abs(K / Kc - 1))))
    ok1 = criteria.below("2 FD Kretschmann vs closed forms, 8 classes (relative)", worst, 1e-3)
    p = mt.assemble_patch(lambda r, v: delta_closed_form(1, 1, "i", r, v, m),
                          lambda r, v: mt.psi_closed_form(1, 1, "i", r, v, m), 1)
    K0 = curvature_scalars(p.metric, np.array([math.sqrt(3) * m]), np.array([0.0]))["K"][0]
    ok2 = criteria.below("2 spot value K(sqrt3 m, 0) vs 48/729 (relative)", abs(K0 * 729 / 48 - 1), 1e-3)
    assert ok1 and ok2


# 3 ---------------------------------------------------------------------------

def _configs():
    for sigma in (1, -1):
        for cls in ("i", "ii", "iii", "iv"):
            for inv in (False, True):
                yield RunConfig(family="eps1", sigma=sigma, **{"class": cls}, inverse=inv)
        for cls in ("i", "ii"):
            for inv in (False, True):
                yield RunConfig(family="eps0", sigma=sigma, **{"class": cls}, inverse=inv)
    for mode in ("meromorphic", "canonical"):
        yield RunConfig(family="kasner", sigma=-1, kasner_mode=mode)
    yield RunConfig(family="emd3", sigma=1)


def test_c3_field_equations(criteria, rng):
    worst, names = 0.0, []
    for cfg in _configs():
        F = pipeline.compute_fields(cfg)
        assert F.rho.size == 200 and F.v.size == 200
        rep = field_eq_residual(F.M, cfg.sigma, F.rho, F.v, mask=True)
        worst = max(worst, rep.value)
        names.append(f"{cfg.family}/{cfg.sigma}/{cfg.cls}{'/inv' if cfg.inverse else ''}")
    ok1 = criteria.below(f"3 field equations, {len(names)} pipeline solutions (200x200)", worst, 1e-6)

    rho, v = np.linspace(2.0, 3.0, 200), np.linspace(3.5, 4.5, 200)
    tilde = PhiSpec(0.0, -1, -1, (2.5, 4.0))
    kas = lambda r, z: diag2(np.asarray(r, float) ** 4)
    worst = 0.0
    for _ in range(5):
        a, b, K = rng.uniform(-3, 3), int(rng.integers(-4, 5)), rng.choice([-1, 1]) * rng.uniform(0.5, 2)
        f = solution_family_multiplier(a, b, K, tilde)
        worst = max(worst, field_eq_residual(f, -1, rho, v).value,
                    field_eq_residual(lambda r, z: kas(r, z) @ f(r, z), -1, rho, v).value)
    ok2 = criteria.below("3 multiplier family at 5 random (alpha, beta, K), alone and times Kasner M", worst, 1e-6)

    spec = MonodromySpec.emd3(1.0, 1.0, 2.0, 1.0)
    r3, v3 = np.linspace(1.5, 2.5, 200), np.linspace(0.5, 1.5, 200)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        e = field_eq_residual(lambda r, z: emd_matrix(spec, r, z), 1, r3, v3).value
    ok3 = criteria.below("3 emd3 coset field", e, 1e-6)

    rr, vv = np.linspace(1, 2, 200), np.linspace(-0.5, 0.5, 200)
    c1 = field_eq_residual(lambda r, z: np.stack([np.stack([r * np.exp(r * z), 0 * r], -1),
                                                  np.stack([0 * r, r ** -2.0], -1)], -2), 1, rr, vv).value
    R, V = np.meshgrid(rr, vv, indexing="ij")
    M = diag2(delta_closed_form(1, 1, "i", R, V))
    c2 = field_eq_residual(M * (1 + 0.01 * rng.standard_normal(M.shape)), 1, rr, vv).value
    ok4 = criteria.record("3 negative controls fail at O(1)", min(c1, c2), 1e-1, min(c1, c2) > 1e-1,
                          "value must exceed tol")
    assert ok1 and ok2 and ok3 and ok4


# 4 ---------------------------------------------------------------------------

def test_c4_linear_system(criteria, rng):
    r, v = np.linspace(2, 3, 25), np.linspace(3.5, 4.5, 25)
    M = lambda a, b: diag2(np.asarray(a, float) ** 4).astype(complex)
    worst, agree = 0.0, 0.0
    for _ in range(5):
        w = complex(rng.uniform(-5, 5), rng.uniform(0.5, 3))
        c = rng.normal(size=4)
        ps = PhiSpec(w, -1, 1, (2.5, 4.0))
        phi = lambda a, b, ps=ps: phi_eval(ps, a, b)
        X = lambda a, b, c=c, phi=phi: np.moveaxis(kasner_X_phi(c, phi(a, b), a), (0, 1), (-2, -1))
        rep = bm_residual(X, M, phi, -1, r, v)
        worst, agree = max(worst, rep.value), max(agree, rep.details["form_agreement"])
    ok1 = criteria.below("4 Kasner closed-form X at 5 random omega", worst, 1e-6)

    worst = 0.0
    for sigma, cls, rr, vv in CLASS_CASES:
        spec = MonodromySpec.diag(1, 1.0, sigma)
        rg, vg = np.linspace(*rr, 20), np.linspace(*vv, 20)
        for w in (3 + 1j, -2 + 0.5j):
            ps = PhiSpec(w, sigma, 1, (float(rg.mean()), float(vg.mean())))
            phi = lambda a, b, ps=ps: phi_eval(ps, a, b)
            Mf = lambda a, b, s=sigma, c=cls: diag2(delta_closed_form(1, s, c, a, b)).astype(complex)
            X = lambda a, b, sp=spec, c=cls, phi=phi: diag2(m_plus_grid(sp, c, a, b, phi(a, b)))
            rep = bm_residual(X, Mf, phi, sigma, rg, vg)
            worst, agree = max(worst, rep.value), max(agree, rep.details["form_agreement"])
    ok2 = criteria.below("4 factorization X at tau = phi, 8 eps=1 classes", worst, 1e-6)
    ok3 = criteria.below("4 agreement of the two residual forms", agree, 1e-12)
    assert ok1 and ok2 and ok3


# 5 ---------------------------------------------------------------------------

def test_c5_monodromy_constancy(criteria, rng):
    r, v = np.linspace(2, 3, 40), np.linspace(3.5, 4.5, 40)
    K = lambda a, b: diag2(np.asarray(a, float) ** 4)
    worst = 0.0
    for k in range(5):
        w = complex(rng.uniform(-3, 3), rng.uniform(0.5, 2))
        c, ct = kasner_reference_constants(w) if k < 2 else (rng.normal(size=4), rng.normal(size=4))
        ps = PhiSpec(w, -1, 1, (2.5, 4.0))

        def prod(a, b, ps=ps, c=c, ct=ct):
            p = phi_eval(ps, a, b)
            X = np.moveaxis(kasner_X_phi(c, p, a), (0, 1), (-2, -1))
            Xt = np.moveaxis(kasner_Xtilde_phi(ct, p, a), (0, 1), (-1, -2))
            return Xt @ K(a, b) @ X
        worst = max(worst, monodromy_constancy(prod, r, v).value)
    ok1 = criteria.below("5 grid variation of the Kasner monodromy (relative)", worst, 1e-8)
    c, ct = kasner_reference_constants(1.0)
    exact = np.array_equal(kasner_monodromy(c, ct), np.diag([16.0, 1 / 16]))
    ok2 = criteria.record("5 reference constants at omega = 1 give diag(16, 1/16)",
                          float(np.max(np.abs(kasner_monodromy(c, ct) - np.diag([16.0, 1 / 16])))), 0.0, exact,
                          "exact equality")
    assert ok1 and ok2


# 6 ---------------------------------------------------------------------------

def test_c6_canonical_vs_meromorphic(criteria, rng):
    worst, ref = 0.0, 0.0
    for _ in range(40):
        rho = rng.uniform(0.3, 4)
        v = rho + rng.uniform(0.1, 4)
        kc, km = kasner_factor("canonical", rho, v), kasner_factor("meromorphic", rho, v)
        t = km.tau1_tilde
        worst = max(worst, float(np.max(np.abs(km.M - kc.M @ np.diag([t ** -4, t ** 4])) / np.abs(km.M + (km.M == 0)))))
        # the exterior root of tau^2 - 2 v tau / rho + 1 carries the canonical entry
        ref = max(ref, abs(kc.M[0, 0] / (v + math.sqrt(v * v - rho * rho)) ** 4 - 1))
    ok1 = criteria.below("6 M = M_c diag(t~^-4, t~^4) on v > rho (relative)", worst, 1e-10)
    ok2 = criteria.below("6 canonical entry vs independent (v + sqrt(v^2 - rho^2))^4", ref, 1e-10)
    M = kasner_factor("canonical", 3.0, 5.0).M
    dev = float(np.max(np.abs(M - np.diag([6561.0, 1 / 6561])) / np.array([[6561, 1], [1, 1 / 6561]])))
    ok3 = criteria.below("6 M_c(3, 5) vs diag(6561, 1/6561) (relative)", dev, 1e-10)
    assert ok1 and ok2 and ok3


# 7 ---------------------------------------------------------------------------

def test_c7_interior_gluing(criteria, rng):
    m = 1.0
    ext = mt.extend_interior("smooth", m)
    t = np.arange(1, 101) / 128
    lines = [("I", "II", m - t * m, t * m), ("I", "IV", m - t * m, -t * m),
             ("II", "III", m + t * m, t * m), ("III", "IV", m + t * m, -t * m)]
    cont = max(float(np.max(np.abs(ext["delta_on"](a, r, v) - ext["delta_on"](b, r, v)))) for a, b, r, v in lines)
    ok1 = criteria.below("7 continuity across the internal lines (100 samples per line)", cont, 1e-8,
                         "samples on representable line points")
    r = rng.uniform(0.02, 1.98, 1000)
    th = rng.uniform(0.02, math.pi - 0.02, 1000)
    g = ext["metric_spherical"](r, th)
    ok = np.isfinite(g[:, 0, 0])
    f = 2 * m / r[ok] - 1
    err = float(np.max(np.abs(g[ok, 0, 0] - f) / np.maximum(1, np.abs(f))))
    ok2 = criteria.below("7 extended Delta vs 2m/r - 1 on the spherical chart", err, 1e-9)
    th = math.pi / 4
    rr = m + m * math.cos(th)
    sizes = []
    for kind in ("jump_1", "jump_2"):
        J = interior_jump(kind, m, th)
        sizes.append(abs(J["tt"]) + abs(J["phiphi"]))
    ok3 = criteria.record("7 jump extensions give a nonzero jump", min(sizes), 1e-5, min(sizes) > 1e-5,
                          "value must exceed tol")
    assert ok1 and ok2 and ok3


@pytest.mark.xfail(strict=True, reason="computed jump is -(m/r^2) dt^2 + (r^2/m) dphi^2; see decisions ledger")
def test_c7_jump_matches_quoted_form(criteria):
    m = 1.0
    worst = 0.0
    for th in (math.pi / 6, math.pi / 4, math.pi / 3):
        r = m + m * math.cos(th)
        J = interior_jump("jump_1", m, th)
        pt, pp = quoted_jump(m, r)
        dt, dp = derived_jump(m, r)
        assert abs(J["tt"] - dt) < 1e-5 and abs(J["phiphi"] - dp) < 1e-5
        worst = max(worst, abs(J["tt"] - pt), abs(J["phiphi"] - pp))
    criteria.below("7 jump vs -(m/r)dt^2 + ((2m-r)r^2/m^2)dphi^2", worst, 1e-5,
                   "pipeline and reference route both give -(m/r^2), r^2/m")
    assert worst < 1e-5


# 8 ---------------------------------------------------------------------------

def _entry(name):
    return next(e for e in mt.CATALOG if e.name == name)


def test_c8_eps0_catalog(criteria, rng):
    m = 1.0
    e = _entry("Rindler")
    piece = e.pieces[0]
    a, b = piece.sampler(20, rng, m)
    mp = mt.apply_map(mt.catalog_patch(e, piece, m), piece.cmap(m))
    K = curvature_scalars(mp.metric, a, b)["K"]
    ok1 = criteria.below("8 Rindler chart is flat, max |K|", float(np.max(np.abs(K))), 1e-8)
    ok1b = criteria.below("8 Rindler form componentwise", mt.check_catalog_entry(e, m), 1e-9)
    ok2 = criteria.below("8 inverse branch vs AIII (r space-like)", mt.check_catalog_entry(_entry("AIII, r space-like"), m), 1e-9)
    kas = [x for x in mt.CATALOG if x.target == "Kasner"]
    worst = max(mt.check_catalog_entry(x, m) for x in kas)
    p = np.array([1.0, 0.0, 0.0])
    assert p.sum() == 1 and (p * p).sum() == 1
    ok3 = criteria.below(f"8 sigma = -1 branches vs Kasner (1,0,0), {len(kas)} targets", worst, 1e-9)
    assert ok1 and ok1b and ok2 and ok3


# 9 ---------------------------------------------------------------------------

def _emd(spec, r, v):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return emd_closed_forms(spec, r, v, check_domain=False)


RAYS = np.linspace(-1.4, 1.4, 10)


def test_c9a_constant_dilaton(criteria):
    R, V = np.meshgrid(np.linspace(0.3, 4, 100), np.linspace(-3, 3, 100), indexing="ij")
    e = _emd(MonodromySpec.emd3(1.0, 1.0, 2.0, 2.0), R, V)["em2Phi"]
    assert criteria.below("9a P = Q gives constant exp(-2 Phi), grid variation", float(np.ptp(e)), 1e-10)


def test_c9b_far_field(criteria):
    worst = 0.0
    for h1, h2 in ((1.0, 1.0), (2.0, 0.5), (0.3, 1.7)):
        s = 1e5
        e = _emd(MonodromySpec.emd3(h1, h2, 2.0, 5.0), s * np.cos(RAYS), s * np.sin(RAYS))["em2Phi"]
        worst = max(worst, float(np.max(np.abs(e / (h1 / h2) - 1))))
    assert criteria.below("9b exp(-2 Phi) -> h1/h2 along 10 rays (relative)", worst, 1e-3)


@pytest.mark.xfail(strict=True, reason="the near-origin limit comes out as Q/P; see decisions ledger")
def test_c9b_near_origin(criteria):
    worst, seen = 0.0, []
    for Q, P in ((1.0, 3.0), (2.0, 5.0)):
        s = 1e-6
        e = _emd(MonodromySpec.emd3(1.0, 1.0, Q, P), s * np.cos(RAYS), s * np.sin(RAYS))["em2Phi"]
        assert np.max(np.abs(e - Q / P)) < 1e-3
        seen.append(float(e.mean()))
        worst = max(worst, float(np.max(np.abs(e - P / Q))))
    criteria.below("9b exp(-2 Phi) -> P/Q near the origin along 10 rays", worst, 1e-3,
                   f"observed {seen[0]:.4f}, {seen[1]:.4f} = Q/P")
    assert worst < 1e-3


def test_c9c_psi(criteria):
    R, V = np.meshgrid(np.linspace(0.5, 2.5, 12), np.linspace(-0.5, 1.5, 12), indexing="ij")
    clo = mt.emd_psi_closure(MonodromySpec.emd3(1.3, 0.7, 0.9, 1.6), R, V)
    ok1 = criteria.below("9c psi mixed-partial closure", clo, 1e-8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        z = float(np.max(np.abs(mt.emd_psi(MonodromySpec.emd3(1.0, 2.0, 1.5, 3.0), R, V, "zero"))))
    ok2 = criteria.below("9c psi at J = P/h2 - Q/h1 = 0 with c1 = 0", z, 1e-12)
    assert ok1 and ok2


def test_c9d_a_phi_series(criteria):
    R, V = np.meshgrid(np.linspace(0.5, 2.5, 7), np.linspace(-0.5, 1.5, 7), indexing="ij")
    worst = 0.0
    exps = []
    for order in range(3):
        res = []
        for J in (0.1, 0.05, 0.025):
            s = MonodromySpec.emd3(1.0, 1.0, 1.0, 1.0 + J)
            res.append(max(float(np.max(np.abs(x))) for x in mt.emd_a_phi_residual(s, R, V, order)))
        e = math.log2(res[0] / res[2]) / 2
        exps.append(e)
        worst = max(worst, abs(e - (order + 1)))
    assert criteria.below("9d A_phi residual exponent vs order + 1 (orders 0, 1, 2)", worst, 0.3,
                          "observed " + ", ".join(f"{e:.2f}" for e in exps))


def test_c9e_boundary_curve(criteria):
    R, V = np.meshgrid(np.linspace(0.01, 4, 400), np.linspace(-4, 4, 400), indexing="ij")
    neg = _emd(MonodromySpec.emd3(1.0, 1.0, -1.0, 1.0), R, V)["e2Sigma2"]
    pts = pipeline._zero_curve(R, V, neg)
    off = [p for p in pts if p[0] > 0.1]
    ok1 = criteria.record("9e QP < 0: exp(2 Sigma2) = 0 crossings off the axis", float(len(off)), 0, len(off) > 0,
                          "count must be positive")
    pos = _emd(MonodromySpec.emd3(1.0, 1.0, 1.0, 2.0), R, V)["e2Sigma2"]
    n = len(pipeline._zero_curve(R, V, pos)) + int(np.sum(pos <= 0))
    ok2 = criteria.record("9e QP > 0: no sign change", float(n), 0, n == 0, "count must be zero")
    assert ok1 and ok2


# 10 --------------------------------------------------------------------------

@pytest.mark.parametrize("sigma", [1, -1])
def test_c10_winding_parity(criteria, rng, sigma):
    bad, tested, fp = 0, 0, 0.0
    for _ in range(5):
        c, _, _ = random_witness(rng, sigma)
        step = c.max_segment()
        fp = max(fp, max(float(np.min(np.abs(c.points - f))) / step for f in fixed_points(sigma)))
        done = 0
        while done < 200:
            p = complex(rng.uniform(0.1, 5) * np.exp(1j * rng.uniform(-np.pi, np.pi)))
            q = complex(involution(p, sigma))
            # winding is undefined on the curve itself; draw again
            if min(np.min(np.abs(c.points - p)), np.min(np.abs(c.points - q))) < 2 * step:
                continue
            done += 1
            bad += winding_number(c, p) + winding_number(c, q) != 1
        tested += done
    ok1 = criteria.record(f"10 sigma = {sigma:+d}: winding parity failures over {tested} points", float(bad), 0,
                          bad == 0, "must be zero")
    ok2 = criteria.below(f"10 sigma = {sigma:+d}: fixed-point distance in segment lengths", fp, 1.0)
    assert ok1 and ok2
