"""Numerical checks: field equations, linear system, monodromy constancy,
curvature invariants and extrinsic jumps across gluing surfaces."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._fd import d1_point, grid_d1


@dataclass
class VerificationReport:
    check: str
    value: float
    tolerance: float
    passed: bool
    order: float | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["value"] = float(self.value)
        return d

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.check}: {self.value:.3e} (tol {self.tolerance:.1e})"


def _grid(rho, v):
    return np.meshgrid(np.asarray(rho, float), np.asarray(v, float), indexing="ij")


# ----------------------------------------------------------- field equation

def _safe_inv_samples(S):
    bad = ~np.all(np.isfinite(S), axis=(-2, -1))
    if not np.any(bad):
        return np.linalg.inv(S)
    inv = np.linalg.inv(np.where(bad[..., None, None], np.eye(S.shape[-1]), S))
    return np.where(bad[..., None, None], np.nan, inv)


def field_eq_residual_samples(M, rho, v, sigma: int, Minv=None) -> np.ndarray:
    """sigma d_rho(rho A_rho) + d_v(rho A_v) from grid samples M[i, j]."""
    if Minv is None:
        Minv = np.linalg.inv(M)
    rho = np.asarray(rho, float)
    v = np.asarray(v, float)
    hr, hv = rho[1] - rho[0], v[1] - v[0]
    R = rho[:, None, None, None]
    F = R * (Minv @ grid_d1(M, hr, 0))
    G = R * (Minv @ grid_d1(M, hv, 1))
    return sigma * grid_d1(F, hr, 0) + grid_d1(G, hv, 1)


def _crop(E, margin):
    if margin:
        E = E[margin:-margin, margin:-margin]
    E = np.abs(E)
    if E.ndim > 2:
        E = E.max(axis=tuple(range(2, E.ndim)))
    return E


def _interior_max(E, margin):
    E = _crop(E, margin)
    return float(np.nanmax(E)) if np.any(np.isfinite(E)) else float("nan")


def _interior_l2(E, margin):
    E = _crop(E, margin)
    return float(np.sqrt(np.nanmean(E ** 2))) if np.any(np.isfinite(E)) else float("nan")


def field_eq_residual(M, sigma: int, rho, v, tol: float = 1e-6, margin: int = 4,
                      name: str = "field equation", mask: bool = False) -> VerificationReport:
    """Max-norm of d(rho * star(M^-1 dM)) on a Weyl grid.

    M is a callable (rho, v) -> (..., k, k) or an array of grid samples.  The
    order estimate compares with the same grid at twice the spacing.  The
    outermost `margin` rows, where nested one-sided stencils are used, are
    left out of the norm.  With `mask`, non-finite or singular samples are
    excluded together with every stencil that touches them.
    """
    rho = np.asarray(rho, float)
    v = np.asarray(v, float)
    if np.any(rho <= 0):
        raise ValueError("grid must stay off the axis rho = 0")
    S = M(*_grid(rho, v)) if callable(M) else np.asarray(M, dtype=float)
    finite = np.all(np.isfinite(S), axis=(-2, -1))
    excluded = int(np.sum(~finite))
    if excluded:
        if not mask:
            raise ValueError("non-finite samples on the grid")
        # masked points stay NaN; stencils touching them drop out of the norm
        S = np.where(finite[..., None, None], S, np.nan)
        det = np.linalg.det(np.where(finite[..., None, None], S, np.eye(S.shape[-1])))
    else:
        det = np.linalg.det(S)
    singular = finite & (np.abs(det) < 1e-300)
    if np.any(singular):
        S = np.where(singular[..., None, None], np.nan, S)
        excluded += int(singular.sum())
    with np.errstate(invalid="ignore"):
        E = field_eq_residual_samples(S, rho, v, sigma, _safe_inv_samples(S))
    val = _interior_max(E, margin)
    if not np.isfinite(val):
        raise ValueError("no grid point with a complete stencil")
    order = None
    if rho.size >= 20 and v.size >= 20:
        S2 = S[::2, ::2]
        with np.errstate(invalid="ignore"):
            E2 = field_eq_residual_samples(S2, rho[::2], v[::2], sigma, _safe_inv_samples(S2))
        v2 = _interior_max(E2, margin)
        if val > 0 and np.isfinite(v2) and v2 > 1e3 * np.finfo(float).eps:
            order = math.log2(v2 / val)
    with np.errstate(invalid="ignore"):
        A = rho[:, None, None, None] * (_safe_inv_samples(S) @ grid_d1(S, rho[1] - rho[0], 0))
    scale = float(np.nanmax(np.abs(A)))
    return VerificationReport(name, val, tol, bool(val < tol), order,
                              {"grid": [int(rho.size), int(v.size)], "l2": _interior_l2(E, margin),
                               "scale": scale, "sigma": sigma, "excluded_points": excluded})


# ------------------------------------------------------------- linear system

def _partials(f, rho, v, h):
    fr = d1_point(lambda x: f(x, v), rho, h)
    fv = d1_point(lambda x: f(rho, x), v, h)
    return fr, fv


def bm_residual(X, M, phi, sigma: int, rho, v, h: float = 1e-4, tol: float = 1e-6,
                name: str = "linear system") -> VerificationReport:
    """Residuals of phi(dX + A X) = star dX in both equivalent forms.

    X(rho, v) -> (..., k, k) is the solution already evaluated at tau = phi.
    Form 2 is (phi^2 + sigma) dX X^-1 + phi^2 A + phi star A = 0; it is also
    rebuilt from form 1 through the exact identity
    R2 = phi R1 X^-1 + star(R1 X^-1), and the two must agree to 1e-12
    relative to the size of the terms.
    """
    rho, v = _grid(rho, v)
    Xv = X(rho, v)
    Mv = M(rho, v)
    p = phi(rho, v)[..., None, None]
    Xr, Xz = _partials(X, rho, v, h)
    Mr, Mz = _partials(M, rho, v, h)
    Minv = np.linalg.inv(Mv)
    Ar, Az = Minv @ Mr, Minv @ Mz
    Xi = np.linalg.inv(Xv)
    R1r = p * (Xr + Ar @ Xv) - Xz
    R1v = p * (Xz + Az @ Xv) + sigma * Xr
    R2r = (p * p + sigma) * Xr @ Xi + p * p * Ar + p * Az
    R2v = (p * p + sigma) * Xz @ Xi + p * p * Az - sigma * p * Ar
    Y2r = p * R1r @ Xi + R1v @ Xi
    Y2v = p * R1v @ Xi - sigma * R1r @ Xi
    r1 = float(max(np.max(np.abs(R1r)), np.max(np.abs(R1v))))
    r2 = float(max(np.max(np.abs(R2r)), np.max(np.abs(R2v))))
    # both forms are sums of O(size) terms, so agreement is judged relative to them
    size = float(max(np.max(np.abs((p * p + sigma) * Xr @ Xi)), np.max(np.abs(p * p * Ar)),
                     np.max(np.abs(p * Az)), 1.0))
    agree = float(max(np.max(np.abs(R2r - Y2r)), np.max(np.abs(R2v - Y2v)))) / size
    ok = r1 < tol and r2 < tol and agree < 1e-12
    return VerificationReport(name, max(r1, r2), tol, bool(ok), None,
                              {"form1": r1, "form2": r2, "form_agreement": agree})


def monodromy_constancy(product, rho, v, tol: float = 1e-8,
                        name: str = "monodromy constancy") -> VerificationReport:
    """Relative variation over the grid of a matrix field that should be constant."""
    rho, v = _grid(rho, v)
    P = np.asarray(product(rho, v))
    ref = P.reshape((-1,) + P.shape[-2:]).mean(axis=0)
    var = float(np.max(np.abs(P - ref)) / max(np.max(np.abs(ref)), 1e-300))
    return VerificationReport(name, var, tol, bool(var < tol), None,
                              {"mean": np.round(ref, 15).tolist() if np.isrealobj(ref) else str(ref)})


def product_solution_predicate(M1, M2, sigma: int, rho, v, tol: float = 1e-6,
                               margin: int = 4) -> VerificationReport:
    """d(rho M2^-1 M1^-1 (star dM1) M2) on a grid: zero iff M1 M2 solves the
    field equations, given that M1 and M2 do."""
    rho = np.asarray(rho, float)
    v = np.asarray(v, float)
    hr, hv = rho[1] - rho[0], v[1] - v[0]
    RR, VV = _grid(rho, v)
    A, B = M1(RR, VV), M2(RR, VV)
    N = np.linalg.inv(B) @ np.linalg.inv(A)
    R = rho[:, None, None, None]
    dAr, dAv = grid_d1(A, hr, 0), grid_d1(A, hv, 1)
    # star(a d rho + b dv) = b d rho - sigma a dv
    Yr = R * N @ dAv @ B
    Yv = -sigma * R * N @ dAr @ B
    E = grid_d1(Yv, hr, 0) - grid_d1(Yr, hv, 1)
    val = _interior_max(E, margin)
    return VerificationReport("product criterion", val, tol, bool(val < tol), None,
                              {"grid": [int(rho.size), int(v.size)], "l2": _interior_l2(E, margin)})


# ---------------------------------------------------------------- curvature

def _metric_derivs(gfun, x1, x2, h1, h2):
    """g, dg (index order d, a, b) and ddg on arrays of points; the metric
    depends on coordinates 1 and 2 only."""
    def g(a, b):
        return gfun(a, b)

    def d(f, x, h):
        # per-point steps broadcast over the trailing 4 x 4 axes
        hh = np.asarray(h, float)
        return (-f(x + 2 * hh) + 8 * f(x + hh) - 8 * f(x - hh) + f(x - 2 * hh)) / (12 * hh[..., None, None])

    g0 = g(x1, x2)
    shape = g0.shape[:-2]
    d1 = d(lambda s: g(s, x2), x1, h1)
    d2 = d(lambda s: g(x1, s), x2, h2)
    dd11 = d(lambda s: d(lambda q: g(q, x2), s, h1), x1, h1)
    dd22 = d(lambda s: d(lambda q: g(x1, q), s, h2), x2, h2)
    dd12 = d(lambda s: d(lambda q: g(q, s), x1, h1), x2, h2)
    dg = np.zeros(shape + (4, 4, 4))
    dg[..., 1, :, :] = d1
    dg[..., 2, :, :] = d2
    ddg = np.zeros(shape + (4, 4, 4, 4))
    ddg[..., 1, 1, :, :] = dd11
    ddg[..., 2, 2, :, :] = dd22
    ddg[..., 1, 2, :, :] = dd12
    ddg[..., 2, 1, :, :] = dd12
    return g0, dg, ddg


def riemann_invariants(g, dg, ddg):
    """Kretschmann, Ricci scalar and max |Ricci| from g and its derivatives."""
    gi = np.linalg.inv(g)
    # Christoffel of the first kind G[e,b,c] = 1/2 (d_b g_ec + d_c g_eb - d_e g_bc)
    G = 0.5 * (np.einsum("...bec->...ebc", dg) + np.einsum("...ceb->...ebc", dg) - dg)
    Gam = np.einsum("...ae,...ebc->...abc", gi, G)
    # d_d of G[e,b,c]
    dG = 0.5 * (np.einsum("...dbec->...debc", ddg) + np.einsum("...dceb->...debc", ddg)
                - np.einsum("...edbc->...debc", ddg))
    dgi = -np.einsum("...ae,...def,...fb->...dab", gi, dg, gi)
    dGam = np.einsum("...dae,...ebc->...dabc", dgi, G) + np.einsum("...ae,...debc->...dabc", gi, dG)
    # R^a_{bcd} = d_c Gam^a_{db} - d_d Gam^a_{cb} + Gam^a_{ce} Gam^e_{db} - Gam^a_{de} Gam^e_{cb}
    Rm = (np.einsum("...cadb->...abcd", dGam) - np.einsum("...dacb->...abcd", dGam)
          + np.einsum("...ace,...edb->...abcd", Gam, Gam) - np.einsum("...ade,...ecb->...abcd", Gam, Gam))
    Rlow = np.einsum("...ae,...ebcd->...abcd", g, Rm)
    Rup = np.einsum("...bf,...cg,...dh,...afgh->...abcd", gi, gi, gi, Rm)
    K = np.einsum("...abcd,...abcd->...", Rlow, Rup)
    Ric = np.einsum("...abad->...bd", Rm)
    Rs = np.einsum("...bd,...bd->...", gi, Ric)
    return K, Rs, np.max(np.abs(Ric), axis=(-2, -1))


def curvature_scalars(gfun, x1, x2, h: float = 1e-3, refine: bool = True) -> dict:
    """Kretschmann scalar by finite differences of the metric components.

    gfun(x1, x2) returns (..., 4, 4) in coordinates (t, x1, x2, phi).  With
    `refine`, the value is recomputed at h/2 and h/4 to estimate the order.
    """
    x1 = np.asarray(x1, float)
    x2 = np.asarray(x2, float)
    h1 = h * np.maximum(1.0, np.abs(x1))
    h2 = h * np.maximum(1.0, np.abs(x2))
    K, Rs, Ric = riemann_invariants(*_metric_derivs(gfun, x1, x2, h1, h2))
    out = {"K": K, "R": Rs, "ricci_max": Ric, "order": None, "under_resolved": False}
    if refine:
        K2 = riemann_invariants(*_metric_derivs(gfun, x1, x2, h1 / 2, h2 / 2))[0]
        K4 = riemann_invariants(*_metric_derivs(gfun, x1, x2, h1 / 4, h2 / 4))[0]
        a = np.max(np.abs(K - K2))
        b = np.max(np.abs(K2 - K4))
        tiny = 1e-9 * max(1.0, float(np.max(np.abs(K2))))
        if a > tiny and b > 0:
            order = math.log2(a / b)
            out["order"] = order
            out["under_resolved"] = bool(order < 2)
        out["K"] = K2
    return out


# ------------------------------------------------------------ gluing jumps

def _open_weights():
    # value and first derivative at 0 from samples at 1..5
    nodes = np.arange(1, 6, dtype=float)
    V = np.vander(nodes, 5, increasing=True).T
    w0 = np.linalg.solve(V, np.eye(5)[0])
    w1 = np.linalg.solve(V, np.eye(5)[1])
    return w0, w1


_W0, _W1 = _open_weights()


def _open_onesided(f, x, h, s):
    """Value and derivative at x from samples strictly on one side.

    The point x itself is never evaluated: on a fold of a chart map the
    pulled-back metric is only defined as a limit there.
    """
    hs = s * h
    F = [f(x + k * hs) for k in range(1, 6)]
    val = sum(w * Fk for w, Fk in zip(_W0, F))
    der = sum(w * Fk for w, Fk in zip(_W1, F)) / hs
    return val, der


def half_lie_derivative(gfun, ell, r, th, side: tuple[int, int], h: float = 1e-4):
    """1/2 (L_ell g)_{mu nu} at (r, theta), coordinates (t, r, theta, phi).

    g and its derivatives are one-sided limits from the side given by the
    signs `side` = (sign in r, sign in theta), so each metric is only used
    where it is smooth.  Returns (half Lie derivative, limiting g).
    """
    g, dr = _open_onesided(lambda x: gfun(x, th), r, h, side[0])
    _, dth = _open_onesided(lambda x: gfun(r, x), th, h, side[1])
    l = ell(r, th)
    dl = np.zeros((4, 4))  # dl[mu, lam] = d_mu ell^lam
    dl[1] = d1_point(lambda x: ell(x, th), r, h)
    dl[2] = d1_point(lambda x: ell(r, x), th, h)
    lie = l[1] * dr + l[2] * dth + np.einsum("ln,ml->mn", g, dl) + np.einsum("ml,nl->mn", g, dl)
    return 0.5 * lie, g


def extrinsic_jump(g_minus, side_minus, g_plus, side_plus, ell, k_lower, r, th, h: float = 1e-4,
                   null_tol: float = 1e-6) -> dict:
    """[1/2 L_ell g] = plus side minus minus side, on the tangent frame
    (d_t, d_phi, k) of the null surface; k is raised with the minus-side metric.

    ell must be null for the limiting metric and satisfy k(ell) != 0.
    """
    Jm, gm = half_lie_derivative(g_minus, ell, r, th, side_minus, h)
    Jp, gp = half_lie_derivative(g_plus, ell, r, th, side_plus, h)
    J = Jp - Jm
    k = np.linalg.inv(gm) @ k_lower(r, th)
    l = ell(r, th)
    scale = float(np.max(np.abs(gm)) * np.max(np.abs(l)) ** 2)
    if abs(l @ gm @ l) > null_tol * scale:
        raise ValueError(f"ell is not null on the surface: g(ell, ell) = {l @ gm @ l:.3e}")
    if abs(k_lower(r, th) @ l) < null_tol:
        raise ValueError("ell is not transverse: k(ell) = 0")
    et = np.array([1.0, 0, 0, 0])
    ep = np.array([0, 0, 0, 1.0])
    return {"metric_mismatch": float(np.max(np.abs(gp - gm))), "tt": et @ J @ et, "tphi": et @ J @ ep, "phiphi": ep @ J @ ep,
            "kk": k @ J @ k, "kt": k @ J @ et, "kphi": k @ J @ ep, "full": J}


# ----------------------------------------- interior gluing r = m + m cos(theta)

def gluing_frame(m: float):
    """Transverse null field ell and normal co-vector k of r = m + m cos(theta)."""
    ell = lambda r, th: np.array([0.0, -0.5, -0.5 / math.sqrt((2 * m - r) * r), 0.0])
    k = lambda r, th: np.array([0.0, 1.0, math.sqrt((2 * m - r) * r), 0.0])
    return ell, k


def reference_interior_metrics(m: float):
    """Closed-form metrics on the two sides: interior Schwarzschild for r above
    the surface and its partner for r below it."""
    def g_upper(r, th):
        g = np.zeros((4, 4))
        f = 2 * m / r - 1
        g[0, 0], g[1, 1] = f, -1 / f
        g[2, 2], g[3, 3] = r * r, (r * math.sin(th)) ** 2
        return g

    def g_lower(r, th):
        g = np.zeros((4, 4))
        c4 = 4 * m * m * math.cos(th / 2) ** 4
        g[0, 0] = math.tan(th / 2) ** 2
        g[1, 1] = -c4 / (r * (2 * m - r))
        g[2, 2] = c4
        g[3, 3] = c4 * r * (2 * m - r) / m ** 2
        return g
    return g_upper, g_lower


def quoted_jump(m: float, r):
    """(dt^2, dphi^2) coefficients of the jump as usually quoted."""
    return -m / r, (2 * m - r) * r * r / m ** 2


def derived_jump(m: float, r):
    """(dt^2, dphi^2) coefficients obtained by direct evaluation of
    1/2 L_ell g on both sides; each side contributes -/+ 2m cos^4(theta/2)
    to the dphi^2 part."""
    return -m / r ** 2, r * r / m


def interior_jump(kind: str, m: float, theta: float, h: float = 1e-4) -> dict:
    """Jump across the I/II line of an interior extension, from the
    pipeline metrics pulled back to the spherical chart."""
    from .metric import CoordinateMap, apply_map, region_patch, table2_maps
    chart = CoordinateMap("interior_spherical", table2_maps(m)["I"])

    def side(reg):
        mp = apply_map(region_patch(kind, reg, m), chart)
        return lambda r, th: mp.metric(np.asarray(r, float), np.asarray(th, float))

    ell, k = gluing_frame(m)
    r = m + m * math.cos(theta)
    return extrinsic_jump(side("I"), (1, 1), side("II"), (-1, -1), ell, k, r, theta, h)
