"""Four-dimensional metrics from the two-dimensional solution data.

A WeylPatch holds Delta, psi and B as callables of (rho, v) together with the
signature data.  Coordinate maps are pulled back numerically with an exact
(complex-step) Jacobian, so every chart of the catalog is just a map from
new coordinates (a, b) to (rho, v) plus an optional rescaling of t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from ._fd import complex_step_jacobian, grid_d1

FORM_A = "A"  # ds2^2 = sigma d rho^2 + dv^2
FORM_B = "B"  # ds2^2 = d rho^2 + sigma dv^2


# ------------------------------------------------------------ closed forms

def psi_closed_form(eps: int, sigma: int, cls: str, rho, v, m: float = 1.0):
    """psi for the diagonal families, integration constant zero."""
    from .factorization import _edge_sqrt, radical_sum
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    r2 = rho * rho
    if eps == 0:
        R = np.sqrt(v * v + sigma * r2)
        vv = v if cls == "i" else -v
        return np.log(np.abs(radical_sum(vv, R, sigma * r2)) / (2 * R))
    k = 4 * m * m * r2
    if sigma == 1:
        RR = np.sqrt((v - m) ** 2 + r2) * np.sqrt((v + m) ** 2 + r2)
        N = v * v + r2 - m * m
        num = radical_sum(N, RR, k) if cls in ("i", "iii") else radical_sum(-N, RR, k)
        return np.log(num / (2 * RR))
    S = _edge_sqrt((m - v - rho) * (m - v + rho), m) * _edge_sqrt((m + v - rho) * (m + v + rho), m)
    N = m * m - v * v + r2
    num = radical_sum(-N, S, -k) if cls in ("i", "iii") else radical_sum(N, S, -k)
    return np.log(np.abs(num) / (2 * S))


def kretschmann_closed_form(sigma: int, cls: str, rho, v, m: float = 1.0):
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    if sigma == 1:
        a = np.sqrt((v - m) ** 2 + rho ** 2)
        b = np.sqrt((v + m) ** 2 + rho ** 2)
    else:
        a = np.sqrt((m - v) ** 2 - rho ** 2)
        b = np.sqrt((m + v) ** 2 - rho ** 2)
    den = {"i": 2 * m + a + b, "ii": 2 * m + b - a, "iii": 2 * m - a - b, "iv": 2 * m + a - b}[cls]
    return 48 * m * m * (2 / den) ** 6


# ------------------------------------------------------------------ patch

@dataclass
class WeylPatch:
    delta: Callable
    psi: Callable
    sigma: int
    form: str = FORM_A
    B: Callable | None = None
    meta: dict = field(default_factory=dict)

    def metric(self, rho, v) -> np.ndarray:
        """Components in (t, rho, v, phi); shape (..., 4, 4)."""
        rho = np.asarray(rho, dtype=float)
        v = np.asarray(v, dtype=float)
        D = self.delta(rho, v)
        e = np.exp(self.psi(rho, v))
        Bv = self.B(rho, v) if self.B is not None else np.zeros_like(D)
        s = self.sigma
        g = np.zeros(np.shape(D) + (4, 4))
        g[..., 0, 0] = -s * D
        g[..., 0, 3] = g[..., 3, 0] = -s * D * Bv
        g[..., 3, 3] = -s * D * Bv ** 2 + rho ** 2 / D
        cr, cv = (s, 1) if self.form == FORM_A else (1, s)
        g[..., 1, 1] = cr * e / D
        g[..., 2, 2] = cv * e / D
        return g

    def components(self, rho, v) -> dict:
        g = self.metric(rho, v)
        return {"Delta": self.delta(rho, v), "psi": self.psi(rho, v),
                "B": self.B(rho, v) if self.B is not None else np.zeros(np.shape(rho)),
                "g_tt": g[..., 0, 0], "g_rr": g[..., 1, 1], "g_vv": g[..., 2, 2],
                "g_phiphi": g[..., 3, 3], "g_tphi": g[..., 0, 3]}


def assemble_patch(delta, psi, sigma: int, form: str = FORM_A, B=None, **meta) -> WeylPatch:
    if sigma not in (1, -1):
        raise ValueError("sigma must be +1 or -1")
    if form not in (FORM_A, FORM_B):
        raise ValueError("form must be 'A' or 'B'")
    return WeylPatch(delta, psi, sigma, form, B, dict(meta))


class SignatureViolation(ValueError):
    def __init__(self, points):
        self.points = [(float(a), float(b)) for a, b in points]
        head = ", ".join(f"({a:.6g}, {b:.6g})" for a, b in self.points[:5])
        more = f" and {len(self.points) - 5} more" if len(self.points) > 5 else ""
        super().__init__(f"signature violation: Delta <= 0 at {head}{more}")


def signature_violations(D, g, rho, v, n: int = 100, seed: int = 0) -> list:
    """Points with Delta <= 0, plus any of n random points where det g >= 0.

    Non-finite Delta (clipped points) is skipped.
    """
    D = np.asarray(D, float).ravel()
    rho = np.asarray(rho, float).ravel()
    v = np.asarray(v, float).ravel()
    g = np.asarray(g, float).reshape(-1, 4, 4)
    bad = ~(D > 0) & np.isfinite(D)
    out = list(zip(rho[bad], v[bad]))
    fin = np.flatnonzero(np.isfinite(D))
    if fin.size:
        pick = np.sort(np.random.default_rng(seed).choice(fin, size=min(n, fin.size), replace=False))
        det = np.linalg.det(g[pick])
        k = pick[~(det < 0)]
        out += [p for p in zip(rho[k], v[k]) if p not in out]
    return out


def check_signature(patch: WeylPatch, rho, v, n: int = 100, seed: int = 0) -> None:
    """Raise SignatureViolation unless Delta > 0 and det g < 0 on the sample."""
    rho = np.asarray(rho, float)
    v = np.asarray(v, float)
    pts = signature_violations(patch.delta(rho, v), patch.metric(rho, v), rho, v, n, seed)
    if pts:
        raise SignatureViolation(pts)


def lorentzian(g: np.ndarray) -> np.ndarray:
    """True where the 4x4 metric has one negative eigenvalue."""
    ev = np.linalg.eigvalsh(g)
    return np.sum(ev < 0, axis=-1) == 1


# ------------------------------------------------------------------- maps

@dataclass
class CoordinateMap:
    name: str
    fmap: Callable  # (a, b) -> (rho, v); must accept complex input
    t_scale: float = 1.0
    orientation_flip: bool = False  # ds2^2 -> -ds2^2 accompanies the map


@dataclass
class MappedPatch:
    base: WeylPatch
    cmap: CoordinateMap

    def metric(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        rho, v = self.cmap.fmap(a, b)
        rho, v = np.real(rho), np.real(v)
        g = self.base.metric(rho, v)
        ra, rb, va, vb = complex_step_jacobian(self.cmap.fmap, a, b)
        J = np.zeros(np.shape(a) + (4, 4))
        J[..., 0, 0] = self.cmap.t_scale
        J[..., 1, 1], J[..., 1, 2] = ra, rb
        J[..., 2, 1], J[..., 2, 2] = va, vb
        J[..., 3, 3] = 1.0
        return np.einsum("...ia,...ij,...jb->...ab", J, g, J)

    def delta(self, a, b):
        rho, v = self.cmap.fmap(np.asarray(a, float), np.asarray(b, float))
        return self.base.delta(np.real(rho), np.real(v))


def apply_map(patch: WeylPatch, cmap: CoordinateMap) -> MappedPatch:
    return MappedPatch(patch, cmap)


def _sqrt(x):
    return np.sqrt(x + 0j) if np.iscomplexobj(x) else np.sqrt(x)


def spherical_exterior(m):
    """(r, theta) -> (sqrt(r^2 - 2mr) sin theta, (r - m) cos theta)."""
    return CoordinateMap("spherical_exterior",
                         lambda r, th: (_sqrt(r * r - 2 * m * r) * np.sin(th), (r - m) * np.cos(th)))


def spherical_negative_mass(m):
    return CoordinateMap("spherical_negative_mass",
                         lambda r, th: (_sqrt(r * r + 2 * m * r) * np.sin(th), (r + m) * np.cos(th)))


def hyperbolic_interior(m):
    """(r, th) -> (sqrt(2mr - r^2) sinh th, (r - m) cosh th), r < 2m."""
    return CoordinateMap("hyperbolic_interior",
                         lambda r, th: (_sqrt(2 * m * r - r * r) * np.sinh(th), (r - m) * np.cosh(th)))


def hyperbolic_region_A(m):
    """(r, th) -> (sqrt(r^2 - 2mr) sinh th, (m - r) cosh th), r > 2m."""
    return CoordinateMap("hyperbolic_region_A",
                         lambda r, th: (_sqrt(r * r - 2 * m * r) * np.sinh(th), (m - r) * np.cosh(th)))


def hyperbolic_region_A_negative(m):
    return CoordinateMap("hyperbolic_region_A_negative",
                         lambda r, th: (_sqrt(r * r + 2 * m * r) * np.sinh(th), -(m + r) * np.cosh(th)))


def rindler_map(m):
    """(rt, zt) -> (rt zt/(2m), (zt^2 - rt^2)/(4m)) with t = 2m t~."""
    return CoordinateMap("rindler", lambda rt, zt: (rt * zt / (2 * m), (zt * zt - rt * rt) / (4 * m)),
                         t_scale=2 * m)


def kasner_flat_map(m):
    """(rt, zt) -> (rt zt/(2m), (zt^2 + rt^2)/(4m)) with t = 2m t~."""
    return CoordinateMap("kasner_flat", lambda rt, zt: (rt * zt / (2 * m), (zt * zt + rt * rt) / (4 * m)),
                         t_scale=2 * m)


def aiii_map(m, sigma: int = 1):
    """(r, z) -> (sqrt(m) z sqrt(r), r - sigma m z^2/4)."""
    return CoordinateMap(f"aiii_sigma{sigma:+d}",
                         lambda r, z: (math.sqrt(m) * z * _sqrt(r), r - sigma * m * z * z / 4))


# affine maps sending region I of the quadrangle to II, III, IV
def affine_maps(m):
    return {
        "A": (lambda r, v: (r, v), False),
        "B": (lambda r, v: (m - v, m - r), True),
        "C": (lambda r, v: (2 * m - r, -v), False),
        "D": (lambda r, v: (m + v, -m + r), True),
    }


def table2_maps(m):
    """Spherical charts (r, theta) -> (rho, v) for the four triangles."""
    def s(r):
        return _sqrt(2 * m * r - r * r)
    return {
        "I": lambda r, th: (s(r) * np.sin(th), (r - m) * np.cos(th)),
        "II": lambda r, th: (m - (r - m) * np.cos(th), m - s(r) * np.sin(th)),
        "III": lambda r, th: (2 * m - s(r) * np.sin(th), (m - r) * np.cos(th)),
        "IV": lambda r, th: (m + (r - m) * np.cos(th), -m + s(r) * np.sin(th)),
    }


def quadrangle_region(rho, v, m):
    """Label of the triangle of 0 < rho < 2m, |v| < m containing each point."""
    rho = np.asarray(rho, float)
    v = np.asarray(v, float)
    lab = np.full(rho.shape, "", dtype=object)
    lab[rho < m - np.abs(v)] = "I"
    lab[v > np.abs(rho - m)] = "II"
    lab[rho > m + np.abs(v)] = "III"
    lab[v < -np.abs(rho - m)] = "IV"
    inside = (rho > 0) & (rho < 2 * m) & (np.abs(v) < m)
    lab[~inside] = ""
    return lab


EXTENSIONS = {
    "smooth": ("i", "ii", "iii", "iv"),
    "jump_1": ("i", "i", "i", "i"),
    "jump_2": ("i", "i", "iv", "iv"),
    "jump_3": ("i", "ii", "ii", "i"),
}
_REGION_AFFINE = {"I": "A", "II": "B", "III": "C", "IV": "D"}


def region_patch(kind: str, region: str, m: float) -> WeylPatch:
    """sigma = -1 region-I solution used on one triangle of the quadrangle.

    Triangles II and IV come with ds2^2 -> -ds2^2, so the region-I data are
    taken with form B there; after the affine map rho is time-like again.
    """
    from .factorization import delta_closed_form
    cls = EXTENSIONS[kind]["I II III IV".split().index(region)]
    flip = affine_maps(m)[_REGION_AFFINE[region]][1]
    return assemble_patch(lambda r, v: delta_closed_form(1, -1, cls, r, v, m),
                          lambda r, v: psi_closed_form(1, -1, cls, r, v, m),
                          -1, FORM_B if flip else FORM_A, cls=cls, region=region)


def extend_interior(kind: str, m: float = 1.0) -> dict:
    """Delta on the quadrangle 0 < rho < 2m, |v| < m assembled from region I.

    Returns a dict with the piecewise Delta(rho, v), the spherical-chart metric
    (r, theta) -> g and a flag telling whether a curvature jump is expected.
    """
    if kind not in EXTENSIONS:
        raise ValueError(f"unknown extension {kind!r}")
    aff = affine_maps(m)
    t2 = table2_maps(m)
    classes = EXTENSIONS[kind]
    from .factorization import delta_closed_form

    def delta_on(reg, rho, v):
        """Formula of triangle `reg`, usable up to and on its edges."""
        cls = classes["I II III IV".split().index(reg)]
        r0, v0 = aff[_REGION_AFFINE[reg]][0](np.asarray(rho, float), np.asarray(v, float))
        return delta_closed_form(1, -1, cls, np.maximum(r0, 1e-300), v0, m)

    def delta(rho, v):
        rho = np.asarray(rho, float)
        v = np.asarray(v, float)
        out = np.full(rho.shape, np.nan)
        lab = quadrangle_region(rho, v, m)
        for reg in ("I", "II", "III", "IV"):
            sel = lab == reg
            if np.any(sel):
                out[sel] = delta_on(reg, rho[sel], v[sel])
        return out

    def spherical_region(r, th):
        """Triangle of the (r, m cos theta) square holding each chart point:
        I right, II top, III left, IV bottom."""
        r = np.asarray(r, float)
        c = m * np.cos(np.asarray(th, float))
        d = r - m
        lab = np.full(r.shape, "", dtype=object)
        lab[np.abs(c) < d] = "I"
        lab[c > np.abs(d)] = "II"
        lab[np.abs(c) < -d] = "III"
        lab[c < -np.abs(d)] = "IV"
        lab[(r <= 0) | (r >= 2 * m)] = ""
        return lab

    def metric_spherical(r, th):
        """Pull-back to the chart: every triangle goes to region I by the
        same map (r, theta) -> (sqrt(2mr - r^2) sin theta, (r - m) cos theta)."""
        r = np.atleast_1d(np.asarray(r, float))
        th = np.atleast_1d(np.asarray(th, float))
        lab = spherical_region(r, th)
        g = np.full(r.shape + (4, 4), np.nan)
        for reg in ("I", "II", "III", "IV"):
            sel = lab == reg
            if np.any(sel):
                p = region_patch(kind, reg, m)
                g[sel] = apply_map(p, CoordinateMap("sph", t2["I"])).metric(r[sel], th[sel])
        return g

    return {"kind": kind, "classes": classes, "delta": delta, "delta_on": delta_on, "region": spherical_region,
            "metric_spherical": metric_spherical, "curvature_jump_expected": kind != "smooth"}


# ---------------------------------------------------------- psi from Delta

@dataclass
class PsiResult:
    rho: np.ndarray
    v: np.ndarray
    psi: np.ndarray
    closure: float  # max |d_v P_rho - d_rho P_v| after Richardson extrapolation
    passed: bool


def psi_one_form(M, rho, v, sigma: int):
    """(P_rho, P_v) on a grid from samples M[i, j, :, :] (rho along axis 0).

    P_rho = rho/4 Tr(A_rho^2 - sigma A_v^2), P_v = rho/2 Tr(A_rho A_v),
    A = M^-1 dM.
    """
    hr = rho[1] - rho[0]
    hv = v[1] - v[0]
    Minv = np.linalg.inv(M)
    Ar = Minv @ grid_d1(M, hr, 0)
    Av = Minv @ grid_d1(M, hv, 1)
    R = rho[:, None]
    tr = lambda X: np.trace(X, axis1=-2, axis2=-1)
    Pr = 0.25 * R * tr(Ar @ Ar - sigma * Av @ Av)
    Pv = 0.5 * R * tr(Ar @ Av)
    return Pr, Pv


def psi_one_form_pointwise(M, rho, v, sigma: int, h: float | None = None, mesh: bool = True):
    """Same one-form from a callable M, differentiated by point stencils."""
    from ._fd import d1_point
    rho = np.asarray(rho, float)
    v = np.asarray(v, float)
    RR, VV = np.meshgrid(rho, v, indexing="ij") if mesh else (rho, v)
    if h is None:
        h = 1e-4 * min(float(np.min(rho)), 1.0)
    hr = hv = h
    Minv = np.linalg.inv(M(RR, VV))
    Ar = Minv @ d1_point(lambda x: M(x, VV), RR, hr)
    Av = Minv @ d1_point(lambda x: M(RR, x), VV, hv)
    tr = lambda X: np.trace(X, axis1=-2, axis2=-1)
    return 0.25 * RR * tr(Ar @ Ar - sigma * Av @ Av), 0.5 * RR * tr(Ar @ Av)


def _closure(Pr, Pv, hr, hv):
    return grid_d1(Pr, hv, 1) - grid_d1(Pv, hr, 0)


def _pointwise_closure(M, rho, v, sigma, h):
    def P(r, z):
        return psi_one_form_pointwise(M, r, z, sigma, h=h, mesh=False)
    from ._fd import d1_point
    return d1_point(lambda x: P(rho, x)[0], v, h) - d1_point(lambda x: P(x, v)[1], rho, h)


class NonClosedOneForm(ValueError):
    pass


def integrate_psi(M, rho, v, sigma: int, anchor: tuple[int, int] = (0, 0),
                  anchor_value: float = 0.0, tol: float = 1e-7, strict: bool = False) -> PsiResult:
    """Line-integrate the psi one-form over a rectangular Weyl grid.

    M is either a callable (rho, v) -> (..., k, k) or samples on the grid.
    The path runs along v at the anchor rho, then along rho.  Path
    independence is measured by d_v P_rho - d_rho P_v, Richardson-combined
    from steps h and h/2 (on up to 20 x 20 interior points for a callable).
    """
    rho = np.asarray(rho, float)
    v = np.asarray(v, float)
    if np.any(rho <= 0):
        raise ValueError("grid must stay off the axis rho = 0")
    if callable(M):
        Pr, Pv = psi_one_form_pointwise(M, rho, v, sigma)
    else:
        Pr, Pv = psi_one_form(np.asarray(M), rho, v, sigma)
    if not (np.all(np.isfinite(Pr)) and np.all(np.isfinite(Pv))):
        raise ValueError("non-finite psi one-form on the grid")
    i0, j0 = anchor
    line = CubicSpline(v, Pv[i0]).antiderivative()
    base = line(v) - line(v[j0])
    psi = np.empty_like(Pr)
    for j in range(v.size):
        col = CubicSpline(rho, Pr[:, j]).antiderivative()
        psi[:, j] = base[j] + col(rho) - col(rho[i0])
    psi += anchor_value

    if callable(M):
        ii = np.unique(np.linspace(0, rho.size - 1, min(20, rho.size)).round().astype(int))
        jj = np.unique(np.linspace(0, v.size - 1, min(20, v.size)).round().astype(int))
        RR, VV = np.meshgrid(rho[ii], v[jj], indexing="ij")
        L = min(rho.min(), np.ptp(rho) or 1.0, np.ptp(v) or 1.0)
        h = 0.01 * L
        c1 = _pointwise_closure(M, RR, VV, sigma, h)
        c2 = _pointwise_closure(M, RR, VV, sigma, h / 2)
        closure = float(np.max(np.abs((16 * c2 - c1) / 15)))
    else:
        hr, hv = rho[1] - rho[0], v[1] - v[0]
        c_h = _closure(Pr, Pv, hr, hv)
        if rho.size >= 10 and v.size >= 10:
            c_2h = _closure(Pr[::2, ::2], Pv[::2, ::2], 2 * hr, 2 * hv)
            c = (16 * c_h[::2, ::2] - c_2h) / 15
        else:
            c = c_h
        k = 4
        closure = float(np.max(np.abs(c[k:-k, k:-k]))) if min(c.shape) > 2 * k else float(np.max(np.abs(c)))
    if strict and not closure < tol:
        raise NonClosedOneForm(f"non-closed one-form: closure residual {closure:.3e}")
    return PsiResult(rho, v, psi, closure, closure < tol)


def diag_field(delta):
    """Wrap Delta(rho, v) as the matrix field diag(Delta, 1/Delta)."""
    def M(rho, v):
        d = delta(rho, v)
        out = np.zeros(np.shape(d) + (2, 2))
        out[..., 0, 0] = d
        out[..., 1, 1] = 1 / d
        return out
    return M


# ------------------------------------------------------------------ EMD

def _emd_tilde(spec):
    return spec.Q / spec.h1, spec.P / spec.h2


def emd_psi(spec, rho, v, c1: str | float = "zero"):
    """Closed-form psi of the two-horizon solution.

    c1 = "zero" makes psi vanish when P~ = Q~; c1 = "regularizing" uses
    (4/9) log(2 P~ Q~ / (Q~ - P~)), which keeps psi finite as h1, h2 -> 0.
    """
    Qt, Pt = _emd_tilde(spec)
    rho = np.asarray(rho, float)
    v = np.asarray(v, float)
    a = np.sqrt(rho ** 2 + (Pt + v) ** 2)
    b = np.sqrt(rho ** 2 + (Qt + v) ** 2)
    psi = np.log((rho ** 2 + (Pt + v) * (Qt + v) + a * b) ** 2 / (4 * a * a * b * b)) / 9
    if c1 == "zero":
        return psi
    if c1 == "regularizing":
        arg = 2 * Pt * Qt / (Qt - Pt)
        if not arg > 0:
            raise ValueError("regularizing constant needs 2 P~ Q~ / (Q~ - P~) > 0")
        return psi + 4 / 9 * math.log(arg)
    return psi + float(c1)


def emd_psi_one_form(spec, rho, v, h: float = 1e-5):
    """Right-hand sides d_rho psi, d_v psi built from g m3."""
    from ._fd import d1_point
    from .factorization import emd_closed_forms

    def gm3(r, z):
        d = emd_closed_forms(spec, r, z, check_domain=False)
        return d["g"] * d["m3"]

    g = emd_closed_forms(spec, rho, v, check_domain=False)["g"]
    a = d1_point(lambda x: gm3(x, v), rho, h)
    b = d1_point(lambda x: gm3(rho, x), v, h)
    return 0.25 * rho * g ** 4 * (a * a - b * b), 0.5 * rho * g ** 4 * a * b


def emd_psi_closure(spec, rho, v) -> float:
    """d_v (d_rho psi) - d_rho (d_v psi) of the one-form, Richardson-combined
    from steps h and h/2."""
    from ._fd import d1_point
    rho = np.asarray(rho, float)
    v = np.asarray(v, float)

    def c(h):
        a = d1_point(lambda x: emd_psi_one_form(spec, rho, x)[0], v, h)
        b = d1_point(lambda x: emd_psi_one_form(spec, x, v)[1], rho, h)
        return a - b
    h = 0.01 * float(min(np.min(rho), 1.0))
    return float(np.max(np.abs((16 * c(h / 2) - c(h)) / 15)))


def emd_B_field(spec, rho, v):
    """Twist B, with the integration constant that makes B vanish at P~ = Q~."""
    Qt, Pt = _emd_tilde(spec)
    rho = np.asarray(rho, float)
    v = np.asarray(v, float)
    a = np.sqrt(rho ** 2 + (Pt + v) ** 2)
    b = np.sqrt(rho ** 2 + (Qt + v) ** 2)
    R2 = rho ** 2 + v ** 2
    hh = spec.h1 * spec.h2
    return hh * (Qt * a - Pt * b) * (v - np.sqrt(R2)) / R2 + hh * (Qt - Pt)


def emd_near_horizon_twist(x):
    """f(x) = x (1 - x) - 1 with x = v / sqrt(rho^2 + v^2)."""
    x = np.asarray(x, float)
    return x * (1 - x) - 1


def emd_B_residual(spec, rho, v, h: float = 1e-5):
    """Both components of -e^{-2 phi_2} * dB d phi - (d chi3 - chi1 d chi2).

    The three-dimensional dual does not involve psi; e^{-2 phi_2} is taken
    as Delta^2, the identification under which the relation holds.
    """
    from ._fd import d1_point
    from .factorization import emd_closed_forms

    def F(key):
        return lambda r, z: emd_closed_forms(spec, r, z, check_domain=False)[key]

    d = emd_closed_forms(spec, rho, v, check_domain=False)
    w = d["Delta"] ** 2
    c1 = d["chi1"]
    Br = d1_point(lambda x: emd_B_field(spec, x, v), rho, h)
    Bv = d1_point(lambda x: emd_B_field(spec, rho, x), v, h)
    rr = -w * Bv / rho - (d1_point(lambda x: F("chi3")(x, v), rho, h) - c1 * d1_point(lambda x: F("chi2")(x, v), rho, h))
    rv = w * Br / rho - (d1_point(lambda x: F("chi3")(rho, x), v, h) - c1 * d1_point(lambda x: F("chi2")(rho, x), v, h))
    return rr, rv


def _a_phi_terms(h2, Q, rho, v):
    R = np.sqrt(rho * rho + v * v)
    S = np.sqrt(rho * rho + (Q + v) ** 2)
    s2 = math.sqrt(2)
    a0 = s2 * h2 * Q * v / R
    a1 = h2 / s2 * (v / R + (v - R) * S / (rho * rho + v * v + Q * R) - 2 * Q / (Q + R))
    t1 = 2 * v * v * (Q + 4 * v - S) / (Q * Q * (Q + 2 * v) * R)
    t2 = -4 * ((Q + v) ** 2 + Q * S) / (Q + R) ** 3
    t3 = -(4 * (2 * Q * Q + v * v) + (Q - v) * S) / (Q * Q * (Q + R))
    t4 = 2 * (-2 * v * v + (3 * Q + v) * (2 * Q + S)) / (Q * (Q + R) ** 2)
    t5 = -(Q + v) * ((Q + 2 * v - R) * S - 2 * (Q + v) * R) / (Q * (Q + 2 * v) * (rho * rho + (Q + v) ** 2))
    a2 = h2 / (2 * s2) * (t1 + t2 + t3 + t4 + t5)
    return a0, a1, a2


def emd_a_phi(spec, rho, v, order: int = 2):
    """Partial sum of A_phi in powers of J~ = P~ - Q~, through `order` (0..2)."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    Qt, Pt = _emd_tilde(spec)
    J = Pt - Qt
    rho, v = np.broadcast_arrays(np.asarray(rho, float), np.asarray(v, float))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = list(_a_phi_terms(spec.h2, Qt, rho, v))
        # the second-order term has a removable singularity on v = -Q~/2
        d = 1e-4 * abs(Qt)
        near = np.abs(Qt + 2 * v) < d
        if order == 2 and np.any(near):
            lo = _a_phi_terms(spec.h2, Qt, rho, -Qt / 2 - d)[2]
            hi = _a_phi_terms(spec.h2, Qt, rho, -Qt / 2 + d)[2]
            terms[2] = np.where(near, lo + (hi - lo) * (v + Qt / 2 + d) / (2 * d), terms[2])
    return sum(terms[k] * J ** k / math.factorial(k) for k in range(order + 1))


def emd_a_phi_residual(spec, rho, v, order: int, h: float = 1e-5):
    """Residual of the first-order system defining A_phi for the partial sum."""
    from ._fd import d1_point
    from .factorization import emd_closed_forms

    def F(key):
        return lambda r, z: emd_closed_forms(spec, r, z, check_domain=False)[key]

    d = emd_closed_forms(spec, rho, v, check_domain=False)
    e = d["e2Sigma1"] / d["e2Sigma2"]
    B = emd_B_field(spec, rho, v)
    A = lambda r, z: emd_a_phi(spec, r, z, order)
    rr = d1_point(lambda x: A(x, v), rho, h) - (
        -e * rho * d1_point(lambda x: F("chi2")(rho, x), v, h) + B * d1_point(lambda x: F("chi1")(x, v), rho, h))
    rv = d1_point(lambda x: A(rho, x), v, h) - (
        e * rho * d1_point(lambda x: F("chi2")(x, v), rho, h) + B * d1_point(lambda x: F("chi1")(rho, x), v, h))
    return rr, rv


def emd_patch(spec, c1: str | float = "zero") -> WeylPatch:
    from .factorization import emd_closed_forms
    return assemble_patch(lambda r, v: emd_closed_forms(spec, r, v)["Delta"],
                          lambda r, v: emd_psi(spec, r, v, c1), 1, FORM_A,
                          B=lambda r, v: emd_B_field(spec, r, v), family="emd3")


# ----------------------------------------------------------------- catalog

@dataclass
class CatalogPiece:
    cls: str
    form: str
    cmap: Callable          # m -> CoordinateMap
    sampler: Callable       # (n, rng, m) -> (a, b) chart points, kept off chart edges
    inverse: bool = False


@dataclass
class CatalogEntry:
    name: str
    target: str             # AI, AII, AIII, Rindler, Kasner
    eps: int
    sigma: int
    pieces: list
    metric: Callable        # (a, b, m) -> (..., 4, 4) target components
    note: str = ""

    def source(self) -> str:
        p = self.pieces[0]
        inv = ", inverse M" if p.inverse else ""
        return f"eps={self.eps}, sigma={self.sigma:+d}, class {'/'.join(q.cls for q in self.pieces)}{inv}, map {p.cmap(1.0).name}"


def _diag4(*fs):
    def g(a, b, m):
        a = np.asarray(a, float)
        out = np.zeros(a.shape + (4, 4))
        for i, f in enumerate(fs):
            out[..., i, i] = f(a, np.asarray(b, float), m)
        return out
    return g


_EDGE = 1e-2


def _u(rng, lo, hi, n):
    return rng.uniform(lo, hi, n)


def _s_ext(n, rng, m):
    return _u(rng, 2.2 * m, 10 * m, n), _u(rng, 0.05, np.pi - 0.05, n)


def _s_neg(n, rng, m):
    return _u(rng, 0.1 * m, 10 * m, n), _u(rng, 0.05, np.pi - 0.05, n)


def _s_aii_int(n, rng, m):
    return _u(rng, 0.05 * m, 1.95 * m, n), _u(rng, 0.05, 3.0, n)


def _s_int(n, rng, m):
    r = _u(rng, 1.05 * m, 1.95 * m, n)
    c = _u(rng, -1, 1, n) * (r - m - _EDGE * m) / m
    return r, np.arccos(c)


def _s_A(n, rng, m):
    t = _u(rng, 0.5, 3.0, n)
    return 2 * m + _EDGE * m + rng.uniform(0, 1, n) * (m * np.cosh(t) - m - 2 * _EDGE * m), t


def _s_Ap(n, rng, m):
    t = _u(rng, 0.5, 3.0, n)
    return m + m * np.cosh(t) + _u(rng, 0.05 * m, 3 * m, n), t


def _s_Aneg(n, rng, m):
    t = _u(rng, 1.0, 3.0, n)
    return _EDGE * m + rng.uniform(0, 1, n) * (m * np.cosh(t) - m - 2 * _EDGE * m), t


def _s_Aneg_p(n, rng, m):
    t = _u(rng, 0.5, 3.0, n)
    return np.maximum(m * np.cosh(t) - m, 0) + _u(rng, 0.05 * m, 3 * m, n), t


def _s_quadrant(n, rng, m):
    return _u(rng, 0.1, 3.0, n), _u(rng, 0.1, 3.0, n)


def _s_z_gt(n, rng, m):
    a = _u(rng, 0.1, 3.0, n)
    return a, a + _u(rng, 0.1, 2.0, n)


def _s_z_lt(n, rng, m):
    b = _u(rng, 0.1, 3.0, n)
    return b + _u(rng, 0.1, 2.0, n), b


def _s_r_gt(n, rng, m):
    z = _u(rng, 0.1, 3.0, n)
    return m * z * z / 4 + _u(rng, 0.1, 2.0, n), z


def _s_r_lt(n, rng, m):
    z = _u(rng, 0.5, 3.0, n)
    return _u(rng, _EDGE, 1 - _EDGE, n) * m * z * z / 4, z


def _one(a, b, m):
    return np.ones_like(a)


_SCHW = _diag4(lambda r, t, m: -(1 - 2 * m / r), lambda r, t, m: 1 / (1 - 2 * m / r),
               lambda r, t, m: r * r, lambda r, t, m: (r * np.sin(t)) ** 2)
_SCHW_NEG = _diag4(lambda r, t, m: -(1 + 2 * m / r), lambda r, t, m: 1 / (1 + 2 * m / r),
                   lambda r, t, m: r * r, lambda r, t, m: (r * np.sin(t)) ** 2)
_HYP = _diag4(lambda r, t, m: 1 - 2 * m / r, lambda r, t, m: -1 / (1 - 2 * m / r),
              lambda r, t, m: r * r, lambda r, t, m: (r * np.sinh(t)) ** 2)
_HYP_NEG = _diag4(lambda r, t, m: 1 + 2 * m / r, lambda r, t, m: -1 / (1 + 2 * m / r),
                  lambda r, t, m: r * r, lambda r, t, m: (r * np.sinh(t)) ** 2)
# AIII forms with mass parameter m' = m/2: -(2m'/r) dt^2 + r/(2m') dr^2 + r^2 (dz^2 + z^2 dphi^2)
_AIII_SPACE = _diag4(lambda r, z, m: -m / r, lambda r, z, m: r / m, lambda r, z, m: r * r, lambda r, z, m: (r * z) ** 2)
_AIII_TIME = _diag4(lambda r, z, m: m / r, lambda r, z, m: -r / m, lambda r, z, m: r * r, lambda r, z, m: (r * z) ** 2)
_RINDLER = _diag4(lambda a, b, m: -b * b, _one, _one, lambda a, b, m: a * a)
_KASNER_Z = _diag4(lambda a, b, m: b * b, lambda a, b, m: -np.ones_like(a), _one, lambda a, b, m: a * a)
_KASNER_R = _diag4(lambda a, b, m: a * a, _one, lambda a, b, m: -np.ones_like(a), lambda a, b, m: b * b)
_KASNER_II = _diag4(lambda a, b, m: a * a, lambda a, b, m: -np.ones_like(a), _one, lambda a, b, m: b * b)


def _interior_map(m):
    return CoordinateMap("interior_spherical", table2_maps(m)["I"])


CATALOG = [
    CatalogEntry("Schwarzschild exterior", "AI", 1, 1,
                 [CatalogPiece("i", FORM_A, spherical_exterior, _s_ext)], _SCHW),
    CatalogEntry("negative-mass Schwarzschild", "AI", 1, 1,
                 [CatalogPiece("iii", FORM_A, spherical_negative_mass, _s_neg)], _SCHW_NEG),
    CatalogEntry("hyperbolic interior", "AII", 1, 1,
                 [CatalogPiece("ii", FORM_A, hyperbolic_interior, _s_aii_int)], _HYP),
    CatalogEntry("Schwarzschild interior (triangle I)", "AI", 1, -1,
                 [CatalogPiece("i", FORM_A, _interior_map, _s_int)],
                 _diag4(lambda r, t, m: 2 * m / r - 1, lambda r, t, m: -1 / (2 * m / r - 1),
                        lambda r, t, m: r * r, lambda r, t, m: (r * np.sin(t)) ** 2)),
    CatalogEntry("hyperbolic exterior (A and A')", "AII", 1, -1,
                 [CatalogPiece("iv", FORM_A, hyperbolic_region_A, _s_A),
                  CatalogPiece("i", FORM_B, hyperbolic_region_A, _s_Ap)], _HYP,
                 "A' piece carries ds2^2 -> -ds2^2"),
    CatalogEntry("negative-mass hyperbolic (A and A')", "AII", 1, -1,
                 [CatalogPiece("ii", FORM_A, hyperbolic_region_A_negative, _s_Aneg),
                  CatalogPiece("iii", FORM_B, hyperbolic_region_A_negative, _s_Aneg_p)], _HYP_NEG,
                 "A' piece carries ds2^2 -> -ds2^2"),
    CatalogEntry("Rindler", "Rindler", 0, 1,
                 [CatalogPiece("i", FORM_A, rindler_map, _s_quadrant)], _RINDLER, "flat"),
    CatalogEntry("AIII, r space-like", "AIII", 0, 1,
                 [CatalogPiece("i", FORM_A, lambda m: aiii_map(m, 1), _s_quadrant, inverse=True)], _AIII_SPACE,
                 "mass parameter m/2 in the AIII normal form"),
    CatalogEntry("AIII, r time-like", "AIII", 0, -1,
                 [CatalogPiece("i", FORM_B, lambda m: aiii_map(m, -1), _s_r_gt, inverse=True),
                  CatalogPiece("ii", FORM_A, lambda m: aiii_map(m, -1), _s_r_lt, inverse=True)], _AIII_TIME,
                 "mass parameter m/2 in the AIII normal form"),
    CatalogEntry("Kasner (1,0,0), class i, z > rho", "Kasner", 0, -1,
                 [CatalogPiece("i", FORM_A, kasner_flat_map, _s_z_gt)], _KASNER_Z),
    CatalogEntry("Kasner (1,0,0), class i, z < rho", "Kasner", 0, -1,
                 [CatalogPiece("i", FORM_A, kasner_flat_map, _s_z_lt)], _KASNER_R),
    CatalogEntry("Kasner (1,0,0), class ii, z > rho", "Kasner", 0, -1,
                 [CatalogPiece("ii", FORM_A, kasner_flat_map, _s_z_gt)], _KASNER_II,
                 "roles of rho~ and z~ swap against class i"),
]


def catalog_patch(entry: CatalogEntry, piece: CatalogPiece, m: float = 1.0) -> WeylPatch:
    from .factorization import delta_closed_form
    e, s, c = entry.eps, entry.sigma, piece.cls
    if piece.inverse:
        delta = lambda r, v: 1 / delta_closed_form(e, s, c, r, v, m)
    else:
        delta = lambda r, v: delta_closed_form(e, s, c, r, v, m)
    return assemble_patch(delta, lambda r, v: psi_closed_form(e, s, c, r, v, m), s, piece.form,
                          cls=c, inverse=piece.inverse)


def check_catalog_entry(entry: CatalogEntry, m: float = 1.0, n: int = 100, seed: int = 0) -> float:
    """Max componentwise error (relative for entries above 1) between the
    pulled-back patch and the target form, over n chart points per piece."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for piece in entry.pieces:
        a, b = piece.sampler(n, rng, m)
        g = apply_map(catalog_patch(entry, piece, m), piece.cmap(m)).metric(a, b)
        T = entry.metric(a, b, m)
        worst = max(worst, float(np.max(np.abs(g - T) / np.maximum(1.0, np.abs(T)))))
    return worst


def catalog_table() -> list[dict]:
    return [{"name": e.name, "target": e.target, "source": e.source(), "note": e.note} for e in CATALOG]


MAPS = {
    "spherical_exterior": spherical_exterior,
    "spherical_negative_mass": spherical_negative_mass,
    "hyperbolic_interior": hyperbolic_interior,
    "hyperbolic_region_A": hyperbolic_region_A,
    "hyperbolic_region_A_negative": hyperbolic_region_A_negative,
    "interior_spherical": _interior_map,
    "rindler": rindler_map,
    "kasner_flat": kasner_flat_map,
    "aiii_space": lambda m: aiii_map(m, 1),
    "aiii_time": lambda m: aiii_map(m, -1),
}


def catalog_lookup(eps: int, sigma: int, cls: str, inverse: bool, form: str, map_name: str):
    """Catalog entry and piece produced by this combination, or None."""
    for e in CATALOG:
        if (e.eps, e.sigma) != (eps, sigma):
            continue
        for piece in e.pieces:
            if (piece.cls, piece.inverse, piece.form) == (cls, inverse, form) and MAPS[map_name](1.0).name == piece.cmap(1.0).name:
                return e, piece
    return None
