"""Canonical Wiener-Hopf factorization of the rational monodromy families.

Every in-scope entry is a rational function of tau once pulled back along
the spectral curve, so the scalar factorization is exact bookkeeping: the
zeros and poles on the exterior side go into m_plus (normalized to
m_plus(0) = 1), everything else into m_minus.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .contour import ContourClass, admissible_region, validate_class
from .rational import RationalFunction, rat_eval, spectral_pullback
from .spectral import FixedPointCollision, PhiSpec, involution, phi_eval, phi_named


class InadmissibleRegion(ValueError):
    pass


class NonCanonical(ValueError):
    """Nonzero total index: no canonical factorization for this assignment."""


@dataclass(frozen=True)
class MonodromySpec:
    family: str  # diag_eps | kasner | emd3
    sigma: int = 1
    eps: int = 1
    m: float = 1.0
    omega: complex = 1.0
    h1: float = 1.0
    h2: float = 1.0
    Q: float = 1.0
    P: float = 1.0

    def __post_init__(self):
        if self.family not in ("diag_eps", "kasner", "emd3"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.sigma not in (1, -1):
            raise ValueError("sigma must be +1 or -1")
        if self.family == "diag_eps":
            if self.eps not in (0, 1):
                raise ValueError("eps must be 0 or 1")
            if not self.m > 0:
                raise ValueError("m must be positive")
        if self.family == "kasner" and self.sigma != -1:
            raise ValueError("the Kasner family lives at sigma = -1")
        if self.family == "emd3":
            if self.sigma != 1:
                raise ValueError("the EMD family is treated at sigma = +1")
            if not (self.h1 > 0 and self.h2 > 0):
                raise ValueError("h1 and h2 must be positive")

    @classmethod
    def diag(cls, eps: int, m: float, sigma: int) -> "MonodromySpec":
        return cls("diag_eps", sigma=sigma, eps=eps, m=m)

    @classmethod
    def kasner(cls, omega: complex = 1.0) -> "MonodromySpec":
        return cls("kasner", sigma=-1, omega=omega)

    @classmethod
    def emd3(cls, h1: float, h2: float, Q: float, P: float) -> "MonodromySpec":
        return cls("emd3", sigma=1, h1=h1, h2=h2, Q=Q, P=P)

    def entry(self, u):
        """Upper-left entry of the monodromy as a function of u (diag_eps)."""
        s, m = self.sigma, self.m
        if self.eps == 1:
            return s * (u - m) / (u + m)
        return s * u / m


@dataclass
class FactorPair:
    m_plus: RationalFunction
    m_minus: RationalFunction
    normalization: complex  # m_plus(0), should be 1


@dataclass
class DiagFactorization:
    factor: FactorPair  # upper-left entry; lower-right is the reciprocal
    delta: float
    raw_delta: complex
    sign_flip: bool
    points: dict
    entry: RationalFunction

    @property
    def M(self) -> np.ndarray:
        return np.diag([self.delta, 1.0 / self.delta])

    def X(self, tau):
        # m_plus(0) = 1 holds by construction; return it exactly there
        mp = np.where(np.asarray(tau) == 0, 1.0 + 0j, rat_eval(self.factor.m_plus, tau))
        return np.array([[mp, 0 * mp], [0 * mp, 1.0 / mp]])


def canonical_scalar(f: RationalFunction, interior) -> FactorPair:
    """Split f = m_minus * m_plus given an interior predicate on zeros/poles.

    m_plus carries the exterior zeros/poles and m_plus(0) = 1; m_minus carries
    the interior ones (tau = 0 is always interior) and is finite and nonzero at
    infinity when the total index vanishes.
    """
    zin = [z for z in f.zeros if z == 0 or interior(z)]
    zout = [z for z in f.zeros if not (z == 0 or interior(z))]
    pin = [p for p in f.poles if p == 0 or interior(p)]
    pout = [p for p in f.poles if not (p == 0 or interior(p))]
    if len(zin) != len(pin):
        raise NonCanonical(f"index {len(zin) - len(pin)} != 0")
    c_plus = complex(np.prod([-z for z in zout]) / np.prod([-p for p in pout])) if (zout or pout) else 1.0
    m_plus = RationalFunction(1.0 / c_plus, zout, pout)
    m_minus = RationalFunction(f.constant * c_plus, zin, pin)
    return FactorPair(m_plus, m_minus, complex(rat_eval(m_plus, 0.0)))


def labelled_points(spec: MonodromySpec, rho, v) -> dict:
    s, m = spec.sigma, spec.m
    if spec.family == "diag_eps":
        if spec.eps == 1:
            return {"tau1": phi_named(m, rho, v, s), "tau2": phi_named(-m, rho, v, s)}
        return {"tau0": phi_named(0.0, rho, v, s)}
    if spec.family == "kasner":
        t1 = phi_named(0.0, rho, v, -1)
        return {"tau1": t1, "tau1_tilde": 1.0 / t1}
    raise ValueError("labelled points are defined for the 2x2 families")


def _check_point(spec, cc, rho, v, witness=False):
    pts = labelled_points_safe(spec, rho, v)
    chk = validate_class(cc, {k: complex(x) for k, x in pts.items()}, construct_witness=witness)
    if "fixed-point collision" in chk.violations:
        raise FixedPointCollision(f"fixed-point collision at (rho, v) = ({rho}, {v})")
    if not chk.ok:
        raise ValueError("contour class violation: " + ", ".join(chk.violations))
    return pts


def labelled_points_safe(spec, rho, v):
    if rho <= 0:
        raise InadmissibleRegion("rho must be positive")
    if spec.family == "diag_eps" and spec.sigma == -1:
        m = spec.m
        lines = [v - m, m - v, v + m, -v - m] if spec.eps == 1 else [v, -v]
        if any(abs(rho - d) < 1e-10 for d in lines):
            raise FixedPointCollision(f"fixed-point collision at (rho, v) = ({rho}, {v})")
    if spec.family == "kasner" and abs(abs(v) - rho) < 1e-10:
        raise FixedPointCollision("fixed-point collision on v = +-rho")
    if not admissible_region(spec)(rho, v):
        raise InadmissibleRegion(f"(rho, v) = ({rho}, {v}) is outside the admissible region")
    return labelled_points(spec, rho, v)


def _interior_predicate(cc: ContourClass, pts: dict, sigma: int):
    table = []
    for label, inside in cc.assignment.items():
        if label in pts:
            t = complex(pts[label])
            table.append((t, bool(inside)))
            table.append((complex(involution(t, sigma)), not inside))

    def interior(z):
        for t, inside in table:
            if abs(z - t) <= 1e-9 * max(1.0, abs(t)):
                return inside
        raise ValueError(f"zero/pole {z} is not a labelled orbit member")

    return interior


def pulled_back_entry(spec: MonodromySpec, rho: float, v: float) -> RationalFunction:
    s = spec.sigma
    if spec.eps == 1:
        return spectral_pullback(s, [spec.m], [-spec.m], rho, v, s)
    return spectral_pullback(s / spec.m, [0.0], [], rho, v, s)


def canonical_factor_diag(spec: MonodromySpec, cc: ContourClass, rho: float, v: float,
                          witness: bool = False) -> DiagFactorization:
    """Factorize diag(sigma(u - eps m)/(eps u + m), inverse) at one Weyl point."""
    if spec.family != "diag_eps":
        raise ValueError("canonical_factor_diag needs the diag_eps family")
    pts = _check_point(spec, cc, rho, v, witness)
    f = pulled_back_entry(spec, rho, v)
    pair = canonical_scalar(f, _interior_predicate(cc, pts, spec.sigma))
    raw = pair.m_minus.value_at_infinity()
    flip = raw.real < 0
    if flip:
        pair = FactorPair(pair.m_plus, pair.m_minus * -1.0, pair.normalization)
    delta = abs(raw.real)
    return DiagFactorization(pair, float(delta), raw, bool(flip), pts, f)


def delta_grid(spec: MonodromySpec, cls: str, rho, v, clip: bool = False):
    """Vectorized Delta = m_minus(infinity) with the sign convention applied.

    Same zero/pole partition as canonical_factor_diag, evaluated with numpy.
    Returns (Delta, flipped) arrays; points outside the admissible region are
    NaN when clip is set, otherwise an error.
    """
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    s, m = spec.sigma, spec.m
    cc = ContourClass.named(cls, s, spec.eps)
    ok = np.vectorize(lambda r, w: admissible_region(spec)(r, w))(rho, v) if s == -1 else rho > 0
    if not np.all(ok) and not clip:
        raise InadmissibleRegion("grid leaves the admissible region")
    safe_r, safe_v = (0.5 * m, 0.0) if spec.eps == 1 else (1.0, 2.0)
    r = np.where(ok, rho, safe_r)
    w = np.where(ok, v, safe_v)
    pts = labelled_points(spec, r, w)
    # exterior members of each orbit: the label itself if assigned exterior,
    # otherwise its partner -sigma/tau.
    def ext(label):
        t = pts[label]
        return t if not cc.assignment[label] else -s / t

    if spec.eps == 1:
        # f = sigma (tau - t1)(tau + s/t1) / ((tau - t2)(tau + s/t2))
        raw = s * (-ext("tau1")) / (-ext("tau2"))
    else:
        # f = -(rho/2m)(tau - t0)(tau + s/t0)/tau
        raw = -(r / (2 * m)) * (-ext("tau0"))
    flipped = raw < 0
    delta = np.abs(raw)
    delta = np.where(ok, delta, np.nan)
    return delta, flipped


def m_plus_grid(spec: MonodromySpec, cls: str, rho, v, tau):
    """Upper-left m_plus of the eps = 1 factorization, vectorized over (rho, v, tau).

    m_plus keeps the exterior members of the tau1 and tau2 orbits and is 1 at
    tau = 0, so m_plus = (1 - tau/z)/(1 - tau/p).
    """
    if spec.family != "diag_eps" or spec.eps != 1:
        raise ValueError("m_plus_grid covers the eps = 1 family")
    s = spec.sigma
    cc = ContourClass.named(cls, s, 1)
    pts = labelled_points(spec, rho, v)
    z, p = (pts[k] if not cc.assignment[k] else -s / pts[k] for k in ("tau1", "tau2"))
    tau = np.asarray(tau)
    return (1 - tau / z) / (1 - tau / p)


# closed forms written out in radicals; used as an independent check
def _edge_sqrt(x, m):
    # rounding on the lines rho = m -+ v can leave a tiny negative argument
    return np.sqrt(np.where((x < 0) & (x > -1e-12 * m * m), 0.0, x))


def radical_sum(a, R, s):
    """a + R without cancellation, given R >= 0 and R^2 - a^2 = s."""
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a >= 0, a + R, s / (R - a))


def delta_closed_form(eps: int, sigma: int, cls: str, rho, v, m: float = 1.0):
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    r2 = rho * rho
    if eps == 0:
        r = np.sqrt(v * v + sigma * r2)
        if cls == "i":
            return np.abs(radical_sum(v, r, sigma * r2)) / (2 * m)
        return np.abs(radical_sum(-v, r, sigma * r2)) / (2 * m)
    if sigma == 1:
        Rm = np.sqrt((v - m) ** 2 + r2)
        Rp = np.sqrt((v + m) ** 2 + r2)
        d_i = radical_sum(v - m, Rm, r2) / radical_sum(v + m, Rp, r2)
        d_ii = radical_sum(m - v, Rm, r2) * radical_sum(-v - m, Rp, r2) / r2
    else:
        Sm = _edge_sqrt((m - v - rho) * (m - v + rho), m)
        Sp = _edge_sqrt((m + v - rho) * (m + v + rho), m)
        t1 = radical_sum(m - v, Sm, -r2) / rho
        t2 = radical_sum(-(m + v), Sp, -r2) / rho
        d_i = np.abs(-t2 / t1)
        d_ii = np.abs(-t1 * t2)
    return {"i": d_i, "ii": d_ii, "iii": 1 / d_i, "iv": 1 / d_ii}[cls]


# ---------------------------------------------------------------- Kasner

def kasner_monodromy(c, ct) -> np.ndarray:
    """Constant matrix X~^T M X built from the two sets of integration constants."""
    c1, c2, c3, c4 = c
    d1, d2, d3, d4 = ct
    return np.array([[d1 * c1 - d3 * c3, d1 * c2 - d3 * c4],
                     [c3 * d4 - c1 * d2, d4 * c4 - d2 * c2]])


def kasner_reference_constants(omega: complex):
    a = (2 * omega) ** 2
    return (a, 0, 0, 1 / a), (a, 0, 0, 1 / a)


def kasner_X_phi(c, phi, rho):
    """Solution of the linear system for M = diag(rho^4, rho^-4) at tau = phi."""
    c1, c2, c3, c4 = c
    f = (phi / rho) ** 2
    return np.array([[f * c1, f * c2], [c3 / f, c4 / f]])


def kasner_Xtilde_phi(ct, phi, rho):
    """Companion solution at chi = 1/phi; sign convention on the off-diagonal
    constants chosen so X~^T M X equals kasner_monodromy(c, ct)."""
    d1, d2, d3, d4 = ct
    ft = (1.0 / (rho * phi)) ** 2
    return np.array([[ft * d1, -ft * d2], [-d3 / ft, d4 / ft]])


@dataclass
class KasnerFactor:
    mode: str
    M: np.ndarray
    m_plus: RationalFunction  # upper-left entry of X
    tau1: float
    tau1_tilde: float
    declared_poles: list = field(default_factory=list)

    def X(self, tau):
        mp = np.where(np.asarray(tau) == 0, 1.0 + 0j, rat_eval(self.m_plus, tau))
        return np.array([[mp, 0 * mp], [0 * mp, 1.0 / mp]])


def kasner_factor(mode: str, rho: float, v: float, tilde_exterior: bool = True) -> KasnerFactor:
    spec = MonodromySpec.kasner()
    pts = labelled_points_safe(spec, rho, v)
    t1, tt = float(pts["tau1"]), float(pts["tau1_tilde"])
    if mode == "meromorphic":
        # X = diag((tau - t1)^2 (tau - t1~)^2, inverse), normalized at 0 since t1 t1~ = 1
        mp = RationalFunction(1.0, [t1, t1, tt, tt], [])
        interior_zero = t1 if tilde_exterior else tt
        return KasnerFactor(mode, np.diag([rho ** 4, rho ** -4.0]), mp, t1, tt,
                            [(interior_zero, 2)])
    if mode != "canonical":
        raise ValueError("mode is 'meromorphic' or 'canonical'")
    # entry (2u)^4 = rho^4 (tau - t1)^4 (tau - t1~)^4 / tau^4
    f = RationalFunction(rho ** 4, [t1] * 4 + [tt] * 4, [0.0] * 4)
    ext = tt if tilde_exterior else t1
    pair = canonical_scalar(f, lambda z: abs(z - ext) > 1e-12 * max(1, abs(ext)))
    d = pair.m_minus.value_at_infinity().real
    return KasnerFactor(mode, np.diag([d, 1 / d]), pair.m_plus, t1, tt)


def solution_family_multiplier(alpha: float, beta: int, K: float, phispec: PhiSpec):
    """(rho, v) -> diag(K rho^alpha phi^beta, inverse) as an array (..., 2, 2)."""
    if K == 0:
        raise ValueError("K must be nonzero")
    if int(beta) != beta:
        raise ValueError("beta must be an integer")

    def field_(rho, v):
        phi = phi_eval(phispec, rho, v)
        if np.any(np.abs(np.imag(phi)) > 1e-12 * np.maximum(1, np.abs(phi))):
            raise ValueError("phi is complex on this region")
        e = K * np.asarray(rho, float) ** alpha * np.real(phi) ** int(beta)
        out = np.zeros(np.shape(e) + (2, 2))
        out[..., 0, 0] = e
        out[..., 1, 1] = 1 / e
        return out

    return field_


# ------------------------------------------------------------------ EMD

def _pair_sigma1(a, rho):
    """Roots (minus, plus) of rho tau^2 - 2 a tau - rho = 0, cancellation free."""
    R = np.sqrt(rho * rho + a * a)
    with np.errstate(divide="ignore", invalid="ignore"):
        plus = np.where(a >= 0, (a + R) / rho, rho / (R - a))
    minus = -1.0 / plus
    return minus, plus, R


def emd_closed_forms(spec: MonodromySpec, rho, v, check_domain: bool = True) -> dict:
    h1, h2 = spec.h1, spec.h2
    Qt, Pt = spec.Q / h1, spec.P / h2
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(rho <= 0):
        raise InadmissibleRegion("rho must be positive")
    if Qt == Pt:
        warnings.warn("extremal degeneracy: P/h2 = Q/h1 gives a constant dilaton", stacklevel=2)
    t0p, t0m, R0 = _pair_sigma1(v, rho)     # tau_0^+ (inside), tau_0^- (outside)
    tQp, tQm, RQ = _pair_sigma1(v + Qt, rho)
    tPp, tPm, RP = _pair_sigma1(v + Pt, rho)
    D = t0p - t0m
    g = np.cbrt((h2 / h1) * (tPm / tQm))
    aQ = 1 - 2 * Qt / (rho * D)
    aP = 1 - 2 * Pt / (rho * D)
    m1 = h1 * h2 * aQ * aP - 2 * h1 * h2 * (tQp - tPp) * (t0p - tPm) * (t0p - tQp) / (tQp * D ** 2)
    m2 = math.sqrt(2) * h1 * aQ - math.sqrt(2) * h1 * (tQp - tPp) * (t0p - tQp) / (tQp * D)
    m3 = -(h1 / h2) * tQm / tPm
    chi1 = -m2 / (m1 * m3 + m2 ** 2)
    chi2 = m2 / m1
    chi3 = -1 / m1
    e2S1 = m1 * g
    e2S2 = (m3 + m2 ** 2 / m1) * g
    if check_domain and np.any(e2S2 <= 0):
        raise InadmissibleRegion("domain boundary: exp(2 Sigma_2) <= 0")
    inv_d2 = g ** 3 * m1 * (m1 * m3 + m2 ** 2)
    with np.errstate(invalid="ignore"):
        Delta = 1 / np.sqrt(inv_d2)
        em2Phi = g ** 1.5 * (m3 + m2 ** 2 / m1) ** 1.5
    return {"g": g, "m1": m1, "m2": m2, "m3": m3, "chi1": chi1, "chi2": chi2, "chi3": chi3,
            "e2Sigma1": e2S1, "e2Sigma2": e2S2, "Delta": Delta, "em2Phi": em2Phi,
            "tau": {"0+": t0p, "0-": t0m, "Q+": tQp, "Q-": tQm, "P+": tPp, "P-": tPm}}


def emd_matrix(spec: MonodromySpec, rho, v, check_domain: bool = True) -> np.ndarray:
    """The 3x3 solution matrix g [[m1, m2, -1], [-m2, m3, 0], [-1, 0, 0]]."""
    d = emd_closed_forms(spec, rho, v, check_domain)
    g, m1, m2, m3 = d["g"], d["m1"], d["m2"], d["m3"]
    z = np.zeros_like(g)
    M = np.array([[m1, m2, -1 + z], [-m2, m3, z], [-1 + z, z, z]])
    return np.moveaxis(M * g, (0, 1), (-2, -1))


def emd_pole_census(spec: MonodromySpec, rho: float, v: float) -> dict:
    """Spectral poles of the EMD monodromy and their interior/exterior sides."""
    d = emd_closed_forms(spec, rho, v, check_domain=False)
    t = d["tau"]
    return {"interior": [float(t["0+"]), float(t["Q+"]), float(t["P+"])],
            "exterior": [float(t["0-"]), float(t["Q-"]), float(t["P-"])]}
