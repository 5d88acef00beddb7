"""Polynomials and rational functions over the complex numbers.

Rational functions are stored in factored form: a constant, a multiset of
zeros and a multiset of poles.  That keeps the zero/pole bookkeeping exact,
which is what the Wiener-Hopf factorization needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class Polynomial:
    """Dense complex polynomial, coefficients in ascending order."""

    def __init__(self, coeffs: Iterable[complex]):
        c = np.atleast_1d(np.asarray(list(coeffs), dtype=complex))
        # strip trailing zeros but keep at least the constant term
        nz = np.nonzero(c)[0]
        self.coeffs = c[: nz[-1] + 1] if nz.size else np.zeros(1, dtype=complex)

    @classmethod
    def from_roots(cls, roots: Sequence[complex], lead: complex = 1.0) -> "Polynomial":
        p = cls([lead])
        for r in roots:
            p = p * cls([-r, 1.0])
        return p

    @property
    def degree(self) -> int:
        if self.coeffs.size == 1 and self.coeffs[0] == 0:
            return -1
        return self.coeffs.size - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(self.coeffs.size, other.coeffs.size)
        a = np.zeros(n, dtype=complex)
        a[: self.coeffs.size] += self.coeffs
        a[: other.coeffs.size] += other.coeffs
        return Polynomial(a)

    def __neg__(self) -> "Polynomial":
        return Polynomial(-self.coeffs)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return Polynomial(np.convolve(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * other)

    __rmul__ = __mul__

    def deriv(self) -> "Polynomial":
        if self.coeffs.size == 1:
            return Polynomial([0.0])
        return Polynomial(self.coeffs[1:] * np.arange(1, self.coeffs.size))

    def __repr__(self) -> str:
        return f"Polynomial({self.coeffs.tolist()})"


def _cluster(values: np.ndarray, tol: float) -> list[tuple[complex, int]]:
    """Group nearby values; each group is replaced by its mean."""
    remaining = list(values)
    groups: list[list[complex]] = []
    while remaining:
        seed = remaining.pop(0)
        group = [seed]
        changed = True
        while changed:
            changed = False
            centre = np.mean(group)
            scale = max(1.0, abs(centre))
            for r in list(remaining):
                if abs(r - centre) <= tol * scale:
                    group.append(r)
                    remaining.remove(r)
                    changed = True
        groups.append(group)
    return [(complex(np.mean(g)), len(g)) for g in groups]


def poly_roots(p: Polynomial, cluster_tol: float = 1e-4) -> list[tuple[complex, int]]:
    """Roots of p with multiplicities.

    Companion-matrix roots are clustered; a k-fold root is split by roughly
    eps**(1/k) but the cluster mean is accurate to near machine precision.
    """
    if p.degree < 0:
        raise ValueError("degenerate: the zero polynomial has no root multiset")
    if p.degree == 0:
        return []
    raw = np.polynomial.polynomial.polyroots(p.coeffs)
    return _cluster(np.asarray(raw, dtype=complex), cluster_tol)


def _merge(zeros: list[complex], poles: list[complex], tol: float):
    """Cancel zero/pole pairs that coincide within tol (relative)."""
    zeros = list(zeros)
    poles = list(poles)
    kept_poles = []
    for p in poles:
        hit = None
        for i, z in enumerate(zeros):
            if abs(z - p) <= tol * max(1.0, abs(p)):
                hit = i
                break
        if hit is None:
            kept_poles.append(p)
        else:
            zeros.pop(hit)
    return zeros, kept_poles


@dataclass
class RationalFunction:
    """c * prod(tau - z) / prod(tau - p)."""

    constant: complex
    zeros: list[complex] = field(default_factory=list)
    poles: list[complex] = field(default_factory=list)

    cancel_tol: float = 1e-13

    def __post_init__(self):
        self.zeros = [complex(z) for z in self.zeros]
        self.poles = [complex(p) for p in self.poles]
        self.zeros, self.poles = _merge(self.zeros, self.poles, self.cancel_tol)

    @classmethod
    def from_polynomials(cls, num: Polynomial, den: Polynomial, cluster_tol: float = 1e-4):
        if den.degree < 0:
            raise ZeroDivisionError("zero denominator")
        if num.degree < 0:
            return cls(0.0)
        zeros = [r for r, k in poly_roots(num, cluster_tol) for _ in range(k)]
        poles = [r for r, k in poly_roots(den, cluster_tol) for _ in range(k)]
        return cls(num.coeffs[-1] / den.coeffs[-1], zeros, poles)

    @property
    def order_at_infinity(self) -> int:
        """deg(num) - deg(den); positive means a pole at infinity."""
        return len(self.zeros) - len(self.poles)

    def numerator(self) -> Polynomial:
        return Polynomial.from_roots(self.zeros, self.constant)

    def denominator(self) -> Polynomial:
        return Polynomial.from_roots(self.poles)

    def __mul__(self, other):
        if isinstance(other, RationalFunction):
            return RationalFunction(
                self.constant * other.constant,
                self.zeros + other.zeros,
                self.poles + other.poles,
            )
        return RationalFunction(self.constant * other, self.zeros, self.poles)

    __rmul__ = __mul__

    def inverse(self) -> "RationalFunction":
        return RationalFunction(1.0 / self.constant, self.poles, self.zeros)

    def __truediv__(self, other):
        if isinstance(other, RationalFunction):
            return self * other.inverse()
        return RationalFunction(self.constant / other, self.zeros, self.poles)

    def compose_mobius_involution(self, sigma: int) -> "RationalFunction":
        """Return tau -> R(-sigma/tau)."""
        # (-s/t - z) = -(z t + s)/t = -z (t + s/z)/t ; z = 0 gives -s/t
        c = self.constant
        zeros, poles = [], []
        t_power = 0
        for z in self.zeros:
            if z == 0:
                c *= -sigma
                t_power -= 1
            else:
                c *= -z
                zeros.append(-sigma / z)
                t_power -= 1
        for p in self.poles:
            if p == 0:
                c /= -sigma
                t_power += 1
            else:
                c /= -p
                poles.append(-sigma / p)
                t_power += 1
        if t_power > 0:
            zeros += [0.0] * t_power
        else:
            poles += [0.0] * (-t_power)
        return RationalFunction(c, zeros, poles)

    def __call__(self, tau):
        return rat_eval(self, tau)

    def value_at_infinity(self) -> complex:
        k = self.order_at_infinity
        if k == 0:
            return complex(self.constant)
        if k < 0:
            return 0j
        return complex(np.inf, np.inf)


class PoleEvaluation(ZeroDivisionError):
    """Evaluation point within POLE_TOL of a pole."""


POLE_TOL = 1e-14


def rat_eval(r: RationalFunction, tau):
    """Evaluate r at tau (scalar or array), refusing points on a pole."""
    t = np.asarray(tau, dtype=complex)
    for p in r.poles:
        if np.any(np.abs(t - p) < POLE_TOL):
            raise PoleEvaluation(f"pole evaluation at tau = {p}")
    num = np.full(t.shape, complex(r.constant))
    den = np.ones(t.shape, dtype=complex)
    for z in r.zeros:
        num = num * (t - z)
    for p in r.poles:
        den = den * (t - p)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den == 0, complex(np.inf, np.inf), num / np.where(den == 0, 1, den))
    return out[()] if out.ndim == 0 else out


def quadratic_pair(a: complex, rho: float, v: float, sigma: int):
    """Both tau-roots of u(tau) = a, ordered (phi_a, -sigma/phi_a).

    phi_a = -sigma((a - v) + sqrt((a - v)^2 + sigma rho^2)) / rho, with the
    principal square root.
    """
    d = a - v
    s = np.sqrt(complex(d * d + sigma * rho * rho))
    # pick the larger-magnitude combination first to avoid cancellation
    big = d + s if abs(d + s) >= abs(d - s) else d - s
    t_big = -sigma * big / rho
    t_other = -sigma / t_big
    if abs(d + s) >= abs(d - s):
        return t_big, t_other
    return t_other, t_big


def spectral_pullback(
    constant: complex,
    u_zeros: Sequence[complex],
    u_poles: Sequence[complex],
    rho: float,
    v: float,
    sigma: int,
) -> RationalFunction:
    """Pull R(u) = c prod(u - a)/prod(u - b) back along the spectral curve.

    u(tau) = v + sigma (rho/2)(sigma - tau^2)/tau, so each factor u - a becomes
    (-sigma rho/2)(tau - t+)(tau - t-)/tau with t+ t- = -sigma.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    lead = -sigma * rho / 2.0
    zeros: list[complex] = []
    poles: list[complex] = []
    c = complex(constant)
    for a in u_zeros:
        zeros += list(quadratic_pair(a, rho, v, sigma))
        c *= lead
    for b in u_poles:
        poles += list(quadratic_pair(b, rho, v, sigma))
        c /= lead
    # each u-factor brings 1/tau
    k = len(u_zeros) - len(u_poles)
    if k > 0:
        poles += [0.0] * k
    elif k < 0:
        zeros += [0.0] * (-k)
    return RationalFunction(c, zeros, poles)
