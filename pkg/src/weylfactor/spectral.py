"""Spectral curve, involution and the algebraic functions phi(rho, v)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._fd import d1_point, d2_point


class FixedPointCollision(ValueError):
    """A labelled spectral point sits on a fixed point of the involution."""


class BranchPoint(ValueError):
    """omega lies in the excluded set W at the evaluation point."""


W_TOL = 1e-10


def _check_sigma(sigma: int) -> int:
    if sigma not in (1, -1):
        raise ValueError(f"sigma must be +1 or -1, got {sigma!r}")
    return sigma


def involution(tau, sigma: int):
    """tau -> -sigma/tau, with 0 and infinity exchanged."""
    _check_sigma(sigma)
    t = np.asarray(tau, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(t == 0, complex(np.inf, np.inf), -sigma / np.where(t == 0, 1, t))
    out = np.where(np.isinf(t), 0j, out)
    return out[()] if out.ndim == 0 else out


def fixed_points(sigma: int) -> tuple[complex, complex]:
    _check_sigma(sigma)
    return (1j, -1j) if sigma == 1 else (1 + 0j, -1 + 0j)


def excluded_set(rho: float, v: float, sigma: int) -> tuple[complex, complex]:
    """Values of omega whose tau-roots hit the fixed points: v +- sqrt(-sigma) rho."""
    r = np.sqrt(complex(-sigma)) * rho
    return (v + r, v - r)


def spectral_u(tau, rho, v, sigma: int):
    """u = v + sigma (rho/2)(sigma - tau^2)/tau."""
    _check_sigma(sigma)
    t = np.asarray(tau, dtype=complex)
    if np.any(t == 0):
        raise ZeroDivisionError("tau = 0 is a pole of u")
    return v + sigma * (rho / 2.0) * (sigma - t * t) / t


def sqrt_arg_0_2pi(z):
    """Square root with the argument of z taken in [0, 2 pi)."""
    s = np.sqrt(np.asarray(z, dtype=complex))
    flip = (s.imag < 0) | ((s.imag == 0) & (s.real < 0))
    return np.where(flip, -s, s)


@dataclass(frozen=True)
class PhiSpec:
    omega: complex
    sigma: int
    sign: int  # +1 or -1 in front of the square root
    base_point: tuple[float, float]  # (rho0, v0), fixes the branch

    def __post_init__(self):
        _check_sigma(self.sigma)
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        rho0 = self.base_point[0]
        if rho0 <= 0:
            raise ValueError("base point needs rho > 0")


def branch_for(spec: PhiSpec) -> str:
    """'principal' or 'arg0_2pi' according to where omega sits w.r.t. the base point."""
    rho0, v0 = spec.base_point
    w = complex(spec.omega)
    if spec.sigma == 1:
        if w.real == v0 and abs(w.imag) > rho0:
            return "arg0_2pi"
        return "principal"
    if w.imag == 0 and abs(w.real - v0) > rho0:
        return "principal"
    return "arg0_2pi"


def phi_eval(spec: PhiSpec, rho, v):
    """phi = (-sigma(omega - v) + sign sqrt((omega - v)^2 + sigma rho^2)) / rho."""
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("phi is only defined for rho > 0")
    d = complex(spec.omega) - v
    w = np.sqrt(complex(-spec.sigma)) * rho
    if np.any(np.minimum(np.abs(d - w), np.abs(d + w)) < W_TOL):
        raise BranchPoint(f"branch point: omega = {spec.omega} is in W at this point")
    z = d * d + spec.sigma * rho * rho
    root = np.sqrt(z + 0j) if branch_for(spec) == "principal" else sqrt_arg_0_2pi(z)
    return (-spec.sigma * d + spec.sign * root) / rho


def phi_named(alpha, rho, v, sigma: int):
    """phi_alpha = -sigma((alpha - v) + sqrt((alpha - v)^2 + sigma rho^2))/rho.

    Real-valued; the square-root argument must be positive.  These are the
    labelled points tau_0, tau_1, tau_2 used by the factorizations.
    """
    _check_sigma(sigma)
    rho = np.asarray(rho, dtype=float)
    d = alpha - np.asarray(v, dtype=float)
    arg = d * d + sigma * rho * rho
    if np.any(arg < 0):
        raise ValueError("complex tau: point outside the admissible region")
    return -sigma * (d + np.sqrt(arg)) / rho


def phi_partials(phi, rho, sigma: int):
    """Closed-form d phi / d rho and d phi / d v."""
    den = sigma + phi * phi
    dr = (phi / rho) * (sigma - phi * phi) / den
    dv = (phi / rho) * 2 * sigma * phi / den
    return dr, dv


@dataclass
class DifferentialCheck:
    partial_error: float
    closure_residual: float
    passed: bool


def phi_differential_check(spec: PhiSpec, point: tuple[float, float], h: float = 1e-4,
                           tol: float = 1e-6) -> DifferentialCheck:
    """Compare finite-difference partials of phi with the closed forms, and
    check that rho * star(d phi / phi) is closed."""
    rho, v = point
    s = spec.sigma

    def f(r, w):
        return phi_eval(spec, r, w)

    phi = f(rho, v)
    fr = d1_point(lambda x: f(x, v), rho, h)
    fv = d1_point(lambda x: f(rho, x), v, h)
    cr, cv = phi_partials(phi, rho, s)
    scale = max(1.0, abs(cr), abs(cv))
    perr = max(abs(fr - cr), abs(fv - cv)) / scale

    frr = d2_point(lambda x: f(x, v), rho, h)
    fvv = d2_point(lambda x: f(rho, x), v, h)
    # d(rho * star(dphi/phi)) = -sigma d_rho(rho phi_r/phi) - d_v(rho phi_v/phi)
    a = fr / phi + rho * (frr / phi - fr * fr / (phi * phi))
    b = rho * (fvv / phi - fv * fv / (phi * phi))
    closure = abs(-s * a - b) / scale
    return DifferentialCheck(float(perr), float(closure), bool(perr < tol and closure < tol))
