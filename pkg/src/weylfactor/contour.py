"""Involution-symmetric contours, winding numbers and admissible regions.

Witness contours are built in log coordinates w = log(tau) = x + i y.  After
shifting y so that the fixed points of the involution sit at (0, 0) and
(0, pi), the involution becomes the point reflection (x, y) -> (-x, -y).  A
path gamma from (0, 0) to (0, pi) together with its reflected image closes
into a symmetric loop that goes once around the origin.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import fixed_points, involution

FP_TOL = 1e-10
ANGLE_TOL = 1e-12

CLASS_LABELS = {
    # epsilon = 1: which of tau_1, tau_2 sit inside the contour
    "i": {"tau1": True, "tau2": True},
    "ii": {"tau1": False, "tau2": True},
    "iii": {"tau1": False, "tau2": False},
    "iv": {"tau1": True, "tau2": False},
}
CLASS_LABELS_EPS0 = {
    "i": {"tau0": True},
    "ii": {"tau0": False},
}


@dataclass(frozen=True)
class ContourClass:
    sigma: int
    assignment: dict  # label -> True for interior, False for exterior
    name: str = ""

    @classmethod
    def named(cls, name: str, sigma: int, eps: int = 1) -> "ContourClass":
        table = CLASS_LABELS if eps == 1 else CLASS_LABELS_EPS0
        if name not in table:
            raise ValueError(f"unknown contour class {name!r} for eps={eps}")
        return cls(sigma, dict(table[name]), name)


@dataclass
class SampledContour:
    points: np.ndarray  # closed: points[0] == points[-1]
    sigma: int

    def max_segment(self) -> float:
        return float(np.max(np.abs(np.diff(self.points))))


@dataclass
class ClassCheck:
    ok: bool
    violations: list = field(default_factory=list)
    witness: SampledContour | None = None


class WindingError(ValueError):
    pass


def unit_circle(n: int = 256, sigma: int = 1) -> SampledContour:
    t = np.linspace(0.0, 2 * np.pi, n + 1)
    pts = np.exp(1j * t)
    pts[-1] = pts[0]
    return SampledContour(pts, sigma)


def _segment_distance(a: np.ndarray, b: np.ndarray, w: complex) -> np.ndarray:
    d = b - a
    L2 = np.abs(d) ** 2
    s = np.where(L2 > 0, ((w - a) * np.conj(d)).real / np.where(L2 > 0, L2, 1), 0.0)
    s = np.clip(s, 0.0, 1.0)
    return np.abs(a + s * d - w)


def winding_number(c: SampledContour, w: complex, on_tol: float = 1e-8) -> int:
    """Winding number of the closed polyline around w."""
    z = np.asarray(c.points, dtype=complex)
    if np.min(_segment_distance(z[:-1], z[1:], w)) < on_tol:
        raise WindingError("on-contour")
    est = np.sum(np.angle((z[1:] - w) / (z[:-1] - w))) / (2 * np.pi)
    k = int(round(est))
    if abs(est - k) > 0.25:
        raise WindingError("insufficient sampling")
    return k


def _theta_fixed(sigma: int) -> float:
    return np.pi / 2 if sigma == 1 else 0.0


def _to_log(tau: complex, sigma: int) -> tuple[float, float]:
    y = np.angle(tau) - _theta_fixed(sigma)
    y = (y + np.pi) % (2 * np.pi) - np.pi  # (-pi, pi]
    if y <= -np.pi + ANGLE_TOL:
        y = np.pi
    return float(np.log(abs(tau))), float(y)


def _from_log(x, y, sigma):
    return np.exp(np.asarray(x) + 1j * (np.asarray(y) + _theta_fixed(sigma)))


def _crossings(xs_sides, start_inside: bool, margin: float) -> list[float]:
    """x positions where a line must cross the loop so that the listed points
    (x, inside) end up on the required sides.  Left of everything the side is
    `start_inside`; far right it is always exterior."""
    pts = sorted(xs_sides)
    cuts = []
    state = start_inside
    prev_x = None
    for x, inside in pts:
        if inside != state:
            cuts.append(x - margin if prev_x is None else 0.5 * (prev_x + x))
            state = inside
        prev_x = x
    if state:
        cuts.append(pts[-1][0] + margin if pts else margin)
    return cuts


def _zigzag(cs, y0, delta):
    """Vertices of a path crossing the line y = y0 at each of cs (ascending),
    entering from below at cs[0] and leaving above at cs[-1]."""
    verts = [(cs[0], y0 - delta)]
    last = len(cs) - 1
    for i, c in enumerate(cs):
        level = delta if i == last else (delta / 2 if i % 2 == 0 else -delta / 2)
        verts.append((c, y0 + level))
        if i < last:
            verts.append((cs[i + 1], y0 + level))
    return verts


def build_witness(points: dict, assignment: dict, sigma: int, n: int = 1024,
                  margin: float = 0.3) -> SampledContour | None:
    """Symmetric contour realising the interior/exterior assignment, or None.

    Every labelled point is moved by the involution, if needed, into the
    upper half 0 <= y <= pi.  Points sharing a line y = const are handled by
    letting the loop cross that line several times.
    """
    lines: dict = {}          # y -> [(x, inside)]
    edge0, edgepi = [], []    # points on the fixed-point lines, with x > 0
    for label, tau in points.items():
        if label not in assignment:
            continue
        inside = bool(assignment[label])
        x, y = _to_log(complex(tau), sigma)
        if y < -ANGLE_TOL:
            x, y, inside = -x, -y, not inside
        if abs(y) <= ANGLE_TOL or abs(y - np.pi) <= ANGLE_TOL:
            if abs(x) < 1e-12:
                return None
            if x < 0:
                x, inside = -x, not inside
            (edge0 if abs(y) <= ANGLE_TOL else edgepi).append((x, inside))
            continue
        lines.setdefault(round(y, 12), []).append((x, inside))

    for group in [edge0, edgepi] + list(lines.values()):
        xs = sorted(group)
        for (x1, s1), (x2, s2) in zip(xs, xs[1:]):
            if abs(x1 - x2) < 1e-12 and s1 != s2:
                return None

    ys = sorted(lines)
    marks = [0.0] + ys + [np.pi]
    delta = min(0.25, 0.45 * min(np.diff(marks)))

    def edge_cuts(group):
        if not group:
            return [0.0]
        first_inside = sorted(group)[0][1]
        a = _crossings(group, first_inside, margin)
        return [-c for c in reversed(a)] + [0.0] + a

    path: list[tuple[float, float]] = []
    c0 = edge_cuts(edge0)
    z0 = _zigzag(c0, 0.0, delta)
    k = len(c0) // 2
    # second half of the symmetric zigzag, starting at the fixed point
    path.append((0.0, 0.0))
    path += z0[2 * k + 1:]
    for y in ys:
        path += _zigzag(_crossings(lines[y], True, margin), y, delta)
    cpi = edge_cuts(edgepi)
    zpi = _zigzag(cpi, np.pi, delta)
    kp = len(cpi) // 2
    path += zpi[: 2 * kp + 1]
    path.append((0.0, np.pi))

    # densify in log coordinates
    P = np.array(path)
    keep = np.ones(len(P), bool)
    keep[1:] = np.hypot(np.diff(P[:, 0]), np.diff(P[:, 1])) > 0
    P = P[keep]
    seg = np.hypot(np.diff(P[:, 0]), np.diff(P[:, 1]))
    total = seg.sum()
    half = max(n // 2, 16)
    xs, ys_ = [], []
    for (x0, y0), (x1, y1), L in zip(P[:-1], P[1:], seg):
        kk = max(2, int(math.ceil(half * L / total)))
        s = np.linspace(0.0, 1.0, kk, endpoint=False)
        xs.append(x0 + s * (x1 - x0))
        ys_.append(y0 + s * (y1 - y0))
    xs.append([P[-1, 0]])
    ys_.append([P[-1, 1]])
    gamma = _from_log(np.concatenate(xs), np.concatenate(ys_), sigma)
    # pin the two fixed points exactly
    f0 = np.exp(1j * _theta_fixed(sigma))
    gamma[0], gamma[-1] = f0, -f0
    back = involution(gamma, sigma)[::-1]
    loop = np.concatenate([gamma, back[1:]])
    loop[-1] = loop[0]
    contour = SampledContour(loop, sigma)

    try:
        if winding_number(contour, 0j) < 0:
            contour = SampledContour(loop[::-1].copy(), sigma)
        for label, tau in points.items():
            if label in assignment:
                if winding_number(contour, complex(tau)) != int(bool(assignment[label])):
                    return None
    except WindingError:
        return None
    return contour


def validate_class(cc: ContourClass, points: dict, construct_witness: bool = True) -> ClassCheck:
    """Check an interior/exterior assignment against the labelled tau values.

    With construct_witness=False only the orbit-parity and fixed-point checks
    run; the witness step is the expensive one.
    """
    violations = []
    fps = fixed_points(cc.sigma)
    for label, tau in points.items():
        if tau == 0:
            raise ValueError(f"labelled point {label} is zero")
        if any(abs(complex(tau) - f) < FP_TOL for f in fps):
            violations.append("fixed-point collision")
            break
    labels = [l for l in points if l in cc.assignment]
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            ta, tb = complex(points[a]), complex(points[b])
            partner = abs(complex(involution(ta, cc.sigma)) - tb) <= 1e-10 * max(1.0, abs(tb))
            same = abs(ta - tb) <= 1e-10 * max(1.0, abs(tb))
            if partner and cc.assignment[a] == cc.assignment[b]:
                violations.append("orbit parity")
            if same and cc.assignment[a] != cc.assignment[b]:
                violations.append("orbit parity")
    if violations:
        return ClassCheck(False, sorted(set(violations)))
    if not construct_witness:
        return ClassCheck(True, [])
    w = build_witness({l: points[l] for l in labels}, cc.assignment, cc.sigma)
    if w is None:
        return ClassCheck(False, ["unrealizable"])
    return ClassCheck(True, [], w)


def region_label(rho: float, v: float, m: float) -> str | None:
    """Which of the regions I, A, B of the sigma = -1 Schwarzschild family."""
    if rho <= 0:
        return None
    if rho < m - abs(v):
        return "I"
    if v < -m and rho < -m - v:
        return "A"
    if v > m and rho < v - m:
        return "B"
    return None


def admissible_region(spec, cc: ContourClass | None = None):
    """Predicate (rho, v) -> bool telling where the labelled tau values are real
    and off the fixed points."""
    family = spec.family
    sigma = spec.sigma

    def pred(rho: float, v: float) -> bool:
        if rho <= 0:
            return False
        if family == "diag_eps":
            if sigma == 1:
                return True
            m = spec.m
            if spec.eps == 1:
                return (m - v) ** 2 - rho ** 2 > 0 and (m + v) ** 2 - rho ** 2 > 0
            return v * v - rho * rho > 0
        if family == "kasner":
            return v * v - rho * rho > 0
        if family == "emd3":
            if spec.Q * spec.P > 0:
                return True
            from .factorization import emd_closed_forms
            try:
                emd_closed_forms(spec, rho, v)
            except ValueError:
                return False
            return True
        raise ValueError(f"unknown family {family!r}")

    return pred


def write_points_csv(path, pts) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im"])
        for z in np.asarray(pts, dtype=complex).ravel():
            w.writerow([f"{z.real:.17g}", f"{z.imag:.17g}"])
