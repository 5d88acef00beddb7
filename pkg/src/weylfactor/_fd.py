"""Fourth-order finite-difference stencils."""

from __future__ import annotations

import numpy as np


def d1_point(f, x, h):
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def d2_point(f, x, h):
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h)


def grid_d1(values, h: float, axis: int):
    """d/dx along `axis` of samples on a uniform grid.

    Centred 5-point stencil inside, one-sided 4th-order stencils on the two
    outermost points at each end.  Needs at least 5 samples.
    """
    f = np.moveaxis(np.asarray(values), axis, 0)
    n = f.shape[0]
    if n < 5:
        raise ValueError("need at least 5 points along the differentiation axis")
    out = np.empty_like(f)
    out[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * h)
    out[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    out[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    out[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    out[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return np.moveaxis(out, 0, axis)


def complex_step_jacobian(fmap, a, b, h: float = 1e-30):
    """Jacobian of an analytic map (a, b) -> (x, y) by the complex-step trick.

    Exact to rounding for maps built from analytic numpy functions.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    xa, ya = fmap(a + 1j * h, b + 0j)
    xb, yb = fmap(a + 0j, b + 1j * h)
    return (np.imag(xa) / h, np.imag(xb) / h, np.imag(ya) / h, np.imag(yb) / h)
