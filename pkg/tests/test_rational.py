import math

import numpy as np
import pytest

from weylfactor.rational import (PoleEvaluation, Polynomial, RationalFunction, poly_roots, rat_eval,
                                 spectral_pullback)
from weylfactor.spectral import spectral_u


def _roots(p):
    return sorted((r for r, k in poly_roots(p) for _ in range(k)), key=lambda z: (round(z.real, 9), round(z.imag, 9)))


def test_roots_of_tau_squared_plus_one():
    r = _roots(Polynomial([1, 0, 1]))
    assert np.allclose(r, [-1j, 1j], atol=1e-14)


def test_roots_of_spectral_quadratic():
    rho, v = 3.0, 5.0
    r = _roots(Polynomial([1, 2 * v / rho, 1]))
    assert np.allclose(r, [-3, -1 / 3], atol=1e-13)
    # the two roots are reciprocal
    assert abs(r[0] * r[1] - 1) < 1e-13


def test_roots_of_factored_product():
    p = Polynomial([-2, 1]) * Polynomial([2, 1])
    assert np.allclose(_roots(p), [-2, 2], atol=1e-14)


def test_zero_polynomial_is_degenerate():
    with pytest.raises(ValueError, match="degenerate"):
        poly_roots(Polynomial([0, 0]))


def test_root_expansion_round_trip(rng):
    for _ in range(50):
        deg = rng.integers(1, 9)
        c = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
        p = Polynomial(c)
        back = Polynomial.from_roots([r for r, k in poly_roots(p, cluster_tol=1e-12) for _ in range(k)],
                                     p.coeffs[-1])
        assert np.max(np.abs(back.coeffs - p.coeffs)) / np.max(np.abs(p.coeffs)) < 1e-12


def test_eval_examples():
    f = RationalFunction(1.0, [2.0], [-1.0])
    assert rat_eval(f, 0.0) == pytest.approx(-2)
    assert rat_eval(RationalFunction(1.0), 3.7 + 2j) == 1
    with pytest.raises(PoleEvaluation):
        rat_eval(f, -1.0)


def test_eval_matches_polynomial_quotient(rng):
    num = Polynomial(rng.normal(size=4))
    den = Polynomial(rng.normal(size=3))
    f = RationalFunction.from_polynomials(num, den)
    t = rng.normal(size=20) + 1j * rng.normal(size=20)
    assert np.allclose(f(t), num(t) / den(t), rtol=1e-10)


def test_common_factors_cancel():
    f = RationalFunction(2.0, [1.0, 3.0], [3.0, -4.0])
    assert f.zeros == [1.0] and f.poles == [-4.0]


def test_unimodular_on_fixed_point():
    # sigma (u - m)/(u + m) pulled back at rho = 1, v = 0 and evaluated at tau = i
    f = spectral_pullback(1.0, [1.0], [-1.0], 1.0, 0.0, 1)
    assert abs(abs(f(1j)) - 1) < 1e-14


def test_pullback_zero_and_pole_pairs():
    s3 = math.sqrt(3)
    f = spectral_pullback(1.0, [1.0], [-1.0], s3, 0.0, 1)
    assert np.allclose(sorted(np.real(f.zeros)), sorted([-s3, 1 / s3]), atol=1e-14)
    assert np.allclose(sorted(np.real(f.poles)), sorted([-1 / s3, s3]), atol=1e-14)


def test_pullback_of_u():
    rho, v = 2.0, 0.7
    f = spectral_pullback(1.0, [0.0], [], rho, v, 1)
    assert f.poles == [0j]
    t0, t1 = f.zeros
    assert abs(t0 * t1 + 1) < 1e-14
    assert f.constant == pytest.approx(-rho / 2)


def test_pullback_of_constant():
    f = spectral_pullback(2.5, [], [], 1.0, 0.0, -1)
    assert f.zeros == [] and f.poles == [] and f.constant == 2.5


@pytest.mark.parametrize("sigma", [1, -1])
def test_pullback_zero_pairing(rng, sigma):
    for _ in range(50):
        a = complex(rng.normal(), rng.normal())
        rho, v = rng.uniform(0.1, 5), rng.normal()
        f = spectral_pullback(1.0, [a], [], rho, v, sigma)
        pair = [z for z in f.zeros if z != 0]
        assert abs(pair[0] * pair[1] + sigma) < 1e-10


@pytest.mark.parametrize("sigma", [1, -1])
def test_pullback_agrees_with_composition(rng, sigma):
    zs = rng.normal(size=2) + 1j * rng.normal(size=2)
    ps = rng.normal(size=3) + 1j * rng.normal(size=3)
    rho, v = 1.3, -0.4
    f = spectral_pullback(0.7, zs, ps, rho, v, sigma)
    t = rng.normal(size=100) + 1j * rng.normal(size=100)
    u = spectral_u(t, rho, v, sigma)
    g = 0.7 * np.prod([u - z for z in zs], axis=0) / np.prod([u - p for p in ps], axis=0)
    assert np.max(np.abs(f(t) - g) / np.maximum(1, np.abs(g))) < 1e-10
