import math

import numpy as np
import pytest

from weylfactor.spectral import (BranchPoint, PhiSpec, excluded_set, fixed_points, involution, phi_differential_check,
                                 phi_eval, spectral_u)


def test_involution_examples():
    assert involution(1j, 1) == 1j
    assert involution(1.0, -1) == 1
    assert involution(2.0, 1) == -0.5


def test_involution_rejects_bad_sigma():
    with pytest.raises(ValueError):
        involution(1.0, 2)


@pytest.mark.parametrize("sigma", [1, -1])
def test_involution_is_an_involution(rng, sigma):
    t = rng.normal(size=1000) + 1j * rng.normal(size=1000)
    assert np.max(np.abs(involution(involution(t, sigma), sigma) - t)) < 1e-12 * np.max(np.abs(t))


@pytest.mark.parametrize("sigma", [1, -1])
def test_fixed_points_are_fixed(sigma):
    for f in fixed_points(sigma):
        assert involution(f, sigma) == f


def test_spectral_u_examples():
    assert spectral_u(1.0, 1.0, 0.0, 1) == 0
    # v + (rho/2)(1 - tau^2)/tau at tau = i is 3 + 1/i = 3 - i
    assert spectral_u(1j, 1.0, 3.0, 1) == pytest.approx(3 - 1j)
    assert spectral_u(-math.sqrt(3), math.sqrt(3), 0.0, 1) == pytest.approx(1.0)


def test_spectral_u_zero_tau():
    with pytest.raises(ZeroDivisionError):
        spectral_u(0.0, 1.0, 0.0, 1)


@pytest.mark.parametrize("sigma", [1, -1])
def test_spectral_u_invariant_under_involution(rng, sigma):
    t = rng.normal(size=50) + 1j * rng.normal(size=50)
    a = spectral_u(t, 1.7, 0.3, sigma)
    b = spectral_u(involution(t, sigma), 1.7, 0.3, sigma)
    assert np.allclose(a, b, rtol=1e-12)


def test_phi_examples():
    p = phi_eval(PhiSpec(0, 1, 1, (1, 0)), 1.0, 0.0)
    q = phi_eval(PhiSpec(0, 1, -1, (1, 0)), 1.0, 0.0)
    assert p == pytest.approx(1) and q == pytest.approx(-1) and p * q == pytest.approx(-1)
    s3 = math.sqrt(3)
    assert phi_eval(PhiSpec(1.0, 1, -1, (s3, 0)), s3, 0.0) == pytest.approx(-s3)
    assert phi_eval(PhiSpec(0.0, -1, 1, (3, 5)), 3.0, 5.0) == pytest.approx(-1 / 3)


def test_phi_branch_point_error():
    w = excluded_set(1.0, 2.0, 1)[0]
    with pytest.raises(BranchPoint, match="branch point"):
        phi_eval(PhiSpec(w, 1, 1, (1.0, 0.0)), 1.0, 2.0)


def _random_spec(rng, sigma):
    rho, v = rng.uniform(0.2, 3), rng.normal()
    w = complex(rng.normal(scale=3), rng.normal(scale=3))
    return w, rho, v


@pytest.mark.parametrize("sigma", [1, -1])
def test_phi_sign_product_and_curve(rng, sigma):
    for _ in range(200):
        w, rho, v = _random_spec(rng, sigma)
        a = phi_eval(PhiSpec(w, sigma, 1, (rho, v)), rho, v)
        b = phi_eval(PhiSpec(w, sigma, -1, (rho, v)), rho, v)
        assert abs(a * b + sigma) < 1e-10
        assert abs(spectral_u(a, rho, v, sigma) - w) < 1e-9 * max(1, abs(w))
        assert abs(a) > 0 and abs(a * a + sigma) > 0


@pytest.mark.parametrize("sigma,omega", [(1, 0.5 + 2j), (1, 3.0 + 0j), (-1, 0.7 + 0.4j), (-1, 6.0 + 0j)])
def test_phi_continuous_along_paths(sigma, omega):
    spec = PhiSpec(omega, sigma, 1, (1.0, 0.0))
    t = np.linspace(0, 1, 100)
    rho = 1.0 + 0.5 * np.sin(2 * np.pi * t) * 0.3
    v = 0.3 * np.cos(2 * np.pi * t)
    phi = phi_eval(spec, rho, v)
    step = np.max(np.hypot(np.diff(rho), np.diff(v)))
    grad = np.max(np.abs(np.gradient(phi, t))) / (np.max(np.abs(np.gradient(np.hypot(rho, v), t))) + 1)
    assert np.max(np.abs(np.diff(phi))) < 10 * step * max(grad, 1.0) + 1e-12


def test_differential_identities():
    for omega, sigma in [(2j, 1), (5.0, -1)]:
        chk = phi_differential_check(PhiSpec(omega, sigma, 1, (1.0, 0.0)), (1.0, 0.0), h=1e-4)
        assert chk.partial_error < 1e-6 and chk.closure_residual < 1e-6 and chk.passed


def test_differential_check_on_branch_point():
    with pytest.raises(BranchPoint):
        phi_differential_check(PhiSpec(1j, 1, 1, (1.0, 0.0)), (1.0, 0.0))


def test_differential_check_is_second_order():
    spec = PhiSpec(2j, 1, 1, (1.0, 0.0))
    a = phi_differential_check(spec, (1.0, 0.0), h=1e-2).partial_error
    b = phi_differential_check(spec, (1.0, 0.0), h=5e-3).partial_error
    assert a / b > 3.5
