import math

import numpy as np
import pytest

from weylfactor.contour import (ContourClass, WindingError, admissible_region, build_witness, region_label,
                                unit_circle, validate_class, winding_number, write_points_csv)
from weylfactor.factorization import MonodromySpec, labelled_points
from weylfactor.spectral import fixed_points, involution, phi_named


def even_odd(poly, w):
    """Ray casting along +x; independent of the angle-sum winding routine."""
    x, y = w.real, w.imag
    a, b = poly[:-1], poly[1:]
    cross = (a.imag > y) != (b.imag > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = a.real + (y - a.imag) * (b.real - a.real) / (b.imag - a.imag)
    return int(np.sum(cross & (xi > x)) % 2)


def random_witness(rng, sigma, k=3):
    """Symmetric witness contour for k random labelled points with random sides."""
    while True:
        pts = {f"p{i}": complex(rng.uniform(0.2, 4) * np.exp(1j * rng.uniform(-np.pi, np.pi))) for i in range(k)}
        if any(min(abs(t - f) for f in fixed_points(sigma)) < 0.05 for t in pts.values()):
            continue
        side = {l: bool(rng.integers(0, 2)) for l in pts}
        c = build_witness(pts, side, sigma)
        if c is not None:
            return c, pts, side


def test_unit_circle_examples():
    c = unit_circle(256)
    assert winding_number(c, 0) == 1
    assert winding_number(c, 2) == 0
    assert winding_number(c, -math.sqrt(3)) == 0
    assert winding_number(c, 1 / math.sqrt(3)) == 1


def test_winding_errors():
    c = unit_circle(256)
    with pytest.raises(WindingError, match="on-contour"):
        winding_number(c, c.points[3])
    coarse = unit_circle(3)
    with pytest.raises(WindingError, match="insufficient sampling"):
        winding_number(type(coarse)(coarse.points[:3], 1), 0.0)


@pytest.mark.parametrize("sigma", [1, -1])
def test_witness_is_symmetric_and_hits_fixed_points(rng, sigma):
    for _ in range(5):
        c, pts, side = random_witness(rng, sigma)
        z = c.points
        assert z[0] == z[-1]
        assert winding_number(c, 0) == 1
        step = c.max_segment()
        for f in fixed_points(sigma):
            assert np.min(np.abs(z - f)) < 2 * step
        image = involution(z, sigma)
        d = np.min(np.abs(image[:, None] - z[None, :]), axis=1)
        assert np.max(d) < 2 * step * np.max(np.abs(z))
        for l, t in pts.items():
            assert winding_number(c, t) == int(side[l])
            assert even_odd(z, t) == int(side[l])


def test_class_ii_ok_at_reference_point():
    s3 = math.sqrt(3)
    pts = {"tau1": phi_named(1.0, s3, 0.0, 1), "tau2": phi_named(-1.0, s3, 0.0, 1)}
    assert pts["tau1"] == pytest.approx(-s3) and pts["tau2"] == pytest.approx(-1 / s3)
    chk = validate_class(ContourClass.named("ii", 1), pts)
    assert chk.ok and chk.witness is not None
    assert winding_number(chk.witness, pts["tau1"]) == 0
    assert winding_number(chk.witness, pts["tau2"]) == 1


def test_fixed_point_collision_on_line():
    m, v = 1.0, 3.0
    rho = v - m
    pts = labelled_points(MonodromySpec.diag(1, m, -1), rho, v)
    assert pts["tau1"] == pytest.approx(-1)
    chk = validate_class(ContourClass.named("i", -1), pts)
    assert not chk.ok and "fixed-point collision" in chk.violations


def test_orbit_parity_violation():
    cc = ContourClass(1, {"a": True, "b": True})
    chk = validate_class(cc, {"a": 2.0, "b": -0.5})
    assert not chk.ok and chk.violations == ["orbit parity"]


def test_zero_label_rejected():
    with pytest.raises(ValueError):
        validate_class(ContourClass(1, {"a": True}), {"a": 0.0})


def test_collision_flips_ok_instances(rng):
    for sigma in (1, -1):
        c, pts, side = random_witness(rng, sigma)
        cc = ContourClass(sigma, side)
        assert validate_class(cc, pts).ok
        bad = dict(pts)
        bad["p0"] = fixed_points(sigma)[0]
        assert not validate_class(cc, bad).ok


def test_admissible_region_examples():
    m = 1.0
    full = admissible_region(MonodromySpec.diag(1, m, 1))
    assert all(full(r, v) for r in (0.01, 1, 50) for v in (-30, 0, 2))
    assert not admissible_region(MonodromySpec.diag(1, m, -1))(3 * m, 0.0)
    assert admissible_region(MonodromySpec.diag(0, m, -1))(1.0, 2.0)
    assert region_label(0.3, 0.2, m) == "I"
    assert region_label(0.3, -2.0, m) == "A"
    assert region_label(0.3, 2.0, m) == "B"
    assert region_label(3.0, 0.0, m) is None


def test_sigma_plus_ordering_cases():
    m = 1.0
    rho = np.linspace(0.05, 4, 50)
    v = np.linspace(-3, 3, 50)
    R, V = np.meshgrid(rho, v, indexing="ij")
    t1 = phi_named(m, R, V, 1)
    t2 = phi_named(-m, R, V, 1)
    a = V < -m
    b = (V > -m) & (V < m)
    c = V > m
    assert np.all((t1[a] < t2[a]) & (t2[a] <= -1))
    assert np.all((t1[b] < -1) & (-1 < t2[b]) & (t2[b] < 0))
    assert np.all((-1 <= t1[c]) & (t1[c] < t2[c]) & (t2[c] < 0))


def test_points_csv(tmp_path):
    p = tmp_path / "c.csv"
    write_points_csv(p, unit_circle(8).points)
    lines = p.read_text().splitlines()
    assert lines[0] == "re,im" and len(lines) == 10
