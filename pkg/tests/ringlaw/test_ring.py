import math

import numpy as np
import pytest

from ringlaw.errors import DomainError, QuadratureError
from ringlaw.measure import radii
from ringlaw.ring import (
    density_profile,
    log_potential,
    potential_profile,
    ring_density,
    ring_mass,
)


def test_log_potential_outside_ring(two_point):
    # all mass lies inside |w| = 2, so L is log|w| there
    assert log_potential(two_point, 2.0) == pytest.approx(math.log(2.0), abs=1e-6)
    assert log_potential(two_point, 3.5) == pytest.approx(math.log(3.5), abs=1e-6)


def test_log_potential_constant_in_hole(two_point):
    # inside the hole L equals (1/N) log|det X| = int log x dmu_sigma
    inner = 0.5 * math.log(2.0)
    assert log_potential(two_point, 0.5) == pytest.approx(inner, abs=1e-6)
    assert log_potential(two_point, 1.1) == pytest.approx(inner, abs=1e-6)


def test_log_potential_independent_of_K(two_point):
    a = log_potential(two_point, 1.4)
    b = log_potential(two_point, 1.4, K=1000.0)
    assert a == pytest.approx(b, abs=1e-7)


def test_log_potential_rejects(two_point):
    with pytest.raises(DomainError):
        log_potential(two_point, 0.0)
    with pytest.raises(DomainError):
        log_potential(two_point, 1.4, K=15.0)


def test_quadrature_failure(two_point, mocker):
    mocker.patch('ringlaw.ring.quad',
                 return_value=(0.0, 0.5, {}, 'The maximum number of subdivisions'))
    with pytest.raises(QuadratureError):
        log_potential(two_point, 1.4)


def test_potential_profile(two_point):
    grid = np.linspace(1.2, 1.7, 11)
    seen = []

    def recording_map(fn, items):
        seen.extend(items)
        return map(fn, items)

    profile = potential_profile(two_point, grid, map_fn=recording_map)
    assert seen == pytest.approx(grid.tolist())
    assert profile(grid[3]) == pytest.approx(profile.L_values[3], abs=1e-12)
    assert profile(1.43) == pytest.approx(log_potential(two_point, 1.43), abs=1e-4)
    # L' is continuous and equals mu(|w| <= s)/s
    assert profile.derivative(1.6) == pytest.approx(1 / 1.6, abs=1e-2)
    with pytest.raises(DomainError):
        profile(1.8)
    with pytest.raises(DomainError):
        potential_profile(two_point, [1.4, 1.3])


def test_density_vanishes_off_ring(two_point):
    assert ring_density(two_point, 2.0) == pytest.approx(0.0, abs=1e-3)
    assert ring_density(two_point, 0.8) == pytest.approx(0.0, abs=1e-3)
    assert ring_density(two_point, 1.4) > 0.05


def test_density_profile_shares_nodes(two_point):
    h = 0.01
    calls = []

    def counting_map(fn, items):
        items = list(items)
        calls.append(len(items))
        return map(fn, items)

    rows = density_profile(two_point, [1.4, 1.41], h=h, map_fn=counting_map)
    assert calls == [6]
    assert [row.s for row in rows] == [1.4, 1.41]
    for row in rows:
        assert row.rho == pytest.approx((row.d2L + row.dL / row.s) / (2 * math.pi))
    with pytest.raises(DomainError):
        density_profile(two_point, [0.01], h=h)
    with pytest.raises(DomainError):
        density_profile(two_point, [1.4], h=0.0)


def test_ring_mass(two_point):
    r_minus, r_plus, _ = radii(two_point)
    # the density piles up at both edges, so a 0.01 margin drops almost 8%
    assert ring_mass(two_point, 0.01, n_radii=65) == pytest.approx(0.9226, abs=1e-3)
    assert ring_mass(two_point, r_plus - r_minus) == 0.0
    with pytest.raises(DomainError):
        ring_mass(two_point, -0.1)


@pytest.mark.slow
def test_circular_law(quarter_circle):
    assert log_potential(quarter_circle, 0.5) == pytest.approx(-0.375, abs=1e-3)
    assert ring_density(quarter_circle, 0.5) == pytest.approx(1 / math.pi, rel=0.02)
    assert 0.94 <= ring_mass(quarter_circle, 0.02) <= 1.001


def test_ring_mass_tends_to_one(two_point):
    masses = [ring_mass(two_point, tau, n_radii=65) for tau in (0.05, 1e-2, 1e-3)]
    assert masses[0] < masses[1] < masses[2] <= 1.0 + 1e-3
    assert masses[2] > 0.98


def test_log_potential_outside_support(two_point):
    s_plus = 2.0
    radii_out = [s_plus * k for k in (1.0, 2.0, 4.0, 8.0)]
    values = [log_potential(two_point, s) for s in radii_out]
    assert np.all(np.diff(values) > 0)
    for s, value in zip(radii_out[1:], values[1:]):
        assert value - math.log(s) == pytest.approx(0.0, abs=1e-7)


def test_log_potential_increasing_across_ring(two_point):
    values = [log_potential(two_point, s) for s in np.linspace(1.0, 2.0, 11)]
    assert np.all(np.diff(values) > -1e-8)


def test_density_refinement(two_point):
    # 5-point stencil: halving h must shrink the change in rho at least
    # quadratically, down to the quadrature noise floor
    steps = [0.06, 0.03, 0.015]
    rho = [ring_density(two_point, 1.42, h=h, quad_tol=1e-12) for h in steps]
    d1 = abs(rho[0] - rho[1])
    d2 = abs(rho[1] - rho[2])
    assert d1 <= 50 * steps[0] ** 2
    assert d2 <= max(d1 / 3, 1e-6)


def test_density_nonnegative_inside(two_point):
    r_minus, r_plus, _ = radii(two_point)
    rows = density_profile(two_point, np.linspace(r_minus + 0.02, r_plus - 0.02, 9))
    assert min(row.rho for row in rows) >= -5e-3
