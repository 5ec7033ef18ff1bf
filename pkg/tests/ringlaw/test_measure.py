import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from ringlaw.errors import DomainError, MeasureError
from ringlaw.measure import (
    DiscreteMeasure,
    RingGeometry,
    cdf,
    delta_sym,
    levy_distance,
    load_measure,
    moments,
    neg_recip_stieltjes,
    nevanlinna_rep,
    radii,
    reference_measure,
    save_measure,
    stieltjes,
    support_stats,
    symmetrize,
)


@st.composite
def measures(draw, lo=0, hi=80, max_atoms=8):
    """atoms on the grid k/8, lo <= k <= hi"""
    ks = draw(st.lists(st.integers(lo, hi), min_size=1, max_size=max_atoms, unique=True))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=len(ks), max_size=len(ks)))
    weights = np.array(raw) / math.fsum(raw)
    return DiscreteMeasure.from_atoms(np.array(ks) / 8.0, weights)


def test_invariants_rejected():
    with pytest.raises(MeasureError):
        DiscreteMeasure([1.0, 2.0], [0.5, 0.4])
    with pytest.raises(MeasureError):
        DiscreteMeasure([2.0, 1.0], [0.5, 0.5])
    with pytest.raises(MeasureError):
        DiscreteMeasure([1.0, 2.0], [1.0, 0.0])
    with pytest.raises(MeasureError):
        DiscreteMeasure([1.0, float("nan")], [0.5, 0.5])


def test_from_atoms_merges():
    mu = DiscreteMeasure.from_atoms([2.0, 1.0, 1.0 + 1e-14, 3.0])
    assert mu.atoms.tolist() == [1.0, 2.0, 3.0]
    assert mu.weights.tolist() == pytest.approx([0.5, 0.25, 0.25])


def test_symmetrize(two_point):
    sym = symmetrize(two_point)
    assert sym.atoms.tolist() == [-2.0, -1.0, 1.0, 2.0]
    assert sym.weights.tolist() == pytest.approx([0.25] * 4, abs=1e-15)
    assert sym.is_symmetric()
    # idempotent
    assert symmetrize(sym) == sym
    # delta_1 -> delta_1^sym
    assert symmetrize(DiscreteMeasure([1.0], [1.0])) == delta_sym(1.0)


def test_symmetrize_keeps_zero_atom():
    sym = symmetrize(DiscreteMeasure([0.0, 1.0], [0.5, 0.5]))
    assert sym.atoms.tolist() == [-1.0, 0.0, 1.0]
    assert sym.weights.tolist() == pytest.approx([0.25, 0.5, 0.25])


@given(measures())
def test_symmetrize_property(mu):
    sym = symmetrize(mu)
    assert sym.is_symmetric()
    assert sym.mass == pytest.approx(1.0, abs=1e-12)
    assert support_stats(sym) == pytest.approx(support_stats(mu), rel=1e-12)


def test_stieltjes_examples(bernoulli):
    assert stieltjes(DiscreteMeasure([0.0], [1.0]), 1j) == pytest.approx(1j)
    assert stieltjes(bernoulli, 2j) == pytest.approx(0.4j, abs=1e-15)
    assert neg_recip_stieltjes(bernoulli, 2j) == pytest.approx(2.5j, abs=1e-15)
    assert neg_recip_stieltjes(delta_sym(1.0), 1j) == pytest.approx(2j, abs=1e-15)


def test_stieltjes_rejects_lower_half_plane(two_point):
    with pytest.raises(DomainError):
        stieltjes(two_point, 1.0)
    with pytest.raises(DomainError):
        neg_recip_stieltjes(two_point, np.array([1j, -1j]))


def test_stieltjes_vectorized(two_point):
    z = np.array([1j, 2 + 1j, 0.5j])
    vals = stieltjes(two_point, z)
    assert vals.shape == (3,)
    assert vals[1] == pytest.approx(stieltjes(two_point, 2 + 1j))


@given(measures(-40, 40))
def test_stieltjes_large_eta(mu):
    eta = 1e8
    assert (1j * eta * stieltjes(mu, 1j * eta)) == pytest.approx(-1.0, abs=1e-6)
    F = neg_recip_stieltjes(mu, 1j * eta)
    assert F.imag >= eta * (1 - 1e-12)


@given(measures())
def test_symmetric_stieltjes_on_axis_is_imaginary(mu):
    m = stieltjes(symmetrize(mu), 0.7j)
    assert abs(m.real) <= 1e-14


def test_cdf_right_continuous(two_point):
    assert cdf(two_point, 0.999) == 0.0
    assert cdf(two_point, 1.0) == 0.5
    assert cdf(two_point, np.array([1.5, 2.0, 3.0])).tolist() == [0.5, 1.0, 1.0]


def test_radii(two_point):
    r_minus, r_plus, degenerate = radii(two_point)
    assert r_minus == pytest.approx(math.sqrt(8 / 5), abs=1e-12)
    assert r_plus == pytest.approx(math.sqrt(5 / 2), abs=1e-12)
    assert not degenerate


def test_radii_zero_atom_and_point_mass():
    assert radii(DiscreteMeasure([0.0, 1.0], [0.5, 0.5])).r_minus == 0.0
    rad = radii(DiscreteMeasure([1.5], [1.0]))
    assert rad.degenerate
    assert rad.r_minus == pytest.approx(rad.r_plus)
    with pytest.raises(DomainError):
        radii(DiscreteMeasure([-1.0, 1.0], [0.5, 0.5]))


@given(measures(1, 80), st.floats(0.1, 10.0))
def test_radii_scale(mu, c):
    scaled = DiscreteMeasure(c * mu.atoms, mu.weights)
    r = radii(mu)
    rs = radii(scaled)
    assert rs.r_minus == pytest.approx(c * r.r_minus, rel=1e-12)
    assert rs.r_plus == pytest.approx(c * r.r_plus, rel=1e-12)


def test_ring_geometry(two_point):
    geometry = RingGeometry.from_measure(two_point)
    assert geometry.tau == pytest.approx(0.05 * (math.sqrt(2.5) - math.sqrt(1.6)))
    assert geometry.contains(1.4)
    assert geometry.contains(1.4j)
    assert not geometry.contains(1.27)
    with pytest.raises(DomainError):
        geometry.check(0.0)
    assert RingGeometry.from_measure(two_point, tau=0.2).is_empty
    with pytest.raises(DomainError):
        RingGeometry.from_measure(DiscreteMeasure([1.0], [1.0]))


def test_support_stats_and_moments(two_point):
    assert support_stats(two_point) == (2.0, 2.5)
    assert support_stats(DiscreteMeasure([0.0], [1.0])) == (0.0, 0.0)
    assert support_stats(symmetrize(two_point)) == pytest.approx((2.0, 2.5))
    assert tuple(moments(two_point)) == pytest.approx((2.5, 8.5, 32.5))


def test_levy_distance_examples(two_point):
    assert levy_distance(two_point, two_point) == 0.0
    assert levy_distance(DiscreteMeasure([0.0], [1.0]),
                         DiscreteMeasure([0.3], [1.0])) == pytest.approx(0.3, abs=1e-12)
    assert levy_distance(DiscreteMeasure([0.0], [1.0]),
                         DiscreteMeasure([5.0], [1.0])) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50)
@given(measures(), measures(), measures())
def test_levy_distance_metric(mu, nu, rho):
    d_mn = levy_distance(mu, nu)
    assert 0 <= d_mn <= 1
    assert d_mn == pytest.approx(levy_distance(nu, mu), abs=1e-12)
    assert levy_distance(mu, rho) <= d_mn + levy_distance(nu, rho) + 1e-12


def test_nevanlinna_bernoulli(bernoulli):
    mu_hat, mu_tilde, r_minus_sq = nevanlinna_rep(bernoulli)
    assert r_minus_sq == pytest.approx(1.0)
    assert mu_hat.atoms.tolist() == [0.0]
    assert mu_hat.weights.tolist() == pytest.approx([1.0])
    assert mu_tilde.size == 0


def test_nevanlinna_four_atoms(two_point):
    sym = symmetrize(two_point)
    mu_hat, mu_tilde, r_minus_sq = nevanlinna_rep(sym)
    x0 = math.sqrt(2.5)
    assert r_minus_sq == pytest.approx(1.6, abs=1e-12)
    assert mu_hat.atoms.tolist() == pytest.approx([-x0, 0.0, x0], abs=1e-12)
    assert mu_hat.weights.tolist() == pytest.approx([0.45, 1.6, 0.45], abs=1e-10)
    assert mu_hat.mass == pytest.approx(2.5, abs=1e-10)
    assert mu_tilde.mass == pytest.approx(0.9, abs=1e-10)


def test_nevanlinna_reconstruction(rng):
    sym = symmetrize(DiscreteMeasure([0.5, 1.0, 1.7, 3.0], [0.1, 0.4, 0.3, 0.2]))
    mu_hat, _, _ = nevanlinna_rep(sym)
    assert mu_hat.mass == pytest.approx(moments(sym).m2, abs=1e-10)
    points = rng.uniform(-4, 4, 20) + 1j * rng.uniform(0.05, 3, 20)
    lhs = neg_recip_stieltjes(sym, points) - points
    rhs = np.array([np.sum(mu_hat.weights / (mu_hat.atoms - w)) for w in points])
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9)


def test_nevanlinna_zero_atom():
    sym = symmetrize(DiscreteMeasure([0.0, 1.0, 2.0], [0.2, 0.4, 0.4]))
    _, mu_tilde, r_minus_sq = nevanlinna_rep(sym)
    assert r_minus_sq == 0.0
    assert mu_tilde.mass == pytest.approx(moments(sym).m2, abs=1e-10)


def test_nevanlinna_rejects(two_point):
    with pytest.raises(MeasureError):
        nevanlinna_rep(two_point)
    with pytest.raises(MeasureError):
        nevanlinna_rep(DiscreteMeasure([0.0], [1.0]))


def test_reference_measures():
    assert reference_measure("two_point(1,2,0.5)", 17) == DiscreteMeasure([1.0, 2.0], [0.5, 0.5])
    uni = reference_measure("uniform(0, 1)", 2)
    assert uni.atoms.tolist() == pytest.approx([0.25, 0.75])
    qc = reference_measure("quarter_circle", 4)
    for i, x in enumerate(qc.atoms):
        mass = quad(lambda t: math.sqrt(4 - t * t) / math.pi, 0, x)[0]
        assert mass == pytest.approx((i + 0.5) / 4, abs=1e-10)
    for bad in ("semicircle", "uniform(1,0)", "two_point(1,1,0.5)", "two_point(1,2)"):
        with pytest.raises(DomainError):
            reference_measure(bad, 4)
    with pytest.raises(DomainError):
        reference_measure("quarter_circle", 1)


def test_quarter_circle_r_plus(quarter_circle):
    assert radii(quarter_circle).r_plus == pytest.approx(1.0, abs=1e-3)


def test_save_load_roundtrip(two_point):
    fp = io.StringIO()
    save_measure(two_point, fp)
    fp.seek(0)
    assert load_measure(fp) == two_point
    with pytest.raises(MeasureError):
        load_measure(io.StringIO('{"atoms": [1, 2], "weights": [0.5, 0.6]}'))
    with pytest.raises(MeasureError):
        load_measure(io.StringIO('{"atoms": [1, 2]}'))
