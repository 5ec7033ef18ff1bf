import numpy as np
import pytest

from ringlaw.errors import DomainError
from ringlaw.linalg import child_rng, hermitian_eigensystem, log_abs_det
from ringlaw.measure import DiscreteMeasure, symmetrize
from ringlaw.models import (
    BlockAdditiveEnsemble,
    SingleRingEnsemble,
    block_H,
    dual_H,
    hermitization,
    im_m_w_integral,
    k_split_identity,
    m_w,
    mu_A,
    mu_B,
    resolvent_observables,
    sample_X,
    smallest_sv,
)

N = 64


@pytest.fixture()
def single_ring(two_point):
    return SingleRingEnsemble.from_measure(two_point, N, seed=5)


@pytest.fixture()
def block():
    one = DiscreteMeasure([1.0], [1.0])
    return BlockAdditiveEnsemble.from_measures(one, one, N, seed=5)


def test_quantile_profile(two_point):
    e = SingleRingEnsemble.from_measure(two_point, 8)
    assert e.sigma_diag.tolist() == [1.0] * 4 + [2.0] * 4
    assert e.mu_sigma == two_point
    assert e.resized(4).sigma_diag.tolist() == [1.0, 1.0, 2.0, 2.0]
    with pytest.raises(DomainError):
        SingleRingEnsemble([1.0, 2.0]).resized(4)


def test_ensemble_validation():
    with pytest.raises(DomainError):
        SingleRingEnsemble([])
    with pytest.raises(DomainError):
        SingleRingEnsemble([1.0, -1.0])
    with pytest.raises(DomainError):
        SingleRingEnsemble([1.0], symmetry='symplectic')
    with pytest.raises(DomainError):
        BlockAdditiveEnsemble([1.0, 2.0], [1.0])
    with pytest.raises(DomainError):
        BlockAdditiveEnsemble([1e7], [1.0])


def test_sample_X_singular_values(single_ring):
    X = sample_X(single_ring, child_rng(5, 0))
    sv = np.linalg.svd(X, compute_uv=False)
    np.testing.assert_allclose(np.sort(sv), np.sort(single_ring.sigma_diag), atol=1e-10)


def test_sample_X_reproducible(single_ring):
    a = sample_X(single_ring, child_rng(5, 1))
    b = sample_X(single_ring, child_rng(5, 1))
    np.testing.assert_array_equal(a, b)


def test_orthogonal_sample_is_real(two_point):
    e = SingleRingEnsemble.from_measure(two_point, 8, symmetry='orthogonal')
    assert np.allclose(sample_X(e, child_rng(1, 0)).imag, 0.0)


def test_hermitization_symmetry(single_ring):
    X = sample_X(single_ring, child_rng(5, 2))
    H = hermitization(X, 1.4)
    spec = hermitian_eigensystem(H)
    lam = spec.eigenvalues
    np.testing.assert_allclose(lam, -lam[::-1], atol=1e-10)
    with pytest.raises(DomainError):
        hermitization(np.ones((2, 3)), 1.0)


def test_log_det_routes_agree(single_ring):
    X = sample_X(single_ring, child_rng(5, 3))
    w = 1.4 * np.exp(0.3j)
    spec = hermitian_eigensystem(hermitization(X, w))
    via_spectrum = np.sum(np.log(np.abs(spec.eigenvalues))) / 2
    assert log_abs_det(X - w * np.eye(N)).value == pytest.approx(via_spectrum, abs=1e-9)


def test_k_split_identity(single_ring):
    X = sample_X(single_ring, child_rng(5, 4))
    spec = hermitian_eigensystem(hermitization(X, 1.4))
    split = k_split_identity(spec, 100.0)
    assert split.lhs == pytest.approx(split.rhs, abs=1e-9)
    assert split.rhs == pytest.approx(split.log_term - split.eta_integral)
    with pytest.raises(DomainError):
        k_split_identity(spec, 0.0)


def test_m_w(single_ring):
    spec = hermitian_eigensystem(hermitization(sample_X(single_ring, child_rng(5, 5)), 1.4))
    eta = np.array([0.1, 1.0])
    vals = m_w(spec, eta)
    assert vals.shape == (2,)
    assert m_w(spec, 1.0) == pytest.approx(vals[1])
    assert np.all(vals.real == 0)
    assert np.all(vals.imag > 0)
    with pytest.raises(DomainError):
        m_w(spec, 0.0)


def test_im_m_w_integral(single_ring):
    spec = hermitian_eigensystem(hermitization(sample_X(single_ring, child_rng(5, 6)), 1.4))
    lam2 = spec.eigenvalues ** 2
    # int_a^b eta/(l^2 + eta^2) = log((l^2 + b^2)/(l^2 + a^2))/2
    exact = np.mean(0.5 * np.log((lam2 + 4.0) / (lam2 + 0.01)))
    assert im_m_w_integral(spec, 0.1, 2.0) == pytest.approx(exact, abs=1e-10)
    assert im_m_w_integral(spec, 1.0, 1.0) == 0.0
    with pytest.raises(DomainError):
        im_m_w_integral(spec, 2.0, 1.0)


def test_smallest_sv(single_ring):
    X = sample_X(single_ring, child_rng(5, 7))
    w = 1.4
    spec = hermitian_eigensystem(hermitization(X, w))
    expected = np.linalg.svd(X - w * np.eye(N), compute_uv=False).min()
    assert smallest_sv(spec) == pytest.approx(expected, abs=1e-10)


def test_block_H_dual(block):
    pair = block_H(block, child_rng(5, 8))
    np.testing.assert_allclose(pair.H, pair.H.conj().T)
    np.testing.assert_array_equal(dual_H(block, child_rng(5, 8)), pair.H_dual)
    # H and its dual are unitarily equivalent
    np.testing.assert_allclose(np.linalg.eigvalsh(pair.H), np.linalg.eigvalsh(pair.H_dual),
                               atol=1e-10)


def test_block_measures(bernoulli):
    e = BlockAdditiveEnsemble([1.0, 2.0], [1.0, -1.0])
    assert mu_B(e) == symmetrize(DiscreteMeasure([1.0, 2.0], [0.5, 0.5]))
    assert mu_A(e) == bernoulli
    with pytest.raises(DomainError):
        e.resized(4)


def test_resolvent_identities(block):
    H = block_H(block, child_rng(5, 9)).H
    z = 0.3 + 0.1j
    obs = resolvent_observables(H, z, block.xi_diag, omega_B=z, bulk_window=(-1.0, 1.0))
    assert obs.tau1 == pytest.approx(obs.tau2, abs=1e-10)
    assert obs.m_H == pytest.approx(0.5 * (obs.tau1 + obs.tau2), abs=1e-12)
    assert obs.omega_A_c + obs.omega_B_c - z == pytest.approx(-1.0 / obs.m_H, abs=1e-10)
    assert obs.eigvec_sup >= 1.0 / np.sqrt(2)
    G = np.linalg.inv(H - z * np.eye(2 * N))
    assert obs.m_H == pytest.approx(np.trace(G) / (2 * N), abs=1e-10)


def test_resolvent_rejects(block):
    H = block_H(block, child_rng(5, 10)).H
    with pytest.raises(DomainError):
        resolvent_observables(H, 0.3, block.xi_diag, omega_B=1j)
    with pytest.raises(DomainError):
        resolvent_observables(H[:4, :4], 1j, block.xi_diag, omega_B=1j)
    empty = resolvent_observables(H, 1j, block.xi_diag, omega_B=1j, bulk_window=(50, 60))
    assert empty.eigvec_sup == 0.0


@pytest.mark.parametrize("symmetry", ["unitary", "orthogonal"])
def test_block_H_reproduces_hermitization(single_ring, symmetry):
    w = 1.3 - 0.4j
    ring = SingleRingEnsemble(single_ring.sigma_diag, symmetry)
    shifted = BlockAdditiveEnsemble(single_ring.sigma_diag, np.full(N, -w), symmetry)
    H = block_H(shifted, child_rng(5, 11)).H
    X = sample_X(ring, child_rng(5, 11))
    np.testing.assert_allclose(H, hermitization(X, w), atol=1e-12)


def test_block_H_without_xi(single_ring):
    e = BlockAdditiveEnsemble(single_ring.sigma_diag, np.zeros(N))
    H = block_H(e, child_rng(5, 12)).H
    sigma = single_ring.sigma_diag
    np.testing.assert_allclose(np.linalg.eigvalsh(H),
                               np.sort(np.concatenate((-sigma, sigma))), atol=1e-10)


def test_resolvent_one_by_one():
    e = BlockAdditiveEnsemble([0.7], [1.2])
    H = block_H(e, child_rng(5, 13)).H
    c = H[0, 1]
    z = 0.4 + 0.3j
    # (H - z)^-1 for H = [[0, c], [conj(c), 0]]
    denom = abs(c) ** 2 - z * z
    G = np.array([[z, c], [np.conj(c), z]]) / denom
    np.testing.assert_allclose(np.linalg.inv(H - z * np.eye(2)), G, atol=1e-12)
    obs = resolvent_observables(H, z, [c], omega_B=z)
    assert obs.m_H == pytest.approx(z / denom, abs=1e-12)
    assert obs.tau1 == pytest.approx(G[0, 0], abs=1e-12)
    assert obs.tau2 == pytest.approx(G[1, 1], abs=1e-12)
    assert obs.lambda_d == pytest.approx(0.0, abs=1e-12)
    assert obs.omega_B_c == pytest.approx(z, abs=1e-12)
