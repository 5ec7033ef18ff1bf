# vim:set fileencoding=utf-8 ft=python ts=8 sw=4 sts=4 et cindent:

# models.py -- Random matrix models X = U Sigma V*, their hermitization
#         and the block additive model, with spectral observables.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

"""Random matrix models.

Non-Hermitian spectral information only enters through log|det(X - w)|
and the hermitization H^w, never through eigenvalues of X itself.
"""

import logging
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError
from .linalg import HermitianSpectrum, haar_orthogonal, haar_unitary, hermitian_eigensystem
from .measure import DiscreteMeasure

SYMMETRIES = ('unitary', 'orthogonal')


def _quantile_profile(mu: DiscreteMeasure, n: int) -> np.ndarray:
    """n values, value i being the ((i + 1/2)/n)-quantile of mu."""
    levels = (np.arange(n) + 0.5) / n
    idx = np.searchsorted(np.cumsum(mu.weights), levels, side='left')
    return mu.atoms[np.minimum(idx, mu.size - 1)]


def _check_symmetry(symmetry: str) -> str:
    if symmetry not in SYMMETRIES:
        raise DomainError('symmetry must be one of %s, got "%s"' % (SYMMETRIES, symmetry))
    return symmetry


class SingleRingEnsemble:
    """X = U Sigma V* with Haar U, V of the given symmetry class."""

    def __init__(self, sigma_diag: Sequence[float], symmetry: str = 'unitary',
                 seed: int = 0, s_plus: Optional[float] = None,
                 profile: Optional[DiscreteMeasure] = None) -> None:
        sigma = np.asarray(sigma_diag, dtype=float).reshape(-1)
        if sigma.size == 0:
            raise DomainError('ensemble needs at least one singular value')
        if not np.all(np.isfinite(sigma)) or np.any(sigma < 0):
            raise DomainError('singular values must be finite and non-negative')
        if s_plus is not None and np.any(sigma > s_plus):
            raise DomainError('singular values exceed s_plus = %g' % s_plus)
        sigma.flags.writeable = False
        self.sigma_diag = sigma
        self.symmetry = _check_symmetry(symmetry)
        self.seed = int(seed)
        self.s_plus = s_plus
        self.profile = profile

    @classmethod
    def from_measure(cls, mu_sigma: DiscreteMeasure, N: int,
                     symmetry: str = 'unitary', seed: int = 0) -> 'SingleRingEnsemble':
        """Ensemble whose Sigma is the N-point quantile profile of mu_sigma."""
        if N < 1:
            raise DomainError('N must be positive, got %d' % N)
        return cls(_quantile_profile(mu_sigma, N), symmetry, seed,
                   s_plus=float(np.max(mu_sigma.atoms)), profile=mu_sigma)

    @property
    def N(self) -> int:
        return int(self.sigma_diag.size)

    @property
    def mu_sigma(self) -> DiscreteMeasure:
        """Empirical singular value distribution mu_Sigma."""
        return DiscreteMeasure.from_atoms(self.sigma_diag)

    def resized(self, N: int) -> 'SingleRingEnsemble':
        if self.profile is None:
            raise DomainError('ensemble without a profile measure cannot be resized')
        return self.from_measure(self.profile, N, self.symmetry, self.seed)

    def __repr__(self) -> str:
        return '<SingleRingEnsemble(N={}, symmetry={})>'.format(self.N, self.symmetry)


class BlockAdditiveEnsemble:
    """H = A + U B U* with A = [[0, Xi], [Xi*, 0]], B = [[0, Sigma],
    [Sigma*, 0]] and U = U (+) V block diagonal Haar."""

    def __init__(self, sigma_diag: Sequence[complex], xi_diag: Sequence[complex],
                 symmetry: str = 'unitary', seed: int = 0, bound: float = 1e6,
                 profiles: Optional[Tuple[DiscreteMeasure, DiscreteMeasure]] = None) -> None:
        sigma = np.asarray(sigma_diag, dtype=complex).reshape(-1)
        xi = np.asarray(xi_diag, dtype=complex).reshape(-1)
        if sigma.size == 0 or sigma.shape != xi.shape:
            raise DomainError('Sigma and Xi must be non-empty and of equal size')
        for name, diag in (('Sigma', sigma), ('Xi', xi)):
            if not np.all(np.isfinite(diag)) or np.max(np.abs(diag)) > bound:
                raise DomainError('%s must be finite and bounded by %g' % (name, bound))
        sigma.flags.writeable = False
        xi.flags.writeable = False
        self.sigma_diag = sigma
        self.xi_diag = xi
        self.symmetry = _check_symmetry(symmetry)
        self.seed = int(seed)
        self.bound = bound
        self.profiles = profiles

    @classmethod
    def from_measures(cls, mu_sigma: DiscreteMeasure, mu_xi: DiscreteMeasure, N: int,
                      symmetry: str = 'unitary', seed: int = 0) -> 'BlockAdditiveEnsemble':
        """Ensemble with N-point quantile profiles of mu_sigma and mu_xi."""
        if N < 1:
            raise DomainError('N must be positive, got %d' % N)
        return cls(_quantile_profile(mu_sigma, N), _quantile_profile(mu_xi, N),
                   symmetry, seed, profiles=(mu_sigma, mu_xi))

    @property
    def N(self) -> int:
        return int(self.sigma_diag.size)

    def resized(self, N: int) -> 'BlockAdditiveEnsemble':
        if self.profiles is None:
            raise DomainError('ensemble without profile measures cannot be resized')
        mu_sigma, mu_xi = self.profiles
        return self.from_measures(mu_sigma, mu_xi, N, self.symmetry, self.seed)

    def __repr__(self) -> str:
        return '<BlockAdditiveEnsemble(N={}, symmetry={})>'.format(self.N, self.symmetry)


def _sym_measure(values: np.ndarray) -> DiscreteMeasure:
    mags = np.abs(values)
    return DiscreteMeasure.from_atoms(np.concatenate((-mags, mags)))


def mu_A(e: BlockAdditiveEnsemble) -> DiscreteMeasure:
    """Spectral distribution of A, the symmetrization of mu_|Xi|."""
    return _sym_measure(e.xi_diag)


def mu_B(e: BlockAdditiveEnsemble) -> DiscreteMeasure:
    """Spectral distribution of B, the symmetrization of mu_|Sigma|."""
    return _sym_measure(e.sigma_diag)


def _haar(n: int, symmetry: str, rng: np.random.Generator) -> np.ndarray:
    if symmetry == 'orthogonal':
        return haar_orthogonal(n, rng)
    return haar_unitary(n, rng)


def _haar_pair(n: int, symmetry: str,
               rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """U then V from the same stream; sample_X and block_H rely on the
    order to draw identical U, V from identical generators."""
    u = _haar(n, symmetry, rng)
    v = _haar(n, symmetry, rng)
    return u, v


def sample_X(e: SingleRingEnsemble, rng: np.random.Generator) -> np.ndarray:
    """X = U Sigma V* with independent Haar U, V."""
    u, v = _haar_pair(e.N, e.symmetry, rng)
    return (u * e.sigma_diag[None, :]) @ v.conj().T


def _offdiag(top: np.ndarray) -> np.ndarray:
    n = top.shape[0]
    h = np.zeros((2 * n, 2 * n), dtype=complex)
    h[:n, n:] = top
    h[n:, :n] = top.conj().T
    return h


def hermitization(X: np.ndarray, w: complex) -> np.ndarray:
    """H^w = [[0, X - w], [(X - w)*, 0]]."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DomainError('hermitization needs a square matrix')
    return _offdiag(X - w * np.eye(X.shape[0]))


def m_w(spec: HermitianSpectrum, eta):
    """(1/2N) Tr (H^w - i eta)^-1 = (1/2N) sum_k i eta/(l_k^2 + eta^2).

    Accepts scalar or array eta.
    @raises DomainError: If any eta <= 0.
    """
    eta_arr = np.asarray(eta, dtype=float)
    if np.any(~(eta_arr > 0)):
        raise DomainError('eta must be positive')
    lam2 = spec.eigenvalues ** 2
    vals = np.asarray(1j * np.mean(eta_arr[..., None] / (lam2 + eta_arr[..., None] ** 2), axis=-1))
    return complex(vals) if vals.ndim == 0 else vals


def smallest_sv(spec: HermitianSpectrum) -> float:
    """lambda_1^w, the smallest absolute eigenvalue of H^w."""
    return float(np.min(np.abs(spec.eigenvalues)))


class BlockPair(NamedTuple):
    H: np.ndarray
    H_dual: np.ndarray


def block_H(e: BlockAdditiveEnsemble, rng: np.random.Generator) -> BlockPair:
    """H = A + U B U* and its dual B + U* A U."""
    n = e.N
    u, v = _haar_pair(n, e.symmetry, rng)
    a = _offdiag(np.diag(e.xi_diag))
    b = _offdiag(np.diag(e.sigma_diag))
    cal_u = np.zeros((2 * n, 2 * n), dtype=complex)
    cal_u[:n, :n] = u
    cal_u[n:, n:] = v
    h = a + cal_u @ b @ cal_u.conj().T
    h_dual = b + cal_u.conj().T @ a @ cal_u
    # exact Hermitian symmetry for the eigensolver
    h = 0.5 * (h + h.conj().T)
    h_dual = 0.5 * (h_dual + h_dual.conj().T)
    return BlockPair(h, h_dual)


def dual_H(e: BlockAdditiveEnsemble, rng: np.random.Generator) -> np.ndarray:
    """B + U* A U; equal to block_H(e, rng).H_dual for an identical generator."""
    return block_H(e, rng).H_dual


class ResolventObservables(NamedTuple):
    m_H: complex
    tau1: complex
    tau2: complex
    omega_A_c: complex
    omega_B_c: complex
    lambda_d: float
    eigvec_sup: float


def resolvent_observables(
    H: np.ndarray,
    z: complex,
    xi_diag: Sequence[complex],
    omega_B: complex,
    bulk_window: Optional[Tuple[float, float]] = None,
    spectrum: Optional[HermitianSpectrum] = None,
) -> ResolventObservables:
    """Green function observables of a block matrix H at z.

    G = (H - z)^-1 is assembled from the eigendecomposition, which may be
    passed in to amortize it over many z.  Lambda_d is the largest deviation
    of G_ii, G_^i^i, G_i^i, G_^ii from the targets
    omega_B/(|xi|^2 - omega_B^2), xi/(...) and conj(xi)/(...).
    eigvec_sup is sqrt(N) max |u_k|_inf over eigenvalues in bulk_window
    (0 if the window holds none or is not given).

    @raises DomainError: If Im z <= 0.
    """
    z = complex(z)
    if not z.imag > 0:
        raise DomainError('resolvent needs Im z > 0, got %r' % z)
    xi = np.asarray(xi_diag, dtype=complex)
    n = xi.size
    if H.shape != (2 * n, 2 * n):
        raise DomainError('H must be %dx%d for %d diagonal entries' % (2 * n, 2 * n, n))
    if spectrum is None or spectrum.eigenvectors is None:
        spectrum = hermitian_eigensystem(H, want_vectors=True)
    lam, vecs = spectrum.eigenvalues, spectrum.eigenvectors
    G = (vecs / (lam - z)[None, :]) @ vecs.conj().T
    diag = np.diagonal(G)
    idx = np.arange(n)
    g_ii, g_hh = diag[:n], diag[n:]
    g_ih, g_hi = G[idx, idx + n], G[idx + n, idx]

    m_H = complex(np.mean(diag))
    tau1, tau2 = complex(np.mean(g_ii)), complex(np.mean(g_hh))
    tr_AG = complex(np.sum(xi * g_hi + xi.conj() * g_ih)) / (2 * n)
    A = _offdiag(np.diag(xi))
    tr_BG = complex(np.sum((H - A) * G.T)) / (2 * n)
    omega_A_c = z - tr_AG / m_H
    omega_B_c = z - tr_BG / m_H

    denom = np.abs(xi) ** 2 - omega_B ** 2
    lambda_d = float(max(
        np.max(np.abs(g_ii - omega_B / denom)),
        np.max(np.abs(g_hh - omega_B / denom)),
        np.max(np.abs(g_ih - xi / denom)),
        np.max(np.abs(g_hi - xi.conj() / denom)),
    ))

    eigvec_sup = 0.0
    if bulk_window is not None:
        lo, hi = bulk_window
        inside = (lam >= lo) & (lam <= hi)
        if np.any(inside):
            eigvec_sup = float(np.sqrt(n) * np.max(np.abs(vecs[:, inside])))
    return ResolventObservables(m_H, tau1, tau2, omega_A_c, omega_B_c, lambda_d, eigvec_sup)


class KSplit(NamedTuple):
    lhs: float
    rhs: float
    log_term: float
    eta_integral: float


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def im_m_w_integral(spec: HermitianSpectrum, lo: float, hi: float) -> float:
    """int_lo^hi Im m^w(i eta) d eta by composite Gauss-Legendre on a
    dyadic partition refined towards the smallest |eigenvalue|."""
    if not 0 <= lo <= hi:
        raise DomainError('integration bounds must satisfy 0 <= lo <= hi')
    if lo == hi:
        return 0.0
    lam_min = smallest_sv(spec)
    if lam_min == 0 and lo == 0:
        raise DomainError('eta-integral diverges for a singular spectrum')
    first = max(lo, min(hi, lam_min / 4.0)) if lo == 0 else lo
    edges = [lo] if first == lo else [lo, first]
    while edges[-1] < hi:
        edges.append(min(hi, 2.0 * edges[-1]))
    edges = np.asarray(edges)
    a, b = edges[:-1], edges[1:]
    nodes = 0.5 * (b - a)[:, None] * _GL_NODES[None, :] + 0.5 * (a + b)[:, None]
    lam2 = spec.eigenvalues ** 2
    f = np.mean(nodes[..., None] / (lam2 + nodes[..., None] ** 2), axis=-1)
    return float(np.sum(0.5 * (b - a)[:, None] * _GL_WEIGHTS[None, :] * f))


def k_split_identity(spec: HermitianSpectrum, K: float) -> KSplit:
    """Both sides of the exact split

        (1/2N) Tr log|H| = (1/2N) Tr log|H - iK| - int_0^K Im m(i eta) d eta.
    """
    if not K > 0:
        raise DomainError('K must be positive, got %r' % K)
    lam = spec.eigenvalues
    if np.any(lam == 0):
        raise DomainError('K-split identity needs a non-singular spectrum')
    lhs = float(np.mean(np.log(np.abs(lam))))
    log_term = float(np.mean(0.5 * np.log(lam ** 2 + K * K)))
    integral = im_m_w_integral(spec, 0.0, K)
    logging.getLogger('models').debug(
        'K-split: lhs=%.15g rhs=%.15g', lhs, log_term - integral
    )
    return KSplit(lhs, log_term - integral, log_term, integral)
