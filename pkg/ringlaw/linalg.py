# vim:set fileencoding=utf-8 ft=python ts=8 sw=4 sts=4 et cindent:

# linalg.py -- Haar sampling, Hermitian eigensystems and log-determinants.
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

import logging
import warnings
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import ConvergenceError, DomainError

HERMITIAN_TOL = 1e-10
SHIFT_CHUNK = 1024


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def child_rng(seed: int, task_index: int) -> np.random.Generator:
    """Generator of task number task_index of a run seeded with seed.  The
    stream depends only on (seed, task_index), never on scheduling."""
    seq = np.random.SeedSequence(seed, spawn_key=(task_index,))
    return np.random.Generator(np.random.PCG64(seq))


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar distributed n x n unitary matrix.

    QR of a complex Ginibre matrix with the columns of Q rotated by the
    phases of the diagonal of R, so that the factorization is the unique
    one with positive diagonal in R.
    """
    if n < 1:
        raise DomainError('matrix size must be positive, got %d' % n)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = scipy.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar distributed n x n real orthogonal matrix."""
    if n < 1:
        raise DomainError('matrix size must be positive, got %d' % n)
    q, r = scipy.linalg.qr(rng.standard_normal((n, n)))
    sign = np.sign(np.diagonal(r))
    sign[sign == 0] = 1.0
    return q * sign[None, :]


class HermitianSpectrum(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray]
    residual: float


def is_hermitian(m: np.ndarray, tol: float = 1e-12) -> bool:
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol * scale)


def hermitian_eigensystem(m: np.ndarray, want_vectors: bool = False) -> HermitianSpectrum:
    """Eigenvalues (ascending) and optionally orthonormal eigenvectors of a
    Hermitian matrix, by LAPACK tridiagonal reduction and implicit QR.

    @return: Returns the spectrum; the residual is max_k |M v_k - l_k v_k|
        when vectors are requested, otherwise the standard backward error
        bound n eps |M|.
    @raises DomainError: If m is not Hermitian to HERMITIAN_TOL.
    @raises ConvergenceError: If LAPACK fails to converge.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError('eigensystem needs a square matrix, got shape %s' % (m.shape,))
    if not is_hermitian(m, HERMITIAN_TOL):
        raise DomainError('matrix is not Hermitian')
    try:
        if want_vectors:
            vals, vecs = scipy.linalg.eigh(m, check_finite=True)
        else:
            vals, vecs = scipy.linalg.eigh(m, eigvals_only=True, check_finite=True), None
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError('eigensolver failed: %s' % exc, float('nan'), 0) from exc
    norm = float(np.max(np.abs(vals), initial=0.0))
    if vecs is not None:
        residual = float(np.max(np.linalg.norm(m @ vecs - vecs * vals[None, :], axis=0),
                                initial=0.0))
    else:
        residual = m.shape[0] * np.finfo(float).eps * norm
    return HermitianSpectrum(vals, vecs, residual)


class LogDet(NamedTuple):
    value: float
    rcond: float


def log_abs_det(m: np.ndarray) -> LogDet:
    """log|det m| by LU with partial pivoting.

    @return: Returns the value, -inf for an exactly singular matrix, and the
        reciprocal 1-norm condition estimate of the factorization.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError('determinant needs a square matrix, got shape %s' % (m.shape,))
    if m.shape[0] == 0:
        return LogDet(0.0, 1.0)
    dtype = np.result_type(m, float)
    with np.errstate(divide='ignore'), warnings.catch_warnings():
        warnings.simplefilter('ignore', scipy.linalg.LinAlgWarning)
        lu, _ = scipy.linalg.lu_factor(m.astype(dtype))
        value = float(np.sum(np.log(np.abs(np.diagonal(lu)))))
    if value == -np.inf:
        return LogDet(value, 0.0)
    gecon, = lapack.get_lapack_funcs(('gecon',), (lu,))
    rcond, info = gecon(lu, np.linalg.norm(m, 1), norm='1')
    if info != 0:
        logging.getLogger('linalg').warning('gecon returned info=%d', info)
    return LogDet(value, float(rcond))


class ShiftedLogDet:
    """log|det(X - w)| for many shifts w.

    X is reduced once to upper Hessenberg form; every shift then costs one
    O(n^2) Hessenberg LU with partial pivoting, where the pivot is chosen
    between the active row and the next one.  Shifts are processed in
    vectorized chunks.
    """

    def __init__(self, x: np.ndarray, chunk: int = SHIFT_CHUNK) -> None:
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise DomainError('log-determinant needs a square matrix')
        self._h = scipy.linalg.hessenberg(x.astype(complex))
        self._chunk = chunk
        self._log = logging.getLogger('shiftedlogdet')

    @property
    def size(self) -> int:
        return self._h.shape[0]

    def __call__(self, w) -> np.ndarray:
        """@return: Returns log|det(X - w)| per shift, -inf where a pivot
            vanished exactly."""
        w = np.asarray(w, dtype=complex)
        flat = w.reshape(-1)
        out = np.empty(flat.size)
        for start in range(0, flat.size, self._chunk):
            out[start:start + self._chunk] = self._batch(flat[start:start + self._chunk])
        singular = int(np.count_nonzero(np.isneginf(out)))
        if singular:
            self._log.debug('%d of %d shifts hit an exact zero pivot', singular, flat.size)
        return out.reshape(w.shape)

    def _batch(self, w: np.ndarray) -> np.ndarray:
        h = self._h
        n = h.shape[0]
        b = w.size
        total = np.zeros(b)
        cur = np.repeat(h[0][None, :], b, axis=0)
        cur[:, 0] -= w
        with np.errstate(divide='ignore', invalid='ignore'):
            for j in range(n - 1):
                nxt = np.repeat(h[j + 1, j:][None, :], b, axis=0)
                nxt[:, 1] -= w
                act = cur[:, j:]
                swap = np.abs(nxt[:, 0]) > np.abs(act[:, 0])
                piv = np.where(swap[:, None], nxt, act)
                oth = np.where(swap[:, None], act, nxt)
                p = piv[:, 0]
                total += np.log(np.abs(p))
                mult = np.divide(oth[:, 0], p, out=np.zeros(b, dtype=complex), where=p != 0)
                cur[:, j + 1:] = oth[:, 1:] - mult[:, None] * piv[:, 1:]
            total += np.log(np.abs(cur[:, n - 1]))
        return total
