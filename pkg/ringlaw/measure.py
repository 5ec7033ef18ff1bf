# vim:set fileencoding=utf-8 ft=python ts=8 sw=4 sts=4 et cindent:

# measure.py -- Atomic probability measures on the real line, their
#         transforms, distances and Nevanlinna representing measures.
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

"""Atomic measures on the real line.

A :class:`DiscreteMeasure` is a finite, strictly increasing set of atoms
carrying positive weights that sum to one.  Continuous reference laws are
approximated by quantile discretization, see :func:`reference_measure`.
"""

import json
import logging
import math
from typing import Any, Dict, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, MeasureError
from .parse import ParseMeasureSpec

WEIGHT_TOL = 1e-12
MERGE_TOL = 1e-12
ZERO_TOL = 1e-13

ComplexLike = Union[complex, np.ndarray]


class AtomicMeasure:
    """A finite non-negative measure with finitely many atoms.  Used for the
    Nevanlinna representing measures, whose total mass is not one.
    """

    def __init__(self, atoms: Sequence[float], weights: Sequence[float]) -> None:
        """\
        @param atoms: Strictly increasing, finite atom positions.
        @param weights: Positive weights, one per atom.
        @raises MeasureError: If the arrays do not describe such a measure.
        """
        atoms = np.array(atoms, dtype=float).reshape(-1)
        weights = np.array(weights, dtype=float).reshape(-1)
        if atoms.shape != weights.shape:
            raise MeasureError(
                'atoms and weights differ in length (%d != %d)'
                % (atoms.size, weights.size)
            )
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise MeasureError('atoms and weights must be finite')
        if np.any(weights <= 0):
            raise MeasureError('weights must be strictly positive')
        if atoms.size > 1 and np.any(np.diff(atoms) <= 0):
            raise MeasureError('atoms must be strictly increasing')
        atoms.flags.writeable = False
        weights.flags.writeable = False
        self._atoms = atoms
        self._weights = weights

    @property
    def atoms(self) -> np.ndarray:
        return self._atoms

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def size(self) -> int:
        return int(self._atoms.size)

    @property
    def mass(self) -> float:
        return float(np.sum(self._weights))

    def is_symmetric(self, tol: float = MERGE_TOL) -> bool:
        """Checks whether the atoms are closed under negation with equal
        weights on mirrored atoms.
        """
        return bool(
            np.allclose(self._atoms, -self._atoms[::-1], rtol=0, atol=tol)
            and np.allclose(self._weights, self._weights[::-1], rtol=0, atol=tol)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {'atoms': self._atoms.tolist(), 'weights': self._weights.tolist()}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AtomicMeasure):
            return NotImplemented
        return bool(
            np.array_equal(self._atoms, other._atoms)
            and np.array_equal(self._weights, other._weights)
        )

    def __hash__(self) -> int:
        return hash((self._atoms.tobytes(), self._weights.tobytes()))

    def __repr__(self) -> str:
        return '<{}(size={}, mass={:.6g})>'.format(
            self.__class__.__name__, self.size, self.mass
        )


class DiscreteMeasure(AtomicMeasure):
    """An atomic probability measure.  Immutable."""

    def __init__(self, atoms: Sequence[float], weights: Sequence[float]) -> None:
        super().__init__(atoms, weights)
        if self.size == 0:
            raise MeasureError('a probability measure needs at least one atom')
        total = self.mass
        if abs(total - 1.0) > WEIGHT_TOL:
            raise MeasureError('weights sum to %.17g, not 1' % total)

    @classmethod
    def from_atoms(
        cls, atoms: Sequence[float], weights: Optional[Sequence[float]] = None
    ) -> 'DiscreteMeasure':
        """Build a measure from unsorted atoms, merging atoms closer than
        MERGE_TOL.  Without weights, every given atom gets the same weight.
        """
        atoms = np.asarray(atoms, dtype=float).reshape(-1)
        if weights is None:
            weights = np.full(atoms.size, 1.0 / max(atoms.size, 1))
        weights = np.asarray(weights, dtype=float).reshape(-1)
        order = np.argsort(atoms, kind='stable')
        atoms, weights = _merge_atoms(atoms[order], weights[order])
        return cls(atoms, weights)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DiscreteMeasure':
        if 'atoms' not in data or 'weights' not in data:
            raise MeasureError('measure needs "atoms" and "weights"')
        return cls(data['atoms'], data['weights'])


def _merge_atoms(atoms: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Merge neighbouring (sorted) atoms closer than MERGE_TOL, summing
    their weights.  Zero weights are dropped."""
    keep = weights > 0
    atoms, weights = atoms[keep], weights[keep]
    if atoms.size == 0:
        return atoms, weights
    starts = np.concatenate(([True], np.diff(atoms) > MERGE_TOL))
    groups = np.cumsum(starts) - 1
    merged_weights = np.bincount(groups, weights=weights)
    merged_atoms = atoms[starts]
    return merged_atoms, merged_weights


def save_measure(mu: AtomicMeasure, fp) -> None:
    json.dump(mu.to_dict(), fp)


def load_measure(fp) -> DiscreteMeasure:
    """Load a measure from JSON of the form {"atoms": [...], "weights": [...]}.
    Invariants are validated on load.
    """
    return DiscreteMeasure.from_dict(json.load(fp))


#
# Transforms
#


def _check_upper(z: ComplexLike) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if np.any(~(z.imag > 0)):
        raise DomainError('spectral parameter must lie in the upper half-plane')
    return z


def _stieltjes(atoms: np.ndarray, weights: np.ndarray, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.sum(weights / (atoms - z[..., None]), axis=-1)


def stieltjes(mu: AtomicMeasure, z: ComplexLike) -> ComplexLike:
    """Stieltjes transform m(z) = sum_i w_i / (x_i - z).

    @param mu: The measure.
    @param z: Scalar or array of spectral parameters with Im z > 0.
    @raises DomainError: If any Im z <= 0.
    """
    zz = _check_upper(z)
    res = _stieltjes(mu.atoms, mu.weights, zz)
    return complex(res) if res.ndim == 0 else res


def neg_recip_stieltjes(mu: AtomicMeasure, z: ComplexLike) -> ComplexLike:
    """Negative reciprocal Stieltjes transform F = -1/m."""
    zz = _check_upper(z)
    res = -1.0 / _stieltjes(mu.atoms, mu.weights, zz)
    return complex(res) if res.ndim == 0 else res


def cdf(mu: AtomicMeasure, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Right-continuous distribution function mu((-inf, x])."""
    cum = np.concatenate(([0.0], np.cumsum(mu.weights)))
    idx = np.searchsorted(mu.atoms, x, side='right')
    res = cum[idx]
    return float(res) if np.ndim(res) == 0 else res


#
# Elementary statistics
#


def symmetrize(mu: DiscreteMeasure) -> DiscreteMeasure:
    """The symmetrization (mu(A) + mu(-A)) / 2.  An atom at zero keeps its
    full weight; coincident atoms are merged.
    """
    atoms = np.concatenate((-mu.atoms, mu.atoms))
    weights = np.concatenate((mu.weights, mu.weights)) / 2.0
    order = np.argsort(atoms, kind='stable')
    atoms, weights = _merge_atoms(atoms[order], weights[order])
    # mirrored exactly; is_symmetric compares bit for bit
    n = atoms.size
    atoms = 0.5 * (atoms - atoms[::-1])
    weights = 0.5 * (weights + weights[::-1])
    if n % 2 == 1:
        atoms[n // 2] = 0.0
    return DiscreteMeasure(atoms, weights / np.sum(weights))


def delta_sym(r: float) -> DiscreteMeasure:
    """The symmetric two-point measure (delta_{-r} + delta_r) / 2."""
    if not r > 0:
        raise DomainError('r must be positive, got %r' % r)
    return DiscreteMeasure([-r, r], [0.5, 0.5])


class Radii(NamedTuple):
    r_minus: float
    r_plus: float
    degenerate: bool


def radii(mu_sigma: DiscreteMeasure) -> Radii:
    """Inner and outer radii of the single ring.

    r_minus = (int x^-2 dmu)^(-1/2), or 0 if mu has an atom at 0;
    r_plus = (int x^2 dmu)^(1/2).

    @raises DomainError: If mu has atoms on the negative half-line.
    @return: Returns the radii and a flag that is set for single-atom
        measures, for which r_minus == r_plus.
    """
    atoms, weights = mu_sigma.atoms, mu_sigma.weights
    if np.any(atoms < 0):
        raise DomainError('singular value measure must live on [0, inf)')
    r_plus = math.sqrt(float(np.sum(weights * atoms ** 2)))
    if atoms[0] == 0.0:
        r_minus = 0.0
    else:
        r_minus = 1.0 / math.sqrt(float(np.sum(weights / atoms ** 2)))
    degenerate = mu_sigma.size < 2
    if degenerate:
        logging.getLogger('measure').warning(
            'measure is a point mass; the ring degenerates to a circle'
        )
    return Radii(r_minus, r_plus, degenerate)


class RingGeometry:
    """The ring r_minus <= |w| <= r_plus together with the shrunk annulus
    r_minus + tau <= |w| <= r_plus - tau used as bulk domain.
    """

    def __init__(self, r_minus: float, r_plus: float, s_plus: float,
                 tau: float = 0.0) -> None:
        if not 0 <= r_minus < r_plus:
            raise DomainError(
                'ring needs 0 <= r_minus < r_plus, got [%g, %g]' % (r_minus, r_plus)
            )
        if r_plus > s_plus * (1 + 1e-12):
            raise DomainError('r_plus %g exceeds s_plus %g' % (r_plus, s_plus))
        if tau < 0:
            raise DomainError('tau must be non-negative, got %g' % tau)
        self.r_minus = r_minus
        self.r_plus = r_plus
        self.s_plus = s_plus
        self.tau = tau

    @classmethod
    def from_measure(cls, mu_sigma: DiscreteMeasure,
                     tau: Optional[float] = None) -> 'RingGeometry':
        """@param tau: Annulus shrinkage; defaults to 0.05 (r_plus - r_minus).
        """
        r_minus, r_plus, degenerate = radii(mu_sigma)
        if degenerate:
            raise DomainError('a point mass does not define a ring')
        s_plus, _ = support_stats(mu_sigma)
        if tau is None:
            tau = 0.05 * (r_plus - r_minus)
        return cls(r_minus, r_plus, s_plus, tau)

    @property
    def inner(self) -> float:
        return self.r_minus + self.tau

    @property
    def outer(self) -> float:
        return self.r_plus - self.tau

    @property
    def is_empty(self) -> bool:
        return not self.inner < self.outer

    def contains(self, w: complex) -> bool:
        """Checks whether |w| lies in the closed shrunk annulus."""
        return self.inner <= abs(w) <= self.outer

    def check(self, w: complex) -> None:
        """@raises DomainError: If w lies outside the shrunk annulus."""
        if not self.contains(w):
            raise DomainError(
                '|w| = %.6g outside the annulus [%.6g, %.6g]'
                % (abs(w), self.inner, self.outer)
            )

    def __repr__(self) -> str:
        return '<RingGeometry([{:.6g}, {:.6g}], s_plus={:.6g}, tau={:.6g})>'.format(
            self.r_minus, self.r_plus, self.s_plus, self.tau
        )


def support_stats(mu: AtomicMeasure) -> Tuple[float, float]:
    """@return: Returns (s_plus, second_moment), s_plus being the largest
        absolute atom."""
    return float(np.max(np.abs(mu.atoms))), float(np.sum(mu.weights * mu.atoms ** 2))


class Moments(NamedTuple):
    m2: float
    m4: float
    m6: float


def moments(mu: AtomicMeasure) -> Moments:
    """@return: Returns the second, fourth and sixth moments."""
    sq = mu.atoms ** 2
    return Moments(
        float(np.sum(mu.weights * sq)),
        float(np.sum(mu.weights * sq ** 2)),
        float(np.sum(mu.weights * sq ** 3)),
    )


def levy_distance(mu: AtomicMeasure, nu: AtomicMeasure, tol: float = 1e-15) -> float:
    """Levy distance, the smallest eps with

        F_mu(x - eps) - eps <= F_nu(x) <= F_mu(x + eps) + eps  for all x.

    Feasibility of a given eps is decided exactly: both differences are
    right-continuous step functions, so their suprema are attained on the
    finitely many break points.  The threshold is then found by bisection.
    """
    a, ca = mu.atoms, np.cumsum(mu.weights)
    b = nu.atoms

    def feasible(eps: float) -> bool:
        # lower band: F_mu(x - eps) - eps - F_nu(x) <= 0
        pts = np.concatenate((b, a + eps))
        lower = cdf(mu, pts - eps)
        # the break points a + eps are evaluated without round-off
        lower[b.size:] = ca
        if np.any(lower - eps - cdf(nu, pts) > 0):
            return False
        # upper band: F_nu(x) - F_mu(x + eps) - eps <= 0
        pts = np.concatenate((b, a - eps))
        upper = cdf(mu, pts + eps)
        upper[b.size:] = ca
        return not np.any(cdf(nu, pts) - upper - eps > 0)

    if feasible(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


#
# Nevanlinna representation
#


def nevanlinna_rep(
    mu_sym: DiscreteMeasure,
) -> Tuple[AtomicMeasure, AtomicMeasure, float]:
    """Representing measure of F_mu(w) - w = int dmu_hat(x) / (x - w) for a
    symmetric measure.

    The atoms of mu_hat are the zeros of m_mu, one in every gap between
    consecutive atoms, with weight 1/m'(x0).  By symmetry the gap around the
    origin (if there is no atom at 0) holds the zero x0 = 0, whose weight is
    r_minus^2.

    @return: Returns (mu_hat, mu_tilde, r_minus_sq) where mu_tilde is mu_hat
        with the atom at the origin removed.
    @raises MeasureError: For fewer than two atoms or non-symmetric input.
    """
    if mu_sym.size < 2:
        raise MeasureError('Nevanlinna representation needs at least two atoms')
    if not mu_sym.is_symmetric():
        raise MeasureError('Nevanlinna representation needs a symmetric measure')

    atoms, weights = mu_sym.atoms, mu_sym.weights
    pos = atoms[atoms > 0]
    pos_w = weights[atoms > 0]
    has_zero_atom = bool(np.any(atoms == 0.0))

    # zeros strictly between consecutive positive atoms
    lo = pos[:-1].copy()
    hi = pos[1:].copy()
    if lo.size:
        for _ in range(200):
            if np.all(hi - lo <= ZERO_TOL):
                break
            mid = 0.5 * (lo + hi)
            val = np.sum(weights / (atoms - mid[:, None]), axis=-1)
            # m is strictly increasing on every gap
            lo = np.where(val < 0, mid, lo)
            hi = np.where(val < 0, hi, mid)
        zeros_pos = 0.5 * (lo + hi)
        dm = np.sum(weights / (atoms - zeros_pos[:, None]) ** 2, axis=-1)
        w_pos = 1.0 / dm
    else:
        zeros_pos = np.zeros(0)
        w_pos = np.zeros(0)

    if has_zero_atom:
        # m has a pole at 0, and the zeros in (-x1, 0), (0, x1) are mirrored
        lo = np.full(1, 0.0)
        hi = pos[:1].copy()
        for _ in range(200):
            if hi[0] - lo[0] <= ZERO_TOL:
                break
            mid = 0.5 * (lo + hi)
            val = np.sum(weights / (atoms - mid[:, None]), axis=-1)
            lo = np.where(val < 0, mid, lo)
            hi = np.where(val < 0, hi, mid)
        inner = 0.5 * (lo + hi)
        inner_w = 1.0 / np.sum(weights / (atoms - inner[:, None]) ** 2, axis=-1)
        zeros_pos = np.concatenate((inner, zeros_pos))
        w_pos = np.concatenate((inner_w, w_pos))
        r_minus_sq = 0.0
    else:
        r_minus_sq = 1.0 / float(np.sum(pos_w / pos ** 2) * 2.0)

    tilde_atoms = np.concatenate((-zeros_pos[::-1], zeros_pos))
    tilde_weights = np.concatenate((w_pos[::-1], w_pos))
    mu_tilde = AtomicMeasure(tilde_atoms, tilde_weights)
    if r_minus_sq > 0:
        hat_atoms = np.concatenate((-zeros_pos[::-1], [0.0], zeros_pos))
        hat_weights = np.concatenate((w_pos[::-1], [r_minus_sq], w_pos))
        mu_hat = AtomicMeasure(hat_atoms, hat_weights)
    else:
        mu_hat = mu_tilde
    return mu_hat, mu_tilde, r_minus_sq


#
# Reference measures
#


def _quarter_circle_cdf(x: float) -> float:
    x = min(max(x, 0.0), 2.0)
    return (x * math.sqrt(4.0 - x * x) / 2.0 + 2.0 * math.asin(x / 2.0)) / math.pi


def reference_measure(spec: str, n_atoms: int = 2) -> DiscreteMeasure:
    """Quantile discretization of a named reference law: atom i sits at the
    (i - 1/2)/n quantile and all atoms get weight 1/n.

    Known names: "quarter_circle" (density sqrt(4 - x^2)/pi on [0, 2]),
    "two_point(a,b,p)" (p delta_a + (1 - p) delta_b, n_atoms ignored) and
    "uniform(a,b)".

    @raises DomainError: For unknown names, bad parameters or n_atoms < 2.
    """
    parsed = ParseMeasureSpec().parse_measure_spec(spec)
    if parsed is None:
        raise DomainError('unknown reference measure "%s"' % spec)
    name, args = parsed
    if n_atoms < 2:
        raise DomainError('n_atoms must be at least 2, got %d' % n_atoms)
    levels = (np.arange(n_atoms) + 0.5) / n_atoms

    if name == 'quarter_circle' and not args:
        atoms = [
            brentq(lambda x, q=q: _quarter_circle_cdf(x) - q, 0.0, 2.0, xtol=1e-15)
            for q in levels
        ]
        return DiscreteMeasure.from_atoms(atoms)
    if name == 'uniform' and len(args) == 2:
        lo, hi = args
        if not lo < hi:
            raise DomainError('uniform(a,b) needs a < b')
        return DiscreteMeasure.from_atoms(lo + (hi - lo) * levels)
    if name == 'two_point' and len(args) == 3:
        a, b, p = args
        if not 0 < p < 1 or a == b:
            raise DomainError('two_point(a,b,p) needs a != b and 0 < p < 1')
        return DiscreteMeasure.from_atoms([a, b], [p, 1.0 - p])
    raise DomainError('unknown reference measure "%s"' % spec)
