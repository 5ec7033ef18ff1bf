# vim:set fileencoding=utf-8 ft=python ts=8 sw=4 sts=4 et cindent:

# ring.py -- Single ring log-potential and limiting eigenvalue density.
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

"""Log-potential and density of the single ring law.

For |w| = s the log-potential L(s) = int log|u| dmu_{Sigma,s}(u), with
mu_{Sigma,s} = mu_Sigma^sym [+] delta_s^sym, is evaluated through the split

    L(s) = int log|u - iK| dmu_{Sigma,s} - int_0^K Im m_{Sigma,s}(i eta) d eta.

The first term and the tail of the second beyond eta0 come from moment
expansions, the rest from adaptive quadrature.  The density is
(1/2 pi) (L'' + L'/s).
"""

import logging
import math
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.integrate import quad, simpson
from scipy.interpolate import CubicSpline

from .errors import DomainError, QuadratureError
from .freeconv import AxisSolver, free_moments
from .measure import DiscreteMeasure, delta_sym, radii, support_stats, symmetrize

DEFAULT_QUAD_TOL = 1e-9
DEFAULT_N_RADII = 129
ETA0_FACTOR = 10.0


def default_K(mu_sigma: DiscreteMeasure, s: float = 0.0) -> float:
    s_plus, _ = support_stats(mu_sigma)
    return max(100.0, 20.0 * s_plus, 10.0 * s)


def default_h(mu_sigma: DiscreteMeasure) -> float:
    r_minus, r_plus, _ = radii(mu_sigma)
    return 1e-2 * (r_plus - r_minus)


class _Potential:
    """L(s) for one measure; picklable so radial grids can be mapped over
    worker processes."""

    def __init__(self, mu_sigma: DiscreteMeasure, K: Optional[float],
                 quad_tol: float) -> None:
        self.mu_sym = symmetrize(mu_sigma)
        self.s_plus, self.m2 = support_stats(mu_sigma)
        self.K = K
        self.quad_tol = quad_tol

    def __call__(self, s: float) -> float:
        log = logging.getLogger('ring')
        if not s > 0:
            raise DomainError('log-potential needs s > 0, got %r' % s)
        K = self.K if self.K is not None else max(100.0, 20.0 * self.s_plus, 10.0 * s)
        if K < 10.0 * max(self.s_plus, s):
            raise DomainError(
                'K = %g must be at least 10 max(s_plus, s) = %g'
                % (K, 10.0 * max(self.s_plus, s))
            )
        m2, m4, m6 = free_moments(self.mu_sym, delta_sym(s))
        eta0 = ETA0_FACTOR * max(self.s_plus, s)

        t1 = math.log(K) + m2 / (2 * K ** 2) - m4 / (4 * K ** 4) + m6 / (6 * K ** 6)

        solver = AxisSolver(self.mu_sym, s)

        def im_m(eta: float) -> float:
            y, _ = solver.solve(eta, 1e-13)
            return solver.g(y)

        res = quad(im_m, 0.0, eta0, epsabs=self.quad_tol, epsrel=0.0,
                   limit=200, full_output=1)
        body, abserr = res[0], res[1]
        if len(res) > 3:
            log.warning('quadrature at s=%g: %s', s, res[3].splitlines()[0])
            if abserr > max(1e-6, 1e3 * self.quad_tol):
                raise QuadratureError(
                    'eta-integral at s=%g failed (error estimate %.3g)' % (s, abserr)
                )
        tail = (
            math.log(K / eta0)
            + 0.5 * m2 * (K ** -2 - eta0 ** -2)
            - 0.25 * m4 * (K ** -4 - eta0 ** -4)
            + m6 / 6.0 * (K ** -6 - eta0 ** -6)
        )
        value = t1 - body - tail
        log.debug('L(%.10g) = %.15g (quad error %.2g)', s, value, abserr)
        return value


def log_potential(
    mu_sigma: DiscreteMeasure,
    s: float,
    K: Optional[float] = None,
    quad_tol: float = DEFAULT_QUAD_TOL,
) -> float:
    """L(s) = int log|u| d mu_{Sigma,s}(u).

    @param K: Split height; defaults to max(100, 20 s_plus, 10 s).
    @raises DomainError: If s <= 0 or K < 10 max(s_plus, s).
    @raises QuadratureError: If the eta-integral fails to reach quad_tol.
    """
    return _Potential(mu_sigma, K, quad_tol)(s)


class RadialPotentialProfile:
    """L sampled on an increasing radial grid, interpolated by a cubic
    spline."""

    def __init__(self, s_grid: Sequence[float], L_values: Sequence[float],
                 K: Optional[float], m2_sigma: float, quad_tol: float) -> None:
        s_grid = np.asarray(s_grid, dtype=float)
        L_values = np.asarray(L_values, dtype=float)
        if s_grid.size < 2 or np.any(np.diff(s_grid) <= 0):
            raise DomainError('profile grid must be increasing with at least two radii')
        if not np.all(np.isfinite(L_values)):
            raise DomainError('log-potential is not finite on the grid')
        self.s_grid = s_grid
        self.L_values = L_values
        self.K = K
        self.m2_sigma = m2_sigma
        self.quad_tol = quad_tol
        self._spline = CubicSpline(s_grid, L_values)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        lo, hi = self.s_grid[0], self.s_grid[-1]
        slack = 1e-12 * (hi - lo)
        if np.any(s < lo - slack) or np.any(s > hi + slack):
            raise DomainError('radius outside the profile grid [%g, %g]' % (lo, hi))
        return self._spline(np.clip(s, lo, hi))

    def derivative(self, s, nu: int = 1):
        return self._spline(np.asarray(s, dtype=float), nu)


def potential_profile(
    mu_sigma: DiscreteMeasure,
    s_grid: Sequence[float],
    K: Optional[float] = None,
    quad_tol: float = DEFAULT_QUAD_TOL,
    map_fn: Callable = map,
) -> RadialPotentialProfile:
    potential = _Potential(mu_sigma, K, quad_tol)
    values = list(map_fn(potential, [float(s) for s in s_grid]))
    return RadialPotentialProfile(s_grid, values, K, potential.m2, quad_tol)


def _fd(Lm2, Lm1, L0, Lp1, Lp2, h):
    dL = (-Lp2 + 8 * Lp1 - 8 * Lm1 + Lm2) / (12 * h)
    d2L = (-Lp2 + 16 * Lp1 - 30 * L0 + 16 * Lm1 - Lm2) / (12 * h * h)
    return dL, d2L


def ring_density(
    mu_sigma: DiscreteMeasure,
    s: float,
    h: Optional[float] = None,
    K: Optional[float] = None,
    quad_tol: float = DEFAULT_QUAD_TOL,
) -> float:
    """rho(s) = (L''(s) + L'(s)/s) / 2 pi with 5-point central differences.

    @param h: Step; defaults to 1e-2 (r_plus - r_minus).
    """
    row = density_profile(mu_sigma, [s], h, K, quad_tol)[0]
    return row.rho


class DensityRow(NamedTuple):
    s: float
    L: float
    dL: float
    d2L: float
    rho: float


def density_profile(
    mu_sigma: DiscreteMeasure,
    s_grid: Sequence[float],
    h: Optional[float] = None,
    K: Optional[float] = None,
    quad_tol: float = DEFAULT_QUAD_TOL,
    map_fn: Callable = map,
) -> List[DensityRow]:
    """Rows (s, L, dL, d2L, rho) for every radius; stencil radii shared
    between neighbouring grid points are evaluated once.
    """
    if h is None:
        h = default_h(mu_sigma)
    if not h > 0:
        raise DomainError('finite difference step must be positive, got %r' % h)
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid - 2 * h <= 0):
        raise DomainError('stencil reaches s <= 0; need s > 2h = %g' % (2 * h))
    offsets = np.arange(-2, 3) * h
    stencil = s_grid[:, None] + offsets[None, :]
    nodes, inverse = np.unique(np.round(stencil, 13), return_inverse=True)
    values = np.array(list(map_fn(_Potential(mu_sigma, K, quad_tol), nodes.tolist())))
    L = values[inverse.reshape(stencil.shape)]
    rows = []
    for s, (Lm2, Lm1, L0, Lp1, Lp2) in zip(s_grid, L):
        dL, d2L = _fd(Lm2, Lm1, L0, Lp1, Lp2, h)
        rows.append(DensityRow(float(s), float(L0), float(dL), float(d2L),
                               float((d2L + dL / s) / (2 * math.pi))))
    return rows


def ring_mass(
    mu_sigma: DiscreteMeasure,
    tau: float,
    n_radii: int = DEFAULT_N_RADII,
    K: Optional[float] = None,
    quad_tol: float = DEFAULT_QUAD_TOL,
    map_fn: Callable = map,
) -> float:
    """Mass of the density on the annulus r_minus + tau <= |w| <= r_plus - tau.

    The radial integrand 2 pi s rho(s) = s L'' + L' is integrated with
    Simpson's rule on n_radii uniform nodes; L is evaluated once on that
    grid extended by two nodes on either side.  The result is compared
    with the flux b L'(b) - a L'(a).

    @raises DomainError: If tau < 0 or the stencil reaches s <= 0.
    """
    log = logging.getLogger('ring')
    if tau < 0:
        raise DomainError('tau must be non-negative, got %g' % tau)
    if n_radii < 3:
        raise DomainError('ring mass needs at least 3 radii, got %d' % n_radii)
    r_minus, r_plus, _ = radii(mu_sigma)
    a, b = r_minus + tau, r_plus - tau
    if not a < b:
        return 0.0
    h = (b - a) / (n_radii - 1)
    if a - 2 * h <= 0:
        raise DomainError(
            'stencil reaches s <= 0 at a = %g, h = %g; increase tau or n_radii' % (a, h)
        )
    s_ext = a + h * np.arange(-2, n_radii + 2)
    L = np.array(list(map_fn(_Potential(mu_sigma, K, quad_tol), s_ext.tolist())))
    dL, d2L = _fd(L[:-4], L[1:-3], L[2:-2], L[3:-1], L[4:], h)
    s = s_ext[2:-2]
    mass = float(simpson(s * d2L + dL, x=s))
    flux = float(b * dL[-1] - a * dL[0])
    if abs(mass - flux) > 1e-3:
        log.warning('ring mass %.8g disagrees with flux %.8g', mass, flux)
    else:
        log.debug('ring mass %.10g, flux %.10g', mass, flux)
    return mass
