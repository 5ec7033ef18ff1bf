# vim:set fileencoding=utf-8 ft=python ts=8 sw=4 sts=4 et cindent:

# freeconv.py -- Free additive convolution by subordination, boundary
#         densities and the imaginary axis bound certificate.
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

"""Subordination solvers.

For probability measures mu1, mu2 the subordination functions omega1,
omega2 solve

    F_mu1(omega2) = F_mu2(omega1) = omega1 + omega2 - z

and m_{mu1 [+] mu2}(z) = m_mu1(omega2(z)).  The generic solver iterates the
map T(w) = z + h2(z + h1(w)) with h = F - id, which sends the upper
half-plane into itself, so its fixed point there is unique.
"""

import json
import logging
import math
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, DomainError, MeasureError
from .measure import (
    AtomicMeasure,
    Moments,
    DiscreteMeasure,
    delta_sym,
    moments,
    nevanlinna_rep,
    support_stats,
)

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10000
DEFAULT_ETA_SEQ = (1e-2, 5e-3, 2.5e-3, 1.25e-3)
DEFAULT_C_CAP = 100.0


class SubordinationState(NamedTuple):
    z: complex
    omega1: complex
    omega2: complex
    m: complex
    F: complex
    residual: float
    iterations: int


def _f_df(atoms: np.ndarray, weights: np.ndarray, w: complex) -> Tuple[complex, complex]:
    """F_mu(w) and its derivative m'/m^2."""
    d = 1.0 / (atoms - w)
    m = complex(np.dot(weights, d))
    dm = complex(np.dot(weights, d * d))
    return -1.0 / m, dm / (m * m)


def _point_mass(mu: AtomicMeasure) -> Optional[float]:
    if mu.size == 1:
        return float(mu.atoms[0])
    return None


def _delta_radius(mu: AtomicMeasure) -> Optional[float]:
    """r if mu is (delta_{-r} + delta_r)/2, else None."""
    if (mu.size == 2 and mu.atoms[1] > 0 and mu.atoms[0] == -mu.atoms[1]
            and mu.weights[0] == mu.weights[1]):
        return float(mu.atoms[1])
    return None


def _check_z(z: complex) -> complex:
    z = complex(z)
    if not z.imag > 0:
        raise DomainError('spectral parameter %r is not in the upper half-plane' % z)
    return z


def _iterate(
    T: Callable[[complex], Tuple[complex, complex]],
    omega: complex,
    tol: float,
    max_iter: int,
) -> Tuple[complex, float, int]:
    """Find the fixed point of T in the upper half-plane.

    Each step tries a Newton step on w - T(w) and keeps it only if it stays
    in the upper half-plane and lowers the residual; otherwise a damped
    fixed point step is taken, with the damping halved whenever the
    residual grew.

    @param T: Returns T(w) and T'(w).
    @return: Returns the fixed point, its residual and the iteration count.
    """
    t, dt = T(omega)
    res = abs(t - omega)
    theta = 1.0
    for it in range(max_iter):
        if res <= tol * max(1.0, abs(omega)):
            return omega, res, it
        denom = 1.0 - dt
        if denom != 0:
            cand = omega - (omega - t) / denom
            if cand.imag > 0 and math.isfinite(cand.imag):
                t_c, dt_c = T(cand)
                res_c = abs(t_c - cand)
                if res_c < res:
                    omega, t, dt, res = cand, t_c, dt_c, res_c
                    theta = min(1.0, 2.0 * theta)
                    continue
        cand = omega + theta * (t - omega)
        t_c, dt_c = T(cand)
        res_c = abs(t_c - cand)
        if res_c > res:
            theta = max(0.5 * theta, 1e-6)
        omega, t, dt, res = cand, t_c, dt_c, res_c
    raise ConvergenceError('subordination iteration did not converge', res, max_iter)


def _state(mu1: AtomicMeasure, z: complex, omega1: complex, omega2: complex,
           residual: float, iterations: int) -> SubordinationState:
    F, _ = _f_df(mu1.atoms, mu1.weights, omega2)
    return SubordinationState(z, omega1, omega2, -1.0 / F, F, residual, iterations)


def solve_phi_system(
    mu1: DiscreteMeasure,
    mu2: DiscreteMeasure,
    z: complex,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SubordinationState:
    """Solve the subordination system for mu1 [+] mu2 at z.

    @param tol: Bound on |Phi| relative to max(1, |omega2|).
    @raises DomainError: If Im z <= 0.
    @raises MeasureError: If either measure is a point mass.
    @raises ConvergenceError: After max_iter steps without convergence.
    """
    if mu1.size < 2 or mu2.size < 2:
        raise MeasureError('subordination system needs measures with more than one atom')
    z = _check_z(z)
    a1, w1 = mu1.atoms, mu1.weights
    a2, w2 = mu2.atoms, mu2.weights

    def T(omega: complex) -> Tuple[complex, complex]:
        F1, dF1 = _f_df(a1, w1, omega)
        omega1 = z + F1 - omega
        F2, dF2 = _f_df(a2, w2, omega1)
        return z + F2 - omega1, (dF2 - 1.0) * (dF1 - 1.0)

    start = z + 1j * math.sqrt(moments(mu1)[0] + moments(mu2)[0])
    omega2, res, it = _iterate(T, start, tol, max_iter)
    F1, _ = _f_df(a1, w1, omega2)
    return _state(mu1, z, z + F1 - omega2, omega2, res, it)


class AxisSolver:
    """Solves the delta_r^sym equation along the imaginary axis z = i eta,
    eta >= 0, for a symmetric mu1, where omega2 = i y is purely imaginary.

    With g(y) = Im m(iy), P(y) = sum w x^2/(x^2 + y^2), the equation for
    d = y - eta reads d (P(y)/g(y) + eta) = r^2, increasing in d.  At
    eta = 0 it becomes P/Q = r^2 with Q = sum w/(x^2 + y^2), increasing in y
    from r_minus^2 to r_plus^2.
    """

    def __init__(self, mu1_sym: DiscreteMeasure, r: float) -> None:
        x2, inverse = np.unique(mu1_sym.atoms ** 2, return_inverse=True)
        self._x2 = x2
        self._w = np.bincount(inverse, weights=mu1_sym.weights)
        self._r2 = r * r

    def g(self, y: float) -> float:
        return float(np.dot(self._w, y / (self._x2 + y * y)))

    def _pq(self, y: float) -> Tuple[float, float]:
        d = 1.0 / (self._x2 + y * y)
        return float(np.dot(self._w * self._x2, d)), float(np.dot(self._w, d))

    def solve(self, eta: float, tol: float) -> Tuple[float, int]:
        """@return: Returns Im omega2(i eta) and the root finder iterations."""
        r2 = self._r2
        if eta > 0:
            def phi(d):
                y = eta + d
                p, q = self._pq(y)
                return d * (p / (y * q) + eta) - r2

            hi = math.sqrt(r2)
            while phi(hi) <= 0:
                hi *= 2.0
                if hi > 1e300:
                    raise ConvergenceError('no bracket for omega2', abs(phi(hi)), 0)
            d, info = brentq(phi, 0.0, hi, xtol=tol * r2 / (1.0 + eta),
                             rtol=8.9e-16, full_output=True)
            return eta + d, info.iterations

        def psi(t):
            p, q = self._pq(math.exp(t))
            return p / q - r2

        lo, hi = -1.0, 1.0
        grow = 0
        while psi(lo) >= 0 or psi(hi) <= 0:
            lo, hi = lo - 2.0, hi + 2.0
            grow += 1
            if grow > 60:
                raise DomainError(
                    'r = %.6g is not inside the ring; omega2(0) has no root' % math.sqrt(r2)
                )
        t, info = brentq(psi, lo, hi, xtol=tol, rtol=8.9e-16, full_output=True)
        return math.exp(t), info.iterations


def _check_sym(mu1_sym: DiscreteMeasure) -> None:
    if mu1_sym.size < 2:
        raise MeasureError('mu1 must have more than one atom')
    if not mu1_sym.is_symmetric():
        raise MeasureError('mu1 must be symmetric')


def solve_delta_conv(
    mu1_sym: DiscreteMeasure,
    r: float,
    z: complex,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SubordinationState:
    """Subordination for mu1_sym [+] delta_r^sym.

    omega2 solves F_mu1(omega2) - omega2 = -z - r^2/(omega2 - z) and
    omega1 = -r^2/(omega2 - z).  On the imaginary axis z = i eta, eta >= 0,
    the equation is reduced to a monotone real root-find; eta = 0 gives the
    boundary value omega2(0).

    @raises DomainError: For r <= 0, z off the closed upper half-plane, or
        z = 0 with r outside (r_minus, r_plus).
    """
    if not r > 0:
        raise DomainError('r must be positive, got %r' % r)
    _check_sym(mu1_sym)
    z = complex(z)
    if z.real == 0 and z.imag >= 0:
        eta = z.imag
        y, it = AxisSolver(mu1_sym, r).solve(eta, tol)
        omega2 = 1j * y
        omega1 = -r * r / (omega2 - z)
        F, _ = _f_df(mu1_sym.atoms, mu1_sym.weights, omega2)
        residual = abs(F - omega2 + z + r * r / (omega2 - z))
        return SubordinationState(z, omega1, omega2, -1.0 / F, F, residual, it)

    z = _check_z(z)
    a1, w1 = mu1_sym.atoms, mu1_sym.weights
    r2 = r * r

    def T(omega: complex) -> Tuple[complex, complex]:
        F1, dF1 = _f_df(a1, w1, omega)
        omega1 = z + F1 - omega
        return z - r2 / omega1, r2 / (omega1 * omega1) * (dF1 - 1.0)

    start = z + 1j * math.sqrt(moments(mu1_sym)[0] + r2)
    omega2, res, it = _iterate(T, start, tol, max_iter)
    return _state(mu1_sym, z, -r2 / (omega2 - z), omega2, res, it)


def free_moments(mu1: AtomicMeasure, mu2: AtomicMeasure) -> Moments:
    """Second, fourth and sixth moments of mu1 [+] mu2 for centred measures.

    Free cumulants add.  For centred laws m2 = k2, m4 = k4 + 2 k2^2 and
    m6 = k6 + 6 k2 k4 + 3 k3^2 + 5 k2^3, with m3 = k3.
    """
    k2 = k3 = k4 = k6 = 0.0
    for mu in (mu1, mu2):
        m2, m4, m6 = moments(mu)
        m3 = float(np.dot(mu.weights, mu.atoms ** 3))
        c4 = m4 - 2.0 * m2 ** 2
        k2 += m2
        k3 += m3
        k4 += c4
        k6 += m6 - 6.0 * m2 * c4 - 3.0 * m3 ** 2 - 5.0 * m2 ** 3
    return Moments(
        k2,
        k4 + 2.0 * k2 ** 2,
        k6 + 6.0 * k2 * k4 + 3.0 * k3 ** 2 + 5.0 * k2 ** 3,
    )


def stieltjes_free(
    mu1: DiscreteMeasure,
    mu2: DiscreteMeasure,
    z: complex,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SubordinationState:
    """Like solve_phi_system, but also accepts point masses: for
    mu1 = delta_a one has omega1 = z - a and omega2 = F_mu2(z - a) + a.
    """
    z = _check_z(z)
    a = _point_mass(mu1)
    if a is not None:
        if mu2.size == 1:
            b = float(mu2.atoms[0])
            F = z - a - b
            return SubordinationState(z, z - a, z - b, -1.0 / F, F, 0.0, 0)
        F, _ = _f_df(mu2.atoms, mu2.weights, z - a)
        return SubordinationState(z, z - a, F + a, -1.0 / F, F, 0.0, 0)
    if _point_mass(mu2) is not None:
        s = stieltjes_free(mu2, mu1, z, tol, max_iter)
        return s._replace(omega1=s.omega2, omega2=s.omega1)
    r = _delta_radius(mu2)
    if r is not None and mu1.is_symmetric():
        return solve_delta_conv(mu1, r, z, tol, max_iter)
    return solve_phi_system(mu1, mu2, z, tol, max_iter)


class SubordinationDerivatives(NamedTuple):
    domega1: complex
    domega2: complex


def subordination_derivatives(
    mu1: DiscreteMeasure, mu2: DiscreteMeasure, state: SubordinationState
) -> SubordinationDerivatives:
    """Derivatives in z of both subordination functions, by implicit
    differentiation of omega2 = z + h2(z + h1(omega2))."""
    _, dF1 = _f_df(mu1.atoms, mu1.weights, state.omega2)
    _, dF2 = _f_df(mu2.atoms, mu2.weights, state.omega1)
    dh1, dh2 = dF1 - 1.0, dF2 - 1.0
    domega2 = (1.0 + dh2) / (1.0 - dh2 * dh1)
    return SubordinationDerivatives(1.0 + dh1 * domega2, domega2)


class BoundaryDensity(NamedTuple):
    value: float
    error: float
    reliable: bool
    samples: List[Tuple[float, float]]


def _neville_at_zero(xs: Sequence[float], ys: Sequence[float]) -> List[float]:
    """Successive polynomial extrapolations to x = 0, using 1, 2, ...
    leading points."""
    p = list(ys)
    n = len(xs)
    diag = [p[0]]
    # p[i] after level k holds the interpolant through points i..i+k
    for k in range(1, n):
        for i in range(n - k):
            p[i] = (xs[i + k] * p[i] - xs[i] * p[i + 1]) / (xs[i + k] - xs[i])
        diag.append(p[0])
    return diag


def boundary_density(
    mu1: DiscreteMeasure,
    mu2: DiscreteMeasure,
    E: float,
    eta_seq: Sequence[float] = DEFAULT_ETA_SEQ,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> BoundaryDensity:
    """Density of mu1 [+] mu2 at E, as the extrapolated limit of
    Im m(E + i eta)/pi for eta -> 0.

    For a symmetric mu1, mu2 = delta_r^sym and E = 0 the value comes from
    the direct eta = 0 solve and the extrapolation serves as cross-check.

    @return: Returns the value, an error estimate, a flag that is cleared
        when successive extrapolation corrections do not shrink, and the
        (eta, Im m/pi) samples.
    """
    log = logging.getLogger('freeconv')
    etas = [float(e) for e in eta_seq]
    if len(etas) < 2 or any(e <= 0 for e in etas) or any(
            b >= a for a, b in zip(etas, etas[1:])):
        raise DomainError('eta_seq must be a decreasing sequence of positive values')
    samples = []
    for eta in etas:
        state = stieltjes_free(mu1, mu2, E + 1j * eta, tol, max_iter)
        samples.append((eta, state.m.imag / math.pi))
    ext = _neville_at_zero(etas, [s[1] for s in samples])
    corrections = [abs(b - a) for a, b in zip(ext, ext[1:])]
    error = corrections[-1]
    reliable = all(b <= a for a, b in zip(corrections, corrections[1:]))
    value = max(ext[-1], 0.0)

    r = _delta_radius(mu2)
    if E == 0 and r is not None and mu1.is_symmetric():
        try:
            direct = solve_delta_conv(mu1, r, 0j, tol, max_iter)
        except DomainError:
            direct = None
        if direct is not None:
            direct_value = direct.m.imag / math.pi
            if abs(direct_value - value) > max(10 * error, 1e-6):
                log.warning(
                    'extrapolated density %.10g disagrees with direct value %.10g',
                    value, direct_value,
                )
            error = max(error, abs(direct_value - value))
            value = direct_value
    if not reliable:
        log.warning('boundary density extrapolation at E=%g is unreliable', E)
    return BoundaryDensity(value, error, reliable, samples)


#
# Certificate
#


class SubordinationBounds(NamedTuple):
    """Empirical constants: |omega_a| <= K, Im omega_a >= k,
    |omega_a'| <= S, |m| <= m_max over a grid."""
    K: float
    k: float
    S: float
    m_max: float


def subordination_bounds(
    mu1: DiscreteMeasure,
    mu2: DiscreteMeasure,
    states: Sequence[SubordinationState],
) -> SubordinationBounds:
    K = k = S = m_max = None  # type: Optional[float]
    for state in states:
        der = subordination_derivatives(mu1, mu2, state)
        big = max(abs(state.omega1), abs(state.omega2))
        small = min(state.omega1.imag, state.omega2.imag)
        slope = max(abs(der.domega1), abs(der.domega2))
        K = big if K is None else max(K, big)
        k = small if k is None else min(k, small)
        S = slope if S is None else max(S, slope)
        m_max = abs(state.m) if m_max is None else max(m_max, abs(state.m))
    if K is None:
        raise DomainError('subordination bounds need at least one state')
    return SubordinationBounds(K, k, S, m_max)


class CertificateReport(NamedTuple):
    r: float
    r_minus: float
    r_plus: float
    s_plus: float
    sigma_minus: float
    sigma_plus: float
    s_minus: float
    t_minus: float
    a_minus: float
    b_minus: float
    omega_hat_abs: float
    im_omega2_zero: float
    zero_ok: bool
    eta_grid: List[float]
    deviations: List[float]
    lower_margins: List[float]
    upper_margins: List[float]
    trivial_ok: bool
    lower_constant: float
    upper_constant: float
    lower_ok: bool
    upper_ok: bool
    best_constant: float
    bounds: SubordinationBounds

    def to_dict(self) -> Dict[str, Any]:
        data = self._asdict()
        data['bounds'] = self.bounds._asdict()
        data['per_eta'] = [
            {'eta': eta, 'deviation': dev, 'lower_margin': lo, 'upper_margin': hi}
            for eta, dev, lo, hi in zip(
                self.eta_grid, self.deviations, self.lower_margins, self.upper_margins
            )
        ]
        for key in ('eta_grid', 'deviations', 'lower_margins', 'upper_margins'):
            del data[key]
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _s_minus(mu_tilde: AtomicMeasure, threshold: float) -> float:
    """sup{x > 0 : mu_tilde([0, x)) <= threshold}: the first positive atom
    whose cumulative mass exceeds the threshold."""
    pos = mu_tilde.atoms > 0
    atoms, weights = mu_tilde.atoms[pos], mu_tilde.weights[pos]
    cum = np.cumsum(weights)
    idx = int(np.searchsorted(cum, threshold, side='right'))
    return float(atoms[min(idx, atoms.size - 1)])


def bulk_bound_certificate(
    mu1_sym: DiscreteMeasure,
    r: float,
    eta_max: float = 10.0,
    grid: int = 40,
    c_cap: float = DEFAULT_C_CAP,
    tol: float = DEFAULT_TOL,
    map_fn: Callable = map,
) -> CertificateReport:
    """Bounds on omega2(i eta) for mu1_sym [+] delta_r^sym.

    Computes the certificate scalars from the Nevanlinna representation of
    mu1_sym, solves omega2 at eta = 0 and on the dyadic grid
    eta_max 2^-k, k < grid, and reports the best empirical constants of

        C^-1 sigma_- s_- b_- min(1, sigma_- s_-/eta) <= |omega2 - i eta|
                                        <= C min(sigma_+ s_+, r^2/eta).

    @param map_fn: map-like callable used for the eta sweep.
    @raises DomainError: If r is not inside (r_minus, r_plus).
    @raises MeasureError: If mu1_sym has fewer than three atoms.
    """
    _check_sym(mu1_sym)
    if mu1_sym.size < 3:
        raise MeasureError('certificate needs a symmetric measure with at least three atoms')
    _, mu_tilde, r_minus_sq = nevanlinna_rep(mu1_sym)
    r_plus_sq = moments(mu1_sym).m2
    r_minus, r_plus = math.sqrt(r_minus_sq), math.sqrt(r_plus_sq)
    r2 = r * r
    if not r_minus < r < r_plus:
        raise DomainError(
            'bounds on omega2 require r in (r_minus, r_plus) = (%.6g, %.6g), got %.6g'
            % (r_minus, r_plus, r)
        )
    s_plus, _ = support_stats(mu1_sym)
    sigma_minus = math.sqrt((r2 - r_minus_sq) / (r_plus_sq - r_minus_sq))
    sigma_plus = math.sqrt(r_plus_sq / (r_plus_sq - r2))
    s_minus = _s_minus(mu_tilde, (r2 - r_minus_sq) / 8.0)
    outer = np.abs(mu_tilde.atoms) >= s_minus
    a_minus = float(np.sum(mu_tilde.weights[outer] / mu_tilde.atoms[outer] ** 2))
    t_minus = sigma_minus * s_minus
    b_minus = min(1.0, a_minus, a_minus * t_minus ** 2 / r2)
    omega_hat_abs = math.sqrt((r2 - r_minus_sq) / a_minus)

    log = logging.getLogger('certificate')
    lo_a = 0.75 * (r2 - r_minus_sq) / s_plus ** 2
    hi_a = (r_plus_sq - r_minus_sq) / s_minus ** 2
    if not lo_a * (1 - 1e-12) <= a_minus <= hi_a * (1 + 1e-12):
        log.warning('a_minus %.6g outside [%.6g, %.6g]', a_minus, lo_a, hi_a)

    zero = solve_delta_conv(mu1_sym, r, 0j, tol)
    im_zero = zero.omega2.imag
    zero_ok = im_zero > math.sqrt(3.0) / 2.0 * t_minus

    etas = [eta_max * 2.0 ** -k for k in range(grid)]
    states = list(map_fn(_CertificatePoint(mu1_sym, r, tol), etas))

    grid_etas = [0.0] + etas
    devs = [abs(zero.omega2)] + [abs(s.omega2 - 1j * eta) for s, eta in zip(states, etas)]
    lower_consts, upper_consts, lower_margins, upper_margins = [], [], [], []
    trivial_ok = True
    for eta, dev in zip(grid_etas, devs):
        lower = t_minus * b_minus * (1.0 if eta == 0 else min(1.0, t_minus / eta))
        upper = sigma_plus * s_plus if eta == 0 else min(sigma_plus * s_plus, r2 / eta)
        lower_consts.append(lower / dev)
        upper_consts.append(dev / upper)
        lower_margins.append(dev - lower)
        upper_margins.append(upper - dev)
        if eta > 0 and dev > r2 / eta * (1 + 1e-10):
            trivial_ok = False
    lower_constant = max(lower_consts)
    upper_constant = max(upper_consts)
    lower_ok = lower_constant <= c_cap
    upper_ok = trivial_ok and upper_constant <= c_cap
    log.info(
        'certificate r=%g: C_lower=%.4g C_upper=%.4g Im omega2(0)=%.10g',
        r, lower_constant, upper_constant, im_zero,
    )
    bounds = subordination_bounds(mu1_sym, delta_sym(r), states)
    return CertificateReport(
        r=r, r_minus=r_minus, r_plus=r_plus, s_plus=s_plus,
        sigma_minus=sigma_minus, sigma_plus=sigma_plus,
        s_minus=s_minus, t_minus=t_minus, a_minus=a_minus, b_minus=b_minus,
        omega_hat_abs=omega_hat_abs, im_omega2_zero=im_zero, zero_ok=zero_ok,
        eta_grid=grid_etas, deviations=devs,
        lower_margins=lower_margins, upper_margins=upper_margins,
        trivial_ok=trivial_ok, lower_constant=lower_constant,
        upper_constant=upper_constant, lower_ok=lower_ok, upper_ok=upper_ok,
        best_constant=max(lower_constant, upper_constant), bounds=bounds,
    )


class _CertificatePoint:
    """Picklable task for one eta of the certificate sweep."""

    def __init__(self, mu1_sym: DiscreteMeasure, r: float, tol: float) -> None:
        self.mu1_sym = mu1_sym
        self.r = r
        self.tol = tol

    def __call__(self, eta: float) -> SubordinationState:
        return solve_delta_conv(self.mu1_sym, self.r, 1j * eta, self.tol)
