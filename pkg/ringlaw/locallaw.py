# vim:set fileencoding=utf-8 ft=python ts=8 sw=4 sts=4 et cindent:

# locallaw.py -- Monte Carlo engine for local laws, the optimal scale
#         linear statistic, smallest singular values and the block model.
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

"""Monte Carlo experiments.

Every experiment is a list of independent tasks, one per (N, trial).  A
task draws its randomness from child_rng(seed, task_index) only, so the
records do not depend on how tasks are scheduled.  Failing tasks are kept
as records with ok=False and a reason; they are never retried.
"""

import logging
import math
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, NumericalError, RinglawError
from .freeconv import boundary_density, solve_delta_conv, stieltjes_free
from .linalg import ShiftedLogDet, child_rng, hermitian_eigensystem
from .measure import DiscreteMeasure, RingGeometry, levy_distance, symmetrize
from .models import (
    BlockAdditiveEnsemble,
    SingleRingEnsemble,
    block_H,
    hermitization,
    im_m_w_integral,
    m_w,
    mu_A,
    mu_B,
    resolvent_observables,
    sample_X,
    smallest_sv,
)
from .ring import RadialPotentialProfile, potential_profile

DEFAULT_EPS_PASS = 0.2
PROFILE_NODES = 33


def dyadic_etas(eta_min: float, eta_max: float) -> List[float]:
    """eta_max 2^-k for k = 0, 1, ... as long as the value exceeds eta_min."""
    if not 0 < eta_min < eta_max:
        raise DomainError('need 0 < eta_min < eta_max, got %g, %g' % (eta_min, eta_max))
    etas = []
    eta = eta_max
    while eta > eta_min:
        etas.append(eta)
        eta *= 0.5
    return etas


class ScanGrid:
    """Grid of an experiment: matrix sizes, trials, annulus points w or
    energies E, and per-N dyadic eta values in (N^eta_min_exponent, eta_max].
    """

    def __init__(self, N_values: Sequence[int], trials: int,
                 w_values: Sequence[complex] = (), energies: Sequence[float] = (),
                 eta_max: float = 1.0, eta_min_exponent: float = -0.9,
                 geometry: Optional[RingGeometry] = None) -> None:
        if not N_values or any(int(n) < 1 for n in N_values):
            raise DomainError('N_values must be a non-empty list of positive sizes')
        if trials < 1:
            raise DomainError('trials must be positive, got %d' % trials)
        if not eta_max > 0:
            raise DomainError('eta_max must be positive, got %g' % eta_max)
        if not eta_min_exponent < 0:
            raise DomainError('eta_min_exponent must be negative, got %g' % eta_min_exponent)
        self.N_values = [int(n) for n in N_values]
        self.trials = int(trials)
        self.w_values = [complex(w) for w in w_values]
        self.energies = [float(e) for e in energies]
        self.eta_max = float(eta_max)
        self.eta_min_exponent = float(eta_min_exponent)
        if geometry is not None:
            if geometry.is_empty:
                raise DomainError('annulus %r is empty' % geometry)
            for w in self.w_values:
                geometry.check(w)
        self.geometry = geometry

    def eta_min(self, N: int) -> float:
        return float(N) ** self.eta_min_exponent

    def eta_values(self, N: int) -> List[float]:
        return dyadic_etas(self.eta_min(N), self.eta_max)


#
# Domination reports
#


class DeviationRecord(NamedTuple):
    N: int
    trial: int
    task: int
    point: complex
    eta: float
    dev: float
    ok: bool
    reason: str


class NSummary(NamedTuple):
    N: int
    count: int
    failures: int
    max: float
    q95: float


class DominationFit(NamedTuple):
    slope: float
    intercept: float
    passed: bool


class DominationReport:
    """Deviation records of a scan with per-N max and 0.95-quantile and,
    for three or more sizes, the log-log slope of the quantile against N.
    """

    def __init__(self, records: Sequence[DeviationRecord],
                 eps_pass: float = DEFAULT_EPS_PASS, dev_cap: Optional[float] = None) -> None:
        self.records = list(records)
        self.eps_pass = eps_pass
        self.dev_cap = dev_cap
        self.per_N = self._summarize()
        self.fit = None  # type: Optional[DominationFit]
        if len(self.per_N) >= 3:
            self.fit = fit_domination(self, eps_pass)

    def _summarize(self) -> Dict[int, NSummary]:
        per_N = {}
        for N in sorted({r.N for r in self.records}):
            recs = [r for r in self.records if r.N == N]
            devs = np.array([r.dev for r in recs if r.ok], dtype=float)
            failures = sum(1 for r in recs if not r.ok)
            if devs.size:
                summary = NSummary(N, len(recs), failures, float(np.max(devs)),
                                   float(np.quantile(devs, 0.95)))
            else:
                summary = NSummary(N, len(recs), failures, math.nan, math.nan)
            per_N[N] = summary
        return per_N

    @property
    def failures(self) -> int:
        return sum(s.failures for s in self.per_N.values())

    @property
    def passed(self) -> bool:
        """Slope test (if available), per-N max below dev_cap (if given),
        and no failed tasks."""
        if self.failures or not self.per_N:
            return False
        if self.fit is not None and not self.fit.passed:
            return False
        if self.dev_cap is not None:
            return all(s.max <= self.dev_cap for s in self.per_N.values())
        return True


def fit_domination(report, eps_pass: float = DEFAULT_EPS_PASS) -> DominationFit:
    """Least squares fit of log(0.95-quantile) against log N.

    @param report: A DominationReport or a mapping N -> 0.95-quantile.
    @raises DomainError: For fewer than three sizes or non-positive quantiles.
    """
    if isinstance(report, DominationReport):
        points = {N: s.q95 for N, s in report.per_N.items()}
    else:
        points = dict(report)
    if len(points) < 3:
        raise DomainError('slope fit needs at least three N values, got %d' % len(points))
    Ns = np.array(sorted(points), dtype=float)
    qs = np.array([points[int(N)] for N in Ns], dtype=float)
    if not np.all(np.isfinite(qs)) or np.any(qs <= 0):
        raise DomainError('slope fit needs positive finite quantiles')
    slope, intercept = np.polyfit(np.log(Ns), np.log(qs), 1)
    return DominationFit(float(slope), float(intercept), bool(slope <= eps_pass))


#
# Local law for H^w
#


def _limit_values(mu_sigma: DiscreteMeasure, w_values: Sequence[complex],
                  etas: Sequence[float]) -> Dict[Tuple[int, int], object]:
    """m_{Sigma,|w|}(i eta) per (w index, eta index), or the exception."""
    mu_sym = symmetrize(mu_sigma)
    out = {}
    for i, w in enumerate(w_values):
        for j, eta in enumerate(etas):
            try:
                out[i, j] = solve_delta_conv(mu_sym, abs(w), 1j * eta).m
            except RinglawError as exc:
                out[i, j] = exc
    return out


class _LocalLawTask:

    def __init__(self, seed: int, w_values, etas, limits) -> None:
        self.seed = seed
        self.w_values = w_values
        self.etas = etas
        self.limits = limits

    def __call__(self, job) -> List[DeviationRecord]:
        task, trial, ens = job
        log = logging.getLogger('locallaw')
        N = ens.N
        recs = []
        X = sample_X(ens, child_rng(self.seed, task))
        for i, w in enumerate(self.w_values):
            try:
                spec = hermitization_spectrum(X, w)
            except NumericalError as exc:
                log.warning('task %d: eigensolver failed at w=%s: %s', task, w, exc)
                recs.extend(DeviationRecord(N, trial, task, w, eta, math.nan, False, str(exc))
                            for eta in self.etas)
                continue
            for j, eta in enumerate(self.etas):
                lim = self.limits[i, j]
                if isinstance(lim, Exception):
                    recs.append(DeviationRecord(N, trial, task, w, eta, math.nan, False,
                                                str(lim)))
                    continue
                dev = N * eta * abs(m_w(spec, eta) - lim)
                recs.append(DeviationRecord(N, trial, task, w, eta, dev, True, ''))
        log.debug('task %d (N=%d, trial %d) done', task, N, trial)
        return recs


def hermitization_spectrum(X: np.ndarray, w: complex):
    return hermitian_eigensystem(hermitization(X, w))


def _sizes(e, N_values):
    for N in N_values:
        yield N, (e if N == e.N else e.resized(N))


def local_law_scan(
    e: SingleRingEnsemble,
    grid: ScanGrid,
    seed: int,
    map_fn: Callable = map,
    eps_pass: float = DEFAULT_EPS_PASS,
    dev_cap: Optional[float] = None,
) -> DominationReport:
    """Deviations N eta |m^w(i eta) - m_{Sigma,|w|}(i eta)| for every
    (N, trial, w, eta).  The limit is computed from the N-point profile
    mu_Sigma of each size.

    @raises DomainError: If a w lies outside the bulk annulus.
    """
    log = logging.getLogger('locallaw')
    profile = e.profile if e.profile is not None else e.mu_sigma
    geometry = grid.geometry or RingGeometry.from_measure(profile)
    for w in grid.w_values:
        geometry.check(w)
    jobs, tasks = [], {}
    task = 0
    for N, ens in _sizes(e, grid.N_values):
        etas = grid.eta_values(N)
        limits = _limit_values(ens.mu_sigma, grid.w_values, etas)
        tasks[N] = _LocalLawTask(seed, grid.w_values, etas, limits)
        for trial in range(grid.trials):
            jobs.append((N, (task, trial, ens)))
            task += 1
    log.info('local law scan: %d tasks', len(jobs))
    records = []
    for N in grid.N_values:
        these = [job for n, job in jobs if n == N]
        for recs in map_fn(tasks[N], these):
            records.extend(recs)
    return DominationReport(records, eps_pass, dev_cap)


#
# Linear statistics at the optimal scale
#


class Bump:
    """f(zeta) = (1 - |zeta|^2/R^2)^3 on |zeta| <= R, zero outside."""

    def __init__(self, radius: float = 1.0) -> None:
        if not radius > 0:
            raise DomainError('bump radius must be positive, got %r' % radius)
        self.radius = float(radius)

    def __call__(self, zeta) -> np.ndarray:
        s2 = np.abs(zeta) ** 2 / self.radius ** 2
        return np.where(s2 <= 1.0, (1.0 - np.minimum(s2, 1.0)) ** 3, 0.0)

    def laplacian(self, zeta) -> np.ndarray:
        s2 = np.minimum(np.abs(zeta) ** 2 / self.radius ** 2, 1.0)
        lap = (-12.0 * (1.0 - s2) ** 2 + 24.0 * s2 * (1.0 - s2)) / self.radius ** 2
        return np.where(np.abs(zeta) <= self.radius, lap, 0.0)

    @property
    def integral(self) -> float:
        return math.pi * self.radius ** 2 / 4.0

    @property
    def laplacian_l1(self) -> float:
        """|Delta f|_L1, the same for every radius."""
        return _BUMP_LAPLACIAN_L1


def _bump_laplacian_l1() -> float:
    def lap(s):
        return abs(-12.0 * (1 - s * s) ** 2 + 24.0 * s * s * (1 - s * s)) * 2 * math.pi * s
    # sign change at s^2 = 1/3
    cut = math.sqrt(1.0 / 3.0)
    return quad(lap, 0.0, cut)[0] + quad(lap, cut, 1.0)[0]


_BUMP_LAPLACIAN_L1 = _bump_laplacian_l1()


class QuadGrid:
    """Midpoint rule on an n x n square grid covering the bump support."""

    def __init__(self, n: int = 64) -> None:
        if n < 2:
            raise DomainError('quadrature grid needs n >= 2, got %d' % n)
        self.n = int(n)

    def nodes(self, radius: float) -> Tuple[np.ndarray, float]:
        """@return: Returns the nodes inside the closed disk of the given
            radius and the cell area."""
        h = 2.0 * radius / self.n
        c = -radius + h * (np.arange(self.n) + 0.5)
        zeta = (c[None, :] + 1j * c[:, None]).reshape(-1)
        return zeta[np.abs(zeta) <= radius], h * h

    def cell(self, radius: float) -> float:
        return 2.0 * radius / self.n


class LinearStatistic(NamedTuple):
    value: float
    jittered: int


def _scale(N: int, alpha: float) -> float:
    if not 0 <= alpha < 0.5:
        raise DomainError('alpha must lie in [0, 1/2), got %r' % alpha)
    return float(N) ** alpha


def linear_statistic_lhs(
    X: np.ndarray,
    w0: complex,
    alpha: float,
    bump: Bump,
    quad_grid: QuadGrid,
    logdet: Optional[ShiftedLogDet] = None,
) -> LinearStatistic:
    """(1/N) sum_i f_w0(lambda_i(X)) for f_w0(w) = N^2a f(N^a (w - w0)),
    through Green's theorem:

        (1/2 pi) N^2a sum Delta f(zeta) (1/N) log|det(X - w0 - N^-a zeta)| dA.

    Nodes where X - w is exactly singular are moved by half a cell and
    counted in the result.
    """
    N = X.shape[0]
    scale = _scale(N, alpha)
    if logdet is None:
        logdet = ShiftedLogDet(X)
    zeta, area = quad_grid.nodes(bump.radius)
    values = logdet(w0 + zeta / scale)
    bad = np.isneginf(values)
    jittered = int(np.count_nonzero(bad))
    if jittered:
        half = 0.5 * quad_grid.cell(bump.radius) * (1 + 1j)
        values[bad] = logdet(w0 + (zeta[bad] + half) / scale)
        logging.getLogger('linearstatistic').warning(
            '%d quadrature nodes hit a singular X - w and were re-jittered', jittered
        )
    total = np.sum(bump.laplacian(zeta) * values / N) * area
    return LinearStatistic(float(scale ** 2 * total / (2 * math.pi)), jittered)


def _profile_radii(w0: complex, reach: float, geometry: Optional[RingGeometry]) -> np.ndarray:
    lo, hi = abs(w0) - reach, abs(w0) + reach
    if not lo > 0:
        raise DomainError(
            'test function support around |w0| = %g reaches the origin' % abs(w0)
        )
    if geometry is not None and (lo < geometry.r_minus or hi > geometry.r_plus):
        logging.getLogger('linearstatistic').warning(
            'test function support [%g, %g] crosses the ring [%g, %g]',
            lo, hi, geometry.r_minus, geometry.r_plus,
        )
    return np.linspace(lo, hi, PROFILE_NODES)


def rhs_profile(
    mu_sigma: DiscreteMeasure,
    N: int,
    w0: complex,
    alpha: float,
    bump: Bump,
    map_fn: Callable = map,
    quad_tol: float = 1e-9,
) -> RadialPotentialProfile:
    """Log-potential profile covering the radii met by the rescaled bump."""
    reach = bump.radius / _scale(N, alpha)
    geometry = RingGeometry.from_measure(mu_sigma, tau=0.0)
    radii = _profile_radii(w0, reach, geometry)
    return potential_profile(mu_sigma, radii, quad_tol=quad_tol, map_fn=map_fn)


def linear_statistic_rhs(
    profile,
    N: int,
    w0: complex,
    alpha: float,
    bump: Bump,
    quad_grid: QuadGrid,
) -> float:
    """int f_w0 d rho_Sigma through the same pairing as the left side,

        (1/2 pi) N^2a sum Delta f(zeta) L(|w0 + N^-a zeta|) dA.

    @param profile: A RadialPotentialProfile or the measure mu_Sigma, from
        which a profile is built.
    """
    if isinstance(profile, DiscreteMeasure):
        profile = rhs_profile(profile, N, w0, alpha, bump)
    scale = _scale(N, alpha)
    zeta, area = quad_grid.nodes(bump.radius)
    L = profile(np.abs(w0 + zeta / scale))
    total = np.sum(bump.laplacian(zeta) * L) * area
    return float(scale ** 2 * total / (2 * math.pi))


def refine_quad_grid(
    profile: RadialPotentialProfile,
    N: int,
    w0: complex,
    alpha: float,
    bump: Bump,
    start: int = 64,
    rtol: float = 1e-3,
    max_n: int = 1024,
) -> QuadGrid:
    """Double the grid resolution until the right-hand side changes by
    less than rtol relative (absolute for values below one)."""
    grid = QuadGrid(start)
    value = linear_statistic_rhs(profile, N, w0, alpha, bump, grid)
    while grid.n < max_n:
        finer = QuadGrid(2 * grid.n)
        new = linear_statistic_rhs(profile, N, w0, alpha, bump, finer)
        done = abs(new - value) <= rtol * max(1.0, abs(new))
        grid, value = finer, new
        if done:
            return grid
    logging.getLogger('linearstatistic').warning(
        'quadrature grid not converged at n=%d', grid.n
    )
    return grid


class GapRecord(NamedTuple):
    N: int
    trial: int
    task: int
    alpha: float
    w0: complex
    lhs: float
    rhs: float
    gap_norm: float
    jittered: int
    macro_ref: float
    ok: bool
    reason: str


class _GapTask:

    def __init__(self, seed, alpha, w0, bump, quad_grid, rhs, macro_ref) -> None:
        self.seed = seed
        self.alpha = alpha
        self.w0 = w0
        self.bump = bump
        self.quad_grid = quad_grid
        self.rhs = rhs
        self.macro_ref = macro_ref

    def __call__(self, job) -> GapRecord:
        task, trial, ens = job
        N = ens.N
        try:
            X = sample_X(ens, child_rng(self.seed, task))
            lhs = linear_statistic_lhs(X, self.w0, self.alpha, self.bump, self.quad_grid)
        except NumericalError as exc:
            logging.getLogger('locallaw').warning('gap task %d failed: %s', task, exc)
            return GapRecord(N, trial, task, self.alpha, self.w0, math.nan, self.rhs,
                             math.nan, 0, self.macro_ref, False, str(exc))
        gap = abs(lhs.value - self.rhs)
        gap_norm = gap * N ** (1 - 2 * self.alpha) / self.bump.laplacian_l1
        return GapRecord(N, trial, task, self.alpha, self.w0, lhs.value, self.rhs,
                         gap_norm, lhs.jittered, self.macro_ref, True, '')


def main_theorem_gap(
    e: SingleRingEnsemble,
    w0: complex,
    alpha: float,
    trials: int,
    seed: int,
    bump: Optional[Bump] = None,
    quad_grid: Optional[QuadGrid] = None,
    map_fn: Callable = map,
    task_offset: int = 0,
    tau: Optional[float] = None,
) -> List[GapRecord]:
    """Per trial the gap |lhs - rhs| N^(1 - 2 alpha) / |Delta f|_L1 for the
    bump rescaled around w0.  macro_ref is 1/N + d_L(mu_Sigma, profile),
    the macroscopic reference rate (nan without a profile).

    @param quad_grid: Defaults to the grid picked by refine_quad_grid.
    @param task_offset: First task index, so that runs for several alphas
        draw disjoint streams.
    @raises DomainError: If w0 is outside the bulk annulus or the rescaled
        bump reaches across it.
    """
    bump = bump or Bump()
    mu_sigma = e.mu_sigma
    geometry = RingGeometry.from_measure(mu_sigma, tau)
    geometry.check(w0)
    reach = bump.radius / _scale(e.N, alpha)
    if abs(w0) - reach < geometry.inner or abs(w0) + reach > geometry.outer:
        raise DomainError(
            'test function support [%g, %g] around |w0| leaves the annulus [%g, %g]'
            % (abs(w0) - reach, abs(w0) + reach, geometry.inner, geometry.outer)
        )
    profile = rhs_profile(mu_sigma, e.N, w0, alpha, bump, map_fn)
    if quad_grid is None:
        quad_grid = refine_quad_grid(profile, e.N, w0, alpha, bump)
    rhs = linear_statistic_rhs(profile, e.N, w0, alpha, bump, quad_grid)
    macro_ref = math.nan
    if e.profile is not None:
        macro_ref = 1.0 / e.N + levy_distance(mu_sigma, e.profile)
    jobs = [(task_offset + trial, trial, e) for trial in range(trials)]
    records = list(map_fn(_GapTask(seed, alpha, w0, bump, quad_grid, rhs, macro_ref), jobs))
    logging.getLogger('locallaw').info(
        'main gap N=%d alpha=%g: rhs=%.10g, median normalized gap %.4g',
        e.N, alpha, rhs, float(np.nanmedian([r.gap_norm for r in records])),
    )
    return records


#
# Smallest singular value
#


class SsvRecord(NamedTuple):
    N: int
    trial: int
    task: int
    w_abs: float
    t: float
    lambda1: float


class SsvTail(NamedTuple):
    records: List[SsvRecord]
    t_grid: List[float]
    probabilities: List[float]
    slope: float
    ci_low: float
    ci_high: float


class _SsvTask:

    def __init__(self, seed: int, w: complex) -> None:
        self.seed = seed
        self.w = w

    def __call__(self, job) -> SsvRecord:
        task, trial, ens = job
        X = sample_X(ens, child_rng(self.seed, task))
        lam1 = smallest_sv(hermitization_spectrum(X, self.w))
        return SsvRecord(ens.N, trial, task, abs(self.w), abs(self.w) * lam1, lam1)


def _tail_slope(ts: np.ndarray, t_grid: np.ndarray) -> Tuple[np.ndarray, float]:
    probs = np.mean(ts[None, :] <= t_grid[:, None], axis=1)
    use = (probs > 0) & (probs < 1)
    if np.count_nonzero(use) < 2:
        return probs, math.nan
    slope, _ = np.polyfit(np.log(t_grid[use]), np.log(probs[use]), 1)
    return probs, float(slope)


def smallest_sv_tail(
    e: SingleRingEnsemble,
    w: complex,
    t_grid: Sequence[float],
    trials: int,
    seed: int,
    map_fn: Callable = map,
    n_boot: int = 1000,
) -> SsvTail:
    """Empirical P(lambda_1^w <= t/|w|) over trials, its log-log slope in t
    and a 95% bootstrap interval of the slope (resampling trials).

    @raises DomainError: For the orthogonal class with Sigma (nearly) the
        identity profile, or w = 0.
    """
    if w == 0:
        raise DomainError('smallest singular value tail needs w != 0')
    if e.symmetry == 'orthogonal' and levy_distance(e.mu_sigma, DiscreteMeasure([1.0], [1.0])) < 1e-6:
        raise DomainError('orthogonal ensembles need Sigma away from the identity')
    t_arr = np.asarray(sorted(float(t) for t in t_grid))
    if t_arr.size == 0 or np.any(t_arr <= 0):
        raise DomainError('t_grid must hold positive values')
    jobs = [(trial, trial, e) for trial in range(trials)]
    records = list(map_fn(_SsvTask(seed, w), jobs))
    ts = np.array([r.t for r in records])
    probs, slope = _tail_slope(ts, t_arr)
    boot_rng = child_rng(seed, trials)
    boots = []
    for _ in range(n_boot if not math.isnan(slope) else 0):
        sample = ts[boot_rng.integers(0, ts.size, ts.size)]
        _, b = _tail_slope(sample, t_arr)
        if not math.isnan(b):
            boots.append(b)
    if boots:
        ci_low, ci_high = (float(q) for q in np.quantile(boots, [0.025, 0.975]))
    else:
        ci_low = ci_high = math.nan
    logging.getLogger('locallaw').info(
        'ssv tail N=%d |w|=%g: slope %.4g [%.4g, %.4g]', e.N, abs(w), slope, ci_low, ci_high
    )
    return SsvTail(records, t_arr.tolist(), probs.tolist(), slope, ci_low, ci_high)


#
# Block additive model
#


def _block_target(e: BlockAdditiveEnsemble, z: complex):
    return stieltjes_free(mu_A(e), mu_B(e), z)


def check_bulk(e: BlockAdditiveEnsemble, interval: Tuple[float, float],
               energies: Sequence[float], threshold: float = 1e-3) -> None:
    """@raises DomainError: If the density of mu_A [+] mu_B drops to the
        threshold at an energy or an interval end."""
    lo, hi = interval
    if not lo <= hi:
        raise DomainError('interval [%g, %g] is empty' % (lo, hi))
    for E in list(energies) + [lo, hi]:
        if not lo <= E <= hi:
            raise DomainError('energy %g outside the interval [%g, %g]' % (E, lo, hi))
        try:
            rho = boundary_density(mu_A(e), mu_B(e), E).value
        except RinglawError as exc:
            raise DomainError('interval [%g, %g] bulk check failed at E=%g: %s'
                              % (lo, hi, E, exc)) from exc
        if not rho > threshold:
            raise DomainError(
                'interval [%g, %g] is not in the bulk: density %.3g at E=%g'
                % (lo, hi, rho, E)
            )


class _BlockTask:

    def __init__(self, seed: int, points: Sequence[complex], targets) -> None:
        self.seed = seed
        self.points = points
        self.targets = targets

    def __call__(self, job) -> List[DeviationRecord]:
        task, trial, ens = job
        N = ens.N
        H, _ = block_H(ens, child_rng(self.seed, task))
        lam = hermitian_eigensystem(H).eigenvalues
        recs = []
        for z, target in zip(self.points, self.targets):
            if isinstance(target, Exception):
                recs.append(DeviationRecord(N, trial, task, z.real, z.imag, math.nan, False,
                                            str(target)))
                continue
            m_H = complex(np.mean(1.0 / (lam - z)))
            dev = N * z.imag * (1 + z.imag) * abs(m_H - target)
            recs.append(DeviationRecord(N, trial, task, z.real, z.imag, dev, True, ''))
        return recs


def block_local_law_scan(
    e: BlockAdditiveEnsemble,
    interval: Tuple[float, float],
    grid: ScanGrid,
    seed: int,
    map_fn: Callable = map,
    eps_pass: float = DEFAULT_EPS_PASS,
    dev_cap: Optional[float] = None,
    density_threshold: float = 1e-3,
) -> DominationReport:
    """Deviations N eta (1 + eta) |m_H(E + i eta) - m_{mu_A [+] mu_B}(E + i eta)|.

    Records carry E in `point` and eta in `eta`.
    @raises DomainError: If the interval is not in the bulk.
    """
    energies = grid.energies or [0.5 * (interval[0] + interval[1])]
    check_bulk(e, interval, energies, density_threshold)
    tasks, jobs = {}, []
    task = 0
    for N, ens in _sizes(e, grid.N_values):
        points = [E + 1j * eta for E in energies for eta in grid.eta_values(N)]
        targets = []
        for z in points:
            try:
                targets.append(_block_target(ens, z).m)
            except RinglawError as exc:
                targets.append(exc)
        tasks[N] = _BlockTask(seed, points, targets)
        for trial in range(grid.trials):
            jobs.append((N, (task, trial, ens)))
            task += 1
    records = []
    for N in grid.N_values:
        for recs in map_fn(tasks[N], [job for n, job in jobs if n == N]):
            records.extend(recs)
    return DominationReport(records, eps_pass, dev_cap)


class SubordinationRecord(NamedTuple):
    N: int
    trial: int
    task: int
    z: complex
    lambda_d_scaled: float
    omegaB_gap: float
    omegaA_gap: float
    eigvec_sup: float
    identity_residual: float
    ok: bool
    reason: str


class _SubordinationTask:

    def __init__(self, seed: int, z_grid, states, bulk_window) -> None:
        self.seed = seed
        self.z_grid = z_grid
        self.states = states
        self.bulk_window = bulk_window

    def __call__(self, job) -> List[SubordinationRecord]:
        task, trial, ens = job
        N = ens.N
        H, _ = block_H(ens, child_rng(self.seed, task))
        spec = hermitian_eigensystem(H, want_vectors=True)
        recs = []
        for z, state in zip(self.z_grid, self.states):
            if isinstance(state, Exception):
                recs.append(SubordinationRecord(N, trial, task, z, math.nan, math.nan,
                                                math.nan, math.nan, math.nan, False,
                                                str(state)))
                continue
            obs = resolvent_observables(H, z, ens.xi_diag, state.omega2,
                                        self.bulk_window, spec)
            eta = z.imag
            recs.append(SubordinationRecord(
                N, trial, task, z,
                math.sqrt(N * eta) * obs.lambda_d,
                N * eta * abs(obs.omega_B_c - state.omega2),
                N * eta * abs(obs.omega_A_c - state.omega1),
                obs.eigvec_sup,
                abs(obs.omega_A_c + obs.omega_B_c - z + 1.0 / obs.m_H),
                True, '',
            ))
        return recs


def green_subordination_scan(
    e: BlockAdditiveEnsemble,
    z_grid: Sequence[complex],
    trials: int,
    seed: int,
    map_fn: Callable = map,
    bulk_window: Optional[Tuple[float, float]] = None,
) -> List[SubordinationRecord]:
    """Per (trial, z): sqrt(N eta) Lambda_d, N eta |omega_B^c - omega_B|,
    N eta |omega_A^c - omega_A|, eigvec_sup over the bulk window and the
    residual of omega_A^c + omega_B^c - z = -1/m_H.  omega_A, omega_B are
    the subordination functions of mu_A [+] mu_B.
    """
    z_grid = [complex(z) for z in z_grid]
    for z in z_grid:
        if not z.imag > 0:
            raise DomainError('z = %r is not in the upper half-plane' % z)
    states = []
    for z in z_grid:
        try:
            states.append(_block_target(e, z))
        except RinglawError as exc:
            states.append(exc)
    jobs = [(trial, trial, e) for trial in range(trials)]
    records = []
    for recs in map_fn(_SubordinationTask(seed, z_grid, states, bulk_window), jobs):
        records.extend(recs)
    return records


#
# eta-integral split
#


class EtaSplit(NamedTuple):
    small: float
    large: float
    total: float
    lambda1: float
    small_bound: float


def eta_integral_split(spec, eta_star: float, K: float) -> EtaSplit:
    """int_0^K Im m^w(i eta) d eta split at eta_star.  The small-eta part is
    bounded through lambda_1 by (1/2) log(1 + (eta_star/lambda_1)^2)."""
    if not 0 < eta_star < K:
        raise DomainError('need 0 < eta_star < K, got %g, %g' % (eta_star, K))
    lam1 = smallest_sv(spec)
    small = im_m_w_integral(spec, 0.0, eta_star)
    large = im_m_w_integral(spec, eta_star, K)
    bound = math.inf if lam1 == 0 else 0.5 * math.log1p((eta_star / lam1) ** 2)
    return EtaSplit(small, large, small + large, lam1, bound)
