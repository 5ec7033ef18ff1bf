#!/usr/bin/env python3

# ringlaw -- command line front end for free convolution, single ring and
#         local law runs
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
import math
import os
import sys
from optparse import OptionParser
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from . import VERSION
from .config import (
    check_config,
    complex_list,
    load_config,
    measure_from_config,
    resolve_seed,
    resolve_threads,
    section,
    validate_config,
)
from .errors import ConfigError, DomainError, MeasureError, NumericalError, RinglawError
from .freeconv import DEFAULT_C_CAP, DEFAULT_MAX_ITER, DEFAULT_TOL, boundary_density
from .freeconv import bulk_bound_certificate, stieltjes_free
from .locallaw import (
    DEFAULT_EPS_PASS,
    Bump,
    DeviationRecord,
    DominationReport,
    QuadGrid,
    ScanGrid,
    block_local_law_scan,
    green_subordination_scan,
    local_law_scan,
    main_theorem_gap,
    smallest_sv_tail,
)
from .manifest import ExperimentManifest, RunMetrics, prepare_out_dir, read_csv, write_csv
from .measure import DiscreteMeasure, RingGeometry, delta_sym, radii, symmetrize
from .models import BlockAdditiveEnsemble, SingleRingEnsemble
from .parallel import TaskPool
from .parse import parse_complex
from .ring import DEFAULT_N_RADII, DEFAULT_QUAD_TOL, density_profile, ring_mass
from .table import GnuplotTable

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64

LOCAL_LAW_HEADER = ('N', 'trial', 'w_re', 'w_im', 'eta', 'dev')
BLOCK_HEADER = ('N', 'trial', 'E', 'eta', 'dev')
SCAN_FILES = {'local-law': 'local_law.csv', 'block-law': 'block.csv'}


class RunContext:
    """Everything a command needs: the validated configuration, the seed,
    the output directory and the worker pool."""

    def __init__(self, cfg: Dict[str, Any], seed: int, out_dir: str, pool: TaskPool,
                 metrics: RunMetrics) -> None:
        self.cfg = cfg
        self.seed = seed
        self.out_dir = out_dir
        self.pool = pool
        self.metrics = metrics
        self.outputs = []  # type: List[str]

    def get(self, sect: str, key: str, default: Any = None) -> Any:
        return section(self.cfg, sect).get(key, default)

    def require(self, sect: str, key: str) -> Any:
        val = section(self.cfg, sect).get(key)
        if val is None:
            raise ConfigError('missing field', '%s.%s' % (sect, key))
        return val

    def path(self, name: str) -> str:
        if name not in self.outputs:
            self.outputs.append(name)
        return os.path.join(self.out_dir, name)

    @property
    def measure(self) -> DiscreteMeasure:
        return measure_from_config(self.cfg['measure'])

    @property
    def tol(self) -> float:
        return self.get('solver', 'tol', DEFAULT_TOL)

    @property
    def max_iter(self) -> int:
        return self.get('solver', 'max_iter', DEFAULT_MAX_ITER)

    @property
    def quad_tol(self) -> float:
        return self.get('quadrature', 'tol', DEFAULT_QUAD_TOL)

    @property
    def symmetry(self) -> str:
        return self.get('ensemble', 'symmetry', 'unitary')

    def geometry(self) -> RingGeometry:
        return RingGeometry.from_measure(self.measure, self.get('grid', 'tau'))


def _cplx_cells(z: complex) -> List[float]:
    return [z.real, z.imag]


def cmd_radii(ctx: RunContext) -> None:
    rad = radii(ctx.measure)
    print('%.17g %.17g' % (rad.r_minus, rad.r_plus))
    write_csv(ctx.path('radii.csv'), ('r_minus', 'r_plus', 'degenerate'),
              [(rad.r_minus, rad.r_plus, rad.degenerate)])
    ctx.metrics.tasks(1)


def cmd_freeconv(ctx: RunContext) -> None:
    """Subordination data on a z grid: mu_Sigma^sym [+] delta_r^sym if
    grid.r is set, otherwise mu_A [+] mu_B of the block model."""
    log = logging.getLogger('freeconv')
    mu = ctx.measure
    r = ctx.get('grid', 'r')
    if r is not None:
        mu1, mu2 = symmetrize(mu), delta_sym(r)
    else:
        xi = measure_from_config(ctx.require('ensemble', 'xi'), 'ensemble.xi')
        mu1, mu2 = _sym_abs(xi), _sym_abs(mu)
    rows = []
    for z in complex_list(ctx.get('grid', 'z', [1j])):
        s = stieltjes_free(mu1, mu2, z, ctx.tol, ctx.max_iter)
        rows.append(_cplx_cells(s.z) + _cplx_cells(s.omega1) + _cplx_cells(s.omega2)
                    + _cplx_cells(s.m) + [s.residual, s.iterations])
    write_csv(ctx.path('freeconv.csv'),
              ('z_re', 'z_im', 'omega1_re', 'omega1_im', 'omega2_re', 'omega2_im',
               'm_re', 'm_im', 'residual', 'iterations'), rows)
    ctx.metrics.tasks(len(rows))
    energies = ctx.get('grid', 'energies')
    if energies:
        dens = []
        for E in energies:
            bd = boundary_density(mu1, mu2, E, tol=ctx.tol, max_iter=ctx.max_iter)
            if not bd.reliable:
                log.warning('density at E=%g: extrapolation unreliable', E)
            dens.append((float(E), bd.value, bd.error, bd.reliable))
        write_csv(ctx.path('density.csv'), ('E', 'rho', 'error', 'reliable'), dens)
        ctx.metrics.tasks(len(dens))


def _sym_abs(mu: DiscreteMeasure) -> DiscreteMeasure:
    return symmetrize(DiscreteMeasure.from_atoms(np.abs(mu.atoms), mu.weights))


def cmd_certificate(ctx: RunContext) -> None:
    report = bulk_bound_certificate(
        symmetrize(ctx.measure),
        ctx.require('grid', 'r'),
        eta_max=ctx.get('grid', 'eta_max_cert', 10.0),
        grid=ctx.get('grid', 'cert_grid', 40),
        c_cap=ctx.get('thresholds', 'c_cap', DEFAULT_C_CAP),
        tol=ctx.tol,
        map_fn=ctx.pool.map,
    )
    text = report.to_json()
    print(text)
    with open(ctx.path('certificate.json'), 'w') as fp:
        fp.write(text + '\n')
    write_csv(ctx.path('certificate.csv'),
              ('eta', 'deviation', 'lower_margin', 'upper_margin'),
              zip(report.eta_grid, report.deviations, report.lower_margins,
                  report.upper_margins))
    ctx.metrics.tasks(len(report.eta_grid))


def cmd_ring_density(ctx: RunContext) -> None:
    mu = ctx.measure
    K = ctx.get('quadrature', 'K')
    s_grid = ctx.get('grid', 's')
    if s_grid is None:
        geometry = ctx.geometry()
        s_grid = np.linspace(geometry.inner, geometry.outer,
                             ctx.get('grid', 'n_radii', 17)).tolist()
    rows = density_profile(mu, s_grid, ctx.get('grid', 'h'), K, ctx.quad_tol, ctx.pool.map)
    write_csv(ctx.path('ring_density.csv'), ('s', 'L', 'dL', 'd2L', 'rho'), rows)
    ctx.metrics.tasks(len(rows))
    tau = ctx.get('grid', 'tau')
    if tau is not None:
        mass = ring_mass(mu, tau, ctx.get('grid', 'n_radii', DEFAULT_N_RADII), K,
                         ctx.quad_tol, ctx.pool.map)
        print('ring mass %.17g' % mass)
        write_csv(ctx.path('ring_mass.csv'), ('tau', 'mass'), [(float(tau), mass)])
        ctx.metrics.tasks(1)


def _scan_grid(ctx: RunContext, geometry: Optional[RingGeometry]) -> ScanGrid:
    return ScanGrid(
        N_values=ctx.require('grid', 'N_values'),
        trials=ctx.get('grid', 'trials', 1),
        w_values=complex_list(ctx.get('grid', 'w', [])),
        energies=ctx.get('grid', 'energies', []),
        eta_max=ctx.get('grid', 'eta_max', 1.0),
        eta_min_exponent=ctx.get('grid', 'eta_min_exponent', -0.9),
        geometry=geometry,
    )


def _log_domination(report: DominationReport) -> None:
    log = logging.getLogger('locallaw')
    for s in report.per_N.values():
        log.info('N=%d: max %.4g, q95 %.4g, %d failed of %d',
                 s.N, s.max, s.q95, s.failures, s.count)
    if report.fit is not None:
        log.info('slope %.4g (pass: %s)', report.fit.slope, report.fit.passed)
    log.info('domination %s', 'passed' if report.passed else 'FAILED')


def cmd_local_law(ctx: RunContext) -> None:
    mu = ctx.measure
    grid = _scan_grid(ctx, ctx.geometry())
    e = SingleRingEnsemble.from_measure(mu, grid.N_values[0], ctx.symmetry, ctx.seed)
    report = local_law_scan(e, grid, ctx.seed, ctx.pool.map,
                            ctx.get('thresholds', 'eps_pass', DEFAULT_EPS_PASS),
                            ctx.get('thresholds', 'dev_cap'))
    write_csv(ctx.path(SCAN_FILES['local-law']), LOCAL_LAW_HEADER,
              ((r.N, r.trial, r.point.real, r.point.imag, r.eta, r.dev)
               for r in report.records))
    ctx.metrics.tasks(len(report.records), report.failures)
    _log_domination(report)


def _bump(ctx: RunContext) -> Bump:
    return Bump(ctx.get('quadrature', 'bump_radius', 1.0))


def cmd_main_gap(ctx: RunContext) -> None:
    mu = ctx.measure
    N = ctx.require('ensemble', 'N')
    e = SingleRingEnsemble.from_measure(mu, N, ctx.symmetry, ctx.seed)
    w0 = parse_complex(ctx.require('grid', 'w0'))
    alphas = ctx.get('grid', 'alpha', [0.25])
    alphas = alphas if isinstance(alphas, list) else [alphas]
    trials = ctx.get('grid', 'trials', 1)
    n = ctx.get('quadrature', 'n')
    quad_grid = QuadGrid(n) if n else None
    cap = ctx.get('thresholds', 'gap_cap')
    rows = []
    for i, alpha in enumerate(alphas):
        records = main_theorem_gap(e, w0, alpha, trials, ctx.seed, _bump(ctx), quad_grid,
                                   ctx.pool.map, task_offset=i * trials,
                                   tau=ctx.get('grid', 'tau'))
        failed = sum(1 for r in records if not r.ok)
        ctx.metrics.tasks(len(records), failed)
        if cap is not None:
            below = sum(1 for r in records if r.ok and r.gap_norm <= cap)
            logging.getLogger('locallaw').info(
                'alpha=%g: %d of %d normalized gaps <= %g', alpha, below, len(records), cap
            )
        rows.extend((r.N, r.trial, r.alpha, r.w0.real, r.w0.imag, r.lhs, r.rhs, r.gap_norm)
                    for r in records)
    write_csv(ctx.path('gap.csv'),
              ('N', 'trial', 'alpha', 'w0_re', 'w0_im', 'lhs', 'rhs', 'gap_norm'), rows)


def cmd_ssv_tail(ctx: RunContext) -> None:
    mu = ctx.measure
    e = SingleRingEnsemble.from_measure(mu, ctx.require('ensemble', 'N'), ctx.symmetry,
                                        ctx.seed)
    w = complex_list(ctx.require('grid', 'w'))[0]
    tail = smallest_sv_tail(e, w, ctx.require('grid', 't'), ctx.get('grid', 'trials', 1),
                            ctx.seed, ctx.pool.map, ctx.get('quadrature', 'n_boot', 1000))
    write_csv(ctx.path('ssv.csv'), ('N', 'trial', 'w_abs', 't', 'lambda1'),
              ((r.N, r.trial, r.w_abs, r.t, r.lambda1) for r in tail.records))
    write_csv(ctx.path('ssv_tail.csv'), ('t', 'probability'),
              zip(tail.t_grid, tail.probabilities))
    print('slope %.17g ci %.17g %.17g' % (tail.slope, tail.ci_low, tail.ci_high))
    ctx.metrics.tasks(len(tail.records))


def _block_ensemble(ctx: RunContext, N: int) -> BlockAdditiveEnsemble:
    xi = measure_from_config(ctx.get('ensemble', 'xi', {'atoms': [0.0], 'weights': [1.0]}),
                             'ensemble.xi')
    return BlockAdditiveEnsemble.from_measures(ctx.measure, xi, N, ctx.symmetry, ctx.seed)


def cmd_block_law(ctx: RunContext) -> None:
    grid = _scan_grid(ctx, None)
    e = _block_ensemble(ctx, grid.N_values[0])
    interval = tuple(ctx.require('grid', 'interval'))
    report = block_local_law_scan(
        e, interval, grid, ctx.seed, ctx.pool.map,
        ctx.get('thresholds', 'eps_pass', DEFAULT_EPS_PASS),
        ctx.get('thresholds', 'dev_cap'),
        ctx.get('thresholds', 'density', 1e-3),
    )
    write_csv(ctx.path(SCAN_FILES['block-law']), BLOCK_HEADER,
              ((r.N, r.trial, r.point, r.eta, r.dev) for r in report.records))
    ctx.metrics.tasks(len(report.records), report.failures)
    _log_domination(report)


def cmd_green_sub(ctx: RunContext) -> None:
    e = _block_ensemble(ctx, ctx.require('ensemble', 'N'))
    window = ctx.get('grid', 'bulk_window')
    records = green_subordination_scan(
        e, complex_list(ctx.require('grid', 'z')), ctx.get('grid', 'trials', 1), ctx.seed,
        ctx.pool.map, tuple(window) if window else None,
    )
    write_csv(ctx.path('subordination.csv'),
              ('N', 'trial', 'z_re', 'z_im', 'lambda_d_scaled', 'omegaB_gap', 'omegaA_gap',
               'eigvec_sup'),
              ((r.N, r.trial, r.z.real, r.z.imag, r.lambda_d_scaled, r.omegaB_gap,
                r.omegaA_gap, r.eigvec_sup) for r in records))
    worst = max((r.identity_residual for r in records if r.ok), default=math.nan)
    logging.getLogger('locallaw').info('largest subordination identity residual %.3g', worst)
    ctx.metrics.tasks(len(records), sum(1 for r in records if not r.ok))


COMMANDS = {
    'radii': cmd_radii,
    'freeconv': cmd_freeconv,
    'certificate': cmd_certificate,
    'ring-density': cmd_ring_density,
    'local-law': cmd_local_law,
    'main-gap': cmd_main_gap,
    'ssv-tail': cmd_ssv_tail,
    'block-law': cmd_block_law,
    'green-sub': cmd_green_sub,
}  # type: Dict[str, Callable[[RunContext], None]]


def load_scan(run_dir: str) -> Tuple[str, List[DeviationRecord]]:
    """Deviation records of a local-law or block-law run directory.

    @raises ConfigError: For a missing or invalid manifest or a command
        without deviation records.
    """
    manifest = ExperimentManifest.load(run_dir)
    problems = manifest.verify(run_dir)
    if problems:
        raise ConfigError('; '.join(problems), run_dir)
    if manifest.command not in SCAN_FILES:
        raise ConfigError('"%s" runs carry no deviation records' % manifest.command, run_dir)
    records = []
    for row in read_csv(os.path.join(run_dir, SCAN_FILES[manifest.command])):
        dev = float(row['dev'])
        if manifest.command == 'local-law':
            point = complex(float(row['w_re']), float(row['w_im']))
        else:
            point = float(row['E'])
        records.append(DeviationRecord(int(row['N']), int(row['trial']), 0, point,
                                       float(row['eta']), dev, not math.isnan(dev),
                                       '' if not math.isnan(dev) else 'failed'))
    return manifest.command, records


def report(run_dirs: List[str], out_dir: str, eps_pass: float = DEFAULT_EPS_PASS,
           dev_cap: Optional[float] = None) -> DominationReport:
    """Merge the deviation records of several runs into one report and
    write summary.csv, summary.dat and, for three or more sizes, fit.csv.

    @raises ConfigError: For no runs or runs of different commands.
    """
    if not run_dirs:
        raise ConfigError('report needs at least one run directory')
    kinds, records = set(), []
    for run_dir in run_dirs:
        kind, recs = load_scan(run_dir)
        kinds.add(kind)
        records.extend(recs)
    if len(kinds) > 1:
        raise ConfigError('cannot merge runs of %s' % ', '.join(sorted(kinds)))
    merged = DominationReport(records, eps_pass, dev_cap)
    summary = [(s.N, s.count, s.failures, s.max, s.q95) for s in merged.per_N.values()]
    write_csv(os.path.join(out_dir, 'summary.csv'),
              ('N', 'count', 'failures', 'max', 'q95'), summary)
    table = GnuplotTable(('N', 'count', 'failures', 'max', 'q95'))
    for row in summary:
        table.add(*row)
    if merged.fit is not None:
        write_csv(os.path.join(out_dir, 'fit.csv'), ('slope', 'intercept', 'eps_pass', 'pass'),
                  [(merged.fit.slope, merged.fit.intercept, eps_pass, merged.passed)])
        table.comment('slope %.17g intercept %.17g pass %d'
                      % (merged.fit.slope, merged.fit.intercept, merged.passed))
    table.write(os.path.join(out_dir, 'summary.dat'))
    return merged


class RinglawOptionParser(OptionParser):
    """OptionParser exiting with EXIT_USAGE on bad usage."""

    def error(self, msg: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, '%s: error: %s\n' % (self.get_prog_name(), msg))


def setup_logging(loglevel, use_syslog=False) -> None:
    root = logging.getLogger()
    root.setLevel(loglevel)

    if use_syslog:
        from logging.handlers import SysLogHandler

        hdlr = SysLogHandler(address='/dev/log')  # type: logging.Handler
    else:
        hdlr = logging.StreamHandler()

    fmt = logging.Formatter(logging.BASIC_FORMAT)
    hdlr.setFormatter(fmt)
    root.addHandler(hdlr)


def make_parser() -> RinglawOptionParser:
    parser = RinglawOptionParser(
        usage='%%prog [options] {%s,report,validate} [RUN_DIR ...]'
        % ','.join(COMMANDS),
        version='%%prog %s' % VERSION,
    )
    parser.add_option("-c", "--config", dest="config_file", help="Configuration file")
    parser.add_option("-o", "--out", dest="out_dir", help="Output directory")
    parser.add_option("--seed", dest="seed", type="int", help="Override the config seed")
    parser.add_option("--threads", dest="threads", type="int",
                      help="Worker processes (default: $RINGLAW_THREADS or config)")
    parser.add_option("--overwrite", dest="overwrite", action="store_true", default=False,
                      help="Allow writing into a non-empty output directory")
    parser.add_option("--debug", dest="debug", action="store_true", default=False,
                      help="Activate debug logging")
    return parser


def run(command: str, options, args: List[str]) -> int:
    """Execute one command.

    @return: Returns the exit status.
    """
    log = logging.getLogger('ringlaw')
    if command == 'validate':
        cfg = load_config(options.config_file)
        issues = validate_config(cfg)
        for issue in issues:
            print(issue)
        return EXIT_CONFIG if issues else EXIT_OK

    if command == 'report':
        prepare_out_dir(options.out_dir, options.overwrite)
        manifest = ExperimentManifest('report', {'runs': [os.path.abspath(d) for d in args]},
                                      seed=0)
        metrics = RunMetrics('report')
        merged = report(args, options.out_dir)
        metrics.tasks(len(merged.records), merged.failures)
        for name in ('summary.csv', 'summary.dat', 'fit.csv'):
            if os.path.exists(os.path.join(options.out_dir, name)):
                manifest.add_output(name)
        metrics.write(options.out_dir)
        manifest.add_output('metrics.prom')
        manifest.finish()
        manifest.save(options.out_dir)
        return EXIT_OK

    cfg = check_config(load_config(options.config_file))
    seed = resolve_seed(options.seed, cfg)
    # the manifest replays with the seed actually used
    cfg = dict(cfg, seed=seed)
    threads = resolve_threads(options.threads, cfg)
    prepare_out_dir(options.out_dir, options.overwrite)
    manifest = ExperimentManifest(command, cfg, seed)
    metrics = RunMetrics(command)
    log.info('%s: seed %d, %d worker(s), config %s', command, seed, threads,
             manifest.config_hash[:12])
    with TaskPool(threads) as pool:
        ctx = RunContext(cfg, seed, options.out_dir, pool, metrics)
        COMMANDS[command](ctx)
    for name in ctx.outputs:
        manifest.add_output(name)
    metrics.write(options.out_dir)
    manifest.add_output('metrics.prom')
    manifest.finish()
    manifest.save(options.out_dir)
    log.info('%s finished, outputs in %s', command, options.out_dir)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> None:
    parser = make_parser()
    (options, args) = parser.parse_args(argv)
    if not args:
        parser.error("missing command")
    command, args = args[0], args[1:]
    if command not in COMMANDS and command not in ('report', 'validate'):
        parser.error('unknown command "%s"' % command)
    if command != 'report' and args:
        parser.error("incorrect number of arguments")
    if command != 'report' and options.config_file is None:
        parser.error("--config is required")
    if command != 'validate' and options.out_dir is None:
        parser.error("--out is required")

    loglevel = logging.INFO
    if options.debug:
        loglevel = logging.DEBUG
    use_syslog = False
    if options.config_file is not None and os.path.exists(options.config_file):
        try:
            use_syslog = section(load_config(options.config_file), 'logging').get(
                'syslog', False) is True
        except ConfigError:
            pass
    setup_logging(loglevel, use_syslog)

    try:
        status = run(command, options, args)
    except (ConfigError, DomainError, MeasureError) as exc:
        logging.error('%s', exc)
        status = EXIT_CONFIG
    except NumericalError as exc:
        logging.error('numerical failure: %s', exc)
        status = EXIT_NUMERICAL
    except RinglawError as exc:
        logging.error('%s', exc)
        status = EXIT_NUMERICAL
    sys.exit(status)


if __name__ == '__main__':
    main()
