"""helpers for reading and validating ringlaw run configurations"""
import json
import logging
import math
import os
from typing import Any, Dict, List, NamedTuple, Optional

from .errors import ConfigError, RinglawError
from .measure import WEIGHT_TOL, DiscreteMeasure, RingGeometry, reference_measure
from .parallel import available_cpus
from .parse import ParseMeasureSpec, parse_complex

THREADS_ENV = 'RINGLAW_THREADS'

TOP_LEVEL_KEYS = (
    'measure', 'ensemble', 'grid', 'thresholds', 'solver', 'quadrature', 'seed',
    'threads', 'logging',
)
SECTION_KEYS = {
    'ensemble': ('N', 'symmetry', 'xi'),
    'grid': (
        'N_values', 'trials', 'w', 'energies', 'eta_max', 'eta_min_exponent', 'tau',
        'r', 's', 'n_radii', 'h', 'alpha', 'w0', 't', 'z', 'interval',
        'bulk_window', 'eta_max_cert', 'cert_grid',
    ),
    'thresholds': ('eps_pass', 'dev_cap', 'density', 'gap_cap', 'c_cap'),
    'solver': ('tol', 'max_iter'),
    'quadrature': ('tol', 'K', 'n', 'bump_radius', 'n_boot'),
    'logging': ('syslog',),
}
REFERENCE_ARITY = {'quarter_circle': 0, 'uniform': 2, 'two_point': 3}


class ConfigIssue(NamedTuple):
    path: str
    message: str

    def __str__(self) -> str:
        return '%s: %s' % (self.path, self.message)


def load_config(path: str) -> Dict[str, Any]:
    """Read a JSON configuration.  A run manifest is accepted too; its
    echoed configuration is returned.

    @raises ConfigError: If the file cannot be read or is not a JSON object.
    """
    try:
        with open(path) as fp:
            data = json.load(fp)
    except OSError as exc:
        raise ConfigError('cannot read config: %s' % exc.strerror, path) from exc
    except ValueError as exc:
        raise ConfigError('invalid JSON: %s' % exc, path) from exc
    if not isinstance(data, dict):
        raise ConfigError('config must be a JSON object', '$')
    if 'config' in data and 'config_hash' in data:
        logging.getLogger('config').debug('%s is a manifest; using its config', path)
        data = data['config']
    return data


def section(cfg: Dict[str, Any], name: str) -> Dict[str, Any]:
    val = cfg.get(name)
    return val if isinstance(val, dict) else {}


def _is_number(val: Any) -> bool:
    return isinstance(val, (int, float)) and not isinstance(val, bool) and math.isfinite(val)


def _is_count(val: Any) -> bool:
    return isinstance(val, int) and not isinstance(val, bool) and val > 0


class _Validator:
    """Collects ConfigIssues while walking one configuration."""

    def __init__(self) -> None:
        self.issues = []  # type: List[ConfigIssue]

    def add(self, path: str, message: str) -> None:
        self.issues.append(ConfigIssue(path, message))

    def positive(self, node: Dict[str, Any], key: str, path: str) -> None:
        if key in node and not (_is_number(node[key]) and node[key] > 0):
            self.add('%s.%s' % (path, key), 'must be a positive number')

    def count(self, node: Dict[str, Any], key: str, path: str) -> None:
        if key in node and not _is_count(node[key]):
            self.add('%s.%s' % (path, key), 'must be a positive integer')

    def number_list(self, node: Dict[str, Any], key: str, path: str,
                    positive: bool = False) -> None:
        if key not in node:
            return
        val = node[key]
        if not isinstance(val, list) or not val or not all(_is_number(v) for v in val):
            self.add('%s.%s' % (path, key), 'must be a non-empty list of numbers')
        elif positive and any(v <= 0 for v in val):
            self.add('%s.%s' % (path, key), 'must hold positive numbers')

    def complex_list(self, node: Dict[str, Any], key: str, path: str) -> None:
        if key not in node:
            return
        val = node[key]
        items = val if isinstance(val, list) and key != 'w0' else [val]
        for i, item in enumerate(items):
            try:
                parse_complex(item)
            except (ValueError, TypeError):
                self.add('%s.%s[%d]' % (path, key, i), 'not a complex number: %r' % (item,))

    def interval(self, node: Dict[str, Any], key: str, path: str) -> None:
        if key not in node:
            return
        val = node[key]
        if (not isinstance(val, list) or len(val) != 2
                or not all(_is_number(v) for v in val) or not val[0] <= val[1]):
            self.add('%s.%s' % (path, key), 'must be an interval [lo, hi] with lo <= hi')

    def measure(self, node: Any, path: str, nonnegative: bool) -> None:
        if isinstance(node, str):
            self._measure_spec(node, path)
            return
        if not isinstance(node, dict):
            self.add(path, 'must be a measure spec string or an object')
            return
        if 'spec' in node:
            if not isinstance(node['spec'], str):
                self.add(path + '.spec', 'must be a string')
            else:
                self._measure_spec(node['spec'], path + '.spec')
            self.count(node, 'n_atoms', path)
            return
        for key in ('atoms', 'weights'):
            if key not in node:
                self.add('%s.%s' % (path, key), 'missing field')
        if 'atoms' not in node or 'weights' not in node:
            return
        atoms, weights = node['atoms'], node['weights']
        if not isinstance(atoms, list) or not atoms or not all(_is_number(a) for a in atoms):
            self.add(path + '.atoms', 'must be a non-empty list of numbers')
            return
        if not isinstance(weights, list) or not all(_is_number(w) for w in weights):
            self.add(path + '.weights', 'must be a list of numbers')
            return
        if len(atoms) != len(weights):
            self.add(path + '.weights', 'has %d entries for %d atoms'
                     % (len(weights), len(atoms)))
        if any(w <= 0 for w in weights):
            self.add(path + '.weights', 'weights must be positive')
        total = math.fsum(weights)
        if abs(total - 1.0) > WEIGHT_TOL:
            self.add(path + '.weights', 'weights of measure %s sum to %.17g, not 1'
                     % (path, total))
        if any(b <= a for a, b in zip(atoms, atoms[1:])):
            self.add(path + '.atoms', 'atoms must be strictly increasing')
        if nonnegative and any(a < 0 for a in atoms):
            self.add(path + '.atoms', 'singular values must be non-negative')

    def _measure_spec(self, spec: str, path: str) -> None:
        parsed = ParseMeasureSpec().parse_measure_spec(spec)
        if parsed is None:
            self.add(path, 'malformed measure spec "%s"' % spec)
            return
        name, args = parsed
        if name not in REFERENCE_ARITY:
            self.add(path, 'unknown reference measure "%s"' % name)
        elif len(args) != REFERENCE_ARITY[name]:
            self.add(path, '%s takes %d arguments, got %d'
                     % (name, REFERENCE_ARITY[name], len(args)))


def validate_config(cfg: Any) -> List[ConfigIssue]:
    """Check a configuration against the schema.  Only the structure and
    value ranges are checked; the single computation performed is the
    closed-form ring radii needed to test that tau leaves a non-empty
    annulus.

    @return: Returns the list of issues, empty for a valid configuration.
    """
    v = _Validator()
    if not isinstance(cfg, dict):
        v.add('$', 'config must be a JSON object')
        return v.issues
    for key in cfg:
        if key not in TOP_LEVEL_KEYS:
            v.add(key, 'unknown key')
    if 'measure' not in cfg:
        v.add('measure', 'missing field')
    else:
        v.measure(cfg['measure'], 'measure', nonnegative=True)

    for name, keys in SECTION_KEYS.items():
        if name not in cfg:
            continue
        node = cfg[name]
        if not isinstance(node, dict):
            v.add(name, 'must be an object')
            continue
        for key in node:
            if key not in keys:
                v.add('%s.%s' % (name, key), 'unknown key')

    ens = section(cfg, 'ensemble')
    v.count(ens, 'N', 'ensemble')
    if 'symmetry' in ens and ens['symmetry'] not in ('unitary', 'orthogonal'):
        v.add('ensemble.symmetry', 'must be "unitary" or "orthogonal"')
    if 'xi' in ens:
        v.measure(ens['xi'], 'ensemble.xi', nonnegative=False)

    grid = section(cfg, 'grid')
    if 'N_values' in grid and not (isinstance(grid['N_values'], list) and grid['N_values']
                                   and all(_is_count(n) for n in grid['N_values'])):
        v.add('grid.N_values', 'must be a non-empty list of positive integers')
    for key in ('trials', 'n_radii', 'cert_grid'):
        v.count(grid, key, 'grid')
    for key in ('eta_max', 'r', 'h', 'eta_max_cert'):
        v.positive(grid, key, 'grid')
    if 'tau' in grid and not (_is_number(grid['tau']) and grid['tau'] >= 0):
        v.add('grid.tau', 'must be a non-negative number')
    if 'eta_min_exponent' in grid and not (_is_number(grid['eta_min_exponent'])
                                           and grid['eta_min_exponent'] < 0):
        v.add('grid.eta_min_exponent', 'must be a negative number')
    v.number_list(grid, 's', 'grid', positive=True)
    v.number_list(grid, 't', 'grid', positive=True)
    v.number_list(grid, 'energies', 'grid')
    if 'alpha' in grid:
        alphas = grid['alpha'] if isinstance(grid['alpha'], list) else [grid['alpha']]
        if not alphas or not all(_is_number(a) and 0 <= a < 0.5 for a in alphas):
            v.add('grid.alpha', 'must lie in [0, 1/2)')
    for key in ('w', 'w0', 'z'):
        v.complex_list(grid, key, 'grid')
    v.interval(grid, 'interval', 'grid')
    v.interval(grid, 'bulk_window', 'grid')

    thresholds = section(cfg, 'thresholds')
    for key in SECTION_KEYS['thresholds']:
        v.positive(thresholds, key, 'thresholds')
    solver = section(cfg, 'solver')
    v.positive(solver, 'tol', 'solver')
    v.count(solver, 'max_iter', 'solver')
    quadrature = section(cfg, 'quadrature')
    for key in ('tol', 'K', 'bump_radius'):
        v.positive(quadrature, key, 'quadrature')
    v.count(quadrature, 'n', 'quadrature')
    v.count(quadrature, 'n_boot', 'quadrature')

    if 'seed' in cfg and not (isinstance(cfg['seed'], int) and not isinstance(cfg['seed'], bool)
                              and 0 <= cfg['seed'] < 2 ** 64):
        v.add('seed', 'must be an integer in [0, 2^64)')
    if 'threads' in cfg and not _is_count(cfg['threads']):
        v.add('threads', 'must be a positive integer')
    if 'syslog' in section(cfg, 'logging') and not isinstance(cfg['logging']['syslog'], bool):
        v.add('logging.syslog', 'must be true or false')

    if not v.issues and 'tau' in grid:
        try:
            geometry = RingGeometry.from_measure(measure_from_config(cfg['measure']),
                                                 grid['tau'])
        except RinglawError as exc:
            v.add('measure', str(exc))
        else:
            if geometry.is_empty:
                v.add('grid.tau', 'tau = %g leaves no annulus inside the ring [%.17g, %.17g]'
                      % (grid['tau'], geometry.r_minus, geometry.r_plus))
    return v.issues


def check_config(cfg: Any) -> Dict[str, Any]:
    """@raises ConfigError: With the first issue of validate_config."""
    issues = validate_config(cfg)
    if issues:
        for issue in issues[1:]:
            logging.getLogger('config').error('%s', issue)
        raise ConfigError(issues[0].message, issues[0].path)
    return cfg


def measure_from_config(node: Any, path: str = 'measure') -> DiscreteMeasure:
    """Build the measure described by a config node.

    @raises ConfigError: If the node does not describe a valid measure.
    """
    try:
        if isinstance(node, str):
            return reference_measure(node)
        if isinstance(node, dict) and 'spec' in node:
            return reference_measure(node['spec'], int(node.get('n_atoms', 2)))
        if isinstance(node, dict):
            return DiscreteMeasure.from_dict(node)
    except RinglawError as exc:
        raise ConfigError(str(exc), path) from exc
    raise ConfigError('not a measure', path)


def complex_list(val: Any) -> List[complex]:
    """Normalize a single complex value or a list of them."""
    if isinstance(val, list):
        return [parse_complex(item) for item in val]
    return [parse_complex(val)]


def resolve_threads(option: Optional[int], cfg: Dict[str, Any]) -> int:
    """Worker count: the --threads option, then RINGLAW_THREADS, then the
    config, then 1."""
    log = logging.getLogger('config')
    threads = option
    if threads is None and os.environ.get(THREADS_ENV):
        try:
            threads = int(os.environ[THREADS_ENV])
        except ValueError:
            raise ConfigError('not an integer: "%s"' % os.environ[THREADS_ENV], THREADS_ENV)
    if threads is None:
        threads = cfg.get('threads', 1)
    if threads < 1:
        raise ConfigError('thread count must be positive, got %d' % threads, 'threads')
    cpus = available_cpus()
    if threads > cpus:
        log.warning('%d workers requested, %d CPUs available', threads, cpus)
    return threads


def resolve_seed(option: Optional[int], cfg: Dict[str, Any]) -> int:
    """--seed overrides the config seed, which defaults to 0."""
    return int(option) if option is not None else int(cfg.get('seed', 0))
