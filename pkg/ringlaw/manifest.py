# vim:set fileencoding=utf-8 ft=python ts=8 sw=4 sts=4 et cindent:

# manifest.py -- Run manifests, CSV output and per-run metrics.
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

import csv
import datetime
import hashlib
import json
import logging
import math
import os
import time
from typing import Any, Dict, Iterable, List, Optional, Sequence

from prometheus_client import CollectorRegistry, Counter, Gauge, write_to_textfile

from . import GENERATOR_ID, VERSION
from .errors import ConfigError

MANIFEST_NAME = 'manifest.json'
METRICS_NAME = 'metrics.prom'


def canonical_json(cfg: Dict[str, Any]) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(',', ':'))


def config_hash(cfg: Dict[str, Any]) -> str:
    """SHA-256 hex digest of the canonical form of cfg."""
    return hashlib.sha256(canonical_json(cfg).encode('utf-8')).hexdigest()


def format_value(val: Any) -> str:
    """Render a CSV cell; floats with 17 significant digits."""
    if isinstance(val, bool):
        return '1' if val else '0'
    if isinstance(val, float):
        if math.isnan(val):
            return 'nan'
        return '%.17g' % val
    return str(val)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    """Write header and rows to path.

    @return: Returns the number of data rows written.
    """
    count = 0
    with open(path, 'w', newline='') as fp:
        writer = csv.writer(fp, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError('row has %d cells, header %d' % (len(row), len(header)))
            writer.writerow([format_value(v) for v in row])
            count += 1
    logging.getLogger('manifest').debug('wrote %d rows to %s', count, path)
    return count


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, newline='') as fp:
        return list(csv.DictReader(fp))


def prepare_out_dir(out_dir: str, overwrite: bool = False) -> None:
    """Create out_dir.

    @raises ConfigError: If out_dir already holds files and overwrite is not
        set.
    """
    if os.path.isdir(out_dir) and os.listdir(out_dir) and not overwrite:
        raise ConfigError('output directory is not empty; pass --overwrite', out_dir)
    os.makedirs(out_dir, exist_ok=True)


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


class ExperimentManifest:
    """Record of one run: the command, the echoed configuration and its
    hash, the seed, generator and library version, timestamps and the
    output files (relative to the run directory)."""

    def __init__(self, command: str, config: Dict[str, Any], seed: int,
                 outputs: Optional[List[str]] = None, started: Optional[str] = None,
                 finished: Optional[str] = None, version: str = VERSION,
                 generator_id: str = GENERATOR_ID, config_hash_: Optional[str] = None) -> None:
        self.command = command
        self.config = config
        self.seed = int(seed)
        self.outputs = list(outputs or [])
        self.started = started or _now()
        self.finished = finished
        self.version = version
        self.generator_id = generator_id
        self.config_hash = config_hash_ or config_hash(config)

    def add_output(self, name: str) -> None:
        if name not in self.outputs:
            self.outputs.append(name)

    def finish(self) -> None:
        self.finished = _now()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'config': self.config,
            'config_hash': self.config_hash,
            'seed': self.seed,
            'generator_id': self.generator_id,
            'started': self.started,
            'finished': self.finished,
            'outputs': self.outputs,
            'version': self.version,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentManifest':
        try:
            return cls(
                command=data['command'],
                config=data['config'],
                seed=data['seed'],
                outputs=data.get('outputs', []),
                started=data.get('started'),
                finished=data.get('finished'),
                version=data.get('version', VERSION),
                generator_id=data.get('generator_id', GENERATOR_ID),
                config_hash_=data.get('config_hash'),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError('manifest lacks field %s' % exc) from exc

    def save(self, out_dir: str) -> str:
        path = os.path.join(out_dir, MANIFEST_NAME)
        with open(path, 'w') as fp:
            json.dump(self.to_dict(), fp, indent=2, sort_keys=True)
            fp.write('\n')
        return path

    @classmethod
    def load(cls, run_dir: str) -> 'ExperimentManifest':
        path = os.path.join(run_dir, MANIFEST_NAME)
        try:
            with open(path) as fp:
                data = json.load(fp)
        except (OSError, ValueError) as exc:
            raise ConfigError('cannot read manifest: %s' % exc, path) from exc
        return cls.from_dict(data)

    def verify(self, run_dir: str) -> List[str]:
        """@return: Returns a list of problems; empty if the hash matches
            the echoed config and every output exists."""
        problems = []
        if config_hash(self.config) != self.config_hash:
            problems.append('config_hash does not match the echoed config')
        for name in self.outputs:
            if not os.path.exists(os.path.join(run_dir, name)):
                problems.append('missing output %s' % name)
        return problems

    def __repr__(self) -> str:
        return '<ExperimentManifest(command={}, hash={})>'.format(
            self.command, self.config_hash[:12]
        )


class RunMetrics:
    """Counters of one run, kept in a private registry and written in the
    Prometheus text format next to the manifest."""

    def __init__(self, command: str) -> None:
        self.registry = CollectorRegistry()
        self._tasks = Counter('ringlaw_tasks', 'number of Monte Carlo or grid tasks run',
                              ('command',), registry=self.registry)
        self._failed = Counter('ringlaw_failed_tasks', 'number of tasks recorded as failed',
                               ('command',), registry=self.registry)
        self._wall = Gauge('ringlaw_wall_seconds', 'wall clock time of the run',
                           ('command',), registry=self.registry)
        self._command = command
        self._start = time.monotonic()

    def tasks(self, count: int = 1, failed: int = 0) -> None:
        self._tasks.labels(self._command).inc(count)
        if failed:
            self._failed.labels(self._command).inc(failed)

    def write(self, out_dir: str) -> str:
        self._wall.labels(self._command).set(time.monotonic() - self._start)
        path = os.path.join(out_dir, METRICS_NAME)
        write_to_textfile(path, self.registry)
        return path
