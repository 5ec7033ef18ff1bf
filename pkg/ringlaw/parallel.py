# vim:set fileencoding=utf-8 ft=python ts=8 sw=4 sts=4 et cindent:

# parallel.py -- Order preserving map over worker processes.
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
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Iterator, Optional


class TaskPool:
    """Maps picklable callables over tasks, in a process pool for more than
    one worker and in-process otherwise.  Results come back in task order,
    so reductions over them do not depend on scheduling.
    """

    def __init__(self, threads: int = 1) -> None:
        self._threads = max(1, int(threads))
        self._executor = None  # type: Optional[ProcessPoolExecutor]
        self._log = logging.getLogger('taskpool')

    @property
    def threads(self) -> int:
        return self._threads

    def __enter__(self) -> 'TaskPool':
        if self._threads > 1:
            self._log.debug('starting %d worker processes', self._threads)
            self._executor = ProcessPoolExecutor(max_workers=self._threads)
        return self

    def __exit__(self, *exc_info) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def map(self, fn: Callable, tasks: Iterable) -> Iterator:
        if self._executor is None:
            return map(fn, tasks)
        tasks = list(tasks)
        chunksize = max(1, len(tasks) // (4 * self._threads))
        return self._executor.map(fn, tasks, chunksize=chunksize)


def available_cpus() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1
