# vim:set fileencoding=utf-8 ft=python ts=8 sw=4 sts=4 et cindent:

# errors.py -- Exception hierarchy shared by all ringlaw modules.
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

from typing import Optional


class RinglawError(Exception):
    """Base class of all errors raised by the ringlaw package."""


class ConfigError(RinglawError):
    """raised when a configuration file does not validate.  The offending
    JSON path is kept in the "path" attribute."""

    def __init__(self, message: str, path: Optional[str] = None) -> None:
        if path is not None:
            message = '%s: %s' % (path, message)
        super().__init__(message)
        self.path = path


class DomainError(RinglawError, ValueError):
    """raised when an argument lies outside the domain of an operation"""


class MeasureError(RinglawError, ValueError):
    """raised when a measure violates a structural requirement (too few
    atoms, weights not summing to one, unsorted atoms, ...)"""


class NumericalError(RinglawError):
    """Base class of failures of the numerical machinery."""


class ConvergenceError(NumericalError):
    """raised when an iterative solver gives up.  Carries the last residual
    and the number of iterations performed."""

    def __init__(self, message: str, residual: float, iterations: int) -> None:
        super().__init__(
            '%s (residual %.3g after %d iterations)' % (message, residual, iterations)
        )
        self.residual = residual
        self.iterations = iterations


class QuadratureError(NumericalError):
    """raised when an adaptive quadrature misses its tolerance"""
