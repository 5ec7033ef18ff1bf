"""various parsers"""
import re
import logging

from typing import List, Optional, Tuple


class ParseMeasureSpec:
    """Provides parsing of reference measure specifications of the form
    name or name(arg, arg, ...) into their components.
    """

    MEASURE_RE = re.compile(
        r"^\s*(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*"
        r"(\(\s*(?P<args>[^()]*?)\s*\))?\s*$"
    )

    def __init__(self) -> None:
        self._log = logging.getLogger("parsemeasure")

    def parse_measure_spec(self, spec: str) -> Optional[Tuple[str, List[float]]]:
        """Parse a measure specification into its name and numeric arguments.

        @param spec: The specification to parse, e.g. "two_point(1, 2, 0.5)".
        @return: Returns the name and the list of arguments, or None if the
            specification is malformed.
        """
        match = self.MEASURE_RE.match(spec)
        if match is None:
            self._log.warning('measure in unexpected format: "%s"', spec)
            return None
        args_str = match.group("args")
        args = []  # type: List[float]
        if args_str:
            for arg in split_list(args_str):
                try:
                    args.append(float(arg))
                except ValueError:
                    self._log.warning('non-numeric measure argument: "%s"', arg)
                    return None
        return match.group("name"), args


def split_list(val: str, split=",") -> List[str]:
    """Split val at each "split" character; blank parts are dropped."""
    return [v.strip() for v in val.split(split) if (len(v.strip()) > 0)]


def parse_complex(val) -> complex:
    """Parses a complex number given either as a number, a [re, im] pair or a
    string like "1.4", "0.1j" or "1+0.5j".

    @raises ValueError: If the value cannot be interpreted.
    """
    if isinstance(val, bool):
        raise ValueError("not a complex number: %r" % val)
    if isinstance(val, (int, float, complex)):
        return complex(val)
    if isinstance(val, (list, tuple)) and len(val) == 2:
        return complex(float(val[0]), float(val[1]))
    if isinstance(val, str):
        return complex(val.replace(" ", "").replace("i", "j"))
    raise ValueError("not a complex number: %r" % (val,))
