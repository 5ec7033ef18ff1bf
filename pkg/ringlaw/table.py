"""
utility for writing whitespace separated column files for gnuplot
"""

import math
from typing import Any, Iterable, Sequence


def column_escape(value: Any) -> str:
    """render a single cell as gnuplot expects it"""
    if isinstance(value, bool):
        return '1' if value else '0'
    if isinstance(value, float):
        if math.isnan(value):
            return 'NaN'
        return '%.17g' % value
    text = str(value)
    # gnuplot quotes strings holding blanks with double quotes
    if not text or any(c.isspace() for c in text):
        return '"{}"'.format(text.replace('"', '\\"'))
    return text


def make_table_line(values: Iterable[Any]) -> str:
    return " ".join(column_escape(val) for val in values)


class GnuplotTable:
    """construct a gnuplot data file"""

    def __init__(self, columns: Sequence[str]) -> None:
        self.columns = list(columns)
        self.lines = ['# ' + " ".join(self.columns)]

    def add(self, *values) -> None:
        """add one data row"""
        if len(values) != len(self.columns):
            raise ValueError(
                'row has %d values for %d columns' % (len(values), len(self.columns))
            )
        self.lines.append(make_table_line(values))

    def comment(self, text: str) -> None:
        self.lines.append('# ' + text)

    def blank(self) -> None:
        """separate data blocks (gnuplot "index")"""
        self.lines.append('')
        self.lines.append('')

    def to_text(self) -> str:
        return "\n".join(self.lines) + "\n"

    def write(self, path: str) -> None:
        with open(path, 'w') as fp:
            fp.write(self.to_text())
