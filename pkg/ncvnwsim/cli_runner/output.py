"""
Deterministic CSV and TOML output
"""
# Standard library imports
import logging
import math
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Union

# External imports
import numpy as np
import pandas as pd
import tomli_w

# Local imports
from ncvnwsim.errors import InvalidInput, IoError

logger = logging.getLogger(__name__)


def format_number(value: float, precision: int = 9) -> str:
    """
    Decimal notation rounded half-to-even to the given number of significant digits, trailing zeros stripped

    :param value: Number to format
    :type value: float
    :param precision: Significant digits
    :type precision: int
    :return: Formatted number; nan and inf are written as nan, inf and -inf
    :rtype: str
    """
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if value == 0:
        return "0"
    d = Decimal(repr(float(value)))
    exponent = d.adjusted() - precision + 1
    d = d.quantize(Decimal(1).scaleb(exponent), rounding=ROUND_HALF_EVEN)
    text = format(d, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    if text in ("-0", ""):
        text = "0"
    return text


def _format_cell(value, precision: int):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_number(float(value), precision)
    if value is None:
        return ""
    return str(value)


def format_table(table: pd.DataFrame, precision: int = 9) -> pd.DataFrame:
    """
    Copy of the table with every cell rendered as text
    """
    return pd.DataFrame(
        {col: [_format_cell(v, precision) for v in table[col].tolist()] for col in table.columns},
        columns=list(table.columns),
    )


def write_csv(table: pd.DataFrame, path: Union[str, Path], precision: int = 9) -> int:
    """
    Write a table as CSV with a header row, LF line endings and fixed-precision decimal numbers

    Repeated writes of the same table are byte-identical.

    :param table: Table to write
    :type table: pd.DataFrame
    :param path: Destination file
    :type path: str | Path
    :param precision: Significant digits of floating point values
    :type precision: int
    :return: Number of data rows written
    :rtype: int
    """
    if precision < 1:
        raise InvalidInput("precision must be at least 1, got %d" % precision)
    path = Path(path)
    text = format_table(table, precision)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        text.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    except OSError as err:
        raise IoError("Couldn't write %s: %s" % (path, err), {"path": str(path)})
    logger.debug("wrote %d rows to %s", len(table), path)
    return len(table)


def write_toml(data: dict, path: Union[str, Path]):
    """
    Write a nested dict as TOML
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(tomli_w.dumps(data), encoding="utf-8", newline="\n")
    except OSError as err:
        raise IoError("Couldn't write %s: %s" % (path, err), {"path": str(path)})
