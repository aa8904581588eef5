"""
Module with utility functions for ncvnwsim
"""
# region imports
# Standard library imports
import os
import re

# External imports
import numpy as np
from scipy.special import expit

# endregion

# region Physical constants
EPS0 = 8.8541878128e-12  # Vacuum permittivity (F/m)
Q_E = 1.602176634e-19  # Elementary charge (C)
K_B = 1.380649e-23  # Boltzmann constant (J/K)
EPS_SIO2 = 3.9
PHI_T_300K = K_B * 300.0 / Q_E  # Thermal voltage at 300 K (V)
# endregion

# region Config unit conversions (config unit -> SI)
NM = 1e-9
NM2 = 1e-18
UC_PER_CM2 = 1e-2
MV_PER_CM = 1e8
FF = 1e-15
NS = 1e-9
PS = 1e-12
FS = 1e-15
# endregion

THREADS_ENV_VAR = "NCFET_SIM_THREADS"


def softplus(x):
    """
    Numerically stable ln(1 + exp(x))
    """
    return np.logaddexp(0.0, x)


def sigmoid(x):
    """
    Logistic function, the derivative of softplus
    """
    return expit(x)


def as_output(x):
    """
    Return a python float for 0-d input, otherwise the array unchanged
    """
    x = np.asarray(x)
    if x.ndim == 0:
        return float(x)
    return x


def thread_limit() -> int:
    """
    Number of worker threads to use for independent runs, capped by the NCFET_SIM_THREADS environment variable

    :return: Worker count, at least 1
    :rtype: int
    """
    default = os.cpu_count() or 1
    value = os.environ.get(THREADS_ENV_VAR)
    if value is None or value.strip() == "":
        return default
    try:
        limit = int(value)
    except ValueError:
        raise ValueError(
            "%s must be a positive integer, got %r" % (THREADS_ENV_VAR, value)
        )
    if limit < 1:
        raise ValueError(
            "%s must be a positive integer, got %r" % (THREADS_ENV_VAR, value)
        )
    return min(limit, default) if default > 0 else limit


# region parsing methods
def parse_direction(direction: str) -> str:
    """
    Parse a sweep direction string

    :param direction: Direction to parse, e.g. "up", "forward", "down", "reverse"
    :type direction: str
    :return: "up" or "down"
    :rtype: str
    """
    direction = direction.strip().lower()
    if direction in ["up", "u", "forward", "fwd", "ascending", "asc"]:
        return "up"
    elif direction in ["down", "d", "reverse", "rev", "descending", "desc"]:
        return "down"
    else:
        raise ValueError("Couldn't parse sweep direction: %s" % direction)


def parse_polarity(polarity: str) -> str:
    """
    Parse a device polarity string

    :param polarity: Polarity to parse, e.g. "n", "nmos", "p", "pfet"
    :type polarity: str
    :return: "n" or "p"
    :rtype: str
    """
    if re.fullmatch(r"n(mos|fet|-?type)?", polarity.strip(), re.IGNORECASE):
        return "n"
    elif re.fullmatch(r"p(mos|fet|-?type)?", polarity.strip(), re.IGNORECASE):
        return "p"
    else:
        raise ValueError("Couldn't parse device polarity: %s" % polarity)


# endregion
