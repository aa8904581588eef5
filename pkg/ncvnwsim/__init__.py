from . import errors
from . import utils
from . import ferroelectric
from . import fet_surrogate
from . import nc_device
from . import analysis
from . import circuits
from . import cli_runner

__VERSION__ = "0.1.0"
__AUTHOR__ = "Braden Griebel"
__EMAIL__ = "bgriebel@uw.edu"
__url__ = "https://github.com/Braden-Griebel/ncvnwsim"
__description__ = "Co-simulation of negative-capacitance vertical nanowire FETs, from the ferroelectric to ring oscillators"
__all__ = [
    "errors",
    "utils",
    "ferroelectric",
    "fet_surrogate",
    "nc_device",
    "analysis",
    "circuits",
    "cli_runner",
]
