from . import config
from . import output
from . import runner
from . import cli

__all__ = ["config", "output", "runner", "cli"]
