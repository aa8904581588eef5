from . import inverter
from . import ring_oscillator
from . import energy_delay

__all__ = ["inverter", "ring_oscillator", "energy_delay"]
