"""
Energy-delay characterization of conventional and NC ring oscillators over the supply voltage
"""
# Standard library imports
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

# External imports
import numpy as np
import pandas as pd

# Local imports
from ncvnwsim.circuits.ring_oscillator import RingOscillator, TransientConfig, ro_metrics, ro_transient
from ncvnwsim.errors import InvalidInput, NcfetSimError, OutOfRange
from ncvnwsim.nc_device import run_concurrently

logger = logging.getLogger(__name__)

MIN_SUPPLY = 0.2  # V

ENERGY_DELAY_COLUMNS = ["v_dd_V", "delay_s", "energy_J", "variant"]


@dataclass(frozen=True)
class EnergyDelayRow:
    v_dd: float
    delay_per_stage: float
    energy_per_cycle: float

    def __post_init__(self):
        if not (self.v_dd > 0 and self.delay_per_stage > 0 and self.energy_per_cycle > 0):
            raise InvalidInput("energy-delay rows must be positive", {"v_dd": self.v_dd})


def _run_point(job: Tuple[str, RingOscillator, float, TransientConfig]):
    variant, template, v_dd, cfg = job
    ro = template.with_supply(v_dd)
    try:
        metrics = ro_metrics(ro_transient(ro, cfg), ro)
    except NcfetSimError as err:
        raise err.with_context(v_dd=v_dd, variant=variant)
    logger.info(
        "%s ring oscillator at v_dd=%g: delay %.4g s, energy %.4g J",
        variant,
        v_dd,
        metrics.delay_per_stage,
        metrics.energy_per_cycle,
    )
    return variant, EnergyDelayRow(v_dd, metrics.delay_per_stage, metrics.energy_per_cycle)


def energy_delay_sweep(
    conventional: RingOscillator,
    nc: RingOscillator,
    v_dd_list: Sequence[float],
    cfg: TransientConfig = None,
    max_workers: int = None,
) -> Tuple[List[EnergyDelayRow], List[EnergyDelayRow]]:
    """
    Stage delay and energy per cycle of both ring oscillator variants at each supply voltage

    Every (variant, v_dd) point is an independent transient run; the points run in separate processes.

    :param conventional: Ring oscillator built from conventional devices
    :type conventional: RingOscillator
    :param nc: Ring oscillator built from NC devices
    :type nc: RingOscillator
    :param v_dd_list: Supply voltages (V), each above 0.2 V
    :type v_dd_list: Sequence[float]
    :param cfg: Transient settings shared by all runs
    :type cfg: TransientConfig
    :param max_workers: Worker cap, defaults to the NCFET_SIM_THREADS limit
    :type max_workers: int
    :return: (conventional rows, NC rows), each sorted by v_dd
    :rtype: tuple
    """
    if len(v_dd_list) == 0:
        raise InvalidInput("v_dd_list must not be empty")
    for v_dd in v_dd_list:
        if not v_dd > MIN_SUPPLY:
            raise InvalidInput("supply voltages must exceed %g V, got %g" % (MIN_SUPPLY, v_dd))
    cfg = cfg or TransientConfig()
    jobs = [("conventional", conventional, float(v), cfg) for v in v_dd_list]
    jobs += [("nc", nc, float(v), cfg) for v in v_dd_list]
    results = run_concurrently(_run_point, jobs, max_workers=max_workers, processes=True)
    conv_rows = sorted((row for variant, row in results if variant == "conventional"), key=lambda r: r.v_dd)
    nc_rows = sorted((row for variant, row in results if variant == "nc"), key=lambda r: r.v_dd)
    return conv_rows, nc_rows


def _log_curve(rows: Sequence[EnergyDelayRow]):
    order = sorted(rows, key=lambda r: r.delay_per_stage)
    delay = np.log([r.delay_per_stage for r in order])
    energy = np.log([r.energy_per_cycle for r in order])
    return delay, energy


def energy_at_delay(rows: Sequence[EnergyDelayRow], target_delay: float, name: str = "energy-delay") -> float:
    """
    Energy per cycle at a stage delay, interpolated linearly in log-log space (J)
    """
    if not rows:
        raise InvalidInput("%s curve needs at least one row" % name)
    if not target_delay > 0:
        raise OutOfRange("target delay must be positive", {"target_delay": target_delay})
    delay, energy = _log_curve(rows)
    log_target = np.log(target_delay)
    # Tolerate rounding at the curve ends
    if log_target < delay[0] - 1e-12 or log_target > delay[-1] + 1e-12:
        raise OutOfRange(
            "target delay outside the %s curve" % name,
            {"target_delay": target_delay, "min": float(np.exp(delay[0])), "max": float(np.exp(delay[-1]))},
        )
    return float(np.exp(np.interp(log_target, delay, energy)))


def iso_delay_reduction(
    conv: Sequence[EnergyDelayRow], nc: Sequence[EnergyDelayRow], target_delay: float
) -> float:
    """
    Fractional energy saving of the NC curve at a common stage delay

    :param conv: Conventional energy-delay rows
    :type conv: Sequence[EnergyDelayRow]
    :param nc: NC energy-delay rows
    :type nc: Sequence[EnergyDelayRow]
    :param target_delay: Stage delay to compare at (s)
    :type target_delay: float
    :return: 1 - E_nc / E_conv
    :rtype: float
    """
    e_conv = energy_at_delay(conv, target_delay, "conventional")
    e_nc = energy_at_delay(nc, target_delay, "nc")
    return 1.0 - e_nc / e_conv


def longest_common_delay(conv: Sequence[EnergyDelayRow], nc: Sequence[EnergyDelayRow]) -> float:
    """
    Largest stage delay covered by both curves (s)
    """
    d_conv = max(r.delay_per_stage for r in conv)
    d_nc = max(r.delay_per_stage for r in nc)
    target = min(d_conv, d_nc)
    if target < max(min(r.delay_per_stage for r in conv), min(r.delay_per_stage for r in nc)):
        raise OutOfRange("energy-delay curves share no delay range")
    return target


def energy_delay_frame(conv: Sequence[EnergyDelayRow], nc: Sequence[EnergyDelayRow]) -> pd.DataFrame:
    rows = [
        {"v_dd_V": r.v_dd, "delay_s": r.delay_per_stage, "energy_J": r.energy_per_cycle, "variant": variant}
        for variant, curve in (("conventional", conv), ("nc", nc))
        for r in curve
    ]
    return pd.DataFrame(rows, columns=ENERGY_DELAY_COLUMNS)
