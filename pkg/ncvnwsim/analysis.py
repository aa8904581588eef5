"""
Metric extraction from sweep tables: SS, threshold, DIBL, hysteresis, NDR and output saturation
"""
# Standard library imports
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

# External imports
import numpy as np
import pandas as pd

# Local imports
from ncvnwsim.errors import CriterionNotCrossed, InvalidInput, WindowEmpty
from ncvnwsim.fet_surrogate import FetGeometry
from ncvnwsim.nc_device import NcFet, SweepTable, run_concurrently, sweep_idvg

logger = logging.getLogger(__name__)

SS_WINDOW = (1e-11, 1e-7)  # A
HYSTERESIS_WINDOW = (1e-10, 1e-6)  # A
HYSTERESIS_POINTS = 81
SATURATION_THRESHOLD = 0.05
V_DS_LIN = 0.05  # V

TableLike = Union[SweepTable, pd.DataFrame]


# region Domain types
@dataclass(frozen=True)
class DeviceMetrics:
    """
    Summary metrics of one device

    :param ss_min: Minimum subthreshold slope (mV/dec)
    :param v_t: Constant-current threshold at V_ds = V_dd (V)
    :param dibl: Signed DIBL (mV/V)
    :param hysteresis: Up/down sweep hysteresis at V_ds = V_dd (V)
    :param i_on: On current (A)
    :param i_off: Off current (A)
    """

    ss_min: float
    v_t: float
    dibl: float
    hysteresis: float
    i_on: float
    i_off: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "ss_mV_dec": self.ss_min,
                    "v_t_V": self.v_t,
                    "dibl_mV_V": self.dibl,
                    "hysteresis_V": self.hysteresis,
                    "i_on_A": self.i_on,
                    "i_off_A": self.i_off,
                }
            ]
        )


@dataclass(frozen=True)
class SaturationResult:
    """
    Output-saturation diagnostic at V_ds = V_dd
    """

    saturates: bool
    gds_ratio: float
    v_int_at_vdd: Optional[float] = None
    v_dsat_estimate: Optional[float] = None


# endregion


# region Table helpers
def _frame(table: TableLike) -> pd.DataFrame:
    if isinstance(table, SweepTable):
        return table.to_frame()
    return table


def _transfer(table: TableLike) -> Tuple[np.ndarray, np.ndarray]:
    """
    (v_gs, |i_ds|) sorted by gate voltage; P-device tables are mirrored so currents are positive
    """
    frame = _frame(table)
    v = frame["v_gs_V"].to_numpy(dtype=float)
    i = frame["i_ds_A"].to_numpy(dtype=float)
    if i.size and np.median(i) < 0:
        v, i = -v, -i
    order = np.argsort(v, kind="stable")
    return v[order], np.abs(i[order])


def _output(table: TableLike) -> Tuple[np.ndarray, np.ndarray]:
    frame = _frame(table)
    v = frame["v_ds_V"].to_numpy(dtype=float)
    i = frame["i_ds_A"].to_numpy(dtype=float)
    if i.size and np.median(i) < 0:
        v, i = -v, -i
    order = np.argsort(v, kind="stable")
    return v[order], i[order]


def _drain_bias(table: TableLike) -> float:
    frame = _frame(table)
    return abs(float(frame["v_ds_V"].iloc[0]))


# endregion


# region Extraction
def extract_ss(
    table: TableLike, i_lo: float = SS_WINDOW[0], i_hi: float = SS_WINDOW[1]
) -> float:
    """
    Minimum subthreshold slope over adjacent rows whose currents both lie in [i_lo, i_hi]

    :param table: Transfer sweep
    :type table: SweepTable | pd.DataFrame
    :param i_lo: Lower current bound (A)
    :type i_lo: float
    :param i_hi: Upper current bound (A)
    :type i_hi: float
    :return: Minimum SS (mV/dec)
    :rtype: float
    """
    curve = ss_curve(table, i_lo, i_hi)
    if curve.empty:
        raise WindowEmpty("no rows in current window [%.3g, %.3g] A" % (i_lo, i_hi))
    return float(curve["ss_mV_dec"].min())


def ss_curve(
    table: TableLike, i_lo: float = 0.0, i_hi: float = np.inf
) -> pd.DataFrame:
    """
    Point-wise SS between adjacent rows, restricted to a current window

    :return: Table with columns v_gs_V, i_ds_A (geometric mean of the pair) and ss_mV_dec
    :rtype: pd.DataFrame
    """
    v, i = _transfer(table)
    with np.errstate(divide="ignore"):
        log_i = np.log10(i)
    dv = np.diff(v)
    dlog = np.diff(log_i)
    inside = (i[:-1] >= i_lo) & (i[:-1] <= i_hi) & (i[1:] >= i_lo) & (i[1:] <= i_hi)
    keep = inside & (dlog > 0) & np.isfinite(dlog)
    return pd.DataFrame(
        {
            "v_gs_V": 0.5 * (v[:-1] + v[1:])[keep],
            "i_ds_A": np.sqrt(i[:-1] * i[1:])[keep],
            "ss_mV_dec": (dv[keep] / dlog[keep]) * 1000.0,
        }
    )


def extract_vt(
    table: TableLike, geom: FetGeometry = None, i_crit: float = None
) -> float:
    """
    Constant-current threshold voltage, interpolated linearly in log current

    The criterion is 100 nA times (pi·d_nw·n_wires / l_g) unless i_crit is given. P-device tables give the
    threshold in the mirrored frame.

    :param table: Transfer sweep
    :type table: SweepTable | pd.DataFrame
    :param geom: Device geometry for the criterion current
    :type geom: FetGeometry
    :param i_crit: Explicit criterion current (A)
    :type i_crit: float
    :return: Threshold voltage (V)
    :rtype: float
    """
    if i_crit is None:
        i_crit = (geom or FetGeometry()).criterion_current
    v, i = _transfer(table)
    with np.errstate(divide="ignore"):
        log_i = np.log10(i)
    target = math.log10(i_crit)
    above = log_i >= target
    for k in range(1, len(v)):
        if above[k] and not above[k - 1]:
            frac = (target - log_i[k - 1]) / (log_i[k] - log_i[k - 1])
            return float(v[k - 1] + frac * (v[k] - v[k - 1]))
    if len(v) and above[0] and log_i[0] == target:
        return float(v[0])
    raise CriterionNotCrossed("criterion current %.3g A not crossed" % i_crit)


def extract_dibl(
    table_lin: TableLike,
    table_sat: TableLike,
    geom: FetGeometry = None,
    i_crit: float = None,
) -> float:
    """
    Signed DIBL (mV/V) from transfer sweeps at a low and a high drain bias

    Positive for conventional devices; NC devices can give a negative value.
    """
    vt_lin = extract_vt(table_lin, geom, i_crit)
    vt_sat = extract_vt(table_sat, geom, i_crit)
    if vt_lin == vt_sat:
        return 0.0
    vds_lin = _drain_bias(table_lin)
    vds_sat = _drain_bias(table_sat)
    if vds_sat == vds_lin:
        raise InvalidInput("DIBL needs two different drain biases")
    return (vt_lin - vt_sat) / (vds_sat - vds_lin) * 1000.0


def _gate_of_current(v: np.ndarray, i: np.ndarray):
    """
    Monotone envelope of a transfer curve as (log10 current, gate voltage) pairs for interpolation
    """
    with np.errstate(divide="ignore"):
        log_i = np.log10(i)
    finite = np.isfinite(log_i)
    v, log_i = v[finite], log_i[finite]
    envelope = np.maximum.accumulate(log_i)
    keep = np.concatenate(([True], envelope[1:] > envelope[:-1]))
    return envelope[keep], v[keep]


def hysteresis_width(
    up: TableLike,
    down: TableLike,
    i_lo: float = HYSTERESIS_WINDOW[0],
    i_hi: float = HYSTERESIS_WINDOW[1],
) -> float:
    """
    Maximum gate-voltage difference between up and down sweeps at equal current

    Currents are log-spaced over [i_lo, i_hi], restricted to the range both tables cover.

    :param up: Up sweep
    :type up: SweepTable | pd.DataFrame
    :param down: Down sweep
    :type down: SweepTable | pd.DataFrame
    :return: Hysteresis width (V)
    :rtype: float
    """
    log_up, v_up = _gate_of_current(*_transfer(up))
    log_down, v_down = _gate_of_current(*_transfer(down))
    if log_up.size < 2 or log_down.size < 2:
        raise WindowEmpty("tables too short for a hysteresis comparison")
    lo = max(math.log10(i_lo), log_up[0], log_down[0])
    hi = min(math.log10(i_hi), log_up[-1], log_down[-1])
    if hi < lo:
        raise WindowEmpty("tables do not span [%.3g, %.3g] A" % (i_lo, i_hi))
    levels = np.linspace(lo, hi, HYSTERESIS_POINTS)
    diff = np.interp(levels, log_up, v_up) - np.interp(levels, log_down, v_down)
    return float(np.max(np.abs(diff)))


def detect_ndr(table: TableLike) -> List[Tuple[float, float]]:
    """
    Maximal v_ds intervals of an output sweep where the current decreases

    :param table: Output sweep
    :type table: SweepTable | pd.DataFrame
    :return: (start, end) pairs at table grid points; empty when the curve is monotone
    :rtype: list
    """
    v, i = _output(table)
    slope = np.diff(i) / np.diff(v)
    intervals = []
    start = None
    for k, s in enumerate(slope):
        if s < 0 and start is None:
            start = k
        elif s >= 0 and start is not None:
            intervals.append((float(v[start]), float(v[k])))
            start = None
    if start is not None:
        intervals.append((float(v[start]), float(v[-1])))
    return intervals


def saturation_check(
    table: TableLike, v_dd: float, v_t: float = None
) -> SaturationResult:
    """
    Compare the output conductance at v_ds = v_dd with the largest conductance of the curve

    The curve saturates when the ratio is below 0.05. If the table carries the internal gate voltage and a conventional
    threshold v_t is given, the overdrive v_int - v_t is reported as the saturation-voltage estimate.

    :param table: Output sweep reaching v_dd
    :type table: SweepTable | pd.DataFrame
    :param v_dd: Supply voltage (V)
    :type v_dd: float
    :param v_t: Conventional threshold voltage (V)
    :type v_t: float
    :return: Saturation diagnostic
    :rtype: SaturationResult
    """
    v, i = _output(table)
    if v.size < 3:
        raise InvalidInput("output sweep needs at least three rows")
    slope = np.diff(i) / np.diff(v)
    k = int(np.argmin(np.abs(v - abs(v_dd))))
    k = max(k, 1)
    at_vdd = slope[k - 1]
    peak = np.max(slope)
    ratio = float(at_vdd / peak) if peak > 0 else 0.0
    frame = _frame(table)
    v_int = None
    v_dsat = None
    if "v_int_V" in frame.columns:
        order = np.argsort(np.abs(frame["v_ds_V"].to_numpy(dtype=float)), kind="stable")
        v_int = abs(float(frame["v_int_V"].to_numpy(dtype=float)[order][k]))
        if v_t is not None:
            v_dsat = v_int - v_t
    return SaturationResult(
        saturates=ratio < SATURATION_THRESHOLD,
        gds_ratio=ratio,
        v_int_at_vdd=v_int,
        v_dsat_estimate=v_dsat,
    )


# endregion


# region Device summary
def metric_sweeps(
    dev: NcFet, v_dd: float, step: float = 0.001, v_ds_lin: float = V_DS_LIN
) -> dict:
    """
    The three transfer sweeps behind DeviceMetrics: up and down at V_dd and up at the linear drain bias

    Gate and drain biases are negated for P devices.
    """
    s = dev.fet.sign
    jobs = [("up", v_dd), ("down", v_dd), ("lin", v_ds_lin)]

    def run(job):
        name, v_ds = job
        direction = "down" if name == "down" else "up"
        if s < 0:
            # Turn-on direction of a P device is descending gate voltage
            direction = "up" if direction == "down" else "down"
        return sweep_idvg(dev, 0.0, s * v_dd, step, s * v_ds, direction)

    up, down, lin = run_concurrently(run, jobs)
    return {"up": up, "down": down, "lin": lin}


def metrics_from_sweeps(
    up: TableLike,
    down: TableLike,
    lin: TableLike,
    geom: FetGeometry = None,
) -> DeviceMetrics:
    """
    Assemble DeviceMetrics from an up/down pair at V_dd and a linear-bias sweep
    """
    v, i = _transfer(up)
    try:
        ss = extract_ss(up)
    except WindowEmpty:
        logger.warning("SS window empty; reporting NaN")
        ss = float("nan")
    return DeviceMetrics(
        ss_min=ss,
        v_t=extract_vt(up, geom),
        dibl=extract_dibl(lin, up, geom),
        hysteresis=hysteresis_width(up, down),
        i_on=float(i[-1]),
        i_off=float(i[np.argmin(np.abs(v))]),
    )


def device_metrics(
    dev: NcFet, v_dd: float, step: float = 0.001, v_ds_lin: float = V_DS_LIN
) -> DeviceMetrics:
    """
    SS, threshold, DIBL, hysteresis, on and off current of one device

    :param dev: Device
    :type dev: NcFet
    :param v_dd: Supply voltage (V)
    :type v_dd: float
    :param step: Gate step of the sweeps (V)
    :type step: float
    :param v_ds_lin: Linear-region drain bias (V)
    :type v_ds_lin: float
    :return: Device metrics
    :rtype: DeviceMetrics
    """
    sweeps = metric_sweeps(dev, v_dd, step, v_ds_lin)
    return metrics_from_sweeps(sweeps["up"], sweeps["down"], sweeps["lin"], dev.fet.geom)


# endregion
