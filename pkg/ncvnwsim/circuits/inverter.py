"""
DC analysis of the inverter: transfer characteristic, gain, noise margins and circuit hysteresis
"""
# Standard library imports
import logging
from dataclasses import dataclass
from typing import Dict

# External imports
import numpy as np
import pandas as pd
from scipy.optimize import brentq

# Local imports
from ncvnwsim.errors import DegenerateVtc, InvalidInput, NcfetSimError, NonConvergence
from ncvnwsim.nc_device import NcFet, solve_static
from ncvnwsim.utils import parse_direction

logger = logging.getLogger(__name__)

KCL_ABS_TOL = 1e-13  # A
KCL_REL_TOL = 1e-9
KCL_MAX_ITER = 40
V_OUT_FD_STEP = 1e-6  # V
FALLBACK_POINTS = 281


@dataclass(frozen=True)
class Inverter:
    """
    Complementary inverter; either device may be conventional (lk = None)
    """

    nfet: NcFet
    pfet: NcFet
    v_dd: float

    def __post_init__(self):
        if not self.v_dd > 0:
            raise InvalidInput("v_dd must be positive, got %g" % self.v_dd)
        if self.nfet.fet.polarity != "n" or self.pfet.fet.polarity != "p":
            raise InvalidInput("inverter needs an N pull-down and a P pull-up")

    def with_supply(self, v_dd: float) -> "Inverter":
        return Inverter(self.nfet, self.pfet, v_dd)


@dataclass(frozen=True)
class VtcMetrics:
    """
    Figures of merit of an inverter transfer characteristic (V, except gain)
    """

    gain_max: float
    v_m: float
    nm_h: float
    nm_l: float
    vtc_hysteresis: float

    def to_dict(self) -> dict:
        return {
            "gain_max": self.gain_max,
            "v_m_V": self.v_m,
            "nm_h_V": self.nm_h,
            "nm_l_V": self.nm_l,
            "vtc_hysteresis_V": self.vtc_hysteresis,
        }


class _KclProblem:
    """
    Output-node current balance at one input voltage, carrying each device's continuation state
    """

    def __init__(self, inv: Inverter, state: Dict[str, float]):
        self.inv = inv
        self.state = state
        self.last = {}

    def residual(self, v_in: float, v_out: float, commit: bool = False) -> float:
        inv = self.inv
        n = solve_static(inv.nfet, v_in, v_out, guess=self.state.get("n"))
        p = solve_static(
            inv.pfet,
            v_in - inv.v_dd,
            v_out - inv.v_dd,
            guess=self.state.get("p"),
            direction="down",
        )
        if commit:
            self.state["n"] = n.v_int
            self.state["p"] = p.v_int
        self.last = {"n": n.i_ds, "p": p.i_ds}
        # Current into the output node from the pull-up minus current into the pull-down drain
        return -p.i_ds - n.i_ds

    def tolerance(self) -> float:
        scale = max(abs(self.last.get("n", 0.0)), abs(self.last.get("p", 0.0)))
        return KCL_ABS_TOL + KCL_REL_TOL * scale


def _solve_output(problem: _KclProblem, v_in: float, guess: float) -> float:
    """
    Damped Newton on v_out with a scan fallback that picks the root nearest the guess
    """
    v_dd = problem.inv.v_dd
    x = guess
    f = problem.residual(v_in, x)
    for iteration in range(KCL_MAX_ITER):
        if abs(f) < problem.tolerance():
            problem.residual(v_in, x, commit=True)
            return x
        df = (problem.residual(v_in, x + V_OUT_FD_STEP) - f) / V_OUT_FD_STEP
        if df >= 0 or not np.isfinite(df):
            break
        step = float(np.clip(-f / df, -0.1 * v_dd, 0.1 * v_dd))
        damping = 1.0
        while damping >= 1.0 / 64:
            x_new = x + damping * step
            f_new = problem.residual(v_in, x_new)
            if abs(f_new) < abs(f):
                break
            damping *= 0.5
        else:
            break
        x, f = x_new, f_new
    logger.debug("KCL Newton failed at v_in=%g, scanning v_out", v_in)
    grid = np.linspace(-0.05 * v_dd, 1.05 * v_dd, FALLBACK_POINTS)
    values = np.array([problem.residual(v_in, v) for v in grid])
    idx = np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) <= 0)[0]
    if idx.size == 0:
        raise NonConvergence("no output-node solution", {"v_in": v_in})
    roots = [
        brentq(lambda v: problem.residual(v_in, v), grid[k], grid[k + 1], xtol=1e-12)
        for k in idx
    ]
    best = min(roots, key=lambda r: abs(r - guess))
    problem.residual(v_in, best, commit=True)
    return best


def inverter_vtc(
    inv: Inverter,
    v_in_start: float,
    v_in_stop: float,
    step: float,
    direction: str = "up",
) -> pd.DataFrame:
    """
    Voltage transfer characteristic by output-node KCL with continuation

    Each input point starts from the previous output voltage and each device from its previous internal gate voltage,
    so up and down sweeps can settle on different branches.

    :param inv: Inverter
    :type inv: Inverter
    :param v_in_start: One end of the input range (V)
    :type v_in_start: float
    :param v_in_stop: Other end of the input range (V)
    :type v_in_stop: float
    :param step: Input step (V)
    :type step: float
    :param direction: "up" (ascending input) or "down"
    :type direction: str
    :return: Table with columns v_in_V, v_out_V, converged in sweep order
    :rtype: pd.DataFrame
    """
    if not step > 0:
        raise InvalidInput("step must be positive, got %g" % step)
    direction = parse_direction(direction)
    lo, hi = min(v_in_start, v_in_stop), max(v_in_start, v_in_stop)
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    grid = lo + step * np.arange(n)
    if direction == "down":
        grid = grid[::-1]
    state = {}
    problem = _KclProblem(inv, state)
    # Start from the rail the first input drives the output to
    v_out = inv.v_dd if grid[0] < 0.5 * inv.v_dd else 0.0
    rows = []
    for v_in in grid:
        v_in = float(v_in)
        try:
            v_out = _solve_output(problem, v_in, v_out)
        except NcfetSimError as err:
            raise err.with_context(v_in=v_in)
        rows.append({"v_in_V": v_in, "v_out_V": v_out, "converged": True})
    return pd.DataFrame(rows, columns=["v_in_V", "v_out_V", "converged"])


def _sorted_curve(table: pd.DataFrame):
    frame = table.sort_values("v_in_V", kind="stable")
    return frame["v_in_V"].to_numpy(dtype=float), frame["v_out_V"].to_numpy(dtype=float)


def _unity_points(v_in: np.ndarray, v_out: np.ndarray):
    gain = np.abs(np.gradient(v_out, v_in))
    excess = gain - 1.0
    points = []
    for k in range(len(excess) - 1):
        if excess[k] == 0:
            points.append(v_in[k])
        elif excess[k] * excess[k + 1] < 0:
            frac = excess[k] / (excess[k] - excess[k + 1])
            points.append(v_in[k] + frac * (v_in[k + 1] - v_in[k]))
    return points


def vtc_metrics(up: pd.DataFrame, down: pd.DataFrame, v_dd: float) -> VtcMetrics:
    """
    Gain, switching threshold, noise margins and hysteresis of an inverter transfer characteristic

    Gain is the largest central-difference slope magnitude of either sweep. The switching threshold and noise margins
    come from the up sweep; V_IL and V_IH are its first and last unity-gain points.

    :param up: Up sweep from inverter_vtc
    :type up: pd.DataFrame
    :param down: Down sweep from inverter_vtc
    :type down: pd.DataFrame
    :param v_dd: Supply voltage (V)
    :type v_dd: float
    :return: Transfer-curve metrics
    :rtype: VtcMetrics
    """
    v_in, v_out = _sorted_curve(up)
    d_in, d_out = _sorted_curve(down)
    gain_max = max(
        float(np.max(np.abs(np.gradient(v_out, v_in)))),
        float(np.max(np.abs(np.gradient(d_out, d_in)))),
    )
    unity = _unity_points(v_in, v_out)
    if len(unity) < 2:
        raise DegenerateVtc("transfer curve has fewer than two unity-gain points")
    v_il, v_ih = unity[0], unity[-1]
    v_oh = float(np.interp(v_il, v_in, v_out))
    v_ol = float(np.interp(v_ih, v_in, v_out))
    diff = v_out - v_in
    crossing = np.nonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) <= 0)[0]
    if crossing.size:
        k = int(crossing[0])
        if diff[k] == diff[k + 1]:
            v_m = float(v_in[k])
        else:
            frac = diff[k] / (diff[k] - diff[k + 1])
            v_m = float(v_in[k] + frac * (v_in[k + 1] - v_in[k]))
    else:
        v_m = float("nan")
    hysteresis = float(np.max(np.abs(np.interp(v_in, d_in, d_out) - v_out)))
    return VtcMetrics(
        gain_max=gain_max,
        v_m=v_m,
        nm_h=v_oh - v_ih,
        nm_l=v_il - v_ol,
        vtc_hysteresis=hysteresis,
    )
