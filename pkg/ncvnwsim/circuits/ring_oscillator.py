"""
Transient simulation of a ring oscillator with Landau-Khalatnikov polarization dynamics in every NC gate
"""
# Standard library imports
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

# External imports
import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid

# Local imports
from ncvnwsim.circuits.inverter import Inverter
from ncvnwsim.errors import InvalidInput, NcfetSimError, NonConvergence, NoOscillation
from ncvnwsim.fet_surrogate import ids_and_q_gate
from ncvnwsim.ferroelectric import v_fe_static
from ncvnwsim.nc_device import NcFet, solve_static

logger = logging.getLogger(__name__)

SETTLE_FRACTION = 0.3
EASY_NEWTON_ITER = 3
DT_GROWTH = 1.3
CONVENTIONAL_TOL = 1e-9  # V, internal gate tied to the external gate


# region Domain types
@dataclass(frozen=True)
class RingOscillator:
    """
    Ring of identical inverter stages loaded by a wire capacitance at every node
    """

    inverter: Inverter
    stages: int = 7
    c_wire: float = 3e-15

    def __post_init__(self):
        if self.stages < 3 or self.stages % 2 == 0:
            raise InvalidInput("stages must be odd and at least 3, got %d" % self.stages)
        if not self.c_wire > 0:
            raise InvalidInput("c_wire must be positive")

    def with_supply(self, v_dd: float) -> "RingOscillator":
        return replace(self, inverter=self.inverter.with_supply(v_dd))


@dataclass(frozen=True)
class TransientConfig:
    """
    Backward-Euler integration settings (s, A)
    """

    t_stop: float = 20e-9
    dt_init: float = 1e-12
    dt_min: float = 1e-15
    dt_max: float = 5e-12
    newton_tol: float = 1e-10
    max_newton: int = 12

    def __post_init__(self):
        if not self.t_stop > 0:
            raise InvalidInput("t_stop must be positive")
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise InvalidInput("need 0 < dt_min <= dt_init <= dt_max")
        if not self.newton_tol > 0 or self.max_newton < 1:
            raise InvalidInput("newton_tol and max_newton must be positive")


@dataclass
class TransientTrace:
    """
    Time series of a transient run

    v_nodes has one column per node, q_fe one column per NC device (labels in devices), i_vdd is the supply current.
    """

    t: np.ndarray
    v_nodes: np.ndarray
    q_fe: np.ndarray
    i_vdd: np.ndarray
    devices: List[str] = field(default_factory=list)
    kcl_residual: Optional[np.ndarray] = None

    def to_frame(self) -> pd.DataFrame:
        data = {"t_s": self.t}
        for k in range(self.v_nodes.shape[1]):
            data["v_node%d_V" % k] = self.v_nodes[:, k]
        for k in range(self.q_fe.shape[1]):
            data["q_dev%d_C" % k] = self.q_fe[:, k]
        data["i_vdd_A"] = self.i_vdd
        return pd.DataFrame(data)


@dataclass(frozen=True)
class RoMetrics:
    period: float
    delay_per_stage: float
    energy_per_cycle: float
    cycles: int


# endregion


# region Coupled system
class _RingSystem:
    """
    Backward-Euler residual of the ring: node voltages plus one internal-gate voltage per device

    Unknowns are laid out as [v_0..v_N-1, w_n0..w_nN-1, w_p0..w_pN-1]. The ferroelectric charge of an NC device is
    q_gate(w, v_ds), so w carries the polarization state. Conventional devices tie w to the external gate.
    """

    def __init__(self, ro: RingOscillator):
        self.ro = ro
        self.n = ro.stages
        self.v_dd = ro.inverter.v_dd
        self.nfet: NcFet = ro.inverter.nfet
        self.pfet: NcFet = ro.inverter.pfet

    def split(self, x):
        n = self.n
        return x[..., :n], x[..., n : 2 * n], x[..., 2 * n :]

    def devices(self, x):
        """
        Currents and charges of all devices for states x (..., 3N)
        """
        v, w_n, w_p = self.split(x)
        v_in = np.roll(v, 1, axis=-1)
        vgs_n, vds_n = v_in, v
        vgs_p, vds_p = v_in - self.v_dd, v - self.v_dd
        gate_n = vgs_n if self.nfet.is_conventional else w_n
        gate_p = vgs_p if self.pfet.is_conventional else w_p
        i_n, q_n = ids_and_q_gate(self.nfet.fet, gate_n, vds_n)
        i_p, q_p = ids_and_q_gate(self.pfet.fet, gate_p, vds_p)
        return {
            "vgs_n": vgs_n,
            "vgs_p": vgs_p,
            "i_n": np.asarray(i_n),
            "i_p": np.asarray(i_p),
            "q_n": np.asarray(q_n),
            "q_p": np.asarray(q_p),
        }

    def _state_residual(self, dev: NcFet, w, vgs, q, q_prev, dt):
        if dev.is_conventional:
            return w - vgs
        return (q - q_prev) / dt - (vgs - w - v_fe_static(dev.lk, q)) / dev.lk.r_eq

    def residual(self, x, prev: dict, dt: float):
        """
        Residual for states x (..., 3N) given the accepted previous step
        """
        v, w_n, w_p = self.split(x)
        d = self.devices(x)
        gate_current = (d["q_n"] + d["q_p"] - prev["q_n"] - prev["q_p"]) / dt
        kcl = (
            self.ro.c_wire * (v - prev["v"]) / dt
            - (-d["i_p"] - d["i_n"] - np.roll(gate_current, -1, axis=-1))
        )
        r_n = self._state_residual(self.nfet, w_n, d["vgs_n"], d["q_n"], prev["q_n"], dt)
        r_p = self._state_residual(self.pfet, w_p, d["vgs_p"], d["q_p"], prev["q_p"], dt)
        return np.concatenate([kcl, r_n, r_p], axis=-1), d

    def converged(self, r: np.ndarray, tol: float) -> bool:
        n = self.n
        if np.max(np.abs(r[:n])) >= tol:
            return False
        for dev, part in ((self.nfet, r[n : 2 * n]), (self.pfet, r[2 * n :])):
            limit = CONVENTIONAL_TOL if dev.is_conventional else tol
            if np.max(np.abs(part)) >= limit:
                return False
        return True

    def initial_state(self) -> np.ndarray:
        """
        Alternate nodes at 0.9·v_dd and 0.1·v_dd, devices at their static solution for that bias
        """
        n = self.n
        v = np.array([0.9 * self.v_dd if k % 2 == 0 else 0.1 * self.v_dd for k in range(n)])
        v_in = np.roll(v, 1)
        w_n = np.empty(n)
        w_p = np.empty(n)
        for k in range(n):
            w_n[k] = solve_static(self.nfet, v_in[k], v[k]).v_int
            w_p[k] = solve_static(
                self.pfet, v_in[k] - self.v_dd, v[k] - self.v_dd, direction="down"
            ).v_int
        return np.concatenate([v, w_n, w_p])

    def step(self, x0: np.ndarray, prev: dict, dt: float, cfg: TransientConfig):
        """
        Newton solve of one backward-Euler step; returns (x, devices, kcl, iterations) or None
        """
        x = x0.copy()
        max_move = 0.2 * self.v_dd
        for iteration in range(cfg.max_newton + 1):
            h = 1e-7 * np.maximum(1.0, np.abs(x))
            batch = np.vstack([x, x + np.diag(h)])
            try:
                r_all, d_all = self.residual(batch, prev, dt)
            except NcfetSimError:
                return None
            r = r_all[0]
            if not np.all(np.isfinite(r)):
                return None
            if self.converged(r, cfg.newton_tol):
                d = {k: val[0] for k, val in d_all.items()}
                return x, d, r[: self.n], iteration
            if iteration == cfg.max_newton:
                return None
            jac = ((r_all[1:] - r) / h[:, None]).T
            try:
                dx = np.linalg.solve(jac, -r)
            except np.linalg.LinAlgError:
                return None
            largest = np.max(np.abs(dx))
            if largest > max_move:
                dx *= max_move / largest
            x = x + dx
            if not np.all(np.isfinite(x)):
                return None
        return None


# endregion


def _rising_crossings(t: np.ndarray, v: np.ndarray, level: float) -> np.ndarray:
    below = v[:-1] < level
    above = v[1:] >= level
    idx = np.nonzero(below & above)[0]
    frac = (level - v[idx]) / (v[idx + 1] - v[idx])
    return t[idx] + frac * (t[idx + 1] - t[idx])


def ro_transient(ro: RingOscillator, cfg: TransientConfig = None) -> TransientTrace:
    """
    Integrate the ring oscillator with backward Euler and adaptive time steps

    Per node: c_wire·dv/dt = I_pullup - I_pulldown - I_gate,next. Per NC device:
    dq/dt = (a_fe/(rho·t_fe))·(v_gate - v_int - v_fe_static(q)). Newton runs on the full state every step; the step
    halves on Newton failure and grows by 1.3 after easy steps, within [dt_min, dt_max].

    :param ro: Ring oscillator
    :type ro: RingOscillator
    :param cfg: Integration settings
    :type cfg: TransientConfig
    :return: Trace of node voltages, ferroelectric charges and supply current
    :rtype: TransientTrace
    """
    cfg = cfg or TransientConfig()
    system = _RingSystem(ro)
    n = system.n
    x = system.initial_state()
    d = {k: np.asarray(val) for k, val in system.devices(x).items()}
    prev = {"v": x[:n], "q_n": d["q_n"], "q_p": d["q_p"]}

    nc_labels = []
    if not system.nfet.is_conventional:
        nc_labels += ["n%d" % k for k in range(n)]
    if not system.pfet.is_conventional:
        nc_labels += ["p%d" % k for k in range(n)]

    def charges(dd):
        parts = []
        if not system.nfet.is_conventional:
            parts.append(dd["q_n"])
        if not system.pfet.is_conventional:
            parts.append(dd["q_p"])
        return np.concatenate(parts) if parts else np.empty(0)

    times = [0.0]
    nodes = [x[:n].copy()]
    q_fe = [charges(d)]
    i_vdd = [float(np.sum(-d["i_p"]))]
    kcl = [0.0]

    t = 0.0
    dt = cfg.dt_init
    while t < cfg.t_stop * (1 - 1e-12):
        dt = min(dt, cfg.t_stop - t)
        result = system.step(x, prev, dt, cfg)
        if result is None:
            dt *= 0.5
            if dt < cfg.dt_min:
                raise NonConvergence(
                    "time step fell below dt_min", {"t": t, "v_dd": system.v_dd}
                )
            continue
        x, d, r_kcl, iterations = result
        supply = float(np.sum(-d["i_p"]) - np.sum((d["q_p"] - prev["q_p"]) / dt))
        t += dt
        prev = {"v": x[:n].copy(), "q_n": d["q_n"], "q_p": d["q_p"]}
        times.append(t)
        nodes.append(x[:n].copy())
        q_fe.append(charges(d))
        i_vdd.append(supply)
        kcl.append(float(np.max(np.abs(r_kcl))))
        if iterations <= EASY_NEWTON_ITER:
            dt = min(dt * DT_GROWTH, cfg.dt_max)
    trace = TransientTrace(
        t=np.array(times),
        v_nodes=np.vstack(nodes),
        q_fe=np.vstack(q_fe) if nc_labels else np.empty((len(times), 0)),
        i_vdd=np.array(i_vdd),
        devices=nc_labels,
        kcl_residual=np.array(kcl),
    )
    if _rising_crossings(trace.t, trace.v_nodes[:, 0], 0.5 * system.v_dd).size == 0:
        raise NoOscillation("node 0 never crosses v_dd/2 upward", {"v_dd": system.v_dd})
    logger.info("ring oscillator transient: %d steps to %.3g s", len(times) - 1, t)
    return trace


def ro_metrics(trace: TransientTrace, ro: RingOscillator) -> RoMetrics:
    """
    Period, stage delay and supply energy per cycle of a settled oscillation

    The first 30 % of the trace is discarded. The period is the mean spacing of rising crossings of node 0 through
    v_dd/2; the energy integrates v_dd·i_vdd (trapezoidal) between the first and last of those crossings.

    :param trace: Transient trace
    :type trace: TransientTrace
    :param ro: Ring oscillator that produced it
    :type ro: RingOscillator
    :return: Oscillation metrics
    :rtype: RoMetrics
    """
    v_dd = ro.inverter.v_dd
    t = np.asarray(trace.t, dtype=float)
    t_settle = t[0] + SETTLE_FRACTION * (t[-1] - t[0])
    crossings = _rising_crossings(t, trace.v_nodes[:, 0], 0.5 * v_dd)
    crossings = crossings[crossings >= t_settle]
    if crossings.size < 2:
        raise NoOscillation(
            "fewer than two settled rising crossings", {"v_dd": v_dd}
        )
    period = float(np.mean(np.diff(crossings)))
    energy = cumulative_trapezoid(v_dd * np.asarray(trace.i_vdd), t, initial=0.0)
    cycles = crossings.size - 1
    total = float(np.interp(crossings[-1], t, energy) - np.interp(crossings[0], t, energy))
    return RoMetrics(
        period=period,
        delay_per_stage=period / (2 * ro.stages),
        energy_per_cycle=total / cycles,
        cycles=cycles,
    )
