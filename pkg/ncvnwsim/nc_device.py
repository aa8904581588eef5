"""
Negative-capacitance VNW-FET: the ferroelectric in series with the conventional device, coupled by charge balance
"""
# Standard library imports
import logging
import math
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional
from warnings import warn

# External imports
import numpy as np
import pandas as pd
from scipy.optimize import bisect, brentq

# Local imports
from ncvnwsim.errors import (
    InvalidInput,
    NcfetSimError,
    NoCrossing,
    NonConvergence,
    PredicateNotBracketed,
)
from ncvnwsim.fet_surrogate import FetParams, ids_and_q_gate, q_gate
from ncvnwsim.ferroelectric import (
    LkModel,
    SCurveRegion,
    classify_region,
    dv_fe_dq,
    v_fe_static,
)
from ncvnwsim.utils import NM2, parse_direction, thread_limit

logger = logging.getLogger(__name__)

V_INT_MIN = -2.0
V_INT_MAX = 2.0
SCAN_POINTS = 4000
ROOT_TOL = 1e-9  # V, coupling residual
DISTINCT_ROOTS = 1e-6  # V
NEWTON_MAX_ITER = 50
NEWTON_MIN_DAMPING = 1.0 / 64
NEWTON_MAX_STEP = 0.1  # V
FD_STEP = 1e-6  # V, finite-difference step of dq/dv_int
HYSTERESIS_THRESHOLD = 1e-3  # V

SWEEP_COLUMNS = [
    "v_gs_V",
    "v_ds_V",
    "i_ds_A",
    "v_int_V",
    "v_fe_V",
    "q_C",
    "p_C_per_m2",
    "quadrant",
    "mode",
    "branch",
    "iterations",
]


# region Domain types
@dataclass(frozen=True)
class NcFet:
    """
    NC VNW-FET; lk = None is the conventional device
    """

    fet: FetParams
    lk: Optional[LkModel] = None

    @property
    def is_conventional(self) -> bool:
        return self.lk is None

    def with_area(self, a_fe: float) -> "NcFet":
        """
        Copy with a different ferroelectric area (m²); an area of 0 gives the conventional device
        """
        if a_fe == 0:
            return NcFet(self.fet, None)
        if self.lk is None:
            raise InvalidInput("conventional device has no ferroelectric to resize")
        return NcFet(self.fet, self.lk.with_area(a_fe))

    def with_fet(self, fet: FetParams) -> "NcFet":
        return NcFet(fet, self.lk)


@dataclass(frozen=True)
class OperatingPoint:
    """
    One converged self-consistent bias point; v_int is the internal gate voltage relative to the source
    """

    v_gs: float
    v_ds: float
    v_int: float
    v_fe: float
    q: float
    p: float
    i_ds: float
    region: Optional[SCurveRegion]
    converged: bool = True
    iterations: int = 0
    multiple_roots: Optional[bool] = None


@dataclass
class SweepTable:
    """
    Ordered operating points of a continuation sweep

    variable is "v_gs" for transfer sweeps (fixed v_ds) and "v_ds" for output sweeps (fixed v_gs).
    """

    direction: str
    v_ds: Optional[float]
    rows: List[OperatingPoint] = field(default_factory=list)
    variable: str = "v_gs"
    v_gs: Optional[float] = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def to_frame(self) -> pd.DataFrame:
        """
        Table of rows with the sweep CSV columns
        """
        records = []
        for r in self.rows:
            records.append(
                {
                    "v_gs_V": r.v_gs,
                    "v_ds_V": r.v_ds,
                    "i_ds_A": r.i_ds,
                    "v_int_V": r.v_int,
                    "v_fe_V": r.v_fe,
                    "q_C": r.q,
                    "p_C_per_m2": r.p,
                    "quadrant": r.region.quadrant.value if r.region else "",
                    "mode": r.region.mode.value if r.region else "",
                    "branch": r.region.branch.value if r.region else "",
                    "iterations": r.iterations,
                }
            )
        return pd.DataFrame.from_records(records, columns=SWEEP_COLUMNS)


@dataclass(frozen=True)
class AttractorResult:
    """
    Crossover gate voltage of a family of transfer curves (V)
    """

    v_a: float
    spread: float
    q_zero_v: float
    crossings: tuple = ()


# endregion


# region Self-consistent solve
def _coupling(dev: NcFet, v_int, v_gs: float, v_ds: float):
    """
    Residual g(v_int) = v_int + v_fe(q_gate(v_int, v_ds)) - v_gs, vectorized over v_int
    """
    v_int = np.asarray(v_int, dtype=float)
    charge = np.asarray(q_gate(dev.fet, v_int, np.full_like(v_int, v_ds)))
    return v_int + np.asarray(v_fe_static(dev.lk, charge)) - v_gs


def _coupling_and_slope(dev: NcFet, x: float, v_gs: float, v_ds: float):
    charge = np.asarray(q_gate(dev.fet, np.array([x, x + FD_STEP]), np.array([v_ds, v_ds])))
    dq = (charge[1] - charge[0]) / FD_STEP
    g = x + v_fe_static(dev.lk, float(charge[0])) - v_gs
    dg = 1.0 + dv_fe_dq(dev.lk, float(charge[0])) * dq
    return g, dg


def _newton(dev: NcFet, v_gs: float, v_ds: float, guess: float):
    """
    Damped Newton on the coupling residual; returns (v_int, iterations) or None if it fails
    """
    x = float(guess)
    g, dg = _coupling_and_slope(dev, x, v_gs, v_ds)
    for iteration in range(1, NEWTON_MAX_ITER + 1):
        if abs(g) < ROOT_TOL:
            # One polishing step keeps the root accurate where the slope is small
            if dg != 0:
                x_p = x - g / dg
                g_p, dg_p = _coupling_and_slope(dev, x_p, v_gs, v_ds)
                if abs(g_p) <= abs(g):
                    x = x_p
            return x, iteration
        if dg == 0 or not math.isfinite(dg):
            return None
        step = -g / dg
        step = max(-NEWTON_MAX_STEP, min(NEWTON_MAX_STEP, step))
        damping = 1.0
        while damping >= NEWTON_MIN_DAMPING:
            x_new = x + damping * step
            if V_INT_MIN - 0.5 <= x_new <= V_INT_MAX + 0.5:
                g_new, dg_new = _coupling_and_slope(dev, x_new, v_gs, v_ds)
                if abs(g_new) < abs(g):
                    break
            damping *= 0.5
        else:
            return None
        x, g, dg = x_new, g_new, dg_new
    return None


def _operating_point(
    dev: NcFet, v_gs: float, v_ds: float, v_int: float, iterations: int, multiple=None
) -> OperatingPoint:
    current, charge = ids_and_q_gate(dev.fet, v_int, v_ds)
    if dev.is_conventional:
        return OperatingPoint(
            v_gs=v_gs,
            v_ds=v_ds,
            v_int=v_int,
            v_fe=0.0,
            q=0.0,
            p=0.0,
            i_ds=current,
            region=None,
            converged=True,
            iterations=iterations,
            multiple_roots=multiple,
        )
    return OperatingPoint(
        v_gs=v_gs,
        v_ds=v_ds,
        v_int=v_int,
        v_fe=v_fe_static(dev.lk, charge),
        q=charge,
        p=charge / dev.lk.geom.a_fe,
        i_ds=current,
        region=classify_region(dev.lk, charge),
        converged=True,
        iterations=iterations,
        multiple_roots=multiple,
    )


def _check_bias(v_gs: float, v_ds: float):
    if abs(v_gs) > 2.0 or abs(v_ds) > 2.0:
        raise InvalidInput("biases must satisfy |V| <= 2 V", {"v_gs": v_gs, "v_ds": v_ds})


def find_all_roots(dev: NcFet, v_gs: float, v_ds: float) -> List[OperatingPoint]:
    """
    All self-consistent internal-gate solutions at one bias, sorted by v_int

    The coupling residual is scanned on a uniform grid over [-2, 2] V and every sign change is refined by a bracketed
    root solve. An odd number of roots is expected; several roots mean the device is bistable at this bias.

    :param dev: Device
    :type dev: NcFet
    :param v_gs: External gate-source voltage (V)
    :type v_gs: float
    :param v_ds: Drain-source voltage (V)
    :type v_ds: float
    :return: Distinct operating points
    :rtype: list[OperatingPoint]
    """
    _check_bias(v_gs, v_ds)
    if dev.is_conventional:
        return [_operating_point(dev, v_gs, v_ds, v_gs, 0, False)]
    grid = np.linspace(V_INT_MIN, V_INT_MAX, SCAN_POINTS)
    g = _coupling(dev, grid, v_gs, v_ds)

    def g_scalar(x):
        return float(_coupling(dev, x, v_gs, v_ds))

    roots = []
    exact = set(np.nonzero(g == 0.0)[0].tolist())
    changes = np.nonzero(g[:-1] * g[1:] < 0)[0].tolist()
    for k in sorted(exact.union(changes)):
        if k in exact:
            roots.append(float(grid[k]))
        else:
            roots.append(brentq(g_scalar, grid[k], grid[k + 1], xtol=1e-14, rtol=1e-15))
    roots.sort()
    distinct = []
    for r in roots:
        if not distinct or r - distinct[-1] > DISTINCT_ROOTS:
            distinct.append(r)
    if not distinct:
        raise NonConvergence(
            "no self-consistent solution in [-2, 2] V", {"v_gs": v_gs, "v_ds": v_ds}
        )
    multiple = len(distinct) > 1
    return [_operating_point(dev, v_gs, v_ds, r, 0, multiple) for r in distinct]


def solve_static(
    dev: NcFet,
    v_gs: float,
    v_ds: float,
    guess: float = None,
    direction: str = "up",
) -> OperatingPoint:
    """
    Self-consistent steady state of the NC device

    Solves g(v_int) = v_int + v_fe_static(q_gate(v_int, v_ds)) - v_gs = 0. With a guess the root nearest the guess is
    returned (continuation). Without one, an up solve takes the first root of an ascending scan from v_int = -1 V and a
    down solve takes the highest root.

    :param dev: Device
    :type dev: NcFet
    :param v_gs: External gate-source voltage (V)
    :type v_gs: float
    :param v_ds: Drain-source voltage (V)
    :type v_ds: float
    :param guess: Internal gate voltage to continue from (V)
    :type guess: float
    :param direction: Branch choice for fresh solves, "up" or "down"
    :type direction: str
    :return: Converged operating point
    :rtype: OperatingPoint
    """
    _check_bias(v_gs, v_ds)
    if dev.is_conventional:
        return _operating_point(dev, v_gs, v_ds, v_gs, 0)
    if guess is not None:
        result = _newton(dev, v_gs, v_ds, guess)
        if result is not None:
            return _operating_point(dev, v_gs, v_ds, result[0], result[1])
        logger.debug("Newton failed at v_gs=%g v_ds=%g, falling back to scan", v_gs, v_ds)
        roots = find_all_roots(dev, v_gs, v_ds)
        best = min(roots, key=lambda r: abs(r.v_int - guess))
        return replace(best, iterations=NEWTON_MAX_ITER)
    roots = find_all_roots(dev, v_gs, v_ds)
    if len(roots) > 1:
        logger.debug("%d roots at v_gs=%g v_ds=%g, taking the %s branch", len(roots), v_gs, v_ds, direction)
    if parse_direction(direction) == "down":
        return roots[-1]
    ascending = [r for r in roots if r.v_int >= -1.0]
    return ascending[0] if ascending else roots[-1]


def v_int_from_charge(fet: FetParams, q: float, v_ds: float, guess: float = None) -> float:
    """
    Invert the gate charge: the internal gate voltage at which q_gate(v_int, v_ds) = q

    Newton iterations safeguarded by a shrinking bracket; q_gate is strictly increasing in v_int, so the root is
    unique.

    :param fet: Device parameters
    :type fet: FetParams
    :param q: Gate charge (C)
    :type q: float
    :param v_ds: Drain-source voltage (V)
    :type v_ds: float
    :param guess: Starting point (V)
    :type guess: float
    :return: Internal gate voltage (V)
    :rtype: float
    """
    lo, hi = V_INT_MIN - 1.0, V_INT_MAX + 1.0
    f_lo = q_gate(fet, lo, v_ds) - q
    f_hi = q_gate(fet, hi, v_ds) - q
    if f_lo > 0 or f_hi < 0:
        raise NonConvergence("gate charge %.3g C outside the invertible range" % q)
    x = 0.5 * (lo + hi) if guess is None else min(max(guess, lo), hi)
    scale = max(abs(q), 1e-21)
    for iteration in range(100):
        pair = np.asarray(q_gate(fet, np.array([x, x + FD_STEP]), np.array([v_ds, v_ds])))
        f = pair[0] - q
        if abs(f) <= 1e-12 * scale:
            return x
        if f > 0:
            hi = x
        else:
            lo = x
        slope = (pair[1] - pair[0]) / FD_STEP
        x_new = x - f / slope if slope > 0 else 0.5 * (lo + hi)
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if hi - lo < 1e-15:
            return x_new
        x = x_new
    raise NonConvergence("charge inversion did not converge", {"q": q, "v_ds": v_ds})


# endregion


# region Sweeps
def _grid(start: float, stop: float, step: float) -> np.ndarray:
    if not step > 0:
        raise InvalidInput("step must be positive, got %g" % step)
    lo, hi = min(start, stop), max(start, stop)
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def sweep_idvg(
    dev: NcFet,
    v_gs_start: float,
    v_gs_stop: float,
    step: float,
    v_ds: float,
    direction: str = "up",
) -> SweepTable:
    """
    Transfer-characteristic continuation sweep

    Each point is seeded with the previous point's internal gate voltage; the first point is a fresh solve. Up sweeps
    run from the lower to the upper gate voltage, down sweeps the other way.

    :param dev: Device
    :type dev: NcFet
    :param v_gs_start: One end of the gate range (V)
    :type v_gs_start: float
    :param v_gs_stop: Other end of the gate range (V)
    :type v_gs_stop: float
    :param step: Gate step (V), positive
    :type step: float
    :param v_ds: Drain bias (V)
    :type v_ds: float
    :param direction: "up" or "down"
    :type direction: str
    :return: Sweep table ordered in sweep order
    :rtype: SweepTable
    """
    direction = parse_direction(direction)
    grid = _grid(v_gs_start, v_gs_stop, step)
    if direction == "down":
        grid = grid[::-1]
    table = SweepTable(direction=direction, v_ds=v_ds, variable="v_gs")
    guess = None
    for v in grid:
        v = float(v)
        try:
            point = solve_static(dev, v, v_ds, guess=guess, direction=direction)
        except NcfetSimError as err:
            raise err.with_context(v_gs=v, v_ds=v_ds)
        if guess is not None and point.iterations >= NEWTON_MAX_ITER:
            warn("branch jump at v_gs=%.4f V (v_ds=%.3f V)" % (v, v_ds))
        guess = point.v_int
        table.rows.append(point)
    return table


def sweep_idvd(
    dev: NcFet,
    v_ds_start: float,
    v_ds_stop: float,
    step: float,
    v_gs: float,
) -> SweepTable:
    """
    Output-characteristic continuation sweep in v_ds at fixed v_gs, ascending from v_ds_start to v_ds_stop
    """
    grid = _grid(v_ds_start, v_ds_stop, step)
    if v_ds_start > v_ds_stop:
        grid = grid[::-1]
    direction = "up" if v_ds_stop >= v_ds_start else "down"
    table = SweepTable(direction=direction, v_ds=None, variable="v_ds", v_gs=v_gs)
    guess = None
    for v in grid:
        v = float(v)
        try:
            point = solve_static(dev, v_gs, v, guess=guess)
        except NcfetSimError as err:
            raise err.with_context(v_gs=v_gs, v_ds=v)
        guess = point.v_int
        table.rows.append(point)
    return table


def run_concurrently(func, items, max_workers: int = None, processes: bool = False) -> list:
    """
    Map func over independent items with a pool capped by NCFET_SIM_THREADS, preserving order

    Threads only overlap where numpy releases the GIL, which for the small arrays of a sweep is little of the work, so
    threads mostly overlap I/O and short jobs. Long CPU-bound jobs such as whole transient runs should pass
    processes=True; func must then be a module-level function and items must pickle.

    :param func: Function of one item
    :param items: Independent work items
    :param max_workers: Worker cap, defaults to the NCFET_SIM_THREADS limit
    :type max_workers: int
    :param processes: Use a process pool instead of threads
    :type processes: bool
    :return: func(item) for every item, in order
    :rtype: list
    """
    items = list(items)
    workers = max_workers or thread_limit()
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    executor = ProcessPoolExecutor if processes else ThreadPoolExecutor
    with executor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


# endregion


# region Attractor and critical area
def _q_zero_voltage(fet: FetParams, v_ds: float) -> float:
    def h(v):
        return q_gate(fet, v, v_ds)

    return brentq(h, V_INT_MIN, V_INT_MAX, xtol=1e-13)


def attractor_estimate(
    fet: FetParams,
    lk_base: LkModel,
    a_fe_list,
    v_ds: float,
    v_gs_start: float = 0.0,
    v_gs_stop: float = 0.7,
    step: float = 0.005,
) -> AttractorResult:
    """
    Gate voltage where the transfer curves of several ferroelectric areas intersect

    For each adjacent pair of areas the crossing is located by bisection on the log-current difference. The analytic
    prediction q_zero_v is the gate voltage where the gate charge, and so V_FE, vanishes.

    :param fet: Conventional device parameters
    :type fet: FetParams
    :param lk_base: Ferroelectric model; its area is replaced by each list entry
    :type lk_base: LkModel
    :param a_fe_list: Ferroelectric areas (nm²), at least two
    :type a_fe_list: list
    :param v_ds: Drain bias (V)
    :type v_ds: float
    :return: Mean crossing, spread and analytic prediction
    :rtype: AttractorResult
    """
    areas = [float(a) for a in a_fe_list]
    if len(areas) < 2:
        raise InvalidInput("attractor_estimate needs at least two areas")
    devices = [NcFet(fet, lk_base.with_area(a * NM2)) for a in areas]
    tables = run_concurrently(
        lambda d: sweep_idvg(d, v_gs_start, v_gs_stop, step, v_ds, "up"), devices
    )
    crossings = []
    for k in range(len(devices) - 1):
        dev_a, dev_b = devices[k], devices[k + 1]
        t_a, t_b = tables[k], tables[k + 1]
        v = t_a.column("v_gs")
        diff = np.log(np.abs(t_a.column("i_ds"))) - np.log(np.abs(t_b.column("i_ds")))
        idx = np.nonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0)[0]
        if idx.size == 0:
            raise NoCrossing(
                "curves for %g and %g nm² do not cross" % (areas[k], areas[k + 1]),
                {"v_ds": v_ds},
            )
        i = int(idx[0])
        va_int = t_a.column("v_int")
        vb_int = t_b.column("v_int")

        def h(x):
            guess_a = float(np.interp(x, v, va_int))
            guess_b = float(np.interp(x, v, vb_int))
            i_a = solve_static(dev_a, x, v_ds, guess=guess_a).i_ds
            i_b = solve_static(dev_b, x, v_ds, guess=guess_b).i_ds
            return math.log(abs(i_a)) - math.log(abs(i_b))

        crossings.append(bisect(h, float(v[i]), float(v[i + 1]), xtol=1e-9))
    crossings = np.array(crossings)
    return AttractorResult(
        v_a=float(np.mean(crossings)),
        spread=float(np.max(crossings) - np.min(crossings)),
        q_zero_v=_q_zero_voltage(fet, v_ds),
        crossings=tuple(float(c) for c in crossings),
    )


def has_hysteresis(
    dev: NcFet,
    v_ds: float,
    v_gs_start: float = 0.0,
    v_gs_stop: float = 0.7,
    step: float = 0.001,
    threshold: float = HYSTERESIS_THRESHOLD,
) -> bool:
    """
    Whether up and down transfer sweeps differ by more than threshold (V) at iso-current
    """
    # analysis imports this module, so the hysteresis extractor is imported here
    from ncvnwsim.analysis import hysteresis_width

    up, down = run_concurrently(
        lambda d: sweep_idvg(dev, v_gs_start, v_gs_stop, step, v_ds, d), ["up", "down"]
    )
    return hysteresis_width(up, down) > threshold


def critical_area(
    template: NcFet,
    search_lo: float,
    search_hi: float,
    v_ds: float,
    v_gs_start: float = 0.0,
    v_gs_stop: float = 0.7,
    step: float = 0.001,
) -> float:
    """
    Smallest ferroelectric area (nm²) without sweep hysteresis

    Bisection in log-area on the predicate hysteresis > 1 mV until the bracket is within 1 % relative.

    :param template: Device whose ferroelectric area is varied
    :type template: NcFet
    :param search_lo: Lower area (nm²), must be hysteretic
    :type search_lo: float
    :param search_hi: Upper area (nm²), must be hysteresis-free
    :type search_hi: float
    :param v_ds: Drain bias (V)
    :type v_ds: float
    :return: Critical area (nm²)
    :rtype: float
    """
    if not 0 < search_lo < search_hi:
        raise InvalidInput("need 0 < search_lo < search_hi")

    def predicate(area_nm2):
        return has_hysteresis(
            template.with_area(area_nm2 * NM2), v_ds, v_gs_start, v_gs_stop, step
        )

    lo, hi = float(search_lo), float(search_hi)
    if not predicate(lo) or predicate(hi):
        raise PredicateNotBracketed(
            "hysteresis must be present at %g nm² and absent at %g nm²" % (lo, hi)
        )
    while hi / lo > 1.01:
        mid = math.sqrt(lo * hi)
        if predicate(mid):
            lo = mid
        else:
            hi = mid
        logger.debug("critical area bracket [%.2f, %.2f] nm²", lo, hi)
    return math.sqrt(lo * hi)


# endregion
