"""
Landau-Khalatnikov model of the ferroelectric gate capacitor: calibration, static S-curve and region classification
"""
# Standard library imports
import enum
import logging
import math
from dataclasses import dataclass
from typing import Union

# External imports
import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

# Local imports
from ncvnwsim.errors import InvalidInput, NonConvergence

logger = logging.getLogger(__name__)

S_CURVE_COLUMNS = [
    "p_C_per_m2",
    "q_C",
    "e_V_per_m",
    "v_fe_V",
    "c_fe_F",
    "quadrant",
    "mode",
    "branch",
]


# region Domain types
@dataclass(frozen=True)
class LkCoefficients:
    """
    Static (alpha, beta, gamma) and kinetic (rho) Landau-Khalatnikov coefficients, SI units

    :param alpha: V·m/C, negative
    :param beta: V·m⁵/C³
    :param gamma: V·m⁹/C⁵, non-negative
    :param rho: V·m·s/C, positive
    """

    alpha: float
    beta: float
    gamma: float = 0.0
    rho: float = 5.0e-3

    def __post_init__(self):
        if not self.alpha < 0:
            raise InvalidInput("alpha must be negative, got %g" % self.alpha)
        if self.gamma < 0:
            raise InvalidInput("gamma must be non-negative, got %g" % self.gamma)
        # With gamma > 0 and alpha < 0 the quadratic in P² always has exactly one positive root
        if self.gamma == 0 and not self.beta > 0:
            raise InvalidInput("beta must be positive when gamma = 0")
        if not self.rho > 0:
            raise InvalidInput("rho must be positive, got %g" % self.rho)

    @property
    def p_r(self) -> float:
        """
        Remnant polarization, the positive nonzero root of the static field
        """
        return math.sqrt(_positive_quadratic_root(6 * self.gamma, 4 * self.beta, 2 * self.alpha))

    @property
    def p_inflection(self) -> float:
        """
        Polarization where dE/dP = 0, the edge of the negative-capacitance branch
        """
        return math.sqrt(
            _positive_quadratic_root(30 * self.gamma, 12 * self.beta, 2 * self.alpha)
        )

    @property
    def e_c(self) -> float:
        """
        Coercive field, the magnitude of the static field at the inner-lobe extremum
        """
        return abs(float(e_field(self, self.p_inflection)))


@dataclass(frozen=True)
class FerroGeometry:
    """
    Ferroelectric film thickness t_fe (m) and area a_fe (m²)
    """

    t_fe: float
    a_fe: float

    def __post_init__(self):
        if not self.t_fe > 0:
            raise InvalidInput("t_fe must be positive, got %g" % self.t_fe)
        if not self.a_fe > 0:
            raise InvalidInput("a_fe must be positive, got %g" % self.a_fe)


@dataclass(frozen=True)
class LkModel:
    """
    A calibrated ferroelectric film with its geometry
    """

    coeffs: LkCoefficients
    geom: FerroGeometry

    def with_area(self, a_fe: float) -> "LkModel":
        """
        Return a copy of the model with a different ferroelectric area (m²)
        """
        return LkModel(self.coeffs, FerroGeometry(self.geom.t_fe, a_fe))

    @property
    def r_eq(self) -> float:
        """
        Equivalent ferroelectric resistance rho·t_fe/a_fe (ohm)
        """
        return self.coeffs.rho * self.geom.t_fe / self.geom.a_fe


@dataclass(frozen=True)
class FerroState:
    """
    Ferroelectric charge q (C); polarization is derived from it
    """

    q: float
    a_fe: float

    @property
    def p(self) -> float:
        return self.q / self.a_fe


class Quadrant(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"


class Mode(str, enum.Enum):
    DIMINUTION = "Diminution"
    AMPLIFICATION = "Amplification"


class Branch(str, enum.Enum):
    NEGATIVE_CAPACITANCE = "NegativeCapacitance"
    POSITIVE_CAPACITANCE = "PositiveCapacitance"


@dataclass(frozen=True)
class SCurveRegion:
    """
    Location of a ferroelectric state on the S-curve
    """

    quadrant: Quadrant
    mode: Mode
    branch: Branch


# endregion


# region Static model
def calibrate_lk(
    p_r: float, e_c: float, gamma: float = 0.0, rho: float = 5.0e-3
) -> LkCoefficients:
    """
    Calibrate the static coefficients from remnant polarization and coercive field

    For gamma = 0 the closed forms alpha = -(3√3/4)·e_c/p_r and beta = (3√3/8)·e_c/p_r³ are used. For gamma > 0,
    alpha is eliminated through E(p_r) = 0 and beta is found by a bracketed root solve on the inner-lobe extremum.

    :param p_r: Remnant polarization (C/m²)
    :type p_r: float
    :param e_c: Coercive field (V/m)
    :type e_c: float
    :param gamma: Sixth-order coefficient (V·m⁹/C⁵)
    :type gamma: float
    :param rho: Kinetic coefficient (Ω·m)
    :type rho: float
    :return: Calibrated coefficients
    :rtype: LkCoefficients
    """
    if not p_r > 0:
        raise InvalidInput("p_r must be positive, got %g" % p_r)
    if not e_c > 0:
        raise InvalidInput("e_c must be positive, got %g" % e_c)
    if gamma < 0:
        raise InvalidInput("gamma must be non-negative, got %g" % gamma)
    if not rho > 0:
        raise InvalidInput("rho must be positive, got %g" % rho)
    sqrt27 = 3.0 * math.sqrt(3.0)
    if gamma == 0:
        alpha = -(sqrt27 / 4.0) * e_c / p_r
        beta = (sqrt27 / 8.0) * e_c / p_r**3
        return LkCoefficients(alpha=alpha, beta=beta, gamma=0.0, rho=rho)

    def _alpha(beta):
        return -2.0 * beta * p_r**2 - 3.0 * gamma * p_r**4

    def _lobe_residual(beta):
        alpha = _alpha(beta)
        p_m = math.sqrt(_positive_quadratic_root(30 * gamma, 12 * beta, 2 * alpha))
        e_m = 2 * alpha * p_m + 4 * beta * p_m**3 + 6 * gamma * p_m**5
        return -e_m - e_c

    beta_lo = -1.5 * gamma * p_r**2
    # Lower end of the admissible range, nudged inside
    beta_lo = beta_lo + 1e-12 * max(abs(beta_lo), (sqrt27 / 8.0) * e_c / p_r**3)
    beta_hi = (sqrt27 / 8.0) * e_c / p_r**3
    try:
        if _lobe_residual(beta_lo) > 0:
            raise NonConvergence(
                "coercive field %g V/m is below the minimum reachable with gamma=%g"
                % (e_c, gamma)
            )
        for _ in range(200):
            if _lobe_residual(beta_hi) > 0:
                break
            beta_hi *= 2.0
        else:
            raise NonConvergence("could not bracket beta for gamma=%g" % gamma)
        beta = brentq(
            _lobe_residual, beta_lo, beta_hi, xtol=1e-300, rtol=1e-15, maxiter=500
        )
    except (RuntimeError, ValueError) as err:
        if isinstance(err, NonConvergence):
            raise
        raise NonConvergence("LK calibration failed: %s" % err, {"gamma": gamma})
    logger.debug("calibrated LK with gamma=%g: beta=%g", gamma, beta)
    return LkCoefficients(alpha=_alpha(beta), beta=beta, gamma=gamma, rho=rho)


def e_field(coeffs: LkCoefficients, p: Union[float, np.ndarray]):
    """
    Static Landau field E = 2αP + 4βP³ + 6γP⁵ (V/m)
    """
    p = np.asarray(p, dtype=float)
    p2 = p * p
    e = p * (2 * coeffs.alpha + p2 * (4 * coeffs.beta + 6 * coeffs.gamma * p2))
    return float(e) if e.ndim == 0 else e


def v_fe_static(model: LkModel, q: Union[float, np.ndarray]):
    """
    Static voltage across the ferroelectric for charge q (V)
    """
    p = np.asarray(q, dtype=float) / model.geom.a_fe
    v = model.geom.t_fe * np.asarray(e_field(model.coeffs, p))
    return float(v) if v.ndim == 0 else v


def dv_fe_dq(model: LkModel, q: Union[float, np.ndarray]):
    """
    Analytic derivative of v_fe_static with respect to charge (V/C); its inverse is the ferroelectric capacitance
    """
    c = model.coeffs
    p = np.asarray(q, dtype=float) / model.geom.a_fe
    p2 = p * p
    d = model.geom.t_fe * (2 * c.alpha + p2 * (12 * c.beta + 30 * c.gamma * p2))
    d = d / model.geom.a_fe
    return float(d) if d.ndim == 0 else d


def _positive_quadratic_root(a: float, b: float, c: float) -> float:
    """
    Positive root x of a·x² + b·x + c = 0 with c < 0, computed without cancellation
    """
    if a == 0:
        return -c / b
    disc = math.sqrt(b * b - 4 * a * c)
    q = -0.5 * (b + math.copysign(disc, b))
    roots = (q / a, c / q)
    return max(roots)


# endregion


# region Region classification
def _quadrant(p: float, v: float, previous: Quadrant = None) -> Quadrant:
    if p > 0:
        return Quadrant.I if v > 0 else Quadrant.II
    if p < 0:
        return Quadrant.III if v < 0 else Quadrant.IV
    return previous if previous is not None else Quadrant.II


def _region(quadrant: Quadrant, slope: float) -> SCurveRegion:
    mode = (
        Mode.DIMINUTION
        if quadrant in (Quadrant.I, Quadrant.IV)
        else Mode.AMPLIFICATION
    )
    branch = (
        Branch.NEGATIVE_CAPACITANCE if slope < 0 else Branch.POSITIVE_CAPACITANCE
    )
    return SCurveRegion(quadrant=quadrant, mode=mode, branch=branch)


def classify_region(model: LkModel, q: float) -> SCurveRegion:
    """
    Classify a ferroelectric charge into S-curve quadrant, mode and branch

    Quadrants use V_FE on the horizontal axis and P on the vertical axis. Zero V_FE with positive P is quadrant II,
    zero V_FE with negative P is quadrant IV, and zero P is quadrant II.

    :param model: Ferroelectric model
    :type model: LkModel
    :param q: Ferroelectric charge (C)
    :type q: float
    :return: The region of the state
    :rtype: SCurveRegion
    """
    p = q / model.geom.a_fe
    quadrant = _quadrant(p, v_fe_static(model, q))
    return _region(quadrant, dv_fe_dq(model, q))


def s_curve_table(
    model: LkModel, p_min: float, p_max: float, points: int
) -> pd.DataFrame:
    """
    Tabulate the static S-curve on a uniform polarization grid

    :param model: Ferroelectric model
    :type model: LkModel
    :param p_min: Lowest polarization (C/m²)
    :type p_min: float
    :param p_max: Highest polarization (C/m²)
    :type p_max: float
    :param points: Number of grid points, at least 2
    :type points: int
    :return: Table with columns p_C_per_m2, q_C, e_V_per_m, v_fe_V, c_fe_F, quadrant, mode, branch, ordered by p
    :rtype: pd.DataFrame
    """
    if points < 2:
        raise InvalidInput("points must be at least 2, got %d" % points)
    if not p_min < p_max:
        raise InvalidInput("p_min must be below p_max")
    p = np.linspace(p_min, p_max, int(points))
    q = p * model.geom.a_fe
    e = np.asarray(e_field(model.coeffs, p))
    v = model.geom.t_fe * e
    slope = np.asarray(dv_fe_dq(model, q))
    with np.errstate(divide="ignore"):
        c_fe = 1.0 / slope
    quadrants, modes, branches = [], [], []
    previous = None
    for p_i, v_i, s_i in zip(p, v, slope):
        region = _region(_quadrant(p_i, v_i, previous), s_i)
        previous = region.quadrant
        quadrants.append(region.quadrant.value)
        modes.append(region.mode.value)
        branches.append(region.branch.value)
    return pd.DataFrame(
        {
            "p_C_per_m2": p,
            "q_C": q,
            "e_V_per_m": e,
            "v_fe_V": v,
            "c_fe_F": c_fe,
            "quadrant": quadrants,
            "mode": modes,
            "branch": branches,
        },
        columns=S_CURVE_COLUMNS,
    )


# endregion


# region Dynamics
def pv_loop(
    model: LkModel,
    v_amplitude: float = 1.5,
    frequency: float = 1.0e8,
    points: int = 801,
    cycles: int = 2,
    initial: FerroState = None,
) -> pd.DataFrame:
    """
    Integrate the time-dependent LK equation of a bare ferroelectric capacitor under a triangular voltage drive

    The film starts from initial, by default at negative remnant polarization, and follows rho·dP/dt = V(t)/t_fe - E(P).
    The returned trajectory traces the hysteretic P-V loop; for slow drives it follows the stable branches of the
    S-curve.

    :param model: Ferroelectric model
    :type model: LkModel
    :param v_amplitude: Peak drive voltage (V)
    :type v_amplitude: float
    :param frequency: Drive frequency (Hz)
    :type frequency: float
    :param points: Number of output samples
    :type points: int
    :param cycles: Number of drive periods
    :type cycles: int
    :param initial: Starting charge of the film
    :type initial: FerroState
    :return: Table with columns t_s, v_fe_V, p_C_per_m2
    :rtype: pd.DataFrame
    """
    if not (v_amplitude > 0 and frequency > 0 and points >= 2 and cycles >= 1):
        raise InvalidInput("pv_loop needs positive amplitude, frequency and cycles")
    c = model.coeffs
    t_fe = model.geom.t_fe
    period = 1.0 / frequency
    if initial is None:
        initial = FerroState(q=-c.p_r * model.geom.a_fe, a_fe=model.geom.a_fe)
    elif not math.isclose(initial.a_fe, model.geom.a_fe, rel_tol=1e-12):
        raise InvalidInput("initial state area does not match the ferroelectric area")

    def drive(t):
        # Triangle wave starting at 0 and rising to +v_amplitude at a quarter period
        phase = (t / period + 0.25) % 1.0
        return v_amplitude * (1.0 - 4.0 * abs(phase - 0.5))

    def rhs(t, y):
        return [(drive(t) / t_fe - e_field(c, y[0])) / c.rho]

    def jac(t, y):
        p2 = y[0] * y[0]
        return [[-(2 * c.alpha + p2 * (12 * c.beta + 30 * c.gamma * p2)) / c.rho]]

    t_eval = np.linspace(0.0, cycles * period, int(points))
    sol = solve_ivp(
        rhs,
        (0.0, cycles * period),
        [initial.p],
        method="Radau",
        t_eval=t_eval,
        jac=jac,
        rtol=1e-8,
        atol=1e-10 * c.p_r,
        max_step=period / 200.0,
    )
    if not sol.success:
        raise NonConvergence("P-V loop integration failed: %s" % sol.message)
    v = np.array([drive(t) for t in sol.t])
    return pd.DataFrame({"t_s": sol.t, "v_fe_V": v, "p_C_per_m2": sol.y[0]})


# endregion
