"""
Experiment configuration: TOML loading with defaults, dotted-key overrides, validation, echo-back and model builders
"""
# Standard library imports
import functools
import logging
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple, Union

# External imports
import tomli_w

# Local imports
from ncvnwsim.errors import NcfetSimError, ParseError, ValidationError
from ncvnwsim.fet_surrogate import (
    FetGeometry,
    FetParams,
    FetTargets,
    apply_workfunction,
    calibrate_fet,
)
from ncvnwsim.ferroelectric import FerroGeometry, LkModel, calibrate_lk
from ncvnwsim.nc_device import NcFet
from ncvnwsim.utils import (
    FF,
    FS,
    MV_PER_CM,
    NM,
    NM2,
    NS,
    PS,
    UC_PER_CM2,
    parse_direction,
)

logger = logging.getLogger(__name__)

SOURCE_TABLE = "_source"
ORIGINS = ("default", "published", "file", "override")


def _published(default):
    """Field whose default is a value stated for the published device"""
    return field(default=default, metadata={"published": True})


# region Sections
@dataclass(frozen=True)
class FerroConfig:
    p_r_uC_cm2: float = 17.0
    e_c_MV_cm: float = 1.1
    gamma: float = 0.0
    rho: float = 5.0e-3
    t_fe_nm: float = 5.0
    a_fe_nm2: float = _published(500.0)
    a_fe_list: Tuple[float, ...] = _published((2000.0, 1000.0, 700.0, 500.0))


@dataclass(frozen=True)
class FetConfig:
    v_dd: float = 0.7
    i_off_A: float = 1e-8
    i_on_A: float = 4e-5
    ss_mV_dec: float = 68.0
    dibl_mV_V: float = 30.0
    wf_eV: float = 4.28
    wf_ref_eV: float = 4.28
    r_sd_ohm: float = _published(4000.0)
    l_g_nm: float = _published(12.0)
    d_nw_nm: float = _published(6.0)
    eot_nm: float = _published(0.8)
    l_ov_nm: float = _published(2.0)
    n_wires: int = _published(3)
    v_t0: Optional[float] = None
    n_slope: Optional[float] = None
    sigma_dibl: Optional[float] = None
    i_sp_A: Optional[float] = None

    @property
    def explicit(self) -> bool:
        return all(
            v is not None for v in (self.v_t0, self.n_slope, self.sigma_dibl, self.i_sp_A)
        )


@dataclass(frozen=True)
class CircuitConfig:
    stages: int = _published(7)
    c_wire_fF: float = _published(3.0)
    v_dd: float = 0.7
    v_dd_list: Tuple[float, ...] = (0.3, 0.4, 0.5, 0.6, 0.7)
    a_fe_nm2: float = _published(700.0)
    wf_n_eV: Optional[float] = _published(4.18)
    wf_p_eV: Optional[float] = None


@dataclass(frozen=True)
class SweepConfig:
    v_gs_start: float = 0.0
    v_gs_stop: float = 0.7
    step: float = 0.001
    v_ds_list: Tuple[float, ...] = (0.05, 0.7)
    directions: Tuple[str, ...] = ("up", "down")
    wf_list_eV: Tuple[float, ...] = ()
    v_gs_list: Tuple[float, ...] = (0.1, 0.2, 0.7)
    v_ds_step: float = 0.005
    critical_lo_nm2: float = 50.0
    critical_hi_nm2: float = 2000.0


@dataclass(frozen=True)
class TransientSection:
    t_stop_ns: float = 20.0
    dt_init_ps: float = 1.0
    dt_min_fs: float = 1.0
    dt_max_ps: float = 5.0
    newton_tol: float = 1e-10
    max_newton: int = 12


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "results"
    precision: int = 9


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Validated experiment configuration in config units; sources maps each dotted key to file, override, default or
    published and does not take part in equality
    """

    ferro: FerroConfig = field(default_factory=FerroConfig)
    fet_n: FetConfig = field(default_factory=FetConfig)
    fet_p: FetConfig = field(default_factory=lambda: FetConfig(i_on_A=3e-5))
    circuit: CircuitConfig = field(default_factory=CircuitConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    transient: TransientSection = field(default_factory=TransientSection)
    output: OutputConfig = field(default_factory=OutputConfig)
    sources: Dict[str, str] = field(default_factory=dict, compare=False, hash=False)

    def fet(self, polarity: str) -> FetConfig:
        return self.fet_n if polarity == "n" else self.fet_p


# Table path in the file -> attribute of ExperimentConfig
SECTIONS = {
    "ferro": "ferro",
    "fet.n": "fet_n",
    "fet.p": "fet_p",
    "circuit": "circuit",
    "sweep": "sweep",
    "transient": "transient",
    "output": "output",
}

# endregion


# region Parsing
def _parse_error(err: tomllib.TOMLDecodeError, origin: str) -> ParseError:
    match = re.search(r"at line (\d+), column (\d+)", str(err))
    if match:
        return ParseError(
            "Couldn't parse %s: %s" % (origin, err), int(match.group(1)), int(match.group(2))
        )
    return ParseError("Couldn't parse %s: %s" % (origin, err))


def parse_override(item: str) -> Tuple[str, object]:
    """
    Parse a KEY=VALUE override; the value is read as a TOML value and falls back to a bare string

    :param item: Override such as ``ferro.a_fe_nm2=700``
    :type item: str
    :return: (dotted key, value)
    :rtype: tuple
    """
    if "=" not in item:
        raise ParseError("Couldn't parse override, expected KEY=VALUE: %s" % item)
    key, raw = item.split("=", 1)
    key, raw = key.strip(), raw.strip()
    if not key:
        raise ParseError("Couldn't parse override, empty key: %s" % item)
    try:
        value = tomllib.loads("value = %s" % raw)["value"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def _flatten(data: dict) -> Dict[str, Dict[str, object]]:
    """
    Map each known section path to its key/value table, rejecting unknown tables
    """
    tables = {}
    for top, content in data.items():
        if top == SOURCE_TABLE:
            continue
        if top == "fet":
            if not isinstance(content, dict):
                raise ValidationError("fet", "must be a table with n and p subtables")
            for sub, table in content.items():
                path = "fet.%s" % sub
                if path not in SECTIONS:
                    raise ValidationError(path, "unknown section")
                tables[path] = table
        elif top in SECTIONS:
            tables[top] = content
        else:
            raise ValidationError(top, "unknown section")
    for path, table in tables.items():
        if not isinstance(table, dict):
            raise ValidationError(path, "must be a table")
    return tables


def _recorded_sources(data: dict) -> Dict[str, str]:
    """
    Origins recorded in the ``[_source]`` table of an echoed configuration
    """
    table = data.get(SOURCE_TABLE, {})
    if not isinstance(table, dict):
        raise ValidationError(SOURCE_TABLE, "must be a table")
    for key, origin in table.items():
        if origin not in ORIGINS:
            raise ValidationError("%s.%s" % (SOURCE_TABLE, key), "unknown origin %r" % (origin,))
    return table


def _split_key(key: str) -> Tuple[str, str]:
    section, _, name = key.rpartition(".")
    if section not in SECTIONS or not name:
        raise ValidationError(key, "unknown key")
    return section, name


def _coerce(key: str, value, default, annotation):
    """
    Convert a TOML value to the field type implied by its default
    """
    if isinstance(default, tuple) or (isinstance(value, list)):
        if not isinstance(value, list):
            value = [value]
        if isinstance(default, tuple) and default and isinstance(default[0], str):
            return tuple(str(v) for v in value)
        out = []
        for v in value:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ValidationError(key, "must be a list of numbers")
            out.append(float(v))
        return tuple(out)
    if isinstance(default, bool):
        return bool(value)
    if isinstance(default, int) or annotation is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ValidationError(key, "must be an integer")
        return int(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ValidationError(key, "must be a string")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(key, "must be a number")
    return float(value)


def _build_section(path: str, default, table: dict, origin: str, sources: Dict[str, str]):
    values = {}
    known = {f.name: f for f in fields(default)}
    for name, value in table.items():
        key = "%s.%s" % (path, name)
        if name not in known:
            raise ValidationError(key, "unknown key")
        values[name] = _coerce(key, value, getattr(default, name), known[name].type)
        sources[key] = origin
    return replace(default, **values)


def _record_defaults(cfg: ExperimentConfig, sources: Dict[str, str]):
    for path, attr in SECTIONS.items():
        for f in fields(getattr(cfg, attr)):
            key = "%s.%s" % (path, f.name)
            if key not in sources:
                sources[key] = "published" if f.metadata.get("published") else "default"


# endregion


# region Validation
def _positive(key: str, value):
    if value is None:
        return
    if not value > 0:
        raise ValidationError(key, "must be positive")


def validate(cfg: ExperimentConfig):
    """
    Check every constraint of the configuration, raising ValidationError naming the first offending key
    """
    fe = cfg.ferro
    for name in ("p_r_uC_cm2", "e_c_MV_cm", "rho", "t_fe_nm"):
        _positive("ferro.%s" % name, getattr(fe, name))
    if fe.gamma < 0:
        raise ValidationError("ferro.gamma", "must be non-negative")
    if fe.a_fe_nm2 < 0:
        raise ValidationError("ferro.a_fe_nm2", "must be non-negative")
    if len(fe.a_fe_list) == 0:
        raise ValidationError("ferro.a_fe_list", "must not be empty")
    if any(a < 0 for a in fe.a_fe_list):
        raise ValidationError("ferro.a_fe_list", "areas must be non-negative")

    for path, fet in (("fet.n", cfg.fet_n), ("fet.p", cfg.fet_p)):
        for name in ("v_dd", "i_off_A", "i_on_A", "ss_mV_dec", "l_g_nm", "d_nw_nm", "eot_nm", "l_ov_nm"):
            _positive("%s.%s" % (path, name), getattr(fet, name))
        if fet.i_on_A <= 10 * fet.i_off_A:
            raise ValidationError("%s.i_on_A" % path, "must exceed 10 * i_off_A")
        if fet.dibl_mV_V < 0:
            raise ValidationError("%s.dibl_mV_V" % path, "must be non-negative")
        if fet.r_sd_ohm < 0:
            raise ValidationError("%s.r_sd_ohm" % path, "must be non-negative")
        if fet.n_wires < 1:
            raise ValidationError("%s.n_wires" % path, "must be at least 1")
        explicit = [fet.v_t0, fet.n_slope, fet.sigma_dibl, fet.i_sp_A]
        if any(v is not None for v in explicit) and not fet.explicit:
            raise ValidationError(path, "explicit parameters need all of v_t0, n_slope, sigma_dibl, i_sp_A")
        if fet.n_slope is not None and fet.n_slope < 1:
            raise ValidationError("%s.n_slope" % path, "must be at least 1")
        _positive("%s.i_sp_A" % path, fet.i_sp_A)

    c = cfg.circuit
    if c.stages < 3 or c.stages % 2 == 0:
        raise ValidationError("circuit.stages", "must be odd and at least 3")
    _positive("circuit.c_wire_fF", c.c_wire_fF)
    _positive("circuit.v_dd", c.v_dd)
    if len(c.v_dd_list) == 0 or any(v <= 0.2 for v in c.v_dd_list):
        raise ValidationError("circuit.v_dd_list", "must be nonempty with every value above 0.2 V")
    if c.a_fe_nm2 < 0:
        raise ValidationError("circuit.a_fe_nm2", "must be non-negative")

    s = cfg.sweep
    _positive("sweep.step", s.step)
    _positive("sweep.v_ds_step", s.v_ds_step)
    if len(s.v_ds_list) == 0:
        raise ValidationError("sweep.v_ds_list", "must not be empty")
    if len(s.v_gs_list) == 0:
        raise ValidationError("sweep.v_gs_list", "must not be empty")
    for direction in s.directions:
        try:
            parse_direction(direction)
        except ValueError:
            raise ValidationError("sweep.directions", "unknown direction %r" % direction)
    if not 0 < s.critical_lo_nm2 < s.critical_hi_nm2:
        raise ValidationError("sweep.critical_lo_nm2", "must satisfy 0 < critical_lo_nm2 < critical_hi_nm2")

    t = cfg.transient
    for name in ("t_stop_ns", "dt_init_ps", "dt_min_fs", "dt_max_ps", "newton_tol"):
        _positive("transient.%s" % name, getattr(t, name))
    if not t.dt_min_fs * FS <= t.dt_init_ps * PS <= t.dt_max_ps * PS:
        raise ValidationError("transient.dt_init_ps", "must satisfy dt_min <= dt_init <= dt_max")
    if t.max_newton < 1:
        raise ValidationError("transient.max_newton", "must be at least 1")

    if not 1 <= cfg.output.precision <= 17:
        raise ValidationError("output.precision", "must be between 1 and 17")


# endregion


# region Loading and echo
def load_config(
    path: Union[str, Path, None] = None, overrides: Iterable[str] = ()
) -> ExperimentConfig:
    """
    Load, fill and validate an experiment configuration

    A ``[_source]`` table, as written by dump_config, restores the recorded origin of each key set in the file, so an
    echoed configuration reloads with the same sources.

    :param path: TOML file, or None for the built-in defaults
    :type path: str | Path | None
    :param overrides: ``KEY=VALUE`` strings with dotted keys, applied after the file
    :type overrides: Iterable[str]
    :return: Validated configuration
    :rtype: ExperimentConfig
    """
    data = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as err:
            raise ParseError("Couldn't read config file %s: %s" % (path, err))
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as err:
            raise _parse_error(err, str(path))
    sources: Dict[str, str] = {}
    defaults = ExperimentConfig()
    sections = {attr: getattr(defaults, attr) for attr in SECTIONS.values()}
    for section_path, table in _flatten(data).items():
        attr = SECTIONS[section_path]
        sections[attr] = _build_section(section_path, sections[attr], table, "file", sources)
    for key, origin in _recorded_sources(data).items():
        if sources.get(key) == "file":
            sources[key] = origin
    for item in overrides:
        key, value = parse_override(item)
        section_path, name = _split_key(key)
        attr = SECTIONS[section_path]
        sections[attr] = _build_section(section_path, sections[attr], {name: value}, "override", sources)
    cfg = ExperimentConfig(**sections, sources=sources)
    _record_defaults(cfg, sources)
    validate(cfg)
    return cfg


def config_to_dict(cfg: ExperimentConfig, with_sources: bool = True) -> dict:
    """
    Nested dict of the configuration as it would appear in a TOML file; unset optional keys are omitted
    """
    out: dict = {}
    for path, attr in SECTIONS.items():
        section = getattr(cfg, attr)
        table = {}
        for f in fields(section):
            value = getattr(section, f.name)
            if value is None:
                continue
            table[f.name] = list(value) if isinstance(value, tuple) else value
        if path.startswith("fet."):
            out.setdefault("fet", {})[path.split(".", 1)[1]] = table
        else:
            out[path] = table
    if with_sources:
        out[SOURCE_TABLE] = dict(sorted(cfg.sources.items()))
    return out


def dump_config(cfg: ExperimentConfig) -> str:
    """
    Effective configuration as TOML, with a ``[_source]`` table giving the origin of every key
    """
    return tomli_w.dumps(config_to_dict(cfg))


# endregion


# region Model builders
def lk_model(cfg: ExperimentConfig, a_fe_nm2: float = None) -> LkModel:
    """
    Calibrated ferroelectric at the given area (nm²), defaulting to ferro.a_fe_nm2
    """
    fe = cfg.ferro
    area = fe.a_fe_nm2 if a_fe_nm2 is None else a_fe_nm2
    coeffs = _lk_coefficients(fe.p_r_uC_cm2, fe.e_c_MV_cm, fe.gamma, fe.rho)
    return LkModel(coeffs, FerroGeometry(fe.t_fe_nm * NM, area * NM2))


@functools.lru_cache(maxsize=None)
def _lk_coefficients(p_r_uC_cm2, e_c_MV_cm, gamma, rho):
    return calibrate_lk(p_r_uC_cm2 * UC_PER_CM2, e_c_MV_cm * MV_PER_CM, gamma, rho)


def fet_geometry(section: FetConfig) -> FetGeometry:
    return FetGeometry(
        l_g=section.l_g_nm * NM,
        d_nw=section.d_nw_nm * NM,
        eot=section.eot_nm * NM,
        l_ov=section.l_ov_nm * NM,
        n_wires=section.n_wires,
    )


@functools.lru_cache(maxsize=None)
def _reference_fet(section: FetConfig, polarity: str) -> FetParams:
    """
    Conventional device at the reference work function, calibrated unless explicit parameters are given
    """
    seed = FetParams(
        polarity=polarity,
        wf=section.wf_ref_eV,
        wf_ref=section.wf_ref_eV,
        r_sd=section.r_sd_ohm,
        geom=fet_geometry(section),
    )
    if section.explicit:
        return replace(
            seed,
            v_t0=section.v_t0,
            n_slope=section.n_slope,
            sigma_dibl=section.sigma_dibl,
            i_sp=section.i_sp_A,
            v_dibl=section.v_dd,
        )
    targets = FetTargets(
        i_off=section.i_off_A,
        i_on=section.i_on_A,
        ss_target=section.ss_mV_dec,
        dibl_target=section.dibl_mV_V,
        v_dd=section.v_dd,
        phi_t=seed.phi_t,
    )
    logger.info("calibrating %s-type surrogate", polarity)
    try:
        return calibrate_fet(targets, seed)
    except NcfetSimError as err:
        raise err.with_context(device=polarity)


def fet_params(cfg: ExperimentConfig, polarity: str, wf: float = None) -> FetParams:
    """
    Conventional device parameters for one polarity; wf (eV) defaults to the section's wf_eV
    """
    section = cfg.fet(polarity)
    params = _reference_fet(section, polarity)
    return apply_workfunction(params, section.wf_eV if wf is None else wf)


def nc_fet(
    cfg: ExperimentConfig, polarity: str, a_fe_nm2: float = None, wf: float = None
) -> NcFet:
    """
    NC device with the given ferroelectric area (nm², 0 for the conventional device)
    """
    area = cfg.ferro.a_fe_nm2 if a_fe_nm2 is None else a_fe_nm2
    fet = fet_params(cfg, polarity, wf)
    if area == 0:
        return NcFet(fet, None)
    return NcFet(fet, lk_model(cfg, area))


def circuit_workfunctions(cfg: ExperimentConfig) -> Tuple[float, float]:
    """
    Gate work functions (eV) of the NC circuit devices

    Without wf_p_eV the P device gets the mirror of the N shift, so both thresholds move by the same magnitude.
    """
    c = cfg.circuit
    wf_n = cfg.fet_n.wf_eV if c.wf_n_eV is None else c.wf_n_eV
    if c.wf_p_eV is not None:
        return wf_n, c.wf_p_eV
    return wf_n, cfg.fet_p.wf_ref_eV - (wf_n - cfg.fet_n.wf_ref_eV)


def c_wire(cfg: ExperimentConfig) -> float:
    return cfg.circuit.c_wire_fF * FF


def transient_seconds(cfg: ExperimentConfig) -> dict:
    """Transient settings in SI units, keyed like TransientConfig"""
    t = cfg.transient
    return {
        "t_stop": t.t_stop_ns * NS,
        "dt_init": t.dt_init_ps * PS,
        "dt_min": t.dt_min_fs * FS,
        "dt_max": t.dt_max_ps * PS,
        "newton_tol": t.newton_tol,
        "max_newton": t.max_newton,
    }


# endregion
