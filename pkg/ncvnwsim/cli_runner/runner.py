"""
Experiment orchestration: build devices from the configuration, run the requested experiment, write CSVs and a manifest
"""
# Standard library imports
import enum
import itertools
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Union

# External imports
import numpy as np
import pandas as pd

# Local imports
from ncvnwsim.analysis import (
    detect_ndr,
    device_metrics,
    hysteresis_width,
    metric_sweeps,
    metrics_from_sweeps,
    saturation_check,
    ss_curve,
)
from ncvnwsim.circuits.energy_delay import (
    energy_at_delay,
    energy_delay_frame,
    energy_delay_sweep,
    longest_common_delay,
)
from ncvnwsim.circuits.inverter import Inverter, inverter_vtc, vtc_metrics
from ncvnwsim.circuits.ring_oscillator import (
    RingOscillator,
    TransientConfig,
    ro_metrics,
    ro_transient,
)
from ncvnwsim.cli_runner.config import (
    ExperimentConfig,
    c_wire,
    circuit_workfunctions,
    config_to_dict,
    fet_params,
    lk_model,
    nc_fet,
    transient_seconds,
)
from ncvnwsim.cli_runner.output import format_number, write_csv, write_toml
from ncvnwsim.errors import NcfetSimError
from ncvnwsim.fet_surrogate import threshold_voltage
from ncvnwsim.ferroelectric import pv_loop, s_curve_table
from ncvnwsim.nc_device import (
    attractor_estimate,
    critical_area,
    run_concurrently,
    sweep_idvd,
    sweep_idvg,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.toml"
CONFIG_ECHO_NAME = "config.toml"
S_CURVE_POINTS = 601
S_CURVE_SPAN = 1.5  # multiples of the remnant polarization


class ExperimentKind(str, enum.Enum):
    S_CURVE = "s-curve"
    ID_VG = "idvg"
    ID_VD = "idvd"
    ATTRACTOR = "attractor"
    CRITICAL_AREA = "critical-area"
    INVERTER_VTC = "inverter-vtc"
    RO_TRANSIENT = "ro-transient"
    ENERGY_DELAY = "energy-delay"
    DEVICE_METRICS = "metrics"


def parse_experiment_kind(kind: Union[str, ExperimentKind]) -> ExperimentKind:
    """
    Parse an experiment name

    :param kind: Experiment to parse, e.g. "idvg", "IdVg", "energy_delay", "DeviceMetrics"
    :type kind: str
    :return: Experiment kind
    :rtype: ExperimentKind
    """
    if isinstance(kind, ExperimentKind):
        return kind
    key = re.sub(r"[\s_\-]", "", kind).lower()
    for member in ExperimentKind:
        if key in (member.value.replace("-", ""), member.name.replace("_", "").lower()):
            return member
    raise ValueError("Couldn't parse experiment kind: %s" % kind)


@dataclass
class RunResult:
    """
    Outcome of one experiment run

    files maps each written CSV to its data row count; failures lists the points that did not converge.
    """

    kind: ExperimentKind
    out_dir: Path
    files: Dict[str, int] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)
    results: Dict[str, object] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def paths(self) -> List[Path]:
        return [self.out_dir / name for name in self.files]

    @property
    def manifest(self) -> Path:
        return self.out_dir / MANIFEST_NAME


class _Run:
    """
    Bookkeeping of one experiment: serialized file writes, failures and scalar results
    """

    def __init__(self, cfg: ExperimentConfig, result: RunResult):
        self.cfg = cfg
        self.result = result

    def write(self, name: str, table: pd.DataFrame):
        rows = write_csv(table, self.result.out_dir / name, self.cfg.output.precision)
        self.result.files[name] = rows

    def attempt(self, label: str, func: Callable, *args):
        """
        Call func, recording a failure instead of raising on simulator errors
        """
        try:
            return func(*args)
        except NcfetSimError as err:
            logger.error("%s failed: %s", label, err)
            self.result.failures.append("%s: %s" % (label, err))
            return None

    def map(self, label: str, func: Callable, items: list) -> list:
        """
        Run independent items concurrently; failed items come back as None
        """
        return run_concurrently(
            lambda item: self.attempt("%s %s" % (label, _describe(item)), func, item), items
        )


def _describe(item) -> str:
    if isinstance(item, tuple):
        return "(" + ", ".join(_describe(v) for v in item) + ")"
    if isinstance(item, float):
        return format_number(item, 6)
    return str(item)


def _tag(value: float) -> str:
    """File-name friendly number: 0.05 -> 0p05, -0.1 -> m0p1"""
    return format_number(float(value), 6).replace("-", "m").replace(".", "p")


def _area_wf_grid(cfg: ExperimentConfig) -> list:
    wfs = cfg.sweep.wf_list_eV or (cfg.fet_n.wf_eV,)
    return list(itertools.product(cfg.ferro.a_fe_list, wfs))


def _tagged(frame: pd.DataFrame, **columns) -> pd.DataFrame:
    frame = frame.copy()
    for k, (name, value) in enumerate(columns.items()):
        frame.insert(k, name, value)
    return frame


# region Experiments
def _run_s_curve(run: _Run):
    model = lk_model(run.cfg)
    p_r = model.coeffs.p_r
    table = s_curve_table(model, -S_CURVE_SPAN * p_r, S_CURVE_SPAN * p_r, S_CURVE_POINTS)
    run.write("s_curve.csv", table)
    loop = run.attempt("pv loop", pv_loop, model)
    if loop is not None:
        run.write("pv_loop.csv", loop)
    c = model.coeffs
    run.result.results.update(
        {
            "alpha": c.alpha,
            "beta": c.beta,
            "gamma": c.gamma,
            "p_r_C_per_m2": c.p_r,
            "e_c_V_per_m": c.e_c,
            "r_eq_ohm": model.r_eq,
        }
    )


def _idvg_point(cfg: ExperimentConfig, area: float, wf: float):
    s = cfg.sweep
    dev = nc_fet(cfg, "n", area, wf)
    sweeps = {}
    for v_ds in s.v_ds_list:
        for direction in s.directions:
            sweeps[(v_ds, direction)] = sweep_idvg(dev, s.v_gs_start, s.v_gs_stop, s.step, v_ds, direction)
    return dev, sweeps


def _run_idvg(run: _Run):
    cfg = run.cfg
    grid = _area_wf_grid(cfg)
    outputs = run.map("idvg", lambda item: _idvg_point(cfg, *item), grid)
    v_hi, v_lo = max(cfg.sweep.v_ds_list), min(cfg.sweep.v_ds_list)
    metrics_rows = []
    for (area, wf), out in zip(grid, outputs):
        if out is None:
            continue
        dev, sweeps = out
        frames = [
            _tagged(table.to_frame(), direction=direction)
            for (v_ds, direction), table in sweeps.items()
        ]
        tag = "a%s_wf%s" % (_tag(area), _tag(wf))
        run.write("idvg_%s.csv" % tag, _tagged(pd.concat(frames, ignore_index=True), a_fe_nm2=area, wf_eV=wf))
        up = sweeps.get((v_hi, "up")) or sweeps.get((v_hi, "down"))
        down = sweeps.get((v_hi, "down")) or up
        lin = sweeps.get((v_lo, "up")) or sweeps.get((v_lo, "down"))
        run.write("ss_%s.csv" % tag, ss_curve(up))
        metrics = run.attempt("metrics %s" % tag, metrics_from_sweeps, up, down, lin, dev.fet.geom)
        if metrics is not None:
            metrics_rows.append(_tagged(metrics.to_frame(), a_fe_nm2=area, wf_eV=wf))
    if metrics_rows:
        run.write("idvg_metrics.csv", pd.concat(metrics_rows, ignore_index=True))


def _idvd_point(cfg: ExperimentConfig, area: float, wf: float):
    s = cfg.sweep
    dev = nc_fet(cfg, "n", area, wf)
    return {v_gs: sweep_idvd(dev, 0.0, cfg.fet_n.v_dd, s.v_ds_step, v_gs) for v_gs in s.v_gs_list}


def _run_idvd(run: _Run):
    cfg = run.cfg
    v_dd = cfg.fet_n.v_dd
    grid = _area_wf_grid(cfg)
    outputs = run.map("idvd", lambda item: _idvd_point(cfg, *item), grid)
    ndr_rows = []
    saturation_rows = []
    for (area, wf), sweeps in zip(grid, outputs):
        if sweeps is None:
            continue
        v_t = threshold_voltage(fet_params(cfg, "n", wf), v_dd)
        frames = [table.to_frame() for table in sweeps.values()]
        tag = "a%s_wf%s" % (_tag(area), _tag(wf))
        run.write("idvd_%s.csv" % tag, _tagged(pd.concat(frames, ignore_index=True), a_fe_nm2=area, wf_eV=wf))
        for v_gs, table in sweeps.items():
            for start, end in detect_ndr(table):
                ndr_rows.append(
                    {"a_fe_nm2": area, "wf_eV": wf, "v_gs_V": v_gs, "v_ds_start_V": start, "v_ds_end_V": end}
                )
            sat = saturation_check(table, v_dd, v_t)
            saturation_rows.append(
                {
                    "a_fe_nm2": area,
                    "wf_eV": wf,
                    "v_gs_V": v_gs,
                    "saturates": sat.saturates,
                    "gds_ratio": sat.gds_ratio,
                    "v_int_at_vdd_V": np.nan if sat.v_int_at_vdd is None else sat.v_int_at_vdd,
                    "v_dsat_estimate_V": np.nan if sat.v_dsat_estimate is None else sat.v_dsat_estimate,
                }
            )
    run.write(
        "idvd_ndr.csv",
        pd.DataFrame(ndr_rows, columns=["a_fe_nm2", "wf_eV", "v_gs_V", "v_ds_start_V", "v_ds_end_V"]),
    )
    run.write("idvd_saturation.csv", pd.DataFrame(saturation_rows))


def _run_attractor(run: _Run):
    cfg = run.cfg
    s = cfg.sweep
    fet = fet_params(cfg, "n")
    base = lk_model(cfg)
    areas = [a for a in cfg.ferro.a_fe_list if a > 0]

    def point(v_ds):
        return attractor_estimate(fet, base, areas, v_ds, s.v_gs_start, s.v_gs_stop, max(s.step, 0.005))

    rows = []
    for v_ds, res in zip(s.v_ds_list, run.map("attractor v_ds", point, list(s.v_ds_list))):
        if res is None:
            continue
        rows.append(
            {
                "v_ds_V": v_ds,
                "v_a_V": res.v_a,
                "spread_V": res.spread,
                "q_zero_v_V": res.q_zero_v,
                "deviation_V": res.v_a - res.q_zero_v,
            }
        )
        run.result.results["v_a_V_at_%s" % _tag(v_ds)] = res.v_a
    run.write("attractor.csv", pd.DataFrame(rows, columns=["v_ds_V", "v_a_V", "spread_V", "q_zero_v_V", "deviation_V"]))


def _run_critical_area(run: _Run):
    cfg = run.cfg
    s = cfg.sweep
    template = nc_fet(cfg, "n")

    def point(v_ds):
        return critical_area(
            template, s.critical_lo_nm2, s.critical_hi_nm2, v_ds, s.v_gs_start, s.v_gs_stop, s.step
        )

    rows = []
    for v_ds, area in zip(s.v_ds_list, run.map("critical area v_ds", point, list(s.v_ds_list))):
        if area is None:
            continue
        rows.append({"v_ds_V": v_ds, "a_crit_nm2": area})
        run.result.results["a_crit_nm2_at_%s" % _tag(v_ds)] = area
    run.write("critical_area.csv", pd.DataFrame(rows, columns=["v_ds_V", "a_crit_nm2"]))


def _circuit_inverters(cfg: ExperimentConfig, v_dd: float = None) -> Dict[str, Inverter]:
    v_dd = cfg.circuit.v_dd if v_dd is None else v_dd
    wf_n, wf_p = circuit_workfunctions(cfg)
    area = cfg.circuit.a_fe_nm2
    return {
        "conventional": Inverter(nc_fet(cfg, "n", 0.0), nc_fet(cfg, "p", 0.0), v_dd),
        "nc": Inverter(nc_fet(cfg, "n", area, wf_n), nc_fet(cfg, "p", area, wf_p), v_dd),
    }


def _vtc_point(cfg: ExperimentConfig, inv: Inverter):
    up = inverter_vtc(inv, 0.0, inv.v_dd, cfg.sweep.step, "up")
    down = inverter_vtc(inv, 0.0, inv.v_dd, cfg.sweep.step, "down")
    device_hysteresis = 0.0
    for dev in (inv.nfet, inv.pfet):
        if dev.is_conventional:
            continue
        sweeps = metric_sweeps(dev, inv.v_dd, cfg.sweep.step)
        device_hysteresis = max(device_hysteresis, hysteresis_width(sweeps["up"], sweeps["down"]))
    return up, down, vtc_metrics(up, down, inv.v_dd), device_hysteresis


def _run_inverter_vtc(run: _Run):
    cfg = run.cfg
    inverters = _circuit_inverters(cfg)
    names = list(inverters)
    outputs = run.map("inverter vtc", lambda name: _vtc_point(cfg, inverters[name]), names)
    rows = []
    for name, out in zip(names, outputs):
        if out is None:
            continue
        up, down, metrics, device_hysteresis = out
        up_sorted = up.sort_values("v_in_V", kind="stable").reset_index(drop=True)
        down_sorted = down.sort_values("v_in_V", kind="stable").reset_index(drop=True)
        run.write(
            "vtc_%s.csv" % name,
            pd.DataFrame(
                {
                    "v_in_V": up_sorted["v_in_V"],
                    "v_out_up_V": up_sorted["v_out_V"],
                    "v_out_down_V": down_sorted["v_out_V"],
                }
            ),
        )
        row = {"variant": name, **metrics.to_dict(), "device_hysteresis_V": device_hysteresis}
        rows.append(row)
    gains = {row["variant"]: row["gain_max"] for row in rows}
    for row in rows:
        row["gain_ratio"] = row["gain_max"] / gains["conventional"] if "conventional" in gains else np.nan
    if "nc" in gains and "conventional" in gains:
        run.result.results["gain_ratio"] = gains["nc"] / gains["conventional"]
    run.write("vtc_metrics.csv", pd.DataFrame(rows))


def _ring_oscillators(cfg: ExperimentConfig) -> Dict[str, RingOscillator]:
    return {
        name: RingOscillator(inv, cfg.circuit.stages, c_wire(cfg))
        for name, inv in _circuit_inverters(cfg).items()
    }


def _run_ro_transient(run: _Run):
    cfg = run.cfg
    rings = _ring_oscillators(cfg)
    settings = TransientConfig(**transient_seconds(cfg))
    names = list(rings)

    def point(name):
        trace = ro_transient(rings[name], settings)
        return trace, ro_metrics(trace, rings[name])

    rows = []
    for name, out in zip(names, run.map("ring oscillator", point, names)):
        if out is None:
            continue
        trace, metrics = out
        run.write("ro_%s.csv" % name, trace.to_frame())
        rows.append(
            {
                "variant": name,
                "v_dd_V": cfg.circuit.v_dd,
                "period_s": metrics.period,
                "delay_s": metrics.delay_per_stage,
                "energy_J": metrics.energy_per_cycle,
                "cycles": metrics.cycles,
            }
        )
    run.write("ro_metrics.csv", pd.DataFrame(rows))


def _run_energy_delay(run: _Run):
    cfg = run.cfg
    rings = _ring_oscillators(cfg)
    settings = TransientConfig(**transient_seconds(cfg))
    out = run.attempt(
        "energy-delay sweep",
        energy_delay_sweep,
        rings["conventional"],
        rings["nc"],
        list(cfg.circuit.v_dd_list),
        settings,
    )
    if out is None:
        return
    conv, nc = out
    run.write("energy_delay.csv", energy_delay_frame(conv, nc))
    target = run.attempt("iso-delay target", longest_common_delay, conv, nc)
    if target is None:
        return
    e_conv = energy_at_delay(conv, target, "conventional")
    e_nc = energy_at_delay(nc, target, "nc")
    reduction = 1.0 - e_nc / e_conv
    run.write(
        "iso_delay.csv",
        pd.DataFrame(
            [{"target_delay_s": target, "e_conv_J": e_conv, "e_nc_J": e_nc, "reduction": reduction}]
        ),
    )
    run.result.results["iso_delay_reduction"] = reduction
    run.result.results["iso_delay_target_s"] = target


def _run_device_metrics(run: _Run):
    cfg = run.cfg
    grid = _area_wf_grid(cfg)

    def point(item):
        area, wf = item
        return device_metrics(nc_fet(cfg, "n", area, wf), cfg.fet_n.v_dd, cfg.sweep.step)

    frames = [
        _tagged(metrics.to_frame(), a_fe_nm2=area, wf_eV=wf)
        for (area, wf), metrics in zip(grid, run.map("metrics", point, grid))
        if metrics is not None
    ]
    if frames:
        run.write("device_metrics.csv", pd.concat(frames, ignore_index=True))


_EXPERIMENTS = {
    ExperimentKind.S_CURVE: _run_s_curve,
    ExperimentKind.ID_VG: _run_idvg,
    ExperimentKind.ID_VD: _run_idvd,
    ExperimentKind.ATTRACTOR: _run_attractor,
    ExperimentKind.CRITICAL_AREA: _run_critical_area,
    ExperimentKind.INVERTER_VTC: _run_inverter_vtc,
    ExperimentKind.RO_TRANSIENT: _run_ro_transient,
    ExperimentKind.ENERGY_DELAY: _run_energy_delay,
    ExperimentKind.DEVICE_METRICS: _run_device_metrics,
}

# endregion


def run_experiment(
    cfg: ExperimentConfig, kind: Union[str, ExperimentKind], out_dir: Union[str, Path] = None
) -> RunResult:
    """
    Run one experiment and write its CSVs, the config echo and a manifest

    Independent points run concurrently; a point that fails is recorded in the manifest and the remaining points still
    produce output. Identical configurations produce byte-identical output sets.

    :param cfg: Validated configuration
    :type cfg: ExperimentConfig
    :param kind: Experiment to run
    :type kind: ExperimentKind | str
    :param out_dir: Output directory, defaults to output.dir of the configuration
    :type out_dir: str | Path
    :return: Written files, failures and scalar results
    :rtype: RunResult
    """
    kind = parse_experiment_kind(kind)
    out_dir = Path(cfg.output.dir if out_dir is None else out_dir)
    result = RunResult(kind=kind, out_dir=out_dir)
    run = _Run(cfg, result)
    logger.info("running %s into %s", kind.value, out_dir)
    try:
        _EXPERIMENTS[kind](run)
    except NcfetSimError as err:
        raise err.with_context(experiment=kind.value)
    write_toml(config_to_dict(cfg), out_dir / CONFIG_ECHO_NAME)
    manifest = {
        "experiment": kind.value,
        "status": "ok" if result.ok else "failed",
        "config": CONFIG_ECHO_NAME,
        "files": {name: {"rows": rows} for name, rows in sorted(result.files.items())},
        "failures": list(result.failures),
        "results": dict(sorted(result.results.items())),
    }
    write_toml(manifest, out_dir / MANIFEST_NAME)
    if not result.ok:
        logger.warning("%s finished with %d failed points", kind.value, len(result.failures))
    return result
