"""Assemble the optical chain of a scenario and produce its traces and report."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import __version__
from .config import (
    MODE_NAMES,
    ScenarioConfig,
    dump_yaml,
    get_path,
    set_path,
)
from .detection import (
    CHANNEL_COEFFS,
    VarianceTrace,
    analytic_trace,
    detected_state,
    scan_trace,
    simulate_photocurrents,
    write_traces,
)
from .errors import CalibrationError
from .gaussian import (
    GaussianState,
    HG01,
    HG10,
    apply_basis_rotation,
    apply_loss,
    apply_phase,
    linear_to_db,
    quadrature_variance,
    two_mode_source,
)
from .gouy import gouy_shift
from .metrics import (
    InseparabilityResult,
    correct_electronic_noise,
    inseparability_analytic,
    inseparability_from_traces,
    write_result,
)
from .modes import HGMode, detector_efficiencies

log = logging.getLogger(__name__)


def source_state(config: ScenarioConfig) -> GaussianState:
    a, b = config.source.specs()
    return two_mode_source(a, b, (HG10, HG01))


def apply_chain(state: GaussianState, config: ScenarioConfig) -> tuple[GaussianState, list[dict]]:
    """Run the source through the chain; also return what each element did."""
    notes = []
    for el in config.chain:
        if el.type == "gouy_shifter":
            shift = gouy_shift(el.get("focal_length_m"), el.get("separation_m"), el.get("axis", "x"))
            # relative phase carried by TEM10; the common Gouy phase only offsets the LO
            state = apply_phase(state, "HG10", shift)
            notes.append({"type": el.type, "differential_rad": float(shift)})
        elif el.type == "basis_rotation":
            state = apply_basis_rotation(state, "HG10", "HG01", el.get("angle_rad"))
            notes.append({"type": el.type, "angle_rad": float(el.get("angle_rad"))})
        elif el.type == "loss":
            for mode in el.get("modes", list(MODE_NAMES)):
                state = apply_loss(state, mode, el.get("transmittance"))
            notes.append({"type": el.type, "transmittance": float(el.get("transmittance"))})
        elif el.type == "phase":
            state = apply_phase(state, el.get("mode"), el.get("angle_rad"))
            notes.append({"type": el.type, "mode": el.get("mode"), "angle_rad": float(el.get("angle_rad"))})
    return state, notes


def channel_efficiencies(config: ScenarioConfig) -> tuple[float, float]:
    """Mode-projection efficiency of the x and y channels, propagation loss included."""
    det = config.detector
    if det.efficiency is not None:
        eta = (det.efficiency, det.efficiency)
    elif det.kind == "mode_matched":
        eta = (1.0, 1.0)
    else:
        eff = detector_efficiencies(HGMode(0, 0, det.lo_waist), gap=det.gap)
        eta = (eff.eta_x, eff.eta_y)
    t = det.propagation_transmittance
    return eta[0] * t, eta[1] * t


def measured_state(config: ScenarioConfig, rotation: float = 0.0) -> GaussianState:
    """State in front of the detector, with the measurement basis rotated by ``rotation``."""
    state, _ = apply_chain(source_state(config), config)
    if rotation:
        state = apply_basis_rotation(state, "HG10", "HG01", rotation)
    return state


def analytic_inseparability(config: ScenarioConfig) -> InseparabilityResult:
    state = detected_state(measured_state(config), channel_efficiencies(config))
    return inseparability_analytic(
        state,
        "HG10",
        "HG01",
        electronic_noise=config.measurement.electronic_noise,
        correction=config.analysis.correction,
    )


def detected_squeezing_db(config: ScenarioConfig, mode: str = "HG10") -> float:
    """Raw squeezing of one source mode read directly on the detector, in dB.

    The chain is skipped: this is the lens-free, unrotated arrangement.
    """
    state = detected_state(source_state(config), channel_efficiencies(config))
    block = state.block(mode)
    e = config.measurement.electronic_noise
    v_min = float(np.linalg.eigvalsh(block)[0])
    return linear_to_db((1 - e) * v_min + e)


def trace_extrema(state: GaussianState, coeffs: dict, electronic_noise: float = 0.0) -> tuple[float, float]:
    """Exact min and max over the LO phase of a measured quadrature variance."""
    q0 = quadrature_variance(state, coeffs, 0.0)
    q1 = quadrature_variance(state, coeffs, np.pi / 2)
    q2 = quadrature_variance(state, coeffs, np.pi / 4)
    # V(phi) = m + r cos(2 phi - 2 phi0)
    mid = 0.5 * (q0 + q1)
    amp = np.hypot(0.5 * (q0 - q1), q2 - mid)
    e = electronic_noise
    return (1 - e) * (mid - amp) + e, (1 - e) * (mid + amp) + e


@dataclass
class RunReport:
    scenario: str
    seed: int
    version: str
    config: dict
    outputs: dict[str, str] = field(default_factory=dict)
    efficiencies: tuple[float, float] = (1.0, 1.0)
    chain: list = field(default_factory=list)
    extrema: dict = field(default_factory=dict)
    inseparability: InseparabilityResult | None = None
    inseparability_montecarlo: InseparabilityResult | None = None
    traces: dict[str, VarianceTrace] = field(default_factory=dict, repr=False)
    montecarlo: dict[str, VarianceTrace] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        out = {
            "scenario": self.scenario,
            "seed": self.seed,
            "version": self.version,
            "outputs": dict(self.outputs),
            "efficiencies": [float(e) for e in self.efficiencies],
            "chain": self.chain,
            "extrema": self.extrema,
        }
        if self.inseparability is not None:
            out["inseparability"] = _plain(self.inseparability.to_dict())
        if self.inseparability_montecarlo is not None:
            out["inseparability_montecarlo"] = _plain(self.inseparability_montecarlo.to_dict())
        out["config"] = self.config
        return out

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(dump_yaml(self.to_dict()))
        return path


def _plain(d: dict) -> dict:
    return {k: (float(v) if isinstance(v, (np.floating, float)) else v) for k, v in d.items()}


def _label(channel: str, rotation: float, n_rot: int) -> str:
    return channel if n_rot == 1 else f"{channel}@rot={rotation:.6g}"


def run_scenario(
    config: ScenarioConfig,
    out_dir: str | Path | None = None,
    montecarlo: bool | None = None,
    export_timeseries: bool = False,
) -> RunReport:
    """Analytic traces, optional Monte Carlo traces and the inseparability result.

    Files are written only when ``out_dir`` is given.
    """
    an = config.analysis
    meas = config.measurement
    do_mc = an.montecarlo_trace if montecarlo is None else montecarlo
    do_mc = do_mc and meas.scan_span is not None
    eff = channel_efficiencies(config)
    _, chain_notes = apply_chain(source_state(config), config)
    report = RunReport(
        scenario=config.name,
        seed=config.seed,
        version=__version__,
        config=config.to_dict(),
        efficiencies=eff,
        chain=chain_notes,
    )
    grid = np.arange(an.phase_points) * 2 * np.pi / an.phase_points
    rotations = config.detector.rotations
    e = meas.electronic_noise

    for i_rot, rot in enumerate(rotations):
        state = measured_state(config, rot)
        lossy = detected_state(state, eff)
        for ch in an.channels:
            label = _label(ch, rot, len(rotations))
            if an.analytic_trace:
                report.traces[label] = analytic_trace(state, eff, ch, grid, e, label=label)
            a, b = CHANNEL_COEFFS[ch]
            lo, hi = trace_extrema(lossy, {"HG10": a, "HG01": b}, e)
            report.extrema[label] = {
                "min_snu": float(lo),
                "max_snu": float(hi),
                "min_dB": float(linear_to_db(lo)),
                "max_dB": float(linear_to_db(hi)),
            }
            if do_mc:
                log.info("Monte Carlo trace %s", label)
                report.montecarlo[label] = scan_trace(
                    state, eff, meas, ch, label=label, stream=i_rot
                )

    if an.inseparability:
        report.inseparability = analytic_inseparability(config)
        if do_mc and "sum" in an.channels and "diff" in an.channels and len(rotations) == 1:
            s, d = report.montecarlo["sum"], report.montecarlo["diff"]
            report.inseparability_montecarlo = _trace_inseparability(s, d, e, an.correction)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        name = config.name
        if report.traces:
            p = write_traces(out / f"{name}_trace_analytic.csv", list(report.traces.values()))
            report.outputs["trace_analytic"] = p.name
        if report.montecarlo:
            p = write_traces(out / f"{name}_trace_montecarlo.csv", list(report.montecarlo.values()))
            report.outputs["trace_montecarlo"] = p.name
        if report.inseparability is not None:
            p = write_result(out / f"{name}_inseparability.csv", report.inseparability)
            report.outputs["inseparability"] = p.name
        if report.inseparability_montecarlo is not None:
            p = write_result(
                out / f"{name}_inseparability_montecarlo.csv", report.inseparability_montecarlo
            )
            report.outputs["inseparability_montecarlo"] = p.name
        if export_timeseries:
            record = simulate_photocurrents(measured_state(config, rotations[0]), eff, meas)
            p = record.to_csv(out / f"{name}_timeseries.csv")
            report.outputs["timeseries"] = p.name
        p = out / f"{name}_report.yaml"
        report.outputs["report"] = p.name
        report.write(p)
    return report


def _trace_inseparability(s: VarianceTrace, d: VarianceTrace, e: float, correction: str):
    """Criterion from phase-scanned sum/diff traces folded onto one pi period."""
    s, d = s.folded(), d.folded()
    keep = s.phi < s.phi[0] + np.pi
    return inseparability_from_traces(
        s.phi[keep],
        s.variance[keep],
        d.variance[keep],
        s.standard_error[keep],
        d.standard_error[keep],
        electronic_noise=e,
        correction=correction,
    )


SWEEP_FIELDS = ("value", "I", "V_sum", "V_diff", "I_raw")


def sweep(config: ScenarioConfig, path: str, values: Sequence[float]) -> list[dict]:
    """Analytic inseparability as one scalar parameter is varied.

    ``I``, ``V_sum`` and ``V_diff`` are electronic-noise corrected, so
    ``I = sqrt(V_sum V_diff)``; ``I_raw`` is the uncorrected criterion.
    """
    data = config.to_dict()
    get_path(data, path)
    rows = []
    for value in values:
        cfg = ScenarioConfig.from_dict(set_path(data, path, float(value)))
        res = analytic_inseparability(cfg)
        vs, vd = res.v_sum, res.v_diff
        if res.v_el > 0:
            vs = correct_electronic_noise(vs, res.v_el, method=cfg.analysis.correction)
            vd = correct_electronic_noise(vd, res.v_el, method=cfg.analysis.correction)
        rows.append(
            {"value": float(value), "I": res.i_corrected, "V_sum": vs, "V_diff": vd, "I_raw": res.i_raw}
        )
    return rows


def write_sweep(path_or_fh, rows: list[dict]):
    def emit(fh):
        writer = csv.writer(fh)
        writer.writerow(SWEEP_FIELDS)
        for row in rows:
            writer.writerow([f"{row[k]:.12g}" for k in SWEEP_FIELDS])

    if hasattr(path_or_fh, "write"):
        emit(path_or_fh)
        return path_or_fh
    path = Path(path_or_fh)
    with path.open("w", newline="") as fh:
        emit(fh)
    return path


# -- calibration -------------------------------------------------------------

CALIBRATION_TARGETS = {"detected_squeezing_dB": -1.7, "inseparability": 0.81}


def calibrate(
    config: ScenarioConfig,
    detected_squeezing_db_target: float = CALIBRATION_TARGETS["detected_squeezing_dB"],
    inseparability_target: float = CALIBRATION_TARGETS["inseparability"],
) -> ScenarioConfig:
    """Fit propagation loss and source antisqueezing to the two detected targets.

    Fixed inputs: source squeezing, relative phase offset, detector geometry
    and electronic noise.  The propagation transmittance is solved so that
    each mode, measured alone, shows ``detected_squeezing_db_target`` (raw);
    the antisqueezing of both source modes is then solved so that the
    electronic-noise-corrected inseparability equals ``inseparability_target``.
    """
    data = config.to_dict()
    data.pop("calibration", None)

    def with_values(t: float, anti: float) -> ScenarioConfig:
        d = set_path(data, "detector.propagation_transmittance", t)
        d = set_path(d, "source.hg10.antisqueezing_dB", anti)
        d = set_path(d, "source.hg01.antisqueezing_dB", anti)
        return ScenarioConfig.from_dict(d)

    s_db = max(config.source.hg10.squeezing_dB, config.source.hg01.squeezing_dB)
    anti_lo = -s_db  # pure state
    anti0 = max(config.source.hg10.antisqueezing_dB, anti_lo)

    def squeeze_gap(t):
        return detected_squeezing_db(with_values(t, anti0)) - detected_squeezing_db_target

    if squeeze_gap(1.0) > 0:
        raise CalibrationError(
            f"source squeezing {s_db} dB cannot reach {detected_squeezing_db_target} dB "
            "even without propagation loss"
        )
    t = brentq(squeeze_gap, 1e-6, 1.0, xtol=1e-14)

    def i_gap(anti):
        return analytic_inseparability(with_values(t, anti)).i_corrected - inseparability_target

    anti_hi = 30.0
    if i_gap(anti_lo) > 0 or i_gap(anti_hi) < 0:
        raise CalibrationError(
            f"inseparability target {inseparability_target} not bracketed by antisqueezing "
            f"in [{anti_lo}, {anti_hi}] dB"
        )
    anti = brentq(i_gap, anti_lo, anti_hi, xtol=1e-12)
    result = with_values(t, anti)
    res = analytic_inseparability(result)
    out = result.to_dict()
    out["calibration"] = {
        "procedure": "hgentangle calibrate (analytic pipeline, brentq on two scalar unknowns)",
        "targets": {
            "detected_squeezing_dB": float(detected_squeezing_db_target),
            "inseparability_corrected": float(inseparability_target),
        },
        "fixed": {
            "source_squeezing_dB": float(s_db),
            "relative_phase_offset_rad": float(config.source.relative_phase_offset),
            "electronic_noise_snu": float(config.measurement.electronic_noise),
            "detector_efficiency": float(channel_efficiencies(result)[0] / t),
        },
        "solved": {
            "propagation_transmittance": float(t),
            "antisqueezing_dB": float(anti),
        },
        "check": {
            "detected_squeezing_dB": float(detected_squeezing_db(result)),
            "detected_squeezing_dB_hg01": float(detected_squeezing_db(result, "HG01")),
            "I_raw": float(res.i_raw),
            "I_corrected": float(res.i_corrected),
            "phi0_rad": float(res.phi0),
        },
    }
    return ScenarioConfig.from_dict(out)
