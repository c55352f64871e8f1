"""Scenario configuration: schema, YAML I/O, validation.

A scenario file is YAML with the sections ``source``, ``chain``, ``detector``,
``measurement`` and ``analysis``; every physical quantity carries its unit in
the key name.  ``extends: <scenario>`` deep-merges the file over a bundled
scenario (mappings merge, lists replace).  See ``docs/config.md``.
"""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .detection import CHANNEL_COEFFS, MeasurementConfig
from .errors import InvalidConfig, InvalidParameter
from .gaussian import SqueezerSpec

ELEMENT_TYPES = {
    "gouy_shifter": {"focal_length_m", "separation_m", "axis"},
    "basis_rotation": {"angle_rad"},
    "loss": {"transmittance", "modes"},
    "phase": {"mode", "angle_rad"},
}
REQUIRED_KEYS = {
    "gouy_shifter": {"focal_length_m", "separation_m"},
    "basis_rotation": {"angle_rad"},
    "loss": {"transmittance"},
    "phase": {"mode", "angle_rad"},
}
MODE_NAMES = ("HG10", "HG01")
DETECTOR_KINDS = ("quadrant", "mode_matched")
CORRECTIONS = ("renormalize", "subtract")


@dataclass(frozen=True)
class SourceConfig:
    hg10: SqueezerSpec
    hg01: SqueezerSpec
    relative_phase_offset: float = 0.0

    def specs(self) -> tuple[SqueezerSpec, SqueezerSpec]:
        """Squeezer of each mode, the offset added to the TEM01 ellipse angle."""
        b = self.hg01
        shifted = SqueezerSpec(
            b.squeezing_dB, b.antisqueezing_dB, b.squeezing_angle + self.relative_phase_offset
        )
        return self.hg10, shifted


@dataclass(frozen=True)
class Element:
    type: str
    params: dict

    def get(self, key, default=None):
        return self.params.get(key, default)


@dataclass(frozen=True)
class DetectorConfig:
    kind: str = "quadrant"
    lo_waist: float = 1e-3
    gap: float = 0.0
    efficiency: float | None = None
    propagation_transmittance: float = 1.0
    rotations: tuple[float, ...] = (0.0,)


@dataclass(frozen=True)
class AnalysisConfig:
    channels: tuple[str, ...] = ("x",)
    analytic_trace: bool = True
    montecarlo_trace: bool = True
    inseparability: bool = False
    phase_points: int = 720
    correction: str = "renormalize"


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    source: SourceConfig
    chain: tuple[Element, ...] = ()
    detector: DetectorConfig = DetectorConfig()
    measurement: MeasurementConfig = MeasurementConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    description: str = ""
    seed: int = 0
    calibration: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        problems = validate(data)
        if problems:
            raise InvalidConfig("invalid scenario:\n  " + "\n  ".join(problems))
        return _build(data)

    def to_dict(self) -> dict:
        src = self.source
        det = self.detector
        meas = self.measurement
        an = self.analysis
        out = {
            "name": self.name,
            "description": self.description,
            "seed": int(self.seed),
            "source": {
                "hg10": _squeezer_dict(src.hg10),
                "hg01": _squeezer_dict(src.hg01),
                "relative_phase_offset_rad": float(src.relative_phase_offset),
            },
            "chain": [{"type": e.type, **copy.deepcopy(e.params)} for e in self.chain],
            "detector": {
                "kind": det.kind,
                "lo_waist_m": float(det.lo_waist),
                "gap_m": float(det.gap),
                "efficiency": None if det.efficiency is None else float(det.efficiency),
                "propagation_transmittance": float(det.propagation_transmittance),
                "rotations_rad": [float(r) for r in det.rotations],
            },
            "measurement": {
                "lo_phase_rad": float(meas.lo_phase),
                "scan_span_rad": None if meas.scan_span is None else float(meas.scan_span),
                "analysis_frequency_Hz": float(meas.analysis_frequency),
                "bandwidth_Hz": float(meas.bandwidth),
                "sample_rate_Hz": float(meas.sample_rate),
                "duration_s": float(meas.duration),
                "segment_duration_s": float(meas.segment_duration),
                "electronic_noise_snu": float(meas.electronic_noise),
            },
            "analysis": {
                "channels": list(an.channels),
                "analytic_trace": bool(an.analytic_trace),
                "montecarlo_trace": bool(an.montecarlo_trace),
                "inseparability": bool(an.inseparability),
                "phase_points": int(an.phase_points),
                "correction": an.correction,
            },
        }
        if self.calibration:
            out["calibration"] = copy.deepcopy(self.calibration)
        return out

    def with_seed(self, seed: int) -> "ScenarioConfig":
        data = self.to_dict()
        data["seed"] = int(seed)
        return ScenarioConfig.from_dict(data)


def _squeezer_dict(spec: SqueezerSpec) -> dict:
    return {
        "squeezing_dB": float(spec.squeezing_dB),
        "antisqueezing_dB": float(spec.antisqueezing_dB),
        "angle_rad": float(spec.squeezing_angle),
    }


def _num(value) -> float:
    # PyYAML reads "1e-3" as a string
    return float(value)


def _build(data: dict) -> ScenarioConfig:
    src = data["source"]
    det = data.get("detector", {}) or {}
    meas = data.get("measurement", {}) or {}
    an = data.get("analysis", {}) or {}

    def squeezer(d):
        return SqueezerSpec(
            _num(d["squeezing_dB"]), _num(d["antisqueezing_dB"]), _num(d.get("angle_rad", 0.0))
        )

    chain = []
    for raw in data.get("chain", []) or []:
        params = {k: v for k, v in raw.items() if k != "type"}
        for key, value in params.items():
            if key not in ("axis", "mode", "modes"):
                params[key] = _num(value)
        chain.append(Element(raw["type"], params))

    eff = det.get("efficiency")
    span = meas.get("scan_span_rad")
    seed = int(data.get("seed", 0))
    measurement = MeasurementConfig(
        lo_phase=_num(meas.get("lo_phase_rad", 0.0)),
        scan_span=None if span is None else _num(span),
        analysis_frequency=_num(meas.get("analysis_frequency_Hz", 4.8e6)),
        bandwidth=_num(meas.get("bandwidth_Hz", 100e3)),
        sample_rate=_num(meas.get("sample_rate_Hz", 20e6)),
        duration=_num(meas.get("duration_s", 0.01)),
        seed=seed,
        electronic_noise=_num(meas.get("electronic_noise_snu", 0.0)),
        segment_duration=_num(meas.get("segment_duration_s", 1e-3)),
    )
    return ScenarioConfig(
        name=str(data["name"]),
        description=str(data.get("description", "")),
        seed=seed,
        source=SourceConfig(
            squeezer(src["hg10"]),
            squeezer(src["hg01"]),
            _num(src.get("relative_phase_offset_rad", 0.0)),
        ),
        chain=tuple(chain),
        detector=DetectorConfig(
            kind=det.get("kind", "quadrant"),
            lo_waist=_num(det.get("lo_waist_m", 1e-3)),
            gap=_num(det.get("gap_m", 0.0)),
            efficiency=None if eff is None else _num(eff),
            propagation_transmittance=_num(det.get("propagation_transmittance", 1.0)),
            rotations=tuple(_num(r) for r in det.get("rotations_rad", [0.0])),
        ),
        measurement=measurement,
        analysis=AnalysisConfig(
            channels=tuple(an.get("channels", ["x"])),
            analytic_trace=bool(an.get("analytic_trace", True)),
            montecarlo_trace=bool(an.get("montecarlo_trace", True)),
            inseparability=bool(an.get("inseparability", False)),
            phase_points=int(an.get("phase_points", 720)),
            correction=an.get("correction", "renormalize"),
        ),
        calibration=copy.deepcopy(data.get("calibration", {}) or {}),
    )


def _check_number(problems, path, value, lo=-math.inf, hi=math.inf, lo_open=False):
    try:
        x = _num(value)
    except (TypeError, ValueError):
        problems.append(f"{path}: expected a number, got {value!r}")
        return None
    if not math.isfinite(x):
        problems.append(f"{path}: must be finite, got {x}")
        return None
    if x < lo or (lo_open and x == lo) or x > hi:
        bracket = "(" if lo_open else "["
        problems.append(f"{path}: {x} outside {bracket}{lo}, {hi}]")
        return None
    return x


def validate(config: dict | ScenarioConfig) -> list[str]:
    """Diagnostics for a scenario; an empty list means it is runnable.

    Each diagnostic starts with the dotted path of the offending field.
    """
    data = config.to_dict() if isinstance(config, ScenarioConfig) else config
    problems: list[str] = []
    if not isinstance(data, dict):
        return [f"<root>: expected a mapping, got {type(data).__name__}"]
    if not data.get("name"):
        problems.append("name: missing")
    try:
        int(data.get("seed", 0))
    except (TypeError, ValueError):
        problems.append(f"seed: expected an integer, got {data.get('seed')!r}")

    src = data.get("source")
    if not isinstance(src, dict):
        problems.append("source: missing section")
    else:
        for mode in ("hg10", "hg01"):
            sq = src.get(mode)
            if not isinstance(sq, dict):
                problems.append(f"source.{mode}: missing squeezer")
                continue
            s = _check_number(problems, f"source.{mode}.squeezing_dB", sq.get("squeezing_dB"))
            a = _check_number(
                problems, f"source.{mode}.antisqueezing_dB", sq.get("antisqueezing_dB")
            )
            _check_number(problems, f"source.{mode}.angle_rad", sq.get("angle_rad", 0.0))
            if s is not None and a is not None:
                for msg in SqueezerSpec(s, a).problems():
                    problems.append(f"source.{mode}: unphysical squeezer: {msg}")
        _check_number(
            problems, "source.relative_phase_offset_rad", src.get("relative_phase_offset_rad", 0.0)
        )

    chain = data.get("chain", []) or []
    if not isinstance(chain, list):
        problems.append("chain: expected a list of elements")
        chain = []
    for i, el in enumerate(chain):
        path = f"chain[{i}]"
        if not isinstance(el, dict) or el.get("type") not in ELEMENT_TYPES:
            kind = el.get("type") if isinstance(el, dict) else el
            problems.append(f"{path}.type: unknown element {kind!r}; known {sorted(ELEMENT_TYPES)}")
            continue
        kind = el["type"]
        extra = set(el) - ELEMENT_TYPES[kind] - {"type"}
        if extra:
            problems.append(f"{path}: unknown keys {sorted(extra)} for {kind}")
        missing = REQUIRED_KEYS[kind] - set(el)
        if missing:
            problems.append(f"{path}: missing keys {sorted(missing)} for {kind}")
            continue
        if kind == "gouy_shifter":
            f = _check_number(problems, f"{path}.focal_length_m", el["focal_length_m"], 0, lo_open=True)
            d = _check_number(problems, f"{path}.separation_m", el["separation_m"], 0, lo_open=True)
            if f is not None and d is not None and d >= 2 * f:
                problems.append(
                    f"{path}.separation_m: {d} >= 2*focal_length; no mode-matched beam exists"
                )
            if el.get("axis", "x") not in ("x", "y"):
                problems.append(f"{path}.axis: must be 'x' or 'y', got {el.get('axis')!r}")
        elif kind == "basis_rotation":
            _check_number(problems, f"{path}.angle_rad", el["angle_rad"])
        elif kind == "loss":
            _check_number(problems, f"{path}.transmittance", el["transmittance"], 0.0, 1.0)
            for m in el.get("modes", list(MODE_NAMES)):
                if m not in MODE_NAMES:
                    problems.append(f"{path}.modes: unknown mode {m!r}")
        elif kind == "phase":
            _check_number(problems, f"{path}.angle_rad", el["angle_rad"])
            if el["mode"] not in MODE_NAMES:
                problems.append(f"{path}.mode: unknown mode {el['mode']!r}")

    det = data.get("detector", {}) or {}
    if det.get("kind", "quadrant") not in DETECTOR_KINDS:
        problems.append(f"detector.kind: must be one of {DETECTOR_KINDS}, got {det.get('kind')!r}")
    _check_number(problems, "detector.lo_waist_m", det.get("lo_waist_m", 1e-3), 0, lo_open=True)
    _check_number(problems, "detector.gap_m", det.get("gap_m", 0.0), 0.0)
    if det.get("efficiency") is not None:
        _check_number(problems, "detector.efficiency", det["efficiency"], 0.0, 1.0, lo_open=True)
    _check_number(
        problems,
        "detector.propagation_transmittance",
        det.get("propagation_transmittance", 1.0),
        0.0,
        1.0,
        lo_open=True,
    )
    rotations = det.get("rotations_rad", [0.0])
    if not isinstance(rotations, list) or not rotations:
        problems.append("detector.rotations_rad: expected a non-empty list")
    else:
        for i, r in enumerate(rotations):
            _check_number(problems, f"detector.rotations_rad[{i}]", r)

    meas = data.get("measurement", {}) or {}
    numbers = {}
    for key, default in (
        ("lo_phase_rad", 0.0),
        ("analysis_frequency_Hz", 4.8e6),
        ("bandwidth_Hz", 100e3),
        ("sample_rate_Hz", 20e6),
        ("duration_s", 0.01),
        ("segment_duration_s", 1e-3),
        ("electronic_noise_snu", 0.0),
    ):
        numbers[key] = _check_number(problems, f"measurement.{key}", meas.get(key, default))
    span = meas.get("scan_span_rad")
    if span is not None:
        span = _check_number(problems, "measurement.scan_span_rad", span)
    if None not in numbers.values():
        mc = MeasurementConfig(
            lo_phase=numbers["lo_phase_rad"],
            scan_span=span,
            analysis_frequency=numbers["analysis_frequency_Hz"],
            bandwidth=numbers["bandwidth_Hz"],
            sample_rate=numbers["sample_rate_Hz"],
            duration=numbers["duration_s"],
            electronic_noise=numbers["electronic_noise_snu"],
            segment_duration=numbers["segment_duration_s"],
        )
        problems += [f"measurement: {p}" for p in mc.problems()]

    an = data.get("analysis", {}) or {}
    channels = an.get("channels", ["x"])
    if not isinstance(channels, list) or not channels:
        problems.append("analysis.channels: expected a non-empty list")
    else:
        for c in channels:
            if c not in CHANNEL_COEFFS:
                problems.append(f"analysis.channels: unknown channel {c!r}")
    if an.get("correction", "renormalize") not in CORRECTIONS:
        problems.append(f"analysis.correction: must be one of {CORRECTIONS}")
    _check_number(problems, "analysis.phase_points", an.get("phase_points", 720), 4)
    if an.get("montecarlo_trace", True) and span is not None and None not in numbers.values():
        if abs(span) < 2 * np.pi - 1e-9:
            problems.append("measurement.scan_span_rad: a Monte Carlo trace needs a ramp >= 2*pi")
        if 2 * numbers["segment_duration_s"] * numbers["bandwidth_Hz"] < 100:
            problems.append(
                "measurement.segment_duration_s: fewer than 100 independent samples per segment"
            )
    return problems


# -- files -------------------------------------------------------------------


def bundled_names() -> list[str]:
    root = resources.files("hgentangle") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def _read_yaml(path) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise InvalidConfig(f"{path}: top level must be a mapping")
    return data


def _bundled_path(name: str):
    root = resources.files("hgentangle") / "scenarios"
    path = root / f"{name}.yaml"
    if not path.is_file():
        raise InvalidConfig(f"no bundled scenario {name!r}; known: {bundled_names()}")
    return path


def deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve(data: dict, _depth: int = 0) -> dict:
    """Expand ``extends`` chains; also unwraps a run report's ``config`` echo."""
    if "config" in data and "source" not in data:
        data = data["config"]
    parent = data.get("extends")
    if parent is None:
        return copy.deepcopy(data)
    if _depth > 8:
        raise InvalidConfig("extends chain too deep")
    base = resolve(_read_yaml(_bundled_path(parent)), _depth + 1)
    child = {k: v for k, v in data.items() if k != "extends"}
    base.pop("calibration", None)
    return deep_merge(base, child)


def load_raw(ref: str | Path) -> dict:
    """Resolved mapping for a bundled scenario name or a YAML path."""
    path = Path(ref)
    if path.suffix in (".yaml", ".yml") or path.exists():
        return resolve(_read_yaml(path))
    return resolve(_read_yaml(_bundled_path(str(ref))))


def load_scenario(ref: str | Path) -> ScenarioConfig:
    return ScenarioConfig.from_dict(load_raw(ref))


def dump_yaml(data: dict) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=False, width=100)


def save_scenario(config: ScenarioConfig, path: str | Path, header: str = "") -> Path:
    path = Path(path)
    text = dump_yaml(config.to_dict())
    if header:
        text = "".join(f"# {line}\n" if line else "#\n" for line in header.splitlines()) + text
    path.write_text(text)
    return path


# -- parameter paths ---------------------------------------------------------

_TOKEN = re.compile(r"[^.\[\]]+|\[\d+\]")


def _split(path: str) -> list:
    keys = []
    for tok in _TOKEN.findall(path):
        if tok.startswith("["):
            keys.append(int(tok[1:-1]))
        elif tok.isdigit():
            keys.append(int(tok))
        else:
            keys.append(tok)
    if not keys:
        raise InvalidParameter(f"empty parameter path {path!r}")
    return keys


def get_path(data: dict, path: str):
    node = data
    for key in _split(path):
        try:
            node = node[key]
        except (KeyError, IndexError, TypeError):
            raise InvalidParameter(f"parameter path {path!r} does not resolve") from None
    return node


def set_path(data: dict, path: str, value) -> dict:
    """Copy of ``data`` with the scalar at ``path`` replaced."""
    out = copy.deepcopy(data)
    keys = _split(path)
    current = get_path(out, path)
    if isinstance(current, (dict, list)):
        raise InvalidParameter(f"parameter path {path!r} is not a scalar")
    node = out
    for key in keys[:-1]:
        node = node[key]
    node[keys[-1]] = value
    return out


def parse_value(text: str) -> float:
    """Float from plain numbers or simple expressions such as ``pi/7`` or ``2/pi``."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    if not re.fullmatch(r"[0-9eE.+\-*/() ]*(?:(?:pi|sqrt)[0-9eE.+\-*/() ]*)*", text):
        raise InvalidParameter(f"cannot parse value {text!r}")
    try:
        return float(eval(text, {"__builtins__": {}}, {"pi": np.pi, "sqrt": np.sqrt}))
    except Exception as exc:
        raise InvalidParameter(f"cannot parse value {text!r}: {exc}") from None


