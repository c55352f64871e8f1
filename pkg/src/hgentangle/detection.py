"""Simulated quadrant-detector homodyne records.

The two measured modes are read out by the x and y pixel combinations of a
quadrant detector.  Their quadrature noise is synthesised in the frequency
domain: white vacuum noise everywhere, coloured inside the analysis band by
the Cholesky factor of the state covariance.  Electronic noise is white and
is expressed as a fraction ``e`` of the calibration (vacuum) level, so a
vacuum record normalises to 1 and a blocked LO reads ``e``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import CalibrationError, InvalidConfig
from .gaussian import GaussianState, apply_loss, quadrature_variance

PIXELS = ("A", "B", "C", "D")
X_GAINS = (1.0, 1.0, -1.0, -1.0)
Y_GAINS = (1.0, -1.0, 1.0, -1.0)
# Hadamard partners of x and y; they carry only vacuum noise
SUM_GAINS = (1.0, 1.0, 1.0, 1.0)
Z_GAINS = (1.0, -1.0, -1.0, 1.0)
MIN_INDEPENDENT_SAMPLES = 100


@dataclass(frozen=True)
class MeasurementConfig:
    lo_phase: float = 0.0
    scan_span: float | None = None
    analysis_frequency: float = 4.8e6
    bandwidth: float = 100e3
    sample_rate: float = 20e6
    duration: float = 0.01
    seed: int = 0
    electronic_noise: float = 0.0
    segment_duration: float = 1e-3
    lo_blocked: bool = False

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    def problems(self) -> list[str]:
        out = []
        if self.bandwidth <= 0:
            out.append(f"bandwidth must be positive, got {self.bandwidth}")
        if self.sample_rate <= 0 or self.duration <= 0:
            out.append("sample rate and duration must be positive")
            return out
        if self.analysis_frequency - self.bandwidth / 2 < 0:
            out.append("analysis band extends below 0 Hz")
        if self.analysis_frequency + self.bandwidth / 2 >= self.sample_rate / 2:
            out.append(
                f"Nyquist violated: band edge {self.analysis_frequency + self.bandwidth / 2:g} Hz "
                f">= sample_rate/2 = {self.sample_rate / 2:g} Hz"
            )
        if self.duration * self.bandwidth < MIN_INDEPENDENT_SAMPLES:
            out.append(
                f"duration*bandwidth = {self.duration * self.bandwidth:g} < "
                f"{MIN_INDEPENDENT_SAMPLES}; too few independent samples"
            )
        if not 0.0 <= self.electronic_noise < 1.0:
            out.append(f"electronic noise fraction must lie in [0, 1), got {self.electronic_noise}")
        return out

    def check(self) -> "MeasurementConfig":
        problems = self.problems()
        if problems:
            raise InvalidConfig("; ".join(problems))
        return self

    def phases(self, offset: float = 0.0) -> np.ndarray:
        """LO phase at every sample."""
        n = self.n_samples
        if self.scan_span is None:
            return np.full(n, self.lo_phase + offset)
        return self.lo_phase + offset + self.scan_span * np.arange(n) / n


@dataclass(frozen=True)
class TimeSeriesSet:
    channels: dict[str, np.ndarray]
    sample_rate: float
    seed: int
    phases: np.ndarray
    calibration: dict[str, np.ndarray]
    config: MeasurementConfig = field(repr=False)

    @property
    def n_samples(self) -> int:
        return len(self.phases)

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate

    def pixels(self) -> np.ndarray:
        return np.stack([self.channels[p] for p in PIXELS])

    def to_csv(self, path: str | Path, max_rows: int | None = None) -> Path:
        path = Path(path)
        n = self.n_samples if max_rows is None else min(max_rows, self.n_samples)
        cols = ["time_s", *PIXELS, "x", "y"]
        data = np.column_stack([self.time[:n]] + [self.channels[c][:n] for c in cols[1:]])
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.10e")
        return path


def band_mask(n: int, sample_rate: float, center: float, width: float) -> np.ndarray:
    """Boolean mask over ``rfft`` bins inside ``[center - width/2, center + width/2]``."""
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    return (freqs >= center - width / 2) & (freqs <= center + width / 2)


def bandpass(series, center: float, width: float, sample_rate: float) -> np.ndarray:
    """Zero-phase brick-wall band-pass along the last axis."""
    if width <= 0:
        raise InvalidConfig(f"filter width must be positive, got {width}")
    if center + width / 2 >= sample_rate / 2 or center - width / 2 < 0:
        raise InvalidConfig(
            f"band [{center - width / 2:g}, {center + width / 2:g}] Hz outside (0, {sample_rate / 2:g})"
        )
    series = np.asarray(series, dtype=float)
    n = series.shape[-1]
    spec = np.fft.rfft(series, axis=-1)
    spec[..., ~band_mask(n, sample_rate, center, width)] = 0.0
    return np.fft.irfft(spec, n=n, axis=-1)


def combine(pixels, gains: Sequence[float]) -> np.ndarray:
    """Weighted pixel sum; ``pixels`` is a (4, n) array or a mapping keyed A..D."""
    if isinstance(pixels, Mapping):
        pixels = np.stack([pixels[p] for p in PIXELS])
    pixels = np.asarray(pixels, dtype=float)
    gains = np.asarray(gains, dtype=float)
    if gains.shape != (pixels.shape[0],):
        raise InvalidConfig(f"need {pixels.shape[0]} gains, got {gains.shape}")
    return gains @ pixels


def estimate_variance(series, calibration) -> float:
    """Variance of ``series`` in units of the calibration record's variance."""
    ref = float(np.var(calibration))
    if ref == 0.0:
        raise CalibrationError("calibration record has zero variance")
    return float(np.var(series)) / ref


def relative_standard_error(duration: float, bandwidth: float) -> float:
    """Relative standard error of a variance estimated in a brick-wall band."""
    return 1.0 / np.sqrt(duration * bandwidth)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stream)])


def _quadrature_noise(cov: np.ndarray, config: MeasurementConfig, rng) -> np.ndarray:
    """Rows of white unit noise whose in-band cross-spectrum equals ``cov``."""
    n = config.n_samples
    white = rng.standard_normal((cov.shape[0], n))
    spec = np.fft.rfft(white, axis=-1)
    band = band_mask(n, config.sample_rate, config.analysis_frequency, config.bandwidth)
    chol = np.linalg.cholesky(cov)
    spec[:, band] = chol @ spec[:, band]
    return np.fft.irfft(spec, n=n, axis=-1)


def _channel_record(
    cov: np.ndarray, phases: np.ndarray, config: MeasurementConfig, rng, blocked: bool
) -> np.ndarray:
    """Four Hadamard channels (sum, x, y, z) in calibration units."""
    n = config.n_samples
    e = config.electronic_noise
    quad = _quadrature_noise(cov, config, rng)
    vac = rng.standard_normal((2, n))
    el = rng.standard_normal((4, n))
    c, s = np.cos(phases), np.sin(phases)
    shot = np.stack([vac[0], quad[0] * c + quad[1] * s, quad[2] * c + quad[3] * s, vac[1]])
    if blocked:
        shot = np.zeros_like(shot)
    return np.sqrt(1.0 - e) * shot + np.sqrt(e) * el


def _pixels_from_channels(ch: np.ndarray) -> np.ndarray:
    hadamard = np.array([SUM_GAINS, X_GAINS, Y_GAINS, Z_GAINS])
    # rows of the Hadamard matrix are orthogonal with norm^2 = 4
    return hadamard.T @ ch / 4.0


def detected_state(
    state: GaussianState, efficiencies: Sequence[float], modes: Sequence[str] = ("HG10", "HG01")
) -> GaussianState:
    """State after the detector's mode-projection losses."""
    for mode, eta in zip(modes, efficiencies):
        state = apply_loss(state, mode, eta)
    return state


def simulate_photocurrents(
    state: GaussianState,
    efficiencies: Sequence[float],
    config: MeasurementConfig,
    modes: Sequence[str] = ("HG10", "HG01"),
    phase_offset: float = 0.0,
    stream: int = 0,
) -> TimeSeriesSet:
    """Quadrant-detector record for the two modes read by the x and y channels.

    ``efficiencies`` are the detector projection efficiencies of the x and y
    channels.  ``stream`` selects an independent noise realisation for the
    same seed; the calibration record always uses its own stream.
    """
    config.check()
    eff = tuple(float(e) for e in efficiencies)
    if len(eff) != 2 or not all(0.0 < e <= 1.0 for e in eff):
        raise InvalidConfig(f"need two efficiencies in (0, 1], got {efficiencies}")
    lossy = detected_state(state, eff, modes)
    slots = [2 * lossy.index(m) + j for m in modes for j in (0, 1)]
    cov = lossy.cov[np.ix_(slots, slots)]

    phases = config.phases(phase_offset)
    ch = _channel_record(cov, phases, config, _rng(config.seed, 2 * stream), config.lo_blocked)
    cal = _channel_record(
        np.eye(4), phases, config, _rng(config.seed, 2 * stream + 1), blocked=False
    )
    pixels = _pixels_from_channels(ch)
    cal_pixels = _pixels_from_channels(cal)
    channels = {p: pixels[i] for i, p in enumerate(PIXELS)}
    channels["x"] = combine(pixels, X_GAINS)
    channels["y"] = combine(pixels, Y_GAINS)
    calibration = {"x": combine(cal_pixels, X_GAINS), "y": combine(cal_pixels, Y_GAINS)}
    return TimeSeriesSet(channels, config.sample_rate, config.seed, phases, calibration, config)


CHANNEL_COEFFS = {
    "x": (1.0, 0.0),
    "y": (0.0, 1.0),
    "sum": (1 / np.sqrt(2), 1 / np.sqrt(2)),
    "diff": (1 / np.sqrt(2), -1 / np.sqrt(2)),
}
# the difference trace is recorded with the LO advanced by pi/2
CHANNEL_PHASE_OFFSET = {"x": 0.0, "y": 0.0, "sum": 0.0, "diff": np.pi / 2}


def channel_series(record: TimeSeriesSet, channel: str) -> tuple[np.ndarray, np.ndarray]:
    """(signal, calibration) series for a named channel of a record."""
    a, b = CHANNEL_COEFFS[channel]
    sig = a * record.channels["x"] + b * record.channels["y"]
    cal = a * record.calibration["x"] + b * record.calibration["y"]
    return sig, cal


def expected_measured_variance(
    state: GaussianState,
    efficiencies: Sequence[float],
    channel: str,
    phi,
    electronic_noise: float = 0.0,
    modes: Sequence[str] = ("HG10", "HG01"),
) -> np.ndarray:
    """Analytic counterpart of a measured variance, electronic noise included."""
    lossy = detected_state(state, efficiencies, modes)
    a, b = CHANNEL_COEFFS[channel]
    coeffs = {modes[0]: a, modes[1]: b}
    offset = CHANNEL_PHASE_OFFSET[channel]
    phi = np.asarray(phi, dtype=float)
    v = np.vectorize(lambda p: quadrature_variance(lossy, coeffs, p + offset))(phi)
    e = electronic_noise
    return (1.0 - e) * v + e


@dataclass(frozen=True)
class VarianceTrace:
    channel: str
    phi: np.ndarray
    variance: np.ndarray
    standard_error: np.ndarray | None = None
    analytic: np.ndarray | None = None

    def folded(self, period: float = np.pi) -> "VarianceTrace":
        """Average points one ``period`` apart; the trace must span whole periods.

        Homodyne variances repeat every pi in LO phase, so a 2*pi scan holds two
        independent estimates of each point.
        """
        n = len(self.phi)
        span = n * (self.phi[1] - self.phi[0]) if n > 1 else 0.0
        reps = int(round(span / period))
        if reps < 2 or n % reps or not np.isclose(span, reps * period, rtol=1e-6):
            return self
        m = n // reps
        shaped = lambda a: None if a is None else np.asarray(a).reshape(reps, m)
        var = shaped(self.variance).mean(axis=0)
        err = None if self.standard_error is None else (
            np.sqrt((shaped(self.standard_error) ** 2).sum(axis=0)) / reps
        )
        ana = None if self.analytic is None else shaped(self.analytic).mean(axis=0)
        return VarianceTrace(self.channel, np.array(self.phi[:m]), var, err, ana)

    def to_rows(self) -> list[tuple[float, float, str]]:
        return [(float(p), float(v), self.channel) for p, v in zip(self.phi, self.variance)]


def write_traces(path: str | Path, traces: Sequence[VarianceTrace]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phi_rad", "variance_snu", "channel"])
        for trace in traces:
            for phi, v, name in trace.to_rows():
                writer.writerow([f"{phi:.12g}", f"{v:.12g}", name])
    return path


def read_traces(path: str | Path) -> dict[str, VarianceTrace]:
    rows: dict[str, list[tuple[float, float]]] = {}
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            rows.setdefault(row["channel"], []).append(
                (float(row["phi_rad"]), float(row["variance_snu"]))
            )
    return {
        name: VarianceTrace(name, np.array([r[0] for r in pts]), np.array([r[1] for r in pts]))
        for name, pts in rows.items()
    }


def analytic_trace(
    state: GaussianState,
    efficiencies: Sequence[float],
    channel: str,
    phi: np.ndarray,
    electronic_noise: float = 0.0,
    modes: Sequence[str] = ("HG10", "HG01"),
    label: str | None = None,
) -> VarianceTrace:
    values = expected_measured_variance(state, efficiencies, channel, phi, electronic_noise, modes)
    return VarianceTrace(label or channel, np.asarray(phi), values, None, values)


def scan_trace(
    state: GaussianState,
    efficiencies: Sequence[float],
    config: MeasurementConfig,
    channel: str = "x",
    modes: Sequence[str] = ("HG10", "HG01"),
    label: str | None = None,
    stream: int = 0,
) -> VarianceTrace:
    """Windowed variance estimates of a phase-scanned record.

    Each window is tagged with its mean LO phase.  ``analytic`` holds the
    expected measured variance averaged over the same window.  Channels x, y
    and sum come from one simultaneous record; diff is recorded separately
    with the LO advanced by pi/2.  ``stream`` picks an independent record pair.
    """
    if channel not in CHANNEL_COEFFS:
        raise InvalidConfig(f"unknown channel {channel!r}; choose from {sorted(CHANNEL_COEFFS)}")
    if config.scan_span is None or abs(config.scan_span) < 2 * np.pi - 1e-12:
        raise InvalidConfig("a scan trace needs an LO phase ramp covering at least 2*pi")
    if 2 * config.segment_duration * config.bandwidth < MIN_INDEPENDENT_SAMPLES:
        raise InvalidConfig(
            f"segment of {config.segment_duration:g} s holds fewer than "
            f"{MIN_INDEPENDENT_SAMPLES} independent filtered samples"
        )
    offset = CHANNEL_PHASE_OFFSET[channel]
    record_stream = 2 * stream + (1 if channel == "diff" else 0)
    record = simulate_photocurrents(state, efficiencies, config, modes, offset, record_stream)
    sig, cal = channel_series(record, channel)
    band = (config.analysis_frequency, config.bandwidth, config.sample_rate)
    sig = bandpass(sig, *band)
    cal = bandpass(cal, *band)
    cal_var = float(np.var(cal))
    if cal_var == 0.0:
        raise CalibrationError("calibration record has zero variance")

    seg = int(round(config.segment_duration * config.sample_rate))
    n_seg = record.n_samples // seg
    nominal = record.phases - offset
    phi = np.empty(n_seg)
    var = np.empty(n_seg)
    expected = np.empty(n_seg)
    for k in range(n_seg):
        sl = slice(k * seg, (k + 1) * seg)
        phi[k] = nominal[sl].mean()
        var[k] = float(np.var(sig[sl])) / cal_var
        sub = np.linspace(nominal[sl][0], nominal[sl][-1], 33)
        expected[k] = expected_measured_variance(
            state, efficiencies, channel, sub, config.electronic_noise, modes
        ).mean()
    rel = np.sqrt(
        relative_standard_error(config.segment_duration, config.bandwidth) ** 2
        + relative_standard_error(config.duration, config.bandwidth) ** 2
    )
    return VarianceTrace(label or channel, phi, var, rel * expected, expected)
