import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hgentangle.detection import (
    X_GAINS,
    MeasurementConfig,
    VarianceTrace,
    analytic_trace,
    bandpass,
    channel_series,
    combine,
    estimate_variance,
    expected_measured_variance,
    read_traces,
    relative_standard_error,
    scan_trace,
    simulate_photocurrents,
    write_traces,
)
from hgentangle.errors import CalibrationError, InvalidConfig
from hgentangle.gaussian import (
    HG01,
    HG10,
    SqueezerSpec,
    apply_basis_rotation,
    apply_phase,
    quadrature_variance,
    two_mode_source,
    vacuum,
)

FS, FC, BW = 20e6, 4.8e6, 100e3
LOSSLESS = (1.0, 1.0)


def band(x):
    return bandpass(x, FC, BW, FS)


def measured(state, config, channel="x"):
    rec = simulate_photocurrents(state, LOSSLESS, config)
    sig, cal = channel_series(rec, channel)
    return estimate_variance(band(sig), band(cal))


def source(db=-4.0, anti=4.0, offset=0.0):
    return two_mode_source(SqueezerSpec(db, anti, 0.0), SqueezerSpec(db, anti, offset))


# -- filter --------------------------------------------------------------------


def test_white_noise_parseval(rng):
    n = 2_000_000
    x = rng.standard_normal(n)
    y = band(x)
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, 1 / FS)
    inband = (freqs >= FC - BW / 2) & (freqs <= FC + BW / 2)
    # exact Parseval on the retained bins (none at DC or Nyquist)
    assert np.sum(y**2) == pytest.approx(2 * np.sum(np.abs(spec[inband]) ** 2) / n, rel=1e-10)
    # expectation: variance fraction 2*width/sample_rate
    expected = 2 * BW / FS
    assert np.var(y) == pytest.approx(expected, rel=3 / np.sqrt(n * BW / FS))


def test_tone_pass_and_reject():
    n = 20_000  # 1 kHz bins: band centre and edge sit on bins
    t = np.arange(n) / FS
    centre = np.cos(2 * np.pi * FC * t + 0.3)
    outside = np.cos(2 * np.pi * (FC + BW) * t)
    assert np.max(np.abs(band(centre) - centre)) < 1e-6
    assert np.max(np.abs(band(outside))) < 1e-10


def test_filter_idempotent(rng):
    x = rng.standard_normal(100_000)
    y = band(x)
    assert np.max(np.abs(band(y) - y)) < 1e-10


def test_filter_errors():
    with pytest.raises(InvalidConfig):
        bandpass(np.zeros(100), FC, 0.0, FS)
    with pytest.raises(InvalidConfig):
        bandpass(np.zeros(100), 9.99e6, BW, FS)


# -- combine -------------------------------------------------------------------


def test_combine_gains(rng):
    rec = simulate_photocurrents(source(), LOSSLESS, MeasurementConfig(seed=3))
    px = rec.pixels()
    assert np.array_equal(combine(px, (1, 1, -1, -1)), rec.channels["x"])
    assert np.array_equal(combine(px, (1, -1, 1, -1)), rec.channels["y"])
    assert np.array_equal(combine(rec.channels, X_GAINS), rec.channels["x"])
    assert not np.any(combine(px, (0, 0, 0, 0)))
    with pytest.raises(InvalidConfig):
        combine(px, (1, 1, 1))


@given(
    st.lists(st.integers(-4, 4), min_size=4, max_size=4),
    st.lists(st.integers(-4, 4), min_size=4, max_size=4),
    st.integers(-3, 3),
    st.integers(-3, 3),
)
def test_combine_linear(g1, g2, a, b):
    px = np.random.default_rng(0).integers(-1000, 1000, size=(4, 64)).astype(float)
    lhs = combine(px, a * np.array(g1) + b * np.array(g2))
    assert np.array_equal(lhs, a * combine(px, g1) + b * combine(px, g2))


# -- estimation ----------------------------------------------------------------


def test_estimate_identity_and_zero_calibration(rng):
    x = rng.standard_normal(1000)
    assert estimate_variance(x, x) == 1.0
    with pytest.raises(CalibrationError):
        estimate_variance(x, np.zeros(1000))


def test_relative_error_formula():
    assert relative_standard_error(0.01, 1e5) == pytest.approx(np.sqrt(2 / (0.01 * 1e5 * 2)))


def test_vacuum_matches_calibration():
    cfg = MeasurementConfig(seed=11)
    v = measured(vacuum([HG10, HG01]), cfg)
    se = np.sqrt(2) * relative_standard_error(cfg.duration, cfg.bandwidth)
    assert abs(v - 1) < 3 * se


def test_paper_squeezing_both_modes():
    cfg = MeasurementConfig(seed=17, duration=0.05)
    state = source(-1.7, 1.7)
    target = 10 ** -0.17
    se = target * np.sqrt(2) * relative_standard_error(cfg.duration, cfg.bandwidth)
    for ch in ("x", "y"):
        assert abs(measured(state, cfg, ch) - target) < 3 * se


def test_four_db_long_record():
    cfg = MeasurementConfig(seed=5, duration=0.1)
    target = 10 ** -0.4
    se = target * np.sqrt(2) * relative_standard_error(cfg.duration, cfg.bandwidth)
    assert abs(measured(source(), cfg) - target) < 3 * se


def test_blocked_lo_reads_electronic_noise():
    cfg = MeasurementConfig(seed=23, electronic_noise=0.05, lo_blocked=True, duration=0.05)
    v = measured(source(), cfg)
    # electronic noise is white, so the band holds only its in-band share
    assert v == pytest.approx(0.05, rel=3 * np.sqrt(2) * relative_standard_error(0.05, BW))


def test_electronic_noise_in_measurement():
    cfg = MeasurementConfig(seed=29, electronic_noise=0.05, duration=0.05)
    expected = float(expected_measured_variance(source(), LOSSLESS, "x", 0.0, 0.05))
    assert expected == pytest.approx(0.95 * 10 ** -0.4 + 0.05)
    se = expected * np.sqrt(2) * relative_standard_error(cfg.duration, BW)
    assert abs(measured(source(), cfg) - expected) < 3 * se


def _cross(rec, cfg):
    x, y = band(rec.channels["x"]), band(rec.channels["y"])
    cal = band(rec.calibration["x"])
    return np.mean(x * y) / np.var(cal), np.var(x) / np.var(cal), np.var(y) / np.var(cal)


def test_independent_squeezers_uncorrelated():
    cfg = MeasurementConfig(seed=31, duration=0.05)
    c, vx, vy = _cross(simulate_photocurrents(source(-4, 6.5, 0.4), LOSSLESS, cfg), cfg)
    se = np.sqrt(vx * vy / (2 * cfg.duration * BW))
    assert abs(c) < 3 * se


def test_simultaneous_channels_share_correlations():
    state = apply_basis_rotation(apply_phase(source(), "HG10", np.pi / 2), "HG10", "HG01", np.pi / 4)
    cfg = MeasurementConfig(seed=37, duration=0.05, lo_phase=0.3)
    c, vx, vy = _cross(simulate_photocurrents(state, LOSSLESS, cfg), cfg)
    h = 1 / np.sqrt(2)
    vs = quadrature_variance(state, [h, h], 0.3)
    vd = quadrature_variance(state, [h, -h], 0.3)
    analytic = (vs - vd) / 2
    assert abs(analytic) > 0.5
    se = np.sqrt((vx * vy + analytic**2) / (2 * cfg.duration * BW))
    assert abs(c - analytic) < 3 * se


def test_determinism():
    cfg = MeasurementConfig(seed=41)
    a = simulate_photocurrents(source(), LOSSLESS, cfg)
    b = simulate_photocurrents(source(), LOSSLESS, cfg)
    c = simulate_photocurrents(source(), LOSSLESS, MeasurementConfig(seed=42))
    for k in a.channels:
        assert np.array_equal(a.channels[k], b.channels[k])
    assert not np.array_equal(a.channels["x"], c.channels["x"])
    d = simulate_photocurrents(source(), LOSSLESS, cfg, stream=1)
    assert not np.array_equal(a.channels["x"], d.channels["x"])


def test_pixel_arithmetic_exact():
    rec = simulate_photocurrents(source(), LOSSLESS, MeasurementConfig(seed=43))
    a, b, c, d = rec.pixels()
    assert np.allclose(rec.channels["x"], (a + b) - (c + d), atol=1e-12)
    assert np.allclose(rec.channels["y"], (a + c) - (b + d), atol=1e-12)
    assert len({len(v) for v in rec.channels.values()}) == 1


def test_timeseries_csv(tmp_path):
    rec = simulate_photocurrents(source(), LOSSLESS, MeasurementConfig(seed=1))
    path = rec.to_csv(tmp_path / "ts.csv", max_rows=10)
    lines = path.read_text().splitlines()
    assert lines[0] == "time_s,A,B,C,D,x,y"
    assert len(lines) == 11


def test_config_errors():
    with pytest.raises(InvalidConfig):
        simulate_photocurrents(source(), LOSSLESS, MeasurementConfig(analysis_frequency=9.99e6))
    with pytest.raises(InvalidConfig):
        simulate_photocurrents(source(), LOSSLESS, MeasurementConfig(bandwidth=3e7))
    with pytest.raises(InvalidConfig):
        simulate_photocurrents(source(), (0.0, 1.0), MeasurementConfig())
    assert MeasurementConfig(duration=1e-4).problems()


@pytest.mark.slow
def test_hundred_seed_z_test():
    """Mean of 100 independent estimates sits within 3 standard errors of the truth."""
    state = source(-4.0, 6.5)
    cfg = MeasurementConfig(duration=0.005)
    est = np.array([measured(state, MeasurementConfig(**{**cfg.__dict__, "seed": s})) for s in range(100)])
    target = 10 ** -0.4
    se = est.std(ddof=1) / np.sqrt(len(est))
    assert abs(est.mean() - target) < 3 * se
    # the per-record error model is right to within sampling error of its own
    per = np.sqrt(2) * relative_standard_error(cfg.duration, BW) * target
    assert 0.75 < est.std(ddof=1) / per < 1.25


# -- scan traces ---------------------------------------------------------------

SCAN = MeasurementConfig(scan_span=2 * np.pi, duration=0.02, seed=7)


def test_vacuum_scan_is_flat():
    tr = scan_trace(vacuum([HG10, HG01]), LOSSLESS, SCAN)
    assert np.allclose(tr.analytic, 1.0)
    assert abs(tr.variance.mean() - 1) < 3 * tr.standard_error.mean() / np.sqrt(len(tr.phi)) + 0.03
    assert np.all(np.abs(tr.variance - 1) < 4.5 * tr.standard_error)


def test_single_mode_scan_shape():
    state = source(-4.0, 6.5)
    phi = np.linspace(0, 2 * np.pi, 2001)
    an = analytic_trace(state, LOSSLESS, "x", phi)
    assert an.variance.min() == pytest.approx(10 ** -0.4, abs=1e-9)
    assert an.variance.max() == pytest.approx(10 ** 0.65, abs=1e-9)
    assert np.allclose(an.variance[:1000], an.variance[1000:2000], atol=1e-12)  # period pi
    tr = scan_trace(state, LOSSLESS, SCAN)
    z = (tr.variance - tr.analytic) / tr.standard_error
    assert abs(z.mean()) < 1.0 and 0.6 < z.std() < 1.5


def test_entangled_sum_dips_below_shot_noise():
    state = apply_basis_rotation(apply_phase(source(), "HG10", np.pi / 2), "HG10", "HG01", np.pi / 4)
    tr = scan_trace(state, LOSSLESS, SCAN, channel="sum")
    assert tr.variance.min() < 1
    assert tr.analytic.min() < 0.6  # 20 windows average over 0.31 rad each


def test_scan_errors():
    with pytest.raises(InvalidConfig):
        scan_trace(vacuum([HG10, HG01]), LOSSLESS, MeasurementConfig(scan_span=np.pi))
    with pytest.raises(InvalidConfig):
        scan_trace(
            vacuum([HG10, HG01]),
            LOSSLESS,
            MeasurementConfig(scan_span=2 * np.pi, segment_duration=1e-4),
        )
    with pytest.raises(InvalidConfig):
        scan_trace(vacuum([HG10, HG01]), LOSSLESS, SCAN, channel="z")


def test_folding_averages_periods():
    phi = np.arange(8) * np.pi / 4
    tr = VarianceTrace("x", phi, np.arange(8.0), np.ones(8), np.arange(8.0))
    f = tr.folded()
    assert np.allclose(f.phi, phi[:4])
    assert np.allclose(f.variance, [2, 3, 4, 5])
    assert np.allclose(f.standard_error, 1 / np.sqrt(2))


def test_trace_csv_roundtrip(tmp_path):
    phi = np.linspace(0, np.pi, 5)
    traces = [VarianceTrace("x", phi, phi + 1), VarianceTrace("sum", phi, 2 * phi + 1)]
    path = write_traces(tmp_path / "t.csv", traces)
    assert path.read_text().splitlines()[0] == "phi_rad,variance_snu,channel"
    back = read_traces(path)
    assert np.allclose(back["sum"].variance, 2 * phi + 1)
