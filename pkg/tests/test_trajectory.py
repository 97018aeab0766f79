import math

import numpy as np
import pytest

from photon_router import model, trajectory
from photon_router.errors import ConfigError, RecordFormatError
from photon_router.params import FIG1_PARAMS
from photon_router.trajectory import (
    DETECTOR_PAIR_R,
    DETECTOR_PAIR_T,
    ClickRecord,
    DetectorModel,
    TransitModel,
    inject_background,
    read_record,
    simulate_record,
    write_record,
)


@pytest.fixture(scope="module")
def params():
    return FIG1_PARAMS.with_(drive_ep=model.calibrate_drive(FIG1_PARAMS, 0.093))


@pytest.fixture(scope="module")
def small_record(params):
    tm = TransitModel()
    dm = DetectorModel(background_rate_per_s=25_000.0)
    return simulate_record(params, tm, dm, duration_s=1.5e-3, seed=7)


def test_empty_output_rates_match_linear_response(params):
    r_t, r_r = trajectory.empty_output_rates(params)
    lr = model.linear_response(params, atom_present=False)
    p_in = model.input_flux(params)
    assert r_t / p_in == pytest.approx(lr.t0, rel=1e-12)
    assert r_r / p_in == pytest.approx(lr.r0, rel=1e-12)


def test_envelope_shape():
    assert trajectory.envelope(3.0, 3.0, 2.0) == pytest.approx(1.0)
    assert trajectory.envelope(4.0, 3.0, 2.0) == pytest.approx(0.5)
    assert trajectory.envelope(2.0, 3.0, 2.0) == pytest.approx(0.5)


def test_trajectory_truncation_grows_with_drive():
    assert trajectory.trajectory_truncation(1e-4) == 3
    assert trajectory.trajectory_truncation(0.5) == 6
    assert trajectory.trajectory_truncation(2.0) > trajectory.trajectory_truncation(0.5)


def test_no_atom_counts_are_poisson(params):
    tm = TransitModel(arrival_rate_per_s=0.0)
    dm = DetectorModel(background_rate_per_s=0.0)
    duration_s = 0.02
    rec = simulate_record(params, tm, dm, duration_s=duration_s, seed=11)
    r_t, r_r = trajectory.empty_output_rates(params)
    for pair, rate in ((DETECTOR_PAIR_T, r_t), (DETECTOR_PAIR_R, r_r)):
        mean = rate * dm.efficiency * duration_s * 1e6
        n = rec.times_us(pair).size
        assert abs(n - mean) < 4.0 * math.sqrt(mean)
    # split ratio: both detectors of a pair see comparable counts
    n3 = (rec.detectors == 3).sum()
    n4 = (rec.detectors == 4).sum()
    assert abs(n3 - n4) < 4.0 * math.sqrt(n3 + n4)


def test_simulate_record_is_deterministic(params, small_record):
    again = simulate_record(params, TransitModel(),
                            DetectorModel(background_rate_per_s=25_000.0),
                            duration_s=1.5e-3, seed=7)
    assert again == small_record
    assert simulate_record(params, TransitModel(),
                           DetectorModel(background_rate_per_s=25_000.0),
                           duration_s=1.5e-3, seed=8) != small_record


def test_transit_windows_do_not_overlap(small_record):
    tm = small_record.transit_model
    half = trajectory.WINDOW_HALF_FWHM * tm.envelope_fwhm_us
    tail = trajectory.WINDOW_TAIL_US
    assert small_record.transits, "expected at least one transit in 1.5 ms"
    centers = [t.t_center_us for t in small_record.transits]
    assert centers == sorted(centers)
    for prev, cur in zip(centers, centers[1:]):
        assert cur - half >= prev + half + tail
    for t in small_record.transits:
        assert TransitModel().g_peak_min <= t.g_peak <= TransitModel().g_peak_max
        assert 0.0 <= t.kx < 2.0 * math.pi


def test_timestamps_sorted_and_on_lattice(params):
    dm = DetectorModel(timestamp_resolution_ns=2.0, background_rate_per_s=0.0)
    rec = simulate_record(params, TransitModel(arrival_rate_per_s=0.0), dm,
                          duration_s=2e-3, seed=3)
    assert np.all(np.diff(rec.timestamps_ns) >= 0)
    assert np.all(rec.timestamps_ns % 2 == 0)


def test_times_us_selects_detectors(small_record):
    t_all = small_record.timestamps_ns.astype(float) / 1000.0
    got = small_record.times_us((1, 2))
    mask = np.isin(small_record.detectors, (1, 2))
    assert np.array_equal(got, t_all[mask])


def test_click_record_validation():
    p = FIG1_PARAMS
    with pytest.raises(RecordFormatError, match="length"):
        ClickRecord(np.array([1]), np.array([1, 2]), p, TransitModel(),
                    DetectorModel(), 0, 1e-3)
    with pytest.raises(RecordFormatError, match="1..4"):
        ClickRecord(np.array([5]), np.array([1]), p, TransitModel(),
                    DetectorModel(), 0, 1e-3)
    with pytest.raises(RecordFormatError, match="nondecreasing"):
        ClickRecord(np.array([1, 1]), np.array([2, 1]), p, TransitModel(),
                    DetectorModel(), 0, 1e-3)


def test_inject_background_adds_expected_fraction(small_record):
    out = inject_background(small_record, 0.5, seed=0)
    n0, n1 = small_record.detectors.size, out.detectors.size
    assert abs(n1 - 1.5 * n0) < 4.0 * math.sqrt(0.5 * n0)
    assert np.all(np.diff(out.timestamps_ns) >= 0)
    assert out.transits == small_record.transits
    assert inject_background(small_record, 0.5, seed=0) == out
    with pytest.raises(ConfigError):
        inject_background(small_record, -0.1, seed=0)


def test_record_io_round_trip(tmp_path, small_record):
    path = tmp_path / "rec.csv"
    write_record(small_record, path)
    assert read_record(path) == small_record


def test_record_io_rejects_corruption(tmp_path, small_record):
    path = tmp_path / "rec.csv"
    write_record(small_record, path)
    lines = path.read_text().splitlines()

    bad = list(lines)
    bad[0] = "not a click record"
    (tmp_path / "bad_tag.csv").write_text("\n".join(bad) + "\n")
    with pytest.raises(RecordFormatError):
        read_record(tmp_path / "bad_tag.csv")

    # find a data line and scramble the detector column
    i_data = next(i for i, ln in enumerate(lines)
                  if ln and not ln.startswith("#") and "," in ln)
    bad = list(lines)
    bad[i_data] = "9," + bad[i_data].split(",", 1)[1]
    (tmp_path / "bad_det.csv").write_text("\n".join(bad) + "\n")
    with pytest.raises(RecordFormatError, match=str(i_data + 1)):
        read_record(tmp_path / "bad_det.csv")


def test_config_validation():
    with pytest.raises(ConfigError):
        TransitModel(arrival_rate_per_s=-1.0)
    with pytest.raises(ConfigError):
        TransitModel(g_peak_min=70.0, g_peak_max=60.0)
    with pytest.raises(ConfigError):
        DetectorModel(efficiency=1.5)
    with pytest.raises(ConfigError):
        DetectorModel(timestamp_resolution_ns=0.0)
    with pytest.raises(ConfigError):
        simulate_record(FIG1_PARAMS, TransitModel(), DetectorModel(),
                        duration_s=0.0, seed=1)
