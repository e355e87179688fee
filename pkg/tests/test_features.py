import numpy as np
import pytest
from scipy.signal import resample_poly

from switchpoint.beats import StrongBeatGrid
from switchpoint.dsp import FrameCurve, OnsetCurve, band_onsets, hpss, stft
from switchpoint.features import (
    EmptyIntervalWarning,
    FEATURE_NAMES,
    FeatureSeries,
    agg_count,
    agg_rms,
    extract_features,
    loudness_curve,
)

from conftest import SR, kick_template, make_buffer, place_events, sine


def grid_every(step, count):
    times = np.arange(count) * step
    return StrongBeatGrid(times=times, bar_index=np.arange(count) // 2)


def curve_at(values, times):
    # FrameCurve with frame centers exactly at ``times``
    hop = 512
    idx = np.round((np.asarray(times) * SR - 1024) / hop)
    assert np.allclose(np.diff(idx), np.diff(idx)[0])
    values = np.asarray(values, dtype=float)
    return FrameCurve(values, SR, hop, 2048), None


def test_agg_rms_constant():
    times = (np.arange(100) * 512 + 1024) / SR
    curve = FrameCurve(np.full(100, 3.0), SR, 512, 2048)
    grid = grid_every(0.25, 5)
    series = agg_rms(curve, grid, "harmonic_loudness")
    assert series.n_intervals == 4
    assert np.allclose(series.values, 3.0)


def test_agg_rms_two_frames():
    # one interval holding frame values 3 and 4: RMS = sqrt((9+16)/2)
    values = np.zeros(10)
    values[3] = 3.0
    values[4] = 4.0
    curve = FrameCurve(values, SR, 512, 2048)
    t = curve.frame_times
    grid = StrongBeatGrid(times=np.array([t[3] - 1e-6, t[4] + 1e-6, t[9]]),
                          bar_index=np.zeros(3, dtype=int))
    series = agg_rms(curve, grid, "harmonic_loudness")
    assert series.values[0, 0] == pytest.approx(np.sqrt((9 + 16) / 2), abs=1e-12)


def test_agg_rms_matches_bruteforce(rng):
    mags = rng.uniform(0, 2, size=(5, 400))
    from switchpoint.dsp import Spectrogram
    spec = Spectrogram(mags, SR, 512, 2048, np.arange(5.0), "stft")
    grid = grid_every(0.5, 9)
    series = agg_rms(spec, grid, "cqt")
    times = spec.frame_times
    for i in range(8):
        sel = (times >= grid.times[i]) & (times < grid.times[i + 1])
        expected = np.sqrt(np.mean(mags[:, sel] ** 2, axis=1))
        assert np.max(np.abs(series.values[i] - expected)) < 1e-9


def test_agg_rms_empty_interval_repeats_previous():
    values = np.zeros(100)
    values[:20] = 2.0
    curve = FrameCurve(values, SR, 512, 2048)
    # second interval lies beyond the last frame center (~1.17 s)
    grid = StrongBeatGrid(times=np.array([0.0, 0.25, 5.0, 6.0]),
                          bar_index=np.zeros(4, dtype=int))
    with pytest.warns(EmptyIntervalWarning):
        series = agg_rms(curve, grid, "harmonic_loudness")
    assert series.values[2, 0] == series.values[1, 0]


def _onsets_at(indices, n=2000):
    values = np.zeros(n)
    values[indices] = 1.0
    return OnsetCurve(values, "kick", np.asarray(indices, dtype=int), SR, 512, 2048)


def test_agg_count_four_on_floor():
    # kicks every 0.5 s, strong beats 1 s apart -> 2 per interval
    beat_times = np.arange(0, 10, 0.5)
    idx = np.round((beat_times * SR - 1024) / 512).astype(int)
    onsets = _onsets_at(idx)
    onset_times = onsets.onset_times
    grid = StrongBeatGrid(times=onset_times[::2], bar_index=np.arange(10) // 2)
    series = agg_count(onsets, grid, "kick")
    assert series.sparse
    assert np.all(series.values == 2.0)


def test_agg_count_boundary_onsets_counted_once():
    onsets = _onsets_at([100, 200, 300])
    t = onsets.onset_times
    grid = StrongBeatGrid(times=np.array([t[0], t[1], t[2] + 0.05]),
                          bar_index=np.zeros(3, dtype=int))
    series = agg_count(onsets, grid, "kick")
    assert series.values[:, 0].tolist() == [1.0, 2.0]
    assert series.values.sum() == 3.0


def test_agg_count_snaps_near_boundary_onsets():
    onsets = _onsets_at([100, 200])
    t = onsets.onset_times
    # boundary sits 10 ms after the second onset: the onset snaps onto it
    # and counts into the interval that starts there
    grid = StrongBeatGrid(times=np.array([t[0] - 0.1, t[1] + 0.01, t[1] + 2.0]),
                          bar_index=np.zeros(3, dtype=int))
    series = agg_count(onsets, grid, "kick")
    assert series.values[:, 0].tolist() == [1.0, 1.0]


def test_agg_count_no_onsets():
    onsets = _onsets_at([])
    grid = grid_every(0.5, 8)
    series = agg_count(onsets, grid, "kick")
    assert np.all(series.values == 0.0)


def test_agg_count_total_matches_span(rng):
    idx = np.sort(rng.choice(np.arange(50, 1900), size=40, replace=False))
    onsets = _onsets_at(idx)
    grid = grid_every(2.0, 12)
    series = agg_count(onsets, grid, "kick")
    in_span = ((onsets.onset_times >= grid.times[0]) &
               (onsets.onset_times < grid.times[-1])).sum()
    assert series.values.sum() == in_span


def test_loudness_curve_basics():
    x = sine(440, 2.0)
    x[SR] += 1.0
    pair = hpss(stft(make_buffer(x)))
    perc = loudness_curve(pair.percussive)
    click_frame = np.argmin(np.abs(perc.frame_times - 1.0))
    assert abs(int(np.argmax(perc.values)) - int(click_frame)) <= 2

    silent = loudness_curve(hpss(stft(make_buffer(np.zeros(SR)))).harmonic)
    assert np.all(silent.values == 0.0)


def test_loudness_homogeneity():
    x = sine(440, 1.0)
    pair = hpss(stft(make_buffer(x)))
    one = loudness_curve(pair.harmonic)
    from switchpoint.dsp import Spectrogram
    doubled = Spectrogram(pair.harmonic.magnitudes * 2, SR, 512, 2048,
                          pair.harmonic.bin_frequencies, "stft")
    two = loudness_curve(doubled)
    assert np.allclose(two.values, 2 * one.values)


def test_tempo_invariance_sparse_counts():
    kicks = np.arange(0.25, 11.75, 0.5)
    x = place_events(kicks, kick_template(), 12.0)
    stretched = resample_poly(x, 5, 4)  # 1.25x slower

    def counts_for(signal, step):
        spec = stft(make_buffer(signal))
        return agg_count(band_onsets(spec, "kick"), grid_every(step, 11), "kick").values

    assert np.array_equal(counts_for(x, 1.0), counts_for(stretched, 1.25))


def test_tempo_invariance_dense_rms():
    # amplitude steps survive a joint stretch of audio and grid
    x = sine(220, 12.0, amp=0.2)
    x[6 * SR:] *= 2.0
    stretched = resample_poly(x, 5, 4)

    def loud_for(signal, step):
        pair = hpss(stft(make_buffer(signal)))
        grid = grid_every(step, 11)
        return agg_rms(loudness_curve(pair.harmonic), grid, "harmonic_loudness").values

    loud_a = loud_for(x, 1.0)
    loud_b = loud_for(stretched, 1.25)
    assert np.max(np.abs(loud_b - loud_a)) / loud_a.max() < 0.02


def test_extract_features_shapes(rng):
    kicks = np.arange(0.0, 19.5, 0.5)
    x = place_events(kicks, kick_template(), 20.0) + sine(220, 20.0, amp=0.2)
    grid = grid_every(1.0, 19)
    series = extract_features(make_buffer(x), grid)
    assert set(series) == set(FEATURE_NAMES)
    dims = {"kick": 1, "snare": 1, "hihat": 1, "harmonic_loudness": 1,
            "percussive_loudness": 1, "cqt": 84, "pcp": 12}
    for name, fs in series.items():
        assert fs.n_intervals == grid.n_intervals
        assert fs.dim == dims[name]
        assert fs.sparse == (name in ("kick", "snare", "hihat"))


def test_feature_series_validation():
    with pytest.raises(ValueError):
        FeatureSeries("kick", np.array([[1.0, -2.0]]), sparse=True)
    with pytest.raises(ValueError):
        FeatureSeries("kick", np.array([[np.inf]]), sparse=True)
