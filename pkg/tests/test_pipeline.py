import numpy as np
import pytest

from switchpoint.errors import TrackTooShort
from switchpoint.features import FrameFeatures
from switchpoint.pipeline import AnalysisResult, PipelineConfig, explain, get_switch_points
from switchpoint.selection import SwitchPoint, SwitchPointSet, PeriodEstimate
from switchpoint.synth import Section, TrackScript, render


@pytest.fixture(scope="module")
def three_section_track():
    # intro (drums only), core (adds harmonic layers), outro (thins out)
    script = TrackScript(128.0, 64, (
        Section(0, ("kick4", "hihat8")),
        Section(16, ("kick4", "hihat8", "snare24", "bass_loop")),
        Section(48, ("kick4", "pad_chord:A3")),
    ), seed=11)
    rendered = render(script)
    frames = FrameFeatures.from_buffer(rendered.buffer)
    return rendered, frames


@pytest.fixture(scope="module")
def loop_track():
    script = TrackScript(130.0, 24, (
        Section(0, ("kick4", "hihat8", "bass_loop")),
    ), seed=7)
    rendered = render(script)
    frames = FrameFeatures.from_buffer(rendered.buffer)
    return rendered, frames


def test_three_section_boundaries_recovered(three_section_track):
    rendered, frames = three_section_track
    result = get_switch_points(rendered.buffer, rendered.grid, frame_features=frames)
    times = result.switch_points.times
    for boundary in rendered.boundaries_s:
        assert np.min(np.abs(times - boundary)) <= 0.5  # recall 2/2
    # and the cascade leaves nothing away from the true boundaries
    for t in times:
        assert np.min(np.abs(rendered.boundaries_s - t)) <= 0.5


def test_ablation_novelty_superset(three_section_track):
    rendered, frames = three_section_track
    full = get_switch_points(rendered.buffer, rendered.grid, frame_features=frames)
    novelty_only = get_switch_points(
        rendered.buffer, rendered.grid,
        PipelineConfig(enabled_rules=("novelty",)), frame_features=frames)
    assert set(full.switch_points.indices).issubset(set(novelty_only.switch_points.indices))
    counts = full.stage_counts
    assert counts["novelty"] >= counts["period"] >= counts["salience"]


def test_loop_track_interior_empty(loop_track):
    rendered, frames = loop_track
    result = get_switch_points(rendered.buffer, rendered.grid, frame_features=frames)
    # no structural change: at most the track-start zero-padding peak remains
    assert all(idx == 0 for idx in result.switch_points.indices)


def test_emitted_times_match_grid(three_section_track):
    rendered, frames = three_section_track
    result = get_switch_points(rendered.buffer, rendered.grid, frame_features=frames)
    for p in result.switch_points.points:
        assert abs(p.time_s - result.strong_beat_times[p.strong_beat_index]) < 1e-6
        assert p.contributing_features


def test_pipeline_deterministic(loop_track):
    rendered, _ = loop_track

    def run():
        result = get_switch_points(rendered.buffer, rendered.grid)
        return (
            result.switch_points.indices.tolist(),
            result.period.offset,
            result.period.score_per_offset.tolist(),
            {k: v.tolist() for k, v in result.per_feature_peaks.items()},
        )

    assert run() == run()


def test_track_too_short():
    script = TrackScript(128.0, 8, (Section(0, ("kick4",)),), seed=0)
    rendered = render(script)
    with pytest.raises(TrackTooShort):
        get_switch_points(rendered.buffer, rendered.grid)


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(peak_threshold=0.0)
    with pytest.raises(ValueError):
        PipelineConfig(kernel_bars=7)
    with pytest.raises(ValueError):
        PipelineConfig(enabled_rules=("period",))
    with pytest.raises(ValueError):
        PipelineConfig(enabled_rules=("novelty", "loudness"))
    assert PipelineConfig().to_dict()["enabled_rules"] == ["novelty", "period", "salience"]


def test_harmony_only_change_covered_by_spectrum(three_section_track):
    # both chords sit fully above the kick band, so the root change leaves
    # loudness and drums untouched and only the spectrum features move
    script = TrackScript(128.0, 32, (
        Section(0, ("kick4", "pad_chord:E3")),
        Section(16, ("kick4", "pad_chord:G3")),
    ), seed=13)
    rendered = render(script)
    result = get_switch_points(rendered.buffer, rendered.grid)
    report = explain(result, annotation_times=rendered.boundaries_s)
    col = 0
    assert report["matrix"]["cqt"][col] == 1
    assert report["matrix"]["pcp"][col] == 1
    for name in ("kick", "snare", "hihat", "harmonic_loudness", "percussive_loudness"):
        assert report["matrix"][name][col] == 0
    assert report["group_counts"]["spectrum"] == 1
    assert report["missed"] == 0


def _fake_result(per_feature_peaks, strong_times, points):
    return AnalysisResult(
        track_id="fake",
        switch_points=SwitchPointSet(tuple(points)),
        period=PeriodEstimate(0, np.zeros(8)),
        grid={"tempo_bpm": 120.0, "downbeat_offset": 0, "source": "external", "n_beats": 64},
        per_feature_peaks={name: np.asarray(idx, dtype=int)
                           for name, idx in per_feature_peaks.items()},
        strong_beat_times=strong_times,
        stage_counts={"novelty": len(points)},
        config=PipelineConfig(),
    )


def test_explain_single_feature_point():
    strong = np.arange(40) * 1.0
    peaks = {name: [] for name in
             ("kick", "snare", "hihat", "harmonic_loudness", "percussive_loudness", "cqt", "pcp")}
    peaks["kick"] = [8]
    points = [SwitchPoint(8, 8.0, frozenset({"kick"}), "salience")]
    report = explain(_fake_result(peaks, strong, points))
    assert report["matrix"]["kick"] == [1]
    for name in set(peaks) - {"kick"}:
        assert report["matrix"][name] == [0]
    assert report["missed"] == 0


def test_explain_unmatched_annotation_counts_missed():
    strong = np.arange(40) * 1.0
    peaks = {name: [] for name in
             ("kick", "snare", "hihat", "harmonic_loudness", "percussive_loudness", "cqt", "pcp")}
    report = explain(_fake_result(peaks, strong, []), annotation_times=[5.0])
    assert all(col == [0] for col in report["matrix"].values())
    assert report["missed"] == 1
