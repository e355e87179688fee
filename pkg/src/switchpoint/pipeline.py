"""End-to-end switch-point analysis.

Wires the stages together: frame features -> strong-beat aggregation ->
per-feature novelty and peaks -> period filter -> salience filter. Stages
can be disabled individually to study how each rule thins the candidates.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .beats import BeatGrid, strong_beats
from .errors import TrackTooShort
from .features import FEATURE_GROUPS, FEATURE_NAMES, FrameFeatures, beat_sync_features
from .novelty import checkerboard_kernel, novelty_curve, pick_peaks, ssm
from .selection import (
    PeriodEstimate,
    SwitchPointSet,
    build_switch_points,
    estimate_period,
    period_filter,
    salience_filter,
)

#: Loudness novelty uses zero padding so track edges can still score;
#: everything else uses valid padding.
ZERO_PADDED_FEATURES = frozenset({"harmonic_loudness", "percussive_loudness"})

RULES = ("novelty", "period", "salience")


@dataclass(frozen=True)
class PipelineConfig:
    peak_threshold: float = 0.3
    salience_threshold: float = 0.4
    kernel_bars: int = 8
    peak_window_bars: int = 4
    period_strong_beats: int = 8
    hit_window_s: float = 0.5
    enabled_rules: tuple = RULES

    def __post_init__(self):
        if not 0.0 < self.peak_threshold <= 1.0:
            raise ValueError("peak_threshold must be in (0, 1]")
        if not 0.0 < self.salience_threshold <= 1.0:
            raise ValueError("salience_threshold must be in (0, 1]")
        if self.kernel_bars % 2 or self.kernel_bars < 2:
            raise ValueError("kernel_bars must be even and >= 2")
        if self.hit_window_s < 0:
            raise ValueError("hit_window_s must be >= 0")
        rules = tuple(self.enabled_rules)
        if "novelty" not in rules:
            raise ValueError("the novelty stage cannot be disabled")
        unknown = set(rules) - set(RULES)
        if unknown:
            raise ValueError(f"unknown rules: {sorted(unknown)}")
        object.__setattr__(self, "enabled_rules", rules)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["enabled_rules"] = list(self.enabled_rules)
        return doc


@dataclass(frozen=True)
class AnalysisResult:
    track_id: str
    switch_points: SwitchPointSet
    period: PeriodEstimate
    grid: dict
    per_feature_peaks: dict  # feature -> np.ndarray of strong-beat indices
    strong_beat_times: np.ndarray
    stage_counts: dict  # rule -> candidate count after that rule ran
    config: PipelineConfig

    def peak_times(self, feature: str) -> np.ndarray:
        return self.strong_beat_times[self.per_feature_peaks[feature]]


def get_switch_points(buffer: AudioBuffer, grid: BeatGrid, config: PipelineConfig = None,
                      frame_features: FrameFeatures = None) -> AnalysisResult:
    """Run the full candidate pipeline for one track.

    Parameters
    ----------
    buffer : AudioBuffer
    grid : BeatGrid
        Estimated or external; only its strong beats are used.
    config : PipelineConfig, optional
    frame_features : FrameFeatures, optional
        Precomputed frame-level transforms of the same audio, if the caller
        already has them (they are grid-independent).
    """
    result, _, _ = analyze_with_intermediates(buffer, grid, config, frame_features)
    return result


def analyze_with_intermediates(buffer: AudioBuffer, grid: BeatGrid,
                               config: PipelineConfig = None,
                               frame_features: FrameFeatures = None):
    """Like get_switch_points, but also returns the beat-synchronous feature
    series and novelty curves (for debugging dumps and plots)."""
    config = config or PipelineConfig()
    if len(grid.beat_times) < 64:
        raise TrackTooShort("analysis needs at least 16 bars of beats")
    strong = strong_beats(grid)
    if frame_features is None:
        frame_features = FrameFeatures.from_buffer(buffer)
    series = beat_sync_features(frame_features, strong)

    kernel = checkerboard_kernel(config.kernel_bars)
    curves = {}
    peaks = {}
    for name in FEATURE_NAMES:
        padding = "zero" if name in ZERO_PADDED_FEATURES else "valid"
        curves[name] = novelty_curve(ssm(series[name]), kernel, padding, name)
        peaks[name] = pick_peaks(curves[name], window=2 * config.peak_window_bars,
                                 threshold=config.peak_threshold)

    period = estimate_period(curves, config.period_strong_beats)
    points = build_switch_points(peaks, strong)
    stage_counts = {"novelty": len(points)}
    if "period" in config.enabled_rules:
        points = period_filter(points, period, config.period_strong_beats)
        stage_counts["period"] = len(points)
    if "salience" in config.enabled_rules:
        points = salience_filter(points, series["harmonic_loudness"],
                                 config.salience_threshold)
        stage_counts["salience"] = len(points)

    result = AnalysisResult(
        track_id=buffer.source_path,
        switch_points=points,
        period=period,
        grid={
            "tempo_bpm": float(grid.tempo_bpm),
            "downbeat_offset": int(grid.downbeat_offset),
            "source": grid.source,
            "n_beats": int(len(grid.beat_times)),
        },
        per_feature_peaks={name: ps.indices for name, ps in peaks.items()},
        strong_beat_times=strong.times,
        stage_counts=stage_counts,
        config=config,
    )
    return result, series, curves


def explain(result: AnalysisResult, annotation_times=None) -> dict:
    """Feature-coverage report: which features detect each target.

    Targets are the result's switch points, or the given annotation times.
    A feature detects a target when one of its novelty peaks lies within
    the configured hit window of the target time.
    """
    if annotation_times is not None:
        targets = np.asarray(annotation_times, dtype=float)
        kind = "annotations"
    else:
        targets = result.switch_points.times
        kind = "switch_points"
    window = result.config.hit_window_s

    matrix = {}
    for name in FEATURE_NAMES:
        times = result.peak_times(name)
        if len(targets) and len(times):
            hit = (np.abs(targets[:, None] - times[None, :]) <= window).any(axis=1)
        else:
            hit = np.zeros(len(targets), dtype=bool)
        matrix[name] = hit.astype(int).tolist()

    covered = np.zeros(len(targets), dtype=bool)
    group_counts = {}
    for group, members in FEATURE_GROUPS.items():
        group_hit = np.zeros(len(targets), dtype=bool)
        for name in members:
            group_hit |= np.asarray(matrix[name], dtype=bool)
        group_counts[group] = int(group_hit.sum())
        covered |= group_hit
    return {
        "kind": kind,
        "target_times_s": [float(t) for t in targets],
        "matrix": matrix,
        "feature_counts": {name: int(sum(matrix[name])) for name in FEATURE_NAMES},
        "group_counts": group_counts,
        "missed": int((~covered).sum()),
    }
