"""Candidate selection after novelty: period and salience filtering.

Peaks from all seven features are merged into switch-point candidates, then
thinned twice: first to the strong-beat phase of the dominant 4-bar period,
then by requiring enough harmonic energy in the four bars that follow each
candidate (so the section after the switch can stand on its own).
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .beats import StrongBeatGrid
from .features import FeatureSeries

#: One 4-bar period = 8 strong beats; candidates share one phase offset.
PERIOD_STRONG_BEATS = 8
#: Salience: mean harmonic loudness over the following 4 bars must reach
#: 0.4 of the track maximum.
SALIENCE_THRESHOLD = 0.4


class AllZeroNoveltyWarning(UserWarning):
    """Every novelty curve is zero; the period offset defaults to 0."""


@dataclass(frozen=True)
class PeriodEstimate:
    offset: int  # strong-beat phase in [0, period)
    score_per_offset: np.ndarray


@dataclass(frozen=True)
class SwitchPoint:
    strong_beat_index: int
    time_s: float
    contributing_features: frozenset
    stage: str  # "novelty" | "period" | "salience"


@dataclass(frozen=True)
class SwitchPointSet:
    points: tuple

    @property
    def indices(self) -> np.ndarray:
        return np.array([p.strong_beat_index for p in self.points], dtype=int)

    @property
    def times(self) -> np.ndarray:
        return np.array([p.time_s for p in self.points])

    def __len__(self) -> int:
        return len(self.points)


def build_switch_points(peak_sets, grid: StrongBeatGrid) -> SwitchPointSet:
    """Union the per-feature peaks into deduplicated candidates.

    The same strong-beat index found by several features becomes one point
    whose contributing_features is the union.
    """
    by_index = {}
    for peaks in (peak_sets.values() if isinstance(peak_sets, dict) else peak_sets):
        for idx in peaks.indices:
            by_index.setdefault(int(idx), set()).add(peaks.feature_name)
    points = tuple(
        SwitchPoint(idx, float(grid.times[idx]), frozenset(names), "novelty")
        for idx, names in sorted(by_index.items())
    )
    return SwitchPointSet(points)


def estimate_period(curves, period: int = PERIOD_STRONG_BEATS) -> PeriodEstimate:
    """Find the strong-beat phase of the 4-bar period.

    Each curve is max-normalized (all-zero curves are excluded), the
    normalized curves are averaged, and each of the ``period`` offsets is
    scored by the RMS of the combined novelty it picks up; the best offset
    wins, ties toward the smaller one.
    """
    curves = list(curves.values() if isinstance(curves, dict) else curves)
    if not curves:
        raise ValueError("no novelty curves given")
    n = len(curves[0].values)
    if any(len(c.values) != n for c in curves):
        raise ValueError("novelty curves differ in length")
    if n < 2 * period:
        raise ValueError(f"need at least {2 * period} strong-beat intervals, got {n}")

    normalized = [c.values / c.values.max() for c in curves if c.values.max() > 0]
    if not normalized:
        warnings.warn("all novelty curves are zero", AllZeroNoveltyWarning)
        return PeriodEstimate(0, np.zeros(period))
    combined = np.mean(normalized, axis=0)
    scores = np.array([np.sqrt(np.mean(combined[o::period] ** 2)) for o in range(period)])
    return PeriodEstimate(int(np.argmax(scores)), scores)


def period_filter(points: SwitchPointSet, period: PeriodEstimate,
                  period_beats: int = PERIOD_STRONG_BEATS) -> SwitchPointSet:
    """Keep only candidates on the period phase (index = offset mod period)."""
    kept = tuple(
        SwitchPoint(p.strong_beat_index, p.time_s, p.contributing_features, "period")
        for p in points.points
        if p.strong_beat_index % period_beats == period.offset
    )
    return SwitchPointSet(kept)


def salience_filter(points: SwitchPointSet, harmonic: FeatureSeries,
                    threshold: float = SALIENCE_THRESHOLD,
                    horizon: int = PERIOD_STRONG_BEATS) -> SwitchPointSet:
    """Keep candidates whose following 4 bars are loud enough to stand alone.

    A point survives when the mean harmonic loudness over the ``horizon``
    strong-beat intervals after it reaches ``threshold`` times the track
    maximum. The mean always spans the full horizon: intervals past the end
    of the track count as silence, so a switch right before the track runs
    out cannot pass.
    """
    if harmonic.name != "harmonic_loudness":
        raise ValueError("salience_filter expects the harmonic_loudness series")
    level = harmonic.values[:, 0]
    floor = threshold * level.max()
    kept = tuple(
        SwitchPoint(p.strong_beat_index, p.time_s, p.contributing_features, "salience")
        for p in points.points
        if level[p.strong_beat_index:p.strong_beat_index + horizon].sum() / horizon >= floor
    )
    return SwitchPointSet(kept)
