"""Strong-beat-synchronous feature series.

Each track yields exactly seven named series: three sparse drum-event counts
(kick, snare, hihat), two loudness series from the HPSS components, and the
multidimensional constant-Q and chroma profiles. Row i of a series aggregates
the frames between strong beats i and i+1 (right-open interval).
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import median_filter

from .audio import AudioBuffer
from .beats import StrongBeatGrid
from .dsp import (
    FrameCurve,
    HpssPair,
    OnsetCurve,
    Spectrogram,
    band_onsets,
    cq_and_chroma,
    hpss,
    stft,
)

FEATURE_NAMES = (
    "kick",
    "snare",
    "hihat",
    "harmonic_loudness",
    "percussive_loudness",
    "cqt",
    "pcp",
)
FEATURE_GROUPS = {
    "rhythm": ("kick", "snare", "hihat"),
    "loudness": ("harmonic_loudness", "percussive_loudness"),
    "spectrum": ("cqt", "pcp"),
}


class EmptyIntervalWarning(UserWarning):
    """A strong-beat interval contained no analysis frame; the previous row
    was carried forward."""


@dataclass(frozen=True)
class FeatureSeries:
    name: str
    values: np.ndarray  # (n_intervals, dim), non-negative
    sparse: bool

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        object.__setattr__(self, "values", values)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError(f"feature series {self.name!r} must be finite and >= 0")

    @property
    def n_intervals(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FrameFeatures:
    """Grid-independent frame-level transforms of one track.

    Computing these once lets callers re-aggregate against several beat
    grids (e.g. estimated vs. external) without repeating the heavy DSP.
    """

    stft: Spectrogram
    hpss: HpssPair
    cqt: Spectrogram
    pcp: Spectrogram
    onsets: dict  # band -> OnsetCurve

    @classmethod
    def from_buffer(cls, buffer: AudioBuffer) -> "FrameFeatures":
        spec = stft(buffer)
        pair = hpss(spec)
        onsets = {
            "kick": band_onsets(spec, "kick"),
            "snare": band_onsets(pair.percussive, "snare"),
            "hihat": band_onsets(spec, "hihat"),
        }
        cq, chroma = cq_and_chroma(buffer)
        return cls(spec, pair, cq, chroma, onsets)


def loudness_curve(component: Spectrogram) -> FrameCurve:
    """Per-frame energy root of an HPSS component."""
    values = np.sqrt(np.sum(component.magnitudes ** 2, axis=0))
    return FrameCurve(values, component.sample_rate, component.hop, component.window)


def agg_rms(frames, grid: StrongBeatGrid, name: str) -> FeatureSeries:
    """Per-dimension RMS of the frames inside each strong-beat interval.

    ``frames`` may be a Spectrogram or a FrameCurve. An interval with no
    frame repeats the previous row and emits an EmptyIntervalWarning.
    """
    if isinstance(frames, Spectrogram):
        mat, times = frames.magnitudes, frames.frame_times
    elif isinstance(frames, (FrameCurve, OnsetCurve)):
        mat, times = np.asarray(frames.values)[None, :], frames.frame_times
    else:
        raise TypeError(f"cannot aggregate {type(frames).__name__}")

    edges = np.searchsorted(times, grid.times, side="left")
    square_sum = np.concatenate(
        [np.zeros((mat.shape[0], 1)), np.cumsum(mat.astype(np.float64) ** 2, axis=1)], axis=1
    )
    rows = np.empty((grid.n_intervals, mat.shape[0]))
    previous = np.zeros(mat.shape[0])
    for i in range(grid.n_intervals):
        lo, hi = edges[i], edges[i + 1]
        if hi > lo:
            previous = np.sqrt((square_sum[:, hi] - square_sum[:, lo]) / (hi - lo))
        else:
            warnings.warn(
                f"{name}: no frames in strong-beat interval {i}; repeating previous row",
                EmptyIntervalWarning,
            )
        rows[i] = previous
    return FeatureSeries(name, rows, sparse=False)


#: Onsets this close to a strong beat (s) are treated as on it. Frame
#: quantization detects a beat-aligned attack up to ~6 ms to either side of
#: the boundary; without snapping, such events flip between intervals.
ONSET_SNAP_S = 0.02


def agg_count(onsets: OnsetCurve, grid: StrongBeatGrid, name: str) -> FeatureSeries:
    """Onset count per strong-beat interval (right-open).

    Onsets within ONSET_SNAP_S of an interval boundary count as on the
    boundary, i.e. into the interval that starts there.
    """
    times = onsets.onset_times
    if len(times):
        nearest = np.clip(np.searchsorted(grid.times, times), 1, len(grid.times) - 1)
        lower = grid.times[nearest - 1]
        upper = grid.times[nearest]
        times = np.where(np.abs(times - lower) <= ONSET_SNAP_S, lower, times)
        times = np.where(np.abs(times - upper) <= ONSET_SNAP_S, upper, times)
    edges = np.searchsorted(times, grid.times, side="left")
    counts = np.diff(edges).astype(np.float64)
    return FeatureSeries(name, counts[:, None], sparse=True)


#: Median length (intervals) for denoising the sparse count series. Onset
#: detection can flip borderline events by one count between repeats of the
#: same bar; the median removes that while keeping section-change steps.
COUNT_MEDIAN = 5
#: Minimum lag-1 autocorrelation for a count series to carry structure.
#: Real drum arrangements change in blocks of bars (strongly positive);
#: borderline-detection jitter is independent per interval (near zero).
COUNT_COHERENCE_FLOOR = 0.5


def _denoise_counts(series: FeatureSeries) -> FeatureSeries:
    raw = series.values[:, 0]
    centered = raw - raw.mean()
    denom = np.dot(centered, centered)
    if denom > 0:
        coherence = np.dot(centered[:-1], centered[1:]) / denom
        if coherence < COUNT_COHERENCE_FLOOR:
            steady = np.full_like(series.values, np.median(raw))
            return FeatureSeries(series.name, steady, sparse=True)
    values = median_filter(series.values, size=(COUNT_MEDIAN, 1), mode="nearest")
    return FeatureSeries(series.name, values, sparse=True)


def beat_sync_features(frames: FrameFeatures, grid: StrongBeatGrid) -> dict:
    """Aggregate precomputed frame features into the seven named series.

    The drum-count series are median-filtered across intervals before use;
    the dense series go through as aggregated.
    """
    return {
        "kick": _denoise_counts(agg_count(frames.onsets["kick"], grid, "kick")),
        "snare": _denoise_counts(agg_count(frames.onsets["snare"], grid, "snare")),
        "hihat": _denoise_counts(agg_count(frames.onsets["hihat"], grid, "hihat")),
        "harmonic_loudness": agg_rms(loudness_curve(frames.hpss.harmonic), grid, "harmonic_loudness"),
        "percussive_loudness": agg_rms(loudness_curve(frames.hpss.percussive), grid, "percussive_loudness"),
        "cqt": agg_rms(frames.cqt, grid, "cqt"),
        "pcp": agg_rms(frames.pcp, grid, "pcp"),
    }


def extract_features(buffer: AudioBuffer, grid: StrongBeatGrid) -> dict:
    """Convenience wrapper: frame transforms plus beat-sync aggregation."""
    return beat_sync_features(FrameFeatures.from_buffer(buffer), grid)
