"""Beat grids and the strong-beat (beats 1 and 3) subdivision.

The built-in estimator assumes machine-steady tempo, which holds for the
target genre; anything with tempo drift should come in through an external
grid file (one "time<TAB>position" line per beat).
"""

import logging
from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .dsp import DRUM_BANDS, spectral_flux, stft
from .errors import BufferTooShort, NonMonotonic, NoPulse, ParseError, TooFewBeats

log = logging.getLogger(__name__)

TEMPO_MIN = 99.0
TEMPO_MAX = 198.0
#: Normalized autocorrelation below this means no usable pulse.
PULSE_CONFIDENCE_FLOOR = 0.15
MIN_DURATION_S = 10.0


@dataclass(frozen=True)
class BeatGrid:
    beat_times: np.ndarray  # seconds, strictly increasing
    beats_per_bar: int
    downbeat_offset: int  # index (0..3) of the first full bar's beat 1
    tempo_bpm: float
    source: str  # "estimated" | "external"

    def __post_init__(self):
        times = np.asarray(self.beat_times, dtype=np.float64)
        object.__setattr__(self, "beat_times", times)
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise NonMonotonic("beat times must be strictly increasing")


@dataclass(frozen=True)
class StrongBeatGrid:
    """Times of beats 1 and 3; the quantization grid of the whole pipeline."""

    times: np.ndarray
    bar_index: np.ndarray
    per_bar: int = 2

    @property
    def n_intervals(self) -> int:
        return len(self.times) - 1


def estimate_beats(buffer: AudioBuffer) -> BeatGrid:
    """Fit a constant-tempo grid to the onset-strength envelope.

    Tempo comes from the autocorrelation peak within [99, 198] bpm, then a
    comb search refines tempo and phase against the envelope. The downbeat
    is the beat phase (mod 4) with the most kick-band onset strength.

    Raises
    ------
    NoPulse
        If the autocorrelation peak is below the confidence floor.
    """
    if buffer.duration_s < MIN_DURATION_S:
        raise BufferTooShort(f"need >= {MIN_DURATION_S}s of audio to estimate beats")
    spec = stft(buffer)
    env = spectral_flux(spec).values
    smooth = np.convolve(env, np.hanning(5) / np.hanning(5).sum(), mode="same")
    fps = buffer.sample_rate / spec.hop

    centered = smooth - smooth.mean()
    auto = np.correlate(centered, centered, mode="full")[len(centered) - 1:]
    if auto[0] <= 0:
        raise NoPulse("silent input")
    auto = auto / auto[0]
    lag_lo = int(np.floor(60.0 * fps / TEMPO_MAX))
    lag_hi = int(np.ceil(60.0 * fps / TEMPO_MIN))
    window = auto[lag_lo:lag_hi + 1]
    confidence = float(window.max())
    if confidence < PULSE_CONFIDENCE_FLOOR:
        raise NoPulse(f"autocorrelation confidence {confidence:.3f} below floor")
    # ties break toward the longer lag (slower tempo)
    lag = lag_lo + int(np.flatnonzero(window >= window.max() - 1e-12).max())
    coarse_bpm = 60.0 * fps / lag

    tempo, phase_frames = _comb_refine(smooth, fps, coarse_bpm)
    period_s = 60.0 / tempo
    t0 = (phase_frames * spec.hop + spec.window / 2.0) / buffer.sample_rate
    # phase is defined mod period; keep the earliest beat that could still be
    # a real event (detection jitter can wrap a t=0 onset to just below period)
    while t0 - period_s >= -0.040:
        t0 -= period_s
    n_beats = int(np.floor((buffer.duration_s - t0) / period_s)) + 1
    beat_times = t0 + period_s * np.arange(n_beats)

    offset = _downbeat_offset(spec, beat_times)
    return BeatGrid(beat_times, 4, offset, tempo, "estimated")


def _comb_refine(env, fps, coarse_bpm):
    """Maximize mean envelope value over a beat comb; two grid passes."""
    n = len(env)

    def search(tempi, phase_steps):
        best = (-np.inf, coarse_bpm, 0.0)
        for tempo in tempi:
            period = 60.0 * fps / tempo
            k = max(int(n // period), 1)
            beats = period * np.arange(k)
            for phase in phase_steps(period):
                idx = np.round(phase + beats).astype(int)
                valid = idx < n
                if not valid.any():
                    continue
                score = env[idx[valid]].mean()
                if score > best[0]:
                    best = (score, tempo, phase)
        return best

    lo = max(TEMPO_MIN, coarse_bpm - 3.0)
    hi = min(TEMPO_MAX, coarse_bpm + 3.0)
    _, tempo, phase = search(
        np.arange(lo, hi + 1e-9, 0.05),
        lambda p: np.arange(0.0, p, p / 64.0),
    )
    _, tempo, phase = search(
        np.arange(max(TEMPO_MIN, tempo - 0.06), min(TEMPO_MAX, tempo + 0.06) + 1e-9, 0.005),
        lambda p, c=phase: np.arange(max(0.0, c - 2.0), c + 2.0, 0.125),
    )
    return tempo, phase


def _downbeat_offset(spec, beat_times):
    # Kicks mark beats 1 and 3, snares mark 2 and 4; with four-on-the-floor
    # kicks alone every phase ties, so the snare band casts the deciding
    # (negative) vote. Steady tonal content cancels across phases.
    kick = spectral_flux(spec, *DRUM_BANDS["kick"]).values
    snare = spectral_flux(spec, *DRUM_BANDS["snare"]).values
    n = len(kick)
    frames = np.round((beat_times * spec.sample_rate - spec.window / 2.0) / spec.hop).astype(int)
    frames = np.clip(frames, 0, n - 1)

    def at_beats(curve):
        # tolerate +-1 frame of detection jitter
        return np.maximum.reduce([
            curve[np.clip(frames - 1, 0, n - 1)],
            curve[frames],
            curve[np.clip(frames + 1, 0, n - 1)],
        ])

    strength = at_beats(kick) - at_beats(snare)
    scores = [strength[o::4].sum() for o in range(4)]
    return int(np.argmax(scores))


def load_beats(path: str, buffer: AudioBuffer = None) -> BeatGrid:
    """Read an external beat grid: one "time_s<TAB>beat_position" line per beat.

    Positions count 1..4 within the bar. The downbeat offset comes from the
    first beat annotated as position 1.
    """
    times = []
    positions = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 2:
                raise ParseError(f"{path}:{lineno}: expected 'time<TAB>position', got {raw!r}")
            try:
                t = float(fields[0])
                pos = int(fields[1])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if not 1 <= pos <= 4:
                raise ParseError(f"{path}:{lineno}: beat position must be 1..4, got {pos}")
            if times and t <= times[-1]:
                raise NonMonotonic(f"{path}:{lineno}: beat time {t} not after {times[-1]}")
            times.append(t)
            positions.append(pos)
    if len(times) < 2:
        raise ParseError(f"{path}: need at least two beats")

    ones = [i for i, p in enumerate(positions) if p == 1]
    offset = (ones[0] % 4) if ones else (1 - positions[0]) % 4
    tempo = 60.0 / float(np.median(np.diff(times)))
    if not TEMPO_MIN <= tempo <= TEMPO_MAX:
        log.warning("external grid tempo %.1f bpm outside accepted range [%g, %g]",
                    tempo, TEMPO_MIN, TEMPO_MAX)
    if buffer is not None and times[-1] > buffer.duration_s:
        log.warning("external grid extends past the audio (%.2fs > %.2fs)",
                    times[-1], buffer.duration_s)
    return BeatGrid(np.array(times), 4, offset, tempo, "external")


def strong_beats(grid: BeatGrid) -> StrongBeatGrid:
    """Subsample the grid to beats 1 and 3 of each bar."""
    n = len(grid.beat_times)
    if n < 8:
        raise TooFewBeats(f"need at least 8 beats, got {n}")
    idx = np.flatnonzero((np.arange(n) - grid.downbeat_offset) % 2 == 0)
    bar_index = np.floor_divide(idx - grid.downbeat_offset, 4)
    return StrongBeatGrid(times=grid.beat_times[idx], bar_index=bar_index)
