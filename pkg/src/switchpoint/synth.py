"""Deterministic synthesis of 4/4 loop-structured test tracks.

Scripts describe sections starting on 4-bar multiples, each section a set of
layers (drums, bass, pad chords). Rendering returns the audio together with
the exact beat grid and section-boundary times, which makes generated tracks
usable as end-to-end ground truth.
"""

import json
import re
from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, sosfilt

from .audio import ANALYSIS_RATE, AudioBuffer
from .beats import BeatGrid
from .errors import InvalidScript

TEMPO_RANGE = (99.0, 198.0)

KICK_GAIN = 0.65
SNARE_GAIN = 0.3
HAT_GAIN = 0.45
BASS_GAIN = 0.36
PAD_GAIN = 0.34

_NOTE_RE = re.compile(r"^([A-Ga-g])([#b]?)(-?\d)$")
_NOTE_CLASS = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}

#: Fixed-name layers; "pad_chord:<note>" additionally carries its root.
FIXED_LAYERS = ("kick4", "snare24", "hihat8", "bass_loop")


@dataclass(frozen=True)
class Section:
    start_bar: int
    layers: tuple


@dataclass(frozen=True)
class TrackScript:
    tempo_bpm: float
    bars: int
    sections: tuple
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "tempo_bpm": self.tempo_bpm,
            "bars": self.bars,
            "seed": self.seed,
            "sections": [
                {"start_bar": s.start_bar, "layers": list(s.layers)} for s in self.sections
            ],
        }


@dataclass(frozen=True)
class RenderedTrack:
    buffer: AudioBuffer
    grid: BeatGrid
    boundaries_s: np.ndarray


def note_to_hz(name: str) -> float:
    m = _NOTE_RE.match(name)
    if not m:
        raise InvalidScript(f"bad note name: {name!r}")
    letter, accidental, octave = m.groups()
    semitone = _NOTE_CLASS[letter.upper()] + (1 if accidental == "#" else -1 if accidental == "b" else 0)
    midi = 12 * (int(octave) + 1) + semitone
    return 440.0 * 2.0 ** ((midi - 69) / 12.0)


def _validate(script: TrackScript) -> None:
    if not TEMPO_RANGE[0] <= script.tempo_bpm <= TEMPO_RANGE[1]:
        raise InvalidScript(f"tempo {script.tempo_bpm} outside {TEMPO_RANGE}")
    if not isinstance(script.bars, int) or script.bars < 4:
        raise InvalidScript("bars must be an integer >= 4")
    if not script.sections:
        raise InvalidScript("need at least one section")
    starts = [s.start_bar for s in script.sections]
    if starts[0] != 0:
        raise InvalidScript("first section must start at bar 0")
    if any(b >= a for a, b in zip(starts[1:], starts[:-1])):
        raise InvalidScript("section start bars must be strictly increasing")
    for s in script.sections:
        if s.start_bar % 4 != 0:
            raise InvalidScript(f"section start {s.start_bar} is not a 4-bar multiple")
        if s.start_bar >= script.bars:
            raise InvalidScript(f"section start {s.start_bar} is past the last bar")
        for layer in s.layers:
            if layer in FIXED_LAYERS:
                continue
            if layer.startswith("pad_chord:"):
                note_to_hz(layer.split(":", 1)[1])
                continue
            raise InvalidScript(f"unknown layer: {layer!r}")


def load_script(path: str) -> TrackScript:
    """Read a TrackScript JSON file; unknown fields are rejected."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidScript(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise InvalidScript(f"{path}: top level must be an object")
    allowed = {"tempo_bpm", "bars", "seed", "sections"}
    unknown = set(doc) - allowed
    if unknown:
        raise InvalidScript(f"{path}: unknown fields {sorted(unknown)}")
    try:
        sections = tuple(
            Section(int(s["start_bar"]), tuple(s["layers"])) for s in doc["sections"]
        )
        script = TrackScript(
            tempo_bpm=float(doc["tempo_bpm"]),
            bars=int(doc["bars"]),
            sections=sections,
            seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScript(f"{path}: {exc}") from exc
    for s in doc["sections"]:
        extra = set(s) - {"start_bar", "layers"}
        if extra:
            raise InvalidScript(f"{path}: unknown section fields {sorted(extra)}")
    _validate(script)
    return script


# --- instrument templates -----------------------------------------------------

def _kick(sr):
    # Short decay keeps the tonal tail below the HPSS time-median span, so
    # kicks land in the percussive component; it also stops the tail from
    # beating against a sustained bass fundamental nearby in frequency.
    # The sweep stays under the snare band's lower edge (150 Hz).
    t = np.arange(int(0.12 * sr)) / sr
    freq = 40.0 + (135.0 - 40.0) * np.exp(-t / 0.03)
    phase = 2 * np.pi * np.cumsum(freq) / sr
    # the attack ramp starts exactly on the beat sample but is soft enough
    # not to spray click energy into the snare and hi-hat bands
    attack = np.minimum(t / 0.008, 1.0)
    body = KICK_GAIN * np.sin(phase) * np.exp(-t / 0.03) * attack
    # taper the residual tail to zero; a hard cutoff is a broadband click
    fade = int(0.01 * sr)
    body[-fade:] *= np.linspace(1.0, 0.0, fade)
    return body


def _snare(sr, rng):
    t = np.arange(int(0.15 * sr)) / sr
    noise = rng.standard_normal(len(t))
    sos = butter(4, [180.0, 2400.0], btype="bandpass", fs=sr, output="sos")
    shaped = sosfilt(sos, noise)
    shaped /= np.abs(shaped).max()
    return SNARE_GAIN * shaped * np.exp(-t / 0.04)


def _hat(sr, rng):
    t = np.arange(int(0.06 * sr)) / sr
    noise = rng.standard_normal(len(t))
    sos = butter(4, 6000.0, btype="highpass", fs=sr, output="sos")
    shaped = sosfilt(sos, noise)
    shaped /= np.abs(shaped).max()
    return HAT_GAIN * shaped * np.exp(-t / 0.02)


def _edge_envelope(length, sr, fade_in, fade_out):
    # sine-shaped edges: two overlapping fades sum to constant power, so a
    # crossfade between chords does not read as a loudness event
    env = np.ones(length)
    rise = min(int(fade_in * sr), length // 2)
    fall = min(int(fade_out * sr), length // 2)
    if rise:
        env[:rise] = np.sin(np.linspace(0.0, np.pi / 2, rise))
    if fall:
        env[-fall:] = np.cos(np.linspace(0.0, np.pi / 2, fall))
    return env


def _sustained_saw(freq, length, sr, fade_in, fade_out):
    # Soft edges keep bass attacks out of the drum-band flux. The hard
    # band limit keeps the partial stack sparse: a dense saw against a pad
    # chord produces beating pairs that read as percussive events.
    t = np.arange(length) / sr
    out = np.zeros(length)
    for k in range(1, int(min(8, 440.0 / freq)) + 1):
        out += np.sin(2 * np.pi * k * freq * t) / k
    out *= 2.0 / np.pi
    return BASS_GAIN * out * _edge_envelope(length, sr, fade_in, fade_out)


def _pad_chord(root_hz, length, sr, fade_in, fade_out):
    t = np.arange(length) / sr
    out = np.zeros(length)
    for ratio in (1.0, 2.0 ** (4 / 12), 2.0 ** (7 / 12)):  # major triad
        f = root_hz * ratio
        for harmonic, amp in ((1, 1.0), (2, 0.4), (3, 0.2)):
            out += amp * np.sin(2 * np.pi * f * harmonic * t)
    out /= np.abs(out).max()
    return PAD_GAIN * out * _edge_envelope(length, sr, fade_in, fade_out)


def _add_at(out, start_sample, template):
    stop = min(start_sample + len(template), len(out))
    if start_sample < len(out):
        out[start_sample:stop] += template[: stop - start_sample]


def render(script: TrackScript, sample_rate: int = ANALYSIS_RATE) -> RenderedTrack:
    """Render a script to audio plus exact beat-grid and boundary truth."""
    _validate(script)
    sr = sample_rate
    rng = np.random.default_rng(script.seed)
    spb = 60.0 / script.tempo_bpm  # seconds per beat
    total = int(round(script.bars * 4 * spb * sr))
    out = np.zeros(total)
    tonal = np.zeros(total)  # bass and pads, sidechain-ducked under the kick

    kick = _kick(sr)
    snare = _snare(sr, rng)
    hat = _hat(sr, rng)

    spans = []
    for i, section in enumerate(script.sections):
        end_bar = script.sections[i + 1].start_bar if i + 1 < len(script.sections) else script.bars
        spans.append((section, section.start_bar, end_bar))

    def bar_sample(bar):
        return int(round(bar * 4 * spb * sr))

    for section, bar_lo, bar_hi in spans:
        beat_lo, beat_hi = bar_lo * 4, bar_hi * 4
        for layer in section.layers:
            if layer == "kick4":
                for beat in range(beat_lo, beat_hi):
                    _add_at(out, int(round(beat * spb * sr)), kick)
            elif layer == "snare24":
                for beat in range(beat_lo, beat_hi):
                    if beat % 4 in (1, 3):
                        _add_at(out, int(round(beat * spb * sr)), snare)
            elif layer == "hihat8":
                for half in range(beat_lo * 2, beat_hi * 2):
                    _add_at(out, int(round(half * spb / 2 * sr)), hat)

    # Bass: one sustained note across each run of consecutive bass sections,
    # so section boundaries inside a run leave no attack and no loudness dip.
    pads = [next((l for l in s.layers if l.startswith("pad_chord:")), None) for s, _, _ in spans]
    basses = ["bass_loop" in s.layers for s, _, _ in spans]
    i = 0
    while i < len(spans):
        if basses[i]:
            j = i
            while j + 1 < len(spans) and basses[j + 1]:
                j += 1
            start, stop = bar_sample(spans[i][1]), bar_sample(spans[j][2])
            _add_at(tonal, start, _sustained_saw(note_to_hz("A1"), stop - start, sr, 0.03, 0.03))
            i = j + 1
        else:
            i += 1

    # Pads: 50 ms edges against silence, 100 ms equal-power crossfades
    # between adjacent pad sections. A root change must read as a harmony
    # event only, never as a loudness or percussive event.
    CROSSFADE_S = 0.1
    cross = int(CROSSFADE_S * sr)
    for i, (section, bar_lo, bar_hi) in enumerate(spans):
        if pads[i] is None:
            continue
        root = note_to_hz(pads[i].split(":", 1)[1])
        prev_pad = i > 0 and pads[i - 1] is not None and spans[i - 1][2] == bar_lo
        next_pad = i + 1 < len(spans) and pads[i + 1] is not None and spans[i + 1][1] == bar_hi
        start, stop = bar_sample(bar_lo), bar_sample(bar_hi)
        length = stop - start + (cross if next_pad else 0)
        fade_in = CROSSFADE_S if prev_pad else 0.05
        fade_out = CROSSFADE_S if next_pad else 0.05
        _add_at(tonal, start, _pad_chord(root, length, sr, fade_in, fade_out))

    out += tonal

    peak = np.abs(out).max()
    if peak > 0.99:
        out *= 0.99 / peak

    beat_times = np.arange(script.bars * 4) * spb
    grid = BeatGrid(beat_times, 4, 0, script.tempo_bpm, "external")
    boundaries = np.array([s.start_bar * 4 * spb for s in script.sections[1:]])
    buffer = AudioBuffer(samples=out, sample_rate=sr, source_path=f"<synth:{script.seed}>")
    return RenderedTrack(buffer, grid, boundaries)
