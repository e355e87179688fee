"""Shared synthetic-signal helpers. Generators here are test-side oracles and
stay independent of the package's own synthesis module."""

import numpy as np
import pytest

from switchpoint.audio import AudioBuffer

SR = 44100


def make_buffer(samples, sr=SR, path="<mem>"):
    return AudioBuffer(samples=np.asarray(samples, dtype=np.float64),
                       sample_rate=sr, source_path=path)


def sine(freq, duration, amp=0.5, sr=SR):
    t = np.arange(int(round(duration * sr))) / sr
    return amp * np.sin(2 * np.pi * freq * t)


def kick_template(sr=SR, dur=0.25, f_hi=160.0, f_lo=50.0, amp=0.9):
    """Pitch-dropping sine burst; oracle knows its exact start."""
    t = np.arange(int(dur * sr)) / sr
    freq = f_lo + (f_hi - f_lo) * np.exp(-t / 0.03)
    phase = 2 * np.pi * np.cumsum(freq) / sr
    return amp * np.sin(phase) * np.exp(-t / 0.08)


def hat_template(rng, sr=SR, dur=0.05, amp=0.4):
    t = np.arange(int(dur * sr)) / sr
    noise = rng.standard_normal(len(t))
    # crude high-pass: first difference pushes energy above ~5 kHz
    hp = np.diff(noise, prepend=0.0)
    hp /= np.abs(hp).max()
    return amp * hp * np.exp(-t / 0.015)


def place_events(event_times, template, total_s, sr=SR):
    """Sum copies of ``template`` starting at each event time."""
    out = np.zeros(int(round(total_s * sr)))
    for et in event_times:
        start = int(round(et * sr))
        stop = min(start + len(template), len(out))
        if start < len(out):
            out[start:stop] += template[: stop - start]
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Acceptance tests record one line per criterion; the summary hook prints
# them even when pytest captures stdout.
ACCEPTANCE_RESULTS = []


def record_criterion(name, passed, detail=""):
    ACCEPTANCE_RESULTS.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"{status}  {name}{suffix}")
