import numpy as np
import pytest

from switchpoint.beats import BeatGrid, estimate_beats, load_beats, strong_beats
from switchpoint.errors import BufferTooShort, NonMonotonic, NoPulse, ParseError, TooFewBeats

from conftest import SR, kick_template, make_buffer, place_events


def click_track(bpm, duration, start=0.0):
    period = 60.0 / bpm
    truth = np.arange(start, duration - 0.3, period)
    return place_events(truth, kick_template(dur=0.1), duration), truth


def test_estimate_click_track_128():
    x, truth = click_track(128.0, 30.0)
    grid = estimate_beats(make_buffer(x))
    assert 127.0 <= grid.tempo_bpm <= 129.0
    assert grid.source == "estimated"
    for click in truth:
        assert np.min(np.abs(grid.beat_times - click)) <= 0.030


def test_estimate_shifted_track_keeps_tempo_and_shifts_phase():
    x1, _ = click_track(128.0, 30.0)
    x2, _ = click_track(128.0, 30.0, start=0.25)
    g1 = estimate_beats(make_buffer(x1))
    g2 = estimate_beats(make_buffer(x2))
    assert abs(g1.tempo_bpm - g2.tempo_bpm) < 0.2
    period = 60.0 / g1.tempo_bpm
    shift = (g2.beat_times[0] - g1.beat_times[0] - 0.25) % period
    shift = min(shift, period - shift)
    assert shift <= 0.030


def test_estimate_white_noise_raises_no_pulse(rng):
    x = 0.5 * rng.standard_normal(SR * 15)
    with pytest.raises(NoPulse):
        estimate_beats(make_buffer(x))


def test_estimate_rejects_short_buffer():
    with pytest.raises(BufferTooShort):
        estimate_beats(make_buffer(np.zeros(SR * 5)))


def test_estimate_no_tempo_octave_error_at_99(rng):
    # kicks on beats plus eighth-note hats: the eighth-note comb at 198 bpm
    # must not win over the true 99 bpm pulse
    from conftest import hat_template

    period = 60.0 / 99.0
    kicks = np.arange(0.0, 29.0, period)
    hats = np.arange(0.0, 29.0, period / 2.0)
    x = place_events(kicks, kick_template(), 30.0)
    x += place_events(hats, hat_template(rng), 30.0)
    grid = estimate_beats(make_buffer(x))
    assert 97.0 <= grid.tempo_bpm <= 101.0


def test_estimate_strong_beat_accuracy():
    x, truth = click_track(132.0, 40.0)
    grid = estimate_beats(make_buffer(x))
    strong = strong_beats(grid)
    truth_strong = truth[::2]
    hits = sum(np.min(np.abs(truth_strong - t)) <= 0.050 for t in strong.times
               if t <= truth_strong[-1] + 0.05)
    checked = sum(t <= truth_strong[-1] + 0.05 for t in strong.times)
    assert hits / checked >= 0.95


# --- external grids ---------------------------------------------------------

def _write_beats(tmp_path, rows):
    path = tmp_path / "beats.tsv"
    path.write_text("".join(f"{t}\t{p}\n" for t, p in rows))
    return str(path)


def test_load_beats_basic(tmp_path):
    path = _write_beats(tmp_path, [(0.0, 1), (0.5, 2), (1.0, 3), (1.5, 4)])
    grid = load_beats(path)
    assert grid.tempo_bpm == pytest.approx(120.0)
    assert grid.downbeat_offset == 0
    assert grid.source == "external"


def test_load_beats_anacrusis(tmp_path):
    path = _write_beats(tmp_path, [(0.0, 3), (0.5, 4), (1.0, 1), (1.5, 2), (2.0, 3)])
    grid = load_beats(path)
    assert grid.downbeat_offset == 2


def test_load_beats_non_monotonic(tmp_path):
    path = _write_beats(tmp_path, [(0.5, 1), (0.4, 2)])
    with pytest.raises(NonMonotonic):
        load_beats(path)


@pytest.mark.parametrize("text", [
    "0.0\n",                 # missing position
    "zero\t1\n",             # bad float
    "0.0\t5\n0.5\t1\n",      # position out of range
    "0.0\tx\n",              # bad int
])
def test_load_beats_parse_errors(tmp_path, text):
    path = tmp_path / "bad.tsv"
    path.write_text(text)
    with pytest.raises(ParseError) as err:
        load_beats(str(path))
    assert "bad.tsv" in str(err.value)


def test_load_beats_skips_comments_and_blanks(tmp_path):
    path = tmp_path / "beats.tsv"
    path.write_text("# header\n\n0.0\t1\n0.5\t2\n1.0\t3\n1.5\t4\n")
    grid = load_beats(str(path))
    assert len(grid.beat_times) == 4


# --- strong beats -----------------------------------------------------------

def _grid(n, offset=0, bpm=120.0):
    return BeatGrid(np.arange(n) * 60.0 / bpm, 4, offset, bpm, "external")


def test_strong_beats_offset_zero():
    strong = strong_beats(_grid(16))
    assert np.allclose(strong.times, np.arange(8) * 1.0)
    assert strong.per_bar == 2


def test_strong_beats_offset_one():
    strong = strong_beats(_grid(16, offset=1))
    assert np.allclose(strong.times, np.arange(1, 16, 2) * 0.5)


def test_strong_beats_count_bounds():
    for n in (8, 9, 15, 16):
        for off in range(4):
            count = len(strong_beats(_grid(n, offset=off)).times)
            assert count in (n // 2, n // 2 + n % 2)


def test_strong_beats_too_few():
    with pytest.raises(TooFewBeats):
        strong_beats(_grid(7))


def test_strong_beats_bar_index():
    strong = strong_beats(_grid(16, offset=2))
    assert strong.bar_index[0] == -1  # anacrusis strong beat before the first downbeat
    assert strong.bar_index[1] == 0
