"""From audio to novelty curves, step by step.

Walks the analysis front end: STFT -> HPSS split -> drum-band onsets ->
strong-beat aggregation into the seven feature series -> self-similarity
novelty and peak picking for each.
"""

import numpy as np

from switchpoint import (
    FrameFeatures,
    Section,
    TrackScript,
    beat_sync_features,
    checkerboard_kernel,
    novelty_curve,
    pick_peaks,
    render,
    ssm,
    strong_beats,
)

script = TrackScript(128.0, 32, (
    Section(0, ("kick4", "hihat8")),
    Section(12, ("kick4", "hihat8", "snare24", "bass_loop")),
    Section(24, ("kick4", "pad_chord:D3")),
), seed=5)
rendered = render(script)

# Frame-level transforms are grid-independent and computed once.
frames = FrameFeatures.from_buffer(rendered.buffer)
print(f"stft: {frames.stft.n_bins} bins x {frames.stft.n_frames} frames")
print(f"cqt:  {frames.cqt.n_bins} bins, first center {frames.cqt.bin_frequencies[0]:.2f} Hz")
for band, curve in frames.onsets.items():
    print(f"{band:6s} onsets detected: {len(curve.onsets)}")

# Quantize to the strong-beat grid (beats 1 and 3 of each bar).
grid = strong_beats(rendered.grid)
series = beat_sync_features(frames, grid)
print(f"\nstrong beats: {len(grid.times)}, intervals: {grid.n_intervals}")
for name, fs in series.items():
    print(f"  {name:20s} {fs.n_intervals} x {fs.dim}  sparse={fs.sparse}")

# Novelty: checkerboard kernel over each feature's self-similarity matrix.
kernel = checkerboard_kernel()
print(f"\nkernel: {kernel.shape[0]}x{kernel.shape[0]} strong beats "
      f"(= {kernel.shape[0] / 2:.0f} bars per side)")

truth_idx = np.round(rendered.boundaries_s / (grid.times[1] - grid.times[0])).astype(int)
print(f"true boundaries at strong-beat intervals: {truth_idx.tolist()}\n")
print(f"{'feature':20s} {'peak intervals':24s} novelty max")
for name, fs in series.items():
    padding = "zero" if name.endswith("loudness") else "valid"
    curve = novelty_curve(ssm(fs), kernel, padding, name)
    peaks = pick_peaks(curve)
    print(f"{name:20s} {str(peaks.indices.tolist()):24s} {curve.values.max():.3f}")
