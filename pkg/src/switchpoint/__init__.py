"""Rule-based switch-point (cue point) detection for electronic dance music.

The pipeline finds candidate switch-in points by combining self-similarity
novelty over seven beat-synchronous features with a 4-bar period filter and
a harmonic-salience filter. A synthesis module generates loop-structured
test tracks with exact ground truth, and the evaluation module scores
candidates with the windowed hit-rate protocol.
"""

__version__ = "0.1.0"

from . import errors
from .audio import AudioBuffer, load_audio, write_wav
from .beats import BeatGrid, StrongBeatGrid, estimate_beats, load_beats, strong_beats
from .dsp import (
    HpssPair,
    OnsetCurve,
    Spectrogram,
    band_onsets,
    cq_and_chroma,
    cqt,
    hpss,
    pcp,
    spectral_flux,
    stft,
)
from .evaluation import AnnotationSet, evaluate_corpus, load_annotations, match
from .features import (
    FEATURE_NAMES,
    FeatureSeries,
    FrameFeatures,
    agg_count,
    agg_rms,
    beat_sync_features,
    extract_features,
    loudness_curve,
)
from .novelty import (
    NoveltyCurve,
    PeakSet,
    SelfSimilarityMatrix,
    checkerboard_kernel,
    novelty_curve,
    pick_peaks,
    ssm,
)
from .pipeline import AnalysisResult, PipelineConfig, explain, get_switch_points
from .selection import (
    PeriodEstimate,
    SwitchPoint,
    SwitchPointSet,
    build_switch_points,
    estimate_period,
    period_filter,
    salience_filter,
)
from .synth import RenderedTrack, Section, TrackScript, load_script, note_to_hz, render
