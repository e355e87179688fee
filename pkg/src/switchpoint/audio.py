"""Audio ingestion: decode files into a mono analysis buffer at 44.1 kHz.

The core pipeline only requires uncompressed PCM WAV. Other containers can be
plugged in through :func:`register_decoder` without adding codec dependencies
to the package itself.
"""

import math
import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import CorruptStream, UnsupportedCodec

#: Fixed analysis sample rate (Hz). Everything downstream assumes this rate.
ANALYSIS_RATE = 44100

# Extension -> callable(path) -> (samples ndarray, sample_rate). Extra decoders
# (mp3, flac, ...) may be registered by the host application.
_DECODERS = {}


@dataclass(frozen=True)
class AudioBuffer:
    """Mono PCM samples at the fixed analysis rate.

    Immutable after creation; safe to share across threads.
    """

    samples: np.ndarray
    sample_rate: int = ANALYSIS_RATE
    source_path: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        if not np.all(np.isfinite(samples)):
            raise ValueError("audio samples must be finite")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def __len__(self) -> int:
        return len(self.samples)


def register_decoder(extension: str, decoder) -> None:
    """Register ``decoder(path) -> (samples, sample_rate)`` for an extension."""
    _DECODERS[extension.lower().lstrip(".")] = decoder


def load_audio(path: str) -> AudioBuffer:
    """Decode ``path`` into a mono buffer at 44100 Hz.

    Multichannel input is averaged to mono before resampling; resampling is
    polyphase (band-limited). The buffer is peak-normalized only if the
    mixdown exceeds full scale.

    Raises
    ------
    FileNotFoundError, UnsupportedCodec, CorruptStream
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    ext = os.path.splitext(path)[1].lower().lstrip(".")
    if ext == "wav":
        samples, rate = _read_wav(path)
    elif ext in _DECODERS:
        samples, rate = _DECODERS[ext](path)
        samples = np.asarray(samples, dtype=np.float64)
    else:
        raise UnsupportedCodec(f"no decoder registered for '.{ext}': {path}")

    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.size == 0:
        raise CorruptStream(f"empty audio payload: {path}")
    if rate != ANALYSIS_RATE:
        samples = _resample(samples, rate, ANALYSIS_RATE)
    peak = np.max(np.abs(samples))
    if peak > 1.0:
        samples = samples / peak
    return AudioBuffer(samples=samples, source_path=path)


def _read_wav(path):
    """Read a PCM WAV file and return (float64 samples in [-1, 1], rate)."""
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            rate, data = wavfile.read(path)
        for w in caught:
            if "EOF" in str(w.message):
                raise CorruptStream(f"truncated WAV payload: {path}")
    except CorruptStream:
        raise
    except ValueError as exc:
        # scipy raises ValueError both for unsupported format tags and for
        # malformed headers; classify on the message.
        msg = str(exc)
        if "format" in msg.lower() or "compression" in msg.lower():
            raise UnsupportedCodec(f"{msg}: {path}") from exc
        raise CorruptStream(f"{msg}: {path}") from exc
    except Exception as exc:  # struct.error on mangled headers
        raise CorruptStream(f"malformed WAV: {path} ({exc})") from exc

    if data.dtype == np.int16:
        samples = data / 32768.0
    elif data.dtype == np.int32:
        # 24-bit PCM arrives as int32 with the payload in the upper bytes.
        samples = data / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise UnsupportedCodec(f"unsupported WAV sample format {data.dtype}: {path}")
    return samples, rate


def _resample(samples, rate_in, rate_out):
    g = math.gcd(rate_in, rate_out)
    return resample_poly(samples, rate_out // g, rate_in // g)


def write_wav(path: str, samples: np.ndarray, sample_rate: int = ANALYSIS_RATE,
              dtype: str = "float32") -> None:
    """Write mono samples as a PCM WAV file (float32 or int16)."""
    samples = np.asarray(samples)
    if dtype == "float32":
        wavfile.write(path, sample_rate, samples.astype(np.float32))
    elif dtype == "int16":
        clipped = np.clip(samples, -1.0, 1.0)
        wavfile.write(path, sample_rate, (clipped * 32767.0).astype(np.int16))
    else:
        raise ValueError(f"unsupported output dtype: {dtype}")
