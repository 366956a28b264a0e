"""Mono WAV input and output.

Input may be 16-bit PCM or 32-bit float; output is always 32-bit float.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .errors import FormatError

log = logging.getLogger(__name__)

PCM16_SCALE = 32768.0


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int
    channels: int = 1

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise FormatError(f"sample rate must be positive, got {self.sample_rate}")
        if self.channels != 1 or np.ndim(self.samples) != 1:
            raise FormatError("audio buffers are mono")


def read_wav(path):
    """Read a WAV file as mono float64 samples in [-1, 1].

    16-bit samples are divided by 32768.  Multichannel files are averaged
    down to one channel with a warning.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except ValueError as exc:
        raise FormatError(f"{path}: unreadable WAV ({exc})") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported sample encoding {data.dtype} "
                          "in 'fmt ' chunk (need 16-bit PCM or 32-bit float)")
    if samples.ndim == 2:
        log.warning("%s: downmixing %d channels to mono", path, samples.shape[1])
        samples = samples.mean(axis=1)
    return AudioBuffer(samples, int(rate))


def write_wav(path, buffer):
    """Write a 32-bit float WAV, rescaling if the peak exceeds 1."""
    x = np.asarray(buffer.samples, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise FormatError("cannot write non-finite samples")
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if peak > 1.0:
        gain = 1.0 / peak
        log.warning("peak %.4g exceeds full scale; applying gain %.4g", peak, gain)
        x = x * gain
    wavfile.write(path, int(buffer.sample_rate), x.astype(np.float32))
