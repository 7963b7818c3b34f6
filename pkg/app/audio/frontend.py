"""
Audio front end: WAV IO, ingest (downmix, resample, slice, pad), log-mel
spectrogram and moment patching.

Geometry for a 30 s clip at 16 kHz: 480,000 samples -> 2998 x 64 log-mel
frames (400-sample Hann window, 160-sample hop) -> 60 patches of 96 frames
with a 49-frame hop.
"""

from typing import Optional, Tuple

import numpy as np
import structlog
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field
from scipy import signal
from scipy.io import wavfile

from app.errors import DataError
from app.ingest.slices import select_window
from app.models.schemas import SliceWhich

logger = structlog.get_logger()

TARGET_RATE = 16000
CLIP_SECONDS = 30.0
WINDOW_SAMPLES = 400
HOP_SAMPLES = 160
FFT_SIZE = 512
MEL_BINS = 64
MEL_LOW_HZ = 125.0
MEL_HIGH_HZ = 7500.0
LOG_FLOOR = 1e-10
PATCH_FRAMES = 96
PATCH_HOP = 49


class AudioClip(BaseModel):
    """Mono clip after ingest"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    samples: np.ndarray
    sample_rate: int = TARGET_RATE
    padded: bool = Field(default=False, description="Source was shorter than the clip and zero-padded")
    window_start: float = 0.0

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


class MelSpectrogram(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray = Field(..., description="(frames, mel_bins) natural-log mel energies")
    frame_hop_ms: float = 10.0
    window_ms: float = 25.0

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


class MomentPatchSeries(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    patches: np.ndarray = Field(..., description="(moments, 96, 64)")
    starts: np.ndarray = Field(..., description="First frame of each patch")

    def __len__(self) -> int:
        return self.patches.shape[0]


# ============================================================================
# WAV IO
# ============================================================================


def read_wav(path: str) -> Tuple[np.ndarray, int]:
    """Samples scaled to [-1, 1] as (n,) or (n, channels), and the rate"""
    rate, data = wavfile.read(path)
    if data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    else:
        samples = data.astype(np.float64)
    return samples, int(rate)


def write_wav(path: str, samples: np.ndarray, rate: int, bits: int = 8):
    clipped = np.clip(samples, -1.0, 1.0)
    if bits == 8:
        data = np.round(clipped * 127.0 + 128.0).astype(np.uint8)
    else:
        data = np.round(clipped * 32767.0).astype(np.int16)
    wavfile.write(path, rate, data)


# ============================================================================
# Ingest
# ============================================================================


def resample_linear(samples: np.ndarray, rate: int, target_rate: int = TARGET_RATE) -> np.ndarray:
    if rate == target_rate:
        return samples
    n_out = int(round(len(samples) * target_rate / rate))
    source_t = np.arange(len(samples)) / rate
    target_t = np.arange(n_out) / target_rate
    return np.interp(target_t, source_t, samples)


def ingest_audio(samples: np.ndarray, rate: int, channels: Optional[int] = None,
                 which: SliceWhich = SliceWhich.BEGINNING, clip_seconds: float = CLIP_SECONDS,
                 target_rate: int = TARGET_RATE) -> AudioClip:
    """
    Downmix to mono, take the 30 s window for `which`, resample linearly to
    16 kHz and zero-pad or truncate to exactly clip_seconds.
    """
    if rate <= 0:
        raise DataError(f"Sample rate must be positive, got {rate}")
    data = np.asarray(samples, dtype=np.float64)
    if data.size == 0:
        raise DataError("Empty audio input")
    if data.ndim == 2:
        data = data.mean(axis=1)
    elif channels and channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)

    duration = len(data) / rate
    start_s, _ = select_window(duration, which, clip_seconds)
    start = int(round(start_s * rate))
    length = int(np.ceil(clip_seconds * rate))
    data = data[start:start + length]
    data = resample_linear(data, rate, target_rate)

    expected = int(round(clip_seconds * target_rate))
    padded = len(data) < expected
    if padded:
        logger.warning("audio_zero_padded", seconds=round(len(data) / target_rate, 3),
                       clip_seconds=clip_seconds)
        data = np.concatenate([data, np.zeros(expected - len(data))])
    return AudioClip(samples=data[:expected], sample_rate=target_rate, padded=padded, window_start=start_s)


# ============================================================================
# Log-mel spectrogram
# ============================================================================


def hz_to_mel(hz):
    return 1127.0 * np.log1p(np.asarray(hz, dtype=np.float64) / 700.0)


def mel_filterbank(num_bins: int = MEL_BINS, fft_size: int = FFT_SIZE, rate: int = TARGET_RATE,
                   low_hz: float = MEL_LOW_HZ, high_hz: float = MEL_HIGH_HZ) -> np.ndarray:
    """(fft_size // 2 + 1, num_bins) triangular filters equally spaced on the mel scale"""
    spectrum_mel = hz_to_mel(np.linspace(0.0, rate / 2.0, fft_size // 2 + 1))
    edges = np.linspace(hz_to_mel(low_hz), hz_to_mel(high_hz), num_bins + 2)
    weights = np.zeros((spectrum_mel.size, num_bins))
    for i in range(num_bins):
        lower, center, upper = edges[i:i + 3]
        rising = (spectrum_mel - lower) / (center - lower)
        falling = (upper - spectrum_mel) / (upper - center)
        weights[:, i] = np.maximum(0.0, np.minimum(rising, falling))
    weights[0, :] = 0.0
    return weights


def mel_center_frequencies(num_bins: int = MEL_BINS, low_hz: float = MEL_LOW_HZ,
                           high_hz: float = MEL_HIGH_HZ) -> np.ndarray:
    edges = np.linspace(hz_to_mel(low_hz), hz_to_mel(high_hz), num_bins + 2)
    return 700.0 * np.expm1(edges[1:-1] / 1127.0)


def stft_magnitude(samples: np.ndarray) -> np.ndarray:
    if len(samples) < WINDOW_SAMPLES:
        raise DataError(f"Need at least {WINDOW_SAMPLES} samples, got {len(samples)}")
    frames = sliding_window_view(samples, WINDOW_SAMPLES)[::HOP_SAMPLES]
    window = signal.get_window("hann", WINDOW_SAMPLES, fftbins=True)
    return np.abs(np.fft.rfft(frames * window, n=FFT_SIZE, axis=-1))


_FILTERBANK = None


def mel_spectrogram(clip: AudioClip) -> MelSpectrogram:
    global _FILTERBANK
    if _FILTERBANK is None:
        _FILTERBANK = mel_filterbank()
    mel = stft_magnitude(clip.samples) @ _FILTERBANK
    return MelSpectrogram(values=np.log(np.maximum(mel, LOG_FLOOR)))


def patchify(spec: MelSpectrogram) -> MomentPatchSeries:
    frames = spec.values.shape[0]
    if frames < PATCH_FRAMES:
        raise DataError(f"Spectrogram has {frames} frames; a moment needs {PATCH_FRAMES}")
    count = (frames - PATCH_FRAMES) // PATCH_HOP + 1
    starts = np.arange(count) * PATCH_HOP
    patches = np.stack([spec.values[s:s + PATCH_FRAMES] for s in starts])
    return MomentPatchSeries(patches=patches, starts=starts)


def clip_to_patches(samples: np.ndarray, rate: int, which: SliceWhich = SliceWhich.BEGINNING) -> MomentPatchSeries:
    return patchify(mel_spectrogram(ingest_audio(samples, rate, which=which)))


def band_energies(patches: MomentPatchSeries) -> np.ndarray:
    """Per-moment mean log-mel energy per band, (moments, 64)"""
    return patches.patches.mean(axis=1)
