"""Audio I/O and spectral processing for the stimulus pipeline.

STFT/ISTFT with least-squares overlap-add inversion, Griffin-Lim phase
reconstruction, VTLP frequency warping, mel spectrograms, and RIFF WAV
read/write with windowed-sinc resampling.  All functions are pure and
operate on in-memory value types.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps
from scipy.io import wavfile

CANONICAL_RATE = 16_000  # embedding encoder input rate, mono

DEFAULT_FFT_SIZE = 1024
DEFAULT_HOP = 256
DEFAULT_WINDOW = "hann"

# Knee of the piecewise-linear VTLP warp (0.6 x Nyquist at 16 kHz).
VTLP_BOUNDARY_HZ = 4800.0

RESAMPLE_HALF_TAPS = 32  # windowed-sinc half-width, in input samples
RESAMPLE_KAISER_BETA = 8.555


class AudioError(ValueError):
    """Unreadable, unsupported, or degenerate audio input."""


@dataclass(frozen=True)
class Waveform:
    """Mono audio in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise AudioError(f"waveform must be 1-D, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise AudioError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise AudioError("waveform contains non-finite samples")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class StftParams:
    fft_size: int = DEFAULT_FFT_SIZE
    hop: int = DEFAULT_HOP
    window: str = DEFAULT_WINDOW

    def __post_init__(self):
        if self.fft_size <= 0 or self.fft_size & (self.fft_size - 1):
            raise ValueError(f"fft_size must be a power of two, got {self.fft_size}")
        if not 0 < self.hop <= self.fft_size:
            raise ValueError(f"hop must satisfy 0 < hop <= fft_size, got {self.hop}")

    def window_values(self) -> np.ndarray:
        # Periodic window: COLA holds for hann when hop divides fft_size/2.
        return sps.get_window(self.window, self.fft_size, fftbins=True)

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


@dataclass(frozen=True)
class MagnitudeSpectrogram:
    """Non-negative frames x bins STFT magnitudes."""

    values: np.ndarray
    params: StftParams
    sample_rate: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape[1] != self.params.n_bins:
            raise ValueError(
                f"expected (frames, {self.params.n_bins}) magnitudes, got {values.shape}"
            )
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("magnitudes must be finite and non-negative")


def _pcm_to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        # Covers both 32-bit PCM and 24-bit PCM widened into int32.
        return data.astype(np.float64) / 2147483648.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise AudioError(f"unsupported WAV sample encoding {data.dtype}")


def load_audio(path, target_rate: int = CANONICAL_RATE) -> Waveform:
    """Load a RIFF WAV as mono float at ``target_rate``.

    Stereo is downmixed by channel averaging; PCM is scaled to [-1, 1];
    rate conversion uses windowed-sinc interpolation.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise AudioError(f"unreadable WAV file {path}: {exc}") from exc
    if data.size == 0:
        raise AudioError(f"zero-length audio in {path}")
    samples = _pcm_to_float(data)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    samples = np.clip(samples, -1.0, 1.0)
    if rate != target_rate:
        samples = resample(samples, rate, target_rate)
        samples = np.clip(samples, -1.0, 1.0)
        if samples.size == 0:
            raise AudioError(f"audio in {path} too short to resample")
    return Waveform(samples, target_rate)


def save_wav(path, wave: Waveform) -> None:
    """Write a waveform as 16-bit PCM RIFF WAV."""
    pcm = np.clip(wave.samples, -1.0, 1.0)
    pcm = np.round(pcm * 32767.0).astype(np.int16)
    wavfile.write(path, wave.sample_rate, pcm)


def resample(samples: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Rational-ratio resampling with a Kaiser-windowed sinc filter."""
    if rate_in == rate_out:
        return np.asarray(samples, dtype=np.float64)
    g = math.gcd(rate_in, rate_out)
    up, down = rate_out // g, rate_in // g
    # Lowpass at the narrower of the two Nyquist rates, on the upsampled grid.
    cutoff = min(1.0 / up, 1.0 / down)
    # Multiple of `down` so the group-delay trim lands on an output sample.
    half = math.ceil(RESAMPLE_HALF_TAPS * max(up, down) / down) * down
    n = np.arange(-half, half + 1)
    taps = cutoff * np.sinc(cutoff * n) * np.kaiser(2 * half + 1, RESAMPLE_KAISER_BETA)
    taps *= up
    out = sps.upfirdn(taps, np.asarray(samples, dtype=np.float64), up=up, down=down)
    # upfirdn output carries the filter's group delay; trim to the aligned span.
    offset = half // down
    n_out = (len(samples) * up) // down
    return out[offset : offset + n_out]


def stft(wave: Waveform, params: StftParams = StftParams()) -> np.ndarray:
    """Short-time Fourier transform, frames x (fft_size/2 + 1) complex."""
    x = wave.samples
    if len(x) < params.fft_size:
        raise AudioError(
            f"waveform of {len(x)} samples shorter than one {params.fft_size}-sample frame"
        )
    w = params.window_values()
    n_frames = 1 + (len(x) - params.fft_size) // params.hop
    idx = np.arange(params.fft_size)[None, :] + params.hop * np.arange(n_frames)[:, None]
    return np.fft.rfft(x[idx] * w[None, :], axis=1)


def istft(spec: np.ndarray, params: StftParams = StftParams(), sample_rate: int = CANONICAL_RATE) -> Waveform:
    """Least-squares inverse STFT (window-weighted overlap-add).

    Exact inverse on the interior where the squared-window overlap is constant;
    samples never covered by a window come back as zero.
    """
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != params.n_bins:
        raise ValueError(f"expected (frames, {params.n_bins}) spectrogram, got {spec.shape}")
    w = params.window_values()
    n_frames = spec.shape[0]
    length = (n_frames - 1) * params.hop + params.fft_size
    frames = np.fft.irfft(spec, n=params.fft_size, axis=1)
    out = np.zeros(length)
    wsum = np.zeros(length)
    for t in range(n_frames):
        start = t * params.hop
        out[start : start + params.fft_size] += frames[t] * w
        wsum[start : start + params.fft_size] += w * w
    nz = wsum > 1e-12
    out[nz] /= wsum[nz]
    return Waveform(out, sample_rate)


def cola_interior(n_samples: int, params: StftParams) -> slice:
    """Index range where ISTFT(STFT(x)) reconstructs x exactly."""
    return slice(params.fft_size, max(params.fft_size, n_samples - params.fft_size))


def magnitude(wave: Waveform, params: StftParams = StftParams()) -> MagnitudeSpectrogram:
    return MagnitudeSpectrogram(np.abs(stft(wave, params)), params, wave.sample_rate)


def _gl_consistency_error(mag: np.ndarray, spec: np.ndarray) -> float:
    return float(np.linalg.norm(mag - np.abs(spec)))


def griffin_lim_trace(
    mag: MagnitudeSpectrogram, n_iters: int = 32, momentum: float = 0.0
) -> tuple[Waveform, np.ndarray]:
    """Griffin-Lim returning the waveform and per-iteration consistency error.

    e_k = ||mag - |STFT(x_k)||_F.  With momentum 0 this is the classical
    alternating projection between consistent spectrograms and the target
    magnitude set, so e_k is non-increasing.
    """
    if n_iters < 1:
        raise ValueError(f"n_iters must be >= 1, got {n_iters}")
    params = mag.params
    target = mag.values
    # Deterministic zero-phase start.
    wave = istft(target.astype(np.complex128), params, mag.sample_rate)
    spec_prev = None
    errors = np.empty(n_iters)
    for k in range(n_iters):
        spec = stft(wave, params)
        errors[k] = _gl_consistency_error(target, spec)
        accel = spec if spec_prev is None or momentum <= 0.0 else spec + momentum * (spec - spec_prev)
        spec_prev = spec
        wave = istft(target * np.exp(1j * np.angle(accel)), params, mag.sample_rate)
    return wave, errors


def griffin_lim(mag: MagnitudeSpectrogram, n_iters: int = 32, momentum: float = 0.0) -> Waveform:
    """Estimate a phase for ``mag`` and return the resynthesized waveform."""
    wave, _ = griffin_lim_trace(mag, n_iters=n_iters, momentum=momentum)
    return wave


def _vtlp_warp_inverse(freqs: np.ndarray, factor: float, nyquist: float, boundary_hz: float) -> np.ndarray:
    """Inverse of the piecewise-linear VTLP frequency map.

    Forward map: slope = factor up to the knee, then a linear rescale that
    pins the Nyquist frequency.  Returns, for each output frequency, the
    source frequency to sample the original spectrum at.
    """
    knee_src = boundary_hz * min(factor, 1.0) / factor
    knee_dst = boundary_hz * min(factor, 1.0)
    inv = np.empty_like(freqs)
    low = freqs <= knee_dst
    inv[low] = freqs[low] / factor
    if nyquist > knee_dst:
        slope = (nyquist - knee_src) / (nyquist - knee_dst)
        inv[~low] = knee_src + (freqs[~low] - knee_dst) * slope
    return np.clip(inv, 0.0, nyquist)


def vtlp(
    wave: Waveform,
    factor: float,
    params: StftParams = StftParams(),
    boundary_hz: float = VTLP_BOUNDARY_HZ,
) -> Waveform:
    """Vocal tract length perturbation by spectral-axis warping.

    Magnitudes are moved along the piecewise-linear warp (linear
    interpolation between bins); phases are reused unchanged and the frames
    are resynthesized by ISTFT.  Factor 1.0 reduces to the STFT round trip.
    """
    if not 0.8 <= factor <= 1.25:
        raise ValueError(f"vtlp factor must lie in [0.8, 1.25], got {factor}")
    spec = stft(wave, params)
    nyquist = wave.sample_rate / 2.0
    freqs = np.linspace(0.0, nyquist, params.n_bins)
    source = _vtlp_warp_inverse(freqs, factor, nyquist, boundary_hz)
    mag = np.abs(spec)
    warped = np.empty_like(mag)
    for t in range(mag.shape[0]):
        warped[t] = np.interp(source, freqs, mag[t])
    out = warped * np.exp(1j * np.angle(spec))
    return istft(out, params, wave.sample_rate)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular filters on the mel scale spanning 0 to Nyquist, (n_mels, bins)."""
    nyquist = sample_rate / 2.0
    mel_pts = np.linspace(hz_to_mel(0.0), hz_to_mel(nyquist), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    bin_freqs = np.linspace(0.0, nyquist, n_fft // 2 + 1)
    bank = np.zeros((n_mels, len(bin_freqs)))
    for m in range(n_mels):
        left, center, right = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (bin_freqs - left) / max(center - left, 1e-9)
        down = (right - bin_freqs) / max(right - center, 1e-9)
        bank[m] = np.maximum(0.0, np.minimum(up, down))
    return bank


def mel_spectrogram(
    wave: Waveform,
    n_mels: int = 48,
    window_ms: float = 150.0,
    hop_ms: float = 10.0,
) -> np.ndarray:
    """Frames x n_mels power mel spectrogram.

    Frame count follows 1 + floor((duration_ms - window_ms) / hop_ms).
    """
    if window_ms < hop_ms:
        raise ValueError("window_ms must be >= hop_ms")
    win_len = int(round(window_ms * wave.sample_rate / 1000.0))
    hop_len = int(round(hop_ms * wave.sample_rate / 1000.0))
    x = wave.samples
    if len(x) < win_len:
        raise AudioError(f"waveform shorter than one {window_ms} ms window")
    n_fft = 1 << (win_len - 1).bit_length()
    w = sps.get_window("hann", win_len, fftbins=True)
    n_frames = 1 + (len(x) - win_len) // hop_len
    idx = np.arange(win_len)[None, :] + hop_len * np.arange(n_frames)[:, None]
    spec = np.fft.rfft(x[idx] * w[None, :], n=n_fft, axis=1)
    power = np.abs(spec) ** 2
    bank = mel_filterbank(n_mels, n_fft, wave.sample_rate)
    return power @ bank.T
