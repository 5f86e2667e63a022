"""DSP unit tests: round-trip identities, oracle-checked peaks, warp behavior."""

import numpy as np
import pytest
from scipy.io import wavfile

from mosaico import dsp


def sine(freq_hz, rate=16000, seconds=1.0, amp=0.5):
    t = np.arange(int(rate * seconds)) / rate
    return amp * np.sin(2 * np.pi * freq_hz * t)


def dominant_freq(samples, rate):
    """FFT-peak oracle: frequency of the largest rFFT magnitude bin."""
    spec = np.abs(np.fft.rfft(samples))
    return np.argmax(spec) * rate / len(samples)


def rel_rms(a, b):
    return np.sqrt(np.mean((a - b) ** 2)) / max(np.sqrt(np.mean(b**2)), 1e-30)


class TestLoadAudio:
    def test_pcm16_no_op_path(self, tmp_path):
        rate = 16000
        x = sine(440.0, rate)
        pcm = np.round(np.clip(x, -1, 1) * 32767).astype(np.int16)
        path = tmp_path / "tone.wav"
        wavfile.write(path, rate, pcm)
        wave = dsp.load_audio(path, target_rate=rate)
        assert wave.sample_rate == rate
        assert len(wave.samples) == len(x)
        # Bit-faithful within 16-bit quantization.
        assert np.max(np.abs(wave.samples - x)) < 1.0 / 32767

    def test_resample_48k_sine_peak(self, tmp_path):
        x = sine(1000.0, rate=48000, seconds=0.5)
        pcm = np.round(x * 32767).astype(np.int16)
        path = tmp_path / "tone48.wav"
        wavfile.write(path, 48000, pcm)
        wave = dsp.load_audio(path, target_rate=16000)
        assert wave.sample_rate == 16000
        bin_hz = 16000 / len(wave.samples)
        assert abs(dominant_freq(wave.samples, 16000) - 1000.0) <= bin_hz

    def test_stereo_downmix(self, tmp_path):
        x = sine(500.0, seconds=0.2)
        stereo = np.stack([x, -x], axis=1)
        pcm = np.round(stereo * 32767).astype(np.int16)
        path = tmp_path / "st.wav"
        wavfile.write(path, 16000, pcm)
        wave = dsp.load_audio(path, target_rate=16000)
        assert np.max(np.abs(wave.samples)) < 1e-4

    def test_float32_wav(self, tmp_path):
        x = sine(700.0, seconds=0.2).astype(np.float32)
        path = tmp_path / "f32.wav"
        wavfile.write(path, 16000, x)
        wave = dsp.load_audio(path, target_rate=16000)
        assert np.allclose(wave.samples, x, atol=1e-7)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.wav"
        path.write_bytes(b"")
        with pytest.raises(dsp.AudioError):
            dsp.load_audio(path)

    def test_zero_length_audio_rejected(self, tmp_path):
        path = tmp_path / "zero.wav"
        wavfile.write(path, 16000, np.zeros(0, dtype=np.int16))
        with pytest.raises(dsp.AudioError):
            dsp.load_audio(path)

    def test_save_load_round_trip(self, tmp_path):
        wave = dsp.Waveform(sine(300.0, seconds=0.3), 16000)
        path = tmp_path / "rt.wav"
        dsp.save_wav(path, wave)
        back = dsp.load_audio(path, target_rate=16000)
        assert np.max(np.abs(back.samples - wave.samples)) < 1.0 / 32767


class TestStft:
    def test_all_zero_waveform(self):
        wave = dsp.Waveform(np.zeros(4096), 16000)
        spec = dsp.stft(wave)
        assert spec.shape[1] == 513
        assert np.all(spec == 0)

    def test_round_trip_white_noise(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-0.9, 0.9, 16000)
        params = dsp.StftParams(1024, 256, "hann")
        wave = dsp.Waveform(x, 16000)
        back = dsp.istft(dsp.stft(wave, params), params, 16000)
        interior = dsp.cola_interior(len(back.samples), params)
        assert rel_rms(back.samples[interior], x[interior]) < 1e-6

    @pytest.mark.parametrize("fft,hop", [(512, 128), (1024, 256), (2048, 512), (1024, 512)])
    def test_round_trip_across_settings(self, fft, hop):
        rng = np.random.default_rng(fft + hop)
        x = rng.normal(0, 0.2, 12000)
        params = dsp.StftParams(fft, hop, "hann")
        back = dsp.istft(dsp.stft(dsp.Waveform(x, 16000), params), params, 16000)
        interior = dsp.cola_interior(len(back.samples), params)
        assert rel_rms(back.samples[interior], x[interior]) < 1e-6

    def test_parseval_per_frame(self):
        # Oracle: direct sum of windowed sample energy per frame.
        rng = np.random.default_rng(7)
        x = rng.normal(0, 0.3, 8000)
        params = dsp.StftParams(1024, 256, "hann")
        spec = dsp.stft(dsp.Waveform(x, 16000), params)
        w = params.window_values()
        n = params.fft_size
        for t in range(spec.shape[0]):
            frame = x[t * params.hop : t * params.hop + n] * w
            direct = np.sum(frame**2)
            m = np.abs(spec[t]) ** 2
            via_fft = (m[0] + m[-1] + 2 * np.sum(m[1:-1])) / n
            assert abs(direct - via_fft) <= 1e-6 * max(direct, 1e-30)

    def test_too_short_rejected(self):
        with pytest.raises(dsp.AudioError):
            dsp.stft(dsp.Waveform(np.zeros(100), 16000))

    def test_no_nan_propagation(self):
        rng = np.random.default_rng(3)
        x = rng.normal(0, 0.5, 5000)
        spec = dsp.stft(dsp.Waveform(x, 16000))
        assert np.all(np.isfinite(spec))
        back = dsp.istft(spec)
        assert np.all(np.isfinite(back.samples))


class TestGriffinLim:
    def test_zero_magnitude_gives_zero_waveform(self):
        params = dsp.StftParams()
        mag = dsp.MagnitudeSpectrogram(np.zeros((20, params.n_bins)), params, 16000)
        wave = dsp.griffin_lim(mag, n_iters=4)
        assert np.all(wave.samples == 0)

    def test_sine_peak_preserved(self):
        wave = dsp.Waveform(sine(440.0, seconds=1.0), 16000)
        mag = dsp.magnitude(wave)
        out = dsp.griffin_lim(mag, n_iters=32)
        bin_hz = 16000 / mag.params.fft_size
        assert abs(dominant_freq(out.samples, 16000) - 440.0) <= bin_hz

    def test_consistency_error_non_increasing(self):
        rng = np.random.default_rng(11)
        # Speech-like: pink-ish noise via cumulative sum, normalized.
        x = np.cumsum(rng.normal(0, 1, 12000))
        x = 0.5 * x / np.max(np.abs(x))
        mag = dsp.magnitude(dsp.Waveform(x, 16000))
        _, errs = dsp.griffin_lim_trace(mag, n_iters=32)
        assert errs[-1] <= errs[0]
        assert np.all(np.diff(errs) <= 1e-9 * (1 + errs[:-1]))

    def test_bad_iteration_count(self):
        params = dsp.StftParams()
        mag = dsp.MagnitudeSpectrogram(np.zeros((5, params.n_bins)), params, 16000)
        with pytest.raises(ValueError):
            dsp.griffin_lim(mag, n_iters=0)


class TestVtlp:
    def test_identity_factor(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(-0.5, 0.5, 16000)
        params = dsp.StftParams()
        out = dsp.vtlp(dsp.Waveform(x, 16000), 1.0, params)
        interior = dsp.cola_interior(len(out.samples), params)
        assert rel_rms(out.samples[interior], x[: len(out.samples)][interior]) < 1e-6

    @pytest.mark.parametrize("factor,expected", [(0.9, 900.0), (1.1, 1100.0)])
    def test_tone_shift(self, factor, expected):
        wave = dsp.Waveform(sine(1000.0, seconds=1.0), 16000)
        params = dsp.StftParams()
        out = dsp.vtlp(wave, factor, params)
        bin_hz = 16000 / params.fft_size
        assert abs(dominant_freq(out.samples, 16000) - expected) <= bin_hz

    def test_duration_within_one_hop(self):
        x = sine(500.0, seconds=0.7)
        params = dsp.StftParams()
        out = dsp.vtlp(dsp.Waveform(x, 16000), 0.95, params)
        assert abs(len(out.samples) - len(x)) <= params.hop

    @pytest.mark.parametrize("factor", [0.5, 1.3, 2.0])
    def test_factor_out_of_range(self, factor):
        wave = dsp.Waveform(sine(500.0, seconds=0.2), 16000)
        with pytest.raises(ValueError):
            dsp.vtlp(wave, factor)


class TestMelSpectrogram:
    def test_silence_all_zero(self):
        wave = dsp.Waveform(np.zeros(16000), 16000)
        mel = dsp.mel_spectrogram(wave)
        assert np.all(mel == 0)

    def test_filterbank_rows_positive(self):
        bank = dsp.mel_filterbank(48, 4096, 16000)
        assert bank.shape == (48, 2049)
        assert np.all(bank.sum(axis=1) > 0)
        flat = bank @ np.ones(2049)
        assert np.all(flat > 0)

    def test_frame_count_formula(self):
        # 3.0 s at 150 ms window / 10 ms hop -> 1 + (3000 - 150) / 10 = 286.
        wave = dsp.Waveform(np.zeros(48000), 16000)
        mel = dsp.mel_spectrogram(wave, n_mels=48, window_ms=150.0, hop_ms=10.0)
        assert mel.shape[0] == 286

    def test_entries_non_negative(self):
        rng = np.random.default_rng(9)
        wave = dsp.Waveform(rng.uniform(-0.8, 0.8, 16000), 16000)
        mel = dsp.mel_spectrogram(wave)
        assert np.all(mel >= 0)
        assert np.all(np.isfinite(mel))

    def test_too_short_rejected(self):
        with pytest.raises(dsp.AudioError):
            dsp.mel_spectrogram(dsp.Waveform(np.zeros(100), 16000))
