"""Deterministic synthesis of non-rating test stimuli.

Bandwidth-test clips, comparison pairs, trapping clips and the level/SNR
utilities they are built from. All operations are pure: identical inputs
(seeds included) produce bit-identical buffers. Audio is mono, campaign
material is fixed at 48 kHz; resampling is out of scope and other rates
are rejected where 48 kHz is required.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.io import wavfile

from .clips import Clip, ClipRole
from .errors import DegenerateSignalError, InvalidArgumentError

CAMPAIGN_RATE = 48_000
PEAK_LIMIT = 0.99

#: Lower cutoff frequencies (Hz) of the bandwidth discrimination clips.
BW_TEST_CUTOFFS = (4_000, 9_000, 16_000)
#: Mixing SNR for bandwidth-test clips. The level relationship is a toolkit
#: choice: loud enough to judge, quiet enough not to mask the speech.
BW_TEST_SNR_DB = 20.0
#: SNRs of the just-noticeable-noise comparison pair, cleaner clip first.
COMPARISON_SNRS_DB = (45.0, 35.0)

TRAP_NOISE_SECONDS = 0.5
TRAP_NOISE_RMS_DBFS = -20.0
TRAP_GAP_SECONDS = 0.3


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio: float64 samples in [-1, 1] plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidArgumentError(f"audio must be mono 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise InvalidArgumentError("audio contains non-finite samples")
        if int(self.sample_rate) <= 0:
            raise InvalidArgumentError(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class BandSpec:
    """Pass band in Hz; ``high_cutoff`` defaults to Nyquist at use time."""

    low_cutoff: float
    high_cutoff: Optional[float] = None

    def resolve(self, sample_rate: int) -> tuple[float, float]:
        nyquist = sample_rate / 2.0
        high = nyquist if self.high_cutoff is None else float(self.high_cutoff)
        low = float(self.low_cutoff)
        if not (0 <= low < high <= nyquist):
            raise InvalidArgumentError(
                f"band [{low}, {high}] invalid for sample rate {sample_rate}"
            )
        return low, high


@dataclass(frozen=True)
class SnrMix:
    """A mixture plus the exact speech and noise terms it is the sum of."""

    mixture: AudioBuffer
    speech: AudioBuffer
    noise: AudioBuffer


def _require_same_rate(a: AudioBuffer, b: AudioBuffer) -> None:
    if a.sample_rate != b.sample_rate:
        raise InvalidArgumentError(
            f"sample rates differ: {a.sample_rate} vs {b.sample_rate}"
        )


def generate_wgn(duration: float, sample_rate: int, seed: int) -> AudioBuffer:
    """White Gaussian noise of ``duration`` seconds, peak-scaled to 0.5.

    Identical seeds yield bit-identical buffers.
    """
    if duration <= 0:
        raise InvalidArgumentError(f"duration must be positive, got {duration}")
    if sample_rate <= 0:
        raise InvalidArgumentError(f"sample rate must be positive, got {sample_rate}")
    n = int(round(duration * sample_rate))
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal(n)
    samples *= 0.5 / np.max(np.abs(samples))
    return AudioBuffer(samples, sample_rate)


def bandlimit(noise: AudioBuffer, band: BandSpec) -> AudioBuffer:
    """Brickwall band limiting in the frequency domain.

    Spectrum bins strictly below the low cutoff and strictly above the high
    cutoff are zeroed (conjugate symmetry handled by the real FFT); bins at
    the cutoffs survive. Exact cutoff and zero ripple; ringing is acceptable
    for a noise carrier.
    """
    low, high = band.resolve(noise.sample_rate)
    n = len(noise)
    if n == 0:
        raise InvalidArgumentError("cannot bandlimit an empty buffer")
    spectrum = np.fft.rfft(noise.samples)
    freqs = np.fft.rfftfreq(n, d=1.0 / noise.sample_rate)
    spectrum[(freqs < low) | (freqs > high)] = 0.0
    out = np.fft.irfft(spectrum, n=n)
    return AudioBuffer(out, noise.sample_rate)


def rms_dbfs(a: AudioBuffer) -> float:
    """RMS level in dBFS; all-zero input yields ``-inf``."""
    if len(a) == 0:
        raise InvalidArgumentError("cannot measure an empty buffer")
    rms = float(np.sqrt(np.mean(np.square(a.samples))))
    if rms == 0.0:
        return float("-inf")
    return 20.0 * np.log10(rms)


def mix_components(speech: AudioBuffer, noise: AudioBuffer, snr: float) -> SnrMix:
    """Scale ``noise`` so the full-buffer RMS power ratio hits ``snr`` dB.

    The noise is truncated to the speech length. If the mixture peaks above
    0.99, mixture and both components are rescaled together, which leaves
    the SNR untouched. SNR is defined on full-buffer RMS power, not active
    speech level.
    """
    _require_same_rate(speech, noise)
    if len(noise) < len(speech):
        raise InvalidArgumentError(
            f"noise ({len(noise)} samples) shorter than speech ({len(speech)})"
        )
    speech_rms = float(np.sqrt(np.mean(np.square(speech.samples))))
    noise_cut = noise.samples[: len(speech)]
    noise_rms = float(np.sqrt(np.mean(np.square(noise_cut))))
    if speech_rms == 0.0:
        raise DegenerateSignalError("speech has zero RMS")
    if noise_rms == 0.0:
        raise DegenerateSignalError("noise has zero RMS")
    gain = speech_rms / (noise_rms * 10.0 ** (snr / 20.0))
    scaled_noise = noise_cut * gain
    mixture = speech.samples + scaled_noise
    speech_part = speech.samples.copy()
    peak = float(np.max(np.abs(mixture)))
    if peak > PEAK_LIMIT:
        rescale = PEAK_LIMIT / peak
        mixture = mixture * rescale
        speech_part = speech_part * rescale
        scaled_noise = scaled_noise * rescale
    rate = speech.sample_rate
    return SnrMix(
        mixture=AudioBuffer(mixture, rate),
        speech=AudioBuffer(speech_part, rate),
        noise=AudioBuffer(scaled_noise, rate),
    )


def mix_at_snr(speech: AudioBuffer, noise: AudioBuffer, snr: float) -> AudioBuffer:
    """Speech plus noise at the requested SNR; see :func:`mix_components`."""
    return mix_components(speech, noise, snr).mixture


def make_bw_test_clip(
    speech: AudioBuffer,
    cutoff: float,
    snr: float = BW_TEST_SNR_DB,
    seed: int = 0,
    allowed_cutoffs: Sequence[float] = BW_TEST_CUTOFFS,
) -> AudioBuffer:
    """Speech in high-pass white noise for the bandwidth discrimination test."""
    if cutoff not in tuple(allowed_cutoffs):
        raise InvalidArgumentError(
            f"cutoff {cutoff} Hz not in configured set {tuple(allowed_cutoffs)}"
        )
    return bw_test_mix(speech, cutoff, snr, seed).mixture


def bw_test_mix(
    speech: AudioBuffer, cutoff: float, snr: float = BW_TEST_SNR_DB, seed: int = 0
) -> SnrMix:
    """Same as :func:`make_bw_test_clip` but keeps the mixture components."""
    if speech.sample_rate != CAMPAIGN_RATE:
        raise InvalidArgumentError(
            f"bandwidth-test speech must be {CAMPAIGN_RATE} Hz, got {speech.sample_rate}"
        )
    noise = generate_wgn(len(speech) / speech.sample_rate, speech.sample_rate, seed)
    limited = bandlimit(noise, BandSpec(low_cutoff=cutoff))
    return mix_components(speech, limited, snr)


def _derive_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence(entropy=[seed, stream]).generate_state(1)[0])


def make_comparison_pair(speech: AudioBuffer, seed: int) -> tuple[AudioBuffer, AudioBuffer]:
    """The just-noticeable-noise pair: mixes at 45 dB and 35 dB SNR.

    The two noise realizations are independently seeded from ``seed``, so the
    pair differs in more than just level. Cleaner clip first.
    """
    first, second = COMPARISON_SNRS_DB
    duration = len(speech) / speech.sample_rate
    noise_a = generate_wgn(duration, speech.sample_rate, _derive_seed(seed, 0))
    noise_b = generate_wgn(duration, speech.sample_rate, _derive_seed(seed, 1))
    return (
        mix_at_snr(speech, noise_a, first),
        mix_at_snr(speech, noise_b, second),
    )


def make_trapping_clip(
    noise_segment: AudioBuffer,
    instruction: AudioBuffer,
    requested_label: Union[int, object],
    language: str = "",
) -> Clip:
    """Noise burst, 0.3 s of silence, then the spoken trapping instruction.

    ``requested_label`` becomes the clip's expected answer; a CategoryLabel
    or a bare 1..5 integer is accepted.
    """
    label = getattr(requested_label, "value", requested_label)
    if label not in (1, 2, 3, 4, 5):
        raise InvalidArgumentError(f"trapping label must be 1..5, got {label!r}")
    _require_same_rate(noise_segment, instruction)
    rate = noise_segment.sample_rate
    gap = np.zeros(int(round(TRAP_GAP_SECONDS * rate)))
    samples = np.concatenate([noise_segment.samples, gap, instruction.samples])
    peak = float(np.max(np.abs(samples))) if len(samples) else 0.0
    if peak > PEAK_LIMIT:
        samples = samples * (PEAK_LIMIT / peak)
    buf = AudioBuffer(samples, rate)
    return Clip(
        id=content_id(buf, f"trap{label}"),
        role=ClipRole.TRAPPING,
        language=language,
        audio=buf,
        expected_answer=int(label),
    )


def make_trap_noise(seed: int, sample_rate: int = CAMPAIGN_RATE) -> AudioBuffer:
    """The short noisy segment that opens a trapping clip (0.5 s, -20 dBFS RMS)."""
    noise = generate_wgn(TRAP_NOISE_SECONDS, sample_rate, seed)
    rms = float(np.sqrt(np.mean(np.square(noise.samples))))
    gain = 10.0 ** (TRAP_NOISE_RMS_DBFS / 20.0) / rms
    return AudioBuffer(noise.samples * gain, sample_rate)


def content_id(buf: AudioBuffer, salt: str = "") -> str:
    """Opaque, content-derived clip id: stable for identical audio, leaks no role."""
    h = hashlib.sha1()
    h.update(salt.encode("utf-8"))
    h.update(np.int64(buf.sample_rate).tobytes())
    h.update(buf.samples.tobytes())
    return h.hexdigest()[:12]


# --- WAV I/O (mono PCM, 16-bit integer or 32-bit float subformats) ---


def write_wav(path, buf: AudioBuffer, subformat: str = "float32") -> None:
    if subformat == "float32":
        data = buf.samples.astype(np.float32)
    elif subformat == "int16":
        data = np.clip(np.round(buf.samples * 32767.0), -32768, 32767).astype(np.int16)
    else:
        raise InvalidArgumentError(f"unsupported WAV subformat {subformat!r}")
    wavfile.write(str(path), buf.sample_rate, data)


def read_wav(path) -> AudioBuffer:
    rate, data = wavfile.read(str(path))
    return _decode_wav(rate, data)


def read_wav_bytes(payload: bytes) -> AudioBuffer:
    rate, data = wavfile.read(io.BytesIO(payload))
    return _decode_wav(rate, data)


def wav_bytes(buf: AudioBuffer, subformat: str = "float32") -> bytes:
    out = io.BytesIO()
    if subformat == "float32":
        wavfile.write(out, buf.sample_rate, buf.samples.astype(np.float32))
    elif subformat == "int16":
        data = np.clip(np.round(buf.samples * 32767.0), -32768, 32767).astype(np.int16)
        wavfile.write(out, buf.sample_rate, data)
    else:
        raise InvalidArgumentError(f"unsupported WAV subformat {subformat!r}")
    return out.getvalue()


def _decode_wav(rate: int, data: np.ndarray) -> AudioBuffer:
    if data.ndim != 1:
        raise InvalidArgumentError(f"only mono WAV supported, got {data.ndim} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    else:
        raise InvalidArgumentError(f"unsupported WAV sample format {data.dtype}")
    return AudioBuffer(samples, rate)
