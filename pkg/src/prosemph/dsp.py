"""Frame-level prosodic signal extraction: energy, F0 and duration tracks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from .corpus import Utterance
from .errors import (
    AllUnvoicedError,
    EmptyAlignmentError,
    FrameRateMismatchError,
    MalformedFileError,
    TooShortError,
    UnsupportedEncodingError,
)

LOG_EPS = 1e-10

TRACK_KINDS = ("f0_hz", "energy_db", "duration", "combined", "zscore")


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray  # float64, [-1, 1]
    sample_rate: int

    def __post_init__(self):
        if self.samples.size == 0:
            raise MalformedFileError("empty waveform")
        if self.sample_rate <= 0:
            raise MalformedFileError(f"bad sample rate {self.sample_rate}")


@dataclass(frozen=True)
class ProsodicTrack:
    values: np.ndarray  # float64
    frame_rate: float
    kind: str

    def __post_init__(self):
        if self.values.size == 0:
            raise MalformedFileError("empty track")
        if self.frame_rate <= 0:
            raise MalformedFileError(f"bad frame rate {self.frame_rate}")
        if self.kind not in TRACK_KINDS:
            raise MalformedFileError(f"unknown track kind {self.kind!r}")


@dataclass(frozen=True)
class FrameConfig:
    frame_length_sec: float = 0.046
    hop_sec: float = 0.010
    f0_min_hz: float = 60.0
    f0_max_hz: float = 500.0
    voicing_threshold: float = 0.6

    def __post_init__(self):
        if not 0 < self.hop_sec <= self.frame_length_sec:
            raise ValueError("need 0 < hop_sec <= frame_length_sec")
        if not 0 < self.f0_min_hz < self.f0_max_hz:
            raise ValueError("need 0 < f0_min_hz < f0_max_hz")

    @property
    def frame_rate(self) -> float:
        return 1.0 / self.hop_sec


def read_wav(path) -> Waveform:
    """Read a RIFF/WAVE file (PCM16 or float32) as a mono [-1,1] waveform."""
    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise MalformedFileError(f"cannot read {path}: {exc}") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{path}: unsupported sample format {data.dtype}"
        )
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return Waveform(samples=samples, sample_rate=int(rate))


def write_wav(path, w: Waveform) -> None:
    wavfile.write(path, w.sample_rate, w.samples.astype(np.float32))


def _frame_signal(samples: np.ndarray, sr: int, cfg: FrameConfig) -> np.ndarray:
    """Slice into overlapping frames [num_frames x frame_length]."""
    flen = int(round(cfg.frame_length_sec * sr))
    hop = int(round(cfg.hop_sec * sr))
    if len(samples) < flen:
        raise TooShortError(
            f"waveform of {len(samples)} samples shorter than one {flen}-sample frame"
        )
    num = (len(samples) - flen) // hop + 1
    idx = np.arange(flen)[None, :] + hop * np.arange(num)[:, None]
    return samples[idx]


def frame_energy(w: Waveform, cfg: FrameConfig) -> ProsodicTrack:
    """Per-frame RMS energy in dB: 20*log10(rms + 1e-10)."""
    frames = _frame_signal(w.samples, w.sample_rate, cfg)
    rms = np.sqrt(np.mean(frames**2, axis=1))
    db = 20.0 * np.log10(rms + LOG_EPS)
    return ProsodicTrack(values=db, frame_rate=cfg.frame_rate, kind="energy_db")


def estimate_f0(w: Waveform, cfg: FrameConfig) -> ProsodicTrack:
    """Per-frame F0 via normalized autocorrelation peak picking.

    Frames whose best normalized correlation falls below the voicing
    threshold are reported as 0 (unvoiced). Peak lag is refined by
    parabolic interpolation.
    """
    sr = w.sample_rate
    if not cfg.f0_max_hz < sr / 2:
        raise ValueError("f0_max_hz must be below Nyquist")
    lag_min = max(2, int(math.floor(sr / cfg.f0_max_hz)))
    lag_max = int(math.ceil(sr / cfg.f0_min_hz))
    frames = _frame_signal(w.samples, sr, cfg)
    flen = frames.shape[1]
    if lag_max >= flen:
        lag_max = flen - 1
    lags = np.arange(lag_min, lag_max + 1)

    x = frames - frames.mean(axis=1, keepdims=True)
    # raw autocorrelation of every frame via FFT
    nfft = 1
    while nfft < 2 * flen:
        nfft *= 2
    spec = np.fft.rfft(x, n=nfft, axis=1)
    acf = np.fft.irfft(spec * np.conj(spec), n=nfft, axis=1)[:, : lag_max + 1].real
    # normalization energies of the two overlapping segments, per lag
    sq = np.cumsum(x**2, axis=1)
    total = sq[:, -1]
    e_head = sq[:, flen - 1 - lags]            # sum x[0 : flen-tau]^2
    e_tail = total[:, None] - sq[:, lags - 1]  # sum x[tau : flen]^2
    denom = np.sqrt(e_head * e_tail)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 1e-12, acf[:, lags] / denom, 0.0)

    out = np.zeros(len(frames))
    peak = r.max(axis=1)
    voiced = (peak >= cfg.voicing_threshold) & (total > 1e-12)
    for i in np.flatnonzero(voiced):
        # prefer the shortest near-maximal lag to avoid subharmonic picks,
        # then climb to its local peak
        k = int(np.argmax(r[i] >= peak[i] - 0.01))
        while k + 1 < len(lags) and r[i, k + 1] > r[i, k]:
            k += 1
        tau = float(lags[k])
        if 0 < k < len(lags) - 1:
            # parabolic refinement around the peak
            d = r[i, k - 1] - 2 * r[i, k] + r[i, k + 1]
            if abs(d) > 1e-12:
                tau += 0.5 * (r[i, k - 1] - r[i, k + 1]) / d
        out[i] = sr / tau
    return ProsodicTrack(values=out, frame_rate=cfg.frame_rate, kind="f0_hz")


def interpolate_unvoiced(t: ProsodicTrack) -> ProsodicTrack:
    """Fill unvoiced (zero) frames by linear interpolation between voiced ones.

    Leading and trailing gaps take the nearest voiced value. Idempotent.
    """
    if t.kind != "f0_hz":
        raise ValueError(f"expected an f0_hz track, got {t.kind}")
    v = t.values
    voiced = v > 0
    if not voiced.any():
        raise AllUnvoicedError("track has no voiced frame")
    idx = np.arange(len(v))
    filled = np.interp(idx, idx[voiced], v[voiced])
    return ProsodicTrack(values=filled, frame_rate=t.frame_rate, kind="f0_hz")


def duration_signal(utt: Utterance, frame_rate: float) -> ProsodicTrack:
    """Piecewise-constant log-duration signal sampled at frame rate.

    Frame i (at time i/frame_rate) inside character c's span takes value
    log(duration_c + eps); frames between spans hold the previous value.
    """
    ends = [e for _, e in utt.char_times]
    total = ends[-1] if ends else 0.0
    if total <= 0:
        raise EmptyAlignmentError(f"{utt.id}: char_times cover no positive span")
    num_frames = int(math.ceil(total * frame_rate - 1e-9))
    values = np.empty(num_frames)
    log_durs = [math.log(e - s + LOG_EPS) for s, e in utt.char_times]
    c = 0
    current = log_durs[0]
    for i in range(num_frames):
        t = i / frame_rate
        while c < len(utt.char_times) and t >= utt.char_times[c][1]:
            c += 1
        if c < len(utt.char_times) and t >= utt.char_times[c][0]:
            current = log_durs[c]
        values[i] = current
    return ProsodicTrack(values=values, frame_rate=frame_rate, kind="duration")


# ---------------------------------------------------------------------------
# track serialization (cache / inspection)


def save_track(t: ProsodicTrack, path) -> None:
    obj = {"kind": t.kind, "frame_rate": t.frame_rate, "values": t.values.tolist()}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f)
        f.write("\n")


def load_track(path) -> ProsodicTrack:
    try:
        with open(path, "r", encoding="utf-8") as f:
            obj = json.load(f)
        return ProsodicTrack(
            values=np.asarray(obj["values"], dtype=np.float64),
            frame_rate=float(obj["frame_rate"]),
            kind=str(obj["kind"]),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise MalformedFileError(f"cannot read track {path}: {exc}") from exc


def check_same_frame_rate(*tracks: ProsodicTrack) -> float:
    rates = {t.frame_rate for t in tracks}
    if len(rates) != 1:
        raise FrameRateMismatchError(f"tracks have mixed frame rates {sorted(rates)}")
    return rates.pop()
