"""Core signal/spectrum types, CSV ingestion and one-sided amplitude spectra.

A vibration record is a uniformly sampled sequence of real acceleration
values plus a sample rate and optional provenance metadata.  Spectra are
one-sided amplitude spectra on the frequency axis f(n) = fs*n/N,
n = 0..N/2-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DataError

#: shortest record the loader accepts (the n+/-2 operator window needs 5 points)
MIN_LOAD_LEN = 5
#: shortest record the spectrum transform accepts
MIN_SPECTRUM_LEN = 8

_META_KEYS = ("sample_rate", "motor_freq", "load", "health", "source")


class HealthClass(Enum):
    """Gear tooth condition, ordered from intact to most damaged."""

    HEALTHY = "Healthy"
    CHIPPED = "Chipped"
    MISSING = "Missing"

    @classmethod
    def parse(cls, text: str) -> "HealthClass":
        for member in cls:
            if member.value.lower() == text.strip().lower():
                return member
        raise DataError(f"unknown health class {text!r} (expected one of "
                        f"{', '.join(m.value for m in cls)})")


#: canonical class ordering used for confusion matrices and reports
CLASS_ORDER = (HealthClass.HEALTHY, HealthClass.CHIPPED, HealthClass.MISSING)


@dataclass(frozen=True)
class SignalMeta:
    motor_freq: float | None = None
    load: float | None = None
    health: HealthClass | None = None
    source: str | None = None


@dataclass(frozen=True)
class Signal:
    """Immutable uniformly sampled vibration record."""

    samples: np.ndarray
    sample_rate: float
    meta: SignalMeta = field(default_factory=SignalMeta)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float, copy=True)
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if samples.size < 1:
            raise DataError("signal is empty")
        if not np.all(np.isfinite(samples)):
            raise DataError("signal contains non-finite samples")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def with_samples(self, samples) -> "Signal":
        """New signal with the same rate/metadata but different samples."""
        return Signal(samples, self.sample_rate, self.meta)


@dataclass(frozen=True)
class Spectrum:
    """One-sided amplitude spectrum with its aligned frequency axis."""

    magnitudes: np.ndarray
    freqs: np.ndarray
    sample_rate: float

    def __post_init__(self):
        mags = np.array(self.magnitudes, dtype=float, copy=True)
        freqs = np.array(self.freqs, dtype=float, copy=True)
        if mags.shape != freqs.shape or mags.ndim != 1:
            raise ValueError("magnitudes and freqs must be 1-D arrays of equal length")
        if mags.size < 2:
            raise ValueError("spectrum needs at least 2 bins")
        if freqs[0] != 0.0 or np.any(np.diff(freqs) <= 0):
            raise ValueError("frequency axis must start at 0 and increase strictly")
        if not np.all(np.isfinite(mags)) or np.any(mags < 0):
            raise ValueError("magnitudes must be finite and non-negative")
        mags.flags.writeable = False
        freqs.flags.writeable = False
        object.__setattr__(self, "magnitudes", mags)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self) -> int:
        return self.magnitudes.size


def compute_spectrum(signal: Signal) -> Spectrum:
    """One-sided amplitude spectrum of a signal.

    Scaling is 2/N on every bin except DC, which carries 1/N, so a
    unit-amplitude on-bin sinusoid reads 1.0 and a constant signal reads its
    value at DC.  Odd-length input drops its final sample so the axis
    f(n) = fs*n/N, n = 0..N/2-1 stays exact.
    """
    x = signal.samples
    if x.size < MIN_SPECTRUM_LEN:
        raise DataError(f"signal too short for a spectrum: {x.size} samples, "
                        f"need >= {MIN_SPECTRUM_LEN}")
    if x.size % 2:
        x = x[:-1]
    n = x.size
    half = n // 2
    dft = np.fft.rfft(x)
    mags = np.abs(dft[:half]) * (2.0 / n)
    mags[0] *= 0.5
    freqs = np.arange(half) * (signal.sample_rate / n)
    return Spectrum(mags, freqs, signal.sample_rate)


def segment(signal: Signal, length: int, overlap: float = 0.0) -> list[Signal]:
    """Split a record into fixed-length windows.

    Hop is round(length*(1-overlap)); a trailing partial window is discarded.
    Each window inherits the sample rate and metadata.
    """
    if length < MIN_LOAD_LEN:
        raise ValueError(f"segment length must be >= {MIN_LOAD_LEN}")
    if length > len(signal):
        raise DataError(f"segment length {length} exceeds signal length {len(signal)}")
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must lie in [0, 1)")
    hop = max(1, round(length * (1.0 - overlap)))
    return [signal.with_samples(signal.samples[start:start + length])
            for start in range(0, len(signal) - length + 1, hop)]


def _parse_meta_line(line: str, meta: dict) -> None:
    body = line.lstrip("#").strip()
    if "=" not in body:
        return  # plain comment
    key, _, value = body.partition("=")
    key = key.strip().lower()
    value = value.strip()
    if key not in _META_KEYS or not value:
        return
    if key == "health":
        meta[key] = HealthClass.parse(value)
    elif key == "source":
        meta[key] = value
    else:
        try:
            meta[key] = float(value)
        except ValueError:
            raise DataError(f"bad metadata value for {key!r}: {value!r}") from None


def load_signal_csv(path, sample_rate: float | None = None) -> Signal:
    """Read a signal CSV: one sample per line, optional `# key=value` headers.

    An explicit ``sample_rate`` argument overrides any header value.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    meta: dict = {}
    samples: list[float] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            _parse_meta_line(line, meta)
            continue
        try:
            samples.append(float(line))
        except ValueError:
            raise DataError(f"{path}, line {lineno}: could not parse {line!r} "
                            "as a sample value") from None

    if len(samples) < MIN_LOAD_LEN:
        raise DataError(f"{path}: signal too short ({len(samples)} samples, "
                        f"need >= {MIN_LOAD_LEN})")

    fs = sample_rate if sample_rate is not None else meta.get("sample_rate")
    if fs is None:
        raise DataError(f"{path}: no sample rate given (pass one explicitly or "
                        "add a '# sample_rate=...' header)")
    signal_meta = SignalMeta(motor_freq=meta.get("motor_freq"),
                             load=meta.get("load"),
                             health=meta.get("health"),
                             source=meta.get("source", str(path)))
    return Signal(np.asarray(samples), float(fs), signal_meta)


def save_signal_csv(signal: Signal, path) -> None:
    """Write a signal CSV with metadata headers; values keep full precision."""
    path = Path(path)
    lines = [f"# sample_rate={signal.sample_rate:.17g}"]
    meta = signal.meta
    if meta.motor_freq is not None:
        lines.append(f"# motor_freq={meta.motor_freq:.17g}")
    if meta.load is not None:
        lines.append(f"# load={meta.load:.17g}")
    if meta.health is not None:
        lines.append(f"# health={meta.health.value}")
    if meta.source is not None:
        lines.append(f"# source={meta.source}")
    lines.extend(f"{v:.17g}" for v in signal.samples)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_spectrum_csv(spectrum: Spectrum, path) -> None:
    """Write `freq_hz,magnitude` rows with a header line."""
    path = Path(path)
    lines = ["freq_hz,magnitude"]
    lines.extend(f"{f:.17g},{m:.17g}"
                 for f, m in zip(spectrum.freqs, spectrum.magnitudes))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
