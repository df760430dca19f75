"""Statistical condition indicators: 12 time-domain and 7 spectral features.

Feature vectors keep one fixed canonical order so downstream tables,
models and CSV files always agree on column meaning.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .energy import OperatorKind, preprocess
from .errors import DataError, DegenerateSignalError
from .signals import HealthClass, Signal, Spectrum, compute_spectrum

TIME_FEATURE_NAMES = (
    "Peak", "Mean", "RMS", "CrestFactor", "ImpulseFactor", "ClearanceFactor",
    "Variance", "StdDeviation", "Skewness", "Kurtosis", "SNR", "SINAD",
)
SPECTRAL_FEATURE_NAMES = (
    "SpectralCentroid", "SpectralSpread", "SpectralSkewness",
    "SpectralKurtosis", "SpectralEntropy", "SpectralCrest", "SpectralSlope",
)
FEATURE_NAMES = TIME_FEATURE_NAMES + SPECTRAL_FEATURE_NAMES

#: minimum record length for the time-feature set
MIN_TIME_LEN = 8
#: minimum record length for the SNR/SINAD estimator
MIN_SNR_LEN = 64
#: minimum bin count for the spectral-feature set
MIN_SPECTRAL_BINS = 8

# SNR/SINAD estimator bookkeeping, fixed for reproducibility: the DC region
# is bins 0..2, tone regions span the center bin +/- 3, harmonics 2..6 of the
# fundamental count as distortion.
_DC_BINS = 3
_PEAK_HALF_WIDTH = 3
_HARMONICS = range(2, 7)

# relative floor below which a sample std is treated as zero variance
_DEGENERATE_STD_REL = 1e-12


class FeatureSet(Enum):
    TIME_ONLY = "time"
    COMBINED = "combined"


# ---------------------------------------------------------------------------
# time-domain features


def peak(x: np.ndarray) -> float:
    """Largest absolute sample value."""
    return float(np.max(np.abs(x)))


def mean(x: np.ndarray) -> float:
    return float(np.sum(x) / x.size)


def rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.sum(x * x) / x.size))


def crest_factor(x: np.ndarray) -> float:
    r = rms(x)
    if r == 0.0:
        raise DegenerateSignalError("degenerate signal: zero RMS")
    return peak(x) / r


def impulse_factor(x: np.ndarray) -> float:
    denom = np.sum(np.abs(x)) / x.size
    if denom == 0.0:
        raise DegenerateSignalError("degenerate signal: zero mean magnitude")
    return peak(x) / denom


def clearance_factor(x: np.ndarray) -> float:
    denom = (np.sum(np.sqrt(np.abs(x))) / x.size) ** 2
    if denom == 0.0:
        raise DegenerateSignalError("degenerate signal: zero mean magnitude")
    return peak(x) / denom


def variance(x: np.ndarray) -> float:
    """Second central moment with the N-1 denominator."""
    mu = mean(x)
    return float(np.sum((x - mu) ** 2) / (x.size - 1))


def std_deviation(x: np.ndarray) -> float:
    return float(np.sqrt(variance(x)))


def _checked_std(x: np.ndarray) -> float:
    s = std_deviation(x)
    if s <= _DEGENERATE_STD_REL * max(1.0, peak(x)):
        raise DegenerateSignalError("degenerate signal: zero variance")
    return s


def skewness(x: np.ndarray) -> float:
    """Third central moment over (N-1)*sigma^3; sigma is the sample std."""
    mu, s = mean(x), _checked_std(x)
    return float(np.sum((x - mu) ** 3) / ((x.size - 1) * s ** 3))


def kurtosis(x: np.ndarray) -> float:
    """Fourth central moment over (N-1)*sigma^4 (non-excess form)."""
    mu, s = mean(x), _checked_std(x)
    return float(np.sum((x - mu) ** 4) / ((x.size - 1) * s ** 4))


# ---------------------------------------------------------------------------
# SNR / SINAD


def _hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def tone_power_split(signal: Signal) -> tuple[float, float, float]:
    """Split one-sided spectral power around the dominant tone.

    Returns (signal power, noise power, noise+distortion power).  The record
    is Hann-windowed, the fundamental is the largest non-DC bin, and its
    region plus the DC region are excluded from both denominators; harmonic
    regions are additionally excluded from the noise power only.
    """
    x = signal.samples
    if x.size < MIN_SNR_LEN:
        raise DataError(f"signal too short for SNR estimation: {x.size} "
                        f"samples, need >= {MIN_SNR_LEN}")
    if x.size % 2:
        x = x[:-1]
    n = x.size
    half = n // 2
    power = np.abs(np.fft.rfft(x * _hann_periodic(n))[:half]) ** 2
    if not np.any(power[_DC_BINS:] > 0.0):
        raise DegenerateSignalError("no spectral content outside the DC region")

    k0 = _DC_BINS + int(np.argmax(power[_DC_BINS:]))

    def region(center: int) -> tuple[int, int]:
        return max(center - _PEAK_HALF_WIDTH, 0), min(center + _PEAK_HALF_WIDTH, half - 1)

    lo, hi = region(k0)
    p_signal = float(np.sum(power[lo:hi + 1]))

    excluded = np.zeros(half, dtype=bool)
    excluded[:_DC_BINS] = True
    excluded[lo:hi + 1] = True
    p_noise_dist = float(np.sum(power[~excluded]))

    for m in _HARMONICS:
        center = m * k0
        if center - _PEAK_HALF_WIDTH > half - 1:
            break
        hlo, hhi = region(center)
        excluded[hlo:hhi + 1] = True
    p_noise = float(np.sum(power[~excluded]))
    return p_signal, p_noise, p_noise_dist


def snr(signal: Signal) -> float:
    """Tone-to-noise ratio in dB, with harmonics excluded from the noise."""
    p_signal, p_noise, _ = tone_power_split(signal)
    if p_signal == 0.0:
        raise DegenerateSignalError("no spectral content at the fundamental")
    if p_noise == 0.0:
        raise DegenerateSignalError("noiseless signal: SNR is unbounded")
    return float(10.0 * np.log10(p_signal / p_noise))


def sinad(signal: Signal) -> float:
    """Tone-to-(noise+distortion) ratio in dB; harmonics stay in the denominator."""
    p_signal, _, p_noise_dist = tone_power_split(signal)
    if p_signal == 0.0:
        raise DegenerateSignalError("no spectral content at the fundamental")
    if p_noise_dist == 0.0:
        raise DegenerateSignalError("noiseless signal: SINAD is unbounded")
    return float(10.0 * np.log10(p_signal / p_noise_dist))


def time_features(signal: Signal) -> dict[str, float]:
    """All 12 time-domain features, keyed by canonical name."""
    x = signal.samples
    if x.size < MIN_TIME_LEN:
        raise DataError(f"signal too short for time features: {x.size} "
                        f"samples, need >= {MIN_TIME_LEN}")
    return {
        "Peak": peak(x),
        "Mean": mean(x),
        "RMS": rms(x),
        "CrestFactor": crest_factor(x),
        "ImpulseFactor": impulse_factor(x),
        "ClearanceFactor": clearance_factor(x),
        "Variance": variance(x),
        "StdDeviation": std_deviation(x),
        "Skewness": skewness(x),
        "Kurtosis": kurtosis(x),
        "SNR": snr(signal),
        "SINAD": sinad(signal),
    }


# ---------------------------------------------------------------------------
# spectral features


def _magnitude_sum(spectrum: Spectrum) -> float:
    total = float(np.sum(spectrum.magnitudes))
    if total <= 0.0:
        raise DegenerateSignalError("degenerate spectrum: all magnitudes are zero")
    return total


def spectral_centroid(spectrum: Spectrum) -> float:
    """Magnitude-weighted mean frequency."""
    return float(np.sum(spectrum.freqs * spectrum.magnitudes) / _magnitude_sum(spectrum))


def spectral_spread(spectrum: Spectrum) -> float:
    mu = spectral_centroid(spectrum)
    total = _magnitude_sum(spectrum)
    return float(np.sqrt(np.sum((spectrum.freqs - mu) ** 2 * spectrum.magnitudes) / total))


def _checked_spread(spectrum: Spectrum) -> tuple[float, float, float]:
    mu = spectral_centroid(spectrum)
    sigma = spectral_spread(spectrum)
    if sigma == 0.0:
        raise DegenerateSignalError("degenerate spectrum: zero spread")
    return mu, sigma, _magnitude_sum(spectrum)


def spectral_skewness(spectrum: Spectrum) -> float:
    mu, sigma, total = _checked_spread(spectrum)
    return float(np.sum((spectrum.freqs - mu) ** 3 * spectrum.magnitudes)
                 / (sigma ** 3 * total))


def spectral_kurtosis(spectrum: Spectrum) -> float:
    mu, sigma, total = _checked_spread(spectrum)
    return float(np.sum((spectrum.freqs - mu) ** 4 * spectrum.magnitudes)
                 / (sigma ** 4 * total))


def spectral_entropy(spectrum: Spectrum) -> float:
    """Shannon entropy of the magnitude distribution, normalized by ln(bins-1).

    Magnitudes are normalized to a probability distribution first; empty bins
    contribute nothing.
    """
    p = spectrum.magnitudes / _magnitude_sum(spectrum)
    nz = p[p > 0.0]
    raw = float(-np.sum(nz * np.log(nz)))
    return raw / float(np.log(len(spectrum) - 1))


def spectral_crest(spectrum: Spectrum) -> float:
    """Peak magnitude over the mean magnitude (bins-1 denominator)."""
    return float(np.max(spectrum.magnitudes) / (_magnitude_sum(spectrum) / (len(spectrum) - 1)))


def spectral_slope(spectrum: Spectrum) -> float:
    """Least-squares slope of magnitude against frequency."""
    f = spectrum.freqs
    mag = spectrum.magnitudes
    df = f - np.sum(f) / f.size
    dm = mag - np.sum(mag) / mag.size
    return float(np.sum(df * dm) / np.sum(df * df))


def spectral_features(spectrum: Spectrum) -> dict[str, float]:
    """All 7 spectral features, keyed by canonical name."""
    if len(spectrum) < MIN_SPECTRAL_BINS:
        raise DataError(f"spectrum too short for spectral features: "
                        f"{len(spectrum)} bins, need >= {MIN_SPECTRAL_BINS}")
    return {
        "SpectralCentroid": spectral_centroid(spectrum),
        "SpectralSpread": spectral_spread(spectrum),
        "SpectralSkewness": spectral_skewness(spectrum),
        "SpectralKurtosis": spectral_kurtosis(spectrum),
        "SpectralEntropy": spectral_entropy(spectrum),
        "SpectralCrest": spectral_crest(spectrum),
        "SpectralSlope": spectral_slope(spectrum),
    }


# ---------------------------------------------------------------------------
# feature vectors and tables


@dataclass(frozen=True)
class FeatureVector:
    """One row of features in canonical order; spectral slots may be absent."""

    values: tuple
    label: HealthClass | None = None
    source: str = ""

    def __post_init__(self):
        if len(self.values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} feature slots, "
                             f"got {len(self.values)}")
        for name, value in zip(FEATURE_NAMES, self.values):
            if value is None:
                continue
            if not np.isfinite(value):
                raise ValueError(f"feature {name} is not finite: {value!r}")
        for name in ("Peak", "RMS", "Variance", "StdDeviation", "SpectralSpread"):
            value = self.values[FEATURE_NAMES.index(name)]
            if value is not None and value < 0:
                raise ValueError(f"feature {name} must be non-negative, got {value!r}")
        object.__setattr__(self, "values", tuple(self.values))

    def present_mask(self) -> tuple[bool, ...]:
        return tuple(v is not None for v in self.values)

    def as_dict(self) -> dict:
        return dict(zip(FEATURE_NAMES, self.values))


@dataclass
class FeatureTable:
    """Rows sharing the canonical feature order and one presence pattern."""

    rows: list[FeatureVector] = field(default_factory=list)
    feature_names = FEATURE_NAMES

    def __len__(self) -> int:
        return len(self.rows)

    def _mask(self) -> tuple[bool, ...]:
        if not self.rows:
            raise DataError("feature table is empty")
        mask = self.rows[0].present_mask()
        for row in self.rows[1:]:
            if row.present_mask() != mask:
                raise DataError("rows disagree on which features are present")
        return mask

    def present_names(self) -> tuple[str, ...]:
        mask = self._mask()
        return tuple(n for n, keep in zip(FEATURE_NAMES, mask) if keep)

    def matrix(self) -> np.ndarray:
        """Dense (rows, present-features) matrix for classification."""
        mask = self._mask()
        return np.array([[v for v in row.values if v is not None] for row in self.rows],
                        dtype=float)

    def labels(self) -> list[str]:
        out = []
        for row in self.rows:
            if row.label is None:
                raise DataError(f"row from {row.source!r} has no class label")
            out.append(row.label.value)
        return out


def extract(signal: Signal,
            kind: OperatorKind = OperatorKind.CEEO,
            feature_set: FeatureSet = FeatureSet.COMBINED,
            source: str | None = None) -> FeatureVector:
    """Preprocess a signal and compute its feature vector.

    Spectral features (when requested) are computed on the spectrum of the
    transformed signal, not the raw one.
    """
    processed = preprocess(signal, kind)
    values = dict.fromkeys(FEATURE_NAMES)
    values.update(time_features(processed))
    if feature_set is FeatureSet.COMBINED:
        values.update(spectral_features(compute_spectrum(processed)))
    if source is None:
        source = signal.meta.source or ""
    return FeatureVector(values=tuple(values[n] for n in FEATURE_NAMES),
                         label=signal.meta.health, source=source)


# ---------------------------------------------------------------------------
# CSV interchange


def write_feature_csv(table: FeatureTable, path) -> None:
    """Feature CSV: canonical names plus label,source; absent features stay empty."""
    if not table.rows:
        raise DataError("refusing to export an empty feature table")
    table._mask()  # validate presence consistency up front
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(FEATURE_NAMES) + ["label", "source"])
        for row in table.rows:
            cells = ["" if v is None else f"{v:.17g}" for v in row.values]
            cells.append(row.label.value if row.label is not None else "")
            cells.append(row.source)
            writer.writerow(cells)


def read_feature_csv(path) -> FeatureTable:
    path = Path(path)
    try:
        fh = path.open("r", newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty feature file") from None
        expected = list(FEATURE_NAMES) + ["label", "source"]
        if header != expected:
            raise DataError(f"{path}: unexpected feature CSV header")
        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(expected):
                raise DataError(f"{path}, line {lineno}: expected "
                                f"{len(expected)} fields, got {len(cells)}")
            try:
                values = tuple(None if c == "" else float(c)
                               for c in cells[:len(FEATURE_NAMES)])
            except ValueError as exc:
                raise DataError(f"{path}, line {lineno}: {exc}") from None
            label = HealthClass.parse(cells[-2]) if cells[-2] else None
            rows.append(FeatureVector(values=values, label=label, source=cells[-1]))
    if not rows:
        raise DataError(f"{path}: no feature rows")
    return FeatureTable(rows)


def with_source(vector: FeatureVector, source: str) -> FeatureVector:
    return replace(vector, source=source)
