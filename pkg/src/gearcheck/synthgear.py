"""Deterministic synthetic single-stage gearbox vibration generator.

The signal model is amplitude-modulated mesh harmonics plus shaft tones,
a once-per-revolution impulse train and white noise.  Fault severity maps
to a bigger overall mesh amplitude, deeper modulation at the faulty shaft
rate (which puts sidebands around the mesh frequency) and harder impulses.
All constants live in one record so sweeps can vary them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError
from .signals import CLASS_ORDER, HealthClass, Signal, SignalMeta

log = logging.getLogger(__name__)

MOTOR_FREQS = (15.0, 25.0, 35.0)
LOADS = (0.0, 2.0, 4.0)


@dataclass(frozen=True)
class SignalModel:
    """Amplitude/modulation constants; per-class tuples follow CLASS_ORDER."""

    harmonic_amplitudes: tuple = (1.0, 0.5, 0.25)
    severity_scale: tuple = (1.0, 1.5, 2.2)
    modulation_depth: tuple = (0.0, 0.3, 0.6)
    load_gain_per_lb: float = 0.1
    pinion_amplitude: float = 0.4
    gear_amplitude: float = 0.3
    impulse_peak: tuple = (0.0, 1.0, 2.5)
    impulse_decay: float = 200.0  # 1/s
    impulse_freq_fraction: float = 0.4  # of Nyquist
    harmonic_band_fraction: float = 0.9  # mesh harmonics kept below this * Nyquist


@dataclass(frozen=True)
class GearboxConfig:
    health: HealthClass
    motor_freq: float = 25.0
    load: float = 0.0
    pinion_teeth: int = 18
    gear_teeth: int = 27
    sample_rate: float = 2048.0
    duration: float = 30.0
    noise_std: float = 0.2
    seed: int = 0
    model: SignalModel = field(default_factory=SignalModel)

    def __post_init__(self):
        if self.pinion_teeth < 1 or self.gear_teeth < 1:
            raise ValueError("tooth counts must be >= 1")
        if not self.motor_freq > 0:
            raise ValueError("motor_freq must be positive")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


@dataclass(frozen=True)
class DerivedFrequencies:
    pinion_freq: float
    gear_freq: float
    gmf: float


def derive_frequencies(config: GearboxConfig) -> DerivedFrequencies:
    """Shaft and mesh frequencies; the pinion rides the motor shaft."""
    pinion = config.motor_freq
    gear = config.motor_freq * config.pinion_teeth / config.gear_teeth
    return DerivedFrequencies(pinion_freq=pinion, gear_freq=gear,
                              gmf=config.pinion_teeth * config.motor_freq)


def _impulse_train(n: int, fs: float, rev_freq: float, peak: float,
                   decay: float, osc_freq: float) -> np.ndarray:
    """One decaying oscillation per revolution, amplitude `peak` at onset."""
    out = np.zeros(n)
    if peak <= 0.0:
        return out
    # samples until the envelope falls below 1e-12 of the onset amplitude
    support = int(math.ceil(math.log(1e12) / decay * fs)) + 1
    duration = n / fs
    t = np.arange(n) / fs
    for t0 in np.arange(0.0, duration, 1.0 / rev_freq):
        i0 = int(math.ceil(t0 * fs))
        i1 = min(i0 + support, n)
        if i0 >= n:
            break
        tau = t[i0:i1] - t0
        out[i0:i1] += peak * np.exp(-decay * tau) * np.cos(2.0 * np.pi * osc_freq * tau)
    return out


def synthesize(config: GearboxConfig) -> Signal:
    """Generate one vibration record; deterministic given the config (incl. seed)."""
    model = config.model
    freqs = derive_frequencies(config)
    nyquist = config.sample_rate / 2.0
    if freqs.gmf > model.harmonic_band_fraction * nyquist:
        raise DataError(f"mesh frequency {freqs.gmf:g} Hz does not fit below "
                        f"{model.harmonic_band_fraction:g} * Nyquist "
                        f"({nyquist:g} Hz); raise the sample rate")

    n = round(config.duration * config.sample_rate)
    t = np.arange(n) / config.sample_rate
    rng = np.random.default_rng(config.seed)

    class_idx = CLASS_ORDER.index(config.health)
    scale = model.severity_scale[class_idx] * (1.0 + model.load_gain_per_lb * config.load)
    depth = model.modulation_depth[class_idx]

    # phases are drawn for every nominal harmonic so the stream layout does
    # not depend on how many survive the Nyquist-band truncation
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(model.harmonic_amplitudes))
    keep = sum(1 for k in range(1, len(model.harmonic_amplitudes) + 1)
               if k * freqs.gmf <= model.harmonic_band_fraction * nyquist)
    if keep < len(model.harmonic_amplitudes):
        log.info("keeping %d of %d mesh harmonics below %.0f Hz at motor %g Hz",
                 keep, len(model.harmonic_amplitudes),
                 model.harmonic_band_fraction * nyquist, config.motor_freq)

    envelope = 1.0 + depth * np.cos(2.0 * np.pi * freqs.pinion_freq * t)
    x = np.zeros(n)
    for k in range(1, keep + 1):
        amp = model.harmonic_amplitudes[k - 1]
        x += scale * amp * envelope * np.cos(2.0 * np.pi * k * freqs.gmf * t
                                             + phases[k - 1])
    x += model.pinion_amplitude * np.cos(2.0 * np.pi * freqs.pinion_freq * t)
    x += model.gear_amplitude * np.cos(2.0 * np.pi * freqs.gear_freq * t)
    x += _impulse_train(n, config.sample_rate, freqs.pinion_freq,
                        model.impulse_peak[class_idx], model.impulse_decay,
                        model.impulse_freq_fraction * nyquist)
    if config.noise_std > 0.0:
        x += rng.normal(0.0, config.noise_std, size=n)

    meta = SignalMeta(motor_freq=config.motor_freq, load=config.load,
                      health=config.health,
                      source=f"synth:{config.health.value.lower()}"
                             f":{config.motor_freq:g}hz:{config.load:g}lb"
                             f":seed{config.seed}")
    return Signal(x, config.sample_rate, meta)


def make_dataset(base: GearboxConfig, seed: int) -> list[Signal]:
    """Full factorial health x motor speed x load set (27 signals, 9 per class).

    Each signal gets its own generator seed derived from (seed, position),
    so parallel construction cannot change the output.
    """
    signals = []
    index = 0
    for health in CLASS_ORDER:
        for motor_freq in MOTOR_FREQS:
            for load in LOADS:
                child_seed = int(np.random.SeedSequence([seed, index]).generate_state(1)[0])
                config = replace(base, health=health, motor_freq=motor_freq,
                                 load=load, seed=child_seed)
                signals.append(synthesize(config))
                index += 1
    return signals
