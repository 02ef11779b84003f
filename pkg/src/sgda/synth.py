"""Synthetic stator-current signals for testing the pipeline end to end.

A healthy signal is the supply tone plus a ladder of odd harmonics and white
noise. A faulty signal additionally carries a pure tone of
``fault_amplitude`` at every characteristic frequency of its fault. Faults
are synthesised in the time domain so that test signals never pass through
the spectral augmenter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from sgda import rng as rng_mod
from sgda.mcsa import FaultType, HarmonicOrders, MotorParams, fault_frequencies
from sgda.signals import RawSignal

DEFAULT_HARMONICS = {3: 0.05, 5: 0.02}


@dataclass(frozen=True)
class SynthConfig:
    """Recipe for one synthetic signal.

    ``harmonic_amplitudes`` maps an odd harmonic order to its amplitude
    relative to ``base_amplitude``. ``noise_std`` is absolute; ``None``
    means 1% of the base amplitude.
    """

    params: MotorParams
    duration_s: float = 1.0
    base_amplitude: float = 1.0
    harmonic_amplitudes: Mapping[int, float] = field(default_factory=lambda: dict(DEFAULT_HARMONICS))
    noise_std: float | None = None
    fault: FaultType | None = None
    fault_amplitude: float = 0.05
    seed: int = 0
    orders: HarmonicOrders = HarmonicOrders()

    def __post_init__(self):
        if not self.duration_s > 0 or self.duration_s * self.params.sampling_rate_hz < 1:
            raise ValueError(
                f"duration_s ({self.duration_s}) must cover at least one sample"
            )
        if not self.base_amplitude > 0:
            raise ValueError(f"base_amplitude must be > 0, got {self.base_amplitude}")
        for order, amp in self.harmonic_amplitudes.items():
            if int(order) != order or order < 1 or order % 2 == 0:
                raise ValueError(f"harmonic orders must be odd positive integers, got {order}")
            if amp < 0:
                raise ValueError(f"harmonic amplitude for order {order} must be >= 0")
        if self.noise_std is not None and self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.fault is not None:
            object.__setattr__(self, "fault", FaultType.parse(self.fault))
            if not 0 < self.fault_amplitude < self.base_amplitude:
                raise ValueError(
                    "fault_amplitude must be positive and below base_amplitude "
                    f"(got {self.fault_amplitude} vs {self.base_amplitude})"
                )

    @property
    def effective_noise_std(self) -> float:
        return 0.01 * self.base_amplitude if self.noise_std is None else self.noise_std

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.params.sampling_rate_hz))


def generate(cfg: SynthConfig, source_id: str = "") -> RawSignal:
    fs = cfg.params.sampling_rate_hz
    f1 = cfg.params.supply_frequency_hz
    t = np.arange(cfg.n_samples) / fs

    x = cfg.base_amplitude * np.sin(2 * np.pi * f1 * t)
    for order in sorted(cfg.harmonic_amplitudes):
        amp = cfg.harmonic_amplitudes[order]
        if amp > 0 and order * f1 < fs / 2:
            x += amp * cfg.base_amplitude * np.sin(2 * np.pi * order * f1 * t)
    if cfg.fault is not None:
        for f in fault_frequencies(cfg.params, cfg.fault, cfg.orders):
            x += cfg.fault_amplitude * np.sin(2 * np.pi * f * t)
    sigma = cfg.effective_noise_std
    if sigma > 0:
        x += rng_mod.stream(cfg.seed, "synth-noise").normal(0.0, sigma, size=x.shape)
    return RawSignal(x[:, None], fs, source_id)
