"""Current-signal ingestion and spectral preprocessing.

Pipeline per segment and channel::

    raw samples -> sliding-window segment -> |rFFT| -> 20 log10(|X| + eps)
                -> min-max normalisation to [0, 1]

The spectrum is one-sided (bins ``0 .. L//2``) with ``N_fft = L`` and no
taper window.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from sgda.errors import DataError

DEFAULT_DB_EPSILON = 1e-12


class Stage(str, Enum):
    MAGNITUDE = "magnitude"
    DECIBEL = "decibel"
    NORMALIZED = "normalized"
    AUGMENTED = "augmented"


class NormalizationMode(str, Enum):
    PER_SEGMENT = "per"
    GLOBAL = "global"

    @classmethod
    def parse(cls, value: "str | NormalizationMode") -> "NormalizationMode":
        if isinstance(value, NormalizationMode):
            return value
        text = str(value).strip().lower()
        for member in cls:
            if text in (member.value, member.name.lower()):
                return member
        if text in ("persegmentchannel", "per_segment_channel", "individual"):
            return cls.PER_SEGMENT
        if text in ("globalperchannel", "global_per_channel"):
            return cls.GLOBAL
        raise ValueError(f"unknown normalization mode {value!r}; expected 'per' or 'global'")


def _frozen(array, dtype=np.float64) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True, order="C")
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class RawSignal:
    """Sampled current signal, ``samples`` shaped ``(N, channels)``."""

    samples: np.ndarray
    sampling_rate_hz: float
    source_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[0] == 0 or samples.shape[1] == 0:
            raise DataError(f"samples must be a non-empty (N, d) array, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise DataError("samples contain NaN or Inf")
        if not (math.isfinite(self.sampling_rate_hz) and self.sampling_rate_hz > 0):
            raise DataError(f"sampling_rate_hz must be > 0, got {self.sampling_rate_hz}")
        object.__setattr__(self, "samples", _frozen(samples))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def channel_count(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class SegmentConfig:
    segment_len_samples: int
    step_samples: int

    def __post_init__(self):
        for name in ("segment_len_samples", "step_samples"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.step_samples > self.segment_len_samples:
            raise ValueError(
                f"step_samples ({self.step_samples}) must not exceed "
                f"segment_len_samples ({self.segment_len_samples})"
            )

    @classmethod
    def one_second(cls, sampling_rate_hz: float, overlap: bool = False) -> "SegmentConfig":
        """One-second windows; half-overlapping when ``overlap`` (training), else disjoint."""
        length = int(round(sampling_rate_hz))
        step = max(1, length // 2) if overlap else length
        return cls(length, step)

    def count(self, n_samples: int) -> int:
        if n_samples < self.segment_len_samples:
            return 0
        return (n_samples - self.segment_len_samples) // self.step_samples + 1

    @property
    def n_bins(self) -> int:
        return self.segment_len_samples // 2 + 1


@dataclass(frozen=True, eq=False)
class Segment:
    data: np.ndarray  # (L, d)
    index: int
    parent: str
    sampling_rate_hz: float


@dataclass(frozen=True, eq=False)
class Spectrum:
    """One-sided spectrum of a segment; ``bins`` is ``(channels, n_bins)``."""

    bins: np.ndarray
    freq_axis_hz: np.ndarray
    stage: Stage
    source_id: str = ""
    segment_index: int = -1

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.float64)
        if bins.ndim == 1:
            bins = bins[None, :]
        freq = np.asarray(self.freq_axis_hz, dtype=np.float64)
        if bins.ndim != 2 or freq.ndim != 1 or bins.shape[1] != freq.shape[0]:
            raise ValueError(
                f"bins {bins.shape} do not match frequency axis {freq.shape}"
            )
        stage = Stage(self.stage)
        if stage is Stage.MAGNITUDE and np.any(bins < 0):
            raise ValueError("magnitude spectra must be non-negative")
        if stage is Stage.NORMALIZED and (np.any(bins < 0) or np.any(bins > 1)):
            raise ValueError("normalized spectra must lie in [0, 1]")
        object.__setattr__(self, "bins", _frozen(bins))
        object.__setattr__(self, "freq_axis_hz", _frozen(freq))
        object.__setattr__(self, "stage", stage)

    @property
    def channel_count(self) -> int:
        return self.bins.shape[0]

    @property
    def n_bins(self) -> int:
        return self.bins.shape[1]

    def with_bins(self, bins, stage: Stage) -> "Spectrum":
        return Spectrum(bins, self.freq_axis_hz, stage, self.source_id, self.segment_index)

    def channel(self, j: int) -> "Spectrum":
        return self.with_bins(self.bins[j : j + 1], self.stage)


# ---------------------------------------------------------------------------
# I/O


def load_signal_csv(path: str | Path, sampling_rate_hz: float, source_id: str | None = None) -> RawSignal:
    """Read a signal CSV: one row per sample, one column per channel.

    A single leading header row is tolerated. Any other non-numeric row is
    an error naming its (1-based) row number.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    rows: list[list[float]] = []
    width = None
    with path.open(newline="") as fh:
        for rownum, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                if rownum == 1:
                    continue  # header
                raise DataError(f"{path}: row {rownum} is not numeric: {row!r}") from None
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}: row {rownum} contains NaN or Inf")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DataError(
                    f"{path}: row {rownum} has {len(values)} columns, expected {width}"
                )
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: file contains no samples")
    return RawSignal(np.array(rows), sampling_rate_hz, source_id or path.stem)


def format_signal_csv(signal: RawSignal) -> str:
    header = ",".join(f"channel_{j}" for j in range(signal.channel_count))
    lines = [header]
    lines.extend(",".join(repr(float(v)) for v in row) for row in signal.samples)
    return "\n".join(lines) + "\n"


def format_spectrum_csv(spec: Spectrum) -> str:
    header = ["freq_hz"] + [f"channel_{j}" for j in range(spec.channel_count)]
    lines = [",".join(header)]
    for k, f in enumerate(spec.freq_axis_hz):
        lines.append(",".join([repr(float(f))] + [repr(float(v)) for v in spec.bins[:, k]]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Preprocessing


def segment(signal: RawSignal, cfg: SegmentConfig) -> list[Segment]:
    """Cut ``floor((N - L) / step) + 1`` windows; window ``i`` starts at ``i * step``."""
    n, length, step = signal.n_samples, cfg.segment_len_samples, cfg.step_samples
    if n < length:
        raise DataError(
            f"signal {signal.source_id!r} has {n} samples, shorter than one segment ({length})"
        )
    return [
        Segment(signal.samples[i * step : i * step + length], i, signal.source_id, signal.sampling_rate_hz)
        for i in range(cfg.count(n))
    ]


def frequency_axis(n_fft: int, sampling_rate_hz: float) -> np.ndarray:
    return np.arange(n_fft // 2 + 1) * (sampling_rate_hz / n_fft)


def fft_magnitude(seg: Segment) -> Spectrum:
    length = seg.data.shape[0]
    if length == 0:
        raise DataError("cannot transform an empty segment")
    mags = np.abs(np.fft.rfft(seg.data, axis=0)).T
    return Spectrum(mags, frequency_axis(length, seg.sampling_rate_hz), Stage.MAGNITUDE, seg.parent, seg.index)


def db_scale(spec: Spectrum, epsilon: float = DEFAULT_DB_EPSILON) -> Spectrum:
    if spec.stage is not Stage.MAGNITUDE:
        raise ValueError(f"db_scale expects a magnitude spectrum, got stage {spec.stage.value}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    return spec.with_bins(20.0 * np.log10(spec.bins + epsilon), Stage.DECIBEL)


@dataclass(frozen=True, eq=False)
class NormContext:
    """Extrema needed to normalise new spectra the way the training set was.

    Under the global mode ``minima``/``maxima`` hold one value per channel;
    under the per-segment mode they are ``None``.
    """

    mode: NormalizationMode
    minima: np.ndarray | None = None
    maxima: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "minima": None if self.minima is None else [float(v) for v in self.minima],
            "maxima": None if self.maxima is None else [float(v) for v in self.maxima],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NormContext":
        mode = NormalizationMode.parse(data["mode"])
        lo, hi = data.get("minima"), data.get("maxima")
        return cls(
            mode,
            None if lo is None else np.asarray(lo, dtype=np.float64),
            None if hi is None else np.asarray(hi, dtype=np.float64),
        )


@dataclass(frozen=True, eq=False)
class Normalized:
    """Output of :func:`normalize`.

    ``minima``/``maxima`` are ``(n_spectra, channels)`` extrema actually
    used; ``degenerate`` marks spectrum-channels with zero range (set to 0.5);
    ``clipped`` marks spectrum-channels that fell outside stored extrema.
    """

    spectra: list[Spectrum]
    context: NormContext
    minima: np.ndarray
    maxima: np.ndarray
    degenerate: np.ndarray
    clipped: np.ndarray = field(default=None)


def _scale(values: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    span = hi - lo
    degenerate = ~(span > 0)
    safe = np.where(degenerate, 1.0, span)
    out = (values - lo[:, None]) / safe[:, None]
    out[degenerate, :] = 0.5
    return out, degenerate


def normalize(specs: Sequence[Spectrum], mode: NormalizationMode | str) -> Normalized:
    """Min-max normalise decibel spectra to ``[0, 1]``.

    ``PER_SEGMENT`` scales each spectrum-channel by its own extrema;
    ``GLOBAL`` uses the extrema of each channel across the whole list and
    records them in the returned context.
    """
    mode = NormalizationMode.parse(mode)
    if not specs:
        raise ValueError("normalize needs at least one spectrum")
    for s in specs:
        if s.stage is not Stage.DECIBEL:
            raise ValueError(f"normalize expects decibel spectra, got stage {s.stage.value}")
    channels = {s.channel_count for s in specs}
    if len(channels) != 1:
        raise ValueError(f"spectra disagree on channel count: {sorted(channels)}")

    mins = np.stack([s.bins.min(axis=1) for s in specs])
    maxs = np.stack([s.bins.max(axis=1) for s in specs])
    if mode is NormalizationMode.GLOBAL:
        gmin, gmax = mins.min(axis=0), maxs.max(axis=0)
        context = NormContext(mode, gmin, gmax)
        return apply_normalization(specs, context)

    out, degen = [], []
    for s, lo, hi in zip(specs, mins, maxs):
        scaled, d = _scale(s.bins, lo, hi)
        out.append(s.with_bins(np.clip(scaled, 0.0, 1.0), Stage.NORMALIZED))
        degen.append(d)
    return Normalized(
        out, NormContext(mode), mins, maxs, np.array(degen), np.zeros_like(np.array(degen))
    )


def apply_normalization(specs: Sequence[Spectrum], context: NormContext) -> Normalized:
    """Normalise spectra with a previously captured context.

    Under the global mode, values outside the stored extrema are clipped
    into ``[0, 1]`` and flagged in ``Normalized.clipped``.
    """
    if context.mode is NormalizationMode.PER_SEGMENT:
        return normalize(specs, NormalizationMode.PER_SEGMENT)
    lo, hi = context.minima, context.maxima
    out, degen, clipped = [], [], []
    for s in specs:
        if s.stage is not Stage.DECIBEL:
            raise ValueError(f"normalize expects decibel spectra, got stage {s.stage.value}")
        if s.channel_count != lo.shape[0]:
            raise ValueError(
                f"spectrum has {s.channel_count} channels, context has {lo.shape[0]}"
            )
        scaled, d = _scale(s.bins, lo, hi)
        clipped.append(np.any((scaled < 0) | (scaled > 1), axis=1))
        out.append(s.with_bins(np.clip(scaled, 0.0, 1.0), Stage.NORMALIZED))
        degen.append(d)
    n = len(specs)
    return Normalized(
        out,
        context,
        np.broadcast_to(lo, (n, lo.shape[0])).copy(),
        np.broadcast_to(hi, (n, hi.shape[0])).copy(),
        np.array(degen),
        np.array(clipped),
    )


def decibel_spectra(
    signal: RawSignal, cfg: SegmentConfig, epsilon: float = DEFAULT_DB_EPSILON
) -> list[Spectrum]:
    """Segment a signal and return one decibel spectrum per segment."""
    return [db_scale(fft_magnitude(seg), epsilon) for seg in segment(signal, cfg)]


def split_channels(specs: Sequence[Spectrum]) -> list[Spectrum]:
    """Explode multi-channel spectra into single-channel ones, channel-major per spectrum."""
    return [s.channel(j) for s in specs for j in range(s.channel_count)]
