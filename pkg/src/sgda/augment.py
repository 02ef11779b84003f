"""Signature-guided fault injection into normalised spectra.

A synthetic fault sample is a healthy normalised spectrum plus one random
Gaussian bump per characteristic frequency ``f*`` of the fault::

    P_k = 1{|f_k - f*| <= eps_f} * A * exp(-((f_k - f*) - mu)^2 / (2 sigma^2))

with ``|A| ~ U(a_min, a_max)`` carrying a random sign, ``mu ~ U(-eps_f, eps_f)``
and ``sigma ~ U(sigma_min, sigma_max)``. :func:`build_epoch_dataset` turns a
list of healthy parents into a class-balanced epoch dataset.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from sgda import rng as rng_mod
from sgda.mcsa import FaultType, FrequencySet
from sgda.signals import Spectrum, Stage

NORMAL = "Normal"
ANOMALOUS = "Anomalous"


@dataclass(frozen=True)
class Task:
    """Classification task: ``binary`` (Normal vs Anomalous) or ``multiclass``.

    ``faults`` lists the fault tags covered. In the binary task they collapse
    into a single ``Anomalous`` class whose frequency set is their union.
    """

    kind: str
    faults: tuple[str, ...]

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in ("binary", "multiclass"):
            raise ValueError(f"task kind must be 'binary' or 'multiclass', got {self.kind!r}")
        faults = tuple(FaultType.parse(f).value for f in self.faults)
        if not faults:
            raise ValueError("a task needs at least one fault type")
        if len(set(faults)) != len(faults):
            raise ValueError(f"duplicate fault types in task: {faults}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "faults", faults)

    @classmethod
    def binary(cls, faults: Sequence[str | FaultType]) -> "Task":
        return cls("binary", tuple(faults))

    @classmethod
    def multiclass(cls, faults: Sequence[str | FaultType]) -> "Task":
        return cls("multiclass", tuple(faults))

    @property
    def fault_labels(self) -> tuple[str, ...]:
        return (ANOMALOUS,) if self.kind == "binary" else self.faults

    @property
    def classes(self) -> tuple[str, ...]:
        return (NORMAL, *self.fault_labels)

    def variants_per_parent(self, replication_r: int) -> int:
        """Fault variants K per parent: ``1 + R`` (binary) or ``|T| (1 + R)``."""
        return len(self.fault_labels) * (1 + replication_r)

    def true_label(self, fault: str | FaultType | None) -> str:
        """Map a ground-truth condition onto this task's label space."""
        if fault is None or fault == NORMAL:
            return NORMAL
        if fault == ANOMALOUS:
            if self.kind != "binary":
                raise ValueError("'Anomalous' is only a label of the binary task")
            return ANOMALOUS
        tag = FaultType.parse(fault).value
        if self.kind == "binary":
            return ANOMALOUS
        if tag not in self.faults:
            raise ValueError(f"fault {tag!r} is not part of this task {self.faults}")
        return tag


def _as_freqs(value) -> tuple[float, ...]:
    if isinstance(value, FrequencySet):
        value = value.frequencies_hz
    return tuple(sorted(float(v) for v in value))


@dataclass(frozen=True)
class AugmentConfig:
    """Sampling ranges and replication for fault injection.

    ``fault_map`` maps a fault tag (``"RBD"``, ``"ITSC"``, ...) to its
    frequencies in Hz. ``a_min=None`` estimates the lower amplitude bound per
    parent as its mean absolute bin-to-bin difference. ``sampling`` is
    ``"stratified"`` (exact class balance) or ``"uniform"``.
    """

    fault_map: Mapping[str, Sequence[float]]
    a_min: float | None = None
    a_max: float = 1.0
    sigma_min_hz: float = 0.1
    sigma_max_hz: float = 0.5
    epsilon_f_hz: float = 2.0
    replication_r: int = 0
    seed: int = 0
    sampling: str = "stratified"

    def __post_init__(self):
        fmap = {}
        for key, freqs in dict(self.fault_map).items():
            label = key if key == ANOMALOUS else FaultType.parse(key).value
            fmap[label] = _as_freqs(freqs)
        object.__setattr__(self, "fault_map", fmap)
        if self.a_min is not None and self.a_min < 0:
            raise ValueError(f"a_min must be >= 0, got {self.a_min}")
        if not self.a_max > 0:
            raise ValueError(f"a_max must be > 0, got {self.a_max}")
        if self.a_min is not None and self.a_min > self.a_max:
            raise ValueError(f"a_min ({self.a_min}) exceeds a_max ({self.a_max})")
        if not 0 < self.sigma_min_hz <= self.sigma_max_hz:
            raise ValueError(
                f"need 0 < sigma_min_hz <= sigma_max_hz, got {self.sigma_min_hz}, {self.sigma_max_hz}"
            )
        if not self.epsilon_f_hz > 0:
            raise ValueError(f"epsilon_f_hz must be > 0, got {self.epsilon_f_hz}")
        if isinstance(self.replication_r, bool) or int(self.replication_r) != self.replication_r or self.replication_r < 0:
            raise ValueError(f"replication_r must be a non-negative integer, got {self.replication_r}")
        if self.sampling not in ("stratified", "uniform"):
            raise ValueError(f"sampling must be 'stratified' or 'uniform', got {self.sampling!r}")

    @classmethod
    def from_frequency_map(cls, fmap: Mapping[FaultType, FrequencySet], **kwargs) -> "AugmentConfig":
        return cls({FaultType.parse(k).value: v.frequencies_hz for k, v in fmap.items()}, **kwargs)

    def frequencies_for(self, label: str) -> tuple[float, ...]:
        if label in self.fault_map:
            return self.fault_map[label]
        if label == ANOMALOUS and self.fault_map:
            union = sorted({f for freqs in self.fault_map.values() for f in freqs})
            return tuple(union)
        raise KeyError(f"no fault frequencies configured for label {label!r}")

    def to_dict(self) -> dict:
        return {
            "fault_map": {k: list(v) for k, v in self.fault_map.items()},
            "a_min": self.a_min,
            "a_max": self.a_max,
            "sigma_min_hz": self.sigma_min_hz,
            "sigma_max_hz": self.sigma_max_hz,
            "epsilon_f_hz": self.epsilon_f_hz,
            "replication_r": self.replication_r,
            "seed": self.seed,
            "sampling": self.sampling,
        }


@dataclass(frozen=True)
class PeakParams:
    amplitude: float  # signed
    mu_hz: float
    sigma_hz: float
    anchor_hz: float
    epsilon_f_hz: float


@dataclass(frozen=True)
class Provenance:
    parent: int
    epoch: int
    variant: int
    source_id: str = ""
    segment_index: int = -1


@dataclass(frozen=True, eq=False)
class LabeledSpectrum:
    spectrum: Spectrum
    label: str
    provenance: Provenance | None = None
    peaks: tuple[PeakParams, ...] = field(default_factory=tuple)


def gaussian_peak_vector(freq_axis: np.ndarray, peak: PeakParams) -> np.ndarray:
    """Evaluate one windowed Gaussian bump on a frequency axis.

    Bins with ``|f_k - f*| > eps_f`` are exactly zero.
    """
    freq = np.asarray(freq_axis, dtype=np.float64)
    out = np.zeros_like(freq)
    lo, hi, vals = _peak_slice(freq, peak)
    out[lo:hi] = vals
    return out


def _peak_slice(freq: np.ndarray, peak: PeakParams) -> tuple[int, int, np.ndarray]:
    """Return ``(lo, hi, values)`` so that the peak equals ``values`` on ``freq[lo:hi]`` and zero elsewhere."""
    if not peak.sigma_hz > 0:
        raise ValueError(f"sigma_hz must be > 0, got {peak.sigma_hz}")
    # Coarse slice by binary search, then the exact window test on offsets.
    lo = max(int(freq.searchsorted(peak.anchor_hz - peak.epsilon_f_hz, "left")) - 1, 0)
    hi = int(freq.searchsorted(peak.anchor_hz + peak.epsilon_f_hz, "right")) + 1
    x = freq[lo:hi] - peak.anchor_hz
    vals = peak.amplitude * np.exp(-((x - peak.mu_hz) ** 2) / (2.0 * peak.sigma_hz**2))
    vals[np.abs(x) > peak.epsilon_f_hz] = 0.0
    return lo, lo + x.size, vals


def _peak_sum(
    freq: np.ndarray, anchor: np.ndarray, amp: np.ndarray, mu: np.ndarray, sigma: np.ndarray, eps: float
) -> np.ndarray:
    """Sum of many windowed peaks, evaluated only on the bins near each anchor."""
    if not np.all(sigma > 0):
        raise ValueError(f"sigma_hz must be > 0, got {sigma.min()}")
    lo = np.maximum(freq.searchsorted(anchor - eps, "left") - 1, 0)
    hi = np.minimum(freq.searchsorted(anchor + eps, "right") + 1, freq.size)
    idx = lo[:, None] + np.arange(int((hi - lo).max()))
    valid = idx < hi[:, None]
    idx = np.where(valid, idx, 0)
    x = freq[idx] - anchor[:, None]
    vals = amp[:, None] * np.exp(-((x - mu[:, None]) ** 2) / (2.0 * sigma[:, None] ** 2))
    keep = valid & (np.abs(x) <= eps)
    return np.bincount(idx[keep], weights=vals[keep], minlength=freq.size)


def fault_window_mask(freq_axis: np.ndarray, anchors: Sequence[float], epsilon_f_hz: float) -> np.ndarray:
    """Boolean mask of bins within ``eps_f`` of any anchor."""
    freq = np.asarray(freq_axis, dtype=np.float64)
    mask = np.zeros(freq.shape, dtype=bool)
    for f in anchors:
        mask |= np.abs(freq - f) <= epsilon_f_hz
    return mask


def local_variability(bins: np.ndarray) -> np.ndarray:
    """Mean absolute difference between neighbouring bins, per channel."""
    bins = np.atleast_2d(bins)
    if bins.shape[1] < 2:
        return np.zeros(bins.shape[0])
    return np.mean(np.abs(np.diff(bins, axis=1)), axis=1)


def _draw(
    n: int, cfg: AugmentConfig, rng: np.random.Generator, a_min: float | None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    low = cfg.a_min if cfg.a_min is not None else a_min
    if low is None:
        raise ValueError("a_min is not configured; pass the parent's estimate explicitly")
    low = min(float(low), cfg.a_max)
    magnitude = rng.uniform(low, cfg.a_max, n)
    sign = np.where(rng.integers(0, 2, n) == 1, 1.0, -1.0)
    mu = rng.uniform(-cfg.epsilon_f_hz, cfg.epsilon_f_hz, n)
    sigma = rng.uniform(cfg.sigma_min_hz, cfg.sigma_max_hz, n)
    return sign * magnitude, mu, sigma


def _as_peaks(anchors, amp, mu, sigma, eps) -> tuple[PeakParams, ...]:
    return tuple(
        PeakParams(a, m, g, float(f), eps)
        for f, a, m, g in zip(anchors, amp.tolist(), mu.tolist(), sigma.tolist())
    )


def sample_peaks(
    anchors: Sequence[float], cfg: AugmentConfig, rng: np.random.Generator, a_min: float | None = None
) -> tuple[PeakParams, ...]:
    """Draw one peak per anchor; each draw advances ``rng`` the same fixed amount."""
    return _as_peaks(anchors, *_draw(len(anchors), cfg, rng, a_min), cfg.epsilon_f_hz)


def sample_peak(
    anchor_hz: float, cfg: AugmentConfig, rng: np.random.Generator, a_min: float | None = None
) -> PeakParams:
    return sample_peaks([anchor_hz], cfg, rng, a_min)[0]


def _inject(
    parent: Spectrum,
    label: str,
    anchors: Sequence[float],
    cfg: AugmentConfig,
    rng: np.random.Generator,
    provenance: Provenance | None,
    floors: np.ndarray | None = None,
) -> LabeledSpectrum:
    if not anchors:
        raise ValueError(f"fault {label!r} has no in-band frequencies to inject")
    if floors is None:
        floors = local_variability(parent.bins)
    bins = np.array(parent.bins, dtype=np.float64)
    where = np.asarray(anchors, dtype=np.float64)
    peaks: list[PeakParams] = []
    for j in range(parent.channel_count):
        amp, mu, sigma = _draw(where.size, cfg, rng, float(floors[j]))
        bins[j] += _peak_sum(parent.freq_axis_hz, where, amp, mu, sigma, cfg.epsilon_f_hz)
        peaks.extend(_as_peaks(anchors, amp, mu, sigma, cfg.epsilon_f_hz))
    return LabeledSpectrum(parent.with_bins(bins, Stage.AUGMENTED), label, provenance, tuple(peaks))


def augment_spectrum(
    parent: Spectrum,
    label: str,
    cfg: AugmentConfig,
    rng: np.random.Generator,
    provenance: Provenance | None = None,
) -> LabeledSpectrum:
    """Apply the augmentation operator to one normalised spectrum.

    ``Normal`` returns the parent untouched. A fault label adds one freshly
    sampled peak per characteristic frequency (per channel). Results are not
    clipped and may leave ``[0, 1]``.
    """
    if parent.stage is not Stage.NORMALIZED:
        raise ValueError(f"augmentation expects a normalized spectrum, got stage {parent.stage.value}")
    if label == NORMAL:
        return LabeledSpectrum(parent, NORMAL, provenance)
    if label != ANOMALOUS:
        label = FaultType.parse(label).value
    try:
        anchors = cfg.frequencies_for(label)
    except KeyError:
        raise ValueError(f"fault label {label!r} missing from the augmentation fault map") from None
    return _inject(parent, label, anchors, cfg, rng, provenance)


def build_epoch_dataset(
    parents: Sequence[Spectrum], cfg: AugmentConfig, task: Task, epoch: int
) -> list[LabeledSpectrum]:
    """Build one epoch of the balanced training set from healthy parents.

    Each parent contributes ``R + 1`` identical Normal rows followed by
    ``K`` fault variants (``K = 1 + R`` binary, ``|T| (1 + R)`` multiclass).
    With stratified sampling the fault classes cycle deterministically so
    every class ends up with exactly ``len(parents) * (1 + R)`` rows.
    Variant ``v`` of parent ``p`` draws from the stream
    ``(seed, epoch, p, v)``, so datasets do not depend on iteration order.
    """
    if not parents:
        raise ValueError("build_epoch_dataset needs at least one parent spectrum")
    if isinstance(epoch, bool) or int(epoch) != epoch or epoch < 0:
        raise ValueError(f"epoch must be a non-negative integer, got {epoch!r}")
    labels = task.fault_labels
    anchors = {}
    for label in labels:
        wanted = task.faults if label == ANOMALOUS else (label,)
        missing = [t for t in wanted if t not in cfg.fault_map]
        if missing:
            raise ValueError(f"fault labels {missing} missing from the augmentation fault map")
        anchors[label] = tuple(sorted({f for t in wanted for f in cfg.fault_map[t]}))
        if not anchors[label]:
            raise ValueError(f"fault label {label!r} has no in-band frequencies to inject")

    r = cfg.replication_r
    k = task.variants_per_parent(r)
    out: list[LabeledSpectrum] = []
    for p, parent in enumerate(parents):
        if parent.stage is not Stage.NORMALIZED:
            raise ValueError(
                f"parent {p} has stage {parent.stage.value}; expected normalized"
            )
        floors = local_variability(parent.bins)
        for copy in range(r + 1):
            prov = Provenance(p, epoch, copy, parent.source_id, parent.segment_index)
            out.append(LabeledSpectrum(parent, NORMAL, prov))
        for v in range(k):
            if cfg.sampling == "stratified":
                label = labels[v % len(labels)]
            else:
                pick = rng_mod.stream(cfg.seed, "class", epoch, p, v).integers(len(labels))
                label = labels[int(pick)]
            rng = rng_mod.stream(cfg.seed, "augment", epoch, p, v)
            prov = Provenance(p, epoch, r + 1 + v, parent.source_id, parent.segment_index)
            out.append(_inject(parent, label, anchors[label], cfg, rng, prov, floors))
    return out


def class_counts(samples: Sequence[LabeledSpectrum], classes: Sequence[str]) -> dict[str, int]:
    counts = {c: 0 for c in classes}
    for s in samples:
        counts[s.label] = counts.get(s.label, 0) + 1
    return counts
