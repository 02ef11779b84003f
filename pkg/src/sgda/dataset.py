"""Frozen-dataset container.

Layout (all little-endian)::

    b"SGDADS01" | u64 header length | UTF-8 JSON header
    | float32 spectra, row-major (n, channels, bins) | int32 labels (n)

The header carries the class list, class counts, frequency axis, array
shape, per-row provenance and an echo of the generating configuration.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from sgda.augment import LabeledSpectrum, Provenance
from sgda.errors import DataError
from sgda.fileio import write_atomic
from sgda.signals import Spectrum, Stage

MAGIC = b"SGDADS01"


@dataclass(frozen=True, eq=False)
class Dataset:
    spectra: np.ndarray  # float32 (n, channels, bins)
    labels: np.ndarray  # int32 (n,)
    classes: tuple[str, ...]
    freq_axis_hz: np.ndarray
    config: dict = field(default_factory=dict)
    provenance: tuple[dict, ...] = field(default_factory=tuple)

    @classmethod
    def from_labeled(
        cls, samples: Sequence[LabeledSpectrum], classes: Sequence[str], config: dict | None = None
    ) -> "Dataset":
        if not samples:
            raise ValueError("cannot freeze an empty dataset")
        index = {c: i for i, c in enumerate(classes)}
        freq = samples[0].spectrum.freq_axis_hz
        spectra = np.stack([np.asarray(s.spectrum.bins, dtype="<f4") for s in samples])
        labels = np.array([index[s.label] for s in samples], dtype="<i4")
        prov = tuple(
            {} if s.provenance is None else {
                "parent": s.provenance.parent,
                "epoch": s.provenance.epoch,
                "variant": s.provenance.variant,
                "source_id": s.provenance.source_id,
                "segment_index": s.provenance.segment_index,
            }
            for s in samples
        )
        return cls(spectra, labels, tuple(classes), np.asarray(freq, dtype=np.float64), dict(config or {}), prov)

    def class_counts(self) -> dict[str, int]:
        counts = np.bincount(self.labels, minlength=len(self.classes))
        return {c: int(counts[i]) for i, c in enumerate(self.classes)}

    def to_labeled(self) -> list[LabeledSpectrum]:
        out = []
        for i in range(len(self.labels)):
            label = self.classes[int(self.labels[i])]
            # Augmented rows may leave [0, 1]; keep their stage honest.
            bins = self.spectra[i].astype(np.float64)
            inside = bool(np.all((bins >= 0) & (bins <= 1)))
            stage = Stage.NORMALIZED if inside else Stage.AUGMENTED
            p = self.provenance[i] if i < len(self.provenance) else {}
            prov = Provenance(**p) if p else None
            out.append(LabeledSpectrum(Spectrum(bins, self.freq_axis_hz, stage), label, prov))
        return out

    def to_bytes(self) -> bytes:
        header = {
            "format": "sgda-dataset",
            "version": 1,
            "classes": list(self.classes),
            "class_counts": self.class_counts(),
            "shape": list(self.spectra.shape),
            "freq_axis_hz": [float(f) for f in self.freq_axis_hz],
            "config": self.config,
            "provenance": list(self.provenance),
        }
        head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        body = np.ascontiguousarray(self.spectra, dtype="<f4").tobytes()
        tail = np.ascontiguousarray(self.labels, dtype="<i4").tobytes()
        return MAGIC + struct.pack("<Q", len(head)) + head + body + tail

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Dataset":
        if blob[: len(MAGIC)] != MAGIC:
            raise DataError("not a dataset container (bad magic)")
        offset = len(MAGIC)
        (head_len,) = struct.unpack_from("<Q", blob, offset)
        offset += 8
        try:
            header = json.loads(blob[offset : offset + head_len].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataError(f"corrupt dataset header: {exc}") from exc
        offset += head_len
        n, c, b = header["shape"]
        n_floats = n * c * b
        expected = offset + 4 * n_floats + 4 * n
        if len(blob) != expected:
            raise DataError(f"dataset container has {len(blob)} bytes, expected {expected}")
        spectra = np.frombuffer(blob, dtype="<f4", count=n_floats, offset=offset).reshape(n, c, b).copy()
        labels = np.frombuffer(blob, dtype="<i4", count=n, offset=offset + 4 * n_floats).copy()
        return cls(
            spectra,
            labels,
            tuple(header["classes"]),
            np.asarray(header["freq_axis_hz"], dtype=np.float64),
            header.get("config", {}),
            tuple(header.get("provenance", ())),
        )


def save_dataset(path: str | Path, dataset: Dataset) -> None:
    write_atomic(path, dataset.to_bytes())


def load_dataset(path: str | Path) -> Dataset:
    return Dataset.from_bytes(Path(path).read_bytes())
