"""Signal-level diagnosis by majority vote over segment predictions."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from sgda.augment import NORMAL
from sgda.errors import DataError
from sgda.metrics import Metrics, classification_metrics
from sgda.model import Prediction, TrainedModel, predict_many
from sgda.signals import (
    DEFAULT_DB_EPSILON,
    NormalizationMode,
    RawSignal,
    SegmentConfig,
    apply_normalization,
    decibel_spectra,
    split_channels,
)


@dataclass(frozen=True)
class SegmentVote:
    segment_index: int
    channel: int
    prediction: Prediction


@dataclass(frozen=True)
class VoteReport:
    source_id: str
    segment_predictions: tuple[SegmentVote, ...]
    vote_counts: dict[str, int]
    verdict: str
    tie_flag: bool
    confidence: float
    clipped_segments: int = 0

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "verdict": self.verdict,
            "confidence": self.confidence,
            "tie_flag": self.tie_flag,
            "vote_counts": dict(self.vote_counts),
            "clipped_segments": self.clipped_segments,
            "segments": [
                {
                    "segment": v.segment_index,
                    "channel": v.channel,
                    "label": v.prediction.label,
                    "probabilities": list(v.prediction.probabilities),
                }
                for v in self.segment_predictions
            ],
        }


def majority_vote(labels: Sequence[str], class_order: Sequence[str]) -> tuple[dict[str, int], str, bool]:
    """Return ``(counts, verdict, tie)`` for a list of segment labels.

    Ties prefer any fault over Normal, then the lowest class index.
    """
    if not labels:
        raise ValueError("cannot vote over zero segments")
    order = list(class_order)
    unknown = set(labels) - set(order)
    if unknown:
        raise ValueError(f"labels {sorted(unknown)} are not among the classes {order}")
    tally = Counter(labels)
    counts = {c: tally.get(c, 0) for c in order}
    top = max(counts.values())
    tied = [c for c in order if counts[c] == top]
    faults = [c for c in tied if c != NORMAL]
    verdict = faults[0] if faults else tied[0]
    return counts, verdict, len(tied) > 1


def report_from_predictions(
    source_id: str,
    votes: Sequence[SegmentVote],
    class_order: Sequence[str],
    clipped_segments: int = 0,
) -> VoteReport:
    counts, verdict, tie = majority_vote([v.prediction.label for v in votes], class_order)
    return VoteReport(
        source_id,
        tuple(votes),
        counts,
        verdict,
        tie,
        counts[verdict] / len(votes),
        clipped_segments,
    )


def diagnose_signal(
    signal: RawSignal,
    model: TrainedModel,
    seg_cfg: SegmentConfig | None = None,
    norm_mode: NormalizationMode | str | None = None,
    epsilon: float = DEFAULT_DB_EPSILON,
) -> VoteReport:
    """Segment, transform, normalise and classify a signal, then vote.

    ``seg_cfg`` defaults to disjoint one-second windows. ``norm_mode``
    defaults to the model's; passing a different mode is an error. Under the
    global mode the model's stored extrema are reused and segments falling
    outside them are counted in ``clipped_segments``.
    """
    if seg_cfg is None:
        seg_cfg = SegmentConfig.one_second(signal.sampling_rate_hz)
    context = model.normalization
    if context is None:
        raise DataError("model carries no normalization context")
    if norm_mode is not None and NormalizationMode.parse(norm_mode) is not context.mode:
        raise DataError(
            f"normalization mismatch: model trained with {context.mode.value!r}, "
            f"diagnosis requested {NormalizationMode.parse(norm_mode).value!r}"
        )
    if seg_cfg.n_bins != model.config.input_dim:
        raise DataError(
            f"segment length {seg_cfg.segment_len_samples} gives {seg_cfg.n_bins} bins; "
            f"model expects {model.config.input_dim}"
        )
    specs = decibel_spectra(signal, seg_cfg, epsilon)
    normed = apply_normalization(specs, context)
    singles = split_channels(normed.spectra)
    preds = predict_many(model, singles)
    votes = [
        SegmentVote(s.segment_index, j % signal.channel_count, p)
        for j, (s, p) in enumerate(zip(singles, preds))
    ]
    clipped = int(normed.clipped.any(axis=1).sum()) if normed.clipped is not None else 0
    return report_from_predictions(signal.source_id, votes, model.class_order, clipped)


@dataclass(frozen=True, eq=False)
class BatchReport:
    reports: tuple[VoteReport | None, ...]
    errors: dict[int, str] = field(default_factory=dict)
    segment_metrics: Metrics | None = None
    signal_metrics: Metrics | None = None

    def to_dict(self) -> dict:
        return {
            "reports": [None if r is None else r.to_dict() for r in self.reports],
            "errors": {str(k): v for k, v in self.errors.items()},
            "segment_level": None if self.segment_metrics is None else self.segment_metrics.to_dict(),
            "signal_level": None if self.signal_metrics is None else self.signal_metrics.to_dict(),
        }


def voting_metrics(
    reports: Sequence[VoteReport], true_labels: Sequence[str], class_order: Sequence[str]
) -> tuple[Metrics, Metrics]:
    """Segment-level and signal-level metrics for reports with known truth."""
    seg_true, seg_pred, sig_true, sig_pred = [], [], [], []
    for report, truth in zip(reports, true_labels):
        for v in report.segment_predictions:
            seg_true.append(truth)
            seg_pred.append(v.prediction.label)
        sig_true.append(truth)
        sig_pred.append(report.verdict)
    return (
        classification_metrics(seg_true, seg_pred, class_order),
        classification_metrics(sig_true, sig_pred, class_order),
    )


def batch_diagnose(
    signals: Sequence[RawSignal],
    model: TrainedModel,
    seg_cfg: SegmentConfig | None = None,
    norm_mode: NormalizationMode | str | None = None,
    true_labels: Sequence[str] | None = None,
    epsilon: float = DEFAULT_DB_EPSILON,
) -> BatchReport:
    """Diagnose many signals; a failing signal is recorded, not raised.

    Metrics are computed over the successfully diagnosed signals when
    ``true_labels`` is given.
    """
    if not signals:
        raise ValueError("batch_diagnose needs at least one signal")
    if true_labels is not None and len(true_labels) != len(signals):
        raise ValueError("true_labels must align with signals")
    reports: list[VoteReport | None] = []
    errors: dict[int, str] = {}
    for i, sig in enumerate(signals):
        try:
            reports.append(diagnose_signal(sig, model, seg_cfg, norm_mode, epsilon))
        except (DataError, ValueError) as exc:
            reports.append(None)
            errors[i] = f"{sig.source_id}: {exc}"
    seg_m = sig_m = None
    ok = [i for i, r in enumerate(reports) if r is not None]
    if true_labels is not None and ok:
        seg_m, sig_m = voting_metrics(
            [reports[i] for i in ok], [true_labels[i] for i in ok], model.class_order
        )
    return BatchReport(tuple(reports), errors, seg_m, sig_m)


def reports_csv(reports: Sequence[VoteReport], class_order: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["source_id", "verdict", "confidence", "tie_flag", "n_segments"]
        + [f"votes_{c}" for c in class_order]
    )
    for r in reports:
        writer.writerow(
            [r.source_id, r.verdict, repr(r.confidence), int(r.tie_flag), len(r.segment_predictions)]
            + [r.vote_counts.get(c, 0) for c in class_order]
        )
    return buf.getvalue()
