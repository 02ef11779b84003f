"""Command-line interface.

Verbs: ``freqs``, ``synth``, ``preprocess``, ``train``, ``diagnose``,
``evaluate``. Every verb reads one JSON config (``--config``), accepts
``--seed``, ``--out`` and repeatable ``--override key=value``.

Exit codes: 0 success, 2 config error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from sgda import __version__
from sgda.augment import NORMAL, LabeledSpectrum, build_epoch_dataset, class_counts
from sgda.config import RunConfig, load_run_config
from sgda.dataset import Dataset, save_dataset
from sgda.errors import ConfigError, DataError, FaultFrequencyError, SgdaError
from sgda.fileio import write_atomic, write_json
from sgda.infer import batch_diagnose, reports_csv, voting_metrics
from sgda.mcsa import FaultType
from sgda.model import ModelConfig, TrainedModel, train
from sgda.signals import (
    RawSignal,
    decibel_spectra,
    format_signal_csv,
    format_spectrum_csv,
    load_signal_csv,
    normalize,
    split_channels,
)
from sgda.synth import SynthConfig, generate

logger = logging.getLogger("sgda")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4
MANIFEST = "manifest.json"


# ---------------------------------------------------------------------------
# Commands


def cmd_freqs(run: RunConfig, out: Path | None = None) -> dict:
    try:
        fmap = run.fault_map()
    except FaultFrequencyError as exc:
        if isinstance(exc.fault, FaultType) and exc.fault.is_bearing and run.motor.bearing is None:
            raise ConfigError("motor.bearing", f"missing block required by {exc.fault.value}") from exc
        raise ConfigError("faults", str(exc)) from exc
    table = {
        "motor": run.motor.name,
        "supply_frequency_hz": run.motor.supply_frequency_hz,
        "rotor_frequency_hz": run.motor.shaft_frequency_hz,
        "orders": run.orders.to_dict(),
        "faults": {
            f.value: {"frequencies_hz": list(s.frequencies_hz), "notes": list(s.notes)}
            for f, s in fmap.items()
        },
    }
    if out is not None:
        write_json(out / "freqs.json", table)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fault", "frequency_hz"])
        for f, s in fmap.items():
            for v in s.frequencies_hz:
                w.writerow([f.value, repr(v)])
        write_atomic(out / "freqs.csv", buf.getvalue())
    return table


def format_freq_table(table: dict) -> str:
    lines = [f"motor: {table['motor'] or '-'}  f1={table['supply_frequency_hz']:g} Hz  fr={table['rotor_frequency_hz']:.4g} Hz"]
    lines.append(f"orders: {table['orders']}")
    for fault, entry in table["faults"].items():
        freqs = ", ".join(f"{v:.2f}" for v in entry["frequencies_hz"]) or "(none)"
        lines.append(f"{fault:5s} {freqs}")
    return "\n".join(lines)


def cmd_synth(run: RunConfig, out: Path) -> dict:
    syn = run.synth
    if not syn.counts or sum(syn.counts.values()) == 0:
        raise ConfigError("synth.counts", "requests no signals")
    entries = []
    for label in sorted(syn.counts, key=lambda c: (c != NORMAL, c)):
        for i in range(syn.counts[label]):
            seed = run.sub_seed(f"synth:{syn.split}:{label}:{i}")
            try:
                cfg = SynthConfig(
                    params=run.motor,
                    duration_s=syn.duration_s,
                    base_amplitude=syn.base_amplitude,
                    harmonic_amplitudes=syn.harmonic_amplitudes,
                    noise_std=syn.noise_std,
                    fault=None if label == NORMAL else FaultType.parse(label),
                    fault_amplitude=syn.fault_amplitude,
                    seed=seed,
                    orders=run.orders,
                )
            except ValueError as exc:
                raise ConfigError("synth", str(exc)) from exc
            name = f"{syn.split}_{label.lower()}_{i:03d}"
            signal = generate(cfg, name)
            write_atomic(out / f"{name}.csv", format_signal_csv(signal))
            entries.append({"file": f"{name}.csv", "label": label, "seed": seed})
    manifest = {
        "format": "sgda-manifest/1",
        "sampling_rate_hz": run.motor.sampling_rate_hz,
        "signals": entries,
        "config": run.document,
    }
    write_json(out / MANIFEST, manifest)
    return manifest


def read_manifest(path: Path) -> tuple[Path, list[dict]]:
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"{path}: cannot read manifest ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed manifest at line {exc.lineno}, column {exc.colno}") from exc
    signals = doc.get("signals") if isinstance(doc, dict) else None
    if not isinstance(signals, list) or not signals:
        raise DataError(f"{path}: manifest lists no signals")
    for i, e in enumerate(signals):
        if not isinstance(e, dict) or "file" not in e or "label" not in e:
            raise DataError(f"{path}: entry {i} needs 'file' and 'label'")
    return path.parent, signals


def collect_inputs(input_dir: Path) -> list[tuple[Path, str]]:
    """(file, label) pairs from a manifest if present, else every CSV as unlabeled-healthy."""
    if not input_dir.is_dir():
        raise DataError(f"{input_dir}: input directory does not exist")
    manifest = input_dir / MANIFEST
    if manifest.is_file():
        root, entries = read_manifest(manifest)
        return [(root / e["file"], str(e["label"])) for e in entries]
    files = sorted(input_dir.glob("*.csv"))
    if not files:
        raise DataError(f"{input_dir}: no signal CSV files found")
    return [(f, NORMAL) for f in files]


def _load(path: Path, run: RunConfig) -> RawSignal:
    try:
        return load_signal_csv(path, run.motor.sampling_rate_hz)
    except DataError as exc:
        raise DataError(f"{path.name}: {exc}") from exc


def cmd_preprocess(run: RunConfig, input_dir: Path, out: Path) -> Dataset:
    inputs = collect_inputs(input_dir)
    labels, specs = [], []
    for path, label in inputs:
        signal = _load(path, run)
        s = decibel_spectra(signal, run.infer_segments, run.db_epsilon)
        specs.extend(s)
        labels.extend([label] * len(s))
    normed = normalize(specs, run.normalization)
    for spec in normed.spectra:
        write_atomic(out / "spectra" / f"{spec.source_id}_seg{spec.segment_index:04d}.csv", format_spectrum_csv(spec))
    task_labels = [run.task.true_label(lab) for lab in labels]
    data = Dataset.from_labeled(
        [LabeledSpectrum(s, lab) for s, lab in zip(normed.spectra, task_labels)],
        run.task.classes,
        {"run": run.document, "normalization": normed.context.to_dict()},
    )
    save_dataset(out / "spectra.sgds", data)
    return data


def train_from_signals(run: RunConfig, signals: Sequence[RawSignal], on_epoch=None) -> TrainedModel:
    """Preprocess healthy signals and train with per-epoch augmentation."""
    specs = [s for sig in signals for s in decibel_spectra(sig, run.train_segments, run.db_epsilon)]
    normed = normalize(specs, run.normalization)
    parents = split_channels(normed.spectra)
    aug = run.augment_config()
    model_cfg = ModelConfig(
        input_dim=parents[0].n_bins,
        classes=run.task.classes,
        seed=run.sub_seed("model"),
        **run.model,
    )
    return train(lambda epoch: build_epoch_dataset(parents, aug, run.task, epoch), model_cfg, normed.context, on_epoch)


def cmd_train(run: RunConfig, input_dir: Path, out: Path, export_dataset: bool = False) -> TrainedModel:
    inputs = collect_inputs(input_dir)
    faulty = [p.name for p, label in inputs if label != NORMAL]
    if faulty:
        raise DataError(
            "training accepts healthy signals only (faults are synthesised by augmentation); "
            f"fault-labelled inputs: {faulty[:5]}"
        )
    signals = [_load(p, run) for p, _ in inputs]
    model = train_from_signals(run, signals)
    doc = json.loads(model.to_json())
    doc["run_config"] = run.document
    write_atomic(out / "model.json", json.dumps(doc, indent=1) + "\n")
    write_json(out / "train_log.json", {"run_config": run.document, "epochs": list(model.train_log)})
    if export_dataset:
        specs = [s for sig in signals for s in decibel_spectra(sig, run.train_segments, run.db_epsilon)]
        normed = normalize(specs, run.normalization)
        data = build_epoch_dataset(split_channels(normed.spectra), run.augment_config(), run.task, 0)
        frozen = Dataset.from_labeled(data, run.task.classes, {"run": run.document, "epoch": 0})
        save_dataset(out / "dataset_epoch0.sgds", frozen)
        logger.info("exported epoch-0 dataset with counts %s", class_counts(data, run.task.classes))
    return model


def load_model(path: Path) -> TrainedModel:
    try:
        return TrainedModel.from_json(path.read_text())
    except OSError as exc:
        raise DataError(f"{path}: cannot read model ({exc.strerror})") from exc
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: not a valid model file ({exc})") from exc


def cmd_diagnose(run: RunConfig, model: TrainedModel, paths: Sequence[Path], out: Path | None) -> list:
    if not paths:
        raise DataError("no signal files given")
    signals = [_load(p, run) for p in paths]
    batch = batch_diagnose(signals, model, run.infer_segments, run.normalization, epsilon=run.db_epsilon)
    if batch.errors:
        raise DataError("; ".join(batch.errors.values()))
    reports = list(batch.reports)
    if out is not None:
        write_json(out / "reports.json", {"run_config": run.document, "reports": [r.to_dict() for r in reports]})
        write_atomic(out / "reports.csv", reports_csv(reports, model.class_order))
    return reports


def _confusion_csv(metrics) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["true\\pred", *metrics.classes])
    for c, row in zip(metrics.classes, metrics.confusion):
        w.writerow([c, *(repr(float(v)) for v in row)])
    return buf.getvalue()


def cmd_evaluate(run: RunConfig, model: TrainedModel, manifest: Path, out: Path | None) -> dict:
    root, entries = read_manifest(manifest)
    truths = []
    for e in entries:
        try:
            truths.append(run.task.true_label(e["label"]))
        except ValueError as exc:
            raise DataError(f"{manifest.name}: unknown label {e['label']!r} ({exc})") from exc
        if truths[-1] not in model.class_order:
            raise DataError(f"{manifest.name}: label {truths[-1]!r} not known to the model")
    signals = [_load(root / e["file"], run) for e in entries]
    batch = batch_diagnose(signals, model, run.infer_segments, run.normalization, epsilon=run.db_epsilon)
    if batch.errors:
        raise DataError("; ".join(batch.errors.values()))
    seg_m, sig_m = voting_metrics(list(batch.reports), truths, model.class_order)
    report = {
        "run_config": run.document,
        "segment_level": seg_m.to_dict(),
        "signal_level": sig_m.to_dict(),
        "signals": [
            {"file": e["file"], "true": t, "verdict": r.verdict, "confidence": r.confidence, "tie_flag": r.tie_flag}
            for e, t, r in zip(entries, truths, batch.reports)
        ],
    }
    if out is not None:
        write_json(out / "metrics.json", report)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "metric", "class", "value"])
        for level, m in (("segment", seg_m), ("signal", sig_m)):
            w.writerow([level, "accuracy", "", repr(m.accuracy)])
            w.writerow([level, "macro_f1", "", repr(m.macro_f1)])
            for c in m.classes:
                for name in ("precision", "recall", "f1"):
                    w.writerow([level, name, c, repr(getattr(m, name)[c])])
        write_atomic(out / "metrics.csv", buf.getvalue())
        write_atomic(out / "confusion_segment.csv", _confusion_csv(seg_m))
        write_atomic(out / "confusion_signal.csv", _confusion_csv(sig_m))
    return report


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the top-level seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config leaf, e.g. model.max_epochs=5 (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sgda", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("freqs", parents=[common], help="print the fault frequency table")
    sub.add_parser("synth", parents=[common], help="generate synthetic signals + manifest")
    p = sub.add_parser("preprocess", parents=[common], help="signals -> normalised spectra")
    p.add_argument("--input", type=Path)
    p = sub.add_parser("train", parents=[common], help="train on healthy signals with augmentation")
    p.add_argument("--input", type=Path)
    p.add_argument("--export-dataset", action="store_true", help="also write the epoch-0 dataset")
    p = sub.add_parser("diagnose", parents=[common], help="majority-vote diagnosis of signals")
    p.add_argument("--model", type=Path)
    p.add_argument("signals", nargs="*", type=Path)
    p = sub.add_parser("evaluate", parents=[common], help="score a model on a labelled manifest")
    p.add_argument("--model", type=Path)
    p.add_argument("--manifest", type=Path)
    return parser


def _path(arg: Path | None, run: RunConfig, key: str, required: bool = True) -> Path | None:
    if arg is not None:
        return arg
    if run.paths.get(key):
        return Path(run.paths[key])
    if required:
        raise ConfigError(f"paths.{key}", f"not set (pass --{key})")
    return None


def run_cli(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        run = load_run_config(args.config, args.override, args.seed)
        out = _path(args.out, run, "out", required=args.verb not in ("freqs", "diagnose", "evaluate"))
        if args.verb == "freqs":
            print(format_freq_table(cmd_freqs(run, out)))
        elif args.verb == "synth":
            manifest = cmd_synth(run, out)
            print(f"wrote {len(manifest['signals'])} signals to {out}")
        elif args.verb == "preprocess":
            data = cmd_preprocess(run, _path(args.input, run, "input"), out)
            print(f"wrote {len(data.labels)} spectra to {out}")
        elif args.verb == "train":
            model = cmd_train(run, _path(args.input, run, "input"), out, args.export_dataset)
            last = model.train_log[-1] if model.train_log else {}
            print(f"trained {model.config.kind} on {len(model.class_order)} classes; final loss {last.get('loss', float('nan')):.4g}")
        elif args.verb == "diagnose":
            model = load_model(_path(args.model, run, "model"))
            reports = cmd_diagnose(run, model, args.signals, out)
            sys.stdout.write(reports_csv(reports, model.class_order))
        elif args.verb == "evaluate":
            model = load_model(_path(args.model, run, "model"))
            report = cmd_evaluate(run, model, _path(args.manifest, run, "manifest"), out)
            for level in ("segment_level", "signal_level"):
                m = report[level]
                print(f"{level:13s} accuracy={m['accuracy']:.4f} macro_f1={m['macro_f1']:.4f}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SgdaError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())
