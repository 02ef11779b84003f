"""Run configuration: one JSON document with a section per module.

Every invalid value raises :class:`ConfigError` carrying the dotted field
path (``"augment.sigma_min_hz"``). All module seeds derive from the single
top-level ``seed``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from sgda.augment import AugmentConfig, Task
from sgda.errors import ConfigError
from sgda.mcsa import BearingGeometry, FaultType, HarmonicOrders, MotorParams, fault_frequency_map
from sgda.model import KINDS
from sgda.rng import derive_seed
from sgda.signals import DEFAULT_DB_EPSILON, NormalizationMode, SegmentConfig

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "faults": ["RBD", "ITSC"],
    "task": "binary",
    "normalization": "per",
    "db_epsilon": DEFAULT_DB_EPSILON,
    "orders": {"rotor_orders": [1, 2, 3], "itsc_k": [1, 3], "itsc_m": [1, 2, 3]},
    "segment": {"segment_len_samples": None, "train_step_samples": None, "infer_step_samples": None},
    "augment": {
        "a_min": None,
        "a_max": 1.0,
        "sigma_min_hz": 0.1,
        "sigma_max_hz": 0.5,
        "epsilon_f_hz": 2.0,
        "replication_r": 0,
        "sampling": "stratified",
    },
    "model": {
        "kind": "one_hidden",
        "hidden_units": 64,
        "learning_rate": 1e-3,
        "batch_size": 32,
        "max_epochs": 40,
        "plateau_patience": 10,
        "plateau_factor": 0.5,
        "min_lr": 1e-6,
        "l2": 0.0,
    },
    "synth": {
        "split": "train",
        "duration_s": 3.0,
        "base_amplitude": 1.0,
        "harmonic_amplitudes": {"3": 0.05, "5": 0.02},
        "noise_std": None,
        "fault_amplitude": 0.05,
        "counts": {"Normal": 10},
    },
    "paths": {},
}


def _merge(base: dict, override: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict) and k not in ("counts", "harmonic_amplitudes"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(text: str) -> tuple[list[str], Any]:
    """``"model.max_epochs=5"`` -> ``(["model", "max_epochs"], 5)``; values parse as JSON when possible."""
    if "=" not in text:
        raise ConfigError("--override", f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError("--override", f"empty key in {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return parts, value


def apply_overrides(doc: dict, overrides: Sequence[str]) -> dict:
    doc = copy.deepcopy(doc)
    for text in overrides:
        parts, value = parse_override(text)
        node = doc
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                node[p] = {}
            node = node[p]
        node[parts[-1]] = value
    return doc


def load_config_document(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            "", f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ConfigError("", f"{path}: top level must be a JSON object")
    return doc


def _section(doc: Mapping, key: str) -> dict:
    value = doc.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError(key, "must be an object")
    return dict(value)


def _guard(path: str, fn: Callable, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(path, str(exc)) from exc


def _number(sec: Mapping, key: str, path: str, required: bool = False, kind=float, default=None):
    if key not in sec or sec[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}", "is required")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"must be a number, got {v!r}")
    if kind is int:
        if int(v) != v:
            raise ConfigError(f"{path}.{key}", f"must be an integer, got {v!r}")
        return int(v)
    return float(v)


def _int_list(sec: Mapping, key: str, path: str) -> tuple[int, ...]:
    v = sec.get(key)
    if not isinstance(v, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in v):
        raise ConfigError(f"{path}.{key}", f"must be a list of integers, got {v!r}")
    return tuple(v)


def parse_motor(sec: Mapping, path: str = "motor") -> MotorParams:
    sec = dict(sec)
    bearing = None
    if sec.get("bearing") is not None:
        b = sec["bearing"]
        if not isinstance(b, Mapping):
            raise ConfigError(f"{path}.bearing", "must be an object")
        bpath = f"{path}.bearing"
        bearing = _guard(
            bpath,
            BearingGeometry,
            n_elements=_number(b, "n_elements", bpath, True, int),
            ball_diameter_m=_number(b, "ball_diameter_m", bpath, True),
            pitch_diameter_m=_number(b, "pitch_diameter_m", bpath, True),
            contact_angle_rad=_number(b, "contact_angle_rad", bpath, default=0.0),
        )
    return _guard(
        path,
        MotorParams,
        supply_frequency_hz=_number(sec, "supply_frequency_hz", path, True),
        slip=_number(sec, "slip", path, True),
        pole_pairs=_number(sec, "pole_pairs", path, True, int),
        sampling_rate_hz=_number(sec, "sampling_rate_hz", path, True),
        rotor_frequency_hz=_number(sec, "rotor_frequency_hz", path),
        bearing=bearing,
        name=str(sec.get("name", "")),
        rotor_bars=_number(sec, "rotor_bars", path, kind=int),
    )


@dataclass(frozen=True)
class SynthSettings:
    split: str
    duration_s: float
    base_amplitude: float
    harmonic_amplitudes: dict[int, float]
    noise_std: float | None
    fault_amplitude: float
    counts: dict[str, int]


@dataclass(frozen=True, eq=False)
class RunConfig:
    motor: MotorParams
    orders: HarmonicOrders
    faults: tuple[FaultType, ...]
    task: Task
    normalization: NormalizationMode
    segment_len_samples: int
    train_step_samples: int
    infer_step_samples: int
    augment: dict
    model: dict
    synth: SynthSettings
    paths: dict
    seed: int
    db_epsilon: float
    document: dict = field(default_factory=dict)

    @property
    def train_segments(self) -> SegmentConfig:
        return SegmentConfig(self.segment_len_samples, self.train_step_samples)

    @property
    def infer_segments(self) -> SegmentConfig:
        return SegmentConfig(self.segment_len_samples, self.infer_step_samples)

    def sub_seed(self, label: str) -> int:
        return derive_seed(self.seed, label)

    def fault_map(self):
        return fault_frequency_map(self.motor, self.faults, self.orders)

    def augment_config(self) -> AugmentConfig:
        fmap = self.fault_map()
        empty = [f.value for f, s in fmap.items() if s.empty]
        if empty:
            raise ConfigError("faults", f"no in-band frequencies for {empty}")
        return _guard(
            "augment",
            AugmentConfig.from_frequency_map,
            fmap,
            seed=self.sub_seed("augment"),
            **self.augment,
        )


def build_run_config(doc: Mapping) -> RunConfig:
    """Validate a raw config document (defaults filled in) into a :class:`RunConfig`."""
    if "motor" not in doc:
        raise ConfigError("motor", "is required")
    full = _merge(DEFAULTS, doc)

    seed = _number(full, "seed", "", kind=int)
    if seed is None or seed < 0:
        raise ConfigError("seed", "must be a non-negative integer")
    motor = parse_motor(_section(full, "motor"))
    o = _section(full, "orders")
    orders = _guard(
        "orders",
        HarmonicOrders,
        _int_list(o, "rotor_orders", "orders"),
        _int_list(o, "itsc_k", "orders"),
        _int_list(o, "itsc_m", "orders"),
    )

    faults_raw = full.get("faults")
    if not isinstance(faults_raw, list) or not faults_raw:
        raise ConfigError("faults", "must be a non-empty list of fault types")
    faults = tuple(_guard(f"faults[{i}]", FaultType.parse, f) for i, f in enumerate(faults_raw))
    task = _guard("task", Task, str(full.get("task")), faults)
    normalization = _guard("normalization", NormalizationMode.parse, full.get("normalization"))
    db_eps = _number(full, "db_epsilon", "", default=DEFAULT_DB_EPSILON)
    if not db_eps > 0:
        raise ConfigError("db_epsilon", "must be > 0")

    seg = _section(full, "segment")
    length = _number(seg, "segment_len_samples", "segment", kind=int)
    if length is None:
        length = int(round(motor.sampling_rate_hz))
    train_step = _number(seg, "train_step_samples", "segment", kind=int, default=max(1, length // 2))
    infer_step = _number(seg, "infer_step_samples", "segment", kind=int, default=length)
    _guard("segment", SegmentConfig, length, train_step)
    _guard("segment", SegmentConfig, length, infer_step)

    aug = _section(full, "augment")
    unknown = set(aug) - set(DEFAULTS["augment"])
    if unknown:
        raise ConfigError(f"augment.{sorted(unknown)[0]}", "unknown field")
    for key in ("a_max", "sigma_min_hz", "sigma_max_hz", "epsilon_f_hz"):
        aug[key] = _number(aug, key, "augment", True)
    aug["a_min"] = _number(aug, "a_min", "augment")
    aug["replication_r"] = _number(aug, "replication_r", "augment", True, int)
    # Validate ranges now so errors carry a path even before fault maps are built.
    _guard("augment", AugmentConfig, {}, **aug)

    mod = _section(full, "model")
    unknown = set(mod) - set(DEFAULTS["model"])
    if unknown:
        raise ConfigError(f"model.{sorted(unknown)[0]}", "unknown field")
    if mod.get("kind") not in KINDS:
        raise ConfigError("model.kind", f"must be one of {list(KINDS)}, got {mod.get('kind')!r}")
    for key in ("hidden_units", "batch_size", "max_epochs", "plateau_patience"):
        mod[key] = _number(mod, key, "model", True, int)
    for key in ("learning_rate", "plateau_factor", "min_lr", "l2"):
        mod[key] = _number(mod, key, "model", True)

    syn = _section(full, "synth")
    harmonics = {}
    for k, v in dict(syn.get("harmonic_amplitudes") or {}).items():
        try:
            harmonics[int(k)] = float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"synth.harmonic_amplitudes.{k}", "order and amplitude must be numeric") from None
    counts = {}
    for label, n in dict(syn.get("counts") or {}).items():
        if label != "Normal":
            label = _guard(f"synth.counts.{label}", FaultType.parse, label).value
        if isinstance(n, bool) or not isinstance(n, int) or n < 0:
            raise ConfigError(f"synth.counts.{label}", f"must be a non-negative integer, got {n!r}")
        counts[label] = n
    duration = _number(syn, "duration_s", "synth", True)
    if not duration > 0:
        raise ConfigError("synth.duration_s", f"must be > 0, got {duration}")
    synth = SynthSettings(
        split=str(syn.get("split", "train")),
        duration_s=duration,
        base_amplitude=_number(syn, "base_amplitude", "synth", True),
        harmonic_amplitudes=harmonics,
        noise_std=_number(syn, "noise_std", "synth"),
        fault_amplitude=_number(syn, "fault_amplitude", "synth", True),
        counts=counts,
    )

    paths = _section(full, "paths")
    return RunConfig(
        motor=motor,
        orders=orders,
        faults=faults,
        task=task,
        normalization=normalization,
        segment_len_samples=length,
        train_step_samples=train_step,
        infer_step_samples=infer_step,
        augment=aug,
        model=mod,
        synth=synth,
        paths=paths,
        seed=seed,
        db_epsilon=db_eps,
        document=dict(doc),
    )


def load_run_config(path: str | Path, overrides: Sequence[str] = (), seed: int | None = None) -> RunConfig:
    doc = apply_overrides(load_config_document(path), overrides)
    if seed is not None:
        doc["seed"] = seed
    return build_run_config(doc)
