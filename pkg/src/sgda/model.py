"""Lightweight spectrum classifiers trained from scratch with numpy.

Two architectures share one code path:

* ``logistic``   -- a single affine layer;
* ``one_hidden`` -- affine -> ReLU -> affine.

Two-class problems use one sigmoid output with binary cross-entropy; more
classes use softmax with categorical cross-entropy. Optimisation is Adam with
a reduce-on-plateau learning-rate schedule driven by the epoch loss.

Inputs are z-scored per feature against the Normal rows of the first
epoch, and those statistics are frozen into the model. Normalised spectra
are all-positive, and feeding them raw drives every ReLU unit dead within
a few Adam steps. Measuring against the healthy rows puts healthy spectra
near the origin and makes injected peaks large relative to ordinary
bin-to-bin noise.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from sgda import rng as rng_mod
from sgda.augment import NORMAL, LabeledSpectrum
from sgda.errors import DataError, TrainingError
from sgda.metrics import Metrics, classification_metrics
from sgda.signals import NormContext, Spectrum

MODEL_FORMAT = "sgda-model/1"
KINDS = ("logistic", "one_hidden")
SCALE_FLOOR = 1e-2


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    classes: tuple[str, ...]
    kind: str = "one_hidden"
    hidden_units: int = 64
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 50
    plateau_patience: int = 10
    plateau_factor: float = 0.5
    min_lr: float = 1e-6
    seed: int = 0
    standardize: bool = True
    l2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if len(set(self.classes)) != len(self.classes) or len(self.classes) < 2:
            raise ValueError(f"classes must hold at least two distinct labels, got {self.classes}")
        if self.classes[0] != NORMAL:
            raise ValueError(f"class 0 must be {NORMAL!r}, got {self.classes[0]!r}")
        for name in ("input_dim", "hidden_units", "batch_size", "plateau_patience"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if isinstance(self.max_epochs, bool) or int(self.max_epochs) != self.max_epochs or self.max_epochs < 0:
            raise ValueError(f"max_epochs must be a non-negative integer, got {self.max_epochs!r}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 < self.plateau_factor < 1:
            raise ValueError(f"plateau_factor must lie in (0, 1), got {self.plateau_factor}")
        if not (math.isfinite(self.l2) and self.l2 >= 0):
            raise ValueError(f"l2 must be a finite non-negative real, got {self.l2}")
        if not 0 <= self.min_lr <= self.learning_rate:
            raise ValueError(f"min_lr must lie in [0, learning_rate], got {self.min_lr}")

    @property
    def n_outputs(self) -> int:
        return 1 if len(self.classes) == 2 else len(self.classes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classes"] = list(self.classes)
        return d


# ---------------------------------------------------------------------------
# Network maths


def init_params(cfg: ModelConfig) -> dict[str, np.ndarray]:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero."""
    gen = rng_mod.stream(cfg.seed, "init")

    def layer(fan_in, fan_out):
        bound = 1.0 / math.sqrt(fan_in)
        return gen.uniform(-bound, bound, (fan_in, fan_out)), np.zeros(fan_out)

    if cfg.kind == "logistic":
        w, b = layer(cfg.input_dim, cfg.n_outputs)
        return {"W": w, "b": b}
    w1, b1 = layer(cfg.input_dim, cfg.hidden_units)
    w2, b2 = layer(cfg.hidden_units, cfg.n_outputs)
    return {"W1": w1, "b1": b1, "W2": w2, "b2": b2}


def _logits(params: dict[str, np.ndarray], x: np.ndarray):
    if "W" in params:
        return x @ params["W"] + params["b"], None
    pre = x @ params["W1"] + params["b1"]
    hidden = np.maximum(pre, 0.0)
    return hidden @ params["W2"] + params["b2"], (pre, hidden)


def _softplus(z):
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z):
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def probabilities(params: dict[str, np.ndarray], x: np.ndarray) -> np.ndarray:
    """Class probabilities, shape ``(n, n_classes)``."""
    z, _ = _logits(params, np.atleast_2d(x))
    if z.shape[1] == 1:
        p1 = _sigmoid(z[:, 0])
        return np.stack([1.0 - p1, p1], axis=1)
    return _softmax(z)


def loss_and_grads(
    params: dict[str, np.ndarray], x: np.ndarray, y: np.ndarray, l2: float = 0.0
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy plus ``l2/2 * sum(W**2)`` over weight matrices, and its gradient.

    Biases are not penalised.
    """
    n = x.shape[0]
    z, cache = _logits(params, x)
    if z.shape[1] == 1:
        target = y.astype(np.float64)
        loss = float(np.mean(_softplus(z[:, 0]) - target * z[:, 0]))
        dz = ((_sigmoid(z[:, 0]) - target) / n)[:, None]
    else:
        shifted = z - z.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1))
        loss = float(np.mean(log_norm - shifted[np.arange(n), y]))
        dz = _softmax(z)
        dz[np.arange(n), y] -= 1.0
        dz /= n

    if cache is None:
        grads = {"W": x.T @ dz, "b": dz.sum(axis=0)}
    else:
        pre, hidden = cache
        d_hidden = (dz @ params["W2"].T) * (pre > 0)
        grads = {
            "W1": x.T @ d_hidden,
            "b1": d_hidden.sum(axis=0),
            "W2": hidden.T @ dz,
            "b2": dz.sum(axis=0),
        }
    if l2:
        for name in grads:
            if name.startswith("W"):
                loss += 0.5 * l2 * float(np.sum(params[name] ** 2))
                grads[name] = grads[name] + l2 * params[name]
    return loss, grads


# ---------------------------------------------------------------------------
# Optimisation


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k in sorted(params):
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            params[k] = params[k] - self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs without relative improvement."""

    def __init__(self, lr: float, patience: int = 10, factor: float = 0.5, min_lr: float = 1e-6, threshold: float = 1e-4):
        self.lr = lr
        self.patience = patience
        self.factor = factor
        self.min_lr = min_lr
        self.threshold = threshold
        self.best = math.inf
        self.bad_epochs = 0

    def step(self, loss: float) -> float:
        if loss < self.best * (1.0 - self.threshold):
            self.best = loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.bad_epochs = 0
        return self.lr


# ---------------------------------------------------------------------------
# Model object


@dataclass(frozen=True)
class Prediction:
    probabilities: tuple[float, ...]
    label: str
    index: int


def _encode(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "dtype": "float64", "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).astype(np.float64)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    config: ModelConfig
    params: dict[str, np.ndarray]
    normalization: NormContext | None = None
    train_log: tuple[dict, ...] = field(default_factory=tuple)
    input_mean: np.ndarray | None = None
    input_scale: np.ndarray | None = None

    def __post_init__(self):
        arrays = dict(self.params)
        if self.input_mean is not None:
            arrays["input_mean"], arrays["input_scale"] = self.input_mean, self.input_scale
        for name, w in arrays.items():
            if not np.all(np.isfinite(w)):
                raise TrainingError(f"parameter {name} contains non-finite values")

    @property
    def class_order(self) -> tuple[str, ...]:
        return self.config.classes

    def features(self, specs: Sequence[Spectrum]) -> np.ndarray:
        x = np.stack([np.asarray(s.bins, dtype=np.float64).reshape(-1) for s in specs])
        if x.shape[1] != self.config.input_dim:
            raise DataError(
                f"spectrum has {x.shape[1]} inputs, model expects {self.config.input_dim}"
            )
        return x

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.config.input_dim:
            raise DataError(f"input has {x.shape[1]} features, model expects {self.config.input_dim}")
        return probabilities(self.params, self.standardize(x))

    def standardize(self, x: np.ndarray) -> np.ndarray:
        if self.input_mean is None:
            return x
        return (x - self.input_mean) / self.input_scale

    def to_json(self) -> str:
        doc = {
            "format": MODEL_FORMAT,
            "config": self.config.to_dict(),
            "class_order": list(self.class_order),
            "normalization": None if self.normalization is None else self.normalization.to_dict(),
            "params": {k: _encode(v) for k, v in sorted(self.params.items())},
            "input_mean": None if self.input_mean is None else _encode(self.input_mean),
            "input_scale": None if self.input_scale is None else _encode(self.input_scale),
            "train_log": list(self.train_log),
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        doc = json.loads(text)
        if doc.get("format") != MODEL_FORMAT:
            raise DataError(f"not a model document (format={doc.get('format')!r})")
        cfg = ModelConfig(**{**doc["config"], "classes": tuple(doc["config"]["classes"])})
        norm = doc.get("normalization")
        return cls(
            cfg,
            {k: _decode(v) for k, v in doc["params"].items()},
            None if norm is None else NormContext.from_dict(norm),
            tuple(doc.get("train_log", ())),
            None if doc.get("input_mean") is None else _decode(doc["input_mean"]),
            None if doc.get("input_scale") is None else _decode(doc["input_scale"]),
        )


def predict(model: TrainedModel, spec: Spectrum) -> Prediction:
    """Classify one spectrum; ties go to the lowest class index."""
    probs = model.predict_proba(model.features([spec]))[0]
    return _prediction(model, probs)


def predict_many(model: TrainedModel, specs: Sequence[Spectrum]) -> list[Prediction]:
    if not specs:
        return []
    probs = model.predict_proba(model.features(specs))
    return [_prediction(model, p) for p in probs]


def _prediction(model: TrainedModel, probs: np.ndarray) -> Prediction:
    idx = int(np.argmax(probs))  # first maximum wins
    return Prediction(tuple(float(p) for p in probs), model.class_order[idx], idx)


# ---------------------------------------------------------------------------
# Training


def _to_arrays(data: Sequence[LabeledSpectrum], cfg: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    index = {c: i for i, c in enumerate(cfg.classes)}
    rows, labels = [], []
    for s in data:
        if s.label not in index:
            raise DataError(f"label {s.label!r} is not among the model classes {cfg.classes}")
        row = np.asarray(s.spectrum.bins, dtype=np.float64).reshape(-1)
        if row.shape[0] != cfg.input_dim:
            raise DataError(f"spectrum has {row.shape[0]} inputs, model expects {cfg.input_dim}")
        rows.append(row)
        labels.append(index[s.label])
    return np.stack(rows), np.asarray(labels, dtype=np.int64)


def train(
    dataset_provider: Callable[[int], Sequence[LabeledSpectrum]],
    cfg: ModelConfig,
    normalization: NormContext | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainedModel:
    """Fit a classifier on per-epoch datasets from ``dataset_provider(epoch)``.

    Each epoch: shuffle with the stream ``(seed, "shuffle", epoch)``, run
    mini-batch Adam, log the mean loss and the macro-F1 of the updated
    model on that epoch's data, then step the plateau scheduler.

    Raises:
        DataError: a sample has the wrong dimension or an unknown label.
        TrainingError: the loss became non-finite.
    """
    params = init_params(cfg)
    opt = Adam(cfg.learning_rate)
    sched = PlateauScheduler(cfg.learning_rate, cfg.plateau_patience, cfg.plateau_factor, cfg.min_lr)
    log: list[dict] = []
    mean = scale = None

    for epoch in range(cfg.max_epochs):
        data = dataset_provider(epoch)
        if not data:
            raise DataError(f"epoch {epoch}: dataset provider returned no samples")
        x, y = _to_arrays(data, cfg)
        if cfg.standardize:
            if mean is None:
                ref = x[y == 0] if np.any(y == 0) else x
                mean = ref.mean(axis=0)
                scale = np.maximum(ref.std(axis=0), SCALE_FLOOR)
            x = (x - mean) / scale
        order = rng_mod.stream(cfg.seed, "shuffle", epoch).permutation(len(y))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, grads = loss_and_grads(params, x[batch], y[batch], cfg.l2)
            if not math.isfinite(loss):
                raise TrainingError(f"epoch {epoch}: non-finite loss")
            total += loss * len(batch)
            opt.step(params, grads)
        epoch_loss = total / len(y)
        preds = np.argmax(probabilities(params, x), axis=1)
        f1 = classification_metrics(
            [cfg.classes[i] for i in y], [cfg.classes[i] for i in preds], cfg.classes
        ).macro_f1
        counts = np.bincount(y, minlength=len(cfg.classes))
        entry = {
            "epoch": epoch,
            "loss": epoch_loss,
            "macro_f1": f1,
            "lr": opt.lr,
            "class_counts": {c: int(counts[i]) for i, c in enumerate(cfg.classes)},
        }
        log.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
        opt.lr = sched.step(epoch_loss)

    return TrainedModel(cfg, params, normalization, tuple(log), mean, scale)


def evaluate(model: TrainedModel, data: Sequence[LabeledSpectrum]) -> Metrics:
    if not data:
        raise ValueError("evaluate needs at least one sample")
    for s in data:
        if s.label not in model.class_order:
            raise DataError(f"label {s.label!r} is not among the model classes {model.class_order}")
    preds = predict_many(model, [s.spectrum for s in data])
    return classification_metrics([s.label for s in data], [p.label for p in preds], model.class_order)


# ---------------------------------------------------------------------------
# Gradient verification


@dataclass(frozen=True)
class GradCheckReport:
    max_relative_error: float
    per_parameter: dict[str, float]
    checked: int
    tolerance: float
    passed: bool


def gradient_check(
    cfg: ModelConfig,
    sample_count: int,
    tolerance: float,
    seed: int = 0,
    step: float = 1e-5,
    max_coords: int = 400,
) -> GradCheckReport:
    """Compare backprop gradients with central finite differences.

    Uses random weights (biases included), uniform inputs in ``[0, 1]`` and
    random labels. The relative error per coordinate is
    ``|g - g_fd| / max(|g|, |g_fd|, 1e-6)``; at most ``max_coords``
    coordinates per parameter are probed. Passes iff the maximum is strictly
    below ``tolerance``.
    """
    if sample_count < 1:
        raise ValueError(f"sample_count must be >= 1, got {sample_count}")
    gen = rng_mod.stream(seed, "gradcheck")
    params = {k: v + gen.normal(0.0, 0.1, v.shape) for k, v in init_params(cfg).items()}
    x = gen.uniform(0.0, 1.0, (sample_count, cfg.input_dim))
    y = gen.integers(0, len(cfg.classes), sample_count)
    _, grads = loss_and_grads(params, x, y, cfg.l2)

    per_param: dict[str, float] = {}
    checked = 0
    for name in sorted(params):
        flat = params[name].reshape(-1)
        coords = np.arange(flat.size)
        if flat.size > max_coords:
            coords = np.sort(gen.choice(flat.size, max_coords, replace=False))
        worst = 0.0
        for c in coords:
            orig = flat[c]
            flat[c] = orig + step
            plus, _ = loss_and_grads(params, x, y, cfg.l2)
            flat[c] = orig - step
            minus, _ = loss_and_grads(params, x, y, cfg.l2)
            flat[c] = orig
            numeric = (plus - minus) / (2.0 * step)
            analytic = grads[name].reshape(-1)[c]
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
            worst = max(worst, rel)
            checked += 1
        per_param[name] = worst
    max_rel = max(per_param.values())
    return GradCheckReport(max_rel, per_param, checked, tolerance, bool(max_rel < tolerance))
