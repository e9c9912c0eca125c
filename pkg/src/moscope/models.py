"""MOS predictors: the low-capacity embedding CNN and the frame-scoring CNN.

Both map one utterance to a MOS estimate. The frame model additionally emits a
score per frame position and its utterance score is the mean of those, which
lets the loss supervise every frame with the utterance label.
"""
from __future__ import annotations

import itertools
import logging
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .corpus import CorpusManifest
from .features import FeatureMatrix, Normalizer, StftConfig, apply_normalizer, fit_normalizer
from .metrics import PredictionSet, UndefinedMetricError, evaluate
from .nn import (Adam, BatchNorm, Conv1D, Dense, Dropout, EarlyStopConfig, EarlyStopping,
                 GlobalAvgPool, MaxPool1D, OptimizerConfig, ReLU, Sequential, ShapeError)

log = logging.getLogger(__name__)

ARCHITECTURES = ("low_capacity", "frame")

FILTERS_GRID = (16, 32, 64, 128)
DROPOUT_GRID = (0.1, 0.2, 0.3)
L2_GRID = (0.0001, 0.001, 0.01, 0.1)
BATCH_SIZE_GRID = (16, 64, 128)
BATCHNORM_GRID = (False, True)


class TrainingError(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LowCapacityCNNConfig:
    filters: int = 16
    kernel: int = 10
    pool: int = 3
    dropout_rate: float = 0.2
    l2: float = 0.0001
    input_batchnorm: bool = False
    batch_size: int = 1
    seed: int = 0
    normalize: bool = True
    alpha: float = 0.0
    # per-config override of the optimizer's learning rate
    learning_rate: Optional[float] = None

    def __post_init__(self):
        _check_common(self)
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")


@dataclass(frozen=True)
class FrameModelConfig:
    filters: int = 32
    kernel: int = 10
    pool: int = 3
    convs_before_pool: int = 2
    convs_after_pool: int = 2
    l2: float = 0.0
    alpha: float = 1.0
    batch_size: int = 16
    seed: int = 0
    normalize: bool = False
    learning_rate: Optional[float] = None

    def __post_init__(self):
        _check_common(self)
        if self.convs_before_pool < 0 or self.convs_after_pool < 0:
            raise ValueError("conv counts must be >= 0")
        if self.convs_before_pool + self.convs_after_pool < 1:
            raise ValueError("the frame model needs at least one convolution")


def _check_common(cfg):
    if cfg.filters < 1 or cfg.kernel < 1 or cfg.pool < 1:
        raise ValueError("filters, kernel and pool must be >= 1")
    if cfg.l2 < 0:
        raise ValueError("l2 must be >= 0")
    if cfg.batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if not 0.0 <= cfg.alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {cfg.alpha}")
    if cfg.learning_rate is not None and cfg.learning_rate < 0:
        raise ValueError("learning_rate must be >= 0")


def published_grid(**overrides) -> list[LowCapacityCNNConfig]:
    """Every combination of the published hyperparameter ranges."""
    grid = []
    for bn, l2, dr, nf, bs in itertools.product(BATCHNORM_GRID, L2_GRID, DROPOUT_GRID,
                                                 FILTERS_GRID, BATCH_SIZE_GRID):
        grid.append(LowCapacityCNNConfig(filters=nf, dropout_rate=dr, l2=l2, input_batchnorm=bn,
                                         batch_size=bs, **overrides))
    return grid


# --------------------------------------------------------------------------
# model

class MOSModel:
    """A network plus everything needed to turn features into a MOS estimate."""

    def __init__(self, architecture, config, net: Sequential, input_shape,
                 normalizer: Optional[Normalizer] = None, stft: Optional[StftConfig] = None,
                 scale=(1.0, 10.0)):
        self.architecture = architecture
        self.config = config
        self.net = net
        # (rows, cols) for embeddings; (None, n_bins) for spectrograms
        self.input_shape = tuple(input_shape)
        self.normalizer = normalizer
        self.stft = stft
        self.scale = tuple(float(s) for s in scale)
        self.history: list[dict] = []

    @property
    def kind(self):
        return "embedding" if self.architecture == "low_capacity" else "spectrogram"

    @property
    def receptive_field(self):
        """Shortest input (positions) that survives the layer stack."""
        t = 1
        while not self._fits(t):
            t += 1
        return t

    def _fits(self, t):
        for layer in self.net.layers:
            if isinstance(layer, Conv1D) and t < layer.kernel:
                return False
            if isinstance(layer, MaxPool1D) and t < layer.pool:
                return False
            t = layer.output_length(t)
        return t >= 1

    # the (utterance, frames) pair is both the forward output and the backward input
    def forward(self, x, train=False):
        out = self.net.forward(x, train=train)
        if self.architecture == "frame":
            frames = out[:, :, 0]
            self._frames_len = frames.shape[1]
            return frames.mean(axis=1), frames
        return out[:, 0], None

    def backward(self, grad):
        d_utt, d_frames = grad
        if self.architecture == "frame":
            t = self._frames_len
            g = d_utt[:, None] / t
            if d_frames is not None:
                g = g + d_frames
            return self.net.backward(g[:, :, None])
        return self.net.backward(d_utt[:, None])

    def params(self):
        return self.net.params()

    def grads(self):
        return self.net.grads()

    def penalty(self):
        return self.net.penalty()

    def loss_fn(self, alpha=None):
        alpha = self.config.alpha if alpha is None else alpha

        def loss(output, target):
            return batch_dual_loss(output[0], output[1], target, alpha)

        return loss

    def check_features(self, m: FeatureMatrix):
        if m.kind != self.kind:
            raise ShapeError(f"{self.architecture} model expects {self.kind} features, got {m.kind}")
        rows, cols = self.input_shape
        if m.cols != cols:
            raise ShapeError(f"expected {cols} feature columns, got {m.cols}")
        if rows is not None and m.rows != rows:
            raise ShapeError(f"expected {rows} feature rows, got {m.rows}")
        if rows is None and not self._fits(m.rows):
            raise ShapeError(f"{m.rows} frames is shorter than the receptive field "
                             f"({self.receptive_field})")

    def prepare(self, m: FeatureMatrix) -> np.ndarray:
        self.check_features(m)
        if self.normalizer is not None:
            m = apply_normalizer(self.normalizer, m)
        return m.data

    def __repr__(self):
        return f"MOSModel({self.architecture}, {self.net!r})"


TrainedModel = MOSModel


def build_low_capacity_cnn(cfg: LowCapacityCNNConfig, input_dim: int) -> MOSModel:
    """Conv-Conv-MaxPool-Conv-Conv-GlobalAvgPool-Dropout-Dense on a D x 1 embedding."""
    rng = np.random.default_rng(cfg.seed)
    layers = []
    if cfg.input_batchnorm:
        layers.append(BatchNorm(1))
    ch = 1
    for i in range(4):
        if i == 2:
            layers.append(MaxPool1D(cfg.pool))
        layers += [Conv1D(ch, cfg.filters, cfg.kernel, l2=cfg.l2, rng=rng), ReLU()]
        ch = cfg.filters
    layers += [GlobalAvgPool(), Dropout(cfg.dropout_rate, rng=np.random.default_rng(cfg.seed + 1)),
               Dense(cfg.filters, 1, rng=rng)]
    model = MOSModel("low_capacity", cfg, Sequential(layers), (input_dim, 1))
    if not model._fits(input_dim):
        raise ShapeError(f"input_dim {input_dim} is too small for kernel {cfg.kernel} / "
                         f"pool {cfg.pool} (needs >= {model.receptive_field})")
    if cfg.alpha:
        log.warning("alpha=%s is ignored by the low-capacity model (no frame scores)", cfg.alpha)
    return model


def build_frame_model(cfg: FrameModelConfig, n_bins: int,
                      stft: Optional[StftConfig] = None) -> MOSModel:
    """Convolutions over time with frequency bins as channels, then a per-frame Dense(1)."""
    rng = np.random.default_rng(cfg.seed)
    layers = []
    ch = n_bins
    for _ in range(cfg.convs_before_pool):
        layers += [Conv1D(ch, cfg.filters, cfg.kernel, l2=cfg.l2, rng=rng), ReLU()]
        ch = cfg.filters
    layers.append(MaxPool1D(cfg.pool))
    for _ in range(cfg.convs_after_pool):
        layers += [Conv1D(ch, cfg.filters, cfg.kernel, l2=cfg.l2, rng=rng), ReLU()]
        ch = cfg.filters
    layers.append(Dense(ch, 1, rng=rng))
    return MOSModel("frame", cfg, Sequential(layers), (None, n_bins), stft=stft)


# --------------------------------------------------------------------------
# loss

def dual_loss(utt_pred: float, frame_preds: Sequence[float], target: float, alpha: float) -> float:
    """Squared utterance error plus ``alpha`` times the mean squared frame error."""
    utt_term = (utt_pred - target) ** 2
    if alpha == 0 or frame_preds is None or len(frame_preds) == 0:
        return utt_term
    f = np.asarray(frame_preds, dtype=np.float64) - target
    return utt_term + alpha * float(np.mean(f * f))


def batch_dual_loss(utt, frames, target, alpha):
    """Mean dual loss over a batch and its gradient w.r.t. (utt, frames)."""
    target = np.asarray(target, dtype=np.float64)
    n = utt.shape[0]
    du = utt - target
    loss = float(np.mean(du * du))
    d_utt = 2.0 * du / n
    d_frames = None
    if alpha and frames is not None:
        df = frames - target[:, None]
        loss += alpha * float(np.mean(np.mean(df * df, axis=1)))
        d_frames = alpha * 2.0 * df / (n * frames.shape[1])
    return loss, (d_utt, d_frames)


# --------------------------------------------------------------------------
# training

@dataclass
class Dataset:
    ids: list
    features: list  # FeatureMatrix per utterance
    targets: np.ndarray

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if not (len(self.ids) == len(self.features) == len(self.targets)):
            raise ValueError("ids, features and targets must have equal length")

    def __len__(self):
        return len(self.ids)

    @classmethod
    def from_manifest(cls, manifest: CorpusManifest, features: Mapping[str, FeatureMatrix],
                      split: str) -> "Dataset":
        recs = [r for r in manifest.split(split) if r.mos is not None and r.utt_id in features]
        return cls([r.utt_id for r in recs], [features[r.utt_id] for r in recs],
                   [r.mos for r in recs])


def _as_f32(a):
    return a.astype(np.float32).astype(np.float64)


def _batches(xs, order, batch_size):
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        shapes = {xs[i].shape for i in idx}
        if len(shapes) == 1:
            yield [idx]
        else:
            # ragged batch: one forward/backward per sample, gradients summed
            yield [[i] for i in idx]


def _predict_arrays(model, xs):
    """Eval-mode utterance scores, batching equal-shaped inputs."""
    out = np.empty(len(xs))
    by_shape: dict = {}
    for i, x in enumerate(xs):
        by_shape.setdefault(x.shape, []).append(i)
    for shape in sorted(by_shape):
        idx = by_shape[shape]
        for start in range(0, len(idx), 64):
            chunk = idx[start:start + 64]
            utt, _ = model.forward(np.stack([xs[i] for i in chunk]), train=False)
            out[chunk] = utt
    return out


def train(model: MOSModel, train_set: Dataset, val_set: Dataset,
          opt: OptimizerConfig = OptimizerConfig(), stop: EarlyStopConfig = EarlyStopConfig(),
          ) -> MOSModel:
    """Adam training with early stopping on validation MSE.

    The best-epoch weights are restored and rounded to float32 precision, so
    the returned model predicts exactly what its saved file will. The output
    bias starts at the mean training target. ``model.history`` receives one
    dict per epoch.
    """
    cfg = model.config
    if len(train_set) == 0 or len(val_set) == 0:
        raise TrainingError("train and validation sets must be non-empty")
    overlap = set(train_set.ids) & set(val_set.ids)
    if overlap:
        raise TrainingError(f"{len(overlap)} utterance(s) in both train and val, "
                            f"e.g. {sorted(overlap)[0]!r}")
    if cfg.learning_rate is not None:
        opt = replace(opt, learning_rate=cfg.learning_rate)

    for m in train_set.features + val_set.features:
        model.check_features(m)
    if cfg.normalize:
        n = fit_normalizer(train_set.features)
        model.normalizer = Normalizer(n.kind, _as_f32(n.mean), _as_f32(n.sd))
    xs = [model.prepare(m) for m in train_set.features]
    val_xs = [model.prepare(m) for m in val_set.features]
    ys = train_set.targets

    head = model.net.layers[-1]
    head.params[1][:] = ys.mean()

    rng = np.random.default_rng(cfg.seed)
    model.net.reseed_dropout(np.random.default_rng([cfg.seed, 1]))
    params = model.params()
    adam = Adam(params, opt)
    loss_fn = model.loss_fn()
    stopper = EarlyStopping(stop)
    best = model.net.snapshot()
    model.history = []

    for epoch in range(1, stop.max_epochs + 1):
        order = rng.permutation(len(xs))
        losses = []
        for groups in _batches(xs, order, cfg.batch_size):
            total = sum(len(g) for g in groups)
            acc = None
            batch_loss = 0.0
            for g in groups:
                out = model.forward(np.stack([xs[i] for i in g]), train=True)
                value, grad = loss_fn(out, ys[g])
                model.backward(grad)
                w = len(g) / total
                batch_loss += w * value
                grads = model.grads()
                if acc is None:
                    acc = [w * a for a in grads]
                else:
                    for a, b in zip(acc, grads):
                        a += w * b
            batch_loss += model.penalty()
            if not np.isfinite(batch_loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            adam.step(acc)
            losses.append(batch_loss)
        val_pred = _predict_arrays(model, val_xs)
        val_mse = float(np.mean((val_pred - val_set.targets) ** 2))
        if not np.isfinite(val_mse):
            raise TrainingError(f"non-finite validation MSE at epoch {epoch}")
        model.history.append({"epoch": epoch, "train_loss": float(np.mean(losses)),
                              "val_mse": val_mse})
        log.info("epoch %d train_loss %.5f val_mse %.5f", epoch, np.mean(losses), val_mse)
        if stopper.update(epoch, val_mse):
            best = model.net.snapshot()
        if stopper.should_stop:
            log.info("early stop at epoch %d (best epoch %d)", epoch, stopper.best_epoch)
            break
    model.net.restore([[_as_f32(a) for a in arrays] for arrays in best])
    model.best_epoch = stopper.best_epoch
    return model


def predict(model: MOSModel, features: FeatureMatrix) -> float:
    """Raw (unclamped) MOS estimate in eval mode."""
    x = model.prepare(features)
    utt, _ = model.forward(x[None], train=False)
    return float(utt[0])


def predict_many(model: MOSModel, features: Mapping[str, FeatureMatrix]) -> PredictionSet:
    ids = sorted(features)
    xs = [model.prepare(features[i]) for i in ids]
    return PredictionSet(dict(zip(ids, _predict_arrays(model, xs).tolist())))


# --------------------------------------------------------------------------
# grid search

@dataclass(frozen=True)
class LeaderboardEntry:
    config_index: int
    config: LowCapacityCNNConfig
    speaker_srcc: Optional[float]
    val_mse: float
    epochs: int

    def sort_key(self):
        srcc = -np.inf if self.speaker_srcc is None else self.speaker_srcc
        return (-srcc, self.val_mse, self.config_index)


LEADERBOARD_COLUMNS = ("rank", "config_index", "filters", "dropout_rate", "l2", "input_batchnorm",
                       "batch_size", "learning_rate", "seed", "speaker_srcc", "val_mse", "epochs")


def leaderboard_to_csv(entries: Sequence[LeaderboardEntry]) -> str:
    lines = [",".join(LEADERBOARD_COLUMNS)]
    for rank, e in enumerate(entries, start=1):
        c = e.config
        lr = "" if c.learning_rate is None else repr(c.learning_rate)
        srcc = "" if e.speaker_srcc is None else repr(e.speaker_srcc)
        lines.append(",".join(map(str, (rank, e.config_index, c.filters, c.dropout_rate, c.l2,
                                         int(c.input_batchnorm), c.batch_size, lr, c.seed, srcc,
                                         repr(e.val_mse), e.epochs))))
    return "\n".join(lines) + "\n"


def _grid_worker(args):
    index, cfg, train_set, val_set, val_manifest, opt, stop, input_dim = args
    model = build_low_capacity_cnn(cfg, input_dim)
    train(model, train_set, val_set, opt, stop)
    preds = PredictionSet(dict(zip(val_set.ids,
                                   _predict_arrays(model, [model.prepare(m)
                                                           for m in val_set.features]).tolist())))
    try:
        srcc = evaluate(preds, val_manifest, "speaker").srcc
    except UndefinedMetricError:
        srcc = None
    val_mse = float(np.mean((np.array([preds[i] for i in val_set.ids]) - val_set.targets) ** 2))
    return LeaderboardEntry(index, cfg, srcc, val_mse, len(model.history)), model


def grid_search(grid: Sequence[LowCapacityCNNConfig], features: Mapping[str, FeatureMatrix],
                manifest: CorpusManifest, opt: OptimizerConfig = OptimizerConfig(),
                stop: EarlyStopConfig = EarlyStopConfig(), workers: int = 1,
                offset_seeds: bool = True):
    """Train every config; rank by speaker-level SRCC on the validation split.

    Ties fall back to lower validation MSE, then grid order. With
    ``offset_seeds`` each config trains with ``seed + index``. Returns the
    winning model and the sorted leaderboard.
    """
    if not grid:
        raise ValueError("empty grid")
    train_set = Dataset.from_manifest(manifest, features, "train")
    val_set = Dataset.from_manifest(manifest, features, "val")
    val_manifest = CorpusManifest([r for r in manifest.records if r.utt_id in set(val_set.ids)],
                                  manifest.scale_min, manifest.scale_max)
    speakers = {r.speaker_id for r in val_manifest.records}
    if len(speakers) < 2:
        raise ValueError(f"validation split has {len(speakers)} labeled speaker(s); need >= 2")
    dims = {m.rows for m in train_set.features}
    if len(dims) != 1:
        raise ValueError(f"embeddings have inconsistent dimensions {sorted(dims)}")
    input_dim = dims.pop()
    jobs = []
    for i, cfg in enumerate(grid):
        if offset_seeds:
            cfg = replace(cfg, seed=cfg.seed + i)
        jobs.append((i, cfg, train_set, val_set, val_manifest, opt, stop, input_dim))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_grid_worker, jobs))
    else:
        results = [_grid_worker(j) for j in jobs]
    results.sort(key=lambda r: r[0].sort_key())
    for entry, _ in results:
        log.info("config %d: speaker SRCC %s, val MSE %.4f", entry.config_index,
                 entry.speaker_srcc, entry.val_mse)
    return results[0][1], [entry for entry, _ in results]


# --------------------------------------------------------------------------
# serialization

MODEL_MAGIC = b"MOSR"
MODEL_VERSION = 1


def _config_text(model: MOSModel) -> str:
    items = {f"model.{k}": v for k, v in asdict(model.config).items()}
    rows, cols = model.input_shape
    items["input.rows"] = "" if rows is None else rows
    items["input.cols"] = cols
    items["scale.min"] = model.scale[0]
    items["scale.max"] = model.scale[1]
    if model.stft is not None:
        for k, v in asdict(model.stft).items():
            items[f"stft.{k}"] = v
    return "".join(f"{k}={'' if v is None else v}\n" for k, v in items.items())


def _parse_value(text, typ):
    if text == "":
        return None
    if typ is bool or typ == "bool":
        return text == "True"
    if typ is int or typ == "int":
        return int(text)
    if typ is str or typ == "str":
        return text
    return float(text)


def _config_from_items(cls, items):
    kwargs = {}
    for f in fields(cls):
        key = f"model.{f.name}"
        if key in items:
            typ = f.type.replace("Optional[", "").rstrip("]") if isinstance(f.type, str) else f.type
            kwargs[f.name] = _parse_value(items[key], typ)
    return cls(**kwargs)


def model_to_bytes(model: MOSModel) -> bytes:
    parts = [MODEL_MAGIC, struct.pack("<IB", MODEL_VERSION, ARCHITECTURES.index(model.architecture))]
    cfg = _config_text(model).encode("utf-8")
    parts.append(struct.pack("<I", len(cfg)) + cfg)
    n = model.normalizer
    if n is None:
        parts.append(b"\x00")
    else:
        parts.append(b"\x01" + struct.pack("<I", n.mean.size)
                     + n.mean.astype("<f4").tobytes() + n.sd.astype("<f4").tobytes())
    for i, layer in enumerate(model.net.layers):
        arrays = layer.params + layer.state()
        if not arrays:
            continue
        flat = np.concatenate([a.ravel() for a in arrays]).astype("<f4")
        parts.append(struct.pack("<IQ", i, flat.size) + flat.tobytes())
    return b"".join(parts)


def save_model(path, model: MOSModel) -> None:
    Path(path).write_bytes(model_to_bytes(model))


class _Reader:
    def __init__(self, buf, source):
        self.buf, self.pos, self.source = buf, 0, source

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise ModelFormatError(f"{self.source}: truncated file while reading {what}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, what):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size, what))


def model_from_bytes(buf: bytes, source="<bytes>") -> MOSModel:
    r = _Reader(buf, source)
    magic = r.take(4, "magic")
    if magic != MODEL_MAGIC:
        raise ModelFormatError(f"{source}: bad magic {magic!r}")
    version, arch = r.unpack("<IB", "header")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{source}: unsupported model version {version}")
    if arch >= len(ARCHITECTURES):
        raise ModelFormatError(f"{source}: unknown architecture code {arch}")
    architecture = ARCHITECTURES[arch]
    (cfg_len,) = r.unpack("<I", "config length")
    try:
        text = r.take(cfg_len, "config").decode("utf-8")
    except UnicodeDecodeError:
        raise ModelFormatError(f"{source}: config block is not UTF-8") from None
    items = dict(line.split("=", 1) for line in text.splitlines() if line)
    try:
        rows = _parse_value(items["input.rows"], int)
        cols = int(items["input.cols"])
        scale = (float(items["scale.min"]), float(items["scale.max"]))
        if architecture == "low_capacity":
            cfg = _config_from_items(LowCapacityCNNConfig, items)
            model = build_low_capacity_cnn(cfg, rows)
        else:
            cfg = _config_from_items(FrameModelConfig, items)
            stft = None
            if "stft.fft_size" in items:
                stft = StftConfig(int(items["stft.fft_size"]), int(items["stft.hop"]),
                                  items["stft.window"], items["stft.log_magnitude"] == "True")
            model = build_frame_model(cfg, cols, stft)
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"{source}: bad config block ({exc})") from None
    model.scale = scale
    (present,) = r.unpack("<B", "normalizer flag")
    if present:
        (ncols,) = r.unpack("<I", "normalizer size")
        mean = np.frombuffer(r.take(4 * ncols, "normalizer"), "<f4").astype(np.float64)
        sd = np.frombuffer(r.take(4 * ncols, "normalizer"), "<f4").astype(np.float64)
        model.normalizer = Normalizer(model.kind, mean, sd)
    for i, layer in enumerate(model.net.layers):
        arrays = layer.params + layer.state()
        if not arrays:
            continue
        idx, count = r.unpack("<IQ", f"layer {i} header")
        expected = sum(a.size for a in arrays)
        if idx != i or count != expected:
            raise ModelFormatError(f"{source}: layer block ({idx}, {count}) does not match "
                                   f"layer {i} with {expected} values")
        flat = np.frombuffer(r.take(4 * count, f"layer {i} weights"), "<f4").astype(np.float64)
        pos = 0
        for a in arrays:
            a[...] = flat[pos:pos + a.size].reshape(a.shape)
            pos += a.size
    if r.pos != len(buf):
        raise ModelFormatError(f"{source}: {len(buf) - r.pos} trailing bytes")
    return model


def load_model(path) -> MOSModel:
    return model_from_bytes(Path(path).read_bytes(), source=path)


def default_workers() -> int:
    env = os.environ.get("MOSCOPE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1
