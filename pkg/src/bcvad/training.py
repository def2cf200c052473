"""Exact-gradient training: BCE loss, backpropagation through time, Adam.

Gradients are computed analytically through the whole conv-GRU-FC stack over
full sequences (no truncation) with a fixed accumulation order, so two runs
from the same seed produce bit-identical histories.  The loss is evaluated in
logit form, log(1+e^o) - z*o, which equals binary cross entropy without
needing probability clamps and keeps finite-difference checks exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _gru as gru_scan
from .errors import ConfigError, EmptyInputError
from .model import VadModel, forward_sequence

PRED_CLAMP = 1e-7


def bce_loss(targets: np.ndarray, predictions: np.ndarray) -> float:
    """Mean binary cross entropy between soft targets and predictions.

    Predictions are clamped to [1e-7, 1 - 1e-7] so exact 0/1 stay finite.
    """
    targets = np.asarray(targets, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    if targets.shape != predictions.shape:
        raise ConfigError(f"shape mismatch: targets {targets.shape} vs {predictions.shape}")
    if targets.size == 0:
        raise EmptyInputError("cannot compute BCE of an empty sample")
    for name, values in (("targets", targets), ("predictions", predictions)):
        if values.min() < 0.0 or values.max() > 1.0:
            raise ConfigError(f"{name} must lie in [0, 1]")
    p = np.clip(predictions, PRED_CLAMP, 1.0 - PRED_CLAMP)
    return float(-np.mean(targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p)))


def _logit_bce(logits: np.ndarray, targets: np.ndarray) -> float:
    # log(1 + e^o) - z*o == BCE(z, sigmoid(o)), numerically stable
    return float(np.mean(np.logaddexp(0.0, logits) - targets * logits))


def compute_gradients(
    model: VadModel, features: np.ndarray, targets: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact gradients of mean BCE over a batch of equal-length clips.

    ``features`` is (B, T, bins) or (T, bins); ``targets`` matches its leading
    shape.  The recurrent state starts at zero for every sequence.
    """
    features = np.asarray(features)
    targets = np.asarray(targets)
    if features.ndim == 2:
        features = features[None]
        targets = targets[None]
    if targets.shape != features.shape[:2]:
        raise ConfigError(
            f"targets shape {targets.shape} does not match features {features.shape[:2]}"
        )
    probs, cache = forward_sequence(model, features, want_cache=True)
    logits = cache["logits"]
    loss = _logit_bce(logits, targets)

    arch = model.arch
    hu = arch.gru_units
    batch, time = probs.shape
    grads = {name: np.zeros_like(w) for name, w in model.params.items()}

    # Head: no recurrence, backprop all frames at once.
    dlogit = (probs - targets) / (batch * time)
    f1, a1 = cache["f1"], cache["a1"]
    hidden2d = cache["h_all"][:, 1:].reshape(batch * time, hu)
    n_hidden = f1.shape[-1]
    dlogit_flat = dlogit.reshape(-1)
    grads["fc2.w"][0] = f1.reshape(-1, n_hidden).T @ dlogit_flat
    grads["fc2.b"][0] = dlogit_flat.sum()
    da1 = dlogit[..., None] * model.params["fc2.w"][0] * (a1 > 0)
    da1_2d = da1.reshape(-1, n_hidden)
    grads["fc1.w"][:] = da1_2d.T @ hidden2d
    grads["fc1.b"][:] = da1_2d.sum(axis=0)
    dh_head = da1 @ model.params["fc1.w"]

    # GRU: reverse scan produces per-gate pre-activation gradients; the
    # weight accumulations collapse into two matrix products afterwards.
    h_all = cache["h_all"]
    da_x, da_h = gru_scan.backward_scan(dh_head, model.params["gru.wh"], cache["gates"], h_all)

    x2d = cache["x_seq"].reshape(batch * time, -1)
    da_x_2d = da_x.reshape(batch * time, 3 * hu)
    grads["gru.wx"][:] = da_x_2d.T @ x2d
    grads["gru.wh"][:] = da_h.reshape(batch * time, 3 * hu).T @ h_all[:, :-1].reshape(-1, hu)
    grads["gru.b"][:] = da_x_2d.sum(axis=0)
    dx = da_x_2d @ model.params["gru.wx"]

    # Conv stack: frames are independent, backprop them all in one batch.
    out_lens = arch.conv_out_lens()
    n_frames = batch * time
    dout = dx.reshape(n_frames, arch.conv[-1].channels, out_lens[-1]) if arch.conv else None
    for i in range(len(arch.conv) - 1, -1, -1):
        spec = arch.conv[i]
        taps2d, pre2d, (length, out_len, pad_left, pad_right) = cache["conv"][i]
        dpre2d = dout.transpose(0, 2, 1).reshape(n_frames * out_len, spec.channels) * (pre2d > 0)
        grads[f"conv{i}.w"][:] = (dpre2d.T @ taps2d).reshape(grads[f"conv{i}.w"].shape)
        grads[f"conv{i}.b"][:] = dpre2d.sum(axis=0)
        if i == 0:
            break  # gradient wrt the input features is not needed
        w2d = model.params[f"conv{i}.w"].reshape(spec.channels, -1)
        c_in = arch.conv[i - 1].channels
        dtaps = (dpre2d @ w2d).reshape(n_frames, out_len, c_in, spec.kernel)
        dxpad = np.zeros((n_frames, c_in, length + pad_left + pad_right), dtype=dtaps.dtype)
        for k in range(spec.kernel):
            dxpad[:, :, k : k + spec.stride * out_len : spec.stride] += dtaps[
                :, :, :, k
            ].transpose(0, 2, 1)
        dout = dxpad[:, :, pad_left : pad_left + length]

    return loss, grads


@dataclass
class AdamState:
    """First/second moment accumulators with shared step counter."""

    t: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def init(cls, model: VadModel) -> "AdamState":
        return cls(
            0,
            {k: np.zeros_like(w) for k, w in model.params.items()},
            {k: np.zeros_like(w) for k, w in model.params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new weights and state."""
    t = state.t + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, w in params.items():
        g = grads[name]
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        new_params[name] = w - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(t, new_m, new_v)


@dataclass(frozen=True)
class TrainSchedule:
    """Optimization schedule: step counts, batch size and patience rules."""

    lr_init: float = 0.001
    steps_per_epoch: int = 2000
    batch_size: int = 8
    lr_halving_patience: int = 3  # consecutive non-improving epochs before halving
    early_stop_patience: int = 5  # consecutive non-improving epochs before stopping
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int | None = None

    def __post_init__(self):
        if min(self.lr_init, self.steps_per_epoch, self.batch_size) <= 0:
            raise ConfigError("schedule constants must be positive")
        if self.lr_halving_patience <= 0 or self.early_stop_patience <= 0:
            raise ConfigError("patience values must be positive")


# Small-corpus schedule for development machines and CI.
DESK_SCHEDULE = TrainSchedule(steps_per_epoch=200, max_epochs=6)


@dataclass
class PatienceTracker:
    """Counts consecutive non-improving epochs and fires halve/stop events.

    An improvement is any decrease of the monitored loss.  The halve event
    fires once per bad streak, when the streak length reaches the halving
    patience; the stop event fires when it reaches the early-stop patience.
    """

    halving_patience: int
    stop_patience: int
    best: float = np.inf
    bad: int = 0

    def update(self, loss: float) -> tuple[bool, bool, bool]:
        """Feed one epoch's loss; returns (improved, halve_now, stop_now)."""
        if loss < self.best:
            self.best = loss
            self.bad = 0
            return True, False, False
        self.bad += 1
        return False, self.bad == self.halving_patience, self.bad >= self.stop_patience


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    test_loss: float
    lr: float


@dataclass
class SplitData:
    """Materialized training data: per clip (features (T,bins), targets (T,))."""

    train: list[tuple[np.ndarray, np.ndarray]]
    test: list[tuple[np.ndarray, np.ndarray]]


def evaluate_split_loss(model: VadModel, clips, batch_size: int = 8) -> float:
    """Mean BCE over every frame of a list of equal-length clips."""
    if not clips:
        raise ConfigError("empty split")
    total, count = 0.0, 0
    for start in range(0, len(clips), batch_size):
        chunk = clips[start : start + batch_size]
        feats = np.stack([c[0] for c in chunk])
        targets = np.stack([c[1] for c in chunk])
        probs, cache = forward_sequence(model, feats, want_cache=True)
        total += _logit_bce(cache["logits"], targets) * targets.size
        count += targets.size
    return total / count


def train(
    model: VadModel,
    data: SplitData,
    schedule: TrainSchedule | None = None,
    seed: int = 0,
    log=None,
) -> tuple[VadModel, list[EpochStats]]:
    """Train until the early-stop rule fires, returning the best-test weights.

    Each epoch draws ``steps_per_epoch`` batches from the train split and then
    measures test BCE.  The learning rate halves after ``lr_halving_patience``
    consecutive epochs without test improvement; training stops after
    ``early_stop_patience`` of them (or at ``max_epochs``).
    """
    schedule = schedule or TrainSchedule()
    if not data.train or not data.test:
        raise ConfigError("both train and test splits must be non-empty")
    lengths = {c[0].shape[0] for c in data.train} | {c[0].shape[0] for c in data.test}
    if len(lengths) != 1:
        raise ConfigError(f"clips must share one length, got {sorted(lengths)}")

    rng = np.random.default_rng(seed)
    params = dict(model.params)
    adam = AdamState.init(model)
    lr = schedule.lr_init
    patience = PatienceTracker(schedule.lr_halving_patience, schedule.early_stop_patience)
    best_params = dict(params)
    history: list[EpochStats] = []
    epoch = 0
    while schedule.max_epochs is None or epoch < schedule.max_epochs:
        epoch += 1
        losses = np.empty(schedule.steps_per_epoch)
        for step in range(schedule.steps_per_epoch):
            idx = rng.integers(0, len(data.train), size=schedule.batch_size)
            feats = np.stack([data.train[i][0] for i in idx])
            targets = np.stack([data.train[i][1] for i in idx])
            model.params = params
            loss, grads = compute_gradients(model, feats, targets)
            params, adam = adam_step(
                params, grads, adam, lr, schedule.beta1, schedule.beta2, schedule.eps
            )
            losses[step] = loss
        model.params = params
        test_loss = evaluate_split_loss(model, data.test, schedule.batch_size)
        history.append(EpochStats(epoch, float(losses.mean()), test_loss, lr))
        if log is not None:
            log(history[-1])
        improved, halve, stop = patience.update(test_loss)
        if improved:
            best_params = dict(params)
        if halve:
            lr *= 0.5
        if stop:
            break
    model.params = best_params
    return model, history


def save_history(path, history: list[EpochStats]) -> None:
    """One epoch per line: epoch, train loss, test loss, learning rate."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("epoch,train_loss,test_loss,lr\n")
        for h in history:
            fh.write(f"{h.epoch},{h.train_loss:.6f},{h.test_loss:.6f},{h.lr:.8f}\n")


def load_history(path) -> list[EpochStats]:
    history = []
    with open(path, "r", encoding="ascii") as fh:
        next(fh)  # header
        for line in fh:
            e, tr, te, lr = line.strip().split(",")
            history.append(EpochStats(int(e), float(tr), float(te), float(lr)))
    return history
