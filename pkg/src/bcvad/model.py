"""Tiny convolutional-recurrent VAD models: definition, inference, quantization.

Per 10 ms feature frame the network applies a stack of strided 1-D
convolutions along the frequency axis (zero 'same' padding, ReLU), flattens
channels x bins, advances one GRU step and maps the hidden state through a
ReLU hidden layer to a sigmoid output.

GRU convention (pinned so hand-computed tests are stable):

    z = sigmoid(Wz x + Uz h + bz)          update gate
    r = sigmoid(Wr x + Ur h + br)          reset gate
    n = tanh(Wn x + r * (Un h) + bn)       candidate, reset on the hidden term
    h' = z * h + (1 - z) * n

Gates are stored stacked as [z, r, n] along the first axis of ``gru.wx``,
``gru.wh`` and ``gru.b``.  All inference is strictly causal; the hidden state
is zero at stream start.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import expit as sigmoid

from . import _gru as gru_scan
from .errors import ConfigError, FormatError, InvalidDataError

WEIGHT_FILE_MAGIC = b"BVADWT01"
WEIGHT_FILE_VERSION = 1

_DTYPE_TAGS = {"float32": 0, "int8": 1}
_TAG_DTYPES = {v: k for k, v in _DTYPE_TAGS.items()}


@dataclass(frozen=True)
class ConvSpec:
    kernel: int
    stride: int
    channels: int


@dataclass(frozen=True)
class ArchSpec:
    """Layer plan of one detector."""

    name: str
    input_bins: int
    conv: tuple[ConvSpec, ...]
    gru_units: int
    fc_hidden: int

    def conv_out_lens(self) -> list[int]:
        """Frequency-axis length after each conv layer ('same' padding)."""
        lens = []
        length = self.input_bins
        for spec in self.conv:
            length = -(-length // spec.stride)  # ceil division
            lens.append(length)
        return lens

    @property
    def gru_input_dim(self) -> int:
        if not self.conv:
            return self.input_bins
        return self.conv[-1].channels * self.conv_out_lens()[-1]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "input_bins": self.input_bins,
            "conv": [[c.kernel, c.stride, c.channels] for c in self.conv],
            "gru_units": self.gru_units,
            "fc_hidden": self.fc_hidden,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchSpec":
        return cls(
            name=d["name"],
            input_bins=int(d["input_bins"]),
            conv=tuple(ConvSpec(int(k), int(s), int(c)) for k, s, c in d["conv"]),
            gru_units=int(d["gru_units"]),
            fc_hidden=int(d["fc_hidden"]),
        )


BC_ARCH = ArchSpec("bc", 32, (ConvSpec(3, 2, 8), ConvSpec(3, 2, 8)), 16, 16)
AIR_ARCH = ArchSpec("air", 64, (ConvSpec(3, 2, 16), ConvSpec(3, 2, 16)), 56, 32)

ARCHS = {"bc": BC_ARCH, "air": AIR_ARCH}


@dataclass
class VadModel:
    """Weights of one detector, float or dequantized-int8 form."""

    arch: ArchSpec
    params: dict[str, np.ndarray]
    precision: str = "float32"
    qparams: dict[str, np.ndarray] | None = None
    scales: dict[str, float] | None = None


@dataclass
class RecurrentState:
    """GRU hidden vector carried between frames of one stream."""

    h: np.ndarray

    @classmethod
    def zero(cls, model: VadModel) -> "RecurrentState":
        dtype = model.params["gru.wh"].dtype
        return cls(np.zeros(model.arch.gru_units, dtype=dtype))


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def build_model(arch="bc", seed: int = 0, dtype=np.float32) -> VadModel:
    """Initialize a detector with Glorot-uniform weights and zero biases."""
    if isinstance(arch, str):
        if arch not in ARCHS:
            raise ConfigError(f"unknown architecture tag {arch!r}, expected one of {list(ARCHS)}")
        arch = ARCHS[arch]
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    in_ch = 1
    for i, spec in enumerate(arch.conv):
        fan_in = in_ch * spec.kernel
        fan_out = spec.channels * spec.kernel
        params[f"conv{i}.w"] = _glorot(rng, (spec.channels, in_ch, spec.kernel), fan_in, fan_out)
        params[f"conv{i}.b"] = np.zeros(spec.channels)
        in_ch = spec.channels
    d_in, h = arch.gru_input_dim, arch.gru_units
    params["gru.wx"] = np.concatenate([_glorot(rng, (h, d_in), d_in, h) for _ in range(3)])
    params["gru.wh"] = np.concatenate([_glorot(rng, (h, h), h, h) for _ in range(3)])
    params["gru.b"] = np.zeros(3 * h)
    params["fc1.w"] = _glorot(rng, (arch.fc_hidden, h), h, arch.fc_hidden)
    params["fc1.b"] = np.zeros(arch.fc_hidden)
    params["fc2.w"] = _glorot(rng, (1, arch.fc_hidden), arch.fc_hidden, 1)
    params["fc2.b"] = np.zeros(1)
    return VadModel(arch, {k: v.astype(dtype) for k, v in params.items()})


def count_params(model: VadModel) -> int:
    """Total number of scalar parameters."""
    return int(sum(v.size for v in model.params.values()))


def _same_padding(length: int, kernel: int, stride: int) -> tuple[int, int, int]:
    out_len = -(-length // stride)
    pad_total = max((out_len - 1) * stride + kernel - length, 0)
    pad_left = pad_total // 2
    return out_len, pad_left, pad_total - pad_left


def conv_forward(model: VadModel, frames: np.ndarray, want_cache: bool = False):
    """Conv stack over the frequency axis for a batch of frames (N, bins).

    Implemented as gather-to-columns plus one matrix product per layer, so
    every frame of every sequence is processed in a single BLAS call.
    """
    if frames.shape[-1] != model.arch.input_bins:
        raise ConfigError(
            f"expected {model.arch.input_bins} feature bins, got {frames.shape[-1]}"
        )
    x = frames[:, None, :]  # (N, channels=1, bins)
    cache = []
    for i, spec in enumerate(model.arch.conv):
        w = model.params[f"conv{i}.w"]
        b = model.params[f"conv{i}.b"]
        n, c_in, length = x.shape
        out_len, pad_left, pad_right = _same_padding(length, spec.kernel, spec.stride)
        xpad = np.zeros((n, c_in, length + pad_left + pad_right), dtype=x.dtype)
        xpad[:, :, pad_left : pad_left + length] = x
        taps = np.empty((n, out_len, c_in, spec.kernel), dtype=x.dtype)
        for k in range(spec.kernel):
            taps[:, :, :, k] = xpad[:, :, k : k + spec.stride * out_len : spec.stride].transpose(
                0, 2, 1
            )
        taps2d = taps.reshape(n * out_len, c_in * spec.kernel)
        pre2d = taps2d @ w.reshape(spec.channels, -1).T + b
        if want_cache:
            cache.append((taps2d, pre2d, (length, out_len, pad_left, pad_right)))
        x = np.ascontiguousarray(
            np.maximum(pre2d, 0.0).reshape(n, out_len, spec.channels).transpose(0, 2, 1)
        )
    flat = x.reshape(x.shape[0], -1)
    return (flat, cache) if want_cache else flat


def gru_step(model: VadModel, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Advance the GRU one frame; ``x`` is the flattened conv output."""
    hu = model.arch.gru_units
    gx = x @ model.params["gru.wx"].T + model.params["gru.b"]
    gh = h @ model.params["gru.wh"].T
    z = sigmoid(gx[..., :hu] + gh[..., :hu])
    r = sigmoid(gx[..., hu : 2 * hu] + gh[..., hu : 2 * hu])
    n = np.tanh(gx[..., 2 * hu :] + r * gh[..., 2 * hu :])
    return z * h + (1.0 - z) * n


def head_logits(model: VadModel, h: np.ndarray) -> np.ndarray:
    """FC-ReLU-FC output logit(s) for hidden state(s)."""
    f1 = np.maximum(h @ model.params["fc1.w"].T + model.params["fc1.b"], 0.0)
    return f1 @ model.params["fc2.w"].T + model.params["fc2.b"]


def forward_step(
    model: VadModel, frame: np.ndarray, state: RecurrentState
) -> tuple[float, RecurrentState]:
    """One streaming step: feature frame in, speech probability out."""
    frame = np.asarray(frame)
    if frame.ndim != 1:
        raise ConfigError(f"forward_step expects one frame, got shape {frame.shape}")
    flat = conv_forward(model, frame[None, :])
    h = gru_step(model, flat[0], state.h)
    prob = float(sigmoid(head_logits(model, h)[0]))
    return prob, RecurrentState(h)


def forward_sequence(model: VadModel, features: np.ndarray, want_cache: bool = False):
    """Causal inference over a whole sequence.

    Accepts (T, bins) or (B, T, bins); returns probabilities of matching
    leading shape.  With ``want_cache`` the intermediate activations needed
    for backpropagation are returned as well (training path).
    """
    features = np.asarray(features)
    squeeze = features.ndim == 2
    if squeeze:
        features = features[None, :, :]
    if features.ndim != 3:
        raise ConfigError(f"expected (T, bins) or (B, T, bins), got {features.shape}")
    batch, time, _ = features.shape
    frames2d = features.reshape(batch * time, -1)
    if want_cache:
        flat, conv_cache = conv_forward(model, frames2d, want_cache=True)
    else:
        flat, conv_cache = conv_forward(model, frames2d), None
    x_seq = flat.reshape(batch, time, -1)

    gx = x_seq @ model.params["gru.wx"].T + model.params["gru.b"]
    h_all, gate_cache = gru_scan.forward_scan(gx, model.params["gru.wh"], want_cache)

    hidden = h_all[:, 1:]
    a1 = hidden @ model.params["fc1.w"].T + model.params["fc1.b"]
    f1 = np.maximum(a1, 0.0)
    logits = (f1 @ model.params["fc2.w"].T + model.params["fc2.b"])[..., 0]
    probs = sigmoid(logits)
    if not want_cache:
        return probs[0] if squeeze else probs
    cache = {
        "x_seq": x_seq,
        "conv": conv_cache,
        "h_all": h_all,
        "gates": gate_cache,
        "a1": a1,
        "f1": f1,
        "logits": logits,
        "probs": probs,
    }
    return (probs[0] if squeeze else probs), cache


def quantize_weights(model: VadModel) -> VadModel:
    """Per-tensor symmetric int8 quantization of all weights.

    scale = max|w| / 127 (1.0 for an all-zero tensor); values are rounded
    half-to-even and clamped to [-127, 127].  Inference runs on the
    dequantized float weights; activations stay float.
    """
    qparams: dict[str, np.ndarray] = {}
    scales: dict[str, float] = {}
    dequant: dict[str, np.ndarray] = {}
    for name, w in model.params.items():
        if not np.all(np.isfinite(w)):
            raise InvalidDataError(f"tensor {name} contains non-finite weights")
        max_abs = float(np.max(np.abs(w))) if w.size else 0.0
        scale = max_abs / 127.0 if max_abs > 0.0 else 1.0
        q = np.clip(np.round(w.astype(np.float64) / scale), -127, 127).astype(np.int8)
        qparams[name] = q
        scales[name] = scale
        dequant[name] = (q.astype(np.float64) * scale).astype(w.dtype)
    return VadModel(model.arch, dequant, "int8", qparams, scales)


def save_model(path, model: VadModel) -> None:
    """Write weights as a self-describing little-endian binary file."""
    arch_blob = json.dumps(model.arch.to_dict()).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(WEIGHT_FILE_MAGIC)
        fh.write(struct.pack("<I", WEIGHT_FILE_VERSION))
        fh.write(struct.pack("<I", len(arch_blob)))
        fh.write(arch_blob)
        fh.write(struct.pack("<I", len(model.params)))
        for name in model.params:
            data: np.ndarray
            if model.precision == "int8":
                tag, scale = _DTYPE_TAGS["int8"], model.scales[name]
                data = model.qparams[name].astype("<i1")
            else:
                tag, scale = _DTYPE_TAGS["float32"], 1.0
                data = model.params[name].astype("<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<Bd", tag, scale))
            fh.write(struct.pack("<B", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def load_model(path, dtype=np.float32) -> VadModel:
    """Read a weight file written by :func:`save_model`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        if blob[:8] != WEIGHT_FILE_MAGIC:
            raise FormatError(f"bad magic in weight file {path}")
        offset = 8
        (version,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if version != WEIGHT_FILE_VERSION:
            raise FormatError(f"unsupported weight file version {version}")
        (arch_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        arch = ArchSpec.from_dict(json.loads(blob[offset : offset + arch_len]))
        offset += arch_len
        (n_tensors,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        params: dict[str, np.ndarray] = {}
        qparams: dict[str, np.ndarray] = {}
        scales: dict[str, float] = {}
        precision = "float32"
        for _ in range(n_tensors):
            (name_len,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            name = blob[offset : offset + name_len].decode("utf-8")
            offset += name_len
            tag, scale = struct.unpack_from("<Bd", blob, offset)
            offset += 9
            (ndim,) = struct.unpack_from("<B", blob, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", blob, offset)
            offset += 4 * ndim
            count = int(np.prod(shape)) if ndim else 1
            if _TAG_DTYPES.get(tag) == "int8":
                q = np.frombuffer(blob, dtype="<i1", count=count, offset=offset).reshape(shape)
                offset += count
                qparams[name] = q.copy()
                scales[name] = scale
                params[name] = (q.astype(np.float64) * scale).astype(dtype)
                precision = "int8"
            elif _TAG_DTYPES.get(tag) == "float32":
                w = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(shape)
                offset += 4 * count
                params[name] = w.astype(dtype)
            else:
                raise FormatError(f"unknown dtype tag {tag} in weight file {path}")
    except (struct.error, ValueError, IndexError, KeyError, json.JSONDecodeError) as exc:
        raise FormatError(f"truncated or corrupt weight file {path}: {exc}") from exc
    if precision == "int8":
        return VadModel(arch, params, "int8", qparams, scales)
    return VadModel(arch, params, "float32")
