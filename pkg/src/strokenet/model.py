"""Two-stream attention 3D CNN with late fusion.

Each branch stacks five conv -> ReLU -> attention -> ceil-pool levels,
then a hidden linear with ReLU and a class linear with softmax, so every
branch emits a probability row per clip. Two-stream mode fuses the two
per-branch probability vectors (summed, weighted, or learned-concat) and
renormalizes with a final softmax.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import tten
from .optim import Parameter
from .tensor import (
    Tensor, add, concat, conv3d, linear, maxpool3d, mul, relu, reshape,
    scale, sigmoid, softmax,
)

SUMMED = "summed"
WEIGHTED = "weighted"
CONCAT = "concat"

CKPT_MAGIC = b"TTCK"
CKPT_VERSION = 1


@dataclass
class ModelConfig:
    """Architecture hyperparameters.

    pool_sizes are declared per level in (W,H,T) order (pool_order="wht");
    input_size is (W,H,T,channels). Tensors themselves are N x C x T x H x W.
    """
    filters: tuple = (32, 64, 128, 256, 512)
    kernel: tuple = (3, 3, 3)
    pool_sizes: tuple = ((4, 3, 2), (4, 3, 2), (2, 2, 2), (2, 2, 2), (2, 2, 2))
    input_size: tuple = (120, 120, 100, 3)
    hidden_dim: int = 512
    num_classes: int = 21
    fusion: str = SUMMED
    fusion_weights: tuple = (1.0, 1.0)
    streams: int = 2
    pool_order: str = "wht"
    bias_init: float = 0.0

    def __post_init__(self):
        self.filters = tuple(int(f) for f in self.filters)
        self.kernel = tuple(int(k) for k in self.kernel)
        self.pool_sizes = tuple(tuple(int(p) for p in ps) for ps in self.pool_sizes)
        self.input_size = tuple(int(v) for v in self.input_size)
        self.fusion_weights = tuple(float(w) for w in self.fusion_weights)
        if len(self.filters) != len(self.pool_sizes):
            raise ValueError(
                f"pool_sizes: need one pool per conv level, got {len(self.pool_sizes)} "
                f"pools for {len(self.filters)} filters")
        if any(f < 1 for f in self.filters):
            raise ValueError(f"filters: all counts must be >= 1, got {self.filters}")
        if len(self.kernel) != 3 or any(k < 1 or k % 2 == 0 for k in self.kernel):
            raise ValueError(f"kernel: extents must be odd and positive, got {self.kernel}")
        if any(len(p) != 3 or min(p) < 1 for p in self.pool_sizes):
            raise ValueError(f"pool_sizes: extents must be >= 1, got {self.pool_sizes}")
        if len(self.input_size) != 4 or min(self.input_size) < 1:
            raise ValueError(f"input_size: need positive (W,H,T,C), got {self.input_size}")
        if self.hidden_dim < 1:
            raise ValueError(f"hidden_dim: must be >= 1, got {self.hidden_dim}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes: must be >= 2, got {self.num_classes}")
        if self.fusion not in (SUMMED, WEIGHTED, CONCAT):
            raise ValueError(f"fusion: unknown mode {self.fusion!r}")
        if self.streams not in (1, 2):
            raise ValueError(f"streams: must be 1 or 2, got {self.streams}")
        if self.pool_order not in ("wht", "thw"):
            raise ValueError(f"pool_order: must be 'wht' or 'thw', got {self.pool_order!r}")
        self.bias_init = float(self.bias_init)
        if not math.isfinite(self.bias_init) or self.bias_init < 0:
            raise ValueError(f"bias_init: must be finite and >= 0, got {self.bias_init}")

    def pool_thw(self, level: int) -> tuple:
        p = self.pool_sizes[level]
        return (p[2], p[1], p[0]) if self.pool_order == "wht" else tuple(p)

    def level_extents(self) -> list:
        """(T,H,W) after each pooling level, ceil-mode."""
        w, h, t, _ = self.input_size
        extents = []
        for i in range(len(self.filters)):
            pt, ph, pw = self.pool_thw(i)
            t, h, w = -(-t // pt), -(-h // ph), -(-w // pw)
            extents.append((t, h, w))
        return extents

    def feature_length(self) -> int:
        t, h, w = self.level_extents()[-1]
        return self.filters[-1] * t * h * w

    def to_dict(self) -> dict:
        return {
            "filters": list(self.filters),
            "kernel": list(self.kernel),
            "pool_sizes": [list(p) for p in self.pool_sizes],
            "input_size": list(self.input_size),
            "hidden_dim": self.hidden_dim,
            "num_classes": self.num_classes,
            "fusion": self.fusion,
            "fusion_weights": list(self.fusion_weights),
            "streams": self.streams,
            "pool_order": self.pool_order,
            "bias_init": self.bias_init,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def tiny_config(**overrides) -> ModelConfig:
    """A configuration small enough for finite-difference sweeps."""
    base = dict(filters=(2, 2, 2, 2, 2),
                pool_sizes=((2, 2, 2),) * 5,
                input_size=(6, 6, 4, 3),
                hidden_dim=3,
                num_classes=2,
                streams=2)
    base.update(overrides)
    return ModelConfig(**base)


@dataclass
class AttentionLevel:
    reduce_w: Parameter
    reduce_b: Parameter
    expand_w: Parameter
    expand_b: Parameter


@dataclass
class ConvLevel:
    weight: Parameter
    bias: Parameter
    attention: AttentionLevel


@dataclass
class Branch:
    levels: list
    fc1_w: Parameter
    fc1_b: Parameter
    fc2_w: Parameter
    fc2_b: Parameter


@dataclass
class TwoStreamNet:
    config: ModelConfig
    branch_a: Branch
    branch_b: Branch | None = None
    fusion_w: Parameter | None = None
    fusion_b: Parameter | None = None
    _params: list = field(default_factory=list)

    def parameters(self) -> list:
        return self._params

    def zero_grad(self) -> None:
        for p in self._params:
            p.value.zero_grad()

    def forward(self, clip_a: Tensor, clip_b: Tensor | None = None) -> Tensor:
        return model_forward(self, clip_a, clip_b)


def _uniform(rng, fan_in: int, shape, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def _bias(cfg, size, dtype) -> np.ndarray:
    return np.full(size, cfg.bias_init, dtype=dtype)


def init_model(cfg: ModelConfig, seed: int, dtype=np.float32) -> TwoStreamNet:
    """Deterministic init: weights uniform in +-1/sqrt(fan_in) from a seeded
    PRNG (drawn in a fixed parameter order), biases at cfg.bias_init.
    Identical (cfg, seed, dtype) arguments give a bitwise-identical model.
    """
    rng = np.random.default_rng(seed)
    params: list[Parameter] = []

    def make(name, array):
        p = Parameter(name, Tensor(array))
        params.append(p)
        return p

    def build_branch(prefix: str) -> Branch:
        k_t, k_h, k_w = cfg.kernel[2], cfg.kernel[1], cfg.kernel[0]
        levels = []
        c_in = cfg.input_size[3]
        for i, c_out in enumerate(cfg.filters):
            fan = c_in * k_t * k_h * k_w
            w = make(f"{prefix}.conv{i}.weight",
                     _uniform(rng, fan, (c_out, c_in, k_t, k_h, k_w), dtype))
            b = make(f"{prefix}.conv{i}.bias", _bias(cfg, c_out, dtype))
            c_red = max(c_out // 8, 1)
            rw = make(f"{prefix}.attn{i}.reduce.weight",
                      _uniform(rng, c_out, (c_red, c_out, 1, 1, 1), dtype))
            rb = make(f"{prefix}.attn{i}.reduce.bias", _bias(cfg, c_red, dtype))
            ew = make(f"{prefix}.attn{i}.expand.weight",
                      _uniform(rng, c_red, (c_out, c_red, 1, 1, 1), dtype))
            eb = make(f"{prefix}.attn{i}.expand.bias", _bias(cfg, c_out, dtype))
            levels.append(ConvLevel(w, b, AttentionLevel(rw, rb, ew, eb)))
            c_in = c_out
        feat = cfg.feature_length()
        fc1_w = make(f"{prefix}.fc1.weight",
                     _uniform(rng, feat, (cfg.hidden_dim, feat), dtype))
        fc1_b = make(f"{prefix}.fc1.bias", _bias(cfg, cfg.hidden_dim, dtype))
        fc2_w = make(f"{prefix}.fc2.weight",
                     _uniform(rng, cfg.hidden_dim, (cfg.num_classes, cfg.hidden_dim), dtype))
        fc2_b = make(f"{prefix}.fc2.bias", _bias(cfg, cfg.num_classes, dtype))
        return Branch(levels, fc1_w, fc1_b, fc2_w, fc2_b)

    branch_a = build_branch("branch_a")
    branch_b = build_branch("branch_b") if cfg.streams == 2 else None
    fusion_w = fusion_b = None
    if cfg.streams == 2 and cfg.fusion == CONCAT:
        k = cfg.num_classes
        fusion_w = make("fusion.weight", _uniform(rng, 2 * k, (k, 2 * k), dtype))
        fusion_b = make("fusion.bias", _bias(cfg, k, dtype))
    return TwoStreamNet(cfg, branch_a, branch_b, fusion_w, fusion_b, params)


def attention_forward(level: AttentionLevel, x: Tensor) -> Tensor:
    """Residual sigmoid gate: Y = x + x * sigmoid(expand(relu(reduce(x))))."""
    if x.shape[1] != level.reduce_w.value.shape[1]:
        raise ValueError(
            f"attention: input has {x.shape[1]} channels, block expects "
            f"{level.reduce_w.value.shape[1]}")
    squeezed = relu(conv3d(x, level.reduce_w.value, level.reduce_b.value, (0, 0, 0)))
    m = sigmoid(conv3d(squeezed, level.expand_w.value, level.expand_b.value, (0, 0, 0)))
    return add(x, mul(x, m))


def branch_forward(net: TwoStreamNet, branch: Branch, clip: Tensor) -> Tensor:
    """conv -> ReLU -> attention -> pool per level, then the two-linear
    softmax head; output rows are class probabilities."""
    cfg = net.config
    w, h, t, c = cfg.input_size
    expected = (clip.shape[0], c, t, h, w)
    if clip.shape != expected:
        raise ValueError(f"branch input must be {expected} (N,C,T,H,W), got {clip.shape}")
    pad = tuple(k // 2 for k in (cfg.kernel[2], cfg.kernel[1], cfg.kernel[0]))
    out = clip
    for i, level in enumerate(branch.levels):
        out = relu(conv3d(out, level.weight.value, level.bias.value, pad))
        out = attention_forward(level.attention, out)
        out = maxpool3d(out, cfg.pool_thw(i))
    flat = reshape(out, (clip.shape[0], cfg.feature_length()))
    hidden = relu(linear(flat, branch.fc1_w.value, branch.fc1_b.value))
    return softmax(linear(hidden, branch.fc2_w.value, branch.fc2_b.value))


def fuse_outputs(p_a: Tensor, p_b: Tensor, mode: str,
                 weights: tuple = (1.0, 1.0),
                 fusion_w: Tensor | None = None,
                 fusion_b: Tensor | None = None) -> Tensor:
    """Fuse two per-stream probability rows into final class probabilities."""
    if p_a.shape != p_b.shape:
        raise ValueError(f"fusion: stream shapes differ, {p_a.shape} vs {p_b.shape}")
    if mode == SUMMED:
        return softmax(add(p_a, p_b))
    if mode == WEIGHTED:
        w1, w2 = weights
        return softmax(add(scale(p_a, w1), scale(p_b, w2)))
    if mode == CONCAT:
        if fusion_w is None or fusion_b is None:
            raise ValueError("concat fusion needs its learned 2K->K map")
        return softmax(linear(concat(p_a, p_b, axis=1), fusion_w, fusion_b))
    raise ValueError(f"unknown fusion mode {mode!r}")


def model_forward(net: TwoStreamNet, clip_a: Tensor,
                  clip_b: Tensor | None = None) -> Tensor:
    cfg = net.config
    probs_a = branch_forward(net, net.branch_a, clip_a)
    if cfg.streams == 1:
        return probs_a
    if clip_b is None:
        raise ValueError("two-stream model needs a clip for the second branch")
    probs_b = branch_forward(net, net.branch_b, clip_b)
    return fuse_outputs(
        probs_a, probs_b, cfg.fusion, cfg.fusion_weights,
        None if net.fusion_w is None else net.fusion_w.value,
        None if net.fusion_b is None else net.fusion_b.value)


# ---------------------------------------------------------------------------
# checkpoints: TTCK header (config JSON) + named TTEN records per parameter

def save_checkpoint(net: TwoStreamNet, path) -> None:
    buf = io.BytesIO()
    buf.write(CKPT_MAGIC)
    buf.write(bytes([CKPT_VERSION]))
    blob = json.dumps(net.config.to_dict(), sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    params = net.parameters()
    buf.write(struct.pack("<I", len(params)))
    for p in params:
        name = p.name.encode("utf-8")
        buf.write(struct.pack("<H", len(name)))
        buf.write(name)
        tten.write_stream(buf, p.value.data)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def _read_exact(fh, count, what):
    raw = fh.read(count)
    if len(raw) < count:
        raise ValueError(f"checkpoint truncated while reading {what}")
    return raw


def load_checkpoint(path, expected_config: ModelConfig | None = None) -> TwoStreamNet:
    """Rebuild a bitwise-identical model. With expected_config given, any
    differing configuration field is rejected by name."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != CKPT_MAGIC:
            raise ValueError(f"checkpoint: bad magic {magic!r}")
        version = _read_exact(fh, 1, "version")[0]
        if version != CKPT_VERSION:
            raise ValueError(f"checkpoint: unsupported version {version}")
        (json_len,) = struct.unpack("<I", _read_exact(fh, 4, "header length"))
        cfg_dict = json.loads(_read_exact(fh, json_len, "config").decode("utf-8"))
        cfg = ModelConfig.from_dict(cfg_dict)
        if expected_config is not None:
            want = expected_config.to_dict()
            got = cfg.to_dict()
            for key in want:
                if want[key] != got[key]:
                    raise CheckpointMismatch(
                        f"config field {key!r}: checkpoint has {got[key]!r}, "
                        f"run config wants {want[key]!r}")
        (count,) = struct.unpack("<I", _read_exact(fh, 4, "parameter count"))
        stored: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, "name length"))
            name = _read_exact(fh, name_len, "name").decode("utf-8")
            stored[name] = tten.read_stream(fh)

    net = init_model(cfg, seed=0)
    expected_names = [p.name for p in net.parameters()]
    missing = [n for n in expected_names if n not in stored]
    extra = [n for n in stored if n not in expected_names]
    if missing or extra:
        raise ValueError(f"checkpoint parameters do not match config: "
                         f"missing {missing}, unexpected {extra}")
    for p in net.parameters():
        arr = stored[p.name]
        if arr.shape != p.value.data.shape:
            raise ValueError(f"checkpoint parameter {p.name}: shape {arr.shape} "
                             f"does not match config shape {p.value.data.shape}")
        p.value.data = arr
        p.velocity = np.zeros_like(arr)
    return net


class CheckpointMismatch(ValueError):
    """Raised when a checkpoint's config disagrees with the run config."""
