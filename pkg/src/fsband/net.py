"""Dual-branch convolutional patch classifier.

Each input map goes through its own stack of 3x3 stride-2 convolution stages
(ReLU, zero pad 1); the branches share no parameter storage. From every
branch two globally average-pooled feature vectors are tapped, one after the
first stage and one after the last, concatenated across branches, and pushed
through a 128-wide fully-connected stage and a single output unit with a
sigmoid. Training minimizes binary cross entropy with Adam.

Everything is plain numpy with hand-written backpropagation: forward and
backward are pure functions of the parameter arrays, runs are bit-reproducible
for a fixed seed, and analytic gradients can be checked against finite
differences without any framework in the way.

Weights file layout ("FSBD" container): magic ``FSBD``, u16 LE format
version, u32 LE config length, config JSON, each parameter tensor as raw
little-endian float32 in declaration order (branches first, then head),
u32 LE CRC32 of everything before it.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .errors import (
    ChecksumMismatchError,
    DegenerateDatasetError,
    ModelFormatError,
    ShapeMismatchError,
    VersionMismatchError,
)

MAGIC = b"FSBD"
FORMAT_VERSION = 1
PROB_CLAMP = 1e-7

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Fixed stream tags so the split and the epoch shuffling are decoupled,
# reproducible, and shared between training and external evaluation.
_SPLIT_STREAM = 0xA5
_SHUFFLE_STREAM = 0x5E


@dataclass(frozen=True)
class NetConfig:
    branch_channels: tuple[int, ...] = (16, 32, 64, 128)
    early_tap_channels: int = 16
    fused_dim: int = 128
    seed: int = 0
    n_branches: int = 2
    input_side: int = 64

    def __post_init__(self):
        object.__setattr__(self, "branch_channels", tuple(int(c) for c in self.branch_channels))
        if not self.branch_channels or any(c < 1 for c in self.branch_channels):
            raise ValueError("branch_channels must be a non-empty list of counts >= 1")
        if self.early_tap_channels != self.branch_channels[0]:
            raise ValueError("early_tap_channels must equal the first stage's channel count")
        if self.fused_dim != 128:
            raise ValueError("fused_dim is fixed at 128")
        if self.n_branches < 1:
            raise ValueError("n_branches must be >= 1")
        if self.input_side < 2 ** len(self.branch_channels):
            raise ValueError("input_side too small for the number of stride-2 stages")

    @property
    def concat_dim(self) -> int:
        return self.n_branches * (self.branch_channels[0] + self.branch_channels[-1])

    def to_dict(self) -> dict:
        return {
            "branch_channels": list(self.branch_channels),
            "early_tap_channels": self.early_tap_channels,
            "fused_dim": self.fused_dim,
            "seed": self.seed,
            "n_branches": self.n_branches,
            "input_side": self.input_side,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        return cls(
            branch_channels=tuple(d["branch_channels"]),
            early_tap_channels=d["early_tap_channels"],
            fused_dim=d["fused_dim"],
            seed=d["seed"],
            n_branches=d["n_branches"],
            input_side=d["input_side"],
        )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 10
    split_ratio: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if not (0.0 < self.split_ratio < 1.0):
            raise ValueError("split_ratio must be in (0, 1)")


@dataclass
class Model:
    """Parameter container. ``branches[i]`` holds [W, b] per stage for branch
    i; ``head`` holds [W1, b1, W2, b2]. Branch storage is fully disjoint."""

    config: NetConfig
    branches: list[list[np.ndarray]]
    head: list[np.ndarray]

    @property
    def branch_hf(self) -> list[np.ndarray]:
        return self.branches[0]

    @property
    def branch_lf(self) -> list[np.ndarray]:
        if len(self.branches) < 2:
            raise IndexError("model has a single branch")
        return self.branches[1]

    @property
    def dtype(self):
        return self.branches[0][0].dtype

    def parameters(self) -> list[np.ndarray]:
        """All parameter tensors in declaration (= serialization) order."""
        out = []
        for branch in self.branches:
            out.extend(branch)
        out.extend(self.head)
        return out

    def copy(self) -> "Model":
        return Model(
            config=self.config,
            branches=[[p.copy() for p in br] for br in self.branches],
            head=[p.copy() for p in self.head],
        )


@dataclass
class TrainReport:
    """Per-epoch training trace; identical for identical (data, config, seed)."""

    initial_train_loss: float
    epoch_train_loss: tuple[float, ...]
    epoch_holdout_accuracy: tuple[float, ...]
    final_holdout_accuracy: float
    n_train: int
    n_holdout: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "initial_train_loss": self.initial_train_loss,
            "epoch_train_loss": list(self.epoch_train_loss),
            "epoch_holdout_accuracy": list(self.epoch_holdout_accuracy),
            "final_holdout_accuracy": self.final_holdout_accuracy,
            "n_train": self.n_train,
            "n_holdout": self.n_holdout,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

def _tensor_shapes(cfg: NetConfig) -> tuple[list[list[tuple]], list[tuple]]:
    branch_shapes = []
    for _ in range(cfg.n_branches):
        shapes = []
        c_in = 1
        for c_out in cfg.branch_channels:
            shapes.append((c_out, c_in, 3, 3))
            shapes.append((c_out,))
            c_in = c_out
        branch_shapes.append(shapes)
    head_shapes = [
        (cfg.fused_dim, cfg.concat_dim), (cfg.fused_dim,),
        (1, cfg.fused_dim), (1,),
    ]
    return branch_shapes, head_shapes


def init_model(cfg: NetConfig, dtype=np.float32) -> Model:
    """Deterministic fan-in-scaled uniform initialization.

    Each branch and the head draw from independent RNG streams spawned from
    ``cfg.seed``, so identical configs give bit-identical parameters and the
    branches never share values by accident. Biases start at zero.
    """
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_branches + 1)
    branch_shapes, head_shapes = _tensor_shapes(cfg)

    def draw(rng, shapes):
        # Weight and bias share the layer's fan-in bound. Nonzero biases
        # matter: they place ReLU hinges inside the input range, without
        # which the net starts out effectively linear on nonnegative maps.
        out = []
        for shape in shapes:
            if len(shape) > 1:
                bound = 1.0 / np.sqrt(int(np.prod(shape[1:])))
            out.append(rng.uniform(-bound, bound, size=shape).astype(dtype))
        return out

    branches = []
    for i in range(cfg.n_branches):
        rng = np.random.default_rng(streams[i])
        branches.append(draw(rng, branch_shapes[i]))
    head_rng = np.random.default_rng(streams[-1])
    head = draw(head_rng, head_shapes)
    return Model(config=cfg, branches=branches, head=head)


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def _conv_s2_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray):
    """3x3 convolution, zero pad 1, stride 2, via im2col + batched matmul."""
    B, C, H, _ = x.shape
    O = (H - 1) // 2 + 1
    dtype = x.dtype
    xp = np.zeros((B, C, H + 2, H + 2), dtype=dtype)
    xp[:, :, 1:-1, 1:-1] = x
    cols = np.empty((B, C, 9, O * O), dtype=dtype)
    for di in range(3):
        for dj in range(3):
            cols[:, :, di * 3 + dj, :] = (
                xp[:, :, di:di + 2 * O - 1:2, dj:dj + 2 * O - 1:2].reshape(B, C, O * O)
            )
    cols = cols.reshape(B, C * 9, O * O)
    Wm = W.reshape(W.shape[0], C * 9)
    out = np.matmul(Wm, cols) + b[:, None]
    return out.reshape(B, W.shape[0], O, O), (cols, (B, C, H), O)


def _conv_s2_backward(dout: np.ndarray, W: np.ndarray, cache):
    cols, (B, C, H), O = cache
    dtype = dout.dtype
    dm = dout.reshape(B, dout.shape[1], O * O)
    dW = np.matmul(dm, cols.transpose(0, 2, 1)).sum(axis=0).reshape(W.shape)
    db = dm.sum(axis=(0, 2))
    Wm = W.reshape(W.shape[0], C * 9)
    dcols = np.matmul(Wm.T, dm).reshape(B, C, 9, O * O)
    dxp = np.zeros((B, C, H + 2, H + 2), dtype=dtype)
    for di in range(3):
        for dj in range(3):
            dxp[:, :, di:di + 2 * O - 1:2, dj:dj + 2 * O - 1:2] += (
                dcols[:, :, di * 3 + dj, :].reshape(B, C, O, O)
            )
    return dW, db, dxp[:, :, 1:-1, 1:-1]


def _forward_internal(model: Model, inputs: list[np.ndarray], need_cache: bool):
    """Shared forward pass. ``inputs[i]`` has shape (B, S, S) for branch i."""
    cfg = model.config
    if len(inputs) != cfg.n_branches:
        raise ShapeMismatchError(
            f"model has {cfg.n_branches} branches but got {len(inputs)} inputs"
        )
    dtype = model.dtype
    feats = []
    caches = []
    B = None
    for branch, x in zip(model.branches, inputs):
        x = np.asarray(x, dtype=dtype)
        if x.ndim == 2:
            x = x[None]
        if x.shape[1] != cfg.input_side or x.shape[2] != cfg.input_side:
            raise ShapeMismatchError(
                f"input side {x.shape[1:]} does not match model side {cfg.input_side}"
            )
        if B is None:
            B = x.shape[0]
        elif x.shape[0] != B:
            raise ShapeMismatchError("branch inputs disagree on batch size")
        h = x[:, None, :, :]
        stage_caches = []
        early = None
        n_stages = len(cfg.branch_channels)
        for s in range(n_stages):
            W, b = branch[2 * s], branch[2 * s + 1]
            z, cache = _conv_s2_forward(h, W, b)
            mask = z > 0  # ReLU'(0) = 0: a zeroed input keeps its branch silent
            h = z * mask
            if need_cache:
                stage_caches.append((cache, mask, h.shape))
            if s == 0:
                early = h.mean(axis=(2, 3))
        late = h.mean(axis=(2, 3))
        feats.append(early)
        feats.append(late)
        caches.append(stage_caches)
    z_cat = np.concatenate(feats, axis=1)
    W1, b1, W2, b2 = model.head
    u_pre = z_cat @ W1.T + b1
    u_mask = u_pre > 0
    u = u_pre * u_mask
    logit = (u @ W2.T + b2)[:, 0]
    p = expit(logit.astype(np.float64))
    head_cache = (z_cat, u_mask, u) if need_cache else None
    return p, caches, head_cache, feats


def predict_batch(model: Model, inputs: list[np.ndarray], chunk: int = 256) -> np.ndarray:
    """Probabilities for a batch; chunked to bound im2col memory."""
    xs = [np.asarray(x) for x in inputs]
    n = xs[0].shape[0]
    out = np.empty(n, dtype=np.float64)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        p, _, _, _ = _forward_internal(model, [x[lo:hi] for x in xs], need_cache=False)
        out[lo:hi] = p
    return out


def _map_data(m) -> np.ndarray:
    return np.asarray(getattr(m, "data", m), dtype=np.float64)


def forward(model: Model, hf, lf=None) -> float:
    """Banded probability for one patch, strictly inside (0, 1).

    ``hf``/``lf`` may be frequency-map objects or bare arrays. Single-branch
    models take only ``hf``.
    """
    inputs = [_map_data(hf)]
    if model.config.n_branches == 2:
        if lf is None:
            raise ShapeMismatchError("dual-branch model needs both inputs")
        inputs.append(_map_data(lf))
    elif lf is not None:
        raise ShapeMismatchError("single-branch model takes one input")
    p, _, _, _ = _forward_internal(model, [x[None] for x in inputs], need_cache=False)
    return float(p[0])


def bce_loss(p: float, y: int) -> float:
    """Binary cross entropy with the probability clamped to [1e-7, 1 - 1e-7]."""
    pc = min(max(float(p), PROB_CLAMP), 1.0 - PROB_CLAMP)
    y = float(y)
    return -(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))


def _batch_bce(p: np.ndarray, y: np.ndarray) -> float:
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(np.mean(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))))


def loss_and_gradients(model: Model, inputs: list[np.ndarray], y: np.ndarray):
    """Mean BCE over the batch plus analytic gradients for every tensor.

    Returns ``(loss, grads, input_grads)`` where ``grads`` mirrors the model
    structure (branches, head) and ``input_grads[i]`` is the gradient with
    respect to branch i's input maps.
    """
    cfg = model.config
    dtype = model.dtype
    y = np.asarray(y, dtype=np.float64)
    p, caches, head_cache, _ = _forward_internal(model, inputs, need_cache=True)
    B = p.shape[0]
    loss = _batch_bce(p, y)

    # Gradient of the clamped loss: zero where the clamp is active.
    inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    dlogit = (np.where(inside, p - y, 0.0) / B).astype(dtype)

    z_cat, u_mask, u = head_cache
    W1, b1, W2, b2 = model.head
    dW2 = dlogit[None, :] @ u
    db2 = np.array([dlogit.sum()], dtype=dtype)
    du = dlogit[:, None] @ W2
    du_pre = du * u_mask
    dW1 = du_pre.T @ z_cat
    db1 = du_pre.sum(axis=0)
    dz = du_pre @ W1

    grads_branches = []
    input_grads = []
    offset = 0
    c0 = cfg.branch_channels[0]
    c_last = cfg.branch_channels[-1]
    for branch, stage_caches in zip(model.branches, caches):
        d_early = dz[:, offset:offset + c0]
        d_late = dz[:, offset + c0:offset + c0 + c_last]
        offset += c0 + c_last

        n_stages = len(cfg.branch_channels)
        grads = [None] * (2 * n_stages)
        dh = None
        for s in range(n_stages - 1, -1, -1):
            cache, mask, out_shape = stage_caches[s]
            _, _, oh, ow = out_shape
            if s == n_stages - 1:
                da = np.broadcast_to(
                    (d_late / (oh * ow))[:, :, None, None], out_shape
                ).astype(dtype, copy=True)
                if n_stages == 1:
                    da += np.broadcast_to(
                        (d_early / (oh * ow))[:, :, None, None], out_shape
                    )
            else:
                da = dh
            if s == 0 and n_stages > 1:
                da = da + np.broadcast_to(
                    (d_early / (oh * ow))[:, :, None, None], out_shape
                )
            dzs = da * mask
            W = branch[2 * s]
            dW, db, dh = _conv_s2_backward(dzs, W, cache)
            grads[2 * s] = dW
            grads[2 * s + 1] = db
        grads_branches.append(grads)
        input_grads.append(dh[:, 0])

    grads = {
        "branches": grads_branches,
        "head": [dW1, db1, dW2, db2],
    }
    return loss, grads, input_grads


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

class _Adam:
    def __init__(self, params: list[np.ndarray], lr: float):
        self.lr = lr
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]):
        self.t += 1
        b1t = 1.0 - ADAM_BETA1 ** self.t
        b2t = 1.0 - ADAM_BETA2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            p -= (self.lr / b1t) * m / (np.sqrt(v / b2t) + ADAM_EPS)


def _flat_grads(grads) -> list[np.ndarray]:
    out = []
    for branch in grads["branches"]:
        out.extend(branch)
    out.extend(grads["head"])
    return out


def split_indices(n: int, split_ratio: float, seed: int):
    """Deterministic train/holdout index split shared by training and eval."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _SPLIT_STREAM]))
    perm = rng.permutation(n)
    k = int(round(split_ratio * n))
    return perm[:k], perm[k:]


def train_arrays(model: Model, branch_inputs: list[np.ndarray], labels: np.ndarray,
                 cfg: TrainConfig) -> tuple[Model, TrainReport]:
    """Adam training on pre-stacked per-branch input arrays.

    The input model is not modified; a trained copy is returned together with
    the per-epoch report. Deterministic for fixed data, config, and seed.
    """
    y = np.asarray(labels, dtype=np.float64)
    n = y.shape[0]
    if n == 0:
        raise DegenerateDatasetError("empty dataset")
    if len(np.unique(y)) < 2:
        raise DegenerateDatasetError("training needs both labels present")
    xs = [np.ascontiguousarray(np.asarray(x, dtype=model.dtype)) for x in branch_inputs]
    for x in xs:
        if x.shape[0] != n:
            raise ShapeMismatchError("inputs and labels disagree on length")

    train_idx, hold_idx = split_indices(n, cfg.split_ratio, cfg.seed)
    if len(np.unique(y[train_idx])) < 2:
        raise DegenerateDatasetError("train split ended up single-class")
    xs_train = [x[train_idx] for x in xs]
    y_train = y[train_idx]
    xs_hold = [x[hold_idx] for x in xs]
    y_hold = y[hold_idx]

    model = model.copy()
    params = model.parameters()
    adam = _Adam(params, cfg.learning_rate)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _SHUFFLE_STREAM]))

    initial_loss = _batch_bce(predict_batch(model, xs_train), y_train)
    epoch_losses = []
    epoch_accs = []
    n_train = len(train_idx)
    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(n_train)
        total = 0.0
        for lo in range(0, n_train, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            loss, grads, _ = loss_and_gradients(
                model, [x[idx] for x in xs_train], y_train[idx]
            )
            adam.step(params, _flat_grads(grads))
            total += loss * len(idx)
        epoch_losses.append(total / n_train)
        if len(hold_idx):
            p_hold = predict_batch(model, xs_hold)
            acc = float(np.mean((p_hold >= 0.5) == (y_hold == 1.0)))
        else:
            acc = float("nan")
        epoch_accs.append(acc)

    report = TrainReport(
        initial_train_loss=initial_loss,
        epoch_train_loss=tuple(epoch_losses),
        epoch_holdout_accuracy=tuple(epoch_accs),
        final_holdout_accuracy=epoch_accs[-1],
        n_train=n_train,
        n_holdout=len(hold_idx),
        seed=cfg.seed,
    )
    return model, report


def train(model: Model, dataset, cfg: TrainConfig) -> tuple[Model, TrainReport]:
    """Train a dual-branch model on (high-freq map, low-freq map, label) triples."""
    if not dataset:
        raise DegenerateDatasetError("empty dataset")
    hf = np.stack([_map_data(rec[0]) for rec in dataset])
    lf = np.stack([_map_data(rec[1]) for rec in dataset])
    y = np.array([rec[2] for rec in dataset], dtype=np.float64)
    return train_arrays(model, [hf, lf], y, cfg)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def save_model(model: Model, path) -> None:
    """Write the FSBD container; parameters are stored as little-endian f32."""
    cfg_json = json.dumps(model.config.to_dict(), sort_keys=True,
                          separators=(",", ":")).encode("utf-8")
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<H", FORMAT_VERSION)
    blob += struct.pack("<I", len(cfg_json))
    blob += cfg_json
    for p in model.parameters():
        blob += np.ascontiguousarray(p, dtype="<f4").tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_model(path) -> Model:
    """Read an FSBD container back into a float32 model.

    Raises :class:`VersionMismatchError` for an unknown format version and
    :class:`ChecksumMismatchError` for truncated or corrupted files.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 14 or blob[:4] != MAGIC:
        raise ModelFormatError(f"not an FSBD model file: {path}")
    (version,) = struct.unpack("<H", blob[4:6])
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"unsupported model format version {version} (expected {FORMAT_VERSION})"
        )
    (stored_crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumMismatchError(f"model file failed CRC check: {path}")
    (cfg_len,) = struct.unpack("<I", blob[6:10])
    try:
        cfg = NetConfig.from_dict(json.loads(blob[10:10 + cfg_len].decode("utf-8")))
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"bad config block in model file: {path}") from exc
    branch_shapes, head_shapes = _tensor_shapes(cfg)
    offset = 10 + cfg_len
    body_end = len(blob) - 4

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > body_end:
            raise ChecksumMismatchError(f"model file shorter than declared config: {path}")
        arr = np.frombuffer(blob[offset:end], dtype="<f4").reshape(shape)
        offset = end
        return arr.astype(np.float32)

    branches = [[take(s) for s in shapes] for shapes in branch_shapes]
    head = [take(s) for s in head_shapes]
    if offset != body_end:
        raise ChecksumMismatchError(f"model file has trailing bytes: {path}")
    return Model(config=cfg, branches=branches, head=head)
