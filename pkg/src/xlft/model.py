"""Desk-scale multimodal classifier.

Token embeddings and projected image-region features are concatenated
behind a learned CLS slot, run through a small multi-head self-attention
encoder, and the CLS representation feeds a two-layer tanh classifier head
over the label space.  Padding token id 0 is masked out of attention keys.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import ParamSet, Tensor
from .errors import ConfigError, ShapeError
from .rng import stream_rng


@dataclass
class ModelConfig:
    vocab_size: int = 512
    num_labels: int = 64
    feat_dim: int = 16
    num_regions: int = 8
    hidden_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4
    max_question_len: int = 16
    seed: int = 0

    def __post_init__(self):
        dims = {
            "vocab_size": self.vocab_size,
            "feat_dim": self.feat_dim,
            "num_regions": self.num_regions,
            "hidden_dim": self.hidden_dim,
            "num_layers": self.num_layers,
            "num_heads": self.num_heads,
            "max_question_len": self.max_question_len,
        }
        for key, value in dims.items():
            if value <= 0:
                raise ConfigError(f"{key} must be positive, got {value}")
        if self.num_labels < 2:
            raise ConfigError(f"num_labels must be >= 2, got {self.num_labels}")
        if self.hidden_dim % self.num_heads != 0:
            raise ConfigError(
                f"hidden_dim {self.hidden_dim} not divisible by num_heads {self.num_heads}"
            )

    @property
    def seq_len(self) -> int:
        # CLS slot + image regions + question tokens
        return 1 + self.num_regions + self.max_question_len

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ModelConfig":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class MultimodalBatch:
    token_ids: np.ndarray
    image_feats: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.token_ids = np.asarray(self.token_ids, dtype=np.int64)
        self.image_feats = np.asarray(self.image_feats, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)

    def validate(self, config: ModelConfig) -> None:
        b = self.token_ids.shape[0]
        if self.token_ids.shape != (b, config.max_question_len):
            raise ShapeError(
                f"token_ids shape {self.token_ids.shape}, expected ({b}, {config.max_question_len})"
            )
        if self.image_feats.shape != (b, config.num_regions, config.feat_dim):
            raise ShapeError(
                f"image_feats shape {self.image_feats.shape}, expected "
                f"({b}, {config.num_regions}, {config.feat_dim})"
            )
        if self.labels.shape != (b,):
            raise ShapeError(f"labels shape {self.labels.shape}, expected ({b},)")
        if self.token_ids.size and (self.token_ids.min() < 0 or self.token_ids.max() >= config.vocab_size):
            raise ShapeError(f"token id out of range [0, {config.vocab_size})")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= config.num_labels):
            raise ShapeError(f"label out of range [0, {config.num_labels})")


def init_model(config: ModelConfig) -> ParamSet:
    """Allocate all parameters with a seeded init; this is the synthetic
    "pretrained" state that pruning rewinds to."""
    rng = stream_rng(config.seed, "model-init")
    h = config.hidden_dim
    params = ParamSet()

    def normal(shape, scale):
        return rng.normal(0.0, scale, size=shape)

    w_scale = 1.0 / np.sqrt(h)
    params.add("token_embedding", normal((config.vocab_size, h), 0.1))
    params.add("image_projection.weight", normal((config.feat_dim, h), 1.0 / np.sqrt(config.feat_dim)))
    params.add("image_projection.bias", np.zeros(h))
    params.add("cls_embedding", normal((h,), 0.1))
    params.add("positional_embedding", normal((config.seq_len, h), 0.1))
    for i in range(config.num_layers):
        prefix = f"encoder.{i}"
        for gate in ("wq", "wk", "wv", "wo"):
            params.add(f"{prefix}.attn.{gate}", normal((h, h), w_scale))
        # no key bias: a constant shift of every key cancels in the row softmax,
        # which would leave a permanently zero-gradient parameter
        for gate in ("bq", "bv", "bo"):
            params.add(f"{prefix}.attn.{gate}", np.zeros(h))
        params.add(f"{prefix}.ln1.gain", np.ones(h))
        params.add(f"{prefix}.ln1.bias", np.zeros(h))
        params.add(f"{prefix}.ffn.w1", normal((h, 2 * h), w_scale))
        params.add(f"{prefix}.ffn.b1", np.zeros(2 * h))
        params.add(f"{prefix}.ffn.w2", normal((2 * h, h), 1.0 / np.sqrt(2 * h)))
        params.add(f"{prefix}.ffn.b2", np.zeros(h))
        params.add(f"{prefix}.ln2.gain", np.ones(h))
        params.add(f"{prefix}.ln2.bias", np.zeros(h))
    params.add("classifier.w1", normal((h, h), w_scale))
    params.add("classifier.b1", np.zeros(h))
    params.add("classifier.w2", normal((h, config.num_labels), w_scale))
    params.add("classifier.b2", np.zeros(config.num_labels))
    return params


def _affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return ad.add(ad.matmul(x, w), b)


def forward(params: ParamSet, config: ModelConfig, batch: MultimodalBatch) -> Tensor:
    """Logits [batch x num_labels]; a pure function of (params, batch)."""
    batch.validate(config)
    b = batch.token_ids.shape[0]
    h = config.hidden_dim
    heads = config.num_heads
    dh = h // heads
    p = config.seq_len

    tok = ad.embedding(params["token_embedding"], batch.token_ids)
    img = _affine(ad.constant(batch.image_feats), params["image_projection.weight"], params["image_projection.bias"])
    cls = ad.add(ad.reshape(params["cls_embedding"], (1, 1, h)), ad.constant(np.zeros((b, 1, h))))
    x = ad.concat([cls, img, tok], axis=1)
    x = ad.add(x, ad.reshape(params["positional_embedding"], (1, p, h)))

    # pad tokens are invisible as attention keys
    key_valid = np.ones((b, p))
    key_valid[:, 1 + config.num_regions :] = batch.token_ids != 0
    attn_bias = ad.constant(((key_valid - 1.0) * 1e9).reshape(b, 1, 1, p))

    def split_heads(t: Tensor) -> Tensor:
        return ad.transpose(ad.reshape(t, (b, p, heads, dh)), (0, 2, 1, 3))

    for i in range(config.num_layers):
        prefix = f"encoder.{i}"
        q = split_heads(_affine(x, params[f"{prefix}.attn.wq"], params[f"{prefix}.attn.bq"]))
        k = split_heads(ad.matmul(x, params[f"{prefix}.attn.wk"]))
        v = split_heads(_affine(x, params[f"{prefix}.attn.wv"], params[f"{prefix}.attn.bv"]))
        scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
        att = ad.softmax(ad.add(scores, attn_bias))
        ctx = ad.reshape(ad.transpose(ad.matmul(att, v), (0, 2, 1, 3)), (b, p, h))
        proj = _affine(ctx, params[f"{prefix}.attn.wo"], params[f"{prefix}.attn.bo"])
        x = ad.layer_norm(ad.add(x, proj), params[f"{prefix}.ln1.gain"], params[f"{prefix}.ln1.bias"])
        inner = ad.relu(_affine(x, params[f"{prefix}.ffn.w1"], params[f"{prefix}.ffn.b1"]))
        ffn = _affine(inner, params[f"{prefix}.ffn.w2"], params[f"{prefix}.ffn.b2"])
        x = ad.layer_norm(ad.add(x, ffn), params[f"{prefix}.ln2.gain"], params[f"{prefix}.ln2.bias"])

    pooled = ad.select(x, 1, 0)
    hidden = ad.tanh(_affine(pooled, params["classifier.w1"], params["classifier.b1"]))
    return _affine(hidden, params["classifier.w2"], params["classifier.b2"])


def prunable_param_names(params: ParamSet) -> list[str]:
    """Encoder attention/FFN weights and biases, in stable parameter order.

    Embedding tables (token, image projection, positional, CLS), the
    layer-norm parameters, and both classifier-head layers stay dense.
    """
    return [
        name
        for name in params.names()
        if name.startswith("encoder.") and (".attn." in name or ".ffn." in name)
    ]


def predict(params: ParamSet, config: ModelConfig, batch: MultimodalBatch) -> np.ndarray:
    logits = forward(params, config, batch)
    return np.argmax(logits.data, axis=1)
