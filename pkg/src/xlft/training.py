"""Minibatch training loop shared by dense fine-tuning, IMP, and SfT.

Single-threaded and fully keyed by seed: shuffling, augmentation, and
initialization all draw from named streams, so identical configs replay
bitwise-identical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .codemix import BilingualLexicon, CodeMixConfig, code_mix_question
from .data import VqaExample
from .errors import ShapeError
from .loss import LossConfig, combined_loss
from .model import ModelConfig, MultimodalBatch, forward
from .rng import stream_rng


@dataclass
class TrainConfig:
    epochs: int = 5
    batch_size: int = 64
    lr: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def encode_examples(
    examples: list[VqaExample],
    questions: list[list[str]],
    vocab: dict[str, int],
    features: dict[str, np.ndarray],
    config: ModelConfig,
) -> MultimodalBatch:
    """Pad question tokens to fixed length and gather image features.

    Words outside the vocabulary map to the padding id 0.
    """
    b = len(examples)
    token_ids = np.zeros((b, config.max_question_len), dtype=np.int64)
    feats = np.empty((b, config.num_regions, config.feat_dim))
    labels = np.empty(b, dtype=np.int64)
    for row, (ex, question) in enumerate(zip(examples, questions)):
        if len(question) > config.max_question_len:
            raise ShapeError(
                f"question {ex.qid} has {len(question)} tokens, max is {config.max_question_len}"
            )
        for col, word in enumerate(question):
            token_ids[row, col] = vocab.get(word, 0)
        if ex.image_id not in features:
            raise ShapeError(f"image {ex.image_id!r} missing from the feature store")
        feats[row] = features[ex.image_id]
        labels[row] = ex.label
    return MultimodalBatch(token_ids=token_ids, image_feats=feats, labels=labels)


def _mask_grads(params: ad.ParamSet, mask: dict[str, np.ndarray]) -> None:
    for name, m in mask.items():
        t = params[name]
        if t.grad is not None:
            t.grad[m == 0] = 0.0


def _mask_values(params: ad.ParamSet, mask: dict[str, np.ndarray]) -> None:
    for name, m in mask.items():
        params[name].data[m == 0] = 0.0


def run_training(
    params: ad.ParamSet,
    model_cfg: ModelConfig,
    examples: list[VqaExample],
    features: dict[str, np.ndarray],
    vocab: dict[str, int],
    loss_cfg: LossConfig,
    train_cfg: TrainConfig,
    seed: int,
    epochs: int | None = None,
    mask: dict[str, np.ndarray] | None = None,
    lexicon: BilingualLexicon | None = None,
    codemix_cfg: CodeMixConfig | None = None,
    epoch_offset: int = 0,
    purpose: str = "train",
    step_hook=None,
) -> ad.ParamSet:
    """Train params in place and return them.

    When a mask is given, masked coordinates have their gradients zeroed
    every step and their values pinned to exactly 0.0 throughout.
    ``step_hook(params, step)`` fires after the backward pass of each step.
    """
    epochs = train_cfg.epochs if epochs is None else epochs
    params.reset_adam()
    if mask is not None:
        _mask_values(params, mask)

    step = 0
    for epoch in range(epochs):
        absolute_epoch = epoch + epoch_offset
        order = stream_rng(seed, f"{purpose}-shuffle", epoch=absolute_epoch).permutation(len(examples))
        for start in range(0, len(examples), train_cfg.batch_size):
            chunk = [examples[i] for i in order[start : start + train_cfg.batch_size]]
            if codemix_cfg is not None and lexicon is not None and codemix_cfg.select_ratio > 0:
                questions = [
                    code_mix_question(ex.question, lexicon, codemix_cfg, absolute_epoch, ex.qid)
                    for ex in chunk
                ]
            else:
                questions = [ex.question for ex in chunk]
            batch = encode_examples(chunk, questions, vocab, features, model_cfg)

            logits = forward(params, model_cfg, batch)
            loss = combined_loss(logits, batch.labels, loss_cfg)
            params.zero_grads()
            ad.backward(loss)
            if mask is not None:
                _mask_grads(params, mask)
            if step_hook is not None:
                step_hook(params, step)
            step += 1
            ad.adam_step(
                params,
                lr=train_cfg.lr,
                betas=(train_cfg.beta1, train_cfg.beta2),
                eps=train_cfg.eps,
                step_count=step,
            )
            if mask is not None:
                _mask_values(params, mask)
    return params


def predict_split(
    params: ad.ParamSet,
    model_cfg: ModelConfig,
    examples: list[VqaExample],
    features: dict[str, np.ndarray],
    vocab: dict[str, int],
    batch_size: int = 128,
) -> np.ndarray:
    """Greedy label indices for a whole split (read-only forward passes)."""
    preds = np.empty(len(examples), dtype=np.int64)
    for start in range(0, len(examples), batch_size):
        chunk = examples[start : start + batch_size]
        batch = encode_examples(chunk, [ex.question for ex in chunk], vocab, features, model_cfg)
        logits = forward(params, model_cfg, batch)
        preds[start : start + len(chunk)] = np.argmax(logits.data, axis=1)
    return preds
