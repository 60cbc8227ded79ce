"""Iterative magnitude pruning with rewinding, and sparse fine-tuning.

Step 0 discovers a binary mask: repeat {train the masked model from the
rewound initial weights, drop the globally smallest-magnitude fraction p of
the surviving prunable weights, rewind survivors to their initial values}.
Step 1 retrains from the initial weights under the final mask, with masked
coordinates frozen at exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ParamSet
from .codemix import BilingualLexicon, CodeMixConfig
from .data import VqaExample
from .errors import ConfigError, ShapeError
from .loss import LossConfig
from .model import ModelConfig, prunable_param_names
from .training import TrainConfig, run_training

PruningMask = dict[str, np.ndarray]


@dataclass
class ImpConfig:
    prune_rate: float = 0.1
    rounds: int = 5
    epochs_per_round: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.prune_rate < 1.0):
            raise ConfigError(f"prune_rate must be in (0, 1), got {self.prune_rate}")
        if self.rounds < 1 or self.epochs_per_round < 1:
            raise ConfigError("rounds and epochs_per_round must be >= 1")


def full_mask(params: ParamSet) -> PruningMask:
    """All-ones mask over the prunable parameter set."""
    return {name: np.ones(params[name].data.shape, dtype=np.uint8) for name in prunable_param_names(params)}


def _check_alignment(params: ParamSet, mask: PruningMask) -> list[str]:
    names = list(mask)
    for name in names:
        if name not in params:
            raise ShapeError(f"mask entry {name!r} has no matching parameter")
        if mask[name].shape != params[name].data.shape:
            raise ShapeError(
                f"mask {name!r} shape {mask[name].shape} != parameter shape {params[name].data.shape}"
            )
    return names


def prune_lowest_global(params: ParamSet, mask: PruningMask, p: float) -> PruningMask:
    """Mask the globally smallest-magnitude fraction p of surviving weights.

    Exactly floor(p * remaining) entries are newly masked (at least 1 while
    any survive); ties resolve by parameter order, then flat index.  The
    mask is updated in place and returned.
    """
    if not (0.0 < p < 1.0):
        raise ConfigError(f"prune fraction must be in (0, 1), got {p}")
    names = _check_alignment(params, mask)

    mags, name_ids, flat_ids = [], [], []
    for ni, name in enumerate(names):
        keep = mask[name].reshape(-1)
        (live,) = np.nonzero(keep)
        if live.size == 0:
            continue
        mags.append(np.abs(params[name].data.reshape(-1)[live]))
        name_ids.append(np.full(live.size, ni, dtype=np.int64))
        flat_ids.append(live)
    if not mags:
        raise ConfigError("no unmasked prunable weights remain")

    magnitude = np.concatenate(mags)
    name_id = np.concatenate(name_ids)
    flat_id = np.concatenate(flat_ids)
    remaining = magnitude.size
    count = int(np.floor(p * remaining))
    if count == 0:
        count = 1  # tiny models: never let a round silently no-op

    order = np.lexsort((flat_id, name_id, magnitude))[:count]
    for ni, fi in zip(name_id[order], flat_id[order]):
        mask[names[ni]].reshape(-1)[fi] = 0
    return mask


def rewind(params: ParamSet, theta0: ParamSet, mask: PruningMask) -> ParamSet:
    """Reset to the initial weights; masked coordinates become exactly 0.

    Non-prunable parameters are reset too, so the result is the initial
    model with the mask applied.  Idempotent; updates params in place.
    """
    if params.names() != theta0.names():
        raise ShapeError("parameter sets differ between params and theta0")
    _check_alignment(params, mask)
    for name, t in params.items():
        ref = theta0[name].data
        if ref.shape != t.data.shape:
            raise ShapeError(f"theta0 shape mismatch for {name!r}")
        t.data[...] = ref
    for name, m in mask.items():
        params[name].data[m == 0] = 0.0
    params.reset_adam()
    params.zero_grads()
    return params


def imp_run(
    theta0: ParamSet,
    model_cfg: ModelConfig,
    examples: list[VqaExample],
    features: dict[str, np.ndarray],
    vocab: dict[str, int],
    loss_cfg: LossConfig,
    imp_cfg: ImpConfig,
    train_cfg: TrainConfig,
    round_hook=None,
) -> PruningMask:
    """Discover a pruning mask via IMP with rewinding.

    Each round trains the masked model from the rewound state for
    epochs_per_round, prunes fraction prune_rate of the survivors by
    trained magnitude, and rewinds.  Augmentation stays off here.
    ``round_hook(round_index, mask)`` observes the mask after each round.
    """
    mask = full_mask(theta0)
    params = theta0.copy()
    for r in range(imp_cfg.rounds):
        rewind(params, theta0, mask)
        run_training(
            params, model_cfg, examples, features, vocab, loss_cfg, train_cfg,
            seed=imp_cfg.seed, epochs=imp_cfg.epochs_per_round, mask=mask,
            epoch_offset=r * imp_cfg.epochs_per_round, purpose="imp",
        )
        prune_lowest_global(params, mask, imp_cfg.prune_rate)
        if round_hook is not None:
            round_hook(r, mask)
    return mask


def sft_train(
    theta0: ParamSet,
    mask: PruningMask,
    model_cfg: ModelConfig,
    examples: list[VqaExample],
    features: dict[str, np.ndarray],
    vocab: dict[str, int],
    loss_cfg: LossConfig,
    epochs: int,
    train_cfg: TrainConfig,
    seed: int = 0,
    lexicon: BilingualLexicon | None = None,
    codemix_cfg: CodeMixConfig | None = None,
    step_hook=None,
) -> ParamSet:
    """Step 1: retrain from the initial weights with the mask frozen.

    Masked weights are exactly 0.0 before, during, and after training; only
    survivors and non-prunable parameters move.  Code-mixing plugs in here
    (and only here) when enabled.
    """
    params = rewind(theta0.copy(), theta0, mask)
    return run_training(
        params, model_cfg, examples, features, vocab, loss_cfg, train_cfg,
        seed=seed, epochs=epochs, mask=mask, lexicon=lexicon,
        codemix_cfg=codemix_cfg, purpose="sft", step_hook=step_hook,
    )


def masked_count(mask: PruningMask) -> int:
    return int(sum((m == 0).sum() for m in mask.values()))


def sparsity_report(mask: PruningMask, prunable_count: int, total_model_params: int) -> dict:
    """Fraction masked, over the prunable set and over the whole model."""
    if prunable_count <= 0 or total_model_params <= 0:
        raise ConfigError("parameter counts must be positive")
    masked = masked_count(mask)
    return {
        "masked": masked,
        "prunable_count": int(prunable_count),
        "total_model_params": int(total_model_params),
        "prunable_sparsity": masked / prunable_count,
        "global_sparsity": masked / total_model_params,
    }


def expected_remaining(count: int, p: float, rounds: int) -> int:
    """Exact floor-recurrence survivor count after the given rounds."""
    remaining = count
    for _ in range(rounds):
        drop = int(np.floor(p * remaining))
        if drop == 0 and remaining > 0:
            drop = 1
        remaining -= drop
    return remaining
