"""Training objectives: cross-entropy, the similarity prior, and their sum.

The prior term is an expected risk: the predicted probability of each of
the k most probable labels, weighted by its distance to the gold label and
summed.  Probabilities are used raw (not renormalized over the top k), so
the term is bounded by the top-k probability mass and hence by 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ShapeError
from .taxonomy import DistanceMatrix


@dataclass
class LossConfig:
    alpha: float = 10.0
    k: int = 10
    distance: DistanceMatrix | None = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")


def cross_entropy(logits: ad.Tensor, targets) -> ad.Tensor:
    """Mean negative log-likelihood of the gold labels."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.data.ndim != 2:
        raise ShapeError(f"cross_entropy: logits must be 2-D, got {logits.data.shape}")
    b, c = logits.data.shape
    if targets.shape != (b,):
        raise ShapeError(f"cross_entropy: targets shape {targets.shape} for logits {logits.data.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= c):
        raise ShapeError(f"cross_entropy: target index out of range [0, {c})")
    logp = ad.log_softmax(logits)
    picked = ad.take_rows(logp, targets[:, None])
    return ad.scale(ad.mean_all(picked), -1.0)


def topk_indices(probs: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest entries; ties go to the smaller index."""
    probs = np.asarray(probs)
    if k > probs.shape[-1]:
        raise ConfigError(f"k={k} exceeds the number of classes {probs.shape[-1]}")
    # stable argsort on the negated values keeps index order among ties
    return np.argsort(-probs, axis=-1, kind="stable")[..., :k]


def prior_loss(
    probs: ad.Tensor,
    targets,
    config: LossConfig,
    topk: np.ndarray | None = None,
) -> ad.Tensor:
    """Expected label-distance risk over the top-k predictions, batch mean.

    ``topk`` pins the selected indices (used by gradient checks, where the
    selection must be identical at both evaluation points); by default they
    are recomputed from the probabilities and treated as constants.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if config.distance is None:
        raise ConfigError("prior_loss requires a distance matrix")
    b, c = probs.data.shape
    d = config.distance.values
    if d.shape != (c, c):
        raise ShapeError(f"distance matrix {d.shape} does not match {c} classes")
    if topk is None:
        topk = topk_indices(probs.data, config.k)
    topk = np.asarray(topk, dtype=np.int64)
    risks = d[topk, targets[:, None]]
    gathered = ad.take_rows(probs, topk)
    weighted = ad.mul(gathered, ad.constant(risks))
    return ad.mean_all(ad.sum_axis(weighted, 1))


def combined_loss(
    logits: ad.Tensor,
    targets,
    config: LossConfig,
    topk: np.ndarray | None = None,
) -> ad.Tensor:
    """cross_entropy + alpha * prior_loss as one differentiable scalar."""
    ce = cross_entropy(logits, targets)
    if config.alpha == 0:
        return ce
    probs = ad.softmax(logits)
    prior = prior_loss(probs, targets, config, topk=topk)
    return ad.add(ce, ad.scale(prior, config.alpha))
