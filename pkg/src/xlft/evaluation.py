"""Accuracy metrics, confusion analysis, and multi-seed aggregation.

Two accuracies are reported per language: exact match, and a
synonym-adjusted variant that also credits predictions sharing the gold
label's synset.  The confusion report ranks wrong predictions that stand
in a synonym/hypernym/hyponym relation to the gold label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .taxonomy import HYPERNYM, HYPONYM, SYNONYM, LabelTaxonomy, relation

_REL_TAG = {SYNONYM: "syn", HYPERNYM: "hyp", HYPONYM: "hpo"}


@dataclass
class EvalResult:
    accuracy: float
    synonym_accuracy: float
    n_examples: int


@dataclass
class ConfusionEntry:
    gold: str
    pred: str
    relation: str  # syn | hyp | hpo
    count: int


def accuracy(preds, golds) -> float:
    """Exact-match fraction."""
    if len(preds) != len(golds):
        raise ConfigError(f"length mismatch: {len(preds)} predictions vs {len(golds)} golds")
    if len(preds) == 0:
        raise ConfigError("cannot score an empty prediction list")
    return sum(p == g for p, g in zip(preds, golds)) / len(preds)


def synonym_accuracy(preds: list[str], golds: list[str], tax: LabelTaxonomy) -> float:
    """Fraction counted correct when any synonym of the gold label counts."""
    if len(preds) != len(golds):
        raise ConfigError(f"length mismatch: {len(preds)} predictions vs {len(golds)} golds")
    if len(preds) == 0:
        raise ConfigError("cannot score an empty prediction list")
    hits = sum(relation(tax, p, g) == SYNONYM for p, g in zip(preds, golds))
    return hits / len(preds)


def evaluate_labels(preds: list[str], golds: list[str], tax: LabelTaxonomy) -> EvalResult:
    return EvalResult(
        accuracy=accuracy(preds, golds),
        synonym_accuracy=synonym_accuracy(preds, golds, tax),
        n_examples=len(preds),
    )


def confusion_report(
    preds: list[str],
    golds: list[str],
    tax: LabelTaxonomy,
    top_n: int = 5,
) -> list[ConfusionEntry]:
    """Most frequent wrong predictions related to the gold label.

    Exact matches are not confusions and unrelated misses are not
    reported.  Ranked by count, ties by lexicographic (gold, pred).
    """
    if top_n < 1:
        raise ConfigError(f"top_n must be >= 1, got {top_n}")
    counts: dict[tuple[str, str, str], int] = {}
    for p, g in zip(preds, golds):
        if p == g:
            continue
        rel = relation(tax, p, g)
        if rel not in _REL_TAG:
            continue
        key = (g, p, _REL_TAG[rel])
        counts[key] = counts.get(key, 0) + 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0][0], item[0][1]))
    return [ConfusionEntry(gold=g, pred=p, relation=r, count=c) for (g, p, r), c in ranked[:top_n]]


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size >= 2 else 0.0
    return mean, std


def aggregate_runs(
    runs: list[dict[str, EvalResult]],
    source_lang: str = "en",
) -> dict:
    """Mean and sample std per language and metric over seeds.

    Also reports the cross-language average excluding the source language
    (computed per seed, then aggregated).
    """
    if not runs:
        raise ConfigError("aggregate_runs needs at least one run")
    languages = list(runs[0])
    for run in runs:
        if list(run) != languages:
            raise ConfigError("runs cover different language sets")

    per_language = {}
    for lang in languages:
        acc_mean, acc_std = _mean_std([run[lang].accuracy for run in runs])
        syn_mean, syn_std = _mean_std([run[lang].synonym_accuracy for run in runs])
        per_language[lang] = {
            "acc_mean": acc_mean,
            "acc_std": acc_std,
            "syn_acc_mean": syn_mean,
            "syn_acc_std": syn_std,
        }

    targets = [lang for lang in languages if lang != source_lang]
    if targets:
        per_seed_acc = [float(np.mean([run[lang].accuracy for lang in targets])) for run in runs]
        per_seed_syn = [float(np.mean([run[lang].synonym_accuracy for lang in targets])) for run in runs]
        acc_mean, acc_std = _mean_std(per_seed_acc)
        syn_mean, syn_std = _mean_std(per_seed_syn)
        avg = {
            "acc_mean": acc_mean,
            "acc_std": acc_std,
            "syn_acc_mean": syn_mean,
            "syn_acc_std": syn_std,
        }
    else:
        avg = None
    return {"num_runs": len(runs), "per_language": per_language, "avg_excl_source": avg}


def format_table(aggregate: dict, source_lang: str = "en") -> str:
    """Per-language table: exact accuracy, synonym-adjusted, and the diff."""
    lines = [f"{'lang':<8}{'w/o Syn.':>16}{'w Syn.':>16}{'Diff.':>8}"]
    rows = list(aggregate["per_language"].items())
    if aggregate.get("avg_excl_source"):
        rows.append((f"avg(-{source_lang})", aggregate["avg_excl_source"]))
    for lang, cell in rows:
        acc = f"{100 * cell['acc_mean']:.2f}±{100 * cell['acc_std']:.2f}"
        syn = f"{100 * cell['syn_acc_mean']:.2f}±{100 * cell['syn_acc_std']:.2f}"
        diff = f"{100 * (cell['syn_acc_mean'] - cell['acc_mean']):+.2f}"
        lines.append(f"{lang:<8}{acc:>16}{syn:>16}{diff:>8}")
    return "\n".join(lines)
