"""Command-line front end.

Subcommands: gen-data, build-distances, train, evaluate, report-sparsity.
Settings come from a JSON config file with flag overrides (flag > file >
default).  Every training run writes a manifest with the config hash, the
seeds, and library versions, so results can be reproduced bitwise.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .autodiff import ParamSet
from .checkpoint import load_container, save_container
from .codemix import CodeMixConfig, load_lexicons
from .data import (
    SyntheticDataset,
    SyntheticSpec,
    build_target_test_sets,
    generate_synthetic,
    load_features,
    load_split,
    load_vocab,
    save_features,
    save_split,
    save_vocab,
)
from .errors import CheckpointError, ConfigError, XlftError
from .evaluation import aggregate_runs, confusion_report, evaluate_labels, format_table
from .kernels import BACKEND
from .loss import LossConfig
from .model import ModelConfig, init_model, prunable_param_names
from .pruning import ImpConfig, imp_run, sft_train, sparsity_report
from .taxonomy import (
    embedding_distance_matrix,
    load_distances,
    load_embeddings,
    load_taxonomy,
    save_distances,
    save_embeddings,
    save_taxonomy,
    wordnet_distance_matrix,
)
from .training import TrainConfig, predict_split, run_training

STRATEGIES = ("ce", "prior_wn", "prior_em", "prior_em+sft", "prior_em+cdm", "prior_em+sft+cdm")

DEFAULT_CONFIG: dict = {
    "data": {
        "dir": "data",
        "num_labels": 64,
        "num_synsets": 24,
        "hypernym_density": 0.15,
        "num_train": 5000,
        "num_dev": 500,
        "num_test": 1000,
        "vocab_size": 3600,
        "num_regions": 8,
        "feat_dim": 16,
        "languages": ["xx", "yy", "zz"],
        "translations_per_word": 2,
        "seed": 0,
    },
    "model": {"hidden_dim": 64, "num_layers": 2, "num_heads": 4, "max_question_len": 16},
    "loss": {"alpha": 10.0, "k": 10, "d1": 0.8, "d2": 0.8},
    "imp": {"prune_rate": 0.1, "rounds": 5, "epochs_per_round": 1},
    "codemix": {"select_ratio": 0.3},
    "train": {"epochs": 5, "batch_size": 64, "lr": 2e-3},
    "strategy": "ce",
    "seeds": [0, 1, 2, 3, 4],
    "out": "runs",
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(args) -> dict:
    cfg = DEFAULT_CONFIG
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            cfg = _merge(cfg, json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})")
    if getattr(args, "strategy", None):
        cfg["strategy"] = args.strategy
    if getattr(args, "seed", None) is not None:
        cfg["seeds"] = [args.seed]
        cfg["data"] = dict(cfg["data"], seed=args.seed)
    if getattr(args, "out", None):
        cfg["out"] = args.out
    if cfg["strategy"] not in STRATEGIES:
        raise ConfigError(f"unknown strategy {cfg['strategy']!r}; choose from {STRATEGIES}")
    for section in ("data", "model", "loss", "train", "imp", "codemix"):
        if not isinstance(cfg.get(section), dict):
            raise ConfigError(f"config section {section!r} missing or not an object")
    return cfg


def _write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _write_manifest(out_dir: Path, cfg: dict, strategy: str) -> None:
    import numba

    manifest = {
        "config_sha256": _config_hash(cfg),
        "strategy": strategy,
        "seeds": cfg["seeds"],
        "versions": {
            "xlft": __version__,
            "numpy": np.__version__,
            "numba": numba.__version__,
            "backend": BACKEND,
        },
    }
    _write_json(out_dir / f"manifest.{strategy}.json", manifest)


# ---------------------------------------------------------------------------
# data plumbing


def _data_paths(data_dir: Path) -> dict:
    return {
        "spec": data_dir / "dataspec.json",
        "taxonomy": data_dir / "taxonomy.json",
        "embeddings": data_dir / "embeddings.txt",
        "vocab": data_dir / "vocab.json",
        "distances": data_dir / "distances.xlft",
    }


def cmd_gen_data(args) -> int:
    cfg = load_config(args)
    section = dict(cfg["data"])
    out_dir = Path(args.out or section.pop("dir", "data"))
    section.pop("dir", None)
    spec = SyntheticSpec(**section)
    dataset = generate_synthetic(spec)
    _save_dataset(dataset, out_dir)
    print(f"wrote synthetic corpus to {out_dir} "
          f"(train={spec.num_train}, dev={spec.num_dev}, test={spec.num_test}, "
          f"languages={spec.languages})")
    return 0


def _save_dataset(dataset: SyntheticDataset, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = _data_paths(out_dir)
    spec_dict = {k: v for k, v in vars(dataset.spec).items() if k != "source_vocab"}
    _write_json(paths["spec"], spec_dict)
    save_taxonomy(dataset.taxonomy, paths["taxonomy"])
    save_embeddings(dataset.embeddings, paths["embeddings"])
    save_vocab(dataset.vocab, paths["vocab"])
    for lang in dataset.spec.languages:
        with open(out_dir / f"lexicon.{lang}.tsv", "w", encoding="utf-8") as fh:
            for word in dataset.lexicon.words(lang):
                for target in dataset.lexicon.translations(lang, word):
                    fh.write(f"{word}\t{target}\n")

    feats = dataset.features
    for split_name, examples in dataset.splits.items():
        save_split(examples, out_dir / f"{split_name}.jsonl")
        save_features({ex.image_id: feats[ex.image_id] for ex in examples},
                      out_dir / f"features.{split_name}.xlft")
    targets = build_target_test_sets(dataset.splits["test"], dataset.lexicon, dataset.spec.languages)
    for lang, split in targets.items():
        save_split(split, out_dir / f"test.{lang}.jsonl")


def _load_data_dir(data_dir: Path):
    paths = _data_paths(data_dir)
    if not paths["spec"].exists():
        raise ConfigError(f"no dataset at {data_dir}; run gen-data first")
    spec = SyntheticSpec(**json.loads(paths["spec"].read_text(encoding="utf-8")))
    taxonomy = load_taxonomy(paths["taxonomy"])
    vocab = load_vocab(paths["vocab"])
    lexicon = load_lexicons({lang: data_dir / f"lexicon.{lang}.tsv" for lang in spec.languages})
    return spec, taxonomy, vocab, lexicon


def cmd_build_distances(args) -> int:
    cfg = load_config(args)
    data_dir = Path(cfg["data"]["dir"])
    paths = _data_paths(data_dir)
    taxonomy = load_taxonomy(paths["taxonomy"])
    embeddings = load_embeddings(paths["embeddings"])
    wn = wordnet_distance_matrix(taxonomy, d1=cfg["loss"]["d1"], d2=cfg["loss"]["d2"])
    em = embedding_distance_matrix(embeddings, taxonomy.labels)
    save_distances(paths["distances"], [wn, em])
    print(f"wrote {paths['distances']} (sources: wordnet, embedding)")
    return 0


# ---------------------------------------------------------------------------
# training


def _strategy_flags(strategy: str) -> tuple[str, bool, bool]:
    base = strategy.split("+")[0]
    return base, "+sft" in strategy, "+cdm" in strategy


def _model_config(cfg: dict, spec: SyntheticSpec, vocab: dict, seed: int) -> ModelConfig:
    return ModelConfig(
        vocab_size=len(vocab),
        num_labels=spec.num_labels,
        feat_dim=spec.feat_dim,
        num_regions=spec.num_regions,
        seed=seed,
        **cfg["model"],
    )


def _loss_config(cfg: dict, base: str, data_dir: Path) -> LossConfig:
    if base == "ce":
        return LossConfig(alpha=0.0, k=cfg["loss"]["k"], distance=None)
    source = "wordnet" if base == "prior_wn" else "embedding"
    dist_path = _data_paths(data_dir)["distances"]
    if not dist_path.exists():
        raise CheckpointError(
            f"strategy needs the {source} distance matrix; run build-distances (missing {dist_path})"
        )
    matrices = load_distances(dist_path)
    if source not in matrices:
        raise CheckpointError(f"distance container {dist_path} lacks source {source!r}")
    return LossConfig(alpha=cfg["loss"]["alpha"], k=cfg["loss"]["k"], distance=matrices[source])


def _train_one_seed(cfg: dict, seed: int, spec, vocab, lexicon, data_dir: Path, out_dir: Path):
    strategy = cfg["strategy"]
    base, with_sft, with_cdm = _strategy_flags(strategy)
    model_cfg = _model_config(cfg, spec, vocab, seed)
    loss_cfg = _loss_config(cfg, base, data_dir)
    train_cfg = TrainConfig(**cfg["train"])
    train_split = load_split(data_dir / "train.jsonl")
    train_feats = load_features(data_dir / "features.train.xlft")

    codemix_cfg = None
    if with_cdm:
        codemix_cfg = CodeMixConfig(
            select_ratio=cfg["codemix"]["select_ratio"], languages=spec.languages, seed=seed
        )

    theta0 = init_model(model_cfg)
    masks = None
    if with_sft:
        imp_cfg = ImpConfig(seed=seed, **cfg["imp"])
        masks = imp_run(theta0, model_cfg, train_split, train_feats, vocab,
                        loss_cfg, imp_cfg, train_cfg)
        params = sft_train(theta0, masks, model_cfg, train_split, train_feats, vocab,
                           loss_cfg, train_cfg.epochs, train_cfg, seed=seed,
                           lexicon=lexicon, codemix_cfg=codemix_cfg)
    else:
        params = run_training(theta0.copy(), model_cfg, train_split, train_feats, vocab,
                              loss_cfg, train_cfg, seed=seed,
                              lexicon=lexicon, codemix_cfg=codemix_cfg)

    ckpt = out_dir / f"ckpt.{strategy}.seed{seed}.xlft"
    entries = {name: tensor.data for name, tensor in params.items()}
    if masks is not None:
        for name, m in masks.items():
            entries[f"{name}.mask"] = m
    save_container(ckpt, entries)
    model_cfg.save(ckpt.with_suffix(".config.json"))

    dev_split = load_split(data_dir / "dev.jsonl")
    dev_feats = load_features(data_dir / "features.dev.xlft")
    preds = predict_split(params, model_cfg, dev_split, dev_feats, vocab)
    dev_acc = float(np.mean(preds == np.array([ex.label for ex in dev_split])))
    metrics = {"strategy": strategy, "seed": seed, "dev_accuracy": dev_acc}
    if masks is not None:
        prunable = sum(params[name].data.size for name in masks)
        metrics["sparsity"] = sparsity_report(masks, prunable, params.num_params())
    _write_json(out_dir / f"metrics.{strategy}.seed{seed}.json", metrics)
    return dev_acc


def cmd_train(args) -> int:
    cfg = load_config(args)
    data_dir = Path(cfg["data"]["dir"])
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    spec, _, vocab, lexicon = _load_data_dir(data_dir)
    for seed in cfg["seeds"]:
        dev_acc = _train_one_seed(cfg, seed, spec, vocab, lexicon, data_dir, out_dir)
        print(f"[{cfg['strategy']}] seed {seed}: dev accuracy {dev_acc:.4f}")
    _write_manifest(out_dir, cfg, cfg["strategy"])
    return 0


# ---------------------------------------------------------------------------
# evaluation


def _load_checkpoint(path: Path) -> tuple[ParamSet, dict]:
    entries = load_container(path)
    params = ParamSet()
    masks = {}
    for name, arr in entries.items():
        if name.endswith(".mask"):
            masks[name[: -len(".mask")]] = arr
        else:
            params.add(name, arr)
    return params, masks


def _eval_threads() -> int:
    raw = os.environ.get("XLFT_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"XLFT_THREADS must be an integer, got {raw!r}")
    return max(1, threads)


def cmd_evaluate(args) -> int:
    cfg = load_config(args)
    strategy = cfg["strategy"]
    data_dir = Path(cfg["data"]["dir"])
    out_dir = Path(cfg["out"])
    spec, taxonomy, vocab, _ = _load_data_dir(data_dir)

    test_feats = load_features(data_dir / "features.test.xlft")
    splits = {"en": load_split(data_dir / "test.jsonl")}
    for lang in spec.languages:
        splits[lang] = load_split(data_dir / f"test.{lang}.jsonl")

    runs = []
    confusion_raw: dict[str, list[tuple[list, list]]] = {lang: [] for lang in splits}
    for seed in cfg["seeds"]:
        ckpt = out_dir / f"ckpt.{strategy}.seed{seed}.xlft"
        if not ckpt.exists():
            raise CheckpointError(f"missing checkpoint {ckpt}; run train first")
        params, _ = _load_checkpoint(ckpt)
        model_cfg = ModelConfig.load(ckpt.with_suffix(".config.json"))
        if model_cfg.num_labels != spec.num_labels or model_cfg.vocab_size != len(vocab):
            raise CheckpointError(f"checkpoint {ckpt} does not match the dataset at {data_dir}")

        def eval_lang(item):
            lang, examples = item
            preds = predict_split(params, model_cfg, examples, test_feats, vocab)
            pred_labels = [taxonomy.labels[i] for i in preds]
            gold_labels = [taxonomy.labels[ex.label] for ex in examples]
            return lang, evaluate_labels(pred_labels, gold_labels, taxonomy), (pred_labels, gold_labels)

        threads = _eval_threads()
        items = list(splits.items())
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(eval_lang, items))
        else:
            results = [eval_lang(item) for item in items]
        run = {}
        for lang, result, raw in results:
            run[lang] = result
            confusion_raw[lang].append(raw)
        runs.append(run)

    aggregate = aggregate_runs(runs, source_lang="en")
    confusion = {}
    for lang, chunks in confusion_raw.items():
        preds = [p for pair in chunks for p in pair[0]]
        golds = [g for pair in chunks for g in pair[1]]
        entries = confusion_report(preds, golds, taxonomy, top_n=5)
        confusion[lang] = [
            {"gold": e.gold, "pred": e.pred, "rel": e.relation, "count": e.count} for e in entries
        ]

    report = {
        "strategy": strategy,
        "seeds": cfg["seeds"],
        "per_language": aggregate["per_language"],
        "avg_excl_source": aggregate["avg_excl_source"],
        "confusion": confusion,
    }
    _write_json(out_dir / f"report.{strategy}.json", report)
    table = format_table(aggregate)
    (out_dir / f"report.{strategy}.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return 0


def cmd_report_sparsity(args) -> int:
    mask_path = Path(args.mask)
    if not mask_path.exists():
        raise CheckpointError(f"mask container not found: {mask_path}")
    _, masks = _load_checkpoint(mask_path)
    if not masks:
        raise CheckpointError(f"{mask_path} holds no '<param>.mask' entries")
    model_cfg = ModelConfig.load(args.model_config)
    params = init_model(model_cfg)
    prunable = sum(params[name].data.size for name in prunable_param_names(params))
    report = sparsity_report(masks, prunable, params.num_params())
    text = json.dumps(report, indent=1, sort_keys=True)
    print(text)
    if args.out:
        _write_json(Path(args.out) / "sparsity.json", report)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xlft", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--strategy", choices=STRATEGIES, help="training strategy")
        p.add_argument("--seed", type=int, help="use a single seed")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("gen-data", help="generate the synthetic corpus")
    common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("build-distances", help="build label distance matrices")
    common(p)
    p.set_defaults(func=cmd_build_distances)

    p = sub.add_parser("train", help="train one strategy over the configured seeds")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate checkpoints and aggregate seeds")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report-sparsity", help="sparsity of a mask container")
    p.add_argument("--mask", required=True, help="XLFT container with .mask entries")
    p.add_argument("--model-config", required=True, help="model config JSON sidecar")
    p.add_argument("--out", help="directory for sparsity.json")
    p.set_defaults(func=cmd_report_sparsity)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except XlftError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
