"""Synthetic VQA-style corpus with a structured label space.

The generator builds everything the pipeline needs at desk scale: labels
partitioned into synsets under a hypernym DAG, label word vectors that
cluster by synset, bilingual lexicons covering the whole question
vocabulary, and image/question pairs where both modalities matter.  Each
question carries cue words naming an unordered pair of candidate synsets
and the image shows exactly one pair member among distractor objects, so
the question alone gives a 2-way ambiguity and the image alone a 3-way
one.  The gold label is usually the answer synset's primary member but
sometimes another member, so near-miss predictions are semantically
related, as in real answer spaces.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import load_container, save_container
from .codemix import BilingualLexicon, translate_full
from .errors import ConfigError, ParseError
from .rng import RngStream
from .taxonomy import EmbeddingTable, LabelTaxonomy

_FIELDS = ("qid", "question", "image_id", "label", "lang")

# generator shape knobs
_EMB_DIM = 50
_EMB_NOISE = 0.45
_IMAGE_NOISE = 1.0
_CUES_PER_PAIR = 2
_PAIRS_PER_SYNSET = 3  # random pairs beyond the covering chain, per 2 synsets
_CUE_NOISE = 0.1
_SYNONYM_SAMPLE_RATE = 0.4
_HYPERNYM_SAMPLE_RATE = 0.4
_PARENT_MIX = 0.85
_FILLER_ZIPF = 1.1
_NUM_DISTRACTORS = 2
_ANSWER_REGION_SHARE = 0.6
_CUE_FREE_RATE = 0.3
_QUESTION_LEN = (6, 12)

_CONSONANTS = list("bdfgklmnprstvz")
_VOWELS = list("aeiou")


@dataclass
class VqaExample:
    qid: str
    question: list[str]
    image_id: str
    label: int
    lang: str


@dataclass
class SyntheticSpec:
    num_labels: int = 64
    num_synsets: int = 24
    hypernym_density: float = 0.15
    num_train: int = 5000
    num_dev: int = 500
    num_test: int = 1000
    vocab_size: int = 3600
    num_regions: int = 8
    feat_dim: int = 16
    languages: list[str] = field(default_factory=lambda: ["xx", "yy", "zz"])
    translations_per_word: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.num_synsets > self.num_labels:
            raise ConfigError(
                f"num_synsets ({self.num_synsets}) cannot exceed num_labels ({self.num_labels})"
            )
        for key in ("num_labels", "num_synsets", "num_train", "num_dev", "num_test",
                    "vocab_size", "num_regions", "feat_dim", "translations_per_word"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive")
        if not (0.0 <= self.hypernym_density <= 1.0):
            raise ConfigError("hypernym_density must be in [0, 1]")
        if not self.languages:
            raise ConfigError("at least one target language is required")
        if len(set(self.languages)) != len(self.languages):
            raise ConfigError("duplicate language codes")
        per_word = 1 + len(self.languages) * self.translations_per_word
        self.source_vocab = (self.vocab_size - 1) // per_word
        self.num_pairs = (self.num_synsets + 1) // 2 + self.num_synsets
        needed = self.num_pairs * _CUES_PER_PAIR + 8
        if self.source_vocab < needed:
            raise ConfigError(
                f"vocab_size {self.vocab_size} leaves only {self.source_vocab} source words; "
                f"need at least {needed} for {self.num_pairs} cue pairs plus fillers"
            )


@dataclass
class SyntheticDataset:
    spec: SyntheticSpec
    splits: dict[str, list[VqaExample]]
    taxonomy: LabelTaxonomy
    embeddings: EmbeddingTable
    lexicon: BilingualLexicon
    features: dict[str, np.ndarray]
    vocab: dict[str, int]


def _word_maker(rng: np.random.Generator):
    used: set[str] = set()

    def make(syllables: int = 2) -> str:
        while True:
            word = "".join(
                _CONSONANTS[int(rng.integers(len(_CONSONANTS)))]
                + _VOWELS[int(rng.integers(len(_VOWELS)))]
                for _ in range(syllables)
            )
            if word not in used:
                used.add(word)
                return word

    return make


def generate_synthetic(spec: SyntheticSpec) -> SyntheticDataset:
    """Deterministically build corpus, taxonomy, embeddings, and lexicons."""
    streams = RngStream(spec.seed)
    make_word = _word_maker(streams.rng("words"))

    labels = [make_word(3) for _ in range(spec.num_labels)]

    # partition labels into synsets; member 0 of each synset is its primary
    rng = streams.rng("synsets")
    synset_of = list(range(spec.num_synsets))
    synset_of += [int(rng.integers(spec.num_synsets)) for _ in range(spec.num_labels - spec.num_synsets)]
    members: list[list[int]] = [[] for _ in range(spec.num_synsets)]
    for li, sid in enumerate(synset_of):
        members[sid].append(li)

    edges = []
    parents_of: list[list[int]] = [[] for _ in range(spec.num_synsets)]
    for child in range(1, spec.num_synsets):
        for parent in range(child):
            if rng.random() < spec.hypernym_density:
                edges.append((child, parent))
                parents_of[child].append(parent)
    taxonomy = LabelTaxonomy(labels=labels, synset_of=synset_of, hypernym_edges=edges)

    # label embeddings cluster by synset; a synset correlates with its
    # first-listed (anchor) hypernym parent
    rng = streams.rng("embeddings")
    base = np.empty((spec.num_synsets, _EMB_DIM))
    for sid in range(spec.num_synsets):
        own = rng.normal(0.0, 1.0, size=_EMB_DIM)
        if parents_of[sid]:
            anchor = base[parents_of[sid][0]]
            base[sid] = _PARENT_MIX * anchor + np.sqrt(1 - _PARENT_MIX**2) * own
        else:
            base[sid] = own
    table = EmbeddingTable()
    for li, sid in enumerate(synset_of):
        table.add(labels[li], base[sid] + rng.normal(0.0, _EMB_NOISE, size=_EMB_DIM))

    # candidate-pair structure: a covering chain so every synset is cued,
    # then extra random pairs; each pair owns its cue words
    rng = streams.rng("pairs")
    chain = rng.permutation(spec.num_synsets)
    pairs: list[tuple[int, int]] = []
    for i in range(0, spec.num_synsets - 1, 2):
        pairs.append((int(chain[i]), int(chain[i + 1])))
    if spec.num_synsets % 2 == 1:
        pairs.append((int(chain[-1]), int(chain[0])))
    while len(pairs) < spec.num_pairs:
        a, b = rng.integers(spec.num_synsets, size=2)
        if a != b:
            pairs.append((int(a), int(b)))
    cue_words = [[make_word(2) for _ in range(_CUES_PER_PAIR)] for _ in pairs]

    num_fillers = spec.source_vocab - spec.num_pairs * _CUES_PER_PAIR
    fillers = [make_word(2) for _ in range(num_fillers)]
    source_words = [w for group in cue_words for w in group] + fillers
    # Zipf-ish filler usage: rare fillers are easy to overfit in English
    filler_weights = 1.0 / np.arange(1, num_fillers + 1) ** _FILLER_ZIPF
    filler_weights /= filler_weights.sum()

    lexicon = BilingualLexicon()
    for word in source_words:
        for lang in spec.languages:
            for _ in range(spec.translations_per_word):
                lexicon.add(lang, word, make_word(2))

    vocab: dict[str, int] = {"<pad>": 0}
    for word in source_words:
        vocab[word] = len(vocab)
    for lang in spec.languages:
        for word in source_words:
            for foreign in lexicon.translations(lang, word):
                if foreign not in vocab:
                    vocab[foreign] = len(vocab)

    prototypes = streams.rng("prototypes").normal(0.0, 1.0, size=(spec.num_synsets, spec.feat_dim))

    features: dict[str, np.ndarray] = {}
    splits: dict[str, list[VqaExample]] = {}
    counter = 0
    for split, count in (("train", spec.num_train), ("dev", spec.num_dev), ("test", spec.num_test)):
        rng = streams.rng("examples", example_id=split)
        examples = []
        for _ in range(count):
            pair_id = int(rng.integers(len(pairs)))
            pair = pairs[pair_id]
            sid = pair[int(rng.integers(2))]
            # training annotations are ambiguous: the gold is sometimes a
            # synonym of the answer, sometimes a label from its anchor
            # hypernym synset; dev/test golds are canonical
            label_synset = sid
            hyp_draw, syn_draw = rng.random(), rng.random()
            if split == "train":
                if parents_of[sid] and hyp_draw < _HYPERNYM_SAMPLE_RATE:
                    label_synset = parents_of[sid][0]
                group = members[label_synset]
                if len(group) > 1 and syn_draw < _SYNONYM_SAMPLE_RATE:
                    label = group[int(rng.integers(len(group)))]
                else:
                    label = group[0]
            else:
                label = members[sid][0]

            # the question names the candidate pair via its cue words; some
            # questions carry no cue and are answerable from the image alone
            length = int(rng.integers(_QUESTION_LEN[0], _QUESTION_LEN[1] + 1))
            if rng.random() < _CUE_FREE_RATE:
                cues = []
            else:
                cues = list(cue_words[pair_id])
                if rng.random() < _CUE_NOISE:
                    other = int(rng.integers(len(pairs)))
                    cues[int(rng.integers(len(cues)))] = cue_words[other][int(rng.integers(_CUES_PER_PAIR))]
            picks = rng.choice(num_fillers, size=length - len(cues), p=filler_weights)
            words = cues + [fillers[i] for i in picks]
            order = rng.permutation(length)
            question = [words[i] for i in order]

            # the image shows the answer synset plus distractors outside the
            # pair; the asked-about object tends to dominate the regions
            shown = [sid]
            while len(shown) < 1 + _NUM_DISTRACTORS:
                d = int(rng.integers(spec.num_synsets))
                if d not in pair and d not in shown:
                    shown.append(d)
            weights = np.full(len(shown), (1.0 - _ANSWER_REGION_SHARE) / _NUM_DISTRACTORS)
            weights[0] = _ANSWER_REGION_SHARE
            region_owner = np.asarray(shown)[rng.choice(len(shown), size=spec.num_regions, p=weights)]
            region_owner[int(rng.integers(spec.num_regions))] = sid  # answer always visible
            image_id = f"img{counter:06d}"
            features[image_id] = prototypes[region_owner] + rng.normal(
                0.0, _IMAGE_NOISE, size=(spec.num_regions, spec.feat_dim)
            )
            examples.append(
                VqaExample(qid=f"q{counter:06d}", question=question, image_id=image_id,
                           label=label, lang="en")
            )
            counter += 1
        splits[split] = examples

    return SyntheticDataset(
        spec=spec, splits=splits, taxonomy=taxonomy, embeddings=table,
        lexicon=lexicon, features=features, vocab=vocab,
    )


def build_target_test_sets(
    test_split: list[VqaExample],
    lexicon: BilingualLexicon,
    languages: list[str],
) -> dict[str, list[VqaExample]]:
    """Whole-question translations of the test split, one per language."""
    out = {}
    for lang in languages:
        out[lang] = [
            VqaExample(
                qid=ex.qid,
                question=translate_full(ex.question, lexicon, lang),
                image_id=ex.image_id,
                label=ex.label,
                lang=lang,
            )
            for ex in test_split
        ]
    return out


# ---------------------------------------------------------------------------
# split and feature-store i/o


def save_split(split: list[VqaExample], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for ex in split:
            fh.write(json.dumps(asdict(ex)) + "\n")


def load_split(path) -> list[VqaExample]:
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc}", path=path, line=lineno)
            missing = [k for k in _FIELDS if k not in record]
            if missing:
                raise ParseError(f"missing field(s) {missing}", path=path, line=lineno)
            unknown = [k for k in record if k not in _FIELDS]
            if unknown:
                raise ParseError(f"unknown field(s) {unknown}", path=path, line=lineno)
            out.append(VqaExample(**record))
    return out


def save_features(features: dict[str, np.ndarray], path) -> None:
    save_container(path, features)


def load_features(path) -> dict[str, np.ndarray]:
    return load_container(path)


def save_vocab(vocab: dict[str, int], path) -> None:
    Path(path).write_text(json.dumps(vocab, indent=0) + "\n", encoding="utf-8")


def load_vocab(path) -> dict[str, int]:
    return json.loads(Path(path).read_text(encoding="utf-8"))
