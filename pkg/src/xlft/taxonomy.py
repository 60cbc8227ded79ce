"""Label-space structure: relation graph, embeddings, and risk matrices.

Two sources produce the C x C distance matrix d(candidate, truth) that the
prior loss consumes: an explicit synonym/hypernym relation graph with the
piecewise 0 / d1 / d2 / 1 rule, and cosine distances between label word
vectors.  Both live on the same [0, 1] risk scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import load_container, save_container
from .errors import ConfigError, ParseError, TaxonomyError

SYNONYM = "synonym"
HYPONYM = "hyponym"
HYPERNYM = "hypernym"
UNRELATED = "unrelated"


@dataclass
class LabelTaxonomy:
    """Labels partitioned into synsets, plus a hypernym DAG over synsets."""

    labels: list[str]
    synset_of: list[int]
    hypernym_edges: list[tuple[int, int]]
    _index: dict[str, int] = field(init=False, repr=False)
    _ancestors: list[frozenset[int]] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.labels:
            raise TaxonomyError("taxonomy has an empty label list")
        if len(set(self.labels)) != len(self.labels):
            dup = sorted({x for x in self.labels if self.labels.count(x) > 1})
            raise TaxonomyError(f"duplicate label(s): {dup}")
        if len(self.synset_of) != len(self.labels):
            raise TaxonomyError("every label must map to exactly one synset")
        num_synsets = max(self.synset_of) + 1 if self.synset_of else 0
        for child, parent in self.hypernym_edges:
            if not (0 <= child < num_synsets and 0 <= parent < num_synsets):
                raise TaxonomyError(f"unknown synset reference in edge ({child}, {parent})")
        self._index = {label: i for i, label in enumerate(self.labels)}
        self._ancestors = _transitive_ancestors(num_synsets, self.hypernym_edges)

    @property
    def num_labels(self) -> int:
        return len(self.labels)

    def label_index(self, label: str) -> int:
        if label not in self._index:
            raise TaxonomyError(f"unknown label {label!r}")
        return self._index[label]

    def synset(self, label: str) -> int:
        return self.synset_of[self.label_index(label)]


def _transitive_ancestors(num_synsets: int, edges: list[tuple[int, int]]) -> list[frozenset[int]]:
    """Reachability over hypernym edges; rejects cyclic graphs."""
    parents: list[list[int]] = [[] for _ in range(num_synsets)]
    for child, parent in edges:
        parents[child].append(parent)

    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * num_synsets
    ancestors: list[frozenset[int] | None] = [None] * num_synsets

    def visit(s: int) -> frozenset[int]:
        if color[s] == GRAY:
            raise TaxonomyError(f"cycle in hypernym graph through synset {s}")
        if color[s] == BLACK:
            return ancestors[s]
        color[s] = GRAY
        acc: set[int] = set()
        for p in parents[s]:
            if p == s:
                raise TaxonomyError(f"cycle in hypernym graph through synset {s}")
            acc.add(p)
            acc |= visit(p)
        color[s] = BLACK
        ancestors[s] = frozenset(acc)
        return ancestors[s]

    for s in range(num_synsets):
        visit(s)
    return list(ancestors)


def load_taxonomy(path) -> LabelTaxonomy:
    """Read the taxonomy JSON: labels, synsets (a partition), hypernym pairs."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise TaxonomyError(f"taxonomy file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path=path)

    for key in ("labels", "synsets", "hypernyms"):
        if key not in doc:
            raise ParseError(f"taxonomy missing field {key!r}", path=path)
    labels = list(doc["labels"])
    synsets = doc["synsets"]
    synset_of = [-1] * len(labels)
    for sid, members in enumerate(synsets):
        for li in members:
            if not (0 <= li < len(labels)):
                raise TaxonomyError(f"synset {sid} references unknown label index {li}")
            if synset_of[li] != -1:
                raise TaxonomyError(f"label {labels[li]!r} appears in more than one synset")
            synset_of[li] = sid
    if any(s == -1 for s in synset_of):
        missing = [labels[i] for i, s in enumerate(synset_of) if s == -1]
        raise TaxonomyError(f"labels not covered by any synset: {missing}")
    edges = [(int(c), int(p)) for c, p in doc["hypernyms"]]
    return LabelTaxonomy(labels=labels, synset_of=synset_of, hypernym_edges=edges)


def save_taxonomy(tax: LabelTaxonomy, path) -> None:
    num_synsets = max(tax.synset_of) + 1
    synsets = [[] for _ in range(num_synsets)]
    for li, sid in enumerate(tax.synset_of):
        synsets[sid].append(li)
    doc = {"labels": tax.labels, "synsets": synsets, "hypernyms": [list(e) for e in tax.hypernym_edges]}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def relation(tax: LabelTaxonomy, candidate: str, truth: str) -> str:
    """synonym | hyponym | hypernym | unrelated, judged candidate-vs-truth.

    A label is its own synonym.  Candidate is a hyponym of truth when a
    hypernym-edge path leads from candidate's synset up to truth's synset.
    """
    cand_syn = tax.synset(candidate)
    truth_syn = tax.synset(truth)
    if cand_syn == truth_syn:
        return SYNONYM
    if truth_syn in tax._ancestors[cand_syn]:
        return HYPONYM
    if cand_syn in tax._ancestors[truth_syn]:
        return HYPERNYM
    return UNRELATED


@dataclass
class DistanceMatrix:
    """Risk matrix over the label space; entry (c, t) = d(label c, truth t)."""

    values: np.ndarray
    source: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        c = self.values.shape[0]
        if self.values.shape != (c, c):
            raise ConfigError(f"distance matrix must be square, got {self.values.shape}")


def wordnet_distance_matrix(tax: LabelTaxonomy, d1: float, d2: float) -> DistanceMatrix:
    """Piecewise distances: 0 synonyms, d1 hyponym, d2 hypernym, 1 otherwise."""
    if not (0.0 < d1 < 1.0 and 0.0 < d2 < 1.0):
        raise ConfigError(f"d1 and d2 must lie strictly inside (0, 1), got d1={d1}, d2={d2}")
    c = tax.num_labels
    values = np.ones((c, c))
    lookup = {SYNONYM: 0.0, HYPONYM: float(d1), HYPERNYM: float(d2), UNRELATED: 1.0}
    for i in range(c):
        for j in range(c):
            values[i, j] = lookup[relation(tax, tax.labels[i], tax.labels[j])]
    return DistanceMatrix(values=values, source="wordnet")


class EmbeddingTable:
    """word -> fixed-dimension float vector (GloVe-style)."""

    def __init__(self, vectors: dict[str, np.ndarray] | None = None, dim: int = 300):
        self.dim = dim
        self.vectors: dict[str, np.ndarray] = {}
        for word, vec in (vectors or {}).items():
            self.add(word, vec)

    def add(self, word: str, vec) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if self.vectors and vec.shape != (self.dim,):
            raise ConfigError(f"embedding for {word!r} has dim {vec.shape}, table dim is {self.dim}")
        if not self.vectors:
            self.dim = int(vec.shape[0])
        if not np.isfinite(vec).all():
            raise ConfigError(f"embedding for {word!r} contains non-finite values")
        self.vectors[word] = vec

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


def load_embeddings(path) -> EmbeddingTable:
    """GloVe text layout: one line per word, word then D space-separated floats."""
    path = Path(path)
    table = EmbeddingTable()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) < 2:
                raise ParseError("expected 'word v1 v2 ...'", path=path, line=lineno)
            try:
                vec = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise ParseError(f"non-numeric embedding value for {parts[0]!r}", path=path, line=lineno)
            try:
                table.add(parts[0], vec)
            except ConfigError as exc:
                raise ParseError(exc.message, path=path, line=lineno)
    return table


def save_embeddings(table: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word, vec in table.vectors.items():
            fh.write(word + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def label_vector(emb: EmbeddingTable, label: str) -> np.ndarray | None:
    """Vector for a label; multi-word labels average their in-vocabulary words.

    Returns None when no word of the label is in the table (absence is a
    value, not an error).
    """
    words = label.split()
    found = [emb.vectors[w] for w in words if w in emb.vectors]
    if not found:
        return None
    return np.mean(found, axis=0)


def embedding_distance_matrix(emb: EmbeddingTable, labels: list[str]) -> DistanceMatrix:
    """Cosine distances clamped to [0, 1]; absent or zero-norm vectors score 1."""
    if not labels:
        raise ConfigError("embedding_distance_matrix: empty label list")
    c = len(labels)
    unit: list[np.ndarray | None] = []
    for label in labels:
        v = label_vector(emb, label)
        if v is not None:
            norm = np.linalg.norm(v)
            v = v / norm if norm > 0 else None
        unit.append(v)

    values = np.ones((c, c))
    for i in range(c):
        values[i, i] = 0.0
        for j in range(i + 1, c):
            if unit[i] is None or unit[j] is None:
                d = 1.0
            else:
                d = min(max(1.0 - float(unit[i] @ unit[j]), 0.0), 1.0)
            values[i, j] = d
            values[j, i] = d
    return DistanceMatrix(values=values, source="embedding")


def save_distances(path, matrices: list[DistanceMatrix]) -> None:
    save_container(path, {f"distance.{m.source}": m.values for m in matrices})


def load_distances(path) -> dict[str, DistanceMatrix]:
    out = {}
    for name, arr in load_container(path).items():
        if name.startswith("distance."):
            source = name[len("distance.") :]
            out[source] = DistanceMatrix(values=arr, source=source)
    return out
