"""Multilingual code-switching augmentation.

Per question: pick round(ratio * len) token positions among those with at
least one dictionary translation, draw a target language per position, and
substitute a randomly chosen translation.  All draws are keyed by
(seed, epoch, example_id), so one epoch replays exactly and the next epoch
re-draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ParseError
from .rng import stream_rng


class BilingualLexicon:
    """language code -> source word -> nonempty list of translations."""

    def __init__(self):
        self._maps: dict[str, dict[str, list[str]]] = {}

    def add(self, lang: str, source: str, target: str) -> None:
        table = self._maps.setdefault(lang, {})
        options = table.setdefault(source, [])
        if target not in options:
            options.append(target)

    def languages(self) -> list[str]:
        return list(self._maps)

    def contains(self, lang: str, word: str) -> bool:
        return word in self._maps.get(lang, {})

    def translations(self, lang: str, word: str) -> list[str]:
        return list(self._maps.get(lang, {}).get(word, []))

    def words(self, lang: str) -> list[str]:
        return list(self._maps.get(lang, {}))


def load_lexicons(paths: dict[str, str | Path]) -> BilingualLexicon:
    """Merge MUSE-style TSV files (one "source<TAB>target" pair per line)."""
    lexicon = BilingualLexicon()
    for lang, path in paths.items():
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or not parts[0] or not parts[1]:
                    raise ParseError(
                        f"expected 'source<TAB>target', got {len(parts)} column(s)",
                        path=path,
                        line=lineno,
                    )
                # multi-token targets occupy a single token slot
                lexicon.add(lang, parts[0], "_".join(parts[1].split()))
    return lexicon


@dataclass
class CodeMixConfig:
    select_ratio: float = 0.3
    languages: list[str] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.select_ratio <= 1.0):
            raise ConfigError(f"select_ratio must be in [0, 1], got {self.select_ratio}")
        if self.select_ratio > 0 and not self.languages:
            raise ConfigError("code-mixing enabled but no target languages configured")


def code_mix_question(
    tokens: list[str],
    lexicon: BilingualLexicon,
    config: CodeMixConfig,
    epoch: int,
    example_id: str | int,
) -> list[str]:
    """Return a new token list with selected words swapped for translations.

    Words absent from every configured lexicon are never replaced; output
    length always equals input length.
    """
    out = list(tokens)
    if config.select_ratio == 0.0 or not tokens:
        return out
    eligible = [
        i for i, word in enumerate(tokens)
        if any(lexicon.contains(lang, word) for lang in config.languages)
    ]
    wanted = int(math.floor(config.select_ratio * len(tokens) + 0.5))
    count = min(wanted, len(eligible))
    if count == 0:
        return out

    rng = stream_rng(config.seed, "codemix", epoch=epoch, example_id=example_id)
    chosen = rng.choice(len(eligible), size=count, replace=False)
    for pos in sorted(eligible[i] for i in chosen):
        word = tokens[pos]
        langs = [lang for lang in config.languages if lexicon.contains(lang, word)]
        lang = langs[int(rng.integers(len(langs)))]
        options = lexicon.translations(lang, word)
        out[pos] = options[int(rng.integers(len(options)))]
    return out


def translate_full(
    tokens: list[str],
    lexicon: BilingualLexicon,
    language: str,
    seed: int = 0,
) -> list[str]:
    """Swap every covered word for its first listed translation.

    Builds whole-question target-language variants (stand-ins for manually
    translated test sets).  Uncovered words pass through.
    """
    if language not in lexicon.languages():
        raise ConfigError(f"language {language!r} not present in the lexicon")
    out = []
    for word in tokens:
        options = lexicon.translations(language, word)
        out.append(options[0] if options else word)
    return out
