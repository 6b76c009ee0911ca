"""News corpus handling: bank registries, sentence extraction and vocabulary."""

import json
import re
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

# Trailing abbreviations that do not terminate a sentence.
ABBREVIATIONS = ("Inc.", "Ltd.", "St.", "Mr.")

_TOKEN_RE = re.compile(r"<num>|[a-z]+")
_DIGITS_RE = re.compile(r"\d+")


class RegistryError(ValueError):
    """Raised when a bank registry file is malformed."""


@dataclass(frozen=True)
class BankEntity:
    bank_id: str
    canonical_name: str
    country: str
    name_patterns: tuple

    def matcher(self):
        """Compiled case-insensitive pattern matching any spelling variant.

        The canonical name is always included so exact mentions can never
        be missed, regardless of the configured variants.
        """
        alts = list(self.name_patterns) + [re.escape(self.canonical_name)]
        joined = "|".join("(?:%s)" % a for a in alts)
        return re.compile(r"\b(?:%s)\b" % joined, re.IGNORECASE)


@dataclass(frozen=True)
class Article:
    article_id: str
    published_at: datetime
    body: str

    def __post_init__(self):
        if not self.body.strip():
            raise ValueError("article %r has an empty body" % self.article_id)


@dataclass(frozen=True)
class Sentence:
    sentence_id: str
    bank_id: str
    published_at: datetime
    tokens: tuple


@dataclass
class Vocabulary:
    token_to_index: dict
    index_to_token: list
    counts: dict
    min_count: int
    noise_power: float
    noise_probs: np.ndarray = field(repr=False)

    UNK = "<unk>"

    def __len__(self):
        return len(self.index_to_token)

    def lookup(self, token):
        """Index of ``token``, falling back to the <unk> slot."""
        idx = self.token_to_index.get(token)
        if idx is None:
            return self.token_to_index[self.UNK]
        return idx


def compile_registry(registry_file):
    """Load and validate a bank registry JSON file.

    Returns entities in file order. Raises RegistryError on duplicate ids,
    non-compiling patterns or malformed JSON.
    """
    with open(registry_file, "r", encoding="utf-8") as fh:
        raw = fh.read()
    try:
        rows = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise RegistryError(
            "malformed registry %s: line %d: %s" % (registry_file, exc.lineno, exc.msg)
        ) from exc
    if not isinstance(rows, list):
        raise RegistryError("registry %s: expected a JSON list" % registry_file)

    entities = []
    seen = set()
    for row in rows:
        bank_id = row["bank_id"]
        if bank_id in seen:
            raise RegistryError("duplicate bank_id %r in registry" % bank_id)
        seen.add(bank_id)
        patterns = tuple(row["name_patterns"])
        if not patterns:
            raise RegistryError("bank %r has no name_patterns" % bank_id)
        for pat in patterns:
            try:
                re.compile(pat, re.IGNORECASE)
            except re.error as exc:
                raise RegistryError(
                    "bank %r: pattern %r does not compile: %s" % (bank_id, pat, exc)
                ) from exc
        entity = BankEntity(
            bank_id=bank_id,
            canonical_name=row["canonical_name"],
            country=row["country"],
            name_patterns=patterns,
        )
        entity.matcher()  # fail fast if the combined alternation is invalid
        entities.append(entity)
    return entities


def split_into_sentences(body):
    """Rule-based sentence splitting.

    A sentence ends at ``. ! ?`` followed by whitespace and an uppercase
    letter, except after a known abbreviation.
    """
    text = body.strip()
    sentences = []
    start = 0
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in ".!?":
            j = i + 1
            while j < len(text) and text[j].isspace():
                j += 1
            if j > i + 1 and j < len(text) and text[j].isupper():
                chunk = text[start : i + 1]
                if not any(chunk.endswith(abbr) for abbr in ABBREVIATIONS):
                    sentences.append(chunk.strip())
                    start = j
                    i = j
                    continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def tokenize(text):
    """Normalize to lowercase tokens; digit runs collapse to ``<num>``."""
    lowered = _DIGITS_RE.sub(" <num> ", text.lower())
    return _TOKEN_RE.findall(lowered)


def extract_sentences(article, registry):
    """Entity-bearing sentences of one article, duplicated per matched bank."""
    if not registry:
        raise ValueError("registry must be non-empty")
    matchers = [(entity, entity.matcher()) for entity in registry]
    out = []
    for ordinal, raw in enumerate(split_into_sentences(article.body)):
        tokens = tuple(tokenize(raw))
        if not tokens:
            continue
        for entity, matcher in matchers:
            if matcher.search(raw):
                out.append(
                    Sentence(
                        sentence_id="%s:%d:%s" % (article.article_id, ordinal, entity.bank_id),
                        bank_id=entity.bank_id,
                        published_at=article.published_at,
                        tokens=tokens,
                    )
                )
    return out


def build_vocabulary(sentences, min_count=5, noise_power=0.75):
    """Count tokens over a sentence stream and build the lookup tables.

    Tokens below ``min_count`` are dropped; their mass is pooled into the
    ``<unk>`` slot. The noise distribution is counts raised to
    ``noise_power``, normalized.
    """
    if min_count < 1:
        raise ValueError("min_count must be positive")
    counts = {}
    empty = True
    for sent in sentences:
        empty = False
        for tok in sent.tokens:
            counts[tok] = counts.get(tok, 0) + 1
    if empty:
        raise ValueError("cannot build a vocabulary from an empty stream")

    kept = {t: c for t, c in counts.items() if c >= min_count}
    unk_count = sum(c for t, c in counts.items() if c < min_count)
    kept[Vocabulary.UNK] = kept.get(Vocabulary.UNK, 0) + unk_count

    # Frequent-first ordering, ties by token, so indices are reproducible.
    ordered = sorted(kept, key=lambda t: (-kept[t], t))
    token_to_index = {t: i for i, t in enumerate(ordered)}
    weights = np.array([float(kept[t]) ** noise_power if kept[t] else 0.0 for t in ordered])
    total = weights.sum()
    if total <= 0:
        raise ValueError("degenerate vocabulary: no token mass")
    return Vocabulary(
        token_to_index=token_to_index,
        index_to_token=ordered,
        counts=kept,
        min_count=min_count,
        noise_power=noise_power,
        noise_probs=weights / total,
    )


def read_articles(path):
    """Read a JSON-lines article file."""
    articles = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            articles.append(
                Article(
                    article_id=row["article_id"],
                    published_at=datetime.fromisoformat(row["published_at"]),
                    body=row["body"],
                )
            )
    return articles


def write_sentences(sentences, path):
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(
                json.dumps(
                    {
                        "sentence_id": s.sentence_id,
                        "bank_id": s.bank_id,
                        "published_at": s.published_at.isoformat(),
                        "tokens": list(s.tokens),
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")


def read_sentences(path):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            out.append(
                Sentence(
                    sentence_id=row["sentence_id"],
                    bank_id=row["bank_id"],
                    published_at=datetime.fromisoformat(row["published_at"]),
                    tokens=tuple(row["tokens"]),
                )
            )
    return out
