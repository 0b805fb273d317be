"""Subword vocabulary construction, domain-token extension, and encoding.

The vocabulary is built by repeatedly merging the most frequent adjacent
symbol pair (weighted by word frequency) starting from single characters.
Encoding segments each whitespace word by greedy longest-prefix match; no
continuation markers are used, so surface forms are plain strings.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

PAD_ID = 0
UNK_ID = 1
CLS_ID = 2
SPECIAL_TOKENS = ("[PAD]", "[UNK]", "[CLS]")
MAX_LEN = 128

# frequent in-domain words that pretrained-style vocabularies split apart;
# appending them as whole tokens is the vocabulary-extension step
DEFAULT_DOMAIN_TOKENS = (
    "covid-19",
    "covid19",
    "coronavirus",
    "pandemic",
    "indiafightscorona",
    "lockdown",
)

_ADDED_MARKER = "#ADDED"


class CorpusEmpty(ValueError):
    """build_vocab needs at least one word of text."""


class TokenNotAdded(KeyError):
    """The token is not one of the vocabulary's appended domain tokens."""


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token table. IDs are contiguous from 0; specials occupy
    0/1/2 and appended domain tokens occupy the highest IDs."""

    id_to_token: tuple
    added_tokens: tuple = ()
    token_to_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tokens = self.id_to_token
        if tokens[: len(SPECIAL_TOKENS)] != SPECIAL_TOKENS:
            raise ValueError(f"ids 0..2 must be {SPECIAL_TOKENS}")
        mapping = {t: i for i, t in enumerate(tokens)}
        if len(mapping) != len(tokens):
            raise ValueError("duplicate surface forms in vocabulary")
        if self.added_tokens and tokens[-len(self.added_tokens) :] != tuple(self.added_tokens):
            raise ValueError("added_tokens must occupy the highest IDs")
        object.__setattr__(self, "token_to_id", mapping)

    def __len__(self):
        return len(self.id_to_token)

    @property
    def base_size(self) -> int:
        return len(self.id_to_token) - len(self.added_tokens)


@dataclass(frozen=True)
class TokenSequence:
    """Fixed-length ID row: ids[0] is CLS, positions >= true_length are PAD."""

    ids: np.ndarray
    mask: np.ndarray
    true_length: int


def build_vocab(corpus: Iterable[str], target_size: int) -> Vocabulary:
    """Grow a subword vocabulary by frequency-ordered pair merges.

    Starts from all single characters seen, then repeatedly merges the most
    frequent adjacent pair (ties to the lexicographically smallest pair)
    until the vocabulary reaches target_size or no pair occurs at least
    twice. Deterministic given corpus content.
    """
    if target_size < 64:
        raise ValueError(f"target_size must be >= 64, got {target_size}")
    word_freq = Counter()
    for line in corpus:
        word_freq.update(line.split())
    if not word_freq:
        raise CorpusEmpty("no words in corpus")

    words = {w: tuple(w) for w in word_freq}
    alphabet = sorted({c for w in word_freq for c in w})
    tokens = list(SPECIAL_TOKENS) + alphabet

    while len(tokens) < target_size:
        pair_counts = Counter()
        for w, sym in words.items():
            f = word_freq[w]
            for a, b in zip(sym, sym[1:]):
                pair_counts[(a, b)] += f
        if not pair_counts:
            break
        top = max(pair_counts.values())
        if top < 2:
            break
        best = min(p for p, c in pair_counts.items() if c == top)
        merged = best[0] + best[1]
        for w, sym in words.items():
            out = []
            i = 0
            while i < len(sym):
                if i + 1 < len(sym) and (sym[i], sym[i + 1]) == best:
                    out.append(merged)
                    i += 2
                else:
                    out.append(sym[i])
                    i += 1
            words[w] = tuple(out)
        if merged not in tokens:
            tokens.append(merged)

    return Vocabulary(id_to_token=tuple(tokens))


def extend_vocab(vocab: Vocabulary, new_tokens: Sequence[str]) -> tuple:
    """Append unseen tokens at fresh highest IDs; returns (vocabulary, n_added).

    Existing tokens (and repeats within new_tokens) are skipped silently.
    No existing ID changes, so embedding tables stay row-compatible.
    """
    fresh = []
    for t in new_tokens:
        if t not in vocab.token_to_id and t not in fresh:
            fresh.append(t)
    if not fresh:
        return vocab, 0
    return (
        Vocabulary(
            id_to_token=vocab.id_to_token + tuple(fresh),
            added_tokens=vocab.added_tokens + tuple(fresh),
        ),
        len(fresh),
    )


def _segment_word(word: str, token_to_id: dict, id_limit=None) -> list:
    """Greedy longest-prefix match; unmatched characters become UNK."""
    ids = []
    i = 0
    n = len(word)
    while i < n:
        match = None
        for j in range(n, i, -1):
            tid = token_to_id.get(word[i:j])
            if tid is not None and (id_limit is None or tid < id_limit):
                match = (tid, j)
                break
        if match is None:
            ids.append(UNK_ID)
            i += 1
        else:
            ids.append(match[0])
            i = match[1]
    return ids


def encode(text: str, vocab: Vocabulary, max_len: int = MAX_LEN) -> TokenSequence:
    """Cleaned text to a CLS-prefixed, PAD-filled ID row of length max_len."""
    ids = [CLS_ID]
    for word in text.split():
        ids.extend(_segment_word(word, vocab.token_to_id))
        if len(ids) >= max_len:
            break
    ids = ids[:max_len]
    true_length = len(ids)
    row = np.full(max_len, PAD_ID, dtype=np.int64)
    row[:true_length] = ids
    mask = np.zeros(max_len, dtype=np.int64)
    mask[:true_length] = 1
    return TokenSequence(ids=row, mask=mask, true_length=true_length)


def decode(seq: TokenSequence, vocab: Vocabulary) -> str:
    """Inverse of encode up to word boundaries: sub-tokens come back
    space-joined, so the round trip is exact only for in-vocabulary words."""
    out = []
    for tid in seq.ids[: seq.true_length]:
        if tid in (PAD_ID, CLS_ID):
            continue
        out.append(vocab.id_to_token[tid])
    return " ".join(out)


def init_added_token_embedding(vocab: Vocabulary, embedding_table, token: str, rng=None, std: float = 0.02) -> np.ndarray:
    """Embedding row for an appended token: mean of its base-vocabulary
    segmentation's rows, or a fresh normal sample if nothing matches."""
    if token not in vocab.added_tokens:
        raise TokenNotAdded(token)
    table = np.asarray(getattr(embedding_table, "data", embedding_table), dtype=np.float64)
    seg = _segment_word(token, vocab.token_to_id, id_limit=vocab.base_size)
    if all(t == UNK_ID for t in seg):
        if rng is None:
            rng = np.random.default_rng(0)
        return rng.normal(0.0, std, size=table.shape[1])
    return table[np.array(seg)].mean(axis=0)


def top_split_tokens(texts: Iterable[str], vocab: Vocabulary, k: int = 6) -> list:
    """Most frequent words that the vocabulary splits into 2+ sub-tokens.

    Returns (word, frequency, sub-token count) tuples, most frequent first,
    ties alphabetical. This is the audit behind the default domain-token
    list: rerun it on your own corpus to pick extension candidates.
    """
    freq = Counter()
    for line in texts:
        freq.update(line.split())
    rows = []
    for word, f in freq.items():
        n_sub = len(_segment_word(word, vocab.token_to_id))
        if n_sub >= 2:
            rows.append((word, f, n_sub))
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows[:k]


def save_vocab(vocab: Vocabulary, path) -> None:
    """One token per line (line number = ID); added tokens after #ADDED."""
    with open(path, "w", encoding="utf-8") as fh:
        for t in vocab.id_to_token[: vocab.base_size]:
            fh.write(t + "\n")
        if vocab.added_tokens:
            fh.write(_ADDED_MARKER + "\n")
            for t in vocab.added_tokens:
                fh.write(t + "\n")


def load_vocab(path) -> Vocabulary:
    base = []
    added = []
    seen_marker = False
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tok = line.rstrip("\n")
            if tok == _ADDED_MARKER:
                seen_marker = True
                continue
            (added if seen_marker else base).append(tok)
    return Vocabulary(id_to_token=tuple(base + added), added_tokens=tuple(added))
