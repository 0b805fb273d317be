"""Deterministic synthetic corpora for desk-scale training checks.

Three generators, all keyword-determined so a trivial rule achieves high
accuracy and any competent trainer should too:

- separable: label decided by one or two class-marker words per sentence.
- noisy: same, but a fraction of sentences also carry one marker of the
  opposite class (label unchanged), so counts matter, not presence.
- complementary: two disjoint marker families; each source model's
  training split uses only one family, while validation and test mix both,
  which rewards fusing the two models' scores.
"""

from __future__ import annotations

import numpy as np

from newsclf.textprep import NewsExample

FAKE_MARKERS_A = ("hoax", "miracle", "scam")
REAL_MARKERS_A = ("official", "confirmed", "ministry")
FAKE_MARKERS_B = ("conspiracy", "rumour", "fabricated")
REAL_MARKERS_B = ("study", "report", "verified")

FAKE_MARKERS = FAKE_MARKERS_A + FAKE_MARKERS_B
REAL_MARKERS = REAL_MARKERS_A + REAL_MARKERS_B

FILLER = (
    "vaccine", "city", "people", "health", "virus", "cases", "water",
    "news", "doctor", "video", "market", "school", "travel", "winter",
    "numbers", "region", "spread", "mask", "hospital", "test", "claim",
    "message", "photo", "state", "week",
)


def _sentence(rng: np.random.Generator, markers, distractors=None) -> str:
    words = list(rng.choice(markers, size=rng.integers(1, 3), replace=False))
    words += list(rng.choice(FILLER, size=rng.integers(4, 9), replace=False))
    if distractors is not None:
        words.append(str(rng.choice(distractors)))
    rng.shuffle(words)
    return " ".join(words)


def _examples(rng, n, split, prefix, fake_markers, real_markers, distractor_rate=0.0):
    out = []
    for i in range(n):
        label = int(i % 2)  # balanced: even index fake=0, odd real=1
        own = real_markers if label == 1 else fake_markers
        other = fake_markers if label == 1 else real_markers
        distract = other if rng.random() < distractor_rate else None
        text = _sentence(rng, own, distract)
        out.append(NewsExample(id=f"{prefix}-{i:04d}", raw_text=text, label=label, split=split))
    return out


def separable_corpus(n_train: int = 200, n_val: int = 50, seed: int = 0):
    """(train, validation) with labels fully determined by marker words."""
    rng = np.random.default_rng([seed, 1])
    train = _examples(rng, n_train, "train", "sep-train", FAKE_MARKERS, REAL_MARKERS)
    val = _examples(rng, n_val, "validation", "sep-val", FAKE_MARKERS, REAL_MARKERS)
    return train, val


def noisy_corpus(n_train: int = 200, n_val: int = 50, n_test: int = 50, distractor_rate: float = 0.1, seed: int = 0):
    """(train, validation, test); distractor_rate of sentences also contain
    one opposite-class marker, labels unchanged."""
    rng = np.random.default_rng([seed, 2])
    train = _examples(rng, n_train, "train", "noisy-train", FAKE_MARKERS, REAL_MARKERS, distractor_rate)
    val = _examples(rng, n_val, "validation", "noisy-val", FAKE_MARKERS, REAL_MARKERS, distractor_rate)
    test = _examples(rng, n_test, "test", "noisy-test", FAKE_MARKERS, REAL_MARKERS, distractor_rate)
    return train, val, test


def complementary_corpus(n_each: int = 200, n_val: int = 200, n_test: int = 200, seed: int = 0) -> dict:
    """{train_a, train_b, validation, test}: split A sees only family-A
    markers, split B only family B; validation and test alternate families."""
    rng = np.random.default_rng([seed, 3])
    train_a = _examples(rng, n_each, "train", "comp-a", FAKE_MARKERS_A, REAL_MARKERS_A)
    train_b = _examples(rng, n_each, "train", "comp-b", FAKE_MARKERS_B, REAL_MARKERS_B)

    def mixed(n, split, prefix):
        out = []
        for i in range(n):
            label = int(i % 2)
            family_a = i % 4 < 2  # alternate family every other pair
            fake = FAKE_MARKERS_A if family_a else FAKE_MARKERS_B
            real = REAL_MARKERS_A if family_a else REAL_MARKERS_B
            own = real if label == 1 else fake
            text = _sentence(rng, own)
            out.append(NewsExample(id=f"{prefix}-{i:04d}", raw_text=text, label=label, split=split))
        return out

    return {
        "train_a": train_a,
        "train_b": train_b,
        "validation": mixed(n_val, "validation", "comp-val"),
        "test": mixed(n_test, "test", "comp-test"),
    }
