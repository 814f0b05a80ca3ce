"""Tokenization, Vietnamese diacritics handling, and token alignment.

Everything here is a pure function over immutable inputs.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass

import numpy as np

# Tokens consisting solely of these characters are punctuation tokens, and
# they are split off from word tokens during tokenization.
PUNCT_CHARS = frozenset(".,!?:;()\"'…")

# Distinguished label: "output the source token verbatim". Kept out of the
# printable-text space so it can never collide with a real target string.
KEEP = "<KEEP>"


@dataclass(frozen=True)
class Token:
    """One surface token with its code-point span in the original text."""

    surface: str
    char_start: int
    char_end: int
    is_punct: bool


@dataclass(frozen=True)
class AlignedSentence:
    """Source tokens paired with per-token gold labels (KEEP or target)."""

    source_tokens: tuple[Token, ...]
    gold_labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.source_tokens) != len(self.gold_labels):
            raise ValueError(
                f"{len(self.source_tokens)} tokens but {len(self.gold_labels)} labels"
            )


@dataclass(frozen=True)
class PerturbConfig:
    """Diacritics-removal perturbation: per-token strip probability and seed."""

    p: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into word and punctuation tokens with recorded spans.

    Whitespace separates tokens; every punctuation character becomes its own
    single-character token, so "a,b" yields ["a", ",", "b"].
    """
    tokens: list[Token] = []
    start = None
    for i, ch in enumerate(text):
        if ch.isspace() or ch in PUNCT_CHARS:
            if start is not None:
                tokens.append(Token(text[start:i], start, i, False))
                start = None
            if ch in PUNCT_CHARS:
                tokens.append(Token(ch, i, i + 1, True))
        elif start is None:
            start = i
    if start is not None:
        tokens.append(Token(text[start:], start, len(text), False))
    return tokens


def strip_diacritics(text: str) -> str:
    """Remove Vietnamese diacritics: NFD, drop combining marks, then đ→d."""
    decomposed = unicodedata.normalize("NFD", text)
    stripped = "".join(c for c in decomposed if not 0x0300 <= ord(c) <= 0x036F)
    recomposed = unicodedata.normalize("NFC", stripped)
    return recomposed.replace("đ", "d").replace("Đ", "D")


def perturb_sentence(tokens: list[Token], cfg: PerturbConfig) -> list[Token]:
    """Strip diacritics from each non-punctuation token with probability cfg.p.

    Deterministic for a given (tokens, cfg); punctuation is never touched.
    Spans are preserved (stripping keeps the code-point count of Vietnamese
    text unchanged).
    """
    rng = np.random.default_rng(cfg.seed)
    out: list[Token] = []
    for tok in tokens:
        if not tok.is_punct and rng.random() < cfg.p:
            out.append(Token(strip_diacritics(tok.surface), tok.char_start,
                             tok.char_end, tok.is_punct))
        else:
            out.append(tok)
    return out


def _char_edit_distance(a: str, b: str) -> int:
    """Plain Levenshtein distance over code points."""
    if a == b:
        return 0
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1,
                           prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[len(b)]


def _sub_cost(a: str, b: str) -> float:
    return _char_edit_distance(a, b) / max(len(a), len(b))


def align(source_tokens: list[str], target_tokens: list[str]) -> list[str]:
    """Monotone minimum-cost alignment producing one label per source token.

    Match/substitution costs the character-level normalized edit distance,
    insertion and deletion cost 1.0. Unaligned target tokens are appended,
    space-separated, to the nearest preceding aligned source token's label
    (or the first following one if none precedes). A source token aligned to
    an identical target gets KEEP; a deleted source token gets "".

    DP ties are broken by preferring substitution over insertion over
    deletion.
    """
    if bool(source_tokens) != bool(target_tokens):
        raise ValueError("exactly one of source/target is empty")
    m, n = len(source_tokens), len(target_tokens)
    if m == 0:
        return []

    SUB, INS, DEL = 0, 1, 2
    cost = np.zeros((m + 1, n + 1))
    move = np.zeros((m + 1, n + 1), dtype=np.int8)
    for j in range(1, n + 1):
        cost[0][j] = j
        move[0][j] = INS
    for i in range(1, m + 1):
        cost[i][0] = i
        move[i][0] = DEL
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            options = (
                (cost[i - 1][j - 1] + _sub_cost(source_tokens[i - 1],
                                                target_tokens[j - 1]), SUB),
                (cost[i][j - 1] + 1.0, INS),
                (cost[i - 1][j] + 1.0, DEL),
            )
            cost[i][j], move[i][j] = min(options, key=lambda o: o[0])

    # Backtrace: per source index, the substituted target (or None), plus
    # where each inserted target attaches.
    matched: list[int | None] = [None] * m
    insertions: list[tuple[int, int]] = []  # (source idx it follows, target idx)
    i, j = m, n
    while i > 0 or j > 0:
        op = move[i][j]
        if op == SUB:
            i, j = i - 1, j - 1
            matched[i] = j
        elif op == INS:
            j -= 1
            insertions.append((i - 1, j))  # follows source i-1 (may be -1)
        else:
            i -= 1

    parts: list[list[int]] = [[t] if t is not None else [] for t in matched]
    aligned_idx = [k for k in range(m) if matched[k] is not None]
    for after, t in insertions:
        preceding = [k for k in aligned_idx if k <= after]
        host = preceding[-1] if preceding else aligned_idx[0] if aligned_idx else 0
        parts[host].append(t)
    labels = []
    for k, ps in enumerate(parts):
        label = " ".join(target_tokens[t] for t in sorted(ps))
        labels.append(KEEP if label == source_tokens[k] else label)
    return labels
