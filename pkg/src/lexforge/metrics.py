"""Evaluation: token-level normalization F1, Integrity Score, sentence Accuracy.

F1 is computed over changed positions: precision = correctly normalized /
predicted-changed, recall = correctly normalized / gold-changed. Integrity
is the fraction of gold-KEEP positions left untouched. Accuracy is exact
whole-sentence label-list match. Correctness is case- and
diacritic-sensitive exact string match.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

from lexforge.textcore import KEEP, AlignedSentence


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    integrity: float
    accuracy: float
    gold_changed: int
    predicted_changed: int
    correct_changed: int
    gold_keep: int
    kept: int
    sentences: int
    exact_sentences: int

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(gold: list[AlignedSentence],
             predicted: list[list[str]]) -> MetricsReport:
    """Score predicted label lists against gold-aligned sentences."""
    if len(gold) != len(predicted):
        raise MetricsError(
            f"{len(gold)} gold sentences but {len(predicted)} predictions"
        )
    gold_changed = predicted_changed = correct_changed = 0
    gold_keep = kept = exact = 0
    for si, (sentence, preds) in enumerate(zip(gold, predicted)):
        if len(preds) != len(sentence.gold_labels):
            raise MetricsError(
                f"sentence {si}: {len(sentence.gold_labels)} tokens but "
                f"{len(preds)} predictions"
            )
        if list(preds) == list(sentence.gold_labels):
            exact += 1
        for g, p in zip(sentence.gold_labels, preds):
            if g == KEEP:
                gold_keep += 1
                if p == KEEP:
                    kept += 1
            else:
                gold_changed += 1
            if p != KEEP:
                predicted_changed += 1
                if g != KEEP and p == g:
                    correct_changed += 1
    precision = correct_changed / predicted_changed if predicted_changed else 0.0
    recall = correct_changed / gold_changed if gold_changed else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)
    integrity = kept / gold_keep if gold_keep else 1.0
    accuracy = exact / len(gold) if gold else 1.0
    return MetricsReport(precision, recall, f1, integrity, accuracy,
                         gold_changed, predicted_changed, correct_changed,
                         gold_keep, kept, len(gold), exact)
