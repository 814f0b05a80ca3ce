"""Rule attention network: context-weighted aggregation of weak-rule verdicts.

Each labeling source (every weak rule, plus the student model as source R)
gets a context-conditioned attention weight sigmoid(context · embedding);
a fixed uniform source with weight 1 guarantees a valid distribution even
when everything abstains. Trained on labeled data by cross-entropy with
hand-derived gradients.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from lexforge.student import CandidateVocab, StudentParams, _sigmoid, forward
from lexforge.weakrules import RuleSet, RuleVerdict


class TeacherError(Exception):
    pass


@dataclass
class RANParams:
    source_embeddings: np.ndarray   # [(R+1), d]; row R is the student source
    context_projection: np.ndarray  # [H_feat, d]

    def __post_init__(self):
        if self.source_embeddings.shape[1] != self.context_projection.shape[1]:
            raise TeacherError("embedding and projection dims differ")
        for arr in (self.source_embeddings, self.context_projection):
            if not np.all(np.isfinite(arr)):
                raise TeacherError("non-finite RAN parameters")

    @property
    def n_rules(self) -> int:
        return self.source_embeddings.shape[0] - 1

    def copy(self) -> "RANParams":
        return RANParams(self.source_embeddings.copy(),
                         self.context_projection.copy())


def init_ran(n_rules: int, n_features: int, dim: int, seed: int = 0,
             zero: bool = False) -> RANParams:
    if zero:
        return RANParams(np.zeros((n_rules + 1, dim)),
                         np.zeros((n_features, dim)))
    rng = np.random.default_rng(seed)
    return RANParams(rng.uniform(-0.01, 0.01, (n_rules + 1, dim)),
                     rng.uniform(-0.01, 0.01, (n_features, dim)))


def _verdict_columns(verdict_lists: list[list[RuleVerdict]], n_rules: int,
                     vocab: CandidateVocab) -> np.ndarray:
    """[N, R] vocab indices of fired, in-vocab candidates; -1 otherwise."""
    cols = np.full((len(verdict_lists), n_rules), -1, dtype=np.int64)
    for i, verdicts in enumerate(verdict_lists):
        if len(verdicts) != n_rules:
            raise TeacherError(f"expected {n_rules} verdicts, got {len(verdicts)}")
        for verdict in verdicts:
            if verdict.candidate is None:
                continue
            idx = vocab.get(verdict.candidate)
            if idx is not None:
                cols[i, verdict.rule_id] = idx
    return cols


def _aggregate_batch(ran: RANParams, features, verdict_cols: np.ndarray,
                     student_dists: np.ndarray):
    """Shared forward pass; returns (mixture s, attentions a, context C)."""
    n, vocab_size = student_dists.shape
    context = np.asarray(features @ ran.context_projection)
    attention = _sigmoid(context @ ran.source_embeddings.T)  # [N, R+1]
    mixture = np.full((n, vocab_size), 1.0 / vocab_size)
    mixture += attention[:, -1:] * student_dists
    rows, rules = np.nonzero(verdict_cols >= 0)
    np.add.at(mixture, (rows, verdict_cols[rows, rules]),
              attention[rows, rules])
    return mixture, attention, context


def aggregate(ran: RANParams, features, verdicts: list[RuleVerdict],
              student_dist: np.ndarray, vocab: CandidateVocab) -> np.ndarray:
    """Aggregate one token's sources into a soft label over ``vocab``."""
    cols = _verdict_columns([verdicts], ran.n_rules, vocab)
    dist = np.asarray(student_dist, dtype=float).reshape(1, -1)
    mixture, _, _ = _aggregate_batch(ran, features, cols, dist)
    return (mixture / mixture.sum(axis=1, keepdims=True))[0]


def aggregate_batch(ran: RANParams, features,
                    verdict_lists: list[list[RuleVerdict]],
                    student_dists: np.ndarray,
                    vocab: CandidateVocab) -> np.ndarray:
    cols = _verdict_columns(verdict_lists, ran.n_rules, vocab)
    mixture, _, _ = _aggregate_batch(ran, features, cols, student_dists)
    return mixture / mixture.sum(axis=1, keepdims=True)


def teacher_loss(ran: RANParams, features, verdict_lists, student_dists,
                 gold_indices, vocab: CandidateVocab) -> float:
    probs = aggregate_batch(ran, features, verdict_lists, student_dists, vocab)
    gold = np.asarray(gold_indices, dtype=int)
    return float(-np.log(probs[np.arange(len(gold)), gold] + 1e-12).mean())


def train_teacher(ran: RANParams, features, verdict_lists, student_dists,
                  gold_indices, vocab: CandidateVocab,
                  learning_rate: float) -> tuple[RANParams, float]:
    """One gradient step on mean cross-entropy against gold labels."""
    n = len(gold_indices)
    if n == 0:
        raise ValueError("empty batch")
    gold = np.asarray(gold_indices, dtype=int)
    student_dists = np.asarray(student_dists, dtype=float)
    cols = _verdict_columns(verdict_lists, ran.n_rules, vocab)
    mixture, attention, context = _aggregate_batch(ran, features, cols,
                                                   student_dists)
    total = mixture.sum(axis=1)
    gold_mass = mixture[np.arange(n), gold]
    loss = float(np.mean(np.log(total) - np.log(gold_mass + 1e-12)))

    # dL/ds_ik = (1/Z_i - delta(k, gold_i)/s_gold_i) / n
    d_mixture = np.empty_like(mixture)
    d_mixture[:] = (1.0 / total)[:, None]
    d_mixture[np.arange(n), gold] -= 1.0 / (gold_mass + 1e-12)
    d_mixture /= n

    d_attention = np.zeros_like(attention)
    rows, rules = np.nonzero(cols >= 0)
    d_attention[rows, rules] = d_mixture[rows, cols[rows, rules]]
    d_attention[:, -1] = (d_mixture * student_dists).sum(axis=1)

    d_z = d_attention * attention * (1.0 - attention)  # [N, R+1]
    d_embeddings = d_z.T @ context
    d_context = d_z @ ran.source_embeddings
    d_projection = np.asarray(features.T @ d_context if sp.issparse(features)
                              else np.asarray(features).T @ d_context)

    for grad in (d_embeddings, d_projection):
        if not np.all(np.isfinite(grad)):
            raise TeacherError("non-finite teacher gradient")
    updated = RANParams(ran.source_embeddings - learning_rate * d_embeddings,
                        ran.context_projection - learning_rate * d_projection)
    return updated, loss


def pseudo_label(ran: RANParams, features, verdict_lists,
                 student_params: StudentParams, vocab: CandidateVocab,
                 tau: float) -> list[tuple[int, np.ndarray, float]]:
    """Aggregate every token and keep those with max probability >= tau.

    Returns (token position, soft label, weight = max probability) triples.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    if features.shape[0] == 0:
        return []
    student_dists, _ = forward(student_params, features)
    probs = aggregate_batch(ran, features, verdict_lists, student_dists, vocab)
    out = []
    top = probs.max(axis=1)
    for i in np.nonzero(top >= tau)[0]:
        out.append((int(i), probs[i], float(top[i])))
    return out
