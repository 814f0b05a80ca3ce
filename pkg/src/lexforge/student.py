"""Multitask student model: shared encoder, NSW-detection and normalization heads.

The encoder is a single tanh layer over hashed character n-gram features;
the normalization head classifies over a closed candidate vocabulary
(index 0 is KEEP, multi-word targets are single candidates) and the
detection head is a per-token logistic unit. Training is full-batch
gradient descent with hand-derived gradients; everything is deterministic
given the same inputs, so runs reproduce bitwise.

Feature hashing: each n-gram string is hashed with blake2b (8-byte digest,
big-endian integer) modulo the segment width. The feature vector has three
equal segments: token n-grams, left-neighbor n-grams, right-neighbor
n-grams (absent neighbors contribute nothing).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from lexforge.textcore import KEEP


class StudentError(Exception):
    pass


@dataclass
class StudentParams:
    feature_projection: np.ndarray  # [H_feat, d]
    hidden_bias: np.ndarray         # [d]
    norm_weight: np.ndarray         # [d, V]
    norm_bias: np.ndarray           # [V]
    nsw_weight: np.ndarray          # [d]
    nsw_bias: np.ndarray            # scalar, shape ()

    def __post_init__(self):
        self.nsw_bias = np.asarray(self.nsw_bias, dtype=float)
        h, d = self.feature_projection.shape
        v = self.norm_bias.shape[0]
        if (self.hidden_bias.shape != (d,) or self.norm_weight.shape != (d, v)
                or self.nsw_weight.shape != (d,) or self.nsw_bias.shape != ()):
            raise StudentError("inconsistent parameter shapes")
        for name, arr in self.arrays().items():
            if not np.all(np.isfinite(arr)):
                raise StudentError(f"non-finite values in {name}")

    @property
    def n_features(self) -> int:
        return self.feature_projection.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.feature_projection.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.norm_bias.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "feature_projection": self.feature_projection,
            "hidden_bias": self.hidden_bias,
            "norm_weight": self.norm_weight,
            "norm_bias": self.norm_bias,
            "nsw_weight": self.nsw_weight,
            "nsw_bias": self.nsw_bias,
        }

    def copy(self) -> "StudentParams":
        return StudentParams(**{k: v.copy() for k, v in self.arrays().items()})


@dataclass
class LossBreakdown:
    l_norm: float
    l_nsw: float
    l_total: float
    alpha: float
    beta: float


class CandidateVocab:
    """Closed set of normalization targets; index 0 is always KEEP."""

    def __init__(self, candidates: list[str]):
        if not candidates or candidates[0] != KEEP:
            raise ValueError("candidate 0 must be KEEP")
        if len(set(candidates)) != len(candidates):
            raise ValueError("duplicate candidates")
        self.candidates = list(candidates)
        self.index = {c: i for i, c in enumerate(candidates)}

    def __len__(self) -> int:
        return len(self.candidates)

    def get(self, label: str) -> int | None:
        return self.index.get(label)

    @classmethod
    def build(cls, gold_labels: list[str],
              standard_forms: list[str] = ()) -> "CandidateVocab":
        """Union of training gold labels and dictionary standard forms."""
        seen = dict.fromkeys(label for label in gold_labels if label != KEEP)
        seen.update(dict.fromkeys(standard_forms))
        return cls([KEEP] + list(seen))


def init_params(n_features: int, hidden_dim: int, vocab_size: int,
                seed: int = 0, zero: bool = False) -> StudentParams:
    """Zero biases; matrices uniform(-0.01, 0.01) unless ``zero``."""
    if zero:
        proj = np.zeros((n_features, hidden_dim))
        norm_w = np.zeros((hidden_dim, vocab_size))
        nsw_w = np.zeros(hidden_dim)
    else:
        rng = np.random.default_rng(seed)
        proj = rng.uniform(-0.01, 0.01, (n_features, hidden_dim))
        norm_w = rng.uniform(-0.01, 0.01, (hidden_dim, vocab_size))
        nsw_w = rng.uniform(-0.01, 0.01, hidden_dim)
    return StudentParams(proj, np.zeros(hidden_dim), norm_w,
                         np.zeros(vocab_size), nsw_w, np.zeros(()))


def _hash_index(ngram: str, width: int) -> int:
    digest = hashlib.blake2b(ngram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % width


@lru_cache(maxsize=65536)
def _word_indices(word: str, width: int) -> tuple[int, ...]:
    marked = f"^{word.lower()}$"
    grams = [marked[i:i + n] for n in (2, 3)
             for i in range(len(marked) - n + 1)]
    return tuple(_hash_index(g, width) for g in grams)


def featurize(token: str, left: str | None, right: str | None,
              n_features: int) -> sp.csr_matrix:
    """Sparse 1×H hashed n-gram feature row for a token in context."""
    width = n_features // 3
    indices: list[int] = []
    for offset, word in ((0, token), (width, left), (2 * width, right)):
        if word:
            indices.extend(offset + i for i in _word_indices(word, width))
    cols, counts = np.unique(np.array(indices, dtype=np.int64), return_counts=True)
    return sp.csr_matrix((counts.astype(float), (np.zeros(len(cols), dtype=np.int64), cols)),
                         shape=(1, n_features))


def featurize_batch(tokens_with_context: list[tuple[str, str | None, str | None]],
                    n_features: int) -> sp.csr_matrix:
    rows = [featurize(t, l, r, n_features) for t, l, r in tokens_with_context]
    if not rows:
        return sp.csr_matrix((0, n_features))
    return sp.vstack(rows, format="csr")


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def forward(params: StudentParams,
            features: sp.spmatrix | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batch forward pass: (norm distributions [N, V], nsw probabilities [N])."""
    hidden = _forward_hidden(params, features)
    probs = _softmax(hidden @ params.norm_weight + params.norm_bias)
    nsw = _sigmoid(hidden @ params.nsw_weight + float(params.nsw_bias))
    return probs, nsw


def _forward_hidden(params: StudentParams,
                    features: sp.spmatrix | np.ndarray) -> np.ndarray:
    if features.shape[1] != params.n_features:
        raise StudentError(
            f"feature dim {features.shape[1]} != expected {params.n_features}"
        )
    pre = features @ params.feature_projection + params.hidden_bias
    return np.tanh(np.asarray(pre))


def _as_target_matrix(targets, vocab_size: int) -> np.ndarray:
    """Accept hard label indices or soft [N, V] distributions."""
    targets = np.asarray(targets)
    if targets.ndim == 1:
        onehot = np.zeros((targets.shape[0], vocab_size))
        onehot[np.arange(targets.shape[0]), targets.astype(int)] = 1.0
        return onehot
    return targets.astype(float)


def loss(params: StudentParams, features, targets, is_nsw, alpha: float,
         beta: float, weights=None) -> LossBreakdown:
    breakdown, _ = _loss_with_cache(params, features, targets, is_nsw,
                                    alpha, beta, weights)
    return breakdown


def _loss_with_cache(params, features, targets, is_nsw, alpha, beta, weights):
    if alpha < 0 or beta < 0 or (alpha == 0 and beta == 0):
        raise ValueError("alpha, beta must be >= 0 and not both zero")
    n = features.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    target_mat = _as_target_matrix(targets, params.vocab_size)
    nsw_target = np.asarray(is_nsw, dtype=float)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    w_norm = w / w.sum()

    hidden = _forward_hidden(params, features)
    probs = _softmax(hidden @ params.norm_weight + params.norm_bias)
    nsw_prob = _sigmoid(hidden @ params.nsw_weight + float(params.nsw_bias))

    eps = 1e-12
    ce_norm = -(target_mat * np.log(probs + eps)).sum(axis=1)
    ce_nsw = -(nsw_target * np.log(nsw_prob + eps)
               + (1.0 - nsw_target) * np.log(1.0 - nsw_prob + eps))
    l_norm = float(w_norm @ ce_norm)
    l_nsw = float(w_norm @ ce_nsw)
    l_total = alpha * l_norm + beta * l_nsw
    breakdown = LossBreakdown(l_norm, l_nsw, l_total, alpha, beta)
    cache = (hidden, probs, nsw_prob, target_mat, nsw_target, w_norm)
    return breakdown, cache


def train_step(params: StudentParams, features, targets, is_nsw, alpha: float,
               beta: float, learning_rate: float,
               weights=None) -> tuple[StudentParams, LossBreakdown]:
    """One full-batch gradient-descent step on the combined loss."""
    if learning_rate < 0:
        raise ValueError("learning_rate must be >= 0")
    breakdown, cache = _loss_with_cache(params, features, targets, is_nsw,
                                        alpha, beta, weights)
    if not np.isfinite(breakdown.l_norm):
        raise StudentError("non-finite loss in the normalization head")
    if not np.isfinite(breakdown.l_nsw):
        raise StudentError("non-finite loss in the NSW-detection head")
    hidden, probs, nsw_prob, target_mat, nsw_target, w_norm = cache

    dlogits = alpha * w_norm[:, None] * (probs - target_mat)
    dz_nsw = beta * w_norm * (nsw_prob - nsw_target)

    d_norm_w = hidden.T @ dlogits
    d_norm_b = dlogits.sum(axis=0)
    d_nsw_w = hidden.T @ dz_nsw
    d_nsw_b = dz_nsw.sum()

    dhidden = dlogits @ params.norm_weight.T + np.outer(dz_nsw, params.nsw_weight)
    dpre = dhidden * (1.0 - hidden ** 2)
    d_proj = np.asarray((features.T @ dpre) if sp.issparse(features)
                        else features.T @ dpre)
    d_hidden_b = dpre.sum(axis=0)

    grads = {
        "feature_projection": d_proj, "hidden_bias": d_hidden_b,
        "norm_weight": d_norm_w, "norm_bias": d_norm_b,
        "nsw_weight": d_nsw_w, "nsw_bias": np.asarray(d_nsw_b),
    }
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            head = "NSW-detection" if "nsw" in name else "normalization"
            raise StudentError(f"non-finite gradient for {name} ({head} head)")

    arrays = params.arrays()
    updated = {name: arrays[name] - learning_rate * grads[name]
               for name in arrays}
    return StudentParams(**updated), breakdown


def save_checkpoint(path: str, params: StudentParams, vocab: CandidateVocab,
                    extra_arrays: dict[str, np.ndarray] | None = None,
                    config: dict | None = None) -> None:
    """Single-file container: dimensions, vocab, parameter arrays."""
    payload = {f"student/{k}": v for k, v in params.arrays().items()}
    for name, arr in (extra_arrays or {}).items():
        payload[name] = arr
    payload["vocab"] = np.array(vocab.candidates, dtype=np.str_)
    payload["format_version"] = np.array(1)
    payload["config_json"] = np.array(json.dumps(config or {}, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path: str) -> tuple[StudentParams, CandidateVocab,
                                        dict[str, np.ndarray], dict]:
    with np.load(path, allow_pickle=False) as data:
        if int(data["format_version"]) != 1:
            raise StudentError(f"unsupported checkpoint version in {path}")
        params = StudentParams(**{
            k.split("/", 1)[1]: data[k] for k in data.files
            if k.startswith("student/")
        })
        vocab = CandidateVocab([str(c) for c in data["vocab"]])
        extras = {k: data[k] for k in data.files
                  if k.startswith("teacher/")}
        config = json.loads(str(data["config_json"]))
    return params, vocab, extras, config
