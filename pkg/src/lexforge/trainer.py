"""Corpus ingestion and synthesis, plus the teacher-student self-training loop.

Labeled CSV files have header ``input,output`` (one noisy/clean sentence
pair per row); the unlabeled file has header ``input``. The loop trains a
supervised student first (iteration 0), then alternates teacher training,
pseudo-labeling of the unlabeled stream, and student retraining on gold
plus confidence-weighted pseudo-labels.
"""
from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse as sp

from lexforge import metrics, student, teacher, textcore, weakrules
from lexforge.dictionary import Dictionary
from lexforge.student import CandidateVocab, StudentParams
from lexforge.teacher import RANParams
from lexforge.textcore import KEEP, AlignedSentence, PerturbConfig, Token

log = logging.getLogger(__name__)

# Common standard Vietnamese words used to pad synthetic sentences.
FILLER_WORDS = [
    "tôi", "bạn", "hôm", "nay", "rất", "vui", "buồn", "đi", "học", "làm",
    "việc", "ăn", "cơm", "uống", "nước", "trời", "mưa", "nắng", "đẹp",
    "thích", "xem", "phim", "nghe", "nhạc", "chơi", "mèo", "chó", "nhà",
    "trường", "bài", "tập", "nhiều", "mệt", "ngủ", "sớm", "muộn", "gặp",
    "nói", "chuyện", "cười", "khóc", "mua", "bán", "tiền", "áo", "quần",
    "sách", "viết", "đọc", "chạy", "bộ", "xe", "máy", "đường", "phố",
]


class CorpusError(Exception):
    pass


@dataclass
class TrainConfig:
    train_path: str = "data/train.csv"
    dev_path: str = "data/dev.csv"
    test_path: str = "data/test.csv"
    unlabeled_path: str = "data/unlabeled.csv"
    dict_path: str = "data/nsw_dict.jsonl"
    rules_path: str | None = None
    out_dir: str | None = None
    alpha: float = 1.0
    beta: float = 0.5
    p: float = 0.0
    seed: int = 42
    iterations: int = 3
    tau: float = 0.6
    learning_rate: float = 2.0
    epochs_per_phase: int = 200
    n_features: int = 4096
    hidden_dim: int = 64
    nsw_threshold: float = 0.5

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or (self.alpha == 0 and self.beta == 0):
            raise ValueError("alpha, beta must be >= 0 and not both zero")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must be in [0, 1]")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must be in [0, 1]")

    @classmethod
    def from_file(cls, path: str) -> "TrainConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


@dataclass
class IterationRecord:
    iteration: int
    f1: float
    precision: float
    recall: float
    integrity: float
    accuracy: float
    pseudo_count: int
    pseudo_mean_confidence: float


@dataclass
class TrainReport:
    iterations: list[IterationRecord] = field(default_factory=list)
    best_iteration: int = 0
    skipped_rows: int = 0

    def to_dict(self) -> dict:
        return {
            "iterations": [asdict(r) for r in self.iterations],
            "best_iteration": self.best_iteration,
            "skipped_rows": self.skipped_rows,
        }


def _read_csv(path: str, expected_header: list[str]) -> list[list[str]]:
    if not os.path.exists(path):
        raise CorpusError(f"{path}: file not found")
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader, None)
            if header != expected_header:
                raise CorpusError(
                    f"{path}:1: expected header {','.join(expected_header)!r}, "
                    f"got {header}"
                )
            for row in reader:
                if len(row) != len(expected_header):
                    raise CorpusError(
                        f"{path}:{reader.line_num}: expected "
                        f"{len(expected_header)} fields, got {len(row)}"
                    )
                rows.append(row)
        except csv.Error as exc:
            raise CorpusError(f"{path}:{reader.line_num}: {exc}") from exc
    return rows


def load_labeled(path: str) -> tuple[list[AlignedSentence], int]:
    """Parse an ``input,output`` CSV into aligned sentences; count skips."""
    sentences = []
    skipped = 0
    for source_text, target_text in _read_csv(path, ["input", "output"]):
        source = textcore.tokenize(source_text)
        target = textcore.tokenize(target_text)
        if bool(source) != bool(target):
            skipped += 1
            continue
        if not source:
            skipped += 1
            continue
        labels = textcore.align([t.surface for t in source],
                                [t.surface for t in target])
        sentences.append(AlignedSentence(tuple(source), tuple(labels)))
    if skipped:
        log.warning("%s: skipped %d unalignable rows", path, skipped)
    if not sentences:
        log.warning("%s: no usable rows", path)
    return sentences, skipped


def load_unlabeled(path: str) -> list[list[Token]]:
    sentences = []
    for (text,) in _read_csv(path, ["input"]):
        tokens = textcore.tokenize(text)
        if tokens:
            sentences.append(tokens)
    return sentences


def load_corpus(train_path: str, dev_path: str, test_path: str,
                unlabeled_path: str):
    train, skipped_train = load_labeled(train_path)
    dev, skipped_dev = load_labeled(dev_path)
    test, skipped_test = load_labeled(test_path)
    unlabeled = load_unlabeled(unlabeled_path)
    skipped = skipped_train + skipped_dev + skipped_test
    return train, dev, test, unlabeled, skipped


def perturb_aligned(sentence: AlignedSentence,
                    cfg: PerturbConfig) -> AlignedSentence:
    """Strip diacritics from tokens per cfg and repair the gold labels.

    A stripped token that was KEEP now needs restoring to its original
    surface; tokens that already had a target keep it.
    """
    perturbed = textcore.perturb_sentence(list(sentence.source_tokens), cfg)
    labels = []
    for old, new, label in zip(sentence.source_tokens, perturbed,
                               sentence.gold_labels):
        if new.surface != old.surface and label == KEEP:
            labels.append(old.surface)
        else:
            labels.append(label)
    return AlignedSentence(tuple(perturbed), tuple(labels))


def _perturb_split(sentences: list[AlignedSentence], p: float,
                   seed: int) -> list[AlignedSentence]:
    if p == 0.0:
        return list(sentences)
    return [perturb_aligned(s, PerturbConfig(p, seed + i))
            for i, s in enumerate(sentences)]


def _token_contexts(sentences: list) -> list[tuple[str, str | None, str | None]]:
    out = []
    for sent in sentences:
        tokens = sent.source_tokens if isinstance(sent, AlignedSentence) else sent
        surfaces = [t.surface for t in tokens]
        for i, surface in enumerate(surfaces):
            left = surfaces[i - 1] if i > 0 else None
            right = surfaces[i + 1] if i + 1 < len(surfaces) else None
            out.append((surface, left, right))
    return out


def _token_verdicts(rules: weakrules.RuleSet, contexts) -> list:
    return [rules.apply(tok, left or "", right or "")
            for tok, left, right in contexts]


def predict_labels(params: StudentParams, vocab: CandidateVocab,
                   sentences: list[AlignedSentence], features,
                   nsw_threshold: float) -> list[list[str]]:
    """Per-sentence label predictions using the detection-gated rule.

    A token is rewritten to the argmax candidate only when the detection
    head fires and the argmax is not KEEP; punctuation and same-as-source
    predictions count as KEEP.
    """
    probs, nsw = student.forward(params, features)
    argmax = probs.argmax(axis=1)
    out = []
    pos = 0
    for sent in sentences:
        labels = []
        for token in sent.source_tokens:
            choice = int(argmax[pos])
            candidate = vocab.candidates[choice]
            if (token.is_punct or nsw[pos] < nsw_threshold or choice == 0
                    or candidate == token.surface):
                labels.append(KEEP)
            else:
                labels.append(candidate)
            pos += 1
        out.append(labels)
    return out


def synthesize_corpus(dictionary: Dictionary, out_dir: str,
                      labeled_size: int = 500, unlabeled_size: int = 2000,
                      seed: int = 42, corrupt_prob: float = 0.4,
                      split: tuple[float, float] = (0.8, 0.1)) -> dict[str, str]:
    """Generate a seed-deterministic synthetic corpus from the dictionary.

    Clean sentences are drawn from a pool of standard tokens; a controlled
    fraction of tokens is corrupted by inverse-applying dictionary entries
    (standard form -> NSW) or by character noise, so gold labels are exact
    by construction. Returns the written file paths.
    """
    if labeled_size <= 0 or unlabeled_size < 0:
        raise ValueError("sizes must be positive")
    if len(dictionary) == 0:
        raise ValueError("dictionary is empty")
    rng = np.random.default_rng(seed)

    keys = set(dictionary.entries)
    reverse: dict[str, list[str]] = {}
    for nsw_key, entry in sorted(dictionary.entries.items()):
        form = entry.standard_forms[0]
        if " " not in form:
            reverse.setdefault(form, []).append(nsw_key)
    pool = sorted({w for w in FILLER_WORDS + list(reverse) if w not in keys})

    def make_pair() -> tuple[str, str]:
        length = int(rng.integers(4, 10))
        clean = [pool[int(rng.integers(len(pool)))] for _ in range(length)]
        noisy = []
        for word in clean:
            if rng.random() >= corrupt_prob:
                noisy.append(word)
                continue
            corrupted = word
            if word in reverse and rng.random() < 0.7:
                options = reverse[word]
                corrupted = options[int(rng.integers(len(options)))]
            elif rng.random() < 0.5:
                corrupted = textcore.strip_diacritics(word)
            if corrupted == word:
                corrupted = word + word[-1] * 3
            noisy.append(corrupted)
        if rng.random() < 0.5:
            mark = ".!?"[int(rng.integers(3))]
            clean.append(mark)
            noisy.append(mark)
        return " ".join(noisy), " ".join(clean)

    pairs = [make_pair() for _ in range(labeled_size)]
    unlabeled = [make_pair()[0] for _ in range(unlabeled_size)]

    n_train = int(round(labeled_size * split[0]))
    n_dev = int(round(labeled_size * split[1]))
    sections = {
        "train.csv": pairs[:n_train],
        "dev.csv": pairs[n_train:n_train + n_dev],
        "test.csv": pairs[n_train + n_dev:],
    }
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for name, rows in sections.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["input", "output"])
            writer.writerows(rows)
        paths[name] = path
    path = os.path.join(out_dir, "unlabeled.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["input"])
        writer.writerows([s] for s in unlabeled)
    paths["unlabeled.csv"] = path
    return paths


def run_self_training(config: TrainConfig) -> tuple[StudentParams, RANParams,
                                                    TrainReport]:
    """Run the full loop and (optionally) persist best-iteration artifacts."""
    handler = None
    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
        handler = logging.FileHandler(
            os.path.join(config.out_dir, "log.txt"), mode="w", encoding="utf-8")
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        log.addHandler(handler)
        log.setLevel(logging.INFO)
    try:
        return _run_self_training(config)
    finally:
        if handler is not None:
            log.removeHandler(handler)
            handler.close()


def _run_self_training(config: TrainConfig) -> tuple[StudentParams, RANParams,
                                                     TrainReport]:
    dictionary = Dictionary.load(config.dict_path)
    rules = weakrules.default_ruleset(dictionary, config.rules_path)
    train, dev, _test, unlabeled, skipped = load_corpus(
        config.train_path, config.dev_path, config.test_path,
        config.unlabeled_path)
    if not train or not dev:
        raise CorpusError("train and dev splits must be non-empty")

    train = _perturb_split(train, config.p, config.seed)
    dev = _perturb_split(dev, config.p, config.seed + 10_000_019)

    forms = [f for e in dictionary.entries.values() for f in e.standard_forms]
    vocab = CandidateVocab.build(
        [label for s in train for label in s.gold_labels], sorted(set(forms)))

    train_ctx = _token_contexts(train)
    x_train = student.featurize_batch(train_ctx, config.n_features)
    y_train = np.array([vocab.get(label) for s in train
                        for label in s.gold_labels], dtype=int)
    nsw_train = np.array([label != KEEP for s in train
                          for label in s.gold_labels], dtype=float)
    x_dev = student.featurize_batch(_token_contexts(dev), config.n_features)
    unlabeled_ctx = _token_contexts(unlabeled)
    x_unlabeled = student.featurize_batch(unlabeled_ctx, config.n_features)

    train_verdicts = _token_verdicts(rules, train_ctx)
    unlabeled_verdicts = _token_verdicts(rules, unlabeled_ctx)

    def fit_student(start=None, extra=None) -> StudentParams:
        # iteration 0 trains from scratch; later phases continue from the
        # current student with half the steps (the gold batch is unchanged)
        if start is None:
            params = student.init_params(config.n_features, config.hidden_dim,
                                         len(vocab), config.seed)
            steps = config.epochs_per_phase
        else:
            params = start
            steps = max(1, config.epochs_per_phase // 2)
        feats, targets, nsw, weights = x_train, y_train, nsw_train, None
        if extra is not None:
            x_extra, soft_targets, soft_nsw, conf = extra
            feats = sp.vstack([x_train, x_extra], format="csr")
            onehot = np.zeros((len(y_train), len(vocab)))
            onehot[np.arange(len(y_train)), y_train] = 1.0
            targets = np.vstack([onehot, soft_targets])
            nsw = np.concatenate([nsw_train, soft_nsw])
            weights = np.concatenate([np.ones(len(y_train)), conf])
        for _ in range(steps):
            params, _ = student.train_step(params, feats, targets, nsw,
                                           config.alpha, config.beta,
                                           config.learning_rate, weights)
        return params

    report = TrainReport(skipped_rows=skipped)
    snapshots: list[tuple[StudentParams, RANParams]] = []

    log.info("iteration 0: supervised student on %d tokens", x_train.shape[0])
    params = fit_student()
    ran = teacher.init_ran(len(rules), config.n_features, config.hidden_dim,
                           config.seed + 1)

    def record(iteration: int, pseudo_count: int, mean_conf: float):
        preds = predict_labels(params, vocab, dev, x_dev, config.nsw_threshold)
        m = metrics.evaluate(dev, preds)
        report.iterations.append(IterationRecord(
            iteration, m.f1, m.precision, m.recall, m.integrity, m.accuracy,
            pseudo_count, mean_conf))
        log.info("iteration %d: dev F1=%.4f integrity=%.4f accuracy=%.4f "
                 "pseudo=%d", iteration, m.f1, m.integrity, m.accuracy,
                 pseudo_count)

    record(0, 0, 0.0)
    snapshots.append((params.copy(), ran.copy()))

    for iteration in range(1, config.iterations + 1):
        student_dists, _ = student.forward(params, x_train)
        for _ in range(config.epochs_per_phase):
            ran, _tl = teacher.train_teacher(ran, x_train, train_verdicts,
                                             student_dists, y_train, vocab,
                                             config.learning_rate)
        triples = teacher.pseudo_label(ran, x_unlabeled, unlabeled_verdicts,
                                       params, vocab, config.tau)
        if triples:
            idx = [t[0] for t in triples]
            soft = np.stack([t[1] for t in triples])
            conf = np.array([t[2] for t in triples])
            extra = (x_unlabeled[idx], soft, 1.0 - soft[:, 0], conf)
        else:
            extra = None
        params = fit_student(start=params, extra=extra)
        mean_conf = float(np.mean([t[2] for t in triples])) if triples else 0.0
        record(iteration, len(triples), mean_conf)
        snapshots.append((params.copy(), ran.copy()))

    best = max(range(len(report.iterations)),
               key=lambda i: (report.iterations[i].f1, -i))
    report.best_iteration = best
    best_params, best_ran = snapshots[best]

    if config.out_dir:
        _persist(config, best_params, best_ran, vocab, report)
    return best_params, best_ran, report


def _persist(config: TrainConfig, params: StudentParams, ran: RANParams,
             vocab: CandidateVocab, report: TrainReport) -> None:
    ckpt_dir = os.path.join(config.out_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)
    ckpt_path = os.path.join(ckpt_dir, "model.npz")
    tmp = ckpt_path + ".tmp"
    student.save_checkpoint(
        tmp, params, vocab,
        extra_arrays={"teacher/source_embeddings": ran.source_embeddings,
                      "teacher/context_projection": ran.context_projection},
        config={k: v for k, v in asdict(config).items()
                if isinstance(v, (int, float, str, type(None)))})
    os.replace(tmp, ckpt_path)
    with open(os.path.join(config.out_dir, "report.json"), "w",
              encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, ensure_ascii=False, indent=2,
                  sort_keys=True)
        fh.write("\n")
    log.info("wrote %s", ckpt_path)


def load_ran(extras: dict[str, np.ndarray]) -> RANParams | None:
    if "teacher/source_embeddings" not in extras:
        return None
    return RANParams(extras["teacher/source_embeddings"],
                     extras["teacher/context_projection"])
