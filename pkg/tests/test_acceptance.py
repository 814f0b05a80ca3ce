"""Acceptance gate: one test per release criterion.

Each test prints a single ``[criterion N] PASS/FAIL`` line (visible even under
pytest's output capture) and enforces its stated runtime budget.
"""
import contextlib
import json
import math
import random
import shutil
import socket
import threading
import time

import numpy as np
import pytest
import requests

from lexforge import data, metrics, pipeline, student, teacher, trainer
from lexforge.dictionary import Dictionary
from lexforge.llm_bridge import LlmSuggestion, MockLlmClient
from lexforge.service import ServiceState, create_app
from lexforge.student import CandidateVocab, init_params, loss, train_step
from lexforge.teacher import aggregate, init_ran, teacher_loss, train_teacher
from lexforge.textcore import (
    KEEP, AlignedSentence, PerturbConfig, Token, perturb_sentence,
    strip_diacritics, tokenize,
)
from lexforge.weakrules import RuleVerdict


@contextlib.contextmanager
def report(capsys, number, description):
    try:
        yield
    except BaseException:
        with capsys.disabled():
            print(f"[criterion {number}] FAIL: {description}")
        raise
    with capsys.disabled():
        print(f"[criterion {number}] PASS: {description}")


def finite_difference(fn, arrays, eps=1e-6):
    """Central finite differences of ``fn()`` w.r.t. each array in-place."""
    grads = {}
    for name, arr in arrays.items():
        grad = np.zeros_like(arr, dtype=float)
        flat, gflat = arr.reshape(-1), grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = fn()
            flat[i] = orig - eps
            down = fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * eps)
        grads[name] = grad
    return grads


def relative_close(analytic, numeric, tol=1e-4):
    scale = np.maximum(np.abs(numeric), 1e-3)
    return bool(np.all(np.abs(analytic - numeric) / scale < tol))


H, D, V = 45, 6, 4
VOCAB_SMALL = CandidateVocab([KEEP, "không", "biết", "rồi"])


def toy_student_batch(n=3, seed=1):
    rng = np.random.default_rng(seed)
    features = rng.random((n, H)) * (rng.random((n, H)) < 0.2)
    return features, rng.integers(0, V, n), rng.integers(0, 2, n).astype(float)


def test_criterion_1_gradient_correctness(capsys):
    with report(capsys, 1, "student and teacher gradients match finite "
                           "differences at 1e-4 relative"):
        start = time.perf_counter()

        features, targets, is_nsw = toy_student_batch()
        params = init_params(H, D, V, seed=4)
        updated, _ = train_step(params, features, targets, is_nsw,
                                1.0, 0.5, 1.0)
        numeric = finite_difference(
            lambda: loss(params, features, targets, is_nsw, 1.0, 0.5).l_total,
            params.arrays())
        for name, arr in params.arrays().items():
            analytic = arr - updated.arrays()[name]
            assert relative_close(analytic, numeric[name]), name

        rng = np.random.default_rng(2)
        t_features = rng.random((4, H)) * (rng.random((4, H)) < 0.2)
        options = [None, "không", "biết"]
        verdict_lists = [
            [RuleVerdict(j, options[i]) for j, i
             in enumerate(rng.integers(0, 3, 2))] for _ in range(4)]
        student_dists = rng.dirichlet(np.ones(V), 4)
        gold = rng.integers(0, V, 4)
        ran = init_ran(2, H, D, seed=7)
        t_updated, _ = train_teacher(ran, t_features, verdict_lists,
                                     student_dists, gold, VOCAB_SMALL, 1.0)
        t_numeric = finite_difference(
            lambda: teacher_loss(ran, t_features, verdict_lists, student_dists,
                                 gold, VOCAB_SMALL),
            {"source_embeddings": ran.source_embeddings,
             "context_projection": ran.context_projection})
        assert relative_close(ran.source_embeddings - t_updated.source_embeddings,
                              t_numeric["source_embeddings"])
        assert relative_close(ran.context_projection - t_updated.context_projection,
                              t_numeric["context_projection"])

        assert time.perf_counter() - start < 5.0


def test_criterion_2_loss_identity(capsys):
    with report(capsys, 2, "l_total == alpha*l_norm + beta*l_nsw at 1e-9; "
                           "beta=0 is single-task"):
        start = time.perf_counter()
        rng = np.random.default_rng(3)
        for _ in range(100):
            features, targets, is_nsw = toy_student_batch(
                n=int(rng.integers(1, 6)), seed=int(rng.integers(1 << 30)))
            params = init_params(H, D, V, seed=int(rng.integers(1 << 30)))
            alpha, beta = rng.uniform(0.05, 2.0, 2)
            b = loss(params, features, targets, is_nsw, alpha, beta)
            assert abs(b.l_total - (alpha * b.l_norm + beta * b.l_nsw)) < 1e-9
        features, targets, is_nsw = toy_student_batch()
        params = init_params(H, D, V, seed=5)
        single = loss(params, features, targets, is_nsw, 1.0, 0.0)
        assert abs(single.l_total - single.l_norm) < 1e-9
        assert time.perf_counter() - start < 1.0


def _sentence(labels):
    tokens = tuple(Token(f"w{i}", i * 3, i * 3 + 2, False)
                   for i in range(len(labels)))
    return AlignedSentence(tokens, tuple(labels))


def _recount(gold, predicted):
    """Independent position-by-position recount of every metric."""
    g = {(si, ti) for si, s in enumerate(gold)
         for ti, lab in enumerate(s.gold_labels) if lab != KEEP}
    p = {(si, ti) for si, pr in enumerate(predicted)
         for ti, lab in enumerate(pr) if lab != KEEP}
    correct = {pos for pos in p & g
               if predicted[pos[0]][pos[1]] == gold[pos[0]].gold_labels[pos[1]]}
    keeps = {(si, ti) for si, s in enumerate(gold)
             for ti, lab in enumerate(s.gold_labels) if lab == KEEP}
    kept = {pos for pos in keeps if predicted[pos[0]][pos[1]] == KEEP}
    precision = len(correct) / len(p) if p else 0.0
    recall = len(correct) / len(g) if g else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    integrity = len(kept) / len(keeps) if keeps else 1.0
    exact = sum(list(pr) == list(s.gold_labels)
                for s, pr in zip(gold, predicted))
    return precision, recall, f1, integrity, exact / len(gold) if gold else 1.0


def test_criterion_3_metric_oracle(capsys):
    with report(capsys, 3, "evaluate matches brute-force recount on 200 "
                           "corpora and the hand-enumerated example"):
        start = time.perf_counter()
        gold = [_sentence([KEEP, "không", KEEP, "biết"])]
        predicted = [[KEEP, "không", "đã", KEEP]]
        r = metrics.evaluate(gold, predicted)
        assert (r.precision, r.recall, r.f1, r.integrity, r.accuracy) == \
            (0.5, 0.5, 0.5, 0.5, 0.0)

        rng = random.Random(1234)
        words = [KEEP, "không", "biết", "đi", "rồi"]
        for _ in range(200):
            gold, predicted = [], []
            for _ in range(rng.randint(1, 10)):
                n = rng.randint(1, 8)
                gold.append(_sentence([rng.choice(words) for _ in range(n)]))
                predicted.append([rng.choice(words) for _ in range(n)])
            r = metrics.evaluate(gold, predicted)
            expected = _recount(gold, predicted)
            got = (r.precision, r.recall, r.f1, r.integrity, r.accuracy)
            assert all(math.isclose(a, b, abs_tol=1e-12)
                       for a, b in zip(got, expected))
        assert time.perf_counter() - start < 5.0


def test_criterion_4_ran_validity(capsys):
    with report(capsys, 4, "teacher aggregation is a valid distribution, "
                           "ignores abstainers, learns rule trust"):
        start = time.perf_counter()
        rng = np.random.default_rng(0)
        options = [None, "không", "biết", "ngoài-vocab"]
        for _ in range(1000):
            ran = init_ran(3, H, D, seed=int(rng.integers(1 << 30)))
            verdicts = [RuleVerdict(j, options[i]) for j, i
                        in enumerate(rng.integers(0, 4, 3))]
            dist = rng.dirichlet(np.ones(V))
            x = rng.random((1, H)) * (rng.random((1, H)) < 0.2)
            out = aggregate(ran, x, verdicts, dist, VOCAB_SMALL)
            assert np.all(out >= 0)
            assert abs(out.sum() - 1.0) < 1e-6

        ran = init_ran(2, H, D, seed=5)
        x = rng.random((1, H))
        dist = rng.dirichlet(np.ones(V))
        verdicts = [RuleVerdict(0, "không"), RuleVerdict(1, None)]
        zeroed = ran.copy()
        zeroed.source_embeddings[1] = 123.0
        assert np.allclose(aggregate(ran, x, verdicts, dist, VOCAB_SMALL),
                           aggregate(zeroed, x, verdicts, dist, VOCAB_SMALL))

        # rule 0 always right, rule 1 always wrong: attention must separate
        n = 16
        features = rng.random((n, H)) * (rng.random((n, H)) < 0.2)
        gold = np.ones(n, dtype=int)
        verdict_lists = [[RuleVerdict(0, "không"), RuleVerdict(1, "biết")]
                         for _ in range(n)]
        student_dists = np.full((n, V), 1.0 / V)
        ran = init_ran(2, H, D, seed=9)
        for _ in range(200):
            ran, _ = train_teacher(ran, features, verdict_lists, student_dists,
                                   gold, VOCAB_SMALL, 0.5)
        from lexforge.student import _sigmoid
        attention = _sigmoid((features @ ran.context_projection)
                             @ ran.source_embeddings.T)
        assert np.all(attention[:, 0] > attention[:, 1])
        assert time.perf_counter() - start < 10.0


def shipped_config(**overrides) -> trainer.TrainConfig:
    base = dict(train_path=str(data.SYNTH_DIR / "train.csv"),
                dev_path=str(data.SYNTH_DIR / "dev.csv"),
                test_path=str(data.SYNTH_DIR / "test.csv"),
                unlabeled_path=str(data.SYNTH_DIR / "unlabeled.csv"),
                dict_path=str(data.DICT_PATH))
    base.update(overrides)
    return trainer.TrainConfig(**base)


@pytest.fixture(scope="module")
def default_run():
    """One self-training run on the shipped corpus with default settings."""
    # training budgets use CPU time: wall time swings with machine load
    start = time.process_time()
    params, ran, rep = trainer.run_self_training(shipped_config())
    return params, rep, time.process_time() - start


def test_criterion_5_self_training_trend(capsys, default_run, tmp_path):
    with report(capsys, 5, "self-training holds dev F1 within 0.5 points of "
                           "supervised baseline, emits pseudo-labels, and "
                           "repeats deterministically"):
        _params, rep, elapsed = default_run
        records = rep.iterations
        assert len(records) == 4  # supervised baseline + 3 iterations
        assert records[-1].f1 >= records[0].f1 - 0.005
        assert all(r.pseudo_count >= 1 for r in records[1:])
        assert elapsed < 60.0

        # byte-identical repeat: same report JSON, same checkpoint arrays
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            trainer.run_self_training(shipped_config(out_dir=str(out)))
            outs.append(out)
        assert (outs[0] / "report.json").read_bytes() == \
            (outs[1] / "report.json").read_bytes()
        a = student.load_checkpoint(str(outs[0] / "checkpoints" / "model.npz"))
        b = student.load_checkpoint(str(outs[1] / "checkpoints" / "model.npz"))
        for name, arr in a[0].arrays().items():
            assert np.array_equal(arr, b[0].arrays()[name]), name
        assert a[1].candidates == b[1].candidates
        for name, arr in a[2].items():
            assert np.array_equal(arr, b[2][name]), name
        assert rep.to_dict() == \
            json.loads((outs[0] / "report.json").read_text())


def test_criterion_6_multitask_vs_single_task(capsys, default_run):
    with report(capsys, 6, "multitask dev integrity within 1 point of the "
                           "single-task run"):
        _params, multitask, elapsed = default_run
        start = time.process_time()
        _p, _r, single = trainer.run_self_training(shipped_config(beta=0.0))
        single_elapsed = time.process_time() - start
        assert multitask.iterations[-1].integrity >= \
            single.iterations[-1].integrity - 0.01
        assert elapsed + single_elapsed < 120.0


def test_criterion_7_perturbation_contract(capsys):
    with report(capsys, 7, "diacritics perturbation: p=0 identity, p=1 full "
                           "strip, p=0.5 near-half, seed-deterministic"):
        start = time.perf_counter()
        tokens = tokenize("đừng quên dấu tiếng Việt nhé!")
        identity = perturb_sentence(tokens, PerturbConfig(0.0, 1))
        assert [t.surface for t in identity] == [t.surface for t in tokens]

        full = perturb_sentence(tokens, PerturbConfig(1.0, 1))
        for before, after in zip(tokens, full):
            expected = before.surface if before.is_punct else \
                strip_diacritics(before.surface)
            assert after.surface == expected

        big = [Token("đồng", i * 5, i * 5 + 4, False) for i in range(1000)]
        half = perturb_sentence(big, PerturbConfig(0.5, 0))
        fraction = sum(t.surface == "dong" for t in half) / 1000
        assert 0.45 <= fraction <= 0.55

        again = perturb_sentence(big, PerturbConfig(0.5, 0))
        assert [t.surface for t in again] == [t.surface for t in half]
        assert time.perf_counter() - start < 1.0


def test_criterion_8_live_service_round_trip(capsys, tmp_path):
    with report(capsys, 8, "live HTTP instance: lookup hit, fallback persists, "
                           "normalize round-trips, malformed body is 400"):
        start = time.perf_counter()
        dict_path = tmp_path / "dict.jsonl"
        shutil.copy(data.DICT_PATH, dict_path)
        vocab = CandidateVocab.build(["không", "biết"])
        state = ServiceState(
            dictionary=Dictionary.load(dict_path),
            params=init_params(300, 8, len(vocab), zero=True), vocab=vocab,
            llm_client=MockLlmClient.from_file(str(data.MOCK_LLM_PATH)))

        with socket.socket() as probe:
            probe.bind(("127.0.0.1", 0))
            port = probe.getsockname()[1]
        import uvicorn
        server = uvicorn.Server(uvicorn.Config(
            create_app(state), host="127.0.0.1", port=port,
            log_level="warning"))
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        deadline = time.perf_counter() + 10
        while not server.started:
            assert time.perf_counter() < deadline, "server failed to start"
            time.sleep(0.01)
        base = f"http://127.0.0.1:{port}"
        try:
            hit = requests.get(f"{base}/dict_lookup", params={"word": "ko"},
                               timeout=5).json()
            assert hit["found"] and not hit["was_fallback"]
            assert hit["entries"][0]["standard_forms"][0] == "không"

            miss = requests.get(f"{base}/dict_lookup", params={"word": "zị"},
                                timeout=5).json()
            assert miss["found"] and miss["was_fallback"]
            assert Dictionary.load(dict_path).lookup("zị") is not None
            second = requests.get(f"{base}/dict_lookup", params={"word": "zị"},
                                  timeout=5).json()
            assert second["found"] and not second["was_fallback"]

            empty = requests.post(f"{base}/normalize_text",
                                  json={"sentence": ""}, timeout=5).json()
            assert empty == {"normalized": "", "tokens": []}
            full = requests.post(f"{base}/normalize_text",
                                 json={"sentence": "ko bik!"}, timeout=5).json()
            assert full["normalized"] == "Ko bik!"
            assert len(full["tokens"]) == 3

            bad = requests.post(
                f"{base}/normalize_text", data=b"{oops",
                headers={"content-type": "application/json"}, timeout=5)
            assert bad.status_code == 400
        finally:
            server.should_exit = True
            thread.join(timeout=5)
        assert time.perf_counter() - start < 10.0


def test_criterion_9_persistence_round_trips(capsys, tmp_path):
    with report(capsys, 9, "dictionary and checkpoint save/load are "
                           "identity (bitwise parameters)"):
        start = time.perf_counter()
        original = Dictionary.load(data.DICT_PATH)
        path = tmp_path / "dict.jsonl"
        original.save(path)
        reloaded = Dictionary.load(path)
        assert reloaded.entries == original.entries
        assert reloaded.version == original.version

        params = init_params(H, D, V, seed=12)
        vocab = CandidateVocab.build(["không", "biết rõ"])
        ckpt = tmp_path / "model.npz"
        student.save_checkpoint(str(ckpt), params, vocab,
                                config={"alpha": 1.0})
        loaded, loaded_vocab, _extras, config = student.load_checkpoint(
            str(ckpt))
        for name, arr in params.arrays().items():
            assert np.array_equal(arr, loaded.arrays()[name]), name
        assert loaded_vocab.candidates == vocab.candidates
        assert config == {"alpha": 1.0}
        assert time.perf_counter() - start < 2.0
