"""Command-line interface.

Subcommands: train, eval, demo, serve, lookup, normalize, synth.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from lexforge import data, pipeline, student, trainer
from lexforge.dictionary import Dictionary
from lexforge.llm_bridge import HttpLlmClient, LlmError, MockLlmClient
from lexforge.service import ServiceState, create_app
from lexforge.trainer import TrainConfig


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON config file (TrainConfig keys)")
    parser.add_argument("--checkpoint", help="model checkpoint (.npz)")
    parser.add_argument("--dict", dest="dict_path",
                        default=str(data.DICT_PATH), help="NSW dictionary file")
    parser.add_argument("--nsw-threshold", type=float, default=0.5)
    parser.add_argument("--mock-llm", dest="mock_llm",
                        help="mock LLM table file (omit to use the real API)")


def _load_model(args):
    if not args.checkpoint:
        raise pipeline.CheckpointMissingError(
            "no checkpoint given; train one with `lexforge train` or pass "
            "--checkpoint")
    params, vocab, _extras, _cfg = student.load_checkpoint(args.checkpoint)
    return params, vocab


def _llm_client(args):
    if args.mock_llm:
        return MockLlmClient.from_file(args.mock_llm)
    try:
        return HttpLlmClient()
    except ValueError:
        return None


def _train_config(args) -> TrainConfig:
    if args.config:
        cfg = TrainConfig.from_file(args.config)
    else:
        cfg = TrainConfig()
    overrides = {}
    if getattr(args, "data_dir", None):
        overrides.update(
            train_path=f"{args.data_dir}/train.csv",
            dev_path=f"{args.data_dir}/dev.csv",
            test_path=f"{args.data_dir}/test.csv",
            unlabeled_path=f"{args.data_dir}/unlabeled.csv",
        )
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    if args.dict_path:
        overrides["dict_path"] = args.dict_path
    return dataclasses.replace(cfg, **overrides)


def cmd_train(args) -> int:
    config = _train_config(args)
    _params, _ran, report = trainer.run_self_training(config)
    print(json.dumps(report.to_dict(), ensure_ascii=False, indent=2))
    return 0


def cmd_eval(args) -> int:
    from lexforge import metrics
    params, vocab = _load_model(args)
    sentences, _skipped = trainer.load_labeled(args.test)
    contexts = trainer._token_contexts(sentences)
    features = student.featurize_batch(contexts, params.n_features)
    preds = trainer.predict_labels(params, vocab, sentences, features,
                                   args.nsw_threshold)
    report = metrics.evaluate(sentences, preds)
    print(json.dumps(report.to_dict(), ensure_ascii=False, indent=2))
    return 0


def cmd_synth(args) -> int:
    dictionary = Dictionary.load(args.dict_path)
    paths = trainer.synthesize_corpus(dictionary, args.out,
                                      labeled_size=args.size,
                                      unlabeled_size=args.unlabeled_size,
                                      seed=args.seed)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_lookup(args) -> int:
    dictionary = Dictionary.load(args.dict_path)
    try:
        entry, was_fallback = pipeline.lookup_or_fallback(
            dictionary, _llm_client(args), args.word)
    except LlmError as exc:
        print(f"lookup failed: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"was_fallback": was_fallback, **entry.to_record()},
                     ensure_ascii=False, indent=2))
    return 0


def cmd_normalize(args) -> int:
    params, vocab = _load_model(args)
    result = pipeline.normalize_sentence(params, vocab, args.sentence,
                                         args.nsw_threshold)
    print(json.dumps(result.to_dict(), ensure_ascii=False, indent=2))
    return 0


def cmd_demo(args) -> int:
    params, vocab = _load_model(args)
    print("Enter a sentence (empty line or Ctrl-D to quit):")
    for line in sys.stdin:
        line = line.strip()
        if not line:
            break
        result = pipeline.normalize_sentence(params, vocab, line,
                                             args.nsw_threshold)
        print(result.normalized)
        for tok in result.tokens:
            flag = "NSW " if tok.is_nsw else "    "
            print(f"  {flag}{tok.source:<15} -> {tok.prediction:<15} "
                  f"({tok.confidence:.2f})")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    dictionary = Dictionary.load(args.dict_path)
    state = ServiceState(dictionary=dictionary,
                         llm_client=_llm_client(args),
                         nsw_threshold=args.nsw_threshold)
    if args.checkpoint:
        state.params, state.vocab, _extras, _cfg = student.load_checkpoint(
            args.checkpoint)
    uvicorn.run(create_app(state), host=args.host, port=args.port,
                log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lexforge",
        description="Lexical normalization for noisy Vietnamese text")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the self-training loop")
    _add_common(p)
    p.add_argument("--data-dir", help="directory holding the four CSV files")
    p.add_argument("--out", help="output directory for checkpoints and report")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a labeled CSV")
    _add_common(p)
    p.add_argument("--test", required=True, help="labeled input,output CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=500)
    p.add_argument("--unlabeled-size", type=int, default=2000)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("lookup", help="look a word up (LLM fallback on miss)")
    _add_common(p)
    p.add_argument("word")
    p.set_defaults(func=cmd_lookup)

    p = sub.add_parser("normalize", help="normalize one sentence")
    _add_common(p)
    p.add_argument("sentence")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("demo", help="interactive normalization loop")
    _add_common(p)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("serve", help="run the HTTP service")
    _add_common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (pipeline.PipelineError, trainer.CorpusError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
