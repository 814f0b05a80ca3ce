"""End-to-end inference: preprocess, predict, post-process, dictionary fallback."""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

from lexforge import llm_bridge, student, textcore
from lexforge.dictionary import DictEntry, Dictionary
from lexforge.llm_bridge import LlmClient
from lexforge.student import CandidateVocab, StudentParams
from lexforge.textcore import PUNCT_CHARS


class PipelineError(Exception):
    pass


class CheckpointMissingError(PipelineError):
    """No trained model available; train one or point at a checkpoint."""


@dataclass(frozen=True)
class TokenRecord:
    source: str
    prediction: str
    is_nsw: bool
    confidence: float


@dataclass(frozen=True)
class NormalizationResult:
    normalized: str
    tokens: tuple[TokenRecord, ...]

    def to_dict(self) -> dict:
        return {
            "normalized": self.normalized,
            "tokens": [
                {"source": t.source, "prediction": t.prediction,
                 "is_nsw": t.is_nsw, "confidence": t.confidence}
                for t in self.tokens
            ],
        }


def postprocess(tokens: list[str]) -> str:
    """Join with single spaces, glue punctuation, capitalize the first letter."""
    joined = " ".join(tokens)
    chars = []
    for ch in joined:
        if ch in PUNCT_CHARS and chars and chars[-1] == " ":
            chars.pop()
        chars.append(ch)
    for i, ch in enumerate(chars):
        if ch.isalpha():
            chars[i] = ch.upper()
            break
    return "".join(chars)


def normalize_sentence(params: StudentParams, vocab: CandidateVocab,
                       sentence: str,
                       nsw_threshold: float = 0.5) -> NormalizationResult:
    """Tokenize, run the student per token, and reconcile the two heads.

    A token is rewritten to the argmax candidate only when the detection
    head fires (nsw_prob >= threshold) AND the argmax is not KEEP;
    punctuation tokens are always kept verbatim.
    """
    if not 0.0 <= nsw_threshold <= 1.0:
        raise ValueError("nsw_threshold must be in [0, 1]")
    tokens = textcore.tokenize(sentence)
    if not tokens:
        return NormalizationResult("", ())
    contexts = []
    surfaces = [t.surface for t in tokens]
    for i in range(len(tokens)):
        contexts.append((surfaces[i],
                         surfaces[i - 1] if i > 0 else None,
                         surfaces[i + 1] if i + 1 < len(surfaces) else None))
    features = student.featurize_batch(contexts, params.n_features)
    probs, nsw_probs = student.forward(params, features)

    records = []
    for i, token in enumerate(tokens):
        choice = int(probs[i].argmax())
        candidate = vocab.candidates[choice]
        is_nsw = bool(nsw_probs[i] >= nsw_threshold) and not token.is_punct
        rewrite = (is_nsw and choice != 0 and candidate != token.surface)
        prediction = candidate if rewrite else token.surface
        chosen = choice if rewrite else 0
        records.append(TokenRecord(token.surface, prediction,
                                   is_nsw=is_nsw,
                                   confidence=float(probs[i][chosen])))
    normalized = postprocess([r.prediction for r in records])
    return NormalizationResult(normalized, tuple(records))


def lookup_or_fallback(dictionary: Dictionary, llm_client: LlmClient | None,
                       word: str) -> tuple[DictEntry, bool]:
    """Dictionary hit, or LLM suggestion persisted as a new llm-sourced entry."""
    word = word.strip()
    if not word:
        raise ValueError("word is empty")
    entry = dictionary.lookup(word)
    if entry is not None:
        return entry, False
    if llm_client is None:
        raise llm_bridge.LlmRequestError("no LLM client configured")
    suggestion = llm_bridge.suggest_normalization(llm_client, word)
    entry = DictEntry(
        nsw=suggestion.nsw,
        standard_forms=suggestion.standard_forms,
        definition=suggestion.definition,
        examples=suggestion.examples,
        source="llm",
        created_at=datetime.now(timezone.utc).replace(microsecond=0),
    )
    dictionary.insert(entry)
    return entry, True
