"""HTTP service exposing dictionary lookup and sentence normalization.

Endpoints:
  GET  /dict_lookup?word=W   -> {"word", "found", "was_fallback", "entries"}
  POST /normalize_text       -> {"normalized", "tokens"}  (body {"sentence"})
  GET  /health               -> {"status": "ok", "dictionary_version": int}

Malformed request bodies get a 400 with {"error": ...}; an LLM-fallback
failure during lookup gets a 502. Model parameters and the rule set are
frozen at startup; the dictionary is the only mutable state and follows
its single-writer contract, with in-flight fallbacks deduplicated per word.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from lexforge import pipeline
from lexforge.dictionary import Dictionary
from lexforge.llm_bridge import LlmClient, LlmError
from lexforge.student import CandidateVocab, StudentParams


@dataclass
class ServiceState:
    dictionary: Dictionary
    params: StudentParams | None = None
    vocab: CandidateVocab | None = None
    llm_client: LlmClient | None = None
    nsw_threshold: float = 0.5


class _WordLocks:
    """One lock per in-flight fallback word, so a missing word is fetched once."""

    def __init__(self):
        self._guard = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}

    def acquire(self, word: str) -> threading.Lock:
        with self._guard:
            lock = self._locks.setdefault(word, threading.Lock())
        return lock


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="lexforge", docs_url=None, redoc_url=None)
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    word_locks = _WordLocks()

    @app.get("/health")
    def health():
        return {"status": "ok",
                "dictionary_version": state.dictionary.version}

    @app.get("/dict_lookup")
    def dict_lookup(word: str = ""):
        word = word.strip()
        if not word:
            return JSONResponse({"error": "missing word parameter"},
                                status_code=400)
        key = word.lower()
        entry = state.dictionary.lookup(key)
        was_fallback = False
        if entry is None and state.llm_client is not None:
            with word_locks.acquire(key):
                entry = state.dictionary.lookup(key)
                if entry is None:
                    try:
                        entry, was_fallback = pipeline.lookup_or_fallback(
                            state.dictionary, state.llm_client, key)
                    except LlmError as exc:
                        return JSONResponse({"error": str(exc)},
                                            status_code=502)
        entries = []
        if entry is not None:
            entries.append({
                "standard_forms": list(entry.standard_forms),
                "definition": entry.definition,
                "examples": list(entry.examples),
                "source": entry.source,
            })
        return {"word": key, "found": entry is not None,
                "was_fallback": was_fallback, "entries": entries}

    @app.post("/normalize_text")
    async def normalize_text(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "request body is not valid JSON"},
                                status_code=400)
        if not isinstance(body, dict) or not isinstance(body.get("sentence"), str):
            return JSONResponse(
                {"error": 'body must be an object with a string "sentence"'},
                status_code=400)
        if state.params is None or state.vocab is None:
            return JSONResponse(
                {"error": "no model checkpoint loaded; train one first"},
                status_code=503)
        result = pipeline.normalize_sentence(state.params, state.vocab,
                                             body["sentence"],
                                             state.nsw_threshold)
        return result.to_dict()

    return app


def serve(state: ServiceState, host: str = "127.0.0.1", port: int = 8000):
    import uvicorn

    uvicorn.run(create_app(state), host=host, port=port, log_level="warning")
