"""Lexical normalization toolkit for noisy Vietnamese social media text.

Provides deterministic tokenization and diacritics handling, a growing
non-standard-word (NSW) dictionary with an external-LLM fallback, a weak-rule
attention teacher, a compact multitask student model, an iterative
self-training loop, evaluation metrics, and an HTTP service plus CLI.
"""

__version__ = "0.1.0"

from lexforge.textcore import KEEP, Token, tokenize, strip_diacritics

__all__ = ["KEEP", "Token", "tokenize", "strip_diacritics", "__version__"]
