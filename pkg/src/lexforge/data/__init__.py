"""Bundled fixture data: seed NSW dictionary, regex rules, mock LLM table."""
from pathlib import Path

_HERE = Path(__file__).parent

DICT_PATH = _HERE / "nsw_dict.jsonl"
RULES_PATH = _HERE / "rules.json"
MOCK_LLM_PATH = _HERE / "mock_llm.jsonl"
SYNTH_DIR = _HERE / "synth"
