"""Weak supervision rules: dictionary-derived and regex-based labelers.

Each rule maps one token (plus its neighbor strings) to a candidate
normalization or abstains. Rules never throw; a rule that cannot decide
abstains. Extra regex rules can be declared in a JSON config file, a list
of {"name", "pattern", "replacement"} records applied via ``re.fullmatch``
style substitution.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass

from lexforge.dictionary import Dictionary
from lexforge.textcore import KEEP, AlignedSentence, strip_diacritics


@dataclass(frozen=True)
class RuleVerdict:
    rule_id: int
    candidate: str | None = None

    @property
    def fired(self) -> bool:
        return self.candidate is not None


class Rule:
    kind = "regex"

    def __init__(self, name: str):
        self.name = name

    def apply(self, token: str, left: str, right: str) -> str | None:
        raise NotImplementedError


class DictionaryRule(Rule):
    """Emit the first standard form of an exact dictionary key match."""

    kind = "dictionary"

    def __init__(self, dictionary: Dictionary, name: str = "dictionary"):
        super().__init__(name)
        self._dictionary = dictionary

    def apply(self, token: str, left: str, right: str) -> str | None:
        entry = self._dictionary.lookup(token)
        if entry is None:
            return None
        candidate = entry.standard_forms[0]
        return candidate if candidate != token else None


class NoDiacriticsRule(Rule):
    """Restore diacritics when exactly one dictionary standard form matches.

    Fires on a token t when strip_diacritics(form) == t for a unique
    standard form across the whole dictionary and form != t.
    """

    kind = "dictionary"

    def __init__(self, dictionary: Dictionary, name: str = "no_diacritics"):
        super().__init__(name)
        index: dict[str, set[str]] = {}
        for entry in dictionary.entries.values():
            for form in entry.standard_forms:
                index.setdefault(strip_diacritics(form).lower(), set()).add(form)
        self._index = index

    def apply(self, token: str, left: str, right: str) -> str | None:
        forms = self._index.get(token.lower())
        if forms is None or len(forms) != 1:
            return None
        form = next(iter(forms))
        return form if form != token else None


class RepeatedCharRule(Rule):
    """Collapse three or more identical trailing letters to a single one."""

    _pattern = re.compile(r"^(.*?)(\w)\2{2,}$", re.UNICODE)

    def __init__(self, name: str = "repeated_chars"):
        super().__init__(name)

    def apply(self, token: str, left: str, right: str) -> str | None:
        match = self._pattern.match(token)
        if match is None:
            return None
        candidate = match.group(1) + match.group(2)
        return candidate if candidate != token else None


class RegexRule(Rule):
    """Whole-token pattern with a backreference-capable replacement."""

    def __init__(self, name: str, pattern: str, replacement: str):
        super().__init__(name)
        self._pattern = re.compile(pattern)
        self._replacement = replacement

    def apply(self, token: str, left: str, right: str) -> str | None:
        match = self._pattern.fullmatch(token)
        if match is None:
            return None
        candidate = match.expand(self._replacement)
        return candidate if candidate and candidate != token else None


class RuleSet:
    """Ordered, immutable collection of rules with dense rule_ids."""

    def __init__(self, rules: list[Rule]):
        if not rules:
            raise ValueError("a rule set needs at least one rule")
        self.rules = list(rules)

    def __len__(self) -> int:
        return len(self.rules)

    def apply(self, token: str, left: str = "", right: str = "") -> list[RuleVerdict]:
        """One verdict per rule, in rule_id order; abstains on any rule error."""
        verdicts = []
        for rule_id, rule in enumerate(self.rules):
            try:
                candidate = rule.apply(token, left, right)
            except Exception:
                candidate = None
            if candidate == "":
                candidate = None
            verdicts.append(RuleVerdict(rule_id, candidate))
        return verdicts


def apply_rules(rules: RuleSet, token: str, left_context: str = "",
                right_context: str = "") -> list[RuleVerdict]:
    if not token:
        raise ValueError("token is empty")
    return rules.apply(token, left_context, right_context)


def load_regex_rules(path: str) -> list[RegexRule]:
    with open(path, encoding="utf-8") as fh:
        records = json.load(fh)
    return [RegexRule(r["name"], r["pattern"], r["replacement"]) for r in records]


def default_ruleset(dictionary: Dictionary,
                    regex_config_path: str | None = None) -> RuleSet:
    rules: list[Rule] = [
        DictionaryRule(dictionary),
        RepeatedCharRule(),
        NoDiacriticsRule(dictionary),
    ]
    if regex_config_path is not None:
        rules.extend(load_regex_rules(regex_config_path))
    return RuleSet(rules)


def rule_coverage(rules: RuleSet,
                  corpus: list[AlignedSentence]) -> list[tuple[float, float]]:
    """Per-rule (coverage, precision) over every token of ``corpus``.

    Coverage is the fraction of tokens the rule fires on. Precision is,
    among fired tokens whose gold label is not KEEP, the fraction where the
    candidate equals the gold label; by convention 1.0 when that set is
    empty (an always-abstaining rule is vacuously precise).
    """
    if not corpus:
        raise ValueError("empty corpus")
    total = 0
    fires = [0] * len(rules)
    judged = [0] * len(rules)
    correct = [0] * len(rules)
    for sentence in corpus:
        surfaces = [t.surface for t in sentence.source_tokens]
        for i, (surface, gold) in enumerate(zip(surfaces, sentence.gold_labels)):
            total += 1
            left = surfaces[i - 1] if i > 0 else ""
            right = surfaces[i + 1] if i + 1 < len(surfaces) else ""
            for verdict in rules.apply(surface, left, right):
                if not verdict.fired:
                    continue
                fires[verdict.rule_id] += 1
                if gold != KEEP:
                    judged[verdict.rule_id] += 1
                    if verdict.candidate == gold:
                        correct[verdict.rule_id] += 1
    if total == 0:
        raise ValueError("empty corpus")
    return [
        (fires[r] / total, correct[r] / judged[r] if judged[r] else 1.0)
        for r in range(len(rules))
    ]
