"""Text and tool-call metrics for planner and caller outputs.

BLEU is corpus-level on a 0-100 scale with add-one smoothing for zero
higher-order counts; ROUGE variants report F1 on 0-1. Call accuracies are
gated: a parameter-set match only counts on a correct tool, and a value
match only counts on a correct parameter set, so ValuesAcc <= ParamAcc <=
ToolAcc on any dataset.
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from typing import Any, Iterable, Sequence

from .trajectory import TrajectoryError, parse_caller_output

log = logging.getLogger(__name__)

TOKEN_RE = re.compile(r"[a-z0-9]+")
_DMY_RE = re.compile(r"^(\d{2})/(\d{2})/(\d{4})$")

PLANNER_METRICS = ("bleu", "rouge1", "rouge2", "rougeL")
CALLER_METRICS = PLANNER_METRICS + ("tool_acc", "param_acc", "values_acc")


class EmptyCorpus(Exception):
    """BLEU needs at least one candidate/reference pair."""


class LengthMismatch(Exception):
    """Accuracy metrics need predictions aligned one-to-one with golds."""


@dataclass(frozen=True)
class MetricConfig:
    """Tokenizer and scoring choices, fixed for a whole evaluation run."""

    lowercase: bool = True
    bleu_max_n: int = 4
    smoothing: str = "add-one"
    rouge_variant: str = "f1"

    def __post_init__(self):
        if self.bleu_max_n < 1:
            raise ValueError("bleu_max_n must be at least 1")
        if self.smoothing != "add-one":
            raise ValueError(f"unknown smoothing {self.smoothing!r}")
        if self.rouge_variant != "f1":
            raise ValueError(f"unknown rouge variant {self.rouge_variant!r}")

    def describe(self) -> dict:
        return {"lowercase": self.lowercase, "bleu_max_n": self.bleu_max_n,
                "smoothing": self.smoothing,
                "rouge_variant": self.rouge_variant,
                "values_acc": "gated exact match after normalization"}


DEFAULT_CONFIG = MetricConfig()


def tokenize(text: str, config: MetricConfig = DEFAULT_CONFIG) -> list[str]:
    """Lowercased tokens split on whitespace and punctuation."""
    if config.lowercase:
        text = text.lower()
    return TOKEN_RE.findall(text)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _f1(overlap: float, candidate_total: int, reference_total: int) -> float:
    if candidate_total == 0 and reference_total == 0:
        log.debug("both sides empty; scoring 1.0 by convention")
        return 1.0
    if candidate_total == 0 or reference_total == 0 or overlap == 0:
        return 0.0
    precision = overlap / candidate_total
    recall = overlap / reference_total
    return 2 * precision * recall / (precision + recall)


def rouge_n(candidate: str, reference: str, n: int = 1,
            config: MetricConfig = DEFAULT_CONFIG) -> float:
    """F1 of n-gram overlap between one candidate and one reference."""
    cand = _ngrams(tokenize(candidate, config), n)
    ref = _ngrams(tokenize(reference, config), n)
    overlap = sum((cand & ref).values())
    return _f1(overlap, sum(cand.values()), sum(ref.values()))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    # one rolling row is enough for lengths
    previous = [0] * (len(b) + 1)
    for token in a:
        current = [0]
        for j, other in enumerate(b):
            if token == other:
                current.append(previous[j] + 1)
            else:
                current.append(max(previous[j + 1], current[j]))
        previous = current
    return previous[-1]


def rouge_l(candidate: str, reference: str,
            config: MetricConfig = DEFAULT_CONFIG) -> float:
    """F1 over the longest common subsequence of tokens."""
    cand = tokenize(candidate, config)
    ref = tokenize(reference, config)
    return _f1(_lcs_length(cand, ref), len(cand), len(ref))


def bleu(candidates: Sequence[str], references: Sequence[str],
         config: MetricConfig = DEFAULT_CONFIG) -> float:
    """Corpus BLEU on a 0-100 scale.

    Modified n-gram precisions up to ``bleu_max_n``, brevity penalty, and
    add-one smoothing when a higher-order numerator is zero; without the
    smoothing any short utterance corpus degenerates to zero.
    """
    if len(candidates) != len(references):
        raise LengthMismatch(f"{len(candidates)} candidates vs "
                             f"{len(references)} references")
    if not candidates:
        raise EmptyCorpus("no candidate/reference pairs")
    cand_tokens = [tokenize(c, config) for c in candidates]
    ref_tokens = [tokenize(r, config) for r in references]
    cand_length = sum(len(t) for t in cand_tokens)
    ref_length = sum(len(t) for t in ref_tokens)
    if cand_length == 0:
        return 0.0

    log_precision_sum = 0.0
    for n in range(1, config.bleu_max_n + 1):
        matched = total = 0
        for cand, ref in zip(cand_tokens, ref_tokens):
            grams = _ngrams(cand, n)
            matched += sum((grams & _ngrams(ref, n)).values())
            total += sum(grams.values())
        if n >= 2 and matched == 0:
            matched, total = 1, total + 1
        if matched == 0 or total == 0:
            return 0.0
        log_precision_sum += math.log(matched / total) / config.bleu_max_n

    brevity = 1.0 if cand_length > ref_length else \
        math.exp(1 - ref_length / cand_length)
    return 100.0 * brevity * math.exp(log_precision_sum)


# -- gated call accuracies ------------------------------------------------------

def _as_call(entry) -> tuple[str, dict]:
    if hasattr(entry, "tool"):
        return entry.tool, entry.parameters
    return entry["tool"], entry["parameters"]


def normalize_value(value: Any) -> Any:
    """Canonical form for value comparison: case-folded strings with
    day/month/year dates rewritten to ISO, containers element-wise."""
    if isinstance(value, str):
        folded = value.strip().casefold()
        dmy = _DMY_RE.match(folded)
        if dmy:
            day, month, year = dmy.groups()
            try:
                return date(int(year), int(month), int(day)).isoformat()
            except ValueError:
                return folded
        return folded
    if isinstance(value, dict):
        return {k: normalize_value(v) for k, v in value.items()}
    if isinstance(value, list):
        return [normalize_value(v) for v in value]
    return value


def _gate_flags(predicted, gold) -> list[tuple[bool, bool, bool]]:
    if len(predicted) != len(gold):
        raise LengthMismatch(f"{len(predicted)} predictions vs "
                             f"{len(gold)} golds")
    flags = []
    for p, g in zip(predicted, gold):
        p_tool, p_params = _as_call(p)
        g_tool, g_params = _as_call(g)
        tool_ok = p_tool == g_tool
        names_ok = tool_ok and set(p_params) == set(g_params)
        values_ok = names_ok and all(
            normalize_value(p_params[k]) == normalize_value(g_params[k])
            for k in g_params)
        flags.append((tool_ok, names_ok, values_ok))
    return flags


def tool_acc(predicted: Sequence, gold: Sequence) -> float:
    flags = _gate_flags(predicted, gold)
    return sum(f[0] for f in flags) / len(flags) if flags else 1.0


def param_acc(predicted: Sequence, gold: Sequence) -> float:
    flags = _gate_flags(predicted, gold)
    return sum(f[1] for f in flags) / len(flags) if flags else 1.0


def values_acc(predicted: Sequence, gold: Sequence) -> float:
    flags = _gate_flags(predicted, gold)
    return sum(f[2] for f in flags) / len(flags) if flags else 1.0


# -- dataset evaluation ----------------------------------------------------------

@dataclass
class EvalReport:
    config: dict
    rows: dict[tuple[str, str], dict] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def row(self, role: str, category: str) -> dict:
        return self.rows[(role, category)]

    def to_record(self) -> dict:
        return {
            "config": self.config,
            "rows": [{"role": role, "category": category, **values}
                     for (role, category), values in sorted(self.rows.items())],
            "warnings": list(self.warnings),
        }

    def render_table(self) -> str:
        header = ["role", "category", "n"] + list(CALLER_METRICS)
        lines = ["  ".join(f"{h:>10}" for h in header)]
        for (role, category), values in sorted(self.rows.items()):
            cells = [f"{role:>10}", f"{category:>10}",
                     f"{values['samples']:>10}"]
            for metric in CALLER_METRICS:
                if metric in values:
                    width = ".2f" if metric == "bleu" else ".4f"
                    cells.append(f"{values[metric]:>10{width}}")
                else:
                    cells.append(f"{'-':>10}")
            lines.append("  ".join(cells))
        return "\n".join(lines)

    def failing(self, thresholds: dict[str, float]) -> list[str]:
        """Rows whose metric falls below a configured minimum."""
        failures = []
        for (role, category), values in sorted(self.rows.items()):
            for metric, minimum in thresholds.items():
                if metric in values and values[metric] < minimum:
                    failures.append(f"{role}/{category}: {metric} "
                                    f"{values[metric]:.4f} < {minimum}")
        return failures


def _score_group(predictions: list[str], golds: list[str],
                 role: str, config: MetricConfig) -> dict:
    row = {
        "samples": len(golds),
        "bleu": bleu(predictions, golds, config),
        "rouge1": sum(rouge_n(p, g, 1, config)
                      for p, g in zip(predictions, golds)) / len(golds),
        "rouge2": sum(rouge_n(p, g, 2, config)
                      for p, g in zip(predictions, golds)) / len(golds),
        "rougeL": sum(rouge_l(p, g, config)
                      for p, g in zip(predictions, golds)) / len(golds),
    }
    if role == "caller":
        predicted_calls = []
        gold_calls = []
        for p, g in zip(predictions, golds):
            gold_calls.append(parse_caller_output(g))
            try:
                predicted_calls.append(parse_caller_output(p))
            except TrajectoryError:
                # an unparseable prediction cannot match any tool
                predicted_calls.append({"tool": "", "parameters": {}})
        row["tool_acc"] = tool_acc(predicted_calls, gold_calls)
        row["param_acc"] = param_acc(predicted_calls, gold_calls)
        row["values_acc"] = values_acc(predicted_calls, gold_calls)
    return row


def evaluate_samples(predictions: Iterable[dict], golds: Iterable[dict],
                     config: MetricConfig = DEFAULT_CONFIG,
                     expected_categories: Sequence[str] = ()) -> EvalReport:
    """Score aligned sample records, grouped by (role, category).

    Gold records carry {role, output} and optionally {family}; predictions
    need {output} and are paired with golds by position. Expected
    categories with no samples get a warning instead of a row.
    """
    predictions = list(predictions)
    golds = list(golds)
    if len(predictions) != len(golds):
        raise LengthMismatch(f"{len(predictions)} predictions vs "
                             f"{len(golds)} golds")
    report = EvalReport(config=config.describe())
    groups: dict[tuple[str, str], tuple[list[str], list[str]]] = {}
    for pred, gold in zip(predictions, golds):
        role = gold["role"]
        category = gold.get("family", "all")
        bucket = groups.setdefault((role, category), ([], []))
        bucket[0].append(pred["output"])
        bucket[1].append(gold["output"])
    for (role, category), (pred_texts, gold_texts) in groups.items():
        report.rows[(role, category)] = _score_group(
            pred_texts, gold_texts, role, config)
    seen = {category for _, category in groups}
    for category in expected_categories:
        if category not in seen:
            message = f"category {category!r} has no samples; row omitted"
            report.warnings.append(message)
            log.info(message)
    return report


def _read_records(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: bad record: {exc}") from exc
    return records


def evaluate_dataset(pred_path, gold_path,
                     config: MetricConfig = DEFAULT_CONFIG,
                     expected_categories: Sequence[str] = ()) -> EvalReport:
    """Score a line-aligned prediction file against a gold file."""
    return evaluate_samples(_read_records(pred_path), _read_records(gold_path),
                            config, expected_categories)
