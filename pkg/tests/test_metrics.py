"""Metric formulas checked against independently coded oracles."""

import json
import math
import random

import pytest

from health_agent import datagen
from health_agent.goldens import ALL_GOLDENS, load_golden
from health_agent.metrics import (
    DEFAULT_CONFIG,
    EmptyCorpus,
    EvalReport,
    LengthMismatch,
    MetricConfig,
    bleu,
    evaluate_dataset,
    evaluate_samples,
    normalize_value,
    param_acc,
    rouge_l,
    rouge_n,
    tokenize,
    tool_acc,
    values_acc,
)
from health_agent.policies import ScriptedPolicy

# -- oracle implementations, written from the formulas with separate code paths --

_ALNUM = set("abcdefghijklmnopqrstuvwxyz0123456789")


def oracle_tokens(text):
    out, current = [], []
    for ch in text.lower():
        if ch in _ALNUM:
            current.append(ch)
        elif current:
            out.append("".join(current))
            current = []
    if current:
        out.append("".join(current))
    return out


def _gram_list(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def _clipped_overlap(cand_grams, ref_grams):
    budget = {}
    for gram in ref_grams:
        budget[gram] = budget.get(gram, 0) + 1
    overlap = 0
    for gram in cand_grams:
        if budget.get(gram, 0) > 0:
            overlap += 1
            budget[gram] -= 1
    return overlap


def oracle_rouge_n(candidate, reference, n):
    cand = _gram_list(oracle_tokens(candidate), n)
    ref = _gram_list(oracle_tokens(reference), n)
    if not cand and not ref:
        return 1.0
    if not cand or not ref:
        return 0.0
    overlap = _clipped_overlap(cand, ref)
    if overlap == 0:
        return 0.0
    precision = overlap / len(cand)
    recall = overlap / len(ref)
    return 2 * precision * recall / (precision + recall)


def oracle_rouge_l(candidate, reference):
    cand = oracle_tokens(candidate)
    ref = oracle_tokens(reference)
    if not cand and not ref:
        return 1.0
    if not cand or not ref:
        return 0.0
    table = [[0] * (len(ref) + 1) for _ in range(len(cand) + 1)]
    for i in range(1, len(cand) + 1):
        for j in range(1, len(ref) + 1):
            if cand[i - 1] == ref[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    lcs = table[-1][-1]
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


def oracle_bleu(candidates, references, max_n=4):
    cand_tokens = [oracle_tokens(c) for c in candidates]
    ref_tokens = [oracle_tokens(r) for r in references]
    cand_length = sum(len(t) for t in cand_tokens)
    ref_length = sum(len(t) for t in ref_tokens)
    if cand_length == 0:
        return 0.0
    precisions = []
    for n in range(1, max_n + 1):
        matched = total = 0
        for cand, ref in zip(cand_tokens, ref_tokens):
            cand_grams = _gram_list(cand, n)
            matched += _clipped_overlap(cand_grams, _gram_list(ref, n))
            total += len(cand_grams)
        if n >= 2 and matched == 0:
            matched, total = 1, total + 1
        if matched == 0 or total == 0:
            return 0.0
        precisions.append(matched / total)
    geometric = math.exp(sum(math.log(p) for p in precisions) / max_n)
    brevity = 1.0 if cand_length > ref_length else \
        math.exp(1 - ref_length / cand_length)
    return 100.0 * brevity * geometric


_VOCAB = ("the cat sat on a mat dog ran fast slow blood pressure 120 80 "
          "doctor visit at 11:30 today check-up fine severe mild pain").split()


def _random_sentence(rng, low=0, high=12):
    words = [rng.choice(_VOCAB) for _ in range(rng.randint(low, high))]
    parts = []
    for word in words:
        parts.append(word + rng.choice(["", "", ",", ".", "!"]))
    return rng.choice(["", " "]).join([""] + parts).strip()


def _random_pairs(count, seed):
    rng = random.Random(seed)
    return [(_random_sentence(rng), _random_sentence(rng))
            for _ in range(count)]


class TestOracleAgreement:
    def test_rouge_matches_oracle_on_random_pairs(self):
        for cand, ref in _random_pairs(100, seed=4242):
            for n in (1, 2, 3):
                assert rouge_n(cand, ref, n) == pytest.approx(
                    oracle_rouge_n(cand, ref, n), abs=1e-9)
            assert rouge_l(cand, ref) == pytest.approx(
                oracle_rouge_l(cand, ref), abs=1e-9)

    def test_bleu_matches_oracle_on_random_pairs(self):
        pairs = [(c, r) for c, r in _random_pairs(100, seed=777)
                 if oracle_tokens(c)]
        assert len(pairs) >= 90
        for cand, ref in pairs:
            assert bleu([cand], [ref]) == pytest.approx(
                oracle_bleu([cand], [ref]), abs=1e-9)

    def test_corpus_bleu_matches_oracle_on_batches(self):
        pairs = _random_pairs(100, seed=909)
        for start in range(0, 100, 10):
            batch = pairs[start:start + 10]
            cands = [c for c, _ in batch]
            refs = [r for _, r in batch]
            if not any(oracle_tokens(c) for c in cands):
                continue
            assert bleu(cands, refs) == pytest.approx(
                oracle_bleu(cands, refs), abs=1e-9)

    def test_tokenizer_matches_oracle(self):
        for cand, ref in _random_pairs(50, seed=31):
            assert tokenize(cand) == oracle_tokens(cand)
            assert tokenize(ref) == oracle_tokens(ref)
        assert tokenize("Hello, World!  It's 9:30AM.") == \
            ["hello", "world", "it", "s", "9", "30am"]


class TestRouge:
    def test_lcs_hand_fixture(self):
        assert rouge_l("a b c d", "a c d e") == 0.75

    def test_identity_is_one(self):
        for text in ("a", "the cat sat", "Blood pressure 120/80!"):
            for n in (1, 2, 3):
                assert rouge_n(text, text, n) == 1.0
            assert rouge_l(text, text) == 1.0

    def test_both_empty_scores_one(self):
        assert rouge_n("", "", 1) == 1.0
        assert rouge_l("!!!", "   ") == 1.0

    def test_one_sided_empty_scores_zero(self):
        assert rouge_n("", "hello", 1) == 0.0
        assert rouge_l("hello", "") == 0.0

    def test_disjoint_scores_zero(self):
        assert rouge_n("a b c", "x y z", 1) == 0.0
        assert rouge_l("a b c", "x y z") == 0.0

    def test_clipping_limits_repeats(self):
        # candidate repeats "the" but the reference only has one
        score = rouge_n("the the the", "the end", 1)
        precision, recall = 1 / 3, 1 / 2
        assert score == pytest.approx(
            2 * precision * recall / (precision + recall))


class TestBleu:
    def test_brevity_penalty_fixture(self):
        expected = 100.0 * math.exp(1 - 3 / 2)
        assert bleu(["the cat"], ["the cat sat"]) == pytest.approx(
            expected, abs=1e-9)

    def test_identity_is_hundred(self):
        texts = ["the cat sat on the mat", "blood pressure is fine"]
        assert bleu(texts, list(texts)) == pytest.approx(100.0, abs=1e-9)

    def test_disjoint_with_smoothing_stays_below_one(self):
        assert bleu(["a b c d e"], ["v w x y z"]) < 1.0

    def test_smoothing_keeps_partial_overlap_positive(self):
        score = bleu(["the dog the"], ["the the the"])
        assert 0.0 < score < 100.0
        assert score == pytest.approx(oracle_bleu(["the dog the"],
                                                  ["the the the"]), abs=1e-9)

    def test_empty_corpus_raises(self):
        with pytest.raises(EmptyCorpus):
            bleu([], [])

    def test_length_mismatch_raises(self):
        with pytest.raises(LengthMismatch):
            bleu(["a"], ["a", "b"])

    def test_empty_candidates_score_zero(self):
        assert bleu(["", "!"], ["a", "b"]) == 0.0

    def test_whitespace_normalization_invariance(self):
        rng = random.Random(55)
        for cand, ref in _random_pairs(30, seed=12):
            noisy = cand.replace(" ", rng.choice(["  ", " \n", "\t "]))
            assert rouge_l(noisy, ref) == pytest.approx(rouge_l(cand, ref))
            assert rouge_n(noisy, ref, 2) == pytest.approx(
                rouge_n(cand, ref, 2))
            if tokenize(cand):
                assert bleu([noisy], [ref]) == pytest.approx(
                    bleu([cand], [ref]), abs=1e-9)


def _call(tool="store_symptoms", **params):
    return {"tool": tool, "parameters": params}


class TestCallAccuracies:
    def test_one_wrong_tool_in_four(self):
        gold = [_call(user_id="ABCD123456", symptoms="cough")] * 4
        pred = gold[:3] + [_call(tool="get_user_details",
                                 user_id="ABCD123456", symptoms="cough")]
        assert tool_acc(pred, gold) == 0.75
        assert param_acc(pred, gold) == 0.75
        assert values_acc(pred, gold) == 0.75

    def test_wrong_parameter_names_gate_param_and_values(self):
        gold = [_call(a=1, b=2)] * 4
        pred = [_call(a=1, b=2)] * 3 + [_call(a=1, c=2)]
        assert tool_acc(pred, gold) == 1.0
        assert param_acc(pred, gold) == 0.75
        assert values_acc(pred, gold) == 0.75

    def test_wrong_value_gates_only_values(self):
        gold = [_call(a=1)] * 4
        pred = [_call(a=1)] * 3 + [_call(a=2)]
        assert tool_acc(pred, gold) == 1.0
        assert param_acc(pred, gold) == 1.0
        assert values_acc(pred, gold) == 0.75

    def test_values_match_after_normalization(self):
        gold = [_call(date="2024-11-30", name="dr. amelia",
                      slot={"start": "11:00"})]
        pred = [_call(date="30/11/2024", name="DR. Amelia",
                      slot={"start": " 11:00 "})]
        assert values_acc(pred, gold) == 1.0

    def test_length_mismatch_raises(self):
        with pytest.raises(LengthMismatch):
            tool_acc([_call()], [])

    def test_gating_is_monotone_on_random_datasets(self):
        rng = random.Random(99)
        tools = ["a", "b", "c"]
        for _ in range(200):
            gold, pred = [], []
            for _ in range(rng.randint(1, 8)):
                names = rng.sample(["x", "y", "z"], rng.randint(1, 3))
                gold.append({"tool": rng.choice(tools),
                             "parameters": {n: rng.randint(0, 2)
                                            for n in names}})
                names = rng.sample(["x", "y", "z"], rng.randint(1, 3))
                pred.append({"tool": rng.choice(tools),
                             "parameters": {n: rng.randint(0, 2)
                                            for n in names}})
            assert values_acc(pred, gold) <= param_acc(pred, gold) \
                <= tool_acc(pred, gold)

    def test_normalize_value_recurses_containers(self):
        assert normalize_value({"a": ["X", "01/02/2023"]}) == \
            {"a": ["x", "2023-02-01"]}
        assert normalize_value("99/99/2024") == "99/99/2024"
        assert normalize_value(7) == 7


class TestMetricConfig:
    def test_rejects_bad_settings(self):
        with pytest.raises(ValueError):
            MetricConfig(bleu_max_n=0)
        with pytest.raises(ValueError):
            MetricConfig(smoothing="none")
        with pytest.raises(ValueError):
            MetricConfig(rouge_variant="recall")

    def test_describe_records_choices(self):
        record = DEFAULT_CONFIG.describe()
        assert record["bleu_max_n"] == 4
        assert record["smoothing"] == "add-one"
        assert "gated" in record["values_acc"]


def _golden_samples(names):
    """Gold sample records for the given goldens, tagged with family."""
    golds = []
    for name in names:
        planner, caller = datagen.interleave(load_golden(name))
        for sample in planner + caller:
            golds.append({"role": sample["role"], "output": sample["output"],
                          "family": name})
    return golds


class TestEvaluateSamples:
    def test_goldens_vs_goldens_is_maximal(self):
        golds = _golden_samples(sorted(set(ALL_GOLDENS) -
                                       {"soft_sos_corpus"}))
        preds = [{"output": g["output"]} for g in golds]
        report = evaluate_samples(preds, golds)
        assert len(report.rows) == 14
        for (role, _), row in report.rows.items():
            assert row["bleu"] == pytest.approx(100.0, abs=1e-6)
            assert row["rouge1"] == row["rouge2"] == row["rougeL"] == 1.0
            if role == "caller":
                assert row["tool_acc"] == 1.0
                assert row["param_acc"] == 1.0
                assert row["values_acc"] == 1.0
            else:
                assert "tool_acc" not in row

    def test_scripted_sos_replay_scores_maximal(self):
        preds, golds = [], []
        for name in ("soft_sos", "hard_sos_start", "hard_sos_end"):
            trajectory = load_golden(name)
            policy = ScriptedPolicy(trajectory)
            planner, caller = datagen.interleave(trajectory)
            for sample in planner + caller:
                preds.append({"output": policy.complete(sample["input"],
                                                        sample["role"])})
                golds.append({"role": sample["role"],
                              "output": sample["output"], "family": name})
        report = evaluate_samples(preds, golds)
        assert len(report.rows) == 6
        for (role, _), row in report.rows.items():
            assert row["bleu"] == pytest.approx(100.0, abs=1e-6)
            assert row["rouge1"] == 1.0
            assert row["rouge2"] == 1.0
            assert row["rougeL"] == 1.0
            if role == "caller":
                assert row["tool_acc"] == 1.0
                assert row["param_acc"] == 1.0
                assert row["values_acc"] == 1.0

    def test_shuffle_within_category_drops_below_maximal(self):
        golds = _golden_samples(["general_booking"])
        by_role = {"planner": [], "caller": []}
        for gold in golds:
            by_role[gold["role"]].append(gold["output"])
        preds = []
        for gold in golds:
            # rotate outputs within the role so every line is mismatched
            outputs = by_role[gold["role"]]
            preds.append({"output":
                          outputs[(outputs.index(gold["output"]) + 1)
                                  % len(outputs)]})
        report = evaluate_samples(preds, golds)
        planner = report.row("planner", "general_booking")
        caller = report.row("caller", "general_booking")
        assert planner["bleu"] < 100.0 - 1e-6
        assert planner["rougeL"] < 1.0
        assert caller["tool_acc"] < 1.0

    def test_unparseable_caller_prediction_counts_as_miss(self):
        golds = [g for g in _golden_samples(["soft_sos"])
                 if g["role"] == "caller"]
        preds = [{"output": "just some chatter"}] + \
            [{"output": g["output"]} for g in golds[1:]]
        report = evaluate_samples(preds, golds)
        row = report.row("caller", "soft_sos")
        expected = (len(golds) - 1) / len(golds)
        assert row["tool_acc"] == pytest.approx(expected)

    def test_length_mismatch_raises(self):
        golds = _golden_samples(["soft_sos"])
        with pytest.raises(LengthMismatch):
            evaluate_samples([], golds)

    def test_missing_expected_category_warns_without_row(self):
        golds = _golden_samples(["soft_sos"])
        preds = [{"output": g["output"]} for g in golds]
        report = evaluate_samples(preds, golds,
                                  expected_categories=("soft_sos", "missing"))
        assert ("planner", "missing") not in report.rows
        assert any("missing" in w for w in report.warnings)

    def test_untagged_golds_group_under_all(self):
        golds = [{"role": "planner", "output": "go left"},
                 {"role": "planner", "output": "go right"}]
        preds = [{"output": "go left"}, {"output": "go right"}]
        report = evaluate_samples(preds, golds)
        assert set(report.rows) == {("planner", "all")}
        assert report.rows[("planner", "all")]["samples"] == 2


class TestReportSurface:
    def _report(self):
        golds = _golden_samples(["soft_sos"])
        preds = [{"output": g["output"]} for g in golds]
        return evaluate_samples(preds, golds)

    def test_record_round_trips_through_json(self):
        record = self._report().to_record()
        clone = json.loads(json.dumps(record))
        assert clone["config"]["bleu_max_n"] == 4
        roles = {(row["role"], row["category"]) for row in clone["rows"]}
        assert roles == {("planner", "soft_sos"), ("caller", "soft_sos")}

    def test_table_lists_each_row_and_dashes_planner_accuracies(self):
        table = self._report().render_table()
        lines = table.splitlines()
        assert "tool_acc" in lines[0]
        planner_line = next(l for l in lines if "planner" in l)
        assert "-" in planner_line
        caller_line = next(l for l in lines if "caller" in l)
        assert "-" not in caller_line.replace("soft_sos", "")

    def test_thresholds_flag_only_breaches(self):
        report = self._report()
        assert report.failing({"bleu": 100.0, "values_acc": 1.0}) == []
        golds = _golden_samples(["soft_sos"])
        preds = [{"output": "noise"} for _ in golds]
        noisy = evaluate_samples(preds, golds)
        failures = noisy.failing({"rougeL": 0.9})
        assert len(failures) == 2
        assert all("rougeL" in f for f in failures)

    def test_empty_report_surface(self):
        report = EvalReport(config=DEFAULT_CONFIG.describe())
        assert report.to_record()["rows"] == []
        assert report.failing({"bleu": 1.0}) == []


class TestEvaluateDataset:
    def test_reads_line_aligned_files(self, tmp_path):
        golds = _golden_samples(["hard_sos_start"])
        gold_path = tmp_path / "gold.jsonl"
        pred_path = tmp_path / "pred.jsonl"
        gold_path.write_text(
            "\n".join(json.dumps(g) for g in golds) + "\n", encoding="utf-8")
        pred_path.write_text(
            "\n".join(json.dumps({"output": g["output"]}) for g in golds) +
            "\n", encoding="utf-8")
        report = evaluate_dataset(pred_path, gold_path)
        assert report.row("caller", "hard_sos_start")["values_acc"] == 1.0
        assert report.row("planner", "hard_sos_start")["bleu"] == \
            pytest.approx(100.0, abs=1e-6)

    def test_bad_record_names_file_and_line(self, tmp_path):
        gold_path = tmp_path / "gold.jsonl"
        pred_path = tmp_path / "pred.jsonl"
        gold_path.write_text('{"role": "planner", "output": "x"}\n',
                             encoding="utf-8")
        pred_path.write_text("not json\n", encoding="utf-8")
        with pytest.raises(ValueError, match="pred.jsonl:1"):
            evaluate_dataset(pred_path, gold_path)
