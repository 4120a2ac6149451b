from __future__ import annotations

import io
from dataclasses import replace
from fractions import Fraction

import pytest

from theorembench.curation import (
    EXCLUDED,
    TIER_EASY,
    TIER_HARD,
    TIER_MEDIUM,
    CurationError,
    DedupMatch,
    ModelVerdict,
    PanelMismatch,
    TierThresholds,
    UntieredInstance,
    _percent,
    curation_stats,
    dedup_filter,
    dump_verdicts,
    load_corpus,
    load_verdicts,
    similarity,
    stratify,
    stratify_dataset,
)
from theorembench.instances import ProblemInstance

MODELS = tuple(f"model-{i}" for i in range(5))


def panel(instance_id: str, corrects, trials: int = 1) -> list[ModelVerdict]:
    """One verdict row per model per trial; corrects is per-model bools."""
    rows = []
    for model, flag in zip(MODELS, corrects):
        per_trial = flag if isinstance(flag, (list, tuple)) else [flag] * trials
        for trial, ok in enumerate(per_trial, start=1):
            rows.append(ModelVerdict(model, instance_id, trial, ok))
    return rows


def make_instance(i: int, difficulty: str | None = None) -> ProblemInstance:
    return ProblemInstance(
        template_id="curation_test_template_001",
        problem=f"Compute the quantity Q({i}).",
        solution_steps=f"Evaluate Q at {i}.",
        numerical_value=str(i * i),
        exact_expression=f"{i}^2",
        params_used={"n": i},
        difficulty=difficulty,
    )


# --- stratification ------------------------------------------------------------


def expected_tier(correct_models: int) -> str:
    if correct_models <= 1:
        return TIER_HARD
    if correct_models <= 3:
        return TIER_MEDIUM
    if correct_models == 5:
        return EXCLUDED  # single trial: all correct means all trials correct
    return TIER_EASY


def test_stratify_exhaustive_single_trial_patterns():
    th = TierThresholds()
    for pattern in range(32):
        corrects = [bool(pattern >> i & 1) for i in range(5)]
        tier = stratify("inst", panel("inst", corrects), th)
        assert tier == expected_tier(sum(corrects)), f"pattern {corrects}"


def test_stratify_any_trial_counts_model_as_correct():
    th = TierThresholds()
    corrects = [[False, True], [True, False], [False, False], [False, False], [False, False]]
    assert stratify("inst", panel("inst", corrects), th) == TIER_MEDIUM


def test_stratify_all_correct_all_trials_excluded():
    th = TierThresholds()
    verdicts = panel("inst", [True] * 5, trials=3)
    assert stratify("inst", verdicts, th) == EXCLUDED


def test_stratify_one_missed_trial_is_easy_not_excluded():
    th = TierThresholds()
    corrects = [[True, True]] * 4 + [[True, False]]
    assert stratify("inst", panel("inst", corrects), th) == TIER_EASY


def test_stratify_exclusion_flag_off():
    th = TierThresholds(exclude_if_all_correct_all_trials=False)
    assert stratify("inst", panel("inst", [True] * 5), th) == TIER_EASY


def test_stratify_panel_mismatch():
    th = TierThresholds()
    with pytest.raises(PanelMismatch):
        stratify("inst", panel("inst", [True, False, False, False]), th)
    with pytest.raises(PanelMismatch):
        stratify("inst", [], th)


def test_stratify_ignores_other_instances():
    th = TierThresholds()
    verdicts = panel("a", [False] * 5) + panel("b", [True] * 4 + [False])
    assert stratify("a", verdicts, th) == TIER_HARD
    assert stratify("b", verdicts, th) == TIER_EASY


@pytest.mark.parametrize(
    "hard_max, medium_max, panel_size",
    [(3, 3, 5), (2, 1, 5), (1, 5, 5), (-1, 3, 5), (1, 3, 3)],
)
def test_threshold_validation(hard_max, medium_max, panel_size):
    with pytest.raises(CurationError):
        TierThresholds(panel_size=panel_size, hard_max=hard_max, medium_max=medium_max)


def test_custom_thresholds():
    th = TierThresholds(panel_size=3, hard_max=0, medium_max=1)
    assert stratify("i", panel("i", [False, False, False]), th) == TIER_HARD
    assert stratify("i", panel("i", [True, False, False]), th) == TIER_MEDIUM
    assert stratify("i", panel("i", [True, True, False]), th) == TIER_EASY


def test_stratify_dataset_sets_difficulty_and_collects_excluded():
    th = TierThresholds()
    instances = [make_instance(i) for i in range(3)]
    verdicts = (
        panel(instances[0].instance_id, [False] * 5)
        + panel(instances[1].instance_id, [True, True, False, False, False])
        + panel(instances[2].instance_id, [True] * 5)
    )
    kept, excluded = stratify_dataset(instances, verdicts, th)
    assert [inst.difficulty for inst in kept] == [TIER_HARD, TIER_MEDIUM]
    assert excluded == [instances[2].instance_id]
    assert instances[0].difficulty is None  # original untouched


# --- verdict CSV ----------------------------------------------------------------


def test_verdict_csv_round_trip():
    verdicts = panel("abc123", [True, False, True, False, True], trials=2)
    text = dump_verdicts(verdicts)
    assert text.splitlines()[0] == "model_id,instance_id,trial,correct"
    assert load_verdicts(io.StringIO(text)) == verdicts


def test_verdict_csv_accepts_word_booleans(tmp_path):
    path = tmp_path / "verdicts.csv"
    path.write_text(
        "model_id,instance_id,trial,correct\n"
        "m1,i1,1,true\n"
        "m1,i1,2,False\n",
        encoding="utf-8",
    )
    verdicts = load_verdicts(path)
    assert [v.correct for v in verdicts] == [True, False]


def test_verdict_csv_rejects_wrong_header():
    with pytest.raises(CurationError):
        load_verdicts(io.StringIO("model,instance,trial,correct\nm,i,1,1\n"))


def test_verdict_csv_rejects_bad_flag():
    text = "model_id,instance_id,trial,correct\nm,i,1,maybe\n"
    with pytest.raises(CurationError):
        load_verdicts(io.StringIO(text))


def test_verdict_csv_rejects_short_row():
    text = "model_id,instance_id,trial,correct\nm,i,1\n"
    with pytest.raises(CurationError):
        load_verdicts(io.StringIO(text))


# --- near-duplicate filtering ----------------------------------------------------


def test_similarity_identical_and_disjoint():
    text = "count the spanning trees of the complete graph on seven vertices"
    assert similarity(text, text) == 1.0
    assert similarity(text, "integrate x squared from zero to one dx today") == 0.0


def test_similarity_hand_computed_jaccard():
    a = "one two three four five six"
    b = "one two three four five seven"
    # shingles: {12345, 23456} vs {12345, 23457} -> 1 shared of 3 total
    assert similarity(a, b) == pytest.approx(1 / 3)


def test_similarity_ignores_math_markup_and_case():
    assert similarity("Compute $n^{2}$ now", "compute n 2 now") == 1.0


def test_similarity_short_texts_use_whole_text_shingle():
    assert similarity("alpha beta", "alpha beta") == 1.0
    assert similarity("alpha beta", "alpha gamma") == 0.0
    assert similarity("", "") == 1.0
    assert similarity("", "alpha") == 0.0


def test_dedup_drops_at_threshold_boundary():
    inst = replace(make_instance(1), problem="a b c d e f g h")
    corpus = ["a b c d e f g h i"]  # 4 shared shingles of 5 -> exactly 0.8
    assert similarity(inst.problem, corpus[0]) == pytest.approx(0.8)
    kept, removed = dedup_filter([inst], corpus, threshold=0.8)
    assert kept == []
    assert removed == [DedupMatch(inst.instance_id, 0.8, 0)]


def test_dedup_below_threshold_keeps():
    inst = replace(make_instance(1), problem="a b c d e f g h")
    kept, removed = dedup_filter([inst], ["a b c d e f g h i j"], threshold=0.8)
    assert removed == []
    assert len(kept) == 1


def test_dedup_reports_best_corpus_hit():
    inst = replace(make_instance(2), problem="a b c d e f g h")
    corpus = ["a b c d e f g h i j", "a b c d e f g h i", "a b c d e f g h"]
    kept, removed = dedup_filter([inst], corpus, threshold=0.5)
    assert kept == []
    assert len(removed) == 1
    assert removed[0].corpus_index == 2
    assert removed[0].similarity == 1.0


def test_dedup_never_compares_instances_to_each_other():
    twins = [make_instance(1), make_instance(2)]
    twins = [replace(t, problem="identical wording every time here ok") for t in twins]
    corpus = ["completely unrelated reference problem about integrals and limits"]
    kept, removed = dedup_filter(twins, corpus, threshold=0.5)
    assert len(kept) == 2
    assert removed == []


def test_load_corpus_skips_blanks(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text("first problem\n\n  \nsecond problem\n", encoding="utf-8")
    assert load_corpus(path) == ["first problem", "second problem"]


def test_fixture_corpus_loads():
    from theorembench.fixtures_data import fixture_path

    corpus = load_corpus(fixture_path("reference_corpus.txt"))
    assert len(corpus) == 8
    assert all(line.strip() for line in corpus)


# --- statistics ----------------------------------------------------------------


def test_percent_rounds_half_up():
    assert _percent(1, 800) == "0.13"  # 0.125 rounds up, not to even
    assert _percent(1, 3) == "33.33"
    assert _percent(2, 3) == "66.67"
    assert _percent(5, 8) == "62.50"
    assert _percent(0, 7) == "0.00"
    assert _percent(7, 7) == "100.00"


def test_curation_stats_tier_mix():
    instances = (
        [make_instance(i, TIER_HARD) for i in range(404)]
        + [make_instance(1000 + i, TIER_MEDIUM) for i in range(250)]
        + [make_instance(2000 + i, TIER_EASY) for i in range(128)]
    )
    stats = curation_stats(instances)
    assert stats.total == 782
    assert stats.counts == {TIER_HARD: 404, TIER_MEDIUM: 250, TIER_EASY: 128}
    assert stats.fractions[TIER_HARD] == Fraction(404, 782)
    assert stats.percentages == {TIER_HARD: "51.66", TIER_MEDIUM: "31.97", TIER_EASY: "16.37"}


def test_curation_stats_requires_tiers():
    with pytest.raises(UntieredInstance):
        curation_stats([make_instance(1)])
    with pytest.raises(CurationError):
        curation_stats([make_instance(1, "Impossible")])


def test_curation_stats_empty():
    stats = curation_stats([])
    assert stats.total == 0
    assert stats.percentages == {t: "0.00" for t in (TIER_HARD, TIER_MEDIUM, TIER_EASY)}
