#!/usr/bin/env python3
"""
Test: Interpretation
Purpose: Verify the two-step filter, joint control and the appendix analyses

Tests:
- Verdict rules for text/audio (positive attention) and images (same direction)
- Hypothesis ordering, counts and key alignment
- Planted text, audio and image effects are recovered on a synthetic holdout
- Cross-modal interactions, brand heterogeneity and learning patterns
"""

import sys
from datetime import datetime, timedelta

import numpy as np
import pandas as pd

from fixtures import (
    run_tests, make_record,
    assert_equal, assert_true, assert_false, assert_close, assert_raises, assert_in
)

from app.errors import DataError, KeyMismatchError
from app.ingest.brands import BrandLexicon
from app.ingest.features import structured_frame
from app.interpretation.common import (
    BRAND_ANY,
    candidate_key,
    ci_column,
    duration_column,
    parse_key,
    size_column,
    video_covariates,
)
from app.interpretation.engine import Exports, interpret, slice_outcomes
from app.interpretation.heterogeneity import brand_heterogeneity, cross_modal_interactions, quadrant
from app.interpretation.hypotheses import (
    build_hypotheses,
    format_cell,
    step2_survivors,
    verdict_for,
)
from app.interpretation.learning import influencer_group, learning_patterns
from app.interpretation.text import text_step1, text_step2
from app.models.results import HypothesisSet, RelationshipRecord, Verdict
from app.models.schemas import ItemCategory, Modality, Outcome, SliceWhich, SoundCategory, TextField
from app.stats.effects import make_term

N_VIDEOS = 40
LEXICON = BrandLexicon(names=["Nike"])
TEXT_KEY = candidate_key(Modality.TEXT, "title", "brand", Outcome.LOG_VIEWS)
MUSIC_KEY = candidate_key(Modality.AUDIO, "audio", "Music", Outcome.LOG_VIEWS)
PERSONS_KEY = candidate_key(Modality.IMAGE, "thumbnail", "Persons", Outcome.LOG_VIEWS)


def term(estimate, p_value, name="x"):
    return make_term(name, estimate, 0.1, estimate / 0.1, p_value)


# ============================================================================
# Synthetic holdout exports
# ============================================================================

def world_records():
    """Brand mentions vary within influencer: videos 0-3 branded, 4-7 not, ..."""
    start = datetime(2021, 1, 1, 10)
    records = []
    for i in range(N_VIDEOS):
        branded = (i // 4) % 2 == 0
        records.append(make_record(
            f"v{i:02d}",
            influencer_id=f"inf{i % 4}",
            uploaded=(start + timedelta(days=i)).isoformat(),
            title="nike shoes review" if branded else "plain shoes review",
        ))
    return records


def holdout_world(seed=0):
    """
    Planted effects on log_views:
      text   brand token attention x2, title prediction +0.8, combined +0.5
      audio  music moment attention +0.5 (log), audio prediction +0.3 per music moment
      image  gradient +0.01 per size %, thumbnail prediction +0.05 per size %
    """
    rng = np.random.default_rng(seed)
    records = world_records()
    ids = [r.video_id for r in records]
    branded = np.array([(i // 4) % 2 == 0 for i in range(N_VIDEOS)], dtype=float)
    music = np.arange(N_VIDEOS) % 5
    thumb_size = rng.uniform(5.0, 40.0, N_VIDEOS)
    frame_size = rng.uniform(5.0, 40.0, N_VIDEOS)

    text_rows, moment_rows, item_rows = [], [], []
    for i, vid in enumerate(ids):
        base = dict(video_id=vid, field="title", outcome="log_views")
        text_rows.append(dict(base, position=0, piece="[CLS]", brand=False, brand_name="", weight=0.1,
                              split="holdout"))
        for position, word in enumerate(records[i].title.split(), start=1):
            brand = word == "nike"
            weight = 0.2 * np.exp((0.7 if brand else 0.0) + 0.05 * rng.standard_normal())
            text_rows.append(dict(base, position=position, piece=word, brand=brand,
                                  brand_name="Nike" if brand else "", weight=weight, split="holdout"))
        text_rows.append(dict(base, position=1, piece="play", brand=False, brand_name="", weight=0.0,
                              split="train"))

        for moment in range(4):
            row = {ci_column(c.value): 0 for c in SoundCategory}
            row[ci_column("Music")] = int(moment < music[i])
            row[ci_column("Human")] = moment % 2
            weight = 0.25 * np.exp(0.5 * row[ci_column("Music")] + 0.05 * rng.standard_normal())
            moment_rows.append(dict(video_id=vid, outcome="log_views", moment=moment, weight=weight,
                                    split="holdout", **row))

        for data_type, sizes in (("thumbnail", thumb_size), ("avg5", frame_size)):
            item_rows.append(dict(video_id=vid, outcome="log_views", data_type=data_type, category="Persons",
                                  mean_gradient=0.01 * sizes[i] + 0.01 * rng.standard_normal(),
                                  size_pct=sizes[i], split="holdout"))

    def noisy(values):
        return values + 0.05 * rng.standard_normal(N_VIDEOS)

    sources = {
        ("log_views", "title"): noisy(1.0 + 0.8 * branded),
        ("log_views", "combined"): noisy(2.0 + 0.5 * branded),
        ("log_views", "audio"): noisy(1.0 + 0.3 * music),
        ("log_views", "thumbnail"): noisy(1.0 + 0.05 * thumb_size),
        ("log_views", "frames"): noisy(1.0 + 0.05 * frame_size),
        ("log_engagement", "combined"): noisy(1.0 + 0.6 * branded * music),
    }
    prediction_rows = [
        dict(video_id=vid, outcome=outcome, source=source, prediction=float(values[i]), split="holdout")
        for (outcome, source), values in sources.items() for i, vid in enumerate(ids)
    ]

    moments = pd.DataFrame(moment_rows)
    items = pd.DataFrame(item_rows)
    exports = Exports(
        predictions=pd.DataFrame(prediction_rows),
        text_attention=pd.DataFrame(text_rows),
        moment_attention=moments,
        item_stats=items,
    )
    covariates = video_covariates(records, LEXICON, moments, items)
    return exports, covariates


# ============================================================================
# Test: Verdicts
# ============================================================================

def test_text_and_audio_verdicts():
    strong, weak = 0.001, 0.07
    assert_equal(verdict_for(Modality.TEXT, term(0.3, strong), term(0.5, strong), term(0.4, strong)),
                 Verdict.PASS_POSITIVE)
    assert_equal(verdict_for(Modality.TEXT, term(-0.3, strong), term(0.5, strong), term(0.4, strong)),
                 Verdict.FILTERED_STEP1)
    assert_equal(verdict_for(Modality.AUDIO, term(0.3, weak), term(0.5, strong), term(0.4, strong)),
                 Verdict.FILTERED_STEP1)
    assert_equal(verdict_for(Modality.AUDIO, term(0.3, strong), term(0.5, 0.4), term(0.4, strong)),
                 Verdict.FILTERED_STEP2)
    assert_equal(verdict_for(Modality.TEXT, term(0.3, strong), term(0.5, strong), term(-0.4, strong)),
                 Verdict.FILTERED_EQ8)
    assert_equal(verdict_for(Modality.TEXT, term(0.3, strong), term(-0.5, strong), term(-0.4, strong)),
                 Verdict.PASS_POSITIVE)
    assert_equal(verdict_for(Modality.TEXT, None, None, None), Verdict.FILTERED_STEP1)


def test_image_verdicts_need_same_direction():
    strong = 0.001
    assert_equal(verdict_for(Modality.IMAGE, term(-0.3, strong), term(-0.5, strong), term(-0.4, strong)),
                 Verdict.PASS_SAME_DIRECTION)
    assert_equal(verdict_for(Modality.IMAGE, term(0.3, strong), term(-0.5, strong), term(-0.4, strong)),
                 Verdict.FILTERED_STEP2)
    assert_equal(verdict_for(Modality.IMAGE, term(0.3, strong), term(0.5, strong), term(0.4, 0.3)),
                 Verdict.FILTERED_EQ8)


def test_hypotheses_ordered_and_counted():
    strong = 0.001
    views = candidate_key(Modality.TEXT, "title", "brand", Outcome.LOG_VIEWS)
    sentiment = candidate_key(Modality.AUDIO, "audio", "Music", Outcome.SENTIMENT)
    engagement = candidate_key(Modality.IMAGE, "avg5", "Persons", Outcome.LOG_ENGAGEMENT)
    step1 = {views: term(0.3, strong), sentiment: term(0.2, 0.5), engagement: term(0.1, strong)}
    step2 = {views: term(0.4, strong), sentiment: term(0.2, strong), engagement: term(0.1, strong)}
    eq8 = {views: term(0.4, strong), sentiment: None, engagement: term(-0.1, strong)}
    hypotheses = build_hypotheses(step1, step2, eq8, slice_name="middle", adjust=False)
    assert_equal([r.key for r in hypotheses.records], [views, sentiment, engagement])
    assert_equal(hypotheses.counts["pass_positive"], 1)
    assert_equal(hypotheses.counts["filtered_step1"], 1)
    assert_equal(hypotheses.counts["filtered_eq8"], 1)
    assert_equal(sum(hypotheses.counts.values()), 3)
    assert_equal(hypotheses.slice, "middle")
    assert_equal(step2_survivors(hypotheses), 2)
    assert_equal([r.key for r in hypotheses.survivors], [views])


def test_misaligned_step_keys():
    key = candidate_key(Modality.TEXT, "title", "brand", Outcome.LOG_VIEWS)
    other = candidate_key(Modality.TEXT, "captions_30s", "brand", Outcome.LOG_VIEWS)
    error = assert_raises(KeyMismatchError, build_hypotheses, {key: None}, {key: None}, {other: None})
    assert_in("captions_30s", str(error))
    assert_raises(DataError, parse_key, "text|title|brand")
    assert_raises(ValueError, HypothesisSet, records=[], counts={"pass_positive": 1})


def test_hypothesis_cell_format():
    """Text cells show percent changes; image cells show the raw gradient slope"""
    text = RelationshipRecord(
        modality=Modality.TEXT, element="brand", outcome=Outcome.LOG_VIEWS, data_type="title",
        step1=term(np.log(1.2514), 0.001), eq8=term(np.log(1.6463), 0.001), verdict=Verdict.PASS_POSITIVE,
    )
    assert_equal(format_cell(text), "A: 25.14% O: 64.63%")
    image = RelationshipRecord(
        modality=Modality.IMAGE, element="Persons", outcome=Outcome.LOG_VIEWS, data_type="thumbnail",
        step1=term(0.0123, 0.001), verdict=Verdict.FILTERED_EQ8,
    )
    assert_equal(format_cell(image), "A: 0.01% O: n/a")


# ============================================================================
# Test: Recovery on a synthetic holdout
# ============================================================================

def test_video_covariates_columns():
    _, covariates = holdout_world()
    assert_equal(len(covariates), N_VIDEOS)
    assert_equal(covariates.loc["v04", duration_column("Music")], 4)
    assert_equal(covariates.loc["v00", duration_column("Human")], 2)
    assert_equal(covariates.loc["v03", duration_column("Human:Music")], 1)
    assert_equal(covariates.loc["v00", BRAND_ANY], 1.0)
    assert_equal(covariates.loc["v04", BRAND_ANY], 0.0)
    assert_equal(covariates.loc["v00", size_column("thumbnail", ItemCategory.ANIMAL.value)], 0.0)


def test_text_brand_effect_recovered():
    exports, covariates = holdout_world()
    step1 = text_step1(exports.text_attention, covariates, [Outcome.LOG_VIEWS])
    bit = step1.terms[TEXT_KEY]
    assert_close(bit.estimate, 0.7, tol=0.05)
    assert_true(bit.significant)
    assert_equal(step1.terms[candidate_key(Modality.TEXT, "description_160", "brand", Outcome.LOG_VIEWS)], None)
    step2 = text_step2(exports.predictions, covariates, [Outcome.LOG_VIEWS])
    assert_close(step2.terms[TEXT_KEY].estimate, 0.8, tol=0.05)


def test_full_interpretation():
    """The planted text effect passes; audio and image effects clear both steps"""
    exports, covariates = holdout_world()
    report = interpret(exports, covariates, [Outcome.LOG_VIEWS])
    records = {r.key: r for r in report.hypotheses.records}
    assert_equal(records[TEXT_KEY].verdict, Verdict.PASS_POSITIVE)
    assert_close(records[TEXT_KEY].eq8.estimate, 0.5, tol=0.05)

    music = records[MUSIC_KEY]
    assert_true(music.step1.significant and music.step1.estimate > 0)
    assert_true(music.step2.significant)
    assert_close(music.step2.estimate, 0.3, tol=0.05)

    persons = records[PERSONS_KEY]
    assert_true(persons.step1.significant and persons.step1.estimate > 0)
    assert_close(persons.step2.estimate, 0.05, tol=0.01)
    animal = records[candidate_key(Modality.IMAGE, "thumbnail", "Animal", Outcome.LOG_VIEWS)]
    assert_equal(animal.verdict, Verdict.FILTERED_STEP1)

    assert_equal(sum(report.hypotheses.counts.values()), len(report.hypotheses.records))
    assert_true(report.step2_variants, "appendix variants should be fitted")
    assert_equal(report.cross_modal, None)


def test_cross_modal_interaction():
    exports, covariates = holdout_world()
    fit = cross_modal_interactions(exports.predictions, covariates, outcome=Outcome.LOG_ENGAGEMENT)
    music = fit.term(f"{BRAND_ANY}:{duration_column('Music')}")
    assert_close(music.estimate, 0.6, tol=0.05)
    assert_true(music.significant)


def test_brand_heterogeneity():
    exports, covariates = holdout_world()
    table = brand_heterogeneity(exports.text_attention, exports.predictions, covariates,
                                TextField.TITLE, Outcome.LOG_VIEWS)
    assert_equal(list(table["brand"]), ["Nike"])
    row = table.iloc[0]
    assert_equal(row["quadrant"], "A+/O+")
    assert_equal(int(row["tokens"]), 20)
    assert_equal(int(row["videos"]), 20)
    assert_equal(quadrant(0.2, -0.1), "A+/O-")
    assert_equal(quadrant(-0.2, 0.0), "A-/O+")


def test_slice_outcomes_drop_views():
    outcomes = [Outcome.LOG_VIEWS, Outcome.SENTIMENT]
    assert_equal(slice_outcomes(SliceWhich.BEGINNING, outcomes), outcomes)
    assert_equal(slice_outcomes(SliceWhich.END, outcomes), [Outcome.SENTIMENT])
    assert_equal(slice_outcomes(SliceWhich.MIDDLE, outcomes, include_views=True), outcomes)


# ============================================================================
# Test: Learning patterns
# ============================================================================

def learning_frame(seed=0):
    """Two micro and two mega influencers with 12 uploads each; one tiny extra category"""
    rng = np.random.default_rng(seed)
    records, element = [], []
    start = datetime(2021, 1, 1)
    for k in range(4):
        micro = k < 2
        for j in range(12):
            records.append(make_record(
                f"i{k}_{j:02d}", influencer_id=f"inf{k}", category_id="c1",
                subscriber_count=50_000 if micro else 2_000_000,
                uploaded=(start + timedelta(days=j)).isoformat(),
                day_of_week=0, time_of_day_bucket=0,
            ))
            element.append((0.5 * j if micro else 1.0) + 0.05 * rng.standard_normal())
    for j in range(4):
        records.append(make_record(f"small_{j}", influencer_id="inf9", category_id="c2", subscriber_count=1000,
                                   uploaded=(start + timedelta(days=j)).isoformat(),
                                   day_of_week=0, time_of_day_bucket=0))
        element.append(0.0)
    frame = structured_frame(records)
    frame["element"] = element
    return frame


def test_influencer_groups():
    assert_equal(influencer_group(50_000), "micro")
    assert_equal(influencer_group(2_000_000), "mega")
    assert_equal(influencer_group(500_000), None)


def test_learning_patterns():
    contrasts, fraction = learning_patterns(learning_frame(), ["element"])
    by_key = {(c.category_id, c.group): c for c in contrasts}
    micro = by_key[("c1", "micro")]
    assert_true(micro.significant_in_both)
    assert_close(micro.half1.estimate, 0.5, tol=0.02)
    assert_close(micro.half2.estimate, 0.5, tol=0.02)
    assert_true(fraction >= 0.5)
    small = by_key[("c2", "micro")]
    assert_equal(small.half1, None)
    assert_true(small.skipped and "< 10" in small.skipped[0])
    assert_false(small.significant_in_both)
    assert_raises(DataError, learning_patterns, learning_frame(), ["missing_column"])


# ============================================================================
# Main Test Runner
# ============================================================================

def main():
    """Run all interpretation tests"""
    tests = [
        ("Text and audio verdicts", test_text_and_audio_verdicts),
        ("Image verdicts need the same direction", test_image_verdicts_need_same_direction),
        ("Hypotheses ordered and counted", test_hypotheses_ordered_and_counted),
        ("Misaligned step keys", test_misaligned_step_keys),
        ("Hypothesis cell format", test_hypothesis_cell_format),
        ("Video covariate columns", test_video_covariates_columns),
        ("Text brand effect recovered", test_text_brand_effect_recovered),
        ("Full interpretation", test_full_interpretation),
        ("Cross-modal interaction", test_cross_modal_interaction),
        ("Brand heterogeneity", test_brand_heterogeneity),
        ("Slice outcomes drop views", test_slice_outcomes_drop_views),
        ("Influencer groups", test_influencer_groups),
        ("Learning patterns", test_learning_patterns),
    ]
    return run_tests("Interpretation Tests", tests)


if __name__ == "__main__":
    sys.exit(main())
