#!/usr/bin/env python3
"""
Test: Synthetic Corpus
Purpose: Verify planted-effect validation, determinism and ground truth

Tests:
- Unknown or contradictory planted effects raise SpecError
- Same spec and seed give byte-identical files, with or without threads
- Ground-truth mentions point at the brand in the written text
- Count inversion reproduces the latent outcomes
- Recovery table matches planted effects to verdicts
"""

import math
import os
import sys

import numpy as np

from fixtures import (
    run_tests, TempRunDir, tiny_plant_spec, plant_effect, read_bytes, make_record,
    assert_equal, assert_true, assert_false, assert_close, assert_raises, assert_in
)

from app.errors import SpecError
from app.ingest.outcomes import compute_outcomes
from app.ingest.records import load_manifest
from app.interpretation.common import candidate_key
from app.models.results import HypothesisSet, RelationshipRecord, Verdict
from app.models.schemas import Modality, Outcome, SliceWhich, TextField
from app.synth.generator import (
    BRAND_NAMES,
    check_effects,
    comment_scores,
    counts_from_latent,
    element_key,
    expected_verdict,
    generate,
    load_truth,
    truth_moment_classes,
)
from app.synth.media import MOMENTS_PER_CLIP
from app.synth.recovery import recovery_table


# ============================================================================
# Test: Effect validation
# ============================================================================

def test_element_keys():
    assert_equal(element_key(plant_effect("text", "captions_30s:brand", "both")), "text|captions_30s:brand")
    assert_equal(element_key(plant_effect("audio", "Music", "attention")), "audio|Music")
    assert_equal(element_key(plant_effect("image", "Persons", "outcome")), "image|Persons")
    assert_raises(SpecError, element_key, plant_effect("text", "title", "both"))
    assert_raises(SpecError, element_key, plant_effect("audio", "Bass", "both"))
    assert_raises(SpecError, element_key, plant_effect("image", "Cars", "both"))


def test_contradictory_effects():
    opposite = [plant_effect("audio", "Music", "both", magnitude=1.0),
                plant_effect("audio", "Music", "both", magnitude=-1.0)]
    assert_raises(SpecError, check_effects, opposite)
    mixed = [plant_effect("image", "Persons", "both"),
             plant_effect("image", "Persons", "outcome_confound_only", outcome=Outcome.SENTIMENT)]
    error = assert_raises(SpecError, check_effects, mixed)
    assert_in("image|Persons", str(error))
    check_effects([plant_effect("audio", "Music", "both", magnitude=0.5),
                   plant_effect("audio", "Music", "both", magnitude=2.0)])


def test_generate_rejects_bad_spec():
    spec = tiny_plant_spec(corpus_size=5, effects=[plant_effect("audio", "Bass", "both")])
    with TempRunDir() as out:
        assert_raises(SpecError, generate, spec, out)
        assert_false(os.path.exists(os.path.join(out, "manifest.jsonl")))


def test_expected_verdicts():
    assert_equal(expected_verdict(plant_effect("audio", "Music", "both")), "pass")
    assert_equal(expected_verdict(plant_effect("audio", "Music", "outcome_confound_only")), "filtered_step1")
    assert_equal(expected_verdict(plant_effect("audio", "Music", "attention")), None)


# ============================================================================
# Test: Generation
# ============================================================================

EFFECTS = [
    plant_effect("text", "title:brand", "both", magnitude=1.5),
    plant_effect("audio", "Music", "outcome_confound_only", outcome=Outcome.LOG_ENGAGEMENT),
]


def test_byte_identical_generation():
    spec = tiny_plant_spec(corpus_size=8, effects=EFFECTS)
    with TempRunDir() as first, TempRunDir() as second:
        generate(spec, first, threads=1)
        generate(spec, second, threads=3)
        for name in ("manifest.jsonl", "ground_truth.json", "brands.txt",
                     os.path.join("media", "v00003", "audio.wav"),
                     os.path.join("media", "v00003", "thumbnail.ppm")):
            assert_equal(read_bytes(os.path.join(first, name)), read_bytes(os.path.join(second, name)), name)


def test_different_seeds_differ():
    with TempRunDir() as first, TempRunDir() as second:
        generate(tiny_plant_spec(corpus_size=6, seed=1), first, threads=1)
        generate(tiny_plant_spec(corpus_size=6, seed=2), second, threads=1)
        assert_true(read_bytes(os.path.join(first, "manifest.jsonl"))
                    != read_bytes(os.path.join(second, "manifest.jsonl")))


def test_generated_corpus_contents():
    spec = tiny_plant_spec(corpus_size=12, effects=EFFECTS)
    with TempRunDir() as out:
        corpus = generate(spec, out, threads=1)
        records = load_manifest(corpus.manifest_path)
        truth = load_truth(corpus.truth_path)
        with open(corpus.lexicon_path, encoding="utf-8") as handle:
            lexicon = handle.read().split()

        assert_equal(corpus.videos, 12)
        assert_equal(len(records), 12)
        assert_equal(lexicon, BRAND_NAMES)
        assert_true(all(os.path.exists(r.media.audio_path) for r in records))
        assert_true(all(30.0 <= r.duration_seconds <= 40.0 for r in records))
        assert_equal(len({r.influencer_id for r in records}), 4)

        effects = truth["effects"]
        assert_equal([e["element_key"] for e in effects], ["text|title:brand", "audio|Music"])
        assert_equal([e["expected_verdict"] for e in effects], ["pass", "filtered_step1"])
        first = truth["videos"][records[0].video_id]
        assert_in("audio|Music", first["hidden"])
        assert_equal(len(truth_moment_classes(truth, records[0].video_id, SliceWhich.BEGINNING)), MOMENTS_PER_CLIP)
        assert_equal(truth_moment_classes(truth, "missing", SliceWhich.BEGINNING), [])


def test_mentions_point_at_brand():
    spec = tiny_plant_spec(corpus_size=15).model_copy(update={"brand_rate": 1.0})
    with TempRunDir() as out:
        corpus = generate(spec, out, threads=1)
        records = {r.video_id: r for r in load_manifest(corpus.manifest_path)}
        truth = load_truth(corpus.truth_path)
    mentions = 0
    for video_id, video in truth["videos"].items():
        for mention in video["mentions"]:
            text = records[video_id].text(TextField(mention["field"]))
            assert_true(text[mention["char_start"]:].startswith(mention["brand"]),
                        f"{video_id} {mention['field']}")
            assert_in(mention["half"], ("first", "second"))
            mentions += 1
    assert_equal(mentions, 15 * len(TextField))


# ============================================================================
# Test: Outcome inversion
# ============================================================================

def test_counts_invert_latent_outcomes():
    latent = {
        Outcome.LOG_VIEWS: math.log(1000.0),
        Outcome.LOG_ENGAGEMENT: math.log(0.02),
        Outcome.LOG_POPULARITY: math.log(0.05),
        Outcome.LOG_LIKEABILITY: math.log(30.0),
    }
    counts = counts_from_latent(latent)
    assert_equal(counts, {"views": 1000, "comments": 19, "likes": 49, "dislikes": 1})
    outcomes = compute_outcomes(make_record(**counts), threshold=0.0)
    assert_close(outcomes.log_engagement, math.log(0.02), tol=1e-12)
    assert_close(outcomes.log_popularity, math.log(0.05), tol=1e-12)


def test_comment_scores_follow_sentiment():
    rng = np.random.default_rng(0)
    low = comment_scores(-4.0, rng)
    high = comment_scores(4.0, rng)
    assert_equal(len(low), 10)
    assert_true(all(-1.0 <= s <= 1.0 for s in low + high))
    assert_true(np.mean(high) > np.mean(low))


# ============================================================================
# Test: Recovery
# ============================================================================

def test_recovery_table():
    truth = {"effects": [
        {"modality": "text", "element": "title:brand", "outcome": "log_views", "target": "both",
         "element_key": "text|title:brand", "expected_verdict": "pass"},
        {"modality": "audio", "element": "Music", "outcome": "log_views", "target": "outcome_confound_only",
         "element_key": "audio|Music", "expected_verdict": "filtered_step1"},
        {"modality": "image", "element": "Animal", "outcome": "log_views", "target": "both",
         "element_key": "image|Animal", "expected_verdict": "pass"},
        {"modality": "audio", "element": "Silence", "outcome": "log_views", "target": "attention",
         "element_key": "audio|Silence", "expected_verdict": None},
    ]}
    records = [
        RelationshipRecord(modality=Modality.TEXT, element="brand", outcome=Outcome.LOG_VIEWS,
                           data_type="title", verdict=Verdict.PASS_POSITIVE),
        RelationshipRecord(modality=Modality.AUDIO, element="Music", outcome=Outcome.LOG_VIEWS,
                           data_type="audio", verdict=Verdict.FILTERED_EQ8),
    ]
    table = recovery_table(truth, HypothesisSet(records=records))
    assert_equal(list(table["effect"]), ["text|title:brand", "audio|Music", "image|Animal"])
    assert_equal(list(table["recovered"]), [True, False, False])
    assert_equal(table.iloc[0]["key"], candidate_key(Modality.TEXT, "title", "brand", Outcome.LOG_VIEWS))
    assert_equal(table.iloc[2]["key"], "")


# ============================================================================
# Main Test Runner
# ============================================================================

def main():
    """Run all synthetic corpus tests"""
    tests = [
        ("Element keys", test_element_keys),
        ("Contradictory effects", test_contradictory_effects),
        ("Generate rejects a bad spec", test_generate_rejects_bad_spec),
        ("Expected verdicts", test_expected_verdicts),
        ("Byte-identical generation", test_byte_identical_generation),
        ("Different seeds differ", test_different_seeds_differ),
        ("Generated corpus contents", test_generated_corpus_contents),
        ("Mentions point at the brand", test_mentions_point_at_brand),
        ("Counts invert latent outcomes", test_counts_invert_latent_outcomes),
        ("Comment scores follow sentiment", test_comment_scores_follow_sentiment),
        ("Recovery table", test_recovery_table),
    ]
    return run_tests("Synthetic Corpus Tests", tests)


if __name__ == "__main__":
    sys.exit(main())
