#!/usr/bin/env python3
"""
Test: Ingest
Purpose: Verify manifests, outcomes, brand matching, splits and slice windows

Tests:
- Manifest load resolves relative media and rejects bad records
- Outcome transforms and the sentiment cut-off
- Whole-word brand matching, halves and disclosure
- 60/20/20 split sizes and determinism
- Window selection and frame picking at or after each offset
"""

import json
import math
import os
import sys

import numpy as np

from fixtures import (
    run_tests, make_record, TempRunDir,
    assert_equal, assert_true, assert_false, assert_close, assert_raises, assert_in
)

from app.errors import DataError
from app.ingest.brands import BrandLexicon, brand_match, disclosure_check, token_brand_flags
from app.ingest.features import (
    group_of_column,
    structured_frame,
    text_covariates,
    text_length,
    video_numbers,
)
from app.ingest.outcomes import compute_outcomes, outcome_table, sentiment_threshold
from app.ingest.records import load_manifest, save_manifest
from app.ingest.slices import grid_frame_times, pick_frames, select_slice, select_window
from app.ingest.splits import DatasetSplit, split_dataset, split_sizes
from app.models.schemas import FrameRef, MediaRefs, SliceWhich, TextField


# ============================================================================
# Test: Records
# ============================================================================

def test_record_derives_time_fields():
    """Year, weekday and 4-hour bucket come from the upload time"""
    record = make_record(uploaded="2021-03-03T13:00:00", description_160="x" * 200)
    assert_equal(record.year, 2021)
    assert_equal(record.day_of_week, 2)
    assert_equal(record.time_of_day_bucket, 3)
    assert_equal(len(record.description_160), 160)
    assert_close(record.duration_seconds, 45.0)
    assert_raises(ValueError, make_record, comment_sentiments=[0.5, 1.5])


def test_manifest_round_trip_resolves_media():
    records = [
        make_record("v1", media=MediaRefs(audio_path="media/v1.wav", frames=[FrameRef(t=0.0, path="media/v1_0.ppm")])),
        make_record("v2", influencer_id="inf2"),
    ]
    with TempRunDir() as out:
        path = os.path.join(out, "manifest.jsonl")
        assert_equal(save_manifest(records, path), 2)
        loaded = load_manifest(path)
        expected_audio = os.path.join(out, "media", "v1.wav")
    assert_equal([r.video_id for r in loaded], ["v1", "v2"])
    assert_equal(loaded[0].media.audio_path, os.path.normpath(expected_audio))
    assert_true(os.path.isabs(loaded[0].media.frames[0].path))
    assert_equal(loaded[1].media.audio_path, None)


def test_manifest_errors():
    """Missing file, bad JSON, invalid fields and duplicate ids are data errors"""
    with TempRunDir() as out:
        assert_raises(DataError, load_manifest, os.path.join(out, "absent.jsonl"))
        path = os.path.join(out, "manifest.jsonl")
        good = json.dumps(make_record("v1").model_dump(mode="json"))

        with open(path, "w", encoding="utf-8") as handle:
            handle.write(good + "\n{not json\n")
        error = assert_raises(DataError, load_manifest, path)
        assert_in(":2:", str(error))

        with open(path, "w", encoding="utf-8") as handle:
            handle.write(good + "\n" + good + "\n")
        error = assert_raises(DataError, load_manifest, path)
        assert_in("duplicate video_id v1", str(error))

        bad = make_record("v3").model_dump(mode="json")
        bad["views"] = -1
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(json.dumps(bad) + "\n")
        assert_raises(DataError, load_manifest, path)


# ============================================================================
# Test: Outcomes
# ============================================================================

def test_outcome_transforms():
    record = make_record(views=100, comments=9, likes=19, dislikes=4, comment_sentiments=[0.2, 0.4])
    outcomes = compute_outcomes(record, threshold=0.1)
    assert_close(outcomes.log_views, math.log(100))
    assert_close(outcomes.log_engagement, math.log(0.1))
    assert_close(outcomes.log_popularity, math.log(0.2))
    assert_close(outcomes.log_likeability, math.log(4.0))
    assert_equal(outcomes.sentiment_binary, 1)
    assert_close(outcomes.sentiment_score, 0.3)
    assert_equal(compute_outcomes(record, threshold=0.3).sentiment_binary, 0)


def test_sentiment_boundary_is_strict():
    """A mean equal to the threshold up to rounding is not above it"""
    at = make_record(comment_sentiments=[0.1, 0.2])
    assert_equal(compute_outcomes(at, threshold=0.15).sentiment_binary, 0)
    assert_equal(compute_outcomes(at, threshold=0.1499).sentiment_binary, 1)


def test_zero_views_rejected():
    error = assert_raises(DataError, compute_outcomes, make_record(views=0), 0.0)
    assert_in("views", str(error))


def test_sentiment_threshold_is_median():
    """Without an override the cut-off is the median mean score; no comments count as 0"""
    records = [
        make_record("a", comment_sentiments=[0.8]),
        make_record("b", comment_sentiments=[]),
        make_record("c", comment_sentiments=[-0.2, 0.6]),
    ]
    assert_close(sentiment_threshold(records), 0.2)
    assert_close(sentiment_threshold(records, override=0.5), 0.5)
    table = outcome_table(records)
    assert_equal(list(table["sentiment_binary"]), [1, 0, 0])
    assert_equal(table.index.name, "video_id")


# ============================================================================
# Test: Brands
# ============================================================================

def test_brand_match_whole_word_and_halves():
    lexicon = BrandLexicon(names=["Nike", "Adidas"])
    text = "nike shoes and more nike"
    match = brand_match(text, lexicon)
    assert_equal(match.spans, [(0, 4), (20, 24)])
    assert_true(match.bitx and match.first_half and match.second_half)
    assert_false(brand_match("my iphonecase and nikes", lexicon).bitx)
    late = brand_match("new shoes from adidas", lexicon)
    assert_false(late.first_half)
    assert_true(late.second_half)


def test_longest_brand_wins():
    lexicon = BrandLexicon(names=["Air", "Air Max"])
    assert_equal(brand_match("new air max shoes", lexicon).spans, [(4, 11)])


def test_lexicon_rejects_duplicates():
    assert_raises(ValueError, BrandLexicon, names=["Nike", "NIKE"])
    assert_raises(ValueError, BrandLexicon, names=["  "])
    assert_false(brand_match("nike", BrandLexicon()).bitx)


def test_token_flags_overlap_brand_spans():
    flags = token_brand_flags([(0, 3), (4, 8), (8, 10), (5, 5)], [(4, 10)])
    assert_equal(flags, [False, True, True, False])


def test_disclosure_words():
    assert_true(disclosure_check("this video is an #ad"))
    assert_true(disclosure_check("Sponsored by our friends"))
    assert_false(disclosure_check("new adidas drop"))
    assert_false(disclosure_check(""))


def test_text_covariates():
    """BITX, half flags, LOTX and brand names per field, plus disclosure"""
    lexicon = BrandLexicon(names=["Nike", "Adidas"])
    record = make_record(title="Nike shoes", captions_30s="sponsored by ADIDAS today")
    table = text_covariates([record], lexicon)
    row = table.loc["v1"]
    assert_equal(row["BITX_title"], 1.0)
    assert_equal(row["BIFTX_title"], 1.0)
    assert_equal(row["BISTX_title"], 0.0)
    assert_equal(row["LOTX_title"], 2.0)
    assert_equal(row["BITX_description_160"], 0.0)
    assert_equal(row["LOTX_description_160"], 0.0)
    assert_equal(row["BRANDS_captions_30s"], "Adidas")
    assert_equal(row["disclosure"], 1.0)
    assert_equal(text_length("  two\twords "), 2)
    assert_equal(len([c for c in table.columns if c.startswith("BITX_")]), len(TextField))


# ============================================================================
# Test: Structured features
# ============================================================================

def test_structured_frame_and_groups():
    frame = structured_frame([make_record("v1", tag_count=3)])
    assert_equal(frame.loc["v1", "tag_count"], 3.0)
    assert_equal(frame.loc["v1", "day_of_week"], "2")
    assert_equal(group_of_column("tag_count"), "Tags Count")
    assert_equal(group_of_column("influencer_id[inf2]"), "Influencer Fixed Effects")
    assert_equal(group_of_column("day_of_week_3"), "Time based covariates")
    assert_equal(group_of_column("BITX_title"), "BITX_title")


def test_video_numbers_per_influencer():
    """Uploads are numbered from 0 within each influencer by time"""
    records = [
        make_record("a2", influencer_id="a", uploaded="2021-02-01T00:00:00"),
        make_record("b1", influencer_id="b", uploaded="2021-01-15T00:00:00"),
        make_record("a1", influencer_id="a", uploaded="2021-01-01T00:00:00"),
        make_record("a3", influencer_id="a", uploaded="2021-03-01T00:00:00"),
    ]
    numbers = video_numbers(structured_frame(records))
    assert_equal(numbers.to_dict(), {"a2": 1, "b1": 0, "a1": 0, "a3": 2})


# ============================================================================
# Test: Splits
# ============================================================================

def test_split_sizes():
    assert_equal(split_sizes(10), (6, 2, 2))
    assert_equal(split_sizes(7), (5, 1, 1))
    assert_equal(split_sizes(100), (60, 20, 20))
    assert_raises(DataError, split_sizes, 4)


def test_full_corpus_split_sizes():
    records = [make_record(f"v{i:04d}") for i in range(1620)]
    split = split_dataset(records, seed=1)
    assert_equal(split_sizes(1620), (972, 324, 324))
    assert_equal((len(split.train), len(split.validation), len(split.holdout)), (972, 324, 324))
    assert_equal(split, split_dataset(records, seed=1))


def test_split_is_deterministic_partition():
    records = [make_record(f"v{i}") for i in range(12)]
    first = split_dataset(records, seed=3)
    second = split_dataset(records, seed=3)
    assert_equal(first, second)
    ids = first.train + first.validation + first.holdout
    assert_equal(sorted(ids), sorted(r.video_id for r in records))
    assert_equal(len(set(ids)), 12)
    assert_equal(first.tag_of()[first.holdout[0]], "holdout")
    assert_raises(DataError, first.ids, "test")
    with TempRunDir() as out:
        path = os.path.join(out, "split.json")
        first.save(path)
        assert_equal(DatasetSplit.load(path), first)


# ============================================================================
# Test: Slices
# ============================================================================

def test_window_selection():
    assert_equal(select_window(100.0, SliceWhich.BEGINNING), (0.0, 30.0))
    assert_equal(select_window(100.0, SliceWhich.MIDDLE), (35.0, 65.0))
    assert_equal(select_window(100.0, SliceWhich.END), (70.0, 100.0))


def test_short_video_falls_back_to_beginning():
    selection = select_slice(20.0, SliceWhich.END)
    assert_equal(selection.which, SliceWhich.BEGINNING)
    assert_true(selection.short_video)
    assert_equal((selection.start, selection.end), (0.0, 20.0))


def test_frames_at_or_after_offsets():
    """Whole-second frames: 7.5 s takes 8 s; 30 s has no frame within tolerance"""
    frames = [FrameRef(t=float(t), path=f"f{t}.ppm") for t in range(30)]
    picked = pick_frames(frames, start=0.0)
    assert_equal([(tag.value, ref.t) for tag, ref in picked],
                 [("0s", 0.0), ("7.5s", 8.0), ("15s", 15.0), ("22.5s", 23.0)])
    selection = select_slice(60.0, SliceWhich.MIDDLE, frames=frames + [FrameRef(t=float(t), path="x") for t in range(30, 60)])
    assert_equal(selection.frames[0][0], "0s")
    assert_equal(selection.frames[0][1].t, 15.0)
    assert_equal(len(selection.frames), 5)


def test_grid_frame_times_clamp_last_frame():
    """At 2 fps a 30 s video's last frame is 29.5 s, used for the 30 s offset"""
    times = grid_frame_times(0.0, 30.0, 2.0)
    assert_equal([t for _, t in times], [0.0, 7.5, 15.0, 22.5, 29.5])
    assert_true(np.all(np.diff([t for _, t in times]) > 0))


# ============================================================================
# Main Test Runner
# ============================================================================

def main():
    """Run all ingest tests"""
    tests = [
        ("Record derives time fields", test_record_derives_time_fields),
        ("Manifest round trip resolves media", test_manifest_round_trip_resolves_media),
        ("Manifest errors", test_manifest_errors),
        ("Outcome transforms", test_outcome_transforms),
        ("Sentiment boundary is strict", test_sentiment_boundary_is_strict),
        ("Zero views rejected", test_zero_views_rejected),
        ("Sentiment threshold is the median", test_sentiment_threshold_is_median),
        ("Brand match whole-word and halves", test_brand_match_whole_word_and_halves),
        ("Longest brand wins", test_longest_brand_wins),
        ("Lexicon rejects duplicates", test_lexicon_rejects_duplicates),
        ("Token flags overlap brand spans", test_token_flags_overlap_brand_spans),
        ("Disclosure words", test_disclosure_words),
        ("Text covariates", test_text_covariates),
        ("Structured frame and groups", test_structured_frame_and_groups),
        ("Video numbers per influencer", test_video_numbers_per_influencer),
        ("Split sizes", test_split_sizes),
        ("Full corpus split sizes", test_full_corpus_split_sizes),
        ("Split is a deterministic partition", test_split_is_deterministic_partition),
        ("Window selection", test_window_selection),
        ("Short video falls back to beginning", test_short_video_falls_back_to_beginning),
        ("Frames at or after offsets", test_frames_at_or_after_offsets),
        ("Grid frame times clamp the last frame", test_grid_frame_times_clamp_last_frame),
    ]
    return run_tests("Ingest Tests", tests)


if __name__ == "__main__":
    sys.exit(main())
