#!/usr/bin/env python3
"""
Test: Audio Model
Purpose: Verify the audio front end, sound categories and the attention sequence model

Tests:
- Exact clip geometry: 480,000 samples -> 2998 x 64 frames -> 60 moments
- Downmix, resampling, windows and zero padding
- Category indicators and multi-hot labels
- Moment attention is a distribution per video; the no-attention variant is uniform
"""

import sys

import numpy as np

from fixtures import (
    run_tests, tiny_audio_config,
    assert_equal, assert_true, assert_false, assert_close, assert_raises
)

from app.audio.categories import CLASS_NAMES, category_indicators, classes_in
from app.audio.classifier import MomentClassifier, SoundClassProbs, class_labels_from_names
from app.audio.frontend import (
    LOG_FLOOR,
    AudioClip,
    band_energies,
    clip_to_patches,
    ingest_audio,
    mel_center_frequencies,
    mel_spectrogram,
    patchify,
)
from app.audio.sequence import AttentionSequenceModel
from app.core.audio_runs import moment_indicators, variant_source
from app.errors import DataError
from app.interpretation.common import ci_column
from app.models.schemas import OutcomeKind, SliceWhich, SoundCategory
from app.nn.gradcheck import grad_check


def tone(frequency, seconds, rate, amplitude=0.5):
    t = np.arange(int(seconds * rate)) / rate
    return amplitude * np.sin(2 * np.pi * frequency * t)


# ============================================================================
# Test: Front end
# ============================================================================

def test_clip_geometry_is_exact():
    """30 s at 16 kHz gives 480,000 samples, 2998 frames and 60 moments"""
    clip = ingest_audio(tone(440.0, 30.0, 16000), 16000)
    assert_equal(len(clip.samples), 480_000)
    assert_false(clip.padded)
    spec = mel_spectrogram(clip)
    assert_equal(spec.shape, (2998, 64))
    patches = patchify(spec)
    assert_equal(patches.patches.shape, (60, 96, 64))
    assert_equal(int(patches.starts[1]), 49)
    assert_equal(band_energies(patches).shape, (60, 64))


def test_short_clip_is_zero_padded():
    """A 12 s source is padded to 30 s and flagged"""
    clip = ingest_audio(tone(440.0, 12.0, 8000), 8000)
    assert_equal(len(clip.samples), 480_000)
    assert_true(clip.padded)
    assert_close(clip.samples[-1000:], np.zeros(1000), tol=0.0)


def test_stereo_downmix_and_resample():
    """Stereo at 8 kHz becomes mono at 16 kHz"""
    left = tone(300.0, 30.0, 8000)
    stereo = np.stack([left, -left], axis=1)
    clip = ingest_audio(stereo, 8000)
    assert_equal(clip.sample_rate, 16000)
    assert_close(clip.samples, np.zeros(480_000), tol=1e-12)


def test_middle_and_end_windows():
    """A 60 s source: middle starts at 15 s, end at 30 s"""
    samples = tone(440.0, 60.0, 8000)
    assert_close(ingest_audio(samples, 8000, which=SliceWhich.MIDDLE).window_start, 15.0)
    assert_close(ingest_audio(samples, 8000, which=SliceWhich.END).window_start, 30.0)
    assert_close(ingest_audio(samples, 8000).window_start, 0.0)


def test_invalid_audio_rejected():
    assert_raises(DataError, ingest_audio, np.zeros(0), 16000)
    assert_raises(DataError, ingest_audio, np.zeros(100), 0)


def test_silence_hits_log_floor():
    """An all-zero clip maps every mel value to log(floor)"""
    clip = AudioClip(samples=np.zeros(480_000))
    spec = mel_spectrogram(clip)
    assert_close(spec.values, np.full(spec.shape, np.log(LOG_FLOOR)), tol=1e-12)


def test_tone_peaks_in_matching_band():
    """A 1 kHz tone puts its peak energy in the band centred nearest 1 kHz"""
    patches = clip_to_patches(tone(1000.0, 30.0, 16000), 16000)
    energies = band_energies(patches).mean(axis=0)
    centres = mel_center_frequencies()
    nearest = int(np.argmin(np.abs(centres - 1000.0)))
    assert_true(abs(int(np.argmax(energies)) - nearest) <= 1,
                f"peak band {int(np.argmax(energies))}, expected near {nearest}")


# ============================================================================
# Test: Categories and classifier
# ============================================================================

def test_category_indicators_use_threshold():
    """A category is present when any of its classes exceeds 0.5"""
    probs = np.zeros((3, len(CLASS_NAMES)))
    music = classes_in(SoundCategory.MUSIC)
    probs[0, music[0]] = 0.9
    probs[1, music[1]] = 0.5
    probs[2, classes_in(SoundCategory.HUMAN)[0]] = 0.7
    indicators = category_indicators(probs)
    assert_equal(list(indicators[SoundCategory.MUSIC]), [1, 0, 0])
    assert_equal(list(indicators[SoundCategory.HUMAN]), [0, 0, 1])
    assert_equal(SoundClassProbs(probs).indicator_matrix().shape, (3, 8))


def test_multi_hot_labels():
    labels = class_labels_from_names([["speech", "guitar"], [], ["unknown"]], CLASS_NAMES)
    assert_equal(labels.shape, (3, 16))
    assert_equal(float(labels[0].sum()), 2.0)
    assert_equal(float(labels[1:].sum()), 0.0)


def test_classifier_output_shape():
    """Patches (N, 96, 64) give probabilities (N, K)"""
    classifier = MomentClassifier(tiny_audio_config(), seed=1)
    patches = np.random.default_rng(0).standard_normal((3, 96, 64))
    probs = classifier.classify_moments(patches).probs
    assert_equal(probs.shape, (3, 16))
    assert_true(np.all((probs > 0) & (probs < 1)))


def test_moment_indicator_table():
    """Per-moment CI columns for every video"""
    probs = np.zeros((2, 4, 16))
    probs[1, 2, CLASS_NAMES.index("dog")] = 0.8
    features = {"video_ids": np.array(["v1", "v2"]), "probs": probs}
    table = moment_indicators(features)
    assert_equal(len(table), 8)
    row = table[(table["video_id"] == "v2") & (table["moment"] == 2)].iloc[0]
    assert_equal(int(row[ci_column("Animal")]), 1)
    assert_equal(int(table[ci_column("Animal")].sum()), 1)


# ============================================================================
# Test: Sequence model
# ============================================================================

def test_moment_attention_is_distribution():
    """Each video's attention over moments is positive and sums to one"""
    model = AttentionSequenceModel(5, tiny_audio_config(), OutcomeKind.CONTINUOUS, seed=2)
    x = np.random.default_rng(1).standard_normal((3, 7, 5))
    values, weights = model.predict(x)
    assert_equal(values.shape, (3,))
    assert_equal(weights.shape, (3, 7))
    assert_close(weights.sum(axis=1), np.ones(3), tol=1e-12)
    assert_true(np.all(weights > 0))


def test_no_attention_variant_is_uniform():
    config = tiny_audio_config().model_copy(update={"variant": "no_attention"})
    model = AttentionSequenceModel(5, config, OutcomeKind.BINARY, seed=2)
    values, weights = model.predict(np.random.default_rng(1).standard_normal((2, 4, 5)))
    assert_close(weights, np.full((2, 4), 0.25), tol=1e-12)
    assert_true(np.all((values > 0) & (values < 1)))


def test_sequence_model_gradients():
    model = AttentionSequenceModel(3, tiny_audio_config(), OutcomeKind.CONTINUOUS, seed=4)
    x = np.random.default_rng(2).standard_normal((2, 4, 3))
    error = grad_check(lambda s: (model.forward(x)[0] ** 2).sum(), model.store, max_entries=4)
    assert_true(error < 1e-6, f"sequence model gradient error {error}")


def test_variant_source_names():
    assert_equal(variant_source("full"), "audio")
    assert_equal(variant_source("no_classifier"), "audio_no_classifier")


# ============================================================================
# Main Test Runner
# ============================================================================

def main():
    """Run all audio model tests"""
    tests = [
        ("Clip geometry is exact", test_clip_geometry_is_exact),
        ("Short clip is zero-padded", test_short_clip_is_zero_padded),
        ("Stereo downmix and resample", test_stereo_downmix_and_resample),
        ("Middle and end windows", test_middle_and_end_windows),
        ("Invalid audio rejected", test_invalid_audio_rejected),
        ("Silence hits the log floor", test_silence_hits_log_floor),
        ("Tone peaks in the matching band", test_tone_peaks_in_matching_band),
        ("Category indicators use the threshold", test_category_indicators_use_threshold),
        ("Multi-hot labels", test_multi_hot_labels),
        ("Classifier output shape", test_classifier_output_shape),
        ("Moment indicator table", test_moment_indicator_table),
        ("Moment attention is a distribution", test_moment_attention_is_distribution),
        ("No-attention variant is uniform", test_no_attention_variant_is_uniform),
        ("Sequence model gradients", test_sequence_model_gradients),
        ("Variant source names", test_variant_source_names),
    ]
    return run_tests("Audio Model Tests", tests)


if __name__ == "__main__":
    sys.exit(main())
