#!/usr/bin/env python3
"""
Test: Image Model
Purpose: Verify the backbone, frame combiners, gradient maps and item statistics

Tests:
- Backbone geometry and input validation
- All four combination architectures; set-pooling ones ignore frame order
- Signed gradient maps and half-pixel bilinear upsampling
- Per-category box statistics and the five-frame average
"""

import os
import sys

import numpy as np

from fixtures import (
    run_tests, tiny_image_config, TempRunDir, TINY_HEIGHT, TINY_WIDTH,
    assert_equal, assert_true, assert_close, assert_raises, assert_in, assert_not_in
)

from app.core.image_runs import frames_source
from app.errors import DataError, ShapeError
from app.image.backbone import ImageBackbone
from app.image.frames import FrameSet, ImageFrame, fill_frames, read_frame, write_frame
from app.image.gradmap import grad_activation_map, signed_map, upsample_bilinear
from app.image.heads import FrameCombinerModel, ThumbnailModel
from app.image.items import AVG_FRAMES, box_size_pct, frame_item_stats, item_statistics
from app.models.schemas import CombinerArch, ItemBoxRecord, ItemCategory, OutcomeKind
from app.nn.gradcheck import grad_check
from app.nn.params import ParamStore
from app.nn.tensor import Tensor


def images(n, seed=0):
    return np.random.default_rng(seed).random((n, TINY_HEIGHT, TINY_WIDTH, 3))


def frame_batch(n, m, seed=0):
    return np.random.default_rng(seed).random((n, m, TINY_HEIGHT, TINY_WIDTH, 3))


def box(tag, category, x0, y0, x1, y1):
    return ItemBoxRecord(frame_tag=tag, category=category, x0=x0, y0=y0, x1=x1, y1=y1)


# ============================================================================
# Test: Backbone and heads
# ============================================================================

def test_backbone_geometry():
    """18x32 input: stride-2 stem and block give a 5x8 map"""
    backbone = ImageBackbone(ParamStore(seed=1), tiny_image_config())
    out = backbone.forward(images(2))
    assert_equal(out.features.shape, (2, 5, 8, 4))
    assert_equal(out.pooled.shape, (2, 4))
    assert_equal(len(out.gates), 2)
    single = backbone.forward(images(1)[0])
    assert_equal(single.pooled.shape, (1, 4))


def test_backbone_rejects_wrong_resolution():
    backbone = ImageBackbone(ParamStore(seed=1), tiny_image_config())
    assert_raises(ShapeError, backbone.forward, np.zeros((1, 20, 32, 3)))


def test_thumbnail_outputs():
    """Continuous heads give one value per image; the binary head a probability"""
    continuous = ThumbnailModel(tiny_image_config(), OutcomeKind.CONTINUOUS, seed=2)
    assert_equal(continuous.predict(images(3)).shape, (3,))
    binary = ThumbnailModel(tiny_image_config(), OutcomeKind.BINARY, seed=2)
    probs = binary.predict(images(3))
    assert_true(np.all((probs > 0) & (probs < 1)))


def test_every_combiner_architecture():
    for arch in CombinerArch:
        config = tiny_image_config().model_copy(update={"arch": arch})
        model = FrameCombinerModel(config, OutcomeKind.CONTINUOUS, num_frames=3, seed=3)
        assert_equal(model.predict(frame_batch(2, 3)).shape, (2,), f"{arch.value} output shape")


def test_set_pooling_ignores_frame_order():
    """Max-GAP and GAP-Max are invariant to frame permutation; C-GAP is not"""
    frames = frame_batch(2, 3, seed=4)
    shuffled = frames[:, [2, 0, 1]]
    for arch in (CombinerArch.MAX_GAP, CombinerArch.GAP_MAX):
        config = tiny_image_config().model_copy(update={"arch": arch})
        model = FrameCombinerModel(config, OutcomeKind.CONTINUOUS, num_frames=3, seed=5)
        assert_close(model.predict(frames), model.predict(shuffled), tol=1e-10)
    config = tiny_image_config().model_copy(update={"arch": CombinerArch.C_GAP})
    model = FrameCombinerModel(config, OutcomeKind.CONTINUOUS, num_frames=3, seed=5)
    assert_true(not np.allclose(model.predict(frames), model.predict(shuffled)))


def test_frame_count_errors():
    """Combiners need at least two frames and the configured count"""
    assert_raises(DataError, FrameCombinerModel, tiny_image_config(), OutcomeKind.CONTINUOUS, num_frames=1)
    model = FrameCombinerModel(tiny_image_config(), OutcomeKind.CONTINUOUS, num_frames=5)
    assert_raises(DataError, model.predict, frame_batch(1, 3))
    assert_raises(DataError, model.predict, frame_batch(1, 1))


def test_combiner_gradients():
    """BiLSTM combiner parameters match finite differences"""
    model = FrameCombinerModel(tiny_image_config(), OutcomeKind.CONTINUOUS, num_frames=2, seed=6)
    frames = frame_batch(2, 2, seed=7)
    error = grad_check(lambda s: (model.forward(frames) ** 2).sum(), model.store, max_entries=2)
    assert_true(error < 1e-6, f"combiner gradient error {error}")


def test_frames_source_names():
    assert_equal(frames_source(5), "frames")
    assert_equal(frames_source(2), "frames_2")


# ============================================================================
# Test: Frame IO
# ============================================================================

def test_frame_file_round_trip():
    """Pixels survive a PPM round trip to within one intensity level"""
    pixels = images(1, seed=8)[0]
    with TempRunDir() as out:
        path = os.path.join(out, "frame.ppm")
        write_frame(path, pixels)
        frame = read_frame(path, TINY_HEIGHT, TINY_WIDTH, tag="7.5s", t=7.5)
        assert_raises(ShapeError, read_frame, path, TINY_HEIGHT + 1, TINY_WIDTH)
        assert_raises(DataError, read_frame, os.path.join(out, "missing.ppm"), TINY_HEIGHT, TINY_WIDTH)
    assert_close(frame.pixels, pixels, tol=0.5 / 255.0 + 1e-12)
    assert_equal(frame.resolution, (TINY_HEIGHT, TINY_WIDTH))
    assert_equal(frame.tag, "7.5s")


def test_fill_frames_repeats_last():
    a, b = np.zeros((2, 2, 3)), np.ones((2, 2, 3))
    filled = fill_frames([a, b], 5)
    assert_equal(filled.shape, (5, 2, 2, 3))
    assert_close(filled[4], b)
    assert_close(filled[0], a)
    assert_raises(DataError, fill_frames, [], 5)


def test_frame_set_order():
    """Timestamps must increase strictly"""
    pixels = np.zeros((2, 2, 3))
    ok = FrameSet(frames=[ImageFrame(pixels=pixels, tag="0s", t=0.0), ImageFrame(pixels=pixels, tag="7.5s", t=7.5)])
    assert_equal(ok.stacked().shape, (2, 2, 2, 3))
    assert_raises(ValueError, FrameSet,
                  frames=[ImageFrame(pixels=pixels, t=7.5), ImageFrame(pixels=pixels, t=7.5)])


# ============================================================================
# Test: Gradient maps
# ============================================================================

def test_signed_map_of_linear_target():
    """For a linear target the map is the activation weighted by spatially averaged weights"""
    rng = np.random.default_rng(9)
    features = Tensor(rng.standard_normal((2, 3, 4, 2)), requires_grad=True)
    coef = rng.standard_normal((3, 4, 2))
    target = (features * Tensor(coef)).sum(axis=(1, 2, 3))
    result = signed_map(features, target)
    expected = np.einsum("nhwc,c->nhw", features.data, coef.mean(axis=(0, 1)))
    assert_close(result, expected, tol=1e-12)


def test_bilinear_upsampling():
    """Half-pixel alignment: [0, 1] over width 4 becomes [0, .25, .75, 1]"""
    up = upsample_bilinear(np.array([[[0.0, 1.0]]]), 1, 4)
    assert_close(up, [[[0.0, 0.25, 0.75, 1.0]]], tol=1e-12)
    constant = upsample_bilinear(np.full((1, 2, 3), 2.5), 5, 7)
    assert_close(constant, np.full((1, 5, 7), 2.5), tol=1e-12)


def test_grad_activation_map_shapes():
    """Maps are signed and at frame resolution; frame models add a frame axis"""
    thumb = ThumbnailModel(tiny_image_config(), OutcomeKind.CONTINUOUS, seed=10)
    maps = grad_activation_map(thumb, images(2, seed=11))
    assert_equal(maps.shape, (2, TINY_HEIGHT, TINY_WIDTH))
    assert_true(np.all(np.isfinite(maps)))
    combiner = FrameCombinerModel(tiny_image_config(), OutcomeKind.BINARY, num_frames=2, seed=10)
    frame_maps = grad_activation_map(combiner, frame_batch(1, 2, seed=12))
    assert_equal(frame_maps.shape, (1, 2, TINY_HEIGHT, TINY_WIDTH))
    assert_true(all(p.grad is None or not np.any(p.grad) for _, p in combiner.store.items()))


# ============================================================================
# Test: Item statistics
# ============================================================================

def test_frame_item_stats_use_box_union():
    """Overlapping boxes of one category are averaged over their union"""
    grad_map = np.arange(16, dtype=np.float64).reshape(4, 4)
    boxes = [
        box("thumbnail", ItemCategory.PERSONS, 0, 0, 2, 2),
        box("thumbnail", ItemCategory.PERSONS, 1, 0, 3, 1),
        box("thumbnail", ItemCategory.ANIMAL, 3, 3, 4, 4),
    ]
    stats = frame_item_stats(grad_map, boxes)
    union = [0.0, 1.0, 2.0, 4.0, 5.0]
    assert_close(stats[ItemCategory.PERSONS].mean_gradient, np.mean(union))
    assert_close(stats[ItemCategory.PERSONS].size_pct, 100.0 * 6 / 16)
    assert_close(stats[ItemCategory.ANIMAL].mean_gradient, 15.0)
    assert_not_in(ItemCategory.BRAND_LOGOS, stats)


def test_box_outside_image_rejected():
    assert_raises(DataError, frame_item_stats, np.zeros((4, 4)), [box("0s", ItemCategory.PERSONS, 0, 0, 5, 2)])
    assert_raises(ValueError, box, "0s", ItemCategory.PERSONS, 2, 0, 2, 2)
    assert_close(box_size_pct(box("0s", ItemCategory.PERSONS, 0, 0, 2, 2), 4, 4), 25.0)


def test_degenerate_boxes_rejected():
    """Boxes built without validation are still checked before use"""
    grad_map = np.ones((4, 4))
    for x0, y0, x1, y1 in [(-1, 0, 2, 2), (0, -1, 2, 2), (2, 0, 2, 2), (0, 3, 2, 1)]:
        bad = ItemBoxRecord.model_construct(frame_tag="0s", category=ItemCategory.PERSONS,
                                            x0=x0, y0=y0, x1=x1, y1=y1)
        error = assert_raises(DataError, frame_item_stats, grad_map, [bad])
        assert_in("box", str(error))
    assert_raises(ValueError, box, "0s", ItemCategory.PERSONS, -1, 0, 2, 2)


def test_tiled_box_gives_same_statistics():
    """Splitting a box into non-overlapping tiles changes neither mean nor size"""
    rng = np.random.default_rng(5)
    maps = {"thumbnail": rng.normal(size=(6, 8)), "0s": rng.normal(size=(6, 8))}
    whole = [box(tag, ItemCategory.PERSONS, 1, 1, 7, 5) for tag in maps]
    tiles = [
        box(tag, ItemCategory.PERSONS, x0, y0, x1, y1)
        for tag in maps
        for x0, y0, x1, y1 in [(1, 1, 4, 3), (4, 1, 7, 3), (1, 3, 4, 5), (4, 3, 7, 5)]
    ]
    expected = item_statistics(maps, whole)
    actual = item_statistics(maps, tiles)
    for tag in ("thumbnail", "0s", AVG_FRAMES):
        assert_close(actual[tag][ItemCategory.PERSONS].mean_gradient,
                     expected[tag][ItemCategory.PERSONS].mean_gradient, tol=1e-12)
        assert_close(actual[tag][ItemCategory.PERSONS].size_pct,
                     expected[tag][ItemCategory.PERSONS].size_pct, tol=1e-9)


def test_average_over_frames_where_present():
    """avg5 averages only the timestamped frames showing the category"""
    maps = {
        "thumbnail": np.full((4, 4), 9.0),
        "0s": np.full((4, 4), 1.0),
        "7.5s": np.full((4, 4), 3.0),
        "15s": np.full((4, 4), 5.0),
    }
    boxes = [
        box("thumbnail", ItemCategory.PERSONS, 0, 0, 4, 4),
        box("0s", ItemCategory.PERSONS, 0, 0, 2, 2),
        box("7.5s", ItemCategory.PERSONS, 0, 0, 4, 2),
        box("15s", ItemCategory.ANIMAL, 0, 0, 1, 1),
    ]
    stats = item_statistics(maps, boxes)
    assert_in(AVG_FRAMES, stats)
    averaged = stats[AVG_FRAMES]
    assert_close(averaged[ItemCategory.PERSONS].mean_gradient, 2.0)
    assert_close(averaged[ItemCategory.PERSONS].size_pct, (25.0 + 50.0) / 2)
    assert_close(averaged[ItemCategory.ANIMAL].mean_gradient, 5.0)
    assert_close(stats["thumbnail"][ItemCategory.PERSONS].mean_gradient, 9.0)


def test_thumbnail_only_has_no_average():
    stats = item_statistics({"thumbnail": np.zeros((2, 2))}, [])
    assert_not_in(AVG_FRAMES, stats)
    assert_equal(stats["thumbnail"], {})


# ============================================================================
# Main Test Runner
# ============================================================================

def main():
    """Run all image model tests"""
    tests = [
        ("Backbone geometry", test_backbone_geometry),
        ("Backbone rejects wrong resolution", test_backbone_rejects_wrong_resolution),
        ("Thumbnail outputs", test_thumbnail_outputs),
        ("Every combiner architecture", test_every_combiner_architecture),
        ("Set pooling ignores frame order", test_set_pooling_ignores_frame_order),
        ("Frame count errors", test_frame_count_errors),
        ("Combiner gradients", test_combiner_gradients),
        ("Frames source names", test_frames_source_names),
        ("Frame file round trip", test_frame_file_round_trip),
        ("fill_frames repeats the last frame", test_fill_frames_repeats_last),
        ("FrameSet order", test_frame_set_order),
        ("Signed map of a linear target", test_signed_map_of_linear_target),
        ("Bilinear upsampling", test_bilinear_upsampling),
        ("Gradient map shapes", test_grad_activation_map_shapes),
        ("Item stats use the box union", test_frame_item_stats_use_box_union),
        ("Box outside image rejected", test_box_outside_image_rejected),
        ("Degenerate boxes rejected", test_degenerate_boxes_rejected),
        ("Tiled box gives same statistics", test_tiled_box_gives_same_statistics),
        ("Average over frames where present", test_average_over_frames_where_present),
        ("Thumbnail only has no average", test_thumbnail_only_has_no_average),
    ]
    return run_tests("Image Model Tests", tests)


if __name__ == "__main__":
    sys.exit(main())
