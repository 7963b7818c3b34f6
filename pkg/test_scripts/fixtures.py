"""
Test fixtures and helper utilities for standalone test scripts.
Provides output helpers, assertion helpers and tiny synthetic factories.
"""

import sys
import os
import shutil
import tempfile
from datetime import datetime

import numpy as np

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.models.schemas import (
    AudioModelConfig,
    EncoderConfig,
    ImageModelConfig,
    Modality,
    Outcome,
    PlantEffect,
    PlantSpec,
    PlantTarget,
    RunConfig,
    SliceWhich,
    TrainConfig,
    VideoRecord,
)
from app.nn.tensor import Tensor


# ============================================================================
# Color codes for terminal output
# ============================================================================

GREEN = '\033[92m'
RED = '\033[91m'
YELLOW = '\033[93m'
BLUE = '\033[94m'
CYAN = '\033[96m'
RESET = '\033[0m'


# ============================================================================
# Test output helpers
# ============================================================================

def print_test_header(test_name):
    """Print formatted test header"""
    print(f"\n{'='*70}")
    print(f"{CYAN}Running: {test_name}{RESET}")
    print(f"{'='*70}\n")


def print_pass(test_name):
    """Print test pass message"""
    print(f"{GREEN}✓ PASS{RESET}: {test_name}")


def print_fail(test_name, error):
    """Print test failure message with error details"""
    print(f"{RED}✗ FAIL{RESET}: {test_name}")
    print(f"{RED}  Error: {error}{RESET}")


def print_info(message):
    """Print informational message"""
    print(f"{BLUE}ℹ {message}{RESET}")


def print_summary(tests_passed, tests_failed):
    """Print test summary"""
    print(f"\n{'='*70}")
    total = tests_passed + tests_failed
    if tests_failed == 0:
        print(f"{GREEN}✓ ALL TESTS PASSED{RESET}: {tests_passed}/{total}")
    else:
        print(f"{RED}✗ SOME TESTS FAILED{RESET}: {tests_passed} passed, {tests_failed} failed")
    print(f"{'='*70}\n")


def run_tests(title, tests):
    """Run (name, func) pairs; returns the process exit code"""
    print_test_header(title)
    tests_passed = 0
    tests_failed = 0
    for test_name, test_func in tests:
        try:
            test_func()
            print_pass(test_name)
            tests_passed += 1
        except Exception as e:
            print_fail(test_name, str(e))
            import traceback
            traceback.print_exc()
            tests_failed += 1
    print_summary(tests_passed, tests_failed)
    return 0 if tests_failed == 0 else 1


# ============================================================================
# Synthetic factories
# ============================================================================

TINY_HEIGHT = 18
TINY_WIDTH = 32


def random_tensor(shape, seed=0, requires_grad=True, scale=1.0):
    """Standard-normal tensor from a fixed seed"""
    rng = np.random.default_rng(seed)
    return Tensor(scale * rng.standard_normal(shape), requires_grad=requires_grad)


def tiny_train_config(max_steps=6, eval_interval=3, batch_size=8, seed=7):
    return TrainConfig(max_steps=max_steps, eval_interval=eval_interval, batch_size=batch_size, seed=seed)


def tiny_encoder_config(max_len=24):
    return EncoderConfig(num_encoders=1, num_heads=2, model_dim=8, key_dim=4, ffn_dim=16,
                         max_len=max_len, dropout_p=0.0)


def tiny_audio_config():
    return AudioModelConfig(num_classes=16, stem_channels=4, block_channels=[4, 8],
                            pre_lstm_units=4, post_lstm_units=6, attention_units=3)


def tiny_image_config(height=TINY_HEIGHT, width=TINY_WIDTH):
    return ImageModelConfig(height=height, width=width, stem_channels=4, block_channels=[4, 4],
                            block_strides=[2, 1], expand_ratio=2, middle_units=4, lstm_units=4)


def plant_effect(modality, element, target, outcome=Outcome.LOG_VIEWS, magnitude=1.0):
    return PlantEffect(modality=Modality(modality), element=element, target=PlantTarget(target),
                       outcome=Outcome(outcome), magnitude=magnitude)


def tiny_plant_spec(corpus_size=30, effects=None, seed=7, slices=None):
    """A small corpus with 30-40 s videos and tiny images"""
    return PlantSpec(
        effects=list(effects or []),
        corpus_size=corpus_size,
        influencer_count=4,
        category_count=2,
        seed=seed,
        audio_rate=8000,
        min_length_s=30.0,
        max_length_s=40.0,
        slices=list(slices or [SliceWhich.BEGINNING]),
        image_height=TINY_HEIGHT,
        image_width=TINY_WIDTH,
    )


def make_record(video_id="v1", influencer_id="inf1", category_id="cat1", views=100, comments=9,
                likes=19, dislikes=4, uploaded="2021-03-03T13:00:00", **fields):
    """VideoRecord with valid defaults; keyword fields override"""
    return VideoRecord(
        video_id=video_id,
        influencer_id=influencer_id,
        category_id=category_id,
        views=views,
        comments=comments,
        likes=likes,
        dislikes=dislikes,
        video_length_min=fields.pop("video_length_min", 0.75),
        upload_timestamp=datetime.fromisoformat(uploaded),
        **fields,
    )


def tiny_run_config(out, outcomes=None, seed=7, plant=None, slice_which=SliceWhich.BEGINNING, max_steps=4):
    """RunConfig with toy model sizes for end-to-end runs"""
    return RunConfig(
        slice=slice_which,
        outcomes=list(outcomes or [Outcome.LOG_VIEWS]),
        seed=seed,
        out=out,
        encoder=tiny_encoder_config(),
        audio=tiny_audio_config(),
        image=tiny_image_config(),
        train=tiny_train_config(max_steps=max_steps, eval_interval=2, seed=seed),
        plant=plant,
    )


# ============================================================================
# Test context managers
# ============================================================================

class TempRunDir:
    """Temporary output directory removed on exit"""

    def __init__(self, prefix="ivtest_"):
        self.prefix = prefix
        self.path = None

    def __enter__(self):
        self.path = tempfile.mkdtemp(prefix=self.prefix)
        return self.path

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.path and os.path.exists(self.path):
            shutil.rmtree(self.path, ignore_errors=True)


def read_bytes(path):
    with open(path, "rb") as handle:
        return handle.read()


# ============================================================================
# Assertion helpers
# ============================================================================

def assert_equal(actual, expected, message=""):
    """Assert two values are equal"""
    if actual != expected:
        raise AssertionError(
            f"{message}\nExpected: {expected}\nActual: {actual}"
        )


def assert_not_equal(actual, expected, message=""):
    """Assert two values are not equal"""
    if actual == expected:
        raise AssertionError(
            f"{message}\nExpected values to be different, but both are: {actual}"
        )


def assert_close(actual, expected, tol=1e-9, message=""):
    """Assert two scalars or arrays agree within an absolute tolerance"""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    if actual.shape != expected.shape:
        raise AssertionError(f"{message}\nShape mismatch: {actual.shape} vs {expected.shape}")
    if not np.allclose(actual, expected, atol=tol, rtol=0.0, equal_nan=True):
        worst = float(np.nanmax(np.abs(actual - expected))) if actual.size else 0.0
        raise AssertionError(f"{message}\nExpected: {expected}\nActual: {actual}\nMax error: {worst}")


def assert_true(condition, message=""):
    """Assert condition is true"""
    if not condition:
        raise AssertionError(f"{message}\nExpected: True\nActual: False")


def assert_false(condition, message=""):
    """Assert condition is false"""
    if condition:
        raise AssertionError(f"{message}\nExpected: False\nActual: True")


def assert_in(item, container, message=""):
    """Assert item is in container"""
    if item not in container:
        raise AssertionError(
            f"{message}\nExpected {item} to be in {container}"
        )


def assert_not_in(item, container, message=""):
    """Assert item is not in container"""
    if item in container:
        raise AssertionError(
            f"{message}\nExpected {item} to not be in {container}"
        )


def assert_raises(exception_type, func, *args, **kwargs):
    """Assert function raises specific exception; returns the exception"""
    try:
        func(*args, **kwargs)
    except exception_type as e:
        return e
    except Exception as e:
        raise AssertionError(
            f"Expected {exception_type.__name__} to be raised, but got {type(e).__name__}: {e}"
        )
    raise AssertionError(
        f"Expected {exception_type.__name__} to be raised, but no exception was raised"
    )


# ============================================================================
# Performance testing helpers
# ============================================================================

class PerformanceTimer:
    """Context manager for timing operations"""

    def __init__(self):
        self.start_time = None
        self.end_time = None
        self.duration_ms = None

    def __enter__(self):
        """Start timer"""
        self.start_time = datetime.now()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        """Stop timer"""
        self.end_time = datetime.now()
        duration = self.end_time - self.start_time
        self.duration_ms = duration.total_seconds() * 1000

    def get_duration_ms(self):
        """Get duration in milliseconds"""
        return self.duration_ms
