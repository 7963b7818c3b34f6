#!/usr/bin/env python3
"""
Test: Pipeline Engine and CLI
Purpose: Verify stage state transitions, dependency checks, the run log and exit codes

Tests:
- Valid and invalid stage state transitions
- Out-of-order commands name the command to run first
- A failing handler leaves the stage FAILED and may be re-run
- Run log sequence numbers are monotone
- Run configuration layering: defaults, JSON file, flags
- CLI exit codes 0 (ok), 1 (usage) and 2 (pipeline error)
"""

import json
import os
import subprocess
import sys

from fixtures import (
    run_tests, TempRunDir, tiny_plant_spec, tiny_run_config,
    assert_equal, assert_true, assert_false, assert_raises, assert_in
)

import main as cli
from app.config import build_run_config
from app.core import STAGE_HANDLERS, PipelineEngine, upstream_stages
from app.errors import InvalidStageTransitionError, MissingArtifactError, SpecError
from app.models.schemas import Outcome, RunEventType, SliceWhich, Stage, StageState

import app.core.stages  # noqa: F401


# ============================================================================
# Test: State machine
# ============================================================================

def test_valid_transitions():
    with TempRunDir() as out:
        engine = PipelineEngine(out)
        assert_equal(engine.load_state()[Stage.TRAIN], StageState.PENDING)
        engine.transition_to(Stage.TRAIN, StageState.RUNNING)
        engine.transition_to(Stage.TRAIN, StageState.COMPLETED)
        engine.transition_to(Stage.TRAIN, StageState.RUNNING, "re-run")
        engine.transition_to(Stage.TRAIN, StageState.FAILED, "boom")
        assert_equal(PipelineEngine(out).load_state()[Stage.TRAIN], StageState.FAILED)
        assert_true(engine.can_transition(Stage.TRAIN, StageState.RUNNING))


def test_invalid_transitions():
    with TempRunDir() as out:
        engine = PipelineEngine(out)
        assert_raises(InvalidStageTransitionError, engine.transition_to, Stage.FUSE, StageState.COMPLETED)
        assert_false(engine.can_transition(Stage.FUSE, StageState.FAILED))
        engine.transition_to(Stage.FUSE, StageState.RUNNING)
        assert_raises(InvalidStageTransitionError, engine.transition_to, Stage.FUSE, StageState.RUNNING)
        assert_equal(engine.load_state()[Stage.FUSE], StageState.RUNNING)


def test_run_log_sequence():
    with TempRunDir() as out:
        engine = PipelineEngine(out)
        engine.transition_to(Stage.SYNTH, StageState.RUNNING)
        engine.transition_to(Stage.SYNTH, StageState.COMPLETED)
        engine.transition_to(Stage.TRAIN, StageState.RUNNING)
        events = engine.events()
        assert_equal([e["sequence"] for e in events], [1, 2, 3])
        assert_equal([e["event_type"] for e in events], [
            RunEventType.STAGE_STARTED.value, RunEventType.STAGE_COMPLETED.value, RunEventType.STAGE_STARTED.value,
        ])
        assert_equal(events[1]["payload"]["from_state"], "RUNNING")


# ============================================================================
# Test: Dependencies
# ============================================================================

def test_upstream_order():
    assert_equal(upstream_stages(Stage.INTERPRET), [Stage.TRAIN, Stage.PREDICT, Stage.FUSE])
    assert_equal(upstream_stages(Stage.SYNTH), [])
    assert_equal(upstream_stages(Stage.SCORE), [Stage.TRAIN, Stage.PREDICT, Stage.FUSE])


def test_missing_artifacts_name_first_command():
    with TempRunDir() as out:
        engine = PipelineEngine(out)
        config = tiny_run_config(out)
        error = assert_raises(MissingArtifactError, engine.run, Stage.INTERPRET, config)
        assert_equal(error.stage, "interpret")
        assert_equal(error.producer, "train")
        assert_in("run `train` first", str(error))
        assert_equal(engine.load_state()[Stage.INTERPRET], StageState.PENDING)
        assert_equal(engine.events(), [])


def test_failed_stage_can_rerun():
    original = STAGE_HANDLERS[Stage.SYNTH]
    calls = []

    def flaky(config):
        calls.append(config.seed)
        if len(calls) == 1:
            raise SpecError("first attempt fails")
        return original(config)

    STAGE_HANDLERS[Stage.SYNTH] = flaky
    try:
        with TempRunDir() as out:
            engine = PipelineEngine(out)
            config = tiny_run_config(out, plant=tiny_plant_spec(corpus_size=5))
            assert_raises(SpecError, engine.run, Stage.SYNTH, config)
            assert_equal(engine.load_state()[Stage.SYNTH], StageState.FAILED)
            written = engine.run(Stage.SYNTH, config)
            assert_equal(engine.load_state()[Stage.SYNTH], StageState.COMPLETED)
            assert_equal(len(written), 3)
            kinds = [e["event_type"] for e in engine.events()]
            assert_equal(kinds.count(RunEventType.ARTIFACT_WRITTEN.value), 3)
            assert_equal(kinds[:2], [RunEventType.STAGE_STARTED.value, RunEventType.STAGE_FAILED.value])
    finally:
        STAGE_HANDLERS[Stage.SYNTH] = original


# ============================================================================
# Test: Run configuration
# ============================================================================

def test_run_config_layers():
    with TempRunDir() as out:
        path = os.path.join(out, "run.json")
        with open(path, "w", encoding="utf-8") as handle:
            json.dump({"seed": 11, "slice": "end", "train": {"batch_size": 3}}, handle)
        config = build_run_config(path, seed=None, out=out, outcomes=["sentiment_binary"])
        assert_equal(config.seed, 11)
        assert_equal(config.slice, SliceWhich.END)
        assert_equal(config.outcomes, [Outcome.SENTIMENT])
        assert_equal(config.train.batch_size, 3)
        assert_equal(config.train.seed, 11)
        assert_equal(build_run_config(path, seed=5).train.seed, 5)


def test_run_config_errors():
    with TempRunDir() as out:
        assert_raises(SpecError, build_run_config, os.path.join(out, "missing.json"))
        bad = os.path.join(out, "bad.json")
        with open(bad, "w", encoding="utf-8") as handle:
            handle.write("{not json")
        assert_raises(SpecError, build_run_config, bad)
        assert_raises(SpecError, build_run_config, dataset=os.path.join(out, "nothing.jsonl"))
        assert_raises(SpecError, build_run_config, slice="sideways")


# ============================================================================
# Test: CLI
# ============================================================================

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def test_fresh_interpreter_imports():
    for code in ("import app", "import app.core.stages", "import app.text.tokenizer", "import app.ingest.brands"):
        result = subprocess.run([sys.executable, "-c", code], cwd=REPO_ROOT, capture_output=True, text=True)
        assert_equal(result.returncode, 0, f"{code}: {result.stderr.strip()[-300:]}")
    result = subprocess.run([sys.executable, "main.py", "--help"], cwd=REPO_ROOT, capture_output=True, text=True)
    assert_equal(result.returncode, 0, result.stderr.strip()[-300:])
    assert_in("synth", result.stdout)


def test_cli_usage_errors():
    for argv in ([], ["bogus"], ["train", "--slice", "sideways"]):
        error = assert_raises(SystemExit, cli.main, argv)
        assert_equal(error.code, cli.EXIT_USAGE, str(argv))


def test_cli_pipeline_error():
    with TempRunDir() as out:
        assert_equal(cli.main(["interpret", "--out", out]), cli.EXIT_PIPELINE)
        assert_equal(cli.main(["train", "--out", out, "--dataset", os.path.join(out, "none.jsonl")]),
                     cli.EXIT_PIPELINE)


def test_cli_synth():
    with TempRunDir() as out:
        config_path = os.path.join(out, "plant.json")
        with open(config_path, "w", encoding="utf-8") as handle:
            json.dump({"plant": tiny_plant_spec(corpus_size=5).model_dump(mode="json")}, handle)
        code = cli.main(["synth", "--out", out, "--seed", "3", "--config", config_path])
        assert_equal(code, cli.EXIT_OK)
        with open(os.path.join(out, "ground_truth.json"), encoding="utf-8") as handle:
            assert_equal(json.load(handle)["seed"], 3)
        assert_equal(PipelineEngine(out).load_state()[Stage.SYNTH], StageState.COMPLETED)


# ============================================================================
# Main Test Runner
# ============================================================================

def main():
    """Run all pipeline engine tests"""
    tests = [
        ("Valid transitions", test_valid_transitions),
        ("Invalid transitions", test_invalid_transitions),
        ("Run log sequence", test_run_log_sequence),
        ("Upstream order", test_upstream_order),
        ("Missing artifacts name the first command", test_missing_artifacts_name_first_command),
        ("Failed stage can re-run", test_failed_stage_can_rerun),
        ("Run configuration layers", test_run_config_layers),
        ("Run configuration errors", test_run_config_errors),
        ("Fresh interpreter imports", test_fresh_interpreter_imports),
        ("CLI usage errors", test_cli_usage_errors),
        ("CLI pipeline error", test_cli_pipeline_error),
        ("CLI synth", test_cli_synth),
    ]
    return run_tests("Pipeline Engine Tests", tests)


if __name__ == "__main__":
    sys.exit(main())
