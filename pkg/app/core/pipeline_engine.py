"""
Pipeline engine with stage state machine management.
Checks upstream artifacts, runs stage handlers and keeps an event log.
"""

import json
import os
from datetime import datetime
from typing import Callable, Dict, List, Optional

import structlog

from app.errors import InvalidStageTransitionError, MissingArtifactError
from app.models.schemas import STAGE_DEPENDENCIES, STATE_TRANSITIONS, RunConfig, RunEventType, Stage, StageState

logger = structlog.get_logger()

STATE_FILE = "pipeline_state.json"
RUN_LOG = "run_log.jsonl"

# Stage handler registry - stages.py registers one handler per command
StageHandler = Callable[[RunConfig], List[str]]
STAGE_HANDLERS: Dict[Stage, StageHandler] = {}
STAGE_ARTIFACTS: Dict[Stage, List[str]] = {}


def register_stage_handler(stage: Stage, handler: StageHandler, artifacts: List[str]):
    """
    Register a handler and the artifacts it must leave behind.

    Artifact paths are relative to the output directory and may contain
    `{slice}`.
    """
    STAGE_HANDLERS[stage] = handler
    STAGE_ARTIFACTS[stage] = list(artifacts)


def upstream_stages(stage: Stage) -> List[Stage]:
    """Transitive dependencies in pipeline order"""
    seen = set()
    pending = list(STAGE_DEPENDENCIES[stage])
    while pending:
        current = pending.pop()
        if current not in seen:
            seen.add(current)
            pending.extend(STAGE_DEPENDENCIES[current])
    order = list(Stage)
    return sorted(seen, key=order.index)


class PipelineEngine:
    """
    Manages stage state and transitions for one output directory.
    State lives in pipeline_state.json; every transition is appended to
    run_log.jsonl with a monotone sequence number.
    """

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.state_path = os.path.join(out_dir, STATE_FILE)
        self.log_path = os.path.join(out_dir, RUN_LOG)

    # ------------------------------------------------------------------
    # State
    # ------------------------------------------------------------------

    def load_state(self) -> Dict[Stage, StageState]:
        state = {stage: StageState.PENDING for stage in Stage}
        if os.path.exists(self.state_path):
            with open(self.state_path, "r", encoding="utf-8") as handle:
                stored = json.load(handle)
            state.update({Stage(k): StageState(v) for k, v in stored.items()})
        return state

    def _save_state(self, state: Dict[Stage, StageState]):
        tmp = self.state_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as handle:
            json.dump({k.value: v.value for k, v in state.items()}, handle, indent=2, sort_keys=True)
        os.replace(tmp, self.state_path)

    def can_transition(self, stage: Stage, new_state: StageState) -> bool:
        current = self.load_state()[stage]
        return new_state in STATE_TRANSITIONS.get(current, [])

    def transition_to(self, stage: Stage, new_state: StageState, reason: Optional[str] = None) -> StageState:
        state = self.load_state()
        current = state[stage]
        if new_state not in STATE_TRANSITIONS.get(current, []):
            raise InvalidStageTransitionError(
                f"Invalid transition of {stage.value} from {current.value} to {new_state.value}"
            )
        state[stage] = new_state
        self._save_state(state)

        event = {
            StageState.RUNNING: RunEventType.STAGE_STARTED,
            StageState.COMPLETED: RunEventType.STAGE_COMPLETED,
            StageState.FAILED: RunEventType.STAGE_FAILED,
        }[new_state]
        self._record_event(event, stage, {
            "from_state": current.value,
            "to_state": new_state.value,
            "reason": reason or "State transition",
        })
        logger.info("stage_state_changed", stage=stage.value, from_state=current.value,
                    to_state=new_state.value, reason=reason)
        return new_state

    # ------------------------------------------------------------------
    # Event log
    # ------------------------------------------------------------------

    def events(self) -> List[dict]:
        if not os.path.exists(self.log_path):
            return []
        with open(self.log_path, "r", encoding="utf-8") as handle:
            return [json.loads(line) for line in handle if line.strip()]

    def _record_event(self, event_type: RunEventType, stage: Stage, payload: dict):
        """Append an event with the next sequence number"""
        events = self.events()
        sequence = max((e["sequence"] for e in events), default=0) + 1
        entry = {
            "sequence": sequence,
            "event_type": event_type.value,
            "stage": stage.value,
            "payload": payload,
            "occurred_at": datetime.now().isoformat(),
        }
        with open(self.log_path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(entry, sort_keys=True) + "\n")

    # ------------------------------------------------------------------
    # Execution
    # ------------------------------------------------------------------

    def artifact_paths(self, stage: Stage, config: RunConfig) -> List[str]:
        return [
            os.path.join(self.out_dir, template.format(slice=config.slice.value))
            for template in STAGE_ARTIFACTS.get(stage, [])
        ]

    def check_dependencies(self, stage: Stage, config: RunConfig):
        """
        Raises:
            MissingArtifactError: naming the earliest upstream command whose
                artifacts are absent
        """
        for upstream in upstream_stages(stage):
            for path in self.artifact_paths(upstream, config):
                if not os.path.exists(path):
                    raise MissingArtifactError(stage.value, os.path.relpath(path, self.out_dir), upstream.value)

    def run(self, stage: Stage, config: RunConfig) -> List[str]:
        """Run one stage; returns the artifacts it wrote"""
        if stage not in STAGE_HANDLERS:
            raise InvalidStageTransitionError(f"No handler registered for stage {stage.value}")
        self.check_dependencies(stage, config)
        self.transition_to(stage, StageState.RUNNING, f"Running {stage.value}")

        try:
            written = STAGE_HANDLERS[stage](config)
            missing = [p for p in self.artifact_paths(stage, config) if not os.path.exists(p)]
            if missing:
                raise MissingArtifactError(stage.value, os.path.relpath(missing[0], self.out_dir), stage.value)
        except Exception as e:
            logger.error("stage_failed", stage=stage.value, error=str(e), exc_info=True)
            self.transition_to(stage, StageState.FAILED, str(e))
            raise

        for path in written:
            self._record_event(RunEventType.ARTIFACT_WRITTEN, stage, {"path": os.path.relpath(path, self.out_dir)})
        self.transition_to(stage, StageState.COMPLETED, f"{len(written)} artifacts written")
        return written
