#!/usr/bin/env python3
"""
Planted-effect recovery over many seeds.

Runs synth through interpret once per seed, then reports how often each
planted relationship got its expected verdict and how often candidates
without a planted effect passed.

    python scripts/acceptance_sweep.py --seeds 20 --out runs/sweep
    python scripts/acceptance_sweep.py --seeds 3 --corpus-size 200 --out runs/quick
"""

import argparse
import json
import os
import sys
from typing import List, Optional, Tuple

import pandas as pd
import structlog

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.adapters.exporters import read_csv, write_csv  # noqa: E402
from app.config import build_run_config  # noqa: E402
from app.core import PipelineEngine  # noqa: E402
from app.errors import PipelineError  # noqa: E402
from app.models.schemas import Modality, Outcome, PlantEffect, PlantSpec, PlantTarget, SliceWhich, Stage  # noqa: E402
from main import configure_logging  # noqa: E402

import app.core.stages  # noqa: E402,F401

logger = structlog.get_logger()

SWEEP_STAGES = [Stage.SYNTH, Stage.TRAIN, Stage.PREDICT, Stage.FUSE, Stage.INTERPRET]
RECOVERY_TARGET = 0.8
NULL_PASS_LIMIT = 0.1


def default_effects() -> List[PlantEffect]:
    """One attention+outcome effect per modality and one confound-only effect"""
    return [
        PlantEffect(modality=Modality.TEXT, element="captions_30s:brand", target=PlantTarget.BOTH,
                    outcome=Outcome.LOG_VIEWS, magnitude=1.0),
        PlantEffect(modality=Modality.AUDIO, element="Music", target=PlantTarget.BOTH,
                    outcome=Outcome.LOG_ENGAGEMENT, magnitude=1.0),
        PlantEffect(modality=Modality.IMAGE, element="Persons", target=PlantTarget.BOTH,
                    outcome=Outcome.LOG_POPULARITY, magnitude=1.0),
        PlantEffect(modality=Modality.AUDIO, element="Human", target=PlantTarget.OUTCOME_CONFOUND_ONLY,
                    outcome=Outcome.LOG_VIEWS, magnitude=1.0),
    ]


def load_plant(path: Optional[str], corpus_size: int) -> PlantSpec:
    if path:
        with open(path, "r", encoding="utf-8") as handle:
            spec = PlantSpec.model_validate(json.load(handle))
        return spec.model_copy(update={"corpus_size": corpus_size})
    return PlantSpec(effects=default_effects(), corpus_size=corpus_size)


def run_seed(seed: int, plant: PlantSpec, out: str, which: SliceWhich) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Candidates of one seed with their verdicts and planted-effect matches"""
    config = build_run_config(seed=seed, out=out, slice=which.value, plant=plant.model_dump(mode="json"))
    engine = PipelineEngine(out)
    for stage in SWEEP_STAGES:
        engine.run(stage, config)

    folder = os.path.join(out, "interpret", which.value)
    hypotheses = read_csv(os.path.join(folder, "hypotheses.csv"))
    recovery = read_csv(os.path.join(folder, "recovery.csv"))
    planted = set(recovery["key"].dropna())
    candidates = hypotheses[["key", "verdict", "passed"]].copy()
    candidates["planted"] = candidates["key"].isin(planted)
    candidates["seed"] = seed
    recovery["seed"] = seed
    return candidates, recovery


def summarize(candidates: pd.DataFrame, recovery: pd.DataFrame, seeds: int) -> pd.DataFrame:
    rows = []
    for (effect, outcome, expected), block in recovery.groupby(["effect", "outcome", "expected"], sort=False):
        rate = block.groupby("seed")["recovered"].any().sum() / seeds
        rows.append({"kind": "planted", "name": f"{effect}|{outcome}", "expected": expected,
                     "rate": rate, "target": RECOVERY_TARGET, "ok": rate >= RECOVERY_TARGET})
    null = candidates[~candidates["planted"]]
    for key, block in null.groupby("key", sort=True):
        rate = block["passed"].astype(bool).mean()
        rows.append({"kind": "null", "name": key, "expected": "filtered", "rate": rate,
                     "target": NULL_PASS_LIMIT, "ok": rate <= NULL_PASS_LIMIT})
    return pd.DataFrame(rows, columns=["kind", "name", "expected", "rate", "target", "ok"])


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Planted-effect recovery sweep")
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--first-seed", type=int, default=1)
    parser.add_argument("--corpus-size", type=int, default=1620)
    parser.add_argument("--plant", help="JSON PlantSpec; defaults to one effect per modality")
    parser.add_argument("--slice", choices=[s.value for s in SliceWhich], default=SliceWhich.BEGINNING.value)
    parser.add_argument("--out", default="runs/sweep")
    args = parser.parse_args(argv)

    configure_logging()
    plant = load_plant(args.plant, args.corpus_size)
    which = SliceWhich(args.slice)
    plant = plant.model_copy(update={"slices": list(dict.fromkeys([*plant.slices, which]))})

    candidates, recovery = [], []
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        out = os.path.join(args.out, f"seed_{seed:03d}")
        try:
            seed_candidates, seed_recovery = run_seed(seed, plant, out, which)
        except PipelineError as e:
            logger.error("sweep_seed_failed", seed=seed, error=str(e))
            return 2
        candidates.append(seed_candidates)
        recovery.append(seed_recovery)
        logger.info("sweep_seed_done", seed=seed, candidates=len(seed_candidates),
                    recovered=int(seed_recovery["recovered"].sum()))

    summary = summarize(pd.concat(candidates, ignore_index=True), pd.concat(recovery, ignore_index=True),
                        args.seeds)
    path = write_csv(summary, os.path.join(args.out, "sweep_summary.csv"))
    print(summary.to_string(index=False))
    logger.info("sweep_completed", seeds=args.seeds, summary=path, failing=int((~summary["ok"]).sum()))
    return 0 if summary["ok"].all() else 1


if __name__ == "__main__":
    sys.exit(main())
