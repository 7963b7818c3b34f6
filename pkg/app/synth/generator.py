"""
Synthetic corpus generator.

Writes a dataset manifest (JSON lines), the media it references (WAV audio,
PPM frames), a brand lexicon and a ground-truth JSON describing the planted
effects and every planted element occurrence.

Generation runs in three passes so that corpus-level statistics can shape
the outcomes:

1. plan each video (texts, audio segments, scenes, structured fields)
2. draw hidden confounders and latent outcomes from the element values
3. render media and build the records
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timedelta
from typing import Dict, List, Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field

from app.audio.frontend import write_wav
from app.config.settings import settings
from app.errors import SpecError
from app.image.frames import write_frame
from app.image.items import box_size_pct
from app.ingest.records import save_manifest
from app.ingest.slices import grid_frame_times, select_slice
from app.models.schemas import (
    FrameRef,
    FrameTag,
    ItemBoxRecord,
    ItemCategory,
    MediaRefs,
    Modality,
    Outcome,
    PlantEffect,
    PlantSpec,
    PlantTarget,
    SliceWhich,
    SoundCategory,
    TextField,
    VideoRecord,
)
from app.synth.media import (
    AudioSegment,
    ScenePlan,
    moment_category_share,
    moment_classes,
    plan_scene,
    plan_segments,
    render_audio,
    render_scene,
)

logger = structlog.get_logger()

BRAND_NAMES = [
    "Zentrix", "Lumora", "Kavo", "Brisko", "Novatek", "Pellion",
    "Quorra", "Vexa", "Solvio", "Tandor", "Murex", "Glimo",
]
MARKER_WORD = "exclusive"
BRAND_SUFFIX = ":brand"

OPENERS = ["my", "new", "best", "honest", "quick", "daily", "ultimate", "simple"]
TOPICS = [
    "makeup", "routine", "recipe", "workout", "haul", "review", "tutorial", "vlog",
    "unboxing", "challenge", "tips", "travel", "skincare", "gaming", "outfit",
]
FILLER = [
    "today", "we", "try", "the", "this", "with", "and", "for", "you", "really", "love",
    "look", "at", "some", "great", "little", "week", "home", "again", "first", "time",
    "so", "much", "fun", "easy", "check", "out", "guys", "what", "think", "let", "me",
    "know", "here", "is", "how", "i", "do", "it", "our", "friends", "morning", "night",
]

# latent outcome intercepts: views e^10, engagement 2%, popularity 5%, likes:dislikes 30
OUTCOME_BASE = {
    Outcome.LOG_VIEWS: 10.0,
    Outcome.LOG_ENGAGEMENT: float(np.log(0.02)),
    Outcome.LOG_POPULARITY: float(np.log(0.05)),
    Outcome.LOG_LIKEABILITY: float(np.log(30.0)),
    Outcome.SENTIMENT: 0.0,
}

ATTENTION_SHARE = 0.25
CONFOUND_AGREEMENT = 0.85
ITEM_PRESENCE = 0.45
FRAME_VISIBILITY = 0.85
COMMENTS_PER_VIDEO = 10
SCRAPE_DATE = datetime(2021, 6, 1)
FIRST_UPLOAD = datetime(2018, 1, 1)


class GeneratedCorpus(BaseModel):
    """Paths written by one generation run"""

    manifest_path: str
    lexicon_path: str
    truth_path: str
    videos: int


class _VideoPlan(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    index: int
    video_id: str
    influencer: int
    duration: float
    gap_days: float
    hour: int
    words: Dict[str, List[str]]
    brand_at: Dict[str, int] = Field(default_factory=dict)
    brand_name: Dict[str, str] = Field(default_factory=dict)
    segments: List[AudioSegment]
    scenes: Dict[str, ScenePlan]
    structured: Dict[str, float]
    elements: Dict[str, float] = Field(default_factory=dict)


# ============================================================================
# Effects
# ============================================================================


def element_key(effect: PlantEffect) -> str:
    """
    Canonical 'modality|element' key.

    Raises:
        SpecError: the element does not exist for its modality
    """
    if effect.modality is Modality.TEXT:
        field = effect.element[:-len(BRAND_SUFFIX)] if effect.element.endswith(BRAND_SUFFIX) else None
        if field not in {f.value for f in TextField}:
            raise SpecError(f"Text element must be '<field>{BRAND_SUFFIX}', got '{effect.element}'")
    elif effect.modality is Modality.AUDIO:
        if effect.element not in {c.value for c in SoundCategory}:
            raise SpecError(f"Unknown sound category '{effect.element}'")
    elif effect.element not in {c.value for c in ItemCategory}:
        raise SpecError(f"Unknown item category '{effect.element}'")
    return f"{effect.modality.value}|{effect.element}"


def check_effects(effects: List[PlantEffect]):
    """
    Raises:
        SpecError: one element is planted both with and without attention
            support, or one (element, outcome) pair carries disagreeing effects
    """
    by_element: Dict[str, set] = {}
    by_pair: Dict[Tuple[str, Outcome], PlantEffect] = {}
    for effect in effects:
        key = element_key(effect)
        by_element.setdefault(key, set()).add(effect.target)
        pair = (key, effect.outcome)
        previous = by_pair.get(pair)
        if previous is not None and (
            previous.target is not effect.target or np.sign(previous.magnitude) != np.sign(effect.magnitude)
        ):
            raise SpecError(f"Contradictory effects on {key} for {effect.outcome.value}")
        by_pair[pair] = effect
    for key, targets in by_element.items():
        if PlantTarget.OUTCOME_CONFOUND_ONLY in targets and targets & {PlantTarget.ATTENTION, PlantTarget.BOTH}:
            raise SpecError(f"Element {key} is planted both as attention-supported and as confound-only")


def _standardize(values: np.ndarray) -> np.ndarray:
    sd = values.std()
    return np.zeros_like(values) if sd == 0 else (values - values.mean()) / sd


def expected_verdict(effect: PlantEffect) -> Optional[str]:
    if effect.target is PlantTarget.BOTH:
        return "pass"
    if effect.target is PlantTarget.OUTCOME_CONFOUND_ONLY:
        return "filtered_step1"
    return None


# ============================================================================
# Planning
# ============================================================================


def _compose(field: TextField, rng: np.random.Generator) -> List[str]:
    if field is TextField.TITLE:
        return [OPENERS[rng.integers(len(OPENERS))], TOPICS[rng.integers(len(TOPICS))]] + \
            list(rng.choice(FILLER, size=int(rng.integers(3, 7))))
    if field is TextField.DESCRIPTION:
        words = [TOPICS[rng.integers(len(TOPICS))]]
        while len(" ".join(words)) < 110:
            words.append(str(rng.choice(FILLER)))
        return words
    return [str(w) for w in rng.choice(FILLER + TOPICS, size=int(rng.integers(40, 61)))]


def _brand_position(count: int, half: Optional[str], rng: np.random.Generator) -> int:
    half = half or ("first" if rng.random() < 0.5 else "second")
    mid = max(1, count // 2)
    return int(rng.integers(0, mid)) if half == "first" else int(rng.integers(mid, count + 1))


def _scene_times(duration: float, spec: PlantSpec) -> Dict[str, List[Tuple[FrameTag, float]]]:
    times = {}
    for which in spec.slices:
        start = select_slice(duration, which).start
        times[which.value] = grid_frame_times(start, duration, spec.frame_rate)
    return times


def _plan_video(index: int, spec: PlantSpec, lexicon: List[str]) -> _VideoPlan:
    rng = np.random.default_rng([spec.seed, index, 0])
    duration = round(float(rng.uniform(spec.min_length_s, spec.max_length_s)), 2)

    words, brand_at, brand_name = {}, {}, {}
    for field in TextField:
        words[field.value] = [str(w) for w in _compose(field, rng)]
        if rng.random() < spec.brand_rate:
            brand_at[field.value] = _brand_position(len(words[field.value]), spec.brand_half, rng)
            brand_name[field.value] = lexicon[int(rng.integers(len(lexicon)))]

    weights = rng.dirichlet(np.full(len(SoundCategory), 0.8))
    segments = plan_segments(duration, weights, rng)

    present = {
        c: float(rng.uniform(0.02, 0.18)) for c in ItemCategory if rng.random() < ITEM_PRESENCE
    }
    scenes = {FrameTag.THUMBNAIL.value: plan_scene(present, spec.image_height, spec.image_width, rng)}
    for tagged in _scene_times(duration, spec).values():
        for _, t in tagged:
            key = f"{t:.3f}"
            if key not in scenes:
                visible = {c: s for c, s in present.items() if rng.random() < FRAME_VISIBILITY}
                scenes[key] = plan_scene(visible, spec.image_height, spec.image_width, rng)

    playlists = int(rng.integers(0, 4))
    structured = {
        "tag_count": float(rng.poisson(8)),
        "playlist_count": float(playlists),
        "playlist_avg_position": float(rng.uniform(1, 20)) if playlists else 0.0,
        "playlist_avg_size": float(rng.uniform(5, 60)) if playlists else 0.0,
        "rank": float(rng.integers(1, 100)),
        "url_count_in_description": float(rng.poisson(2)),
        "hashtag_in_description": float(rng.random() < 0.4),
    }
    return _VideoPlan(
        index=index,
        video_id=f"v{index:05d}",
        influencer=index % spec.influencer_count,
        duration=duration,
        gap_days=float(rng.uniform(2.0, 10.0)),
        hour=int(rng.integers(0, 24)),
        words=words,
        brand_at=brand_at,
        brand_name=brand_name,
        segments=segments,
        scenes=scenes,
        structured=structured,
    )


def _beginning_moments(plan: _VideoPlan) -> List[List[str]]:
    return moment_classes(plan.segments, select_slice(plan.duration, SliceWhich.BEGINNING).start)


def _element_values(plan: _VideoPlan, spec: PlantSpec) -> Dict[str, float]:
    """Per-video value of every plantable element on the beginning slice"""
    values = {f"text|{f.value}{BRAND_SUFFIX}": float(f.value in plan.brand_at) for f in TextField}
    labels = _beginning_moments(plan)
    for category in SoundCategory:
        values[f"audio|{category.value}"] = moment_category_share(labels, category)

    start = select_slice(plan.duration, SliceWhich.BEGINNING).start
    keys = [f"{t:.3f}" for _, t in grid_frame_times(start, plan.duration, spec.frame_rate)]
    for category in ItemCategory:
        sizes = []
        for key in keys:
            box = plan.scenes[key].boxes.get(category)
            if box is not None:
                record = ItemBoxRecord(frame_tag="0s", category=category, x0=box[0], y0=box[1], x1=box[2], y1=box[3])
                sizes.append(box_size_pct(record, spec.image_height, spec.image_width))
        values[f"image|{category.value}"] = float(np.mean(sizes)) if sizes else 0.0
    return values


# ============================================================================
# Outcomes
# ============================================================================


def _hidden_confounders(plans: List[_VideoPlan], spec: PlantSpec) -> Dict[str, np.ndarray]:
    """Binary hidden covariate per confound-only element, agreeing with the element 85% of the time"""
    hidden = {}
    for effect in spec.effects:
        key = element_key(effect)
        if effect.target is not PlantTarget.OUTCOME_CONFOUND_ONLY or key in hidden:
            continue
        values = np.array([p.elements[key] for p in plans])
        above = values > values.mean()
        draws = np.array([np.random.default_rng([spec.seed, p.index, 1, len(hidden)]).random() for p in plans])
        hidden[key] = np.where(above, draws < CONFOUND_AGREEMENT, draws >= CONFOUND_AGREEMENT).astype(float)
    return hidden


def _latent_outcomes(plans: List[_VideoPlan], spec: PlantSpec, hidden: Dict[str, np.ndarray]) -> Dict[Outcome, np.ndarray]:
    corpus_rng = np.random.default_rng([spec.seed, 10 ** 6])
    influencer_effects = corpus_rng.normal(0.0, 0.5 * spec.noise_sd, size=(spec.influencer_count, len(Outcome)))
    owners = np.array([p.influencer for p in plans])

    latent = {}
    for j, outcome in enumerate(Outcome):
        noise = np.array([np.random.default_rng([spec.seed, p.index, 2, j]).normal() for p in plans])
        y = OUTCOME_BASE[outcome] + influencer_effects[owners, j] + spec.noise_sd * noise
        for effect in spec.effects:
            if effect.outcome is not outcome:
                continue
            key = element_key(effect)
            if effect.target is PlantTarget.OUTCOME_CONFOUND_ONLY:
                driver, scale = hidden[key], 1.0
            else:
                driver = np.array([p.elements[key] for p in plans])
                scale = ATTENTION_SHARE if effect.target is PlantTarget.ATTENTION else 1.0
            y = y + spec.noise_sd * scale * effect.magnitude * _standardize(driver)
        latent[outcome] = y
    return latent


def counts_from_latent(latent: Dict[Outcome, float]) -> Dict[str, int]:
    """Invert the outcome transforms into view, comment, like and dislike counts"""
    views = max(1, int(round(np.exp(latent[Outcome.LOG_VIEWS]))))
    comments = max(0, int(round(np.exp(latent[Outcome.LOG_ENGAGEMENT]) * views - 1)))
    likes = max(0, int(round(np.exp(latent[Outcome.LOG_POPULARITY]) * views - 1)))
    dislikes = max(0, int(round((likes + 1) / np.exp(latent[Outcome.LOG_LIKEABILITY]) - 1)))
    return {"views": views, "comments": comments, "likes": likes, "dislikes": dislikes}


def comment_scores(sentiment_latent: float, rng: np.random.Generator) -> List[float]:
    center = 0.34 + 0.2 * np.tanh(sentiment_latent / 2.0)
    scores = np.clip(center + rng.normal(0.0, 0.1, size=COMMENTS_PER_VIDEO), -1.0, 1.0)
    return [round(float(s), 6) for s in scores]


# ============================================================================
# Rendering
# ============================================================================


def _text_fields(plan: _VideoPlan, markers: Dict[str, bool], rng: np.random.Generator) -> Tuple[Dict[str, str], List[dict]]:
    texts, mentions = {}, []
    for field in TextField:
        words = list(plan.words[field.value])
        brand_index = plan.brand_at.get(field.value)
        if markers.get(field.value):
            at = int(rng.integers(0, len(words) + 1))
            words.insert(at, MARKER_WORD)
            if brand_index is not None and at <= brand_index:
                brand_index += 1
        if brand_index is not None:
            words.insert(brand_index, plan.brand_name[field.value])
            if field is TextField.CAPTIONS and rng.random() < 0.5:
                words.append("sponsored")
        text = " ".join(words)
        if brand_index is not None:
            char = len(" ".join(words[:brand_index])) + (1 if brand_index else 0)
            mentions.append({
                "field": field.value,
                "brand": plan.brand_name[field.value],
                "word_index": brand_index,
                "char_start": char,
                "half": "first" if char < len(text) / 2.0 else "second",
            })
        texts[field.value] = text
    return texts, mentions


def _render_video(plan: _VideoPlan, spec: PlantSpec, out_dir: str, confounds: Dict[str, bool]) -> Tuple[MediaRefs, Dict[str, str], dict]:
    rng = np.random.default_rng([spec.seed, plan.index, 3])
    media_rel = os.path.join("media", plan.video_id)
    os.makedirs(os.path.join(out_dir, media_rel), exist_ok=True)

    markers = {
        key.split("|")[1][:-len(BRAND_SUFFIX)]: on
        for key, on in confounds.items() if key.startswith("text|")
    }
    texts, mentions = _text_fields(plan, markers, rng)

    hum = any(on for key, on in confounds.items() if key.startswith("audio|"))
    samples = render_audio(plan.segments, plan.duration, spec.audio_rate, rng, hum=hum)
    audio_rel = os.path.join(media_rel, "audio.wav")
    write_wav(os.path.join(out_dir, audio_rel), samples, spec.audio_rate)

    tint = 0.35 if any(on for key, on in confounds.items() if key.startswith("image|")) else 0.0
    frames, paths = [], {}
    for key in sorted(plan.scenes):
        name = "thumbnail.ppm" if key == FrameTag.THUMBNAIL.value else f"frame_{key}.ppm"
        rel = os.path.join(media_rel, name)
        write_frame(os.path.join(out_dir, rel), render_scene(plan.scenes[key], spec.image_height,
                                                              spec.image_width, rng, tint))
        paths[key] = rel
        if key != FrameTag.THUMBNAIL.value:
            frames.append(FrameRef(t=float(key), path=rel))

    boxes = [
        ItemBoxRecord(frame_tag=FrameTag.THUMBNAIL.value, category=c, x0=b[0], y0=b[1], x1=b[2], y1=b[3])
        for c, b in plan.scenes[FrameTag.THUMBNAIL.value].boxes.items()
    ]
    moments = {}
    for which in spec.slices:
        selection = select_slice(plan.duration, which)
        moments[which.value] = moment_classes(plan.segments, selection.start, hum=hum)
        for tag, t in grid_frame_times(selection.start, plan.duration, spec.frame_rate):
            for c, b in plan.scenes[f"{t:.3f}"].boxes.items():
                boxes.append(ItemBoxRecord(frame_tag=tag.value, category=c, x0=b[0], y0=b[1],
                                           x1=b[2], y1=b[3], slice=which))

    media = MediaRefs(
        audio_path=audio_rel,
        thumbnail_path=paths[FrameTag.THUMBNAIL.value],
        frames=sorted(frames, key=lambda f: f.t),
        boxes=boxes,
    )
    truth = {
        "mentions": mentions,
        "segments": [[s.start, s.end, s.sound_class] for s in plan.segments],
        "moment_classes": moments,
        "hum": hum,
        "tint": tint,
    }
    return media, texts, truth


# ============================================================================
# Entry point
# ============================================================================


def generate(spec: PlantSpec, out_dir: str, threads: Optional[int] = None) -> GeneratedCorpus:
    """
    Generate the corpus for `spec` under `out_dir`.

    Same spec and seed produce byte-identical files.

    Raises:
        SpecError: contradictory or unknown planted effects
    """
    check_effects(spec.effects)
    os.makedirs(out_dir, exist_ok=True)
    lexicon = BRAND_NAMES
    threads = threads or settings.pipeline_threads

    plans = [_plan_video(i, spec, lexicon) for i in range(spec.corpus_size)]
    for plan in plans:
        plan.elements = _element_values(plan, spec)
    hidden = _hidden_confounders(plans, spec)
    latent = _latent_outcomes(plans, spec, hidden)

    def render(plan: _VideoPlan):
        confounds = {key: bool(values[plan.index]) for key, values in hidden.items()}
        return _render_video(plan, spec, out_dir, confounds)

    if threads <= 1:
        rendered = [render(p) for p in plans]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rendered = list(pool.map(render, plans))

    uploads = _upload_times(plans, spec)
    records, videos_truth = [], {}
    for plan, (media, texts, truth) in zip(plans, rendered):
        values = {o: float(latent[o][plan.index]) for o in Outcome}
        upload, prev_gap, next_gap = uploads[plan.index]
        rng = np.random.default_rng([spec.seed, plan.index, 4])
        structured = plan.structured
        records.append(VideoRecord(
            video_id=plan.video_id,
            influencer_id=f"inf{plan.influencer:03d}",
            category_id=f"cat{plan.influencer % spec.category_count:02d}",
            subscriber_count=_subscribers(plan.influencer, spec),
            video_length_min=plan.duration / 60.0,
            tag_count=int(structured["tag_count"]),
            playlist_count=int(structured["playlist_count"]),
            playlist_avg_position=structured["playlist_avg_position"],
            playlist_avg_size=structured["playlist_avg_size"],
            upload_timestamp=upload,
            scrape_timestamp=SCRAPE_DATE,
            gap_scrape_days=round((SCRAPE_DATE - upload).total_seconds() / 86400.0, 6),
            gap_prev_days=prev_gap,
            gap_next_days=next_gap,
            rank=int(structured["rank"]),
            captions_present=True,
            url_count_in_description=int(structured["url_count_in_description"]),
            hashtag_in_description=bool(structured["hashtag_in_description"]),
            title=texts[TextField.TITLE.value],
            description_160=texts[TextField.DESCRIPTION.value],
            captions_30s=texts[TextField.CAPTIONS.value],
            media=media,
            comment_sentiments=comment_scores(values[Outcome.SENTIMENT], rng),
            **counts_from_latent(values),
        ))
        videos_truth[plan.video_id] = {
            **truth,
            "elements": plan.elements,
            "hidden": {key: float(v[plan.index]) for key, v in hidden.items()},
            "latent": {o.value: round(v, 10) for o, v in values.items()},
        }

    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    save_manifest(records, manifest_path)
    lexicon_path = os.path.join(out_dir, "brands.txt")
    with open(lexicon_path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lexicon) + "\n")

    truth_path = os.path.join(out_dir, "ground_truth.json")
    truth = {
        "seed": spec.seed,
        "spec": spec.model_dump(mode="json"),
        "effects": [
            {**e.model_dump(mode="json"), "element_key": element_key(e), "expected_verdict": expected_verdict(e)}
            for e in spec.effects
        ],
        "videos": videos_truth,
    }
    with open(truth_path, "w", encoding="utf-8") as handle:
        json.dump(truth, handle, sort_keys=True)

    logger.info("synthetic_corpus_written", out_dir=out_dir, videos=len(records),
                effects=len(spec.effects), seed=spec.seed)
    return GeneratedCorpus(manifest_path=manifest_path, lexicon_path=lexicon_path,
                           truth_path=truth_path, videos=len(records))


def _subscribers(influencer: int, spec: PlantSpec) -> int:
    """Log-spaced from 10^4 to 10^7.3 so micro, mid and mega influencers all occur"""
    position = influencer / max(1, spec.influencer_count - 1)
    return int(round(10 ** (4.0 + 3.3 * position)))


def _upload_times(plans: List[_VideoPlan], spec: PlantSpec) -> Dict[int, Tuple[datetime, float, float]]:
    by_influencer: Dict[int, List[_VideoPlan]] = {}
    for plan in plans:
        by_influencer.setdefault(plan.influencer, []).append(plan)

    result = {}
    for influencer, own in by_influencer.items():
        offsets = np.cumsum([p.gap_days for p in own]) + 3.0 * influencer
        for k, plan in enumerate(own):
            upload = (FIRST_UPLOAD + timedelta(days=float(offsets[k]))).replace(
                hour=plan.hour, minute=0, second=0, microsecond=0)
            prev_gap = float(own[k].gap_days) if k else 0.0
            next_gap = float(own[k + 1].gap_days) if k + 1 < len(own) else 0.0
            result[plan.index] = (upload, round(prev_gap, 6), round(next_gap, 6))
    return result


# ============================================================================
# Ground truth access
# ============================================================================


def load_truth(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def truth_moment_classes(truth: dict, video_id: str, which: SliceWhich) -> List[List[str]]:
    """Per-moment class names of one video and slice, [] when not generated"""
    return truth["videos"].get(video_id, {}).get("moment_classes", {}).get(which.value, [])
