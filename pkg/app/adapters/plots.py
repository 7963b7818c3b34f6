"""
Figure renderers for the report stage. Each writes one PNG next to the CSV
holding the plotted numbers.
"""

import os

import matplotlib as mpl

mpl.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
import structlog  # noqa: E402

from app.interpretation.common import ci_column  # noqa: E402
from app.models.schemas import FRAME_TAGS, SoundCategory  # noqa: E402

logger = structlog.get_logger()

DPI = 150

mpl.rcParams.update({
    "font.size": 8,
    "axes.titlesize": 9,
    "savefig.bbox": "tight",
})


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    logger.debug("figure_written", path=path)
    return path


def plot_token_heatmap(tokens: pd.DataFrame, path: str, title: str = "") -> str:
    """
    Args:
        tokens: rows of one (video, field, outcome) with position, piece,
            brand and weight columns
    """
    tokens = tokens.sort_values("position")
    weights = tokens["weight"].to_numpy(dtype=float)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.35 * len(tokens)), 1.6))
    ax.imshow(weights[None, :], cmap="Reds", aspect="auto", vmin=0.0, vmax=max(weights.max(), 1e-12))
    ax.set_yticks([])
    ax.set_xticks(np.arange(len(tokens)))
    ax.set_xticklabels(tokens["piece"].astype(str), rotation=70, ha="right")
    for label, brand in zip(ax.get_xticklabels(), tokens["brand"].astype(int)):
        if brand:
            label.set_color("tab:blue")
            label.set_fontweight("bold")
    ax.set_title(title or "CLS attention per token")
    return _save(fig, path)


def plot_moment_attention(moments: pd.DataFrame, path: str, title: str = "") -> str:
    """Attention per moment above the sound-category indicator strip"""
    moments = moments.sort_values("moment")
    categories = [c.value for c in SoundCategory]
    indicators = moments[[ci_column(c) for c in categories]].to_numpy(dtype=float).T
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(8, 3.6), sharex=True,
                                      gridspec_kw={"height_ratios": [2, 1.3]})
    top.bar(moments["moment"], moments["weight"], color="tab:orange", width=0.9)
    top.set_ylabel("attention")
    top.set_title(title or "Moment attention")
    bottom.imshow(indicators, cmap="Greys", aspect="auto", vmin=0, vmax=1,
                  extent=(-0.5, len(moments) - 0.5, len(categories) - 0.5, -0.5))
    bottom.set_yticks(np.arange(len(categories)))
    bottom.set_yticklabels(categories)
    bottom.set_xlabel("moment")
    return _save(fig, path)


def plot_frame_gradmaps(thumbnail: np.ndarray, thumbnail_map: np.ndarray, frames: np.ndarray,
                        frame_maps: np.ndarray, path: str, title: str = "") -> str:
    """Thumbnail and five frames with their signed gradient maps overlaid"""
    images = [thumbnail] + list(frames)
    maps = [thumbnail_map] + list(frame_maps)
    labels = ["thumbnail"] + [t.value for t in FRAME_TAGS[:len(frames)]]
    bound = max(float(np.abs(np.stack(maps)).max()), 1e-12)
    fig, axes = plt.subplots(1, len(images), figsize=(2.2 * len(images), 1.8))
    for ax, image, grad, label in zip(np.atleast_1d(axes), images, maps, labels):
        ax.imshow(np.clip(image, 0.0, 1.0))
        ax.imshow(grad, cmap="bwr", alpha=0.5, vmin=-bound, vmax=bound)
        ax.set_title(label)
        ax.axis("off")
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def plot_brand_scatter(brands: pd.DataFrame, path: str, title: str = "") -> str:
    """Per-brand attention coefficient against outcome coefficient, by quadrant"""
    fig, ax = plt.subplots(figsize=(4.5, 4.0))
    ax.axhline(0.0, color="grey", linewidth=0.8)
    ax.axvline(0.0, color="grey", linewidth=0.8)
    ax.scatter(brands["attention_coef"], brands["outcome_coef"], s=18 + 4 * brands["videos"].clip(upper=30),
               color="tab:purple", alpha=0.7)
    for row in brands.itertuples(index=False):
        ax.annotate(row.brand, (row.attention_coef, row.outcome_coef), fontsize=7,
                    xytext=(3, 3), textcoords="offset points")
    ax.set_xlabel("attention coefficient")
    ax.set_ylabel("outcome coefficient")
    ax.set_title(title or "Brand heterogeneity")
    return _save(fig, path)
