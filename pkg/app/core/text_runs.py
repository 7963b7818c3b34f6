"""
Training and inference of the per-field text models.
"""

from typing import Dict, List, Tuple

import numpy as np
import pandas as pd
import structlog
from scipy.special import expit

from app.config.settings import settings
from app.core.context import RunContext
from app.core.model_io import ModelCard, load_model, model_key, save_model
from app.ingest.brands import BrandLexicon, brand_match
from app.interpretation.text import FIELD_SOURCES
from app.models.schemas import Outcome, OutcomeKind, TextField
from app.nn.training import batched_inference, fit_supervised
from app.text.encoder import TextEncoderModel, extract_cls_attention
from app.text.tokenizer import TokenSequence, pad_batch, tokenize
from app.text.vocab import Vocab

logger = structlog.get_logger()

VOCAB_FILE = "vocab.txt"
INFERENCE_BATCH = 32


def build_vocab(ctx: RunContext) -> Vocab:
    texts = [r.text(f) for r in ctx.split_records("train") for f in TextField]
    vocab = Vocab.build(texts, settings.vocab_size)
    vocab.save(ctx.models_path(VOCAB_FILE))
    return vocab


def load_vocab(ctx: RunContext) -> Vocab:
    return Vocab.load(ctx.models_path(VOCAB_FILE))


def _sequences(ctx: RunContext, vocab: Vocab, field: TextField, split: str) -> List[TokenSequence]:
    return [
        tokenize(r.text(field), vocab, ctx.lexicon, ctx.config.encoder.max_len)
        for r in ctx.split_records(split)
    ]


def _model(ctx: RunContext, vocab: Vocab, field: TextField, outcome: Outcome) -> TextEncoderModel:
    return TextEncoderModel(len(vocab), ctx.config.encoder, outcome.kind, seed=ctx.config.seed,
                            name=f"text/{field.value}/{outcome.value}")


def train_text(ctx: RunContext, vocab: Vocab) -> List[str]:
    """One encoder per (field, outcome); returns written paths"""
    written = []
    for field in TextField:
        seqs = {s: _sequences(ctx, vocab, field, s) for s in ("train", "validation")}
        for outcome in ctx.config.outcomes:
            model = _model(ctx, vocab, field, outcome)

            def forward(split, idx, training, step, model=model, seqs=seqs):
                _, ids, mask = pad_batch([seqs[split][i] for i in idx])
                return model.forward(ids, mask, training, step)

            report, scaler = fit_supervised(
                model.name, model.store, forward,
                ctx.outcome_values(outcome, ctx.split.train),
                ctx.outcome_values(outcome, ctx.split.validation),
                "bce" if outcome.is_binary else "mse", ctx.config.train,
            )
            card = ModelCard(name=model.name, scaler=scaler, report=report)
            written += save_model(ctx.path("models"), model_key("text", field.value, outcome.value),
                                  model.store, card)
    return written


def _brand_names(seq: TokenSequence, lexicon: BrandLexicon) -> Dict[int, str]:
    """Token index -> brand name for tokens inside a brand mention"""
    names = dict(zip(lexicon.forms, lexicon.names))
    spans = brand_match(seq.text, lexicon).spans
    found = {}
    for i, (start, end) in enumerate(seq.spans):
        for b_start, b_end in spans:
            if end > start and start < b_end and b_start < end:
                found[i] = names.get(seq.text[b_start:b_end], seq.text[b_start:b_end])
    return found


def predict_text(ctx: RunContext, vocab: Vocab) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Predictions for every video, and CLS attention rows for holdout videos.

    Returns:
        (long predictions, token attention export)
    """
    tags = ctx.split.tag_of()
    records = ctx.records
    predictions, attention = [], []
    for field in TextField:
        seqs = [tokenize(r.text(field), vocab, ctx.lexicon, ctx.config.encoder.max_len) for r in records]
        batches = [np.arange(s, min(s + INFERENCE_BATCH, len(seqs))) for s in range(0, len(seqs), INFERENCE_BATCH)]
        for outcome in ctx.config.outcomes:
            model = _model(ctx, vocab, field, outcome)
            card = load_model(ctx.path("models"), model_key("text", field.value, outcome.value), model.store)

            def run(idx, model=model):
                padded, ids, mask = pad_batch([seqs[i] for i in idx])
                cls_output, attentions = model.encode(ids, mask)
                return padded, model.head(cls_output).data, attentions

            for idx, (padded, raw, attentions) in zip(batches, batched_inference(run, batches, settings.pipeline_threads)):
                values = expit(raw) if outcome.kind is OutcomeKind.BINARY else card.scaler.inverse(raw)
                for b, i in enumerate(idx):
                    record = records[i]
                    split = tags[record.video_id]
                    predictions.append({"video_id": record.video_id, "outcome": outcome.value,
                                        "source": FIELD_SOURCES[field].value, "prediction": float(values[b]),
                                        "split": split})
                    if split != "holdout":
                        continue
                    vector = extract_cls_attention(attentions, padded[b], b)
                    names = _brand_names(padded[b], ctx.lexicon)
                    for position, weight in zip(vector.positions, vector.weights):
                        attention.append({
                            "video_id": record.video_id, "field": field.value, "outcome": outcome.value,
                            "position": position, "piece": padded[b].pieces[position],
                            "brand": int(padded[b].brand_flags[position]),
                            "brand_name": names.get(position, ""), "weight": weight, "split": split,
                        })
            logger.info("text_predicted", field=field.value, outcome=outcome.value, videos=len(records))
    return pd.DataFrame(predictions), pd.DataFrame(attention)
