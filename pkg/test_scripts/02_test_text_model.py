#!/usr/bin/env python3
"""
Test: Text Model
Purpose: Verify normalization, word-piece tokenization and the encoder

Tests:
- Vocabulary layout, longest-match pieces and UNK fallback
- Spans, brand flags, truncation and padding
- Encoder attention masks PAD keys and CLS attention excludes specials
- Padding does not change predictions
"""

import os
import sys

import numpy as np

from fixtures import (
    run_tests, tiny_encoder_config, TempRunDir,
    assert_equal, assert_true, assert_close, assert_raises
)

from app.errors import DataError, ShapeError
from app.ingest.brands import BrandLexicon
from app.models.schemas import OutcomeKind
from app.nn.gradcheck import grad_check
from app.text.encoder import TextEncoderModel, extract_cls_attention, predict_head, sinusoidal_positions
from app.text.normalize import normalize_text
from app.text.tokenizer import TokenKind, TokenSequence, pad_batch, tokenize
from app.text.vocab import CLS, PAD, SEP, SPECIALS, UNK, Vocab

CORPUS = ["Playing with the new Nike shoes!", "play time, nike and adidas", "my daily play"]


def corpus_vocab():
    return Vocab.build(CORPUS, size=50)


# ============================================================================
# Test: Vocabulary and tokenizer
# ============================================================================

def test_vocab_layout():
    """Specials first, whole words, then characters and continuations"""
    vocab = corpus_vocab()
    assert_equal(vocab.entries[:4], SPECIALS)
    assert_equal(vocab.pad_id, 0)
    assert_true("play" in vocab and "playing" in vocab)
    assert_true("##y" in vocab and "y" in vocab)
    assert_equal(vocab.id_of("zebra"), vocab.unk_id)
    assert_raises(DataError, Vocab, ["a", "b", "a"])
    assert_raises(DataError, Vocab, ["a", PAD])


def test_vocab_file_round_trip():
    vocab = corpus_vocab()
    with TempRunDir() as out:
        path = os.path.join(out, "vocab.txt")
        vocab.save(path)
        loaded = Vocab.load(path)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("hello\nworld\n")
        assert_raises(DataError, Vocab.load, path)
    assert_equal(loaded.entries, vocab.entries)


def test_longest_match_pieces():
    """Greedy longest prefix, then ## continuations"""
    vocab = corpus_vocab()
    sequence = tokenize("playin", vocab)
    assert_equal(sequence.pieces, [CLS, "play", "##i", "##n", SEP])
    assert_equal(sequence.spans[1:4], [(0, 4), (4, 5), (5, 6)])


def test_greeting_sentence_pieces():
    vocab = Vocab(["good", "morning", "!", "i", "am", "a", "youtube", "##r", "."])
    sequence = tokenize("Good Morning! I am a YouTuber.", vocab)
    assert_equal(sequence.pieces, [CLS, "good", "morning", "!", "i", "am", "a", "youtube", "##r", ".", SEP])
    assert_equal(sequence.spans[7:10], [(21, 28), (28, 29), (29, 30)])
    assert_true(all(kind is TokenKind.WORD for kind in sequence.kinds[1:-1]))


def test_unknown_character_makes_word_unk():
    """A word with an unmatched remainder becomes one UNK token"""
    vocab = corpus_vocab()
    sequence = tokenize("played zzz", vocab)
    assert_equal(sequence.pieces[-2], UNK)
    assert_equal(sequence.kinds[-2], TokenKind.UNK)
    assert_equal(sequence.spans[-2], (7, 10))


def test_spans_cover_normalized_text():
    """Spans of word tokens concatenate to the normalized text minus spaces"""
    vocab = corpus_vocab()
    text = "Café  PLAYING,\tnike"
    sequence = tokenize(text, vocab)
    normalized = normalize_text(text)
    assert_equal(normalized, "cafe  playing, nike")
    joined = "".join(normalized[a:b] for a, b in (sequence.spans[i] for i in sequence.word_positions))
    assert_equal(joined, normalized.replace(" ", ""))


def test_brand_flags_whole_word():
    """Brand tokens are flagged; a brand inside a longer word is not"""
    vocab = corpus_vocab()
    lexicon = BrandLexicon(names=["Nike"])
    flagged = tokenize("new nike shoes", vocab, lexicon)
    assert_equal(flagged.brand_flags, [False, False, True] + [False] * (len(flagged.ids) - 3))
    inside = tokenize("nikeplay", vocab, lexicon)
    assert_true(not any(inside.brand_flags))


def test_truncation_and_padding():
    """max_len keeps CLS and SEP; pad_batch masks PAD positions"""
    vocab = corpus_vocab()
    long = tokenize(" ".join(["play"] * 30), vocab, max_len=10)
    assert_equal(len(long.ids), 10)
    assert_equal(long.kinds[-1], TokenKind.SEP)
    short = tokenize("play", vocab)
    padded, ids, mask = pad_batch([long, short])
    assert_equal(ids.shape, (2, 10))
    assert_equal(int(mask[1].sum()), 7)
    assert_equal(padded[1].length, 3)
    assert_equal(padded[1].word_positions, [1])


def test_token_sequence_validation():
    """Sequences must start with CLS and end with SEP"""
    assert_raises(ValueError, TokenSequence, ids=[5, 3], pieces=["a", SEP],
                  kinds=[TokenKind.WORD, TokenKind.SEP], spans=[(0, 1), (1, 1)], brand_flags=[False, False])


# ============================================================================
# Test: Encoder
# ============================================================================

def test_attention_masks_padding():
    """Attention rows sum to one and give PAD keys zero weight"""
    vocab = corpus_vocab()
    model = TextEncoderModel(len(vocab), tiny_encoder_config(), OutcomeKind.CONTINUOUS, seed=3)
    _, ids, mask = pad_batch([tokenize("playing with nike", vocab), tokenize("play", vocab)])
    _, attentions = model.encode(ids, mask)
    last = attentions[-1]
    assert_close(last.sum(axis=-1), np.ones(last.shape[:-1]), tol=1e-12)
    assert_close(last[1][:, :, mask[1]], np.zeros_like(last[1][:, :, mask[1]]), tol=0.0)


def test_cls_attention_excludes_specials():
    vocab = corpus_vocab()
    model = TextEncoderModel(len(vocab), tiny_encoder_config(), OutcomeKind.CONTINUOUS, seed=3)
    sequence = tokenize("playing with nike", vocab)
    padded, ids, mask = pad_batch([sequence])
    _, attentions = model.encode(ids, mask)
    vector = extract_cls_attention(attentions, padded[0])
    assert_equal(vector.positions, sequence.word_positions)
    assert_close(vector.row_sum, 1.0, tol=1e-12)
    assert_true(0.0 < sum(vector.weights) < 1.0)


def test_padding_does_not_change_prediction():
    """A sequence predicts the same alone and inside a padded batch"""
    vocab = corpus_vocab()
    model = TextEncoderModel(len(vocab), tiny_encoder_config(), OutcomeKind.CONTINUOUS, seed=5)
    short = tokenize("play", vocab)
    long = tokenize("playing with the new nike shoes", vocab)
    _, alone_ids, alone_mask = pad_batch([short])
    _, batch_ids, batch_mask = pad_batch([short, long])
    alone = model.forward(alone_ids, alone_mask).data
    batch = model.forward(batch_ids, batch_mask).data
    assert_close(alone[0], batch[0], tol=1e-10)


def test_binary_head_is_probability():
    vocab = corpus_vocab()
    model = TextEncoderModel(len(vocab), tiny_encoder_config(), OutcomeKind.BINARY, seed=2)
    _, ids, mask = pad_batch([tokenize("nike", vocab), tokenize("play time", vocab)])
    cls_output, _ = model.encode(ids, mask)
    probs = predict_head(model, cls_output).data
    assert_true(np.all((probs > 0) & (probs < 1)))


def test_sequence_longer_than_max_len():
    vocab = corpus_vocab()
    model = TextEncoderModel(len(vocab), tiny_encoder_config(max_len=6), OutcomeKind.CONTINUOUS)
    _, ids, mask = pad_batch([tokenize("play play play play play play", vocab)])
    assert_raises(ShapeError, model.encode, ids, mask)


def test_encoder_gradients():
    """Sampled entries of every encoder parameter match finite differences"""
    vocab = corpus_vocab()
    model = TextEncoderModel(len(vocab), tiny_encoder_config(), OutcomeKind.CONTINUOUS, seed=1)
    _, ids, mask = pad_batch([tokenize("play nike", vocab), tokenize("my daily play time", vocab)])
    error = grad_check(lambda s: (model.forward(ids, mask) ** 2).sum(), model.store, max_entries=3)
    assert_true(error < 1e-6, f"encoder gradient error {error}")


def test_positional_table():
    table = sinusoidal_positions(4, 6)
    assert_close(table[0], [0.0, 1.0, 0.0, 1.0, 0.0, 1.0], tol=1e-12)
    assert_close(table[1, 0], np.sin(1.0), tol=1e-12)


# ============================================================================
# Main Test Runner
# ============================================================================

def main():
    """Run all text model tests"""
    tests = [
        ("Vocabulary layout", test_vocab_layout),
        ("Vocabulary file round trip", test_vocab_file_round_trip),
        ("Longest-match pieces", test_longest_match_pieces),
        ("Greeting sentence pieces", test_greeting_sentence_pieces),
        ("Unknown character makes word UNK", test_unknown_character_makes_word_unk),
        ("Spans cover normalized text", test_spans_cover_normalized_text),
        ("Brand flags are whole-word", test_brand_flags_whole_word),
        ("Truncation and padding", test_truncation_and_padding),
        ("TokenSequence validation", test_token_sequence_validation),
        ("Attention masks padding", test_attention_masks_padding),
        ("CLS attention excludes specials", test_cls_attention_excludes_specials),
        ("Padding does not change prediction", test_padding_does_not_change_prediction),
        ("Binary head is a probability", test_binary_head_is_probability),
        ("Sequence longer than max_len", test_sequence_longer_than_max_len),
        ("Encoder gradients", test_encoder_gradients),
        ("Positional table", test_positional_table),
    ]
    return run_tests("Text Model Tests", tests)


if __name__ == "__main__":
    sys.exit(main())
