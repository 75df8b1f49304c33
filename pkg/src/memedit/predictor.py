"""Tiny conditional sequence predictor.

One instance acts as the black-box base model (context = the raw input);
separately trained instances act as the counterfactual model (context = the
serialized edit, a separator, then the input).  Decoding is
non-autoregressive: each of ``A`` answer slots holds an independent softmax
over the vocabulary, decoded greedily with ties broken toward the lowest
token id.  Slot weights start at zero, so untrained slots emit PAD and the
decoded answer is the prefix before the first PAD.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import EmptyBatchError, TargetTooLongError
from .optim import TrainResult, minimize
from .text import (
    DEFAULT_MAX_LEN,
    EncoderParams,
    TokenBatch,
    Vocab,
    batch_tokenize,
    encode,
    encode_batch,
    encode_batch_grad,
    tokenize,
    PAD_ID,
)

EPS = 1e-12

DEFAULT_ANSWER_SLOTS = 4


@dataclass
class SeqPredictorParams:
    """Encoder weights plus per-slot output projections."""

    encoder: EncoderParams
    slot_weights: np.ndarray  # (slots, dim, vocab)
    slot_bias: np.ndarray  # (slots, vocab)

    @classmethod
    def init(
        cls,
        vocab_size: int,
        dim: int = 32,
        slots: int = DEFAULT_ANSWER_SLOTS,
        rng: np.random.Generator | None = None,
        scale: float = 0.1,
    ) -> "SeqPredictorParams":
        rng = rng or np.random.default_rng(0)
        return cls(
            encoder=EncoderParams.init(vocab_size, dim, rng, scale),
            slot_weights=np.zeros((slots, dim, vocab_size)),
            slot_bias=np.zeros((slots, vocab_size)),
        )

    @property
    def slots(self) -> int:
        return self.slot_weights.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.slot_weights.shape[2]


@dataclass(eq=False)
class Prediction:
    """Greedy decode of one context.

    ``slot_ids`` holds all per-slot argmax ids; ``token_ids`` is the decoded
    answer, i.e. the prefix before the first PAD.  ``log_prob`` is the summed
    log-probability of the chosen slot tokens.  ``slot_log_probs`` carries the
    full per-slot log distributions (None for verbatim cache returns).
    """

    slot_ids: tuple[int, ...]
    token_ids: tuple[int, ...]
    tokens: tuple[str, ...]
    log_prob: float
    slot_log_probs: np.ndarray | None

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def predictions_equal(a: Prediction, b: Prediction) -> bool:
    """Bitwise prediction equality: decoded slots and full distributions."""
    if a.slot_ids != b.slot_ids:
        return False
    if (a.slot_log_probs is None) != (b.slot_log_probs is None):
        return False
    if a.slot_log_probs is None:
        return True
    return np.array_equal(a.slot_log_probs, b.slot_log_probs)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def slot_log_distributions(
    context: str,
    params: SeqPredictorParams,
    vocab: Vocab,
    max_len: int = DEFAULT_MAX_LEN,
) -> np.ndarray:
    """(slots, vocab) log-softmax rows for one context."""
    e = encode(tokenize(context, vocab, max_len), params.encoder)
    logits = np.einsum("d,adv->av", e, params.slot_weights) + params.slot_bias
    return _log_softmax(logits)


def predict(
    context: str,
    params: SeqPredictorParams,
    vocab: Vocab,
    max_len: int = DEFAULT_MAX_LEN,
) -> Prediction:
    """Greedy per-slot decode; deterministic, ties to the lowest token id."""
    log_probs = slot_log_distributions(context, params, vocab, max_len)
    slot_ids = tuple(int(i) for i in np.argmax(log_probs, axis=1))
    answer: list[int] = []
    for tok in slot_ids:
        if tok == PAD_ID:
            break
        answer.append(tok)
    log_prob = float(sum(log_probs[a, t] for a, t in enumerate(slot_ids)))
    return Prediction(
        slot_ids=slot_ids,
        token_ids=tuple(answer),
        tokens=tuple(vocab.tokens[t] for t in answer),
        log_prob=log_prob,
        slot_log_probs=log_probs,
    )


def verbatim_prediction(
    target_ids: Sequence[int], vocab: Vocab, slots: int
) -> Prediction:
    """Wrap a stored answer as a Prediction (no distribution attached)."""
    ids = list(target_ids)[:slots]
    slot_ids = tuple(ids + [PAD_ID] * (slots - len(ids)))
    return Prediction(
        slot_ids=slot_ids,
        token_ids=tuple(ids),
        tokens=tuple(vocab.tokens[t] for t in ids),
        log_prob=0.0,
        slot_log_probs=None,
    )


class SequenceLikelihood(NamedTuple):
    total: float
    per_token: float


def log_likelihood(
    context: str,
    target: np.ndarray,
    params: SeqPredictorParams,
    vocab: Vocab,
    max_len: int = DEFAULT_MAX_LEN,
) -> SequenceLikelihood:
    """Summed log-probability of ``target`` plus its per-token average.

    ``target`` is a token-id sequence of length at most the slot count.
    """
    if len(target) > params.slots:
        raise TargetTooLongError(
            f"target length {len(target)} exceeds {params.slots} answer slots"
        )
    log_probs = slot_log_distributions(context, params, vocab, max_len)
    return likelihood_from_distributions(log_probs, target)


def likelihood_from_distributions(
    slot_log_probs: np.ndarray, target: Sequence[int]
) -> SequenceLikelihood:
    """Score a target against precomputed per-slot log distributions."""
    if len(target) > slot_log_probs.shape[0]:
        raise TargetTooLongError(
            f"target length {len(target)} exceeds {slot_log_probs.shape[0]} slots"
        )
    total = float(sum(slot_log_probs[a, t] for a, t in enumerate(target)))
    per_token = total / len(target) if len(target) else 0.0
    return SequenceLikelihood(total=total, per_token=per_token)


@dataclass
class _SeqBatch:
    """Tokenized contexts plus padded targets with a validity mask."""

    tokens: TokenBatch
    targets: np.ndarray  # (n, slots) int64, PAD-filled beyond each length
    target_mask: np.ndarray  # (n, slots) float64
    bad_targets: np.ndarray | None = None
    bad_mask: np.ndarray | None = None


def _pad_targets(
    target_ids: list[np.ndarray], slots: int
) -> tuple[np.ndarray, np.ndarray]:
    n = len(target_ids)
    tgt = np.zeros((n, slots), dtype=np.int64)
    mask = np.zeros((n, slots))
    for i, ids in enumerate(target_ids):
        if len(ids) > slots:
            raise TargetTooLongError(f"target length {len(ids)} exceeds {slots} slots")
        tgt[i, : len(ids)] = ids
        mask[i, : len(ids)] = 1.0
    return tgt, mask


def _build_seq_batch(
    batch: Sequence[tuple[str, str]] | Sequence[tuple[str, str, str]],
    params: SeqPredictorParams,
    vocab: Vocab,
    max_len: int,
    with_bad: bool,
) -> _SeqBatch:
    contexts = [item[0] for item in batch]
    tokens = batch_tokenize(contexts, vocab, max_len)
    good = [tokenize(item[1], vocab, max_len) for item in batch]
    targets, target_mask = _pad_targets(good, params.slots)
    bad_targets = bad_mask = None
    if with_bad:
        bad = [tokenize(item[2], vocab, max_len) for item in batch]
        bad_targets, bad_mask = _pad_targets(bad, params.slots)
    return _SeqBatch(tokens, targets, target_mask, bad_targets, bad_mask)


def _forward(params: SeqPredictorParams, tokens: TokenBatch):
    enc = encode_batch(tokens, params.encoder)
    logits = np.einsum("nd,adv->nav", enc.values, params.slot_weights) + params.slot_bias
    log_probs = _log_softmax(logits)
    return enc, log_probs


def _backward(
    params: SeqPredictorParams,
    tokens: TokenBatch,
    enc,
    d_logits: np.ndarray,
) -> SeqPredictorParams:
    grad_w = np.einsum("nav,nd->adv", d_logits, enc.values)
    grad_b = d_logits.sum(axis=0)
    d_enc = np.einsum("nav,adv->nd", d_logits, params.slot_weights)
    grad_encoder = encode_batch_grad(tokens, params.encoder, enc, d_enc)
    return SeqPredictorParams(
        encoder=grad_encoder, slot_weights=grad_w, slot_bias=grad_b
    )


def _nll_from_batch(
    sb: _SeqBatch, params: SeqPredictorParams
) -> tuple[float, SeqPredictorParams]:
    enc, log_probs = _forward(params, sb.tokens)
    n = len(sb.tokens)
    picked = np.take_along_axis(log_probs, sb.targets[:, :, None], axis=2)[:, :, 0]
    loss = -float((picked * sb.target_mask).sum() / n)
    probs = np.exp(log_probs)
    onehot_grad = np.zeros_like(log_probs)
    rows = np.arange(n)[:, None]
    slots = np.arange(params.slots)[None, :]
    onehot_grad[rows, slots, sb.targets] = sb.target_mask
    d_logits = (probs * sb.target_mask[:, :, None] - onehot_grad) / n
    return loss, _backward(params, sb.tokens, enc, d_logits)


def nll_loss(
    batch: Sequence[tuple[str, str]],
    params: SeqPredictorParams,
    vocab: Vocab,
    max_len: int = DEFAULT_MAX_LEN,
) -> tuple[float, SeqPredictorParams]:
    """Mean negative log-likelihood of targets given contexts, with gradient."""
    if len(batch) == 0:
        raise EmptyBatchError("nll_loss needs a non-empty batch")
    sb = _build_seq_batch(batch, params, vocab, max_len, with_bad=False)
    return _nll_from_batch(sb, params)


def _unlikelihood_from_batch(
    sb: _SeqBatch, params: SeqPredictorParams, lam: float
) -> tuple[float, SeqPredictorParams]:
    enc, log_probs = _forward(params, sb.tokens)
    n = len(sb.tokens)
    rows = np.arange(n)[:, None]
    slots = np.arange(params.slots)[None, :]

    picked = np.take_along_axis(log_probs, sb.targets[:, :, None], axis=2)[:, :, 0]
    good_term = -(picked * sb.target_mask).sum() / n

    bad_picked = np.take_along_axis(log_probs, sb.bad_targets[:, :, None], axis=2)[:, :, 0]
    log_q = (bad_picked * sb.bad_mask).sum(axis=1)
    q = np.exp(log_q)  # product of per-slot probabilities of the bad target
    one_minus = np.maximum(1.0 - q, EPS)
    bad_term = -lam * np.log(one_minus).sum() / n
    loss = float(good_term + bad_term)

    probs = np.exp(log_probs)
    onehot_good = np.zeros_like(log_probs)
    onehot_good[rows, slots, sb.targets] = sb.target_mask
    d_logits = (probs * sb.target_mask[:, :, None] - onehot_good) / n

    # unlikelihood term: d(-lam log(1-q))/dlogits = lam q/(1-q) (onehot - p)
    weight = np.where(1.0 - q > EPS, lam * q / one_minus, 0.0) / n
    onehot_bad = np.zeros_like(log_probs)
    onehot_bad[rows, slots, sb.bad_targets] = sb.bad_mask
    d_logits += weight[:, None, None] * (
        onehot_bad - probs * sb.bad_mask[:, :, None]
    )
    return loss, _backward(params, sb.tokens, enc, d_logits)


def unlikelihood_loss(
    batch: Sequence[tuple[str, str, str]],
    params: SeqPredictorParams,
    vocab: Vocab,
    lam: float = 1.0,
    max_len: int = DEFAULT_MAX_LEN,
) -> tuple[float, SeqPredictorParams]:
    """NLL of good targets plus ``-lam * log(1 - p(bad))`` per example.

    ``p(bad)`` is the product of per-slot probabilities of the bad target;
    the log argument is clamped at 1e-12.  With ``lam == 0`` this reduces
    exactly to ``nll_loss`` on the good targets.
    """
    if len(batch) == 0:
        raise EmptyBatchError("unlikelihood_loss needs a non-empty batch")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    sb = _build_seq_batch(batch, params, vocab, max_len, with_bad=True)
    return _unlikelihood_from_batch(sb, params, lam)


def train_predictor(
    dataset: Sequence[tuple[str, str]] | Sequence[tuple[str, str, str]],
    vocab: Vocab,
    *,
    mode: str = "nll",
    dim: int = 32,
    slots: int = DEFAULT_ANSWER_SLOTS,
    epochs: int = 500,
    lr: float = 0.1,
    optimizer: str = "gd",
    seed: int = 0,
    lam: float = 1.0,
    max_len: int = DEFAULT_MAX_LEN,
    init_scale: float = 0.1,
) -> TrainResult:
    """Train a predictor on (context, target) pairs or unlikelihood triples."""
    if len(dataset) == 0:
        raise EmptyBatchError("train_predictor needs a non-empty dataset")
    if mode not in ("nll", "unlikelihood"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    params = SeqPredictorParams.init(len(vocab), dim, slots, rng, init_scale)
    if mode == "nll":
        sb = _build_seq_batch(dataset, params, vocab, max_len, with_bad=False)
        fn = lambda p: _nll_from_batch(sb, p)
    else:
        sb = _build_seq_batch(dataset, params, vocab, max_len, with_bad=True)
        fn = lambda p: _unlikelihood_from_batch(sb, p, lam)
    return minimize(params, fn, epochs=epochs, lr=lr, optimizer=optimizer)
