"""Scope classifier: estimates the probability that an input falls inside an
edit's scope.

Two architectures share the text encoder:

* ``embed`` computes fixed-length encodings of the input and the serialized
  edit and scores ``exp(-gamma * ||E(x) - E(z)||^2)``, with the exponent kept
  in log space.  ``gamma`` is a learned positive scale, reparameterized
  through a softplus.
* ``cross`` scores the pair jointly with a bilinear form on the two encodings
  followed by a sigmoid.

Training minimizes average binary cross entropy: in-scope pairs get label 1,
out-of-scope pairs label 0; hard examples are folded in as ordinary
positives/negatives.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .edits import EditDescriptor, EditRecord
from .errors import DegenerateDatasetError, EmptyBatchError
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
)

EMBED = "embed"
CROSS = "cross"

EPS = 1e-12
LOG_EPS = float(np.log(EPS))

# softplus(raw) == 1 at init
GAMMA_RAW_INIT = float(np.log(np.e - 1.0))


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class ScopeClassifierParams:
    """Weights for one classifier variant.

    Exactly one variant's extra parameters are set: ``gamma_raw`` for
    ``embed``, ``bilinear``/``bias`` for ``cross``.  Scalars are stored as
    0-d arrays so the generic parameter-tree helpers cover them.
    """

    variant: str
    encoder: EncoderParams
    gamma_raw: np.ndarray | None = None  # ()
    bilinear: np.ndarray | None = None  # (dim, dim)
    bias: np.ndarray | None = None  # ()

    def __post_init__(self) -> None:
        if self.variant not in (EMBED, CROSS):
            raise ValueError(f"unknown classifier variant {self.variant!r}")

    @classmethod
    def init(
        cls,
        variant: str,
        vocab_size: int,
        dim: int,
        rng: np.random.Generator | None = None,
        scale: float = 0.1,
    ) -> "ScopeClassifierParams":
        rng = rng or np.random.default_rng(0)
        enc = EncoderParams.init(vocab_size, dim, rng, scale)
        if variant == EMBED:
            return cls(variant=EMBED, encoder=enc, gamma_raw=np.array(GAMMA_RAW_INIT))
        return cls(
            variant=CROSS,
            encoder=enc,
            bilinear=scale * rng.standard_normal((dim, dim)),
            bias=np.array(0.0),
        )

    @property
    def gamma(self) -> float:
        return float(softplus(self.gamma_raw))


def edit_text(ze: EditDescriptor | str) -> str:
    return ze.text if isinstance(ze, EditDescriptor) else ze


def score_encoded(
    z_enc: np.ndarray, x_enc: np.ndarray, params: ScopeClassifierParams
) -> float:
    """Score a pair from precomputed encoder outputs (used by the edit cache)."""
    if params.variant == EMBED:
        d2 = float(((x_enc - z_enc) ** 2).sum())
        return float(np.exp(-params.gamma * d2))
    s = float(x_enc @ params.bilinear @ z_enc + params.bias)
    return float(sigmoid(s))


def score(
    ze: EditDescriptor | str,
    x: str,
    params: ScopeClassifierParams,
    vocab: Vocab,
    max_len: int = DEFAULT_MAX_LEN,
) -> float:
    """Probability in (0, 1] that ``x`` lies in the scope of edit ``ze``."""
    z_enc = encode(tokenize(edit_text(ze), vocab, max_len), params.encoder)
    x_enc = encode(tokenize(x, vocab, max_len), params.encoder)
    return score_encoded(z_enc, x_enc, params)


@dataclass
class _PairBatch:
    """Deduplicated text table plus index arrays for a labeled pair batch."""

    tokens: TokenBatch
    z_idx: np.ndarray
    x_idx: np.ndarray
    labels: np.ndarray


def _build_pair_batch(
    batch: Sequence[tuple[EditDescriptor | str, str, int]],
    vocab: Vocab,
    max_len: int,
) -> _PairBatch:
    table: dict[str, int] = {}

    def intern(text: str) -> int:
        if text not in table:
            table[text] = len(table)
        return table[text]

    z_idx = np.array([intern(edit_text(z)) for z, _, _ in batch], dtype=np.int64)
    x_idx = np.array([intern(x) for _, x, _ in batch], dtype=np.int64)
    labels = np.array([float(y) for _, _, y in batch])
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise ValueError("labels must be binary")
    tokens = batch_tokenize(list(table.keys()), vocab, max_len)
    return _PairBatch(tokens=tokens, z_idx=z_idx, x_idx=x_idx, labels=labels)


def _bce_from_batch(
    pb: _PairBatch, params: ScopeClassifierParams
) -> tuple[float, ScopeClassifierParams]:
    enc = encode_batch(pb.tokens, params.encoder)
    e = enc.values
    ez, ex, y = e[pb.z_idx], e[pb.x_idx], pb.labels
    n = len(y)
    d_table = np.zeros_like(e)

    if params.variant == EMBED:
        gamma = float(softplus(params.gamma_raw))
        diff = ex - ez
        d2 = (diff**2).sum(axis=1)
        log_g = -gamma * d2
        g = np.exp(log_g)
        one_minus = 1.0 - g
        loss = -np.mean(
            y * np.maximum(log_g, LOG_EPS)
            + (1.0 - y) * np.log(np.maximum(one_minus, EPS))
        )
        # d loss / d d2 and d loss / d gamma per pair; clamped pairs get zero
        ratio = g / np.maximum(one_minus, EPS)
        w_d2 = np.where(
            y == 1.0,
            np.where(log_g > LOG_EPS, gamma, 0.0),
            np.where(one_minus > EPS, -gamma * ratio, 0.0),
        ) / n
        w_gamma = np.where(
            y == 1.0,
            np.where(log_g > LOG_EPS, d2, 0.0),
            np.where(one_minus > EPS, -d2 * ratio, 0.0),
        ) / n
        d_ex = 2.0 * w_d2[:, None] * diff
        np.add.at(d_table, pb.x_idx, d_ex)
        np.add.at(d_table, pb.z_idx, -d_ex)
        grad_gamma_raw = np.array(w_gamma.sum() * sigmoid(float(params.gamma_raw)))
        grad_enc = encode_batch_grad(pb.tokens, params.encoder, enc, d_table)
        grad = ScopeClassifierParams(
            variant=EMBED, encoder=grad_enc, gamma_raw=grad_gamma_raw
        )
        return float(loss), grad

    s = np.einsum("pd,de,pe->p", ex, params.bilinear, ez) + float(params.bias)
    g = sigmoid(s)
    loss = -np.mean(
        y * np.log(np.maximum(g, EPS)) + (1.0 - y) * np.log(np.maximum(1.0 - g, EPS))
    )
    clamped = np.where(y == 1.0, g < EPS, (1.0 - g) < EPS)
    ds = np.where(clamped, 0.0, g - y) / n
    grad_w = np.einsum("p,pd,pe->de", ds, ex, ez)
    grad_b = np.array(ds.sum())
    np.add.at(d_table, pb.x_idx, ds[:, None] * (ez @ params.bilinear.T))
    np.add.at(d_table, pb.z_idx, ds[:, None] * (ex @ params.bilinear))
    grad_enc = encode_batch_grad(pb.tokens, params.encoder, enc, d_table)
    grad = ScopeClassifierParams(
        variant=CROSS, encoder=grad_enc, bilinear=grad_w, bias=grad_b
    )
    return float(loss), grad


def bce_loss(
    batch: Sequence[tuple[EditDescriptor | str, str, int]],
    params: ScopeClassifierParams,
    vocab: Vocab,
    max_len: int = DEFAULT_MAX_LEN,
) -> tuple[float, ScopeClassifierParams]:
    """Average binary cross entropy over labeled (edit, input) pairs.

    Logs are clamped at 1e-12, so the loss is finite for any finite
    parameters.  Returns the loss and its exact gradient.
    """
    if len(batch) == 0:
        raise EmptyBatchError("bce_loss needs a non-empty batch")
    pb = _build_pair_batch(batch, vocab, max_len)
    return _bce_from_batch(pb, params)


def classifier_pairs(
    records: Sequence[EditRecord],
) -> list[tuple[EditDescriptor, str, int]]:
    """Expand records into labeled training pairs (hard samples included)."""
    pairs: list[tuple[EditDescriptor, str, int]] = []
    for rec in records:
        for s in rec.in_scope:
            pairs.append((rec.edit, s.x, 1))
        for o in rec.out_of_scope:
            pairs.append((rec.edit, o.x, 0))
    return pairs


def train_classifier(
    records: Sequence[EditRecord],
    vocab: Vocab,
    *,
    variant: str = EMBED,
    dim: int = 32,
    epochs: int = 200,
    lr: float = 0.1,
    optimizer: str = "gd",
    seed: int = 0,
    max_len: int = DEFAULT_MAX_LEN,
    init_scale: float = 0.1,
) -> TrainResult:
    """Train a scope classifier on edit records by full-batch descent.

    Raises DegenerateDatasetError when a record carries no samples at all or
    when every pair in the dataset has the same label.
    """
    if not records:
        raise DegenerateDatasetError("no records to train on")
    for rec in records:
        if not rec.in_scope and not rec.out_of_scope:
            raise DegenerateDatasetError(f"record {rec.edit.id} has no samples")
    pairs = classifier_pairs(records)
    labels = {label for _, _, label in pairs}
    if labels != {0, 1}:
        raise DegenerateDatasetError("training pairs must include both labels")
    pb = _build_pair_batch(pairs, vocab, max_len)
    rng = np.random.default_rng(seed)
    params = ScopeClassifierParams.init(variant, len(vocab), dim, rng, init_scale)
    return minimize(
        params,
        lambda p: _bce_from_batch(pb, p),
        epochs=epochs,
        lr=lr,
        optimizer=optimizer,
    )


def classifier_fingerprint(params: ScopeClassifierParams) -> str:
    """Stable hash of all classifier weights; guards stale cached embeddings."""
    h = hashlib.sha256()
    h.update(params.variant.encode())
    for arr in _fingerprint_arrays(params):
        h.update(str(arr.shape).encode())
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def _fingerprint_arrays(params: ScopeClassifierParams) -> list[np.ndarray]:
    arrs = [params.encoder.embedding, params.encoder.projection]
    if params.gamma_raw is not None:
        arrs.append(np.atleast_1d(params.gamma_raw))
    if params.bilinear is not None:
        arrs.append(params.bilinear)
    if params.bias is not None:
        arrs.append(np.atleast_1d(params.bias))
    return arrs
