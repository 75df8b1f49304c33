"""Tokenization, vocabulary, and a tiny trainable mean-pool text encoder.

The encoder is the numerical substrate for every learned component: it maps a
token sequence to the mean of its token embeddings followed by one linear
projection.  Gradients are derived analytically so the whole stack trains
without an autodiff framework.  Everything runs in float64 so that
finite-difference checks are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD_ID = 0
UNK_ID = 1
SEP_ID = 2
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
SEP_TOKEN = "<sep>"
RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, SEP_TOKEN)

DEFAULT_DIM = 32
DEFAULT_MAX_LEN = 32


@dataclass
class Vocab:
    """Dense token-to-id mapping with PAD/UNK/SEP reserved at ids 0..2.

    Ids are dense ``0..len-1`` and ``tokens[i]`` always maps back to ``i``.
    """

    tokens: tuple[str, ...]
    _ids: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if tuple(self.tokens[:3]) != RESERVED_TOKENS:
            raise ValueError(f"vocab must start with reserved tokens {RESERVED_TOKENS}")
        self._ids = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self._ids) != len(self.tokens):
            raise ValueError("vocab contains duplicate tokens")

    @classmethod
    def build(cls, corpus_tokens: Iterable[str]) -> "Vocab":
        """Build a vocab from raw tokens, sorted, with reserved ids prepended."""
        extra = sorted(set(corpus_tokens) - set(RESERVED_TOKENS))
        return cls(tokens=RESERVED_TOKENS + tuple(extra))

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocab":
        toks: set[str] = set()
        for t in texts:
            toks.update(t.lower().split())
        return cls.build(toks)

    def id(self, token: str) -> int:
        """Look up a token id; unknown tokens map to UNK."""
        return self._ids.get(token, UNK_ID)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def save(self, path: str | Path) -> None:
        """Persist as newline-delimited tokens; line index equals token id."""
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(tokens=tuple(lines))


def tokenize(text: str, vocab: Vocab, max_len: int = DEFAULT_MAX_LEN) -> np.ndarray:
    """Lowercase, whitespace-split, map to ids, truncate to ``max_len``.

    Total function: unknown tokens map to UNK and empty input yields an
    empty sequence.
    """
    ids = [vocab.id(tok) for tok in text.lower().split()[:max_len]]
    return np.asarray(ids, dtype=np.int64)


@dataclass
class EncoderParams:
    """Trainable encoder weights: token embedding table and a projection."""

    embedding: np.ndarray  # (vocab, dim)
    projection: np.ndarray  # (dim, dim)

    @classmethod
    def init(
        cls,
        vocab_size: int,
        dim: int = DEFAULT_DIM,
        rng: np.random.Generator | None = None,
        scale: float = 0.1,
    ) -> "EncoderParams":
        """Random embeddings, near-identity projection."""
        rng = rng or np.random.default_rng(0)
        emb = scale * rng.standard_normal((vocab_size, dim))
        proj = np.eye(dim) + scale * rng.standard_normal((dim, dim))
        return cls(embedding=emb, projection=proj)

    @property
    def dim(self) -> int:
        return self.embedding.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]


def encode(seq: np.ndarray, params: EncoderParams) -> np.ndarray:
    """Mean of token embeddings, then linear projection.

    An empty sequence encodes to the zero vector (avoids divide-by-zero).
    """
    if len(seq) == 0:
        return np.zeros(params.dim)
    return params.embedding[seq].mean(axis=0) @ params.projection


def encode_grad(
    seq: np.ndarray, params: EncoderParams, upstream: np.ndarray
) -> EncoderParams:
    """Exact gradient of ``encode`` w.r.t. all encoder parameters.

    ``upstream`` is the gradient of the downstream loss w.r.t. the encoder
    output.  Rows of the embedding table not touched by ``seq`` get zero
    gradient.
    """
    grad_emb = np.zeros_like(params.embedding)
    grad_proj = np.zeros_like(params.projection)
    if len(seq) == 0:
        return EncoderParams(embedding=grad_emb, projection=grad_proj)
    pooled = params.embedding[seq].mean(axis=0)
    grad_proj += np.outer(pooled, upstream)
    d_pooled = params.projection @ upstream
    np.add.at(grad_emb, seq, d_pooled / len(seq))
    return EncoderParams(embedding=grad_emb, projection=grad_proj)


@dataclass
class TokenBatch:
    """A padded batch of token sequences for vectorized encoding."""

    ids: np.ndarray  # (n, max_len) int64, PAD-filled
    mask: np.ndarray  # (n, max_len) float64, 1.0 where a real token sits
    lengths: np.ndarray  # (n,) float64, clipped to >= 1 for safe division

    def __len__(self) -> int:
        return self.ids.shape[0]


def batch_tokenize(
    texts: Sequence[str], vocab: Vocab, max_len: int = DEFAULT_MAX_LEN
) -> TokenBatch:
    n = len(texts)
    ids = np.full((n, max_len), PAD_ID, dtype=np.int64)
    mask = np.zeros((n, max_len))
    lengths = np.zeros(n)
    for i, text in enumerate(texts):
        seq = tokenize(text, vocab, max_len)
        ids[i, : len(seq)] = seq
        mask[i, : len(seq)] = 1.0
        lengths[i] = len(seq)
    return TokenBatch(ids=ids, mask=mask, lengths=np.maximum(lengths, 1.0))


@dataclass
class BatchEncoding:
    """Forward-pass cache for the batched encoder."""

    values: np.ndarray  # (n, dim) projected encodings
    pooled: np.ndarray  # (n, dim) pre-projection mean embeddings


def encode_batch(batch: TokenBatch, params: EncoderParams) -> BatchEncoding:
    """Vectorized ``encode`` over a TokenBatch; rows match the single path."""
    emb = params.embedding[batch.ids]  # (n, L, d)
    pooled = (emb * batch.mask[:, :, None]).sum(axis=1) / batch.lengths[:, None]
    return BatchEncoding(values=pooled @ params.projection, pooled=pooled)


def encode_batch_grad(
    batch: TokenBatch,
    params: EncoderParams,
    enc: BatchEncoding,
    upstream: np.ndarray,
) -> EncoderParams:
    """Backward pass matching ``encode_batch``; ``upstream`` is (n, dim)."""
    grad_proj = enc.pooled.T @ upstream
    d_pooled = upstream @ params.projection.T  # (n, d)
    per_token = (d_pooled / batch.lengths[:, None])[:, None, :] * batch.mask[:, :, None]
    grad_emb = np.zeros_like(params.embedding)
    np.add.at(grad_emb, batch.ids.ravel(), per_token.reshape(-1, params.dim))
    return EncoderParams(embedding=grad_emb, projection=grad_proj)
