"""Comparison editors sharing the routed editor's evaluation interface.

* LU: cache the base encoder's representation of each edit input and return
  the cached target verbatim whenever a new input's representation lands
  within ``delta`` (Euclidean) of a cached one.
* FT: fine-tune a copy of the base predictor on the edit pairs.
* RP: route exactly like the wrapped editor but prompt the base model with
  the retrieved edit instead of calling the counterfactual model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classifier import ScopeClassifierParams
from .edits import EditDescriptor, PAIR
from .editor import (
    ROUTE_BASE,
    ROUTE_COUNTERFACTUAL,
    EditMemory,
    RoutingTrace,
    wrapped_predict,
)
from .errors import ExplicitEditUnsupportedError
from .optim import tree_copy, tree_map2
from .predictor import (
    Prediction,
    SeqPredictorParams,
    _build_seq_batch,
    _nll_from_batch,
    predict,
    verbatim_prediction,
)
from .text import DEFAULT_MAX_LEN, Vocab, encode, tokenize

DEFAULT_DELTA_QA = 2.75
DEFAULT_DELTA_FC = 4.0


@dataclass(frozen=True)
class LUEntry:
    hidden: np.ndarray  # base encoder output for the edit input
    target_ids: tuple[int, ...]
    edit_id: str


@dataclass
class LUCache:
    """Threshold lookup table over base-model input representations."""

    entries: tuple[LUEntry, ...] = ()
    delta: float = DEFAULT_DELTA_QA

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    def __len__(self) -> int:
        return len(self.entries)


def build_lu_cache(
    edits: Sequence[EditDescriptor],
    base_params: SeqPredictorParams,
    vocab: Vocab,
    delta: float = DEFAULT_DELTA_QA,
    max_len: int = DEFAULT_MAX_LEN,
) -> LUCache:
    """Cache each pair edit's input representation and target tokens."""
    entries = []
    for edit in edits:
        if edit.kind != PAIR:
            raise ExplicitEditUnsupportedError(
                f"LU cannot cache explicit edit {edit.id!r}: no target to return"
            )
        hidden = encode(tokenize(edit.input_text, vocab, max_len), base_params.encoder)
        target = tuple(int(t) for t in tokenize(edit.target_text, vocab, max_len))
        entries.append(LUEntry(hidden=hidden, target_ids=target, edit_id=edit.id))
    return LUCache(entries=tuple(entries), delta=delta)


def lu_lookup(cache: LUCache, x: str, base_params: SeqPredictorParams, vocab: Vocab,
              max_len: int = DEFAULT_MAX_LEN) -> tuple[int | None, float | None]:
    """Nearest cached entry index and distance; (None, None) when empty."""
    if len(cache) == 0:
        return None, None
    hidden = encode(tokenize(x, vocab, max_len), base_params.encoder)
    dists = np.array([np.linalg.norm(hidden - e.hidden) for e in cache.entries])
    idx = int(np.argmin(dists))  # ties resolve to the lowest index
    return idx, float(dists[idx])


def lu_predict(
    cache: LUCache,
    x: str,
    base_params: SeqPredictorParams,
    vocab: Vocab,
    max_len: int = DEFAULT_MAX_LEN,
) -> Prediction:
    """Return the nearest cached target if within delta, else the base answer."""
    pred, _ = lu_predict_traced(cache, x, base_params, vocab, max_len)
    return pred


def lu_predict_traced(
    cache: LUCache,
    x: str,
    base_params: SeqPredictorParams,
    vocab: Vocab,
    max_len: int = DEFAULT_MAX_LEN,
) -> tuple[Prediction, RoutingTrace]:
    """LU prediction plus a routing trace (hit = override route)."""
    idx, dist = lu_lookup(cache, x, base_params, vocab, max_len)
    if idx is not None and dist < cache.delta:
        pred = verbatim_prediction(cache.entries[idx].target_ids, vocab, base_params.slots)
        trace = RoutingTrace(
            scores=(), winner=idx, top_score=dist, route=ROUTE_COUNTERFACTUAL
        )
        return pred, trace
    trace = RoutingTrace(scores=(), winner=None, top_score=dist, route=ROUTE_BASE)
    return predict(x, base_params, vocab, max_len), trace


def ft_edit(
    base_params: SeqPredictorParams,
    edits: Sequence[EditDescriptor],
    vocab: Vocab,
    *,
    epochs: int = 100,
    lr: float = 0.1,
    loss_target: float = 1e-3,
    max_len: int = DEFAULT_MAX_LEN,
) -> SeqPredictorParams:
    """Fine-tune a copy of the base model to reproduce each edit target.

    Steps on the mean edit NLL until it drops below ``loss_target`` or the
    step budget runs out.  The input parameters are never mutated.  Explicit
    edits have no target to fit and are rejected.
    """
    for edit in edits:
        if edit.kind != PAIR:
            raise ExplicitEditUnsupportedError(
                f"fine-tuning needs pair edits, got explicit edit {edit.id!r}"
            )
    tuned = tree_copy(base_params)
    if not edits:
        return tuned
    batch = [(e.input_text, e.target_text) for e in edits]
    sb = _build_seq_batch(batch, tuned, vocab, max_len, with_bad=False)
    for _ in range(epochs):
        loss, grad = _nll_from_batch(sb, tuned)
        if loss < loss_target:
            break
        tuned = tree_map2(lambda p, g: p - lr * g, tuned, grad)
    return tuned


def rp_predict(
    memory: EditMemory,
    x: str,
    classifier: ScopeClassifierParams,
    base_params: SeqPredictorParams,
    vocab: Vocab,
    max_len: int = DEFAULT_MAX_LEN,
) -> tuple[Prediction, RoutingTrace]:
    """Retrieve-and-prompt: identical routing, base model does the reading."""
    return wrapped_predict(
        memory, x, classifier, base_params, base_params, vocab, max_len,
        prompt_base=True,
    )


@dataclass
class LULookupEditor:
    """Evaluation adapter giving LU the routed-editor protocol."""

    vocab: Vocab
    cache: LUCache
    base_params: SeqPredictorParams
    max_len: int = DEFAULT_MAX_LEN
    edit_targets: dict[str, tuple[int, ...]] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        edits: Sequence[EditDescriptor],
        base_params: SeqPredictorParams,
        vocab: Vocab,
        delta: float = DEFAULT_DELTA_QA,
        max_len: int = DEFAULT_MAX_LEN,
    ) -> "LULookupEditor":
        cache = build_lu_cache(edits, base_params, vocab, delta, max_len)
        targets = {e.edit_id: e.target_ids for e in cache.entries}
        return cls(vocab=vocab, cache=cache, base_params=base_params,
                   max_len=max_len, edit_targets=targets)

    def predict(self, x: str) -> tuple[Prediction, RoutingTrace]:
        return lu_predict_traced(self.cache, x, self.base_params, self.vocab, self.max_len)

    def override_predict(self, edit: EditDescriptor, x: str) -> Prediction:
        return verbatim_prediction(
            self.edit_targets[edit.id], self.vocab, self.base_params.slots
        )

    def base_predict(self, x: str) -> Prediction:
        return predict(x, self.base_params, self.vocab, self.max_len)
