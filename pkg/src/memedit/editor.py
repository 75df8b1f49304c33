"""Edit memory and the routed forward pass around a black-box base model.

The wrapped model scores every cached edit against the incoming input with
the scope classifier.  If the best score reaches 0.5 the counterfactual model
is run on the winning edit concatenated with the input; otherwise the base
model answers and is guaranteed untouched.  Ties at the top score go to the
earliest-inserted edit.  Memories are immutable snapshots: mutation helpers
return new instances, which is what makes batched and sequential edit
application provably identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .classifier import (
    ScopeClassifierParams,
    classifier_fingerprint,
    score_encoded,
)
from .edits import EditDescriptor
from .errors import DuplicateEditIdError, StaleClassifierError
from .predictor import Prediction, SeqPredictorParams, predict, slot_log_distributions
from .text import DEFAULT_MAX_LEN, SEP_TOKEN, Vocab, encode, tokenize

ROUTE_BASE = "base"
ROUTE_COUNTERFACTUAL = "counterfactual"

ROUTING_THRESHOLD = 0.5


@dataclass(frozen=True)
class MemoryEntry:
    edit: EditDescriptor
    embedding: np.ndarray  # encoder output for the serialized edit text


@dataclass(frozen=True)
class EditMemory:
    """Ordered, immutable cache of edits with precomputed embeddings.

    ``classifier_hash`` pins the classifier weights the embeddings were
    computed under; scoring against different weights raises
    StaleClassifierError instead of silently mixing geometries.
    """

    entries: tuple[MemoryEntry, ...] = ()
    classifier_hash: str | None = None

    @classmethod
    def empty(cls) -> "EditMemory":
        return cls()

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def insertion_count(self) -> int:
        return len(self.entries)

    def ids(self) -> tuple[str, ...]:
        return tuple(e.edit.id for e in self.entries)


def _check_hash(memory: EditMemory, classifier: ScopeClassifierParams) -> str:
    fp = classifier_fingerprint(classifier)
    if memory.classifier_hash is not None and memory.classifier_hash != fp:
        raise StaleClassifierError(
            "memory embeddings were cached under different classifier weights"
        )
    return fp


def add_edits(
    memory: EditMemory,
    edits: Sequence[EditDescriptor],
    classifier: ScopeClassifierParams,
    vocab: Vocab,
    max_len: int = DEFAULT_MAX_LEN,
) -> EditMemory:
    """Append edits (embedding each descriptor) and return the new memory.

    All-or-nothing: an id collision raises DuplicateEditIdError and leaves
    the input memory untouched.  Nothing else in the system is mutated; in
    particular the base model is never consulted.
    """
    fp = _check_hash(memory, classifier)
    seen = set(memory.ids())
    new_entries = []
    for edit in edits:
        if edit.id in seen:
            raise DuplicateEditIdError(f"duplicate edit id {edit.id!r}")
        seen.add(edit.id)
        emb = encode(tokenize(edit.text, vocab, max_len), classifier.encoder)
        new_entries.append(MemoryEntry(edit=edit, embedding=emb))
    return EditMemory(
        entries=memory.entries + tuple(new_entries),
        classifier_hash=fp,
    )


def flush(memory: EditMemory) -> EditMemory:
    """Drop every cached edit; model parameters are untouched."""
    return EditMemory.empty()


@dataclass(frozen=True)
class RoutingTrace:
    """Per-edit scores and the routing decision for one input."""

    scores: tuple[float, ...]
    winner: int | None
    top_score: float | None
    route: str

    def describe(self) -> str:
        if self.route == ROUTE_BASE and self.winner is None:
            return "base (no edit in scope)"
        return f"{self.route} via edit #{self.winner} (score {self.top_score:.4f})"


def route(
    memory: EditMemory,
    x: str,
    classifier: ScopeClassifierParams,
    vocab: Vocab,
    max_len: int = DEFAULT_MAX_LEN,
) -> RoutingTrace:
    """Score every cached edit against ``x`` and pick a route.

    An empty memory always routes to the base model.  The winner is the
    lowest index attaining the maximum score; the counterfactual route is
    taken exactly when that score reaches 0.5.
    """
    if len(memory) == 0:
        return RoutingTrace(scores=(), winner=None, top_score=None, route=ROUTE_BASE)
    _check_hash(memory, classifier)
    x_enc = encode(tokenize(x, vocab, max_len), classifier.encoder)
    scores = tuple(
        score_encoded(entry.embedding, x_enc, classifier) for entry in memory.entries
    )
    winner = int(np.argmax(scores))  # argmax returns the first (lowest) index
    top = scores[winner]
    routed = ROUTE_COUNTERFACTUAL if top >= ROUTING_THRESHOLD else ROUTE_BASE
    return RoutingTrace(scores=scores, winner=winner, top_score=top, route=routed)


def counterfactual_context(edit: EditDescriptor, x: str) -> str:
    return f"{edit.text} {SEP_TOKEN} {x}"


def wrapped_predict(
    memory: EditMemory,
    x: str,
    classifier: ScopeClassifierParams,
    cf_params: SeqPredictorParams,
    base_params: SeqPredictorParams,
    vocab: Vocab,
    max_len: int = DEFAULT_MAX_LEN,
    *,
    prompt_base: bool = False,
) -> tuple[Prediction, RoutingTrace]:
    """Routed prediction: base model, or counterfactual on the winning edit.

    Only the single most relevant edit ever conditions the counterfactual
    model.  With ``prompt_base`` the base model is run on the edit-prefixed
    context instead (the retrieve-and-prompt ablation); routing is shared.
    """
    trace = route(memory, x, classifier, vocab, max_len)
    if trace.route == ROUTE_BASE:
        return predict(x, base_params, vocab, max_len), trace
    edit = memory.entries[trace.winner].edit
    context = counterfactual_context(edit, x)
    params = base_params if prompt_base else cf_params
    return predict(context, params, vocab, max_len), trace


def wrapped_distributions(
    memory: EditMemory,
    x: str,
    classifier: ScopeClassifierParams,
    cf_params: SeqPredictorParams,
    base_params: SeqPredictorParams,
    vocab: Vocab,
    max_len: int = DEFAULT_MAX_LEN,
    *,
    prompt_base: bool = False,
) -> tuple[np.ndarray, RoutingTrace]:
    """Per-slot log distributions of the routed model (for likelihood metrics)."""
    trace = route(memory, x, classifier, vocab, max_len)
    if trace.route == ROUTE_BASE:
        return slot_log_distributions(x, base_params, vocab, max_len), trace
    edit = memory.entries[trace.winner].edit
    context = counterfactual_context(edit, x)
    params = base_params if prompt_base else cf_params
    return slot_log_distributions(context, params, vocab, max_len), trace


def verify_cache(
    memory: EditMemory,
    classifier: ScopeClassifierParams,
    vocab: Vocab,
    max_len: int = DEFAULT_MAX_LEN,
) -> bool:
    """True when every cached embedding equals a fresh encode of its edit."""
    _check_hash(memory, classifier)
    return all(
        np.array_equal(
            entry.embedding,
            encode(tokenize(entry.edit.text, vocab, max_len), classifier.encoder),
        )
        for entry in memory.entries
    )


@dataclass
class WrappedModel:
    """Convenience bundle of everything the routed editor needs."""

    vocab: Vocab
    classifier: ScopeClassifierParams
    cf_params: SeqPredictorParams
    base_params: SeqPredictorParams
    memory: EditMemory = field(default_factory=EditMemory.empty)
    max_len: int = DEFAULT_MAX_LEN
    prompt_base: bool = False

    def add(self, edits: Sequence[EditDescriptor]) -> "WrappedModel":
        self.memory = add_edits(self.memory, edits, self.classifier, self.vocab, self.max_len)
        return self

    def flush(self) -> "WrappedModel":
        self.memory = flush(self.memory)
        return self

    def predict(self, x: str) -> tuple[Prediction, RoutingTrace]:
        return wrapped_predict(
            self.memory, x, self.classifier, self.cf_params, self.base_params,
            self.vocab, self.max_len, prompt_base=self.prompt_base,
        )

    def distributions(self, x: str) -> tuple[np.ndarray, RoutingTrace]:
        return wrapped_distributions(
            self.memory, x, self.classifier, self.cf_params, self.base_params,
            self.vocab, self.max_len, prompt_base=self.prompt_base,
        )

    def override_predict(self, edit: EditDescriptor, x: str) -> Prediction:
        """Counterfactual prediction with retrieval forced to ``edit``."""
        params = self.base_params if self.prompt_base else self.cf_params
        return predict(counterfactual_context(edit, x), params, self.vocab, self.max_len)

    def base_predict(self, x: str) -> Prediction:
        return predict(x, self.base_params, self.vocab, self.max_len)


def save_memory(memory: EditMemory, path: str | Path) -> None:
    """Persist one JSON record per edit; embeddings round-trip bitwise."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for entry in memory.entries:
            rec = entry.edit.to_dict()
            rec["embedding"] = [float(v) for v in entry.embedding]
            rec["classifier_hash"] = memory.classifier_hash
            fh.write(json.dumps(rec) + "\n")


def load_memory(path: str | Path) -> EditMemory:
    entries: list[MemoryEntry] = []
    hash_: str | None = None
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            line_hash = rec.pop("classifier_hash")
            emb = np.asarray(rec.pop("embedding"), dtype=np.float64)
            if hash_ is None:
                hash_ = line_hash
            elif hash_ != line_hash:
                raise StaleClassifierError("memory file mixes classifier versions")
            entries.append(MemoryEntry(edit=EditDescriptor.from_dict(rec), embedding=emb))
    return EditMemory(entries=tuple(entries), classifier_hash=hash_)
