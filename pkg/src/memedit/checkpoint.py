"""Checkpoint files for classifiers and predictors.

One structured JSON text file per model: a kind tag, the variant and
dimensions, then the parameter arrays row-major.  Floats are written with
shortest round-trip precision, so save/load is bit-faithful.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .classifier import ScopeClassifierParams
from .predictor import SeqPredictorParams
from .text import EncoderParams

CLASSIFIER_KIND = "scope-classifier"
PREDICTOR_KIND = "sequence-predictor"


def _arr(v) -> np.ndarray:
    return np.asarray(v, dtype=np.float64)


def save_classifier(params: ScopeClassifierParams, path: str | Path) -> None:
    doc = {
        "kind": CLASSIFIER_KIND,
        "variant": params.variant,
        "vocab_size": params.encoder.vocab_size,
        "dim": params.encoder.dim,
        "embedding": params.encoder.embedding.tolist(),
        "projection": params.encoder.projection.tolist(),
    }
    if params.gamma_raw is not None:
        doc["gamma_raw"] = float(params.gamma_raw)
    if params.bilinear is not None:
        doc["bilinear"] = params.bilinear.tolist()
        doc["bias"] = float(params.bias)
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_classifier(path: str | Path) -> ScopeClassifierParams:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("kind") != CLASSIFIER_KIND:
        raise ValueError(f"{path} is not a classifier checkpoint")
    encoder = EncoderParams(
        embedding=_arr(doc["embedding"]), projection=_arr(doc["projection"])
    )
    if "gamma_raw" in doc:
        return ScopeClassifierParams(
            variant=doc["variant"], encoder=encoder, gamma_raw=np.array(doc["gamma_raw"])
        )
    return ScopeClassifierParams(
        variant=doc["variant"],
        encoder=encoder,
        bilinear=_arr(doc["bilinear"]),
        bias=np.array(doc["bias"]),
    )


def save_predictor(params: SeqPredictorParams, path: str | Path) -> None:
    doc = {
        "kind": PREDICTOR_KIND,
        "vocab_size": params.vocab_size,
        "dim": params.encoder.dim,
        "slots": params.slots,
        "embedding": params.encoder.embedding.tolist(),
        "projection": params.encoder.projection.tolist(),
        "slot_weights": params.slot_weights.tolist(),
        "slot_bias": params.slot_bias.tolist(),
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_predictor(path: str | Path) -> SeqPredictorParams:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("kind") != PREDICTOR_KIND:
        raise ValueError(f"{path} is not a predictor checkpoint")
    return SeqPredictorParams(
        encoder=EncoderParams(
            embedding=_arr(doc["embedding"]), projection=_arr(doc["projection"])
        ),
        slot_weights=_arr(doc["slot_weights"]),
        slot_bias=_arr(doc["slot_bias"]),
    )
