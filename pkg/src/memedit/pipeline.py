"""End-to-end helpers: dataset directories and component training.

The workflow is generate -> train base -> train classifier -> train
counterfactual -> apply edits -> evaluate.  These helpers keep the CLI, the
service, and the notebooks-style examples on one code path.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from .classifier import ScopeClassifierParams, train_classifier
from .config import RunConfig
from .datagen import (
    GeneratedDataset,
    cf_training_batch,
    convsent_cf_batch,
    gen_convsent,
    gen_fc,
    gen_qa,
    gen_qa_hard,
)
from .edits import EditRecord, load_records, save_records
from .editor import WrappedModel
from .predictor import SeqPredictorParams, train_predictor
from .text import Vocab

GENERATORS = {
    "qa": gen_qa,
    "qa-hard": gen_qa_hard,
    "qa_hard": gen_qa_hard,
    "fc": gen_fc,
    "convsent": gen_convsent,
}


def generate(task: str, seed: int, **kwargs) -> GeneratedDataset:
    if task not in GENERATORS:
        raise ValueError(f"unknown task {task!r}; choose from {sorted(GENERATORS)}")
    return GENERATORS[task](seed, **kwargs)


def save_dataset(ds: GeneratedDataset, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds.vocab.save(out / "vocab.txt")
    save_records(ds.records, out / "records.jsonl")
    with (out / "pretrain.jsonl").open("w", encoding="utf-8") as fh:
        for ctx, tgt in ds.pretrain:
            fh.write(json.dumps({"context": ctx, "target": tgt}) + "\n")
    meta = {"task": ds.task, "answer_slots": ds.answer_slots}
    (out / "meta.json").write_text(json.dumps(meta), encoding="utf-8")
    if ds.responses is not None:
        (out / "responses.json").write_text(json.dumps(ds.responses), encoding="utf-8")


def load_dataset(data_dir: str | Path) -> GeneratedDataset:
    d = Path(data_dir)
    meta = json.loads((d / "meta.json").read_text(encoding="utf-8"))
    pretrain = []
    with (d / "pretrain.jsonl").open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                row = json.loads(line)
                pretrain.append((row["context"], row["target"]))
    responses = None
    if (d / "responses.json").exists():
        responses = json.loads((d / "responses.json").read_text(encoding="utf-8"))
    return GeneratedDataset(
        task=meta["task"],
        vocab=Vocab.load(d / "vocab.txt"),
        pretrain=pretrain,
        records=load_records(d / "records.jsonl"),
        world=None,  # worlds are not persisted; regenerate to re-run oracles
        answer_slots=meta.get("answer_slots", 4),
        responses=responses,
    )


def split_records(ds: GeneratedDataset, split: str | None) -> list[EditRecord]:
    if split is None or split == "all":
        return list(ds.records)
    return [r for r in ds.records if r.split == split]


def train_base_model(ds: GeneratedDataset, cfg: RunConfig) -> SeqPredictorParams:
    result = train_predictor(
        ds.pretrain,
        ds.vocab,
        mode="nll",
        dim=cfg.dim,
        slots=ds.answer_slots,
        epochs=cfg.base_epochs,
        lr=cfg.base_lr,
        optimizer=cfg.optimizer,
        seed=cfg.seed,
        max_len=cfg.max_len,
    )
    return result.params


def train_scope_classifier(
    ds: GeneratedDataset, cfg: RunConfig, records: Sequence[EditRecord] | None = None
) -> ScopeClassifierParams:
    result = train_classifier(
        records if records is not None else split_records(ds, "train"),
        ds.vocab,
        variant=cfg.classifier_variant,
        dim=cfg.dim,
        epochs=cfg.classifier_epochs,
        lr=cfg.classifier_lr,
        optimizer=cfg.optimizer,
        seed=cfg.seed,
        max_len=cfg.max_len,
    )
    return result.params


def train_counterfactual(
    ds: GeneratedDataset, cfg: RunConfig, records: Sequence[EditRecord] | None = None
) -> SeqPredictorParams:
    recs = records if records is not None else split_records(ds, "train")
    if ds.task == "convsent":
        if ds.responses is None:
            raise ValueError("convsent counterfactual training needs responses")
        batch = convsent_cf_batch(recs, ds.responses)
        mode = "unlikelihood"
    else:
        batch = cf_training_batch(recs)
        mode = "nll"
    result = train_predictor(
        batch,
        ds.vocab,
        mode=mode,
        dim=cfg.dim,
        slots=ds.answer_slots,
        epochs=cfg.cf_epochs,
        lr=cfg.cf_lr,
        optimizer=cfg.optimizer,
        seed=cfg.seed,
        lam=cfg.unlikelihood_weight,
        max_len=cfg.max_len,
    )
    return result.params


def build_editor(
    ds: GeneratedDataset,
    classifier: ScopeClassifierParams,
    cf_params: SeqPredictorParams,
    base_params: SeqPredictorParams,
    records: Sequence[EditRecord] = (),
    *,
    max_len: int = 32,
    prompt_base: bool = False,
) -> WrappedModel:
    model = WrappedModel(
        vocab=ds.vocab,
        classifier=classifier,
        cf_params=cf_params,
        base_params=base_params,
        max_len=max_len,
        prompt_base=prompt_base,
    )
    if records:
        model.add([rec.edit for rec in records])
    return model
