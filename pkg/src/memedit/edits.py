"""Edit descriptors and the record format shared by data generation and training.

An edit descriptor is either an input/target pair ("who leads france <sep>
ent-007") or an explicit behavior directive ("topic: topic-03 sentiment:
negative").  An EditRecord bundles one edit with its sampled in-scope and
out-of-scope inputs; records are persisted as JSON lines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .text import SEP_TOKEN

PAIR = "pair"
EXPLICIT = "explicit"


@dataclass(frozen=True)
class EditDescriptor:
    """One requested behavior change.

    ``pair`` edits carry the input being overridden and its new target;
    ``explicit`` edits carry a free-form directive.  ``text`` is the
    serialized form fed to the classifier and counterfactual model.
    """

    id: str
    kind: str
    input_text: str | None = None
    target_text: str | None = None
    directive: str | None = None

    def __post_init__(self) -> None:
        if self.kind == PAIR:
            if self.input_text is None or self.target_text is None or self.directive is not None:
                raise ValueError("pair edits need input_text and target_text only")
        elif self.kind == EXPLICIT:
            if self.directive is None or self.input_text is not None or self.target_text is not None:
                raise ValueError("explicit edits need a directive only")
        else:
            raise ValueError(f"unknown edit kind {self.kind!r}")
        if not self.text:
            raise ValueError("edit serializes to empty text")

    @property
    def text(self) -> str:
        if self.kind == PAIR:
            return f"{self.input_text} {SEP_TOKEN} {self.target_text}"
        return self.directive or ""

    @classmethod
    def pair(cls, id: str, input_text: str, target_text: str) -> "EditDescriptor":
        return cls(id=id, kind=PAIR, input_text=input_text, target_text=target_text)

    @classmethod
    def explicit(cls, id: str, directive: str) -> "EditDescriptor":
        return cls(id=id, kind=EXPLICIT, directive=directive)

    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": self.kind}
        if self.kind == PAIR:
            d["input_text"] = self.input_text
            d["target_text"] = self.target_text
        else:
            d["directive"] = self.directive
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EditDescriptor":
        return cls(
            id=d["id"],
            kind=d["kind"],
            input_text=d.get("input_text"),
            target_text=d.get("target_text"),
            directive=d.get("directive"),
        )


@dataclass(frozen=True)
class InScopeSample:
    """An input whose gold label the edit changes, with its post-edit label."""

    x: str
    y: str
    hard: bool = False


@dataclass(frozen=True)
class OutOfScopeSample:
    """An input the edit must leave alone; no label is needed."""

    x: str
    hard: bool = False


@dataclass
class EditRecord:
    """One edit plus sampled examples of its scope and its complement."""

    edit: EditDescriptor
    in_scope: list[InScopeSample] = field(default_factory=list)
    out_of_scope: list[OutOfScopeSample] = field(default_factory=list)
    task: str = "qa"
    split: str = "train"

    def to_dict(self) -> dict:
        return {
            "edit": self.edit.to_dict(),
            "in_scope": [{"x": s.x, "y": s.y, "hard": s.hard} for s in self.in_scope],
            "out_of_scope": [{"x": s.x, "hard": s.hard} for s in self.out_of_scope],
            "task": self.task,
            "split": self.split,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EditRecord":
        return cls(
            edit=EditDescriptor.from_dict(d["edit"]),
            in_scope=[InScopeSample(s["x"], s["y"], s.get("hard", False)) for s in d["in_scope"]],
            out_of_scope=[
                OutOfScopeSample(s["x"], s.get("hard", False)) for s in d["out_of_scope"]
            ],
            task=d.get("task", "qa"),
            split=d.get("split", "train"),
        )


def save_records(records: Iterable[EditRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict()) + "\n")


def load_records(path: str | Path) -> list[EditRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(EditRecord.from_dict(json.loads(line)))
    return records
