"""Canonical task records: one example = named text components + a gold label.

Four task shapes are supported:

* ``pair_classification``   - part1, part2          (premise/hypothesis style)
* ``single_sentence``       - part1
* ``multiple_choice``       - context, sent2_prefix, ending_0..ending_k
* ``extractive_qa``         - passage, question

``endings`` is accepted wherever a component name is expected and expands
to every ``ending_i`` of a multiple-choice record.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields

TASKS = (
    "pair_classification",
    "single_sentence",
    "multiple_choice",
    "extractive_qa",
)

LABEL_KINDS = ("class", "choice_index", "answer_spans")

_FIXED_COMPONENTS = {
    "pair_classification": ("part1", "part2"),
    "single_sentence": ("part1",),
    "extractive_qa": ("passage", "question"),
}

_ENDING_RE = re.compile(r"^ending_(\d+)$")

ENDINGS = "endings"  # pseudo-component: all ending_i of a multiple-choice record


class SchemaError(ValueError):
    """A record's fields do not fit its task's schema."""


class UnknownComponent(KeyError):
    """A component name is not part of the task schema."""


@dataclass(frozen=True)
class Label:
    """Gold or predicted label: a class name, a choice index, or answer spans."""

    kind: str
    value: object

    def __post_init__(self):
        if self.kind not in LABEL_KINDS:
            raise SchemaError(f"unknown label kind {self.kind!r}")
        if self.kind == "class" and not isinstance(self.value, str):
            raise SchemaError("class label value must be a string")
        if self.kind == "choice_index":
            if not isinstance(self.value, int) or isinstance(self.value, bool):
                raise SchemaError("choice_index value must be an integer")
        if self.kind == "answer_spans":
            if (
                not isinstance(self.value, (list, tuple))
                or not self.value
                or not all(isinstance(s, str) for s in self.value)
            ):
                raise SchemaError("answer_spans value must be a non-empty "
                                  "list of strings")
            object.__setattr__(self, "value", tuple(self.value))


@dataclass
class Record:
    """One task example with ordered named components and a gold label."""

    id: str
    task: str
    components: dict[str, str]
    gold: Label
    heuristic: str | None = None

    def __post_init__(self):
        validate_record(self)

    def ending_names(self) -> list[str]:
        names = [(int(m.group(1)), name) for name in self.components
                 if (m := _ENDING_RE.match(name))]
        return [name for _, name in sorted(names)]

    def expand_component(self, name: str) -> list[str]:
        """Resolve a component name, expanding the ``endings`` pseudo-name."""
        if name == ENDINGS:
            if self.task != "multiple_choice":
                raise UnknownComponent(
                    f"{ENDINGS!r} only applies to multiple_choice, "
                    f"not {self.task}"
                )
            return self.ending_names()
        if name not in self.components:
            raise UnknownComponent(
                f"component {name!r} not in task {self.task} schema"
            )
        return [name]

    def replace_components(self, updates: dict[str, str]) -> "Record":
        new_components = dict(self.components)
        for name, text in updates.items():
            if name not in new_components:
                raise UnknownComponent(name)
            new_components[name] = text
        out = _shallow_copy(self)
        out.components = new_components
        return out


@dataclass
class AugmentedRecord(Record):
    """A record plus provenance of how (and whether) it was perturbed."""

    source_id: str = ""
    perturbed_component: str | None = None
    n: int | None = None
    mode: str | None = None


def _shallow_copy(record: Record) -> Record:
    kwargs = {f.name: getattr(record, f.name) for f in fields(record)}
    return type(record)(**kwargs)


def validate_record(record: Record) -> None:
    if record.task not in TASKS:
        raise SchemaError(f"unknown task {record.task!r}")
    if not record.id:
        raise SchemaError("record id must be non-empty")
    names = list(record.components)
    for name, text in record.components.items():
        if not isinstance(text, str) or not text.strip():
            raise SchemaError(
                f"component {name!r} of record {record.id!r} is empty"
            )
    if record.task == "multiple_choice":
        fixed = [n for n in names if not _ENDING_RE.match(n)]
        if sorted(fixed) != ["context", "sent2_prefix"]:
            raise SchemaError(
                f"multiple_choice record {record.id!r} needs context, "
                f"sent2_prefix and ending_i components; got {names}"
            )
        endings = record.ending_names()
        if len(endings) < 2:
            raise SchemaError(
                f"multiple_choice record {record.id!r} needs >= 2 endings"
            )
        expected = [f"ending_{i}" for i in range(len(endings))]
        if endings != expected:
            raise SchemaError(
                f"record {record.id!r} ending indices must be contiguous "
                f"from 0; got {endings}"
            )
        if record.gold.kind != "choice_index":
            raise SchemaError(
                f"multiple_choice record {record.id!r} needs a "
                f"choice_index gold label"
            )
        if not 0 <= record.gold.value < len(endings):
            raise SchemaError(
                f"record {record.id!r} choice_index {record.gold.value} out "
                f"of range for {len(endings)} endings"
            )
    else:
        expected = _FIXED_COMPONENTS[record.task]
        if tuple(names) != expected:
            raise SchemaError(
                f"{record.task} record {record.id!r} needs components "
                f"{expected}; got {tuple(names)}"
            )
        if record.task == "extractive_qa":
            if record.gold.kind not in ("answer_spans", "class"):
                raise SchemaError(
                    f"extractive_qa record {record.id!r} needs answer_spans "
                    f"(or an invalid class) gold label"
                )
        elif record.gold.kind != "class":
            raise SchemaError(
                f"{record.task} record {record.id!r} needs a class gold label"
            )


def component_order(record: Record) -> list[str]:
    """Component names in schema order (endings sorted by index)."""
    if record.task == "multiple_choice":
        return ["context", "sent2_prefix"] + record.ending_names()
    return list(_FIXED_COMPONENTS[record.task])


def default_target_components(task: str) -> tuple[str, ...]:
    """Components the augmenter perturbs when none are named explicitly.

    For multiple choice, the second-sentence prefix is deliberately left
    out: only the context and the endings are permuted by default.
    """
    if task == "multiple_choice":
        return ("context", ENDINGS)
    return _FIXED_COMPONENTS[task]
