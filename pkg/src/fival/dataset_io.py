"""Read, write and filter datasets.

The canonical on-disk format is one self-describing JSON object per line
(id, task, components, gold, plus provenance when present); GLUE-style
TSV, nested DROP JSON and SWAG CSV are import/export formats. Everything
is UTF-8; a leading byte-order mark is stripped on read.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .permute import EmptyInput, tokenize
from .records import AugmentedRecord, Label, Record, SchemaError

FORMATS = ("jsonl", "glue_tsv", "drop_json", "swag_csv")


class ParseError(ValueError):
    """A row or object in a dataset file could not be interpreted."""

    def __init__(self, line: int | None, reason: str):
        self.line = line
        self.reason = reason
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{reason}")


@dataclass(frozen=True)
class DatasetStats:
    """Before/after counts and per-component lower-median word counts."""

    original_count: int
    used_count: int
    median_words: dict[str, int]


# Column layouts for GLUE-style TSV files. "label_map" translates raw
# label strings; None keys pass through unchanged.
GLUE_PRESETS = {
    "canonical_pair": {
        "task": "pair_classification",
        "has_header": True,
        "columns": {"id": "id", "part1": "part1", "part2": "part2",
                     "label": "label"},
    },
    "canonical_single": {
        "task": "single_sentence",
        "has_header": True,
        "columns": {"id": "id", "part1": "part1", "label": "label"},
    },
    "cola": {
        # CoLA in_domain_dev.tsv: no header; source, label, star, sentence.
        "task": "single_sentence",
        "has_header": False,
        "columns": {"part1": 3, "label": 1},
    },
    "mnli": {
        "task": "pair_classification",
        "has_header": True,
        "columns": {"id": "pairID", "part1": "sentence1",
                     "part2": "sentence2", "label": "gold_label"},
    },
    "rte": {
        "task": "pair_classification",
        "has_header": True,
        "columns": {"id": "index", "part1": "sentence1",
                     "part2": "sentence2", "label": "label"},
    },
    "hans": {
        "task": "pair_classification",
        "has_header": True,
        "columns": {"id": "pairID", "part1": "sentence1",
                     "part2": "sentence2", "label": "gold_label",
                     "heuristic": "heuristic"},
    },
}


def _open_text(path) -> io.TextIOWrapper:
    return open(path, "r", encoding="utf-8-sig", newline="")


def word_count(text: str) -> int:
    """Whitespace tokens after trailing-punctuation detachment."""
    try:
        return len(tokenize(text).tokens)
    except EmptyInput:
        return 0


def _lower_median(values: Sequence[int]) -> int:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


# ---------------------------------------------------------------------------
# canonical jsonl


def _label_to_obj(label: Label) -> dict:
    value = list(label.value) if label.kind == "answer_spans" else label.value
    return {"kind": label.kind, "value": value}


def _label_from_obj(obj, line: int) -> Label:
    if not isinstance(obj, dict) or "kind" not in obj or "value" not in obj:
        raise ParseError(line, f"malformed label object: {obj!r}")
    return Label(obj["kind"], obj["value"])


def record_to_obj(record: Record) -> dict:
    obj = {
        "id": record.id,
        "task": record.task,
        "components": dict(record.components),
        "gold": _label_to_obj(record.gold),
    }
    if record.heuristic is not None:
        obj["heuristic"] = record.heuristic
    if isinstance(record, AugmentedRecord):
        obj["source_id"] = record.source_id
        obj["perturbed_component"] = record.perturbed_component
        obj["n"] = record.n
        obj["mode"] = record.mode
    return obj


def record_from_obj(obj: dict, line: int | None = None) -> Record:
    try:
        common = {
            "id": obj["id"],
            "task": obj["task"],
            "components": dict(obj["components"]),
            "gold": _label_from_obj(obj["gold"], line),
            "heuristic": obj.get("heuristic"),
        }
        if "source_id" in obj:
            return AugmentedRecord(
                **common,
                source_id=obj["source_id"],
                perturbed_component=obj.get("perturbed_component"),
                n=obj.get("n"),
                mode=obj.get("mode"),
            )
        return Record(**common)
    except (KeyError, TypeError) as exc:
        raise ParseError(line, f"missing or malformed field: {exc}") from exc


def _read_jsonl(path) -> Iterator[Record]:
    with _open_text(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON: {exc.msg}") from exc
            yield record_from_obj(obj, lineno)


def _write_jsonl(records: Iterable[Record], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for record in records:
            handle.write(json.dumps(record_to_obj(record),
                                    ensure_ascii=False,
                                    separators=(",", ":")))
            handle.write("\n")


# ---------------------------------------------------------------------------
# GLUE-style TSV


def _cell(row: list[str], key, lineno: int, header: list[str] | None):
    if isinstance(key, int):
        if key >= len(row):
            raise ParseError(lineno, f"row has {len(row)} columns, "
                                     f"need index {key}")
        return row[key]
    if header is None or key not in header:
        raise SchemaError(f"required column {key!r} missing from header")
    idx = header.index(key)
    if idx >= len(row):
        raise ParseError(lineno, f"row has {len(row)} columns, "
                                 f"need column {key!r} at {idx}")
    return row[idx]


def _read_glue_tsv(path, preset: str) -> Iterator[Record]:
    if preset not in GLUE_PRESETS:
        raise ValueError(f"unknown GLUE preset {preset!r}; "
                         f"have {sorted(GLUE_PRESETS)}")
    cfg = GLUE_PRESETS[preset]
    columns = cfg["columns"]
    with _open_text(path) as handle:
        header = None
        start = 1
        rows = (line.rstrip("\r\n").split("\t") for line in handle)
        if cfg["has_header"]:
            header = next(rows, None)
            if header is None:
                return
            start = 2
        for lineno, row in enumerate(rows, start=start):
            if row == [""]:
                continue
            components = {}
            for name in ("part1", "part2"):
                if name in columns:
                    components[name] = _cell(row, columns[name], lineno, header)
            label = _cell(row, columns["label"], lineno, header)
            rec_id = (_cell(row, columns["id"], lineno, header)
                      if "id" in columns else f"row-{lineno - start}")
            heuristic = (_cell(row, columns["heuristic"], lineno, header)
                         if "heuristic" in columns else None)
            try:
                yield Record(
                    id=rec_id,
                    task=cfg["task"],
                    components=components,
                    gold=Label("class", label),
                    heuristic=heuristic,
                )
            except SchemaError as exc:
                raise ParseError(lineno, str(exc)) from exc


def _check_tsv_safe(text: str, record_id: str) -> str:
    if "\t" in text or "\n" in text or "\r" in text:
        raise ValueError(
            f"record {record_id!r} contains a tab or newline and cannot be "
            f"written as TSV; use jsonl"
        )
    return text


def _write_glue_tsv(records: Iterable[Record], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        header: list[str] | None = None
        for record in records:
            if record.task not in ("pair_classification", "single_sentence"):
                raise ValueError(
                    f"glue_tsv holds classification pairs/sentences only; "
                    f"got task {record.task}"
                )
            if record.gold.kind != "class":
                raise ValueError("glue_tsv needs class labels")
            row_header = ["id", *record.components, "label"]
            if header is None:
                header = row_header
                handle.write("\t".join(header) + "\n")
            elif header != row_header:
                raise ValueError("glue_tsv cannot mix record schemas")
            cells = [record.id,
                     *record.components.values(),
                     record.gold.value]
            handle.write("\t".join(
                _check_tsv_safe(c, record.id) for c in cells) + "\n")
        if header is None:
            handle.write("id\tpart1\tlabel\n")


# ---------------------------------------------------------------------------
# DROP nested-passage JSON


def _drop_answer_spans(answer: dict) -> list[str]:
    number = str(answer.get("number", "") or "")
    if number:
        return [number]
    spans = [s for s in answer.get("spans", []) if s]
    if spans:
        return list(spans)
    date = answer.get("date", {}) or {}
    parts = [str(date.get(k, "") or "") for k in ("day", "month", "year")]
    joined = " ".join(p for p in parts if p)
    return [joined] if joined else []


def _read_drop_json(path) -> Iterator[Record]:
    with _open_text(path) as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.lineno, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise SchemaError("DROP file must be a passage-id -> object map")
    for passage_id, entry in data.items():
        if "passage" not in entry or "qa_pairs" not in entry:
            raise SchemaError(
                f"passage {passage_id!r} needs 'passage' and 'qa_pairs'"
            )
        passage = entry["passage"]
        for i, qa in enumerate(entry["qa_pairs"]):
            if "question" not in qa:
                raise SchemaError(
                    f"qa_pair {i} of passage {passage_id!r} has no question"
                )
            spans = _drop_answer_spans(qa.get("answer", {}))
            if not spans:
                raise SchemaError(
                    f"qa_pair {qa.get('query_id', i)!r} of passage "
                    f"{passage_id!r} has an empty answer"
                )
            yield Record(
                id=str(qa.get("query_id", f"{passage_id}-{i}")),
                task="extractive_qa",
                components={"passage": passage, "question": qa["question"]},
                gold=Label("answer_spans", spans),
            )


def _write_drop_json(records: Iterable[Record], path) -> None:
    by_passage: dict[str, dict] = {}
    for record in records:
        if record.task != "extractive_qa":
            raise ValueError("drop_json holds extractive_qa records only")
        passage = record.components["passage"]
        entry = by_passage.setdefault(
            passage, {"passage": passage, "qa_pairs": []}
        )
        entry["qa_pairs"].append({
            "question": record.components["question"],
            "query_id": record.id,
            "answer": {"number": "", "date": {}, "spans":
                       list(record.gold.value)},
        })
    data = {f"passage-{i}": entry
            for i, entry in enumerate(by_passage.values())}
    with open(path, "w", encoding="utf-8", newline="") as handle:
        json.dump(data, handle, ensure_ascii=False, indent=1)
        handle.write("\n")


# ---------------------------------------------------------------------------
# SWAG-style CSV


def _read_swag_csv(path) -> Iterator[Record]:
    with _open_text(path) as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            return
        fieldnames = list(reader.fieldnames)
        ending_cols = sorted(
            (name for name in fieldnames
             if name.startswith("ending") and name[6:].isdigit()),
            key=lambda name: int(name[6:]),
        )
        required = {"sent1", "sent2", "label"}
        missing = required - set(fieldnames)
        if missing or not ending_cols:
            raise SchemaError(
                f"swag_csv needs columns sent1, sent2, ending0.., label; "
                f"missing {sorted(missing) or 'ending columns'}"
            )
        for i, row in enumerate(reader):
            lineno = i + 2
            try:
                label = int(row["label"])
            except (TypeError, ValueError):
                raise ParseError(
                    lineno, f"label {row.get('label')!r} is not an integer"
                ) from None
            components = {"context": row["sent1"],
                          "sent2_prefix": row["sent2"]}
            for j, col in enumerate(ending_cols):
                components[f"ending_{j}"] = row[col]
            try:
                yield Record(
                    id=row.get("id") or f"row-{i}",
                    task="multiple_choice",
                    components=components,
                    gold=Label("choice_index", label),
                )
            except SchemaError as exc:
                raise ParseError(lineno, str(exc)) from exc


def _write_swag_csv(records: Iterable[Record], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = None
        n_endings = None
        for record in records:
            if record.task != "multiple_choice":
                raise ValueError("swag_csv holds multiple_choice records only")
            endings = record.ending_names()
            if writer is None:
                n_endings = len(endings)
                writer = csv.writer(handle)
                writer.writerow(["id", "sent1", "sent2",
                                 *(f"ending{i}" for i in range(n_endings)),
                                 "label"])
            elif len(endings) != n_endings:
                raise ValueError("swag_csv cannot mix ending counts")
            writer.writerow([
                record.id,
                record.components["context"],
                record.components["sent2_prefix"],
                *(record.components[name] for name in endings),
                record.gold.value,
            ])
        if writer is None:
            csv.writer(handle).writerow(
                ["id", "sent1", "sent2", "ending0", "ending1", "ending2",
                 "ending3", "label"])


# ---------------------------------------------------------------------------
# public API


def read_dataset(path, format: str, *, preset: str | None = None
                 ) -> Iterator[Record]:
    """Yield Records from ``path`` parsed as ``format``.

    ``preset`` selects a GLUE column layout (see ``GLUE_PRESETS``); it
    defaults to the canonical layout written by :func:`write_dataset`.
    """
    path = Path(path)
    if format == "jsonl":
        return _read_jsonl(path)
    if format == "glue_tsv":
        if preset is None:
            with _open_text(path) as handle:
                first = handle.readline().rstrip("\n").split("\t")
            preset = ("canonical_pair" if "part2" in first
                      else "canonical_single")
        return _read_glue_tsv(path, preset)
    if format == "drop_json":
        return _read_drop_json(path)
    if format == "swag_csv":
        return _read_swag_csv(path)
    raise ValueError(f"unknown format {format!r}; have {FORMATS}")


def write_dataset(records: Iterable[Record], path, format: str) -> None:
    """Write Records to ``path`` in ``format``; see module docstring."""
    path = Path(path)
    if format == "jsonl":
        _write_jsonl(records, path)
    elif format == "glue_tsv":
        _write_glue_tsv(records, path)
    elif format == "drop_json":
        _write_drop_json(records, path)
    elif format == "swag_csv":
        _write_swag_csv(records, path)
    else:
        raise ValueError(f"unknown format {format!r}; have {FORMATS}")


def filter_min_words(
    records: Iterable[Record],
    min_words: int,
    components: Sequence[str],
) -> tuple[list[Record], DatasetStats]:
    """Keep records whose named components all have >= min_words tokens.

    Word counts ignore detached trailing punctuation. Returns the kept
    records (input order preserved) and before/after stats with
    lower-median word counts over the original records.
    """
    if min_words < 1:
        raise ValueError(f"min_words must be >= 1; got {min_words}")
    kept: list[Record] = []
    counts: dict[str, list[int]] = {}
    original = 0
    for record in records:
        original += 1
        ok = True
        for name in components:
            for actual in record.expand_component(name):
                n_words = word_count(record.components[actual])
                counts.setdefault(actual, []).append(n_words)
                if n_words < min_words:
                    ok = False
        if ok:
            kept.append(record)
    medians = {name: _lower_median(values)
               for name, values in sorted(counts.items())}
    stats = DatasetStats(original_count=original, used_count=len(kept),
                         median_words=medians)
    return kept, stats
