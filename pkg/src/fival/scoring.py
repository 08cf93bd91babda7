"""Scoring of prediction files and report aggregation.

Metrics are percentages in [0, 100]:

* ``accuracy``    - predictions equal to the gold label;
* ``pct_invalid`` - predictions carrying an invalid label;
* ``exact_match`` - normalized answer bags equal to the gold bag (QA).

Reports are flat rows keyed by (dataset, variant, component, n, metric);
multi-seed runs aggregate to mean and population standard deviation.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import string
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Sequence

from .records import Record

HANS_HEURISTICS = ("lexical_overlap", "subsequence", "constituent")
HANS_ENTAILMENT = "entailment"
HANS_NON_ENTAILMENT = "non-entailment"

CSV_COLUMNS = ("dataset", "variant", "component", "n", "metric", "value",
               "count", "mean", "std", "n_seeds")


class MissingPrediction(KeyError):
    """An evaluation record has no prediction."""


class DuplicatePrediction(ValueError):
    """A record id appears more than once in the prediction file."""


class KeyMismatch(ValueError):
    """Reports being aggregated do not share identical row keys."""


class EmptyReport(ValueError):
    """A report with no rows cannot be rendered."""


class UnknownHeuristic(ValueError):
    """A HANS record carries an unrecognized heuristic tag."""


@dataclass(frozen=True)
class PredictionRecord:
    """One model output: record id plus a label, index or answer list."""

    id: str
    predicted: object
    confidence: float | None = None

    def __post_init__(self):
        if self.confidence is not None and not 0 <= self.confidence <= 1:
            raise ValueError(
                f"confidence must be in [0,1]; got {self.confidence}"
            )
        if isinstance(self.predicted, list):
            object.__setattr__(self, "predicted", tuple(self.predicted))


@dataclass(frozen=True)
class MetricsRow:
    dataset: str
    variant: str
    component: str | None
    n: int | None
    metric: str
    value: float
    count: int
    mean: float | None = None
    std: float | None = None
    n_seeds: int | None = None

    def key(self) -> tuple:
        return (self.dataset, self.variant, self.component, self.n,
                self.metric)


def read_predictions(path) -> list[PredictionRecord]:
    out = []
    with open(path, "r", encoding="utf-8-sig") as handle:
        for line in handle:
            if not line.strip():
                continue
            obj = json.loads(line)
            predicted = obj["predicted"]
            if isinstance(predicted, list):
                predicted = tuple(predicted)
            out.append(PredictionRecord(obj["id"], predicted,
                                        obj.get("confidence")))
    return out


def write_predictions(predictions: Iterable[PredictionRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for pred in predictions:
            obj: dict = {"id": pred.id}
            obj["predicted"] = (list(pred.predicted)
                                if isinstance(pred.predicted, tuple)
                                else pred.predicted)
            if pred.confidence is not None:
                obj["confidence"] = pred.confidence
            handle.write(json.dumps(obj, ensure_ascii=False,
                                    separators=(",", ":")) + "\n")


def _index_predictions(
    eval_set: Sequence[Record], predictions: Iterable[PredictionRecord]
) -> dict[str, PredictionRecord]:
    by_id: dict[str, PredictionRecord] = {}
    for pred in predictions:
        if pred.id in by_id:
            raise DuplicatePrediction(f"duplicate prediction for id "
                                      f"{pred.id!r}")
        by_id[pred.id] = pred
    for record in eval_set:
        if record.id not in by_id:
            raise MissingPrediction(f"no prediction for id {record.id!r}")
    return by_id


def _pct(hits: int, total: int) -> float:
    return 100.0 * hits / total


def _is_invalid(predicted: object, invalid_labels: frozenset[str]) -> bool:
    return str(predicted) in invalid_labels


def _matches_gold(predicted: object, record: Record) -> bool:
    gold = record.gold
    if gold.kind == "class":
        return predicted == gold.value
    if gold.kind == "choice_index":
        return isinstance(predicted, int) and predicted == gold.value
    return False


def score(
    eval_set: Sequence[Record],
    predictions: Iterable[PredictionRecord],
    invalid_labels: Iterable[str] = ("invalid",),
    *,
    dataset: str = "",
    variant: str = "dev",
    component: str | None = None,
    n: int | None = None,
) -> list[MetricsRow]:
    """Accuracy and percent-invalid over one evaluation variant."""
    eval_set = list(eval_set)
    if not eval_set:
        raise ValueError("cannot score an empty evaluation set")
    invalid = frozenset(invalid_labels)
    by_id = _index_predictions(eval_set, predictions)
    correct = 0
    flagged = 0
    for record in eval_set:
        predicted = by_id[record.id].predicted
        if _matches_gold(predicted, record):
            correct += 1
        if _is_invalid(predicted, invalid):
            flagged += 1
    total = len(eval_set)
    common = dict(dataset=dataset, variant=variant, component=component, n=n)
    return [
        MetricsRow(metric="accuracy", value=_pct(correct, total),
                   count=total, **common),
        MetricsRow(metric="pct_invalid", value=_pct(flagged, total),
                   count=total, **common),
    ]


_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation and articles, collapse whitespace."""
    text = text.lower()
    text = text.translate(_PUNCT_TABLE)
    text = _ARTICLE_RE.sub(" ", text)
    return " ".join(text.split())


def _answer_bag(spans: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(normalize_answer(s) for s in spans))


def score_drop_em(
    eval_set: Sequence[Record],
    predictions: Iterable[PredictionRecord],
    invalid_labels: Iterable[str] = ("invalid", "invalid_passage",
                                     "invalid_question"),
    *,
    dataset: str = "",
    variant: str = "dev",
    component: str | None = None,
    n: int | None = None,
) -> list[MetricsRow]:
    """Exact match over answer-span bags, plus percent-invalid.

    A prediction is either a list of answer spans or an invalid label;
    invalid predictions score 0 on EM and count toward pct_invalid.
    Comparison is order-insensitive over normalized span multisets.
    """
    eval_set = list(eval_set)
    if not eval_set:
        raise ValueError("cannot score an empty evaluation set")
    if any(r.task != "extractive_qa" for r in eval_set):
        raise ValueError("score_drop_em applies to extractive_qa records")
    invalid = frozenset(invalid_labels)
    by_id = _index_predictions(eval_set, predictions)
    hits = 0
    flagged = 0
    for record in eval_set:
        predicted = by_id[record.id].predicted
        if isinstance(predicted, str):
            if _is_invalid(predicted, invalid):
                flagged += 1
                continue
            spans: tuple[str, ...] = (predicted,)
        else:
            spans = tuple(predicted)
        if _answer_bag(spans) == _answer_bag(record.gold.value):
            hits += 1
    total = len(eval_set)
    common = dict(dataset=dataset, variant=variant, component=component, n=n)
    return [
        MetricsRow(metric="exact_match", value=_pct(hits, total),
                   count=total, **common),
        MetricsRow(metric="pct_invalid", value=_pct(flagged, total),
                   count=total, **common),
    ]


def _collapse_nli(label: object) -> object:
    if label in ("neutral", "contradiction"):
        return HANS_NON_ENTAILMENT
    return label


def score_hans(
    eval_set: Sequence[Record],
    predictions: Iterable[PredictionRecord],
    *,
    dataset: str = "hans",
) -> list[MetricsRow]:
    """Per-(heuristic, gold-label) accuracy.

    Records must carry a ``heuristic`` tag and a gold label of
    ``entailment`` or ``non-entailment``; predicted ``neutral`` and
    ``contradiction`` collapse to ``non-entailment``.
    """
    eval_set = list(eval_set)
    if not eval_set:
        raise ValueError("cannot score an empty evaluation set")
    by_id = _index_predictions(eval_set, predictions)
    hits: dict[tuple[str, str], int] = {}
    totals: dict[tuple[str, str], int] = {}
    for record in eval_set:
        if record.heuristic not in HANS_HEURISTICS:
            raise UnknownHeuristic(
                f"record {record.id!r} has heuristic {record.heuristic!r}; "
                f"expected one of {HANS_HEURISTICS}"
            )
        gold = record.gold.value
        if gold not in (HANS_ENTAILMENT, HANS_NON_ENTAILMENT):
            raise ValueError(
                f"record {record.id!r} gold label {gold!r} must be "
                f"entailment or non-entailment"
            )
        key = (record.heuristic, gold)
        totals[key] = totals.get(key, 0) + 1
        predicted = _collapse_nli(by_id[record.id].predicted)
        if predicted == gold:
            hits[key] = hits.get(key, 0) + 1
    rows = []
    for heuristic in HANS_HEURISTICS:
        for gold in (HANS_ENTAILMENT, HANS_NON_ENTAILMENT):
            key = (heuristic, gold)
            if key not in totals:
                continue
            rows.append(MetricsRow(
                dataset=dataset, variant=heuristic, component=gold, n=None,
                metric="accuracy",
                value=_pct(hits.get(key, 0), totals[key]),
                count=totals[key],
            ))
    return rows


def format_hans_table(reports: Mapping[str, Sequence[MetricsRow]]) -> str:
    """Markdown grid: one row block per model, gold labels as rows,
    heuristics as columns."""
    lines = ["| Model | Gold | Lexical Overlap | Subsequence | Constituent |",
             "| --- | --- | --- | --- | --- |"]
    for model, rows in reports.items():
        cells = {(r.variant, r.component): r.value for r in rows}
        for gold, shown in ((HANS_ENTAILMENT, "Entailment"),
                            (HANS_NON_ENTAILMENT, "Non-Entailment")):
            values = [
                _format_value(cells[(h, gold)]) if (h, gold) in cells else "-"
                for h in HANS_HEURISTICS
            ]
            lines.append(f"| {model} | {shown} | " + " | ".join(values)
                         + " |")
    return "\n".join(lines) + "\n"


def _exact_mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def aggregate(reports: Sequence[Sequence[MetricsRow]]) -> list[MetricsRow]:
    """Merge per-seed reports into mean / population-std rows.

    All reports must carry exactly the same row keys; rows come back
    sorted by key, so the result does not depend on report order.
    """
    if not reports:
        raise ValueError("no reports to aggregate")
    keyed: list[dict[tuple, MetricsRow]] = []
    for report in reports:
        rows = {}
        for row in report:
            if row.key() in rows:
                raise KeyMismatch(f"duplicate row key {row.key()} within "
                                  f"one report")
            rows[row.key()] = row
        keyed.append(rows)
    base_keys = set(keyed[0])
    for rows in keyed[1:]:
        if set(rows) != base_keys:
            missing = base_keys.symmetric_difference(rows)
            raise KeyMismatch(f"reports do not share row keys; "
                              f"mismatched: {sorted(missing)[:5]}")

    def sort_key(key: tuple):
        dataset, variant, component, n, metric = key
        return (dataset, variant, component or "", n if n is not None else -1,
                metric)

    out = []
    for key in sorted(base_keys, key=sort_key):
        values = sorted(rows[key].value for rows in keyed)
        mean = _exact_mean(values)
        std = math.sqrt(_exact_mean([(v - mean) ** 2 for v in values]))
        out.append(replace(keyed[0][key], value=mean, mean=mean, std=std,
                           n_seeds=len(reports)))
    return out


def _format_value(value: float, places: int = 2) -> str:
    """Fixed-point with half-up rounding (97.625 -> 97.63)."""
    quantum = Decimal(1).scaleb(-places)
    return str(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def _row_cells(row: MetricsRow) -> list[str]:
    return [
        row.dataset,
        row.variant,
        row.component if row.component is not None else "",
        str(row.n) if row.n is not None else "",
        row.metric,
        _format_value(row.value),
        str(row.count),
        _format_value(row.mean) if row.mean is not None else "",
        _format_value(row.std, 4) if row.std is not None else "",
        str(row.n_seeds) if row.n_seeds is not None else "",
    ]


def render_csv(rows: Sequence[MetricsRow]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(_row_cells(row))
    return buf.getvalue().encode("utf-8")


def read_report_csv(path) -> list[MetricsRow]:
    rows = []
    with open(path, "r", encoding="utf-8-sig", newline="") as handle:
        for obj in csv.DictReader(handle):
            rows.append(MetricsRow(
                dataset=obj["dataset"],
                variant=obj["variant"],
                component=obj["component"] or None,
                n=int(obj["n"]) if obj["n"] else None,
                metric=obj["metric"],
                value=float(obj["value"]),
                count=int(obj["count"]),
                mean=float(obj["mean"]) if obj["mean"] else None,
                std=float(obj["std"]) if obj["std"] else None,
                n_seeds=int(obj["n_seeds"]) if obj["n_seeds"] else None,
            ))
    return rows


def render_markdown(rows: Sequence[MetricsRow]) -> bytes:
    """Five display columns, plus mean/std/n_seeds when aggregated."""
    aggregated = any(row.n_seeds is not None for row in rows)
    header = ["dataset", "variant", "metric", "value", "count"]
    if aggregated:
        header += ["mean", "std", "n_seeds"]
    lines = ["| " + " | ".join(header) + " |",
             "| " + " | ".join("---" for _ in header) + " |"]
    for row in rows:
        cells = [row.dataset, row.variant, row.metric,
                 _format_value(row.value), str(row.count)]
        if aggregated:
            cells += [
                _format_value(row.mean) if row.mean is not None else "",
                _format_value(row.std, 4) if row.std is not None else "",
                str(row.n_seeds) if row.n_seeds is not None else "",
            ]
        lines.append("| " + " | ".join(cells) + " |")
    return ("\n".join(lines) + "\n").encode("utf-8")


def render_svg_bars(rows: Sequence[MetricsRow]) -> bytes:
    """One grouped bar chart per dataset; error bars where std is present."""
    datasets: dict[str, list[MetricsRow]] = {}
    for row in rows:
        datasets.setdefault(row.dataset or "(unnamed)", []).append(row)

    metric_names = sorted({row.metric for row in rows})
    palette = ("#4472c4", "#ed7d31", "#70ad47", "#a5a5a5")
    colors = {m: palette[i % len(palette)]
              for i, m in enumerate(metric_names)}

    bar_w = 22
    group_gap = 18
    chart_h = 200
    top = 30
    label_h = 70
    parts = []
    y_offset = 0
    width = 80
    for name, dat_rows in datasets.items():
        groups: dict[str, list[MetricsRow]] = {}
        for row in dat_rows:
            groups.setdefault(row.variant, []).append(row)
        x = 60
        x_end = 60 + sum(len(v) * (bar_w + 4) + group_gap
                         for v in groups.values())
        parts.append(f'<text x="10" y="{y_offset + 18}" '
                     f'font-size="14" font-weight="bold">{name}</text>')
        base_y = y_offset + top + chart_h
        parts.append(f'<line x1="50" y1="{base_y}" x2="{x_end}" '
                     f'y2="{base_y}" stroke="black"/>')
        for variant, vrows in groups.items():
            group_x = x
            for row in vrows:
                h = row.value / 100.0 * chart_h
                bar_y = base_y - h
                parts.append(
                    f'<rect class="bar" x="{x}" y="{bar_y:.2f}" '
                    f'width="{bar_w}" height="{h:.2f}" '
                    f'fill="{colors[row.metric]}"/>'
                )
                if row.std is not None:
                    err = row.std / 100.0 * chart_h
                    cx = x + bar_w / 2
                    parts.append(
                        f'<line class="error-bar" x1="{cx}" '
                        f'y1="{bar_y - err:.2f}" x2="{cx}" '
                        f'y2="{bar_y + err:.2f}" stroke="black" '
                        f'stroke-width="2"/>'
                    )
                x += bar_w + 4
            mid = (group_x + x - 4) / 2
            parts.append(
                f'<text x="{mid:.1f}" y="{base_y + 14}" font-size="10" '
                f'text-anchor="middle">{variant}</text>'
            )
            x += group_gap
        width = max(width, x + 40)
        y_offset += top + chart_h + label_h
    legend_y = y_offset + 10
    for i, metric in enumerate(metric_names):
        parts.append(f'<rect x="{60 + i * 140}" y="{legend_y}" width="12" '
                     f'height="12" fill="{colors[metric]}"/>')
        parts.append(f'<text x="{76 + i * 140}" y="{legend_y + 11}" '
                     f'font-size="11">{metric}</text>')
    height = legend_y + 30
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" font-family="sans-serif">'
        + "".join(parts) + "</svg>"
    )
    return svg.encode("utf-8")


def render_report(rows: Sequence[MetricsRow], format: str) -> bytes:
    """Serialize a report as csv (canonical), markdown or svg_bars."""
    if not rows:
        raise EmptyReport("report has no rows")
    if format == "csv":
        return render_csv(rows)
    if format == "markdown":
        return render_markdown(rows)
    if format == "svg_bars":
        return render_svg_bars(rows)
    raise ValueError(f"unknown report format {format!r}; "
                     f"have csv, markdown, svg_bars")
