"""Forced-invalidation data augmentation.

Pairs every valid training record with permuted copies labelled invalid
(1:1 by default, uniform over the configured n-gram sizes), then splits
the combined set 90/10 into train and dev. Multiple-choice records are
not relabelled: an extra ending ``"is invalid."`` is appended to every
record and invalid copies point their gold index at it.

All randomness is derived from ``master_seed``; per-record seeds come
from ``derive_seed(master_seed, source_id, "augment", occurrence)`` so
output is independent of processing order.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from . import permute as perm
from .dataset_io import word_count
from .records import (
    AugmentedRecord,
    Label,
    Record,
    default_target_components,
)
from .rng import SplitMix64, derive_seed

INVALID_LABEL = "invalid"
INVALID_ENDING_TEXT = "is invalid."


class NothingPermutable(ValueError):
    """No input record admits any configured perturbation."""


class UnsupportedTask(ValueError):
    """The task has no class-label space to extend."""


@dataclass(frozen=True)
class AugmentConfig:
    """Knobs for the augmentation pass; defaults mirror the standard recipe."""

    master_seed: int
    ratio: float = 1.0
    n_set: tuple[int, ...] = (1, 2, 3)
    invalid_label_mode: str = "single"
    target_components: tuple[str, ...] | None = None
    min_words: int = 3
    split_fraction: float = 0.9
    mode: str = "differs"
    split_before_augment: bool = False

    def __post_init__(self):
        if self.ratio <= 0:
            raise ValueError(f"ratio must be positive; got {self.ratio}")
        if not self.n_set or any(n not in (1, 2, 3) for n in self.n_set):
            raise ValueError(f"n_set must be a non-empty subset of "
                             f"{{1,2,3}}; got {self.n_set}")
        if self.invalid_label_mode not in ("single", "per_component"):
            raise ValueError(f"invalid_label_mode must be 'single' or "
                             f"'per_component'; got {self.invalid_label_mode}")
        if not 0 < self.split_fraction < 1:
            raise ValueError(f"split_fraction must be in (0,1); "
                             f"got {self.split_fraction}")
        if self.mode not in perm.MODES:
            raise ValueError(f"mode must be one of {perm.MODES}")
        object.__setattr__(self, "n_set", tuple(self.n_set))
        if self.target_components is not None:
            object.__setattr__(self, "target_components",
                               tuple(self.target_components))


@dataclass
class AugmentManifest:
    """Audit trail of one augmentation run."""

    config: dict
    task: str
    label_space: list[str] | None
    counts: dict[str, int] = field(default_factory=dict)
    per_assignment: dict[str, int] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)
    reassigned: list[dict] = field(default_factory=list)
    reused_sources: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, indent=2,
                          sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AugmentManifest":
        return cls(**json.loads(text))


@dataclass
class AugmentResult:
    train: list[AugmentedRecord]
    dev: list[AugmentedRecord]
    manifest: AugmentManifest


def invalid_label_for(component: str | None, mode: str) -> str:
    if mode == "per_component" and component is not None:
        return f"{INVALID_LABEL}_{component}"
    return INVALID_LABEL


def make_label_space(
    task: str,
    invalid_label_mode: str,
    original_labels: Sequence[str] | None = None,
    target_components: Sequence[str] | None = None,
) -> list[str]:
    """Original class labels extended with the invalid label(s).

    ``per_component`` appends one ``invalid_<component>`` label per target
    component, the two-way arrangement used when a model must say *which*
    part of the input was scrambled. Extractive QA has no class labels of
    its own, so only ``per_component`` is supported there; multiple choice
    extends its answer list instead and is rejected here.
    """
    if task == "multiple_choice":
        raise UnsupportedTask(
            "multiple_choice extends its ending list, not a label space"
        )
    if target_components is None:
        target_components = default_target_components(task)
    if invalid_label_mode == "per_component":
        extra = [invalid_label_for(c, "per_component")
                 for c in target_components]
    else:
        extra = [INVALID_LABEL]
    if task == "extractive_qa":
        if invalid_label_mode != "per_component":
            raise UnsupportedTask(
                "extractive_qa supports only per_component invalid labels "
                "(its answers are spans, not classes)"
            )
        return extra
    if original_labels is None:
        raise ValueError(f"original_labels is required for {task}")
    return list(original_labels) + extra


def _with_invalid_ending(record: Record, source_id: str) -> AugmentedRecord:
    components = dict(record.components)
    components[f"ending_{len(record.ending_names())}"] = INVALID_ENDING_TEXT
    return AugmentedRecord(
        id=record.id,
        task=record.task,
        components=components,
        gold=record.gold,
        heuristic=record.heuristic,
        source_id=source_id,
    )


def _as_valid(record: Record) -> AugmentedRecord:
    if record.task == "multiple_choice":
        return _with_invalid_ending(record, record.id)
    return AugmentedRecord(
        id=record.id,
        task=record.task,
        components=dict(record.components),
        gold=record.gold,
        heuristic=record.heuristic,
        source_id=record.id,
    )


def _permutable_components(
    record: Record, targets: Sequence[str], n: int, mode: str
) -> list[str]:
    """Target components the record can be permuted on at chunk size n.

    The ``endings`` pseudo-component qualifies only if every ending is
    permutable, so an invalid copy differs in all of them.
    """
    out = []
    for name in targets:
        actual = record.expand_component(name)
        if all(
            perm.is_permutable(perm.tokenize(record.components[a]).tokens,
                               n, mode)
            for a in actual
        ):
            out.append(name)
    return out


def _make_invalid(
    record: Record,
    occurrence: int,
    n: int,
    config: AugmentConfig,
    targets: Sequence[str],
    manifest: AugmentManifest,
) -> AugmentedRecord | None:
    """Build one invalid copy of ``record``, or None if nothing permutes."""
    rng = SplitMix64(
        derive_seed(config.master_seed, record.id, "augment", occurrence)
    )
    eligible = _permutable_components(record, targets, n, config.mode)
    if not eligible:
        for n_alt in sorted(config.n_set, reverse=True):
            if n_alt == n:
                continue
            eligible = _permutable_components(record, targets, n_alt,
                                              config.mode)
            if eligible:
                manifest.reassigned.append(
                    {"id": record.id, "from_n": n, "to_n": n_alt}
                )
                n = n_alt
                break
        else:
            return None
    component = eligible[rng.randbelow(len(eligible))]
    updates = {}
    for actual in record.expand_component(component):
        spec = perm.PerturbationSpec(n, config.mode, rng.next_u64())
        updates[actual] = perm.permute(record.components[actual], spec)
    perturbed = record.replace_components(updates)

    new_id = f"{record.id}-inv{occurrence}"
    if record.task == "multiple_choice":
        out = _with_invalid_ending(perturbed, record.id)
        out.id = new_id
        out.gold = Label("choice_index", len(record.ending_names()))
    else:
        out = AugmentedRecord(
            id=new_id,
            task=record.task,
            components=dict(perturbed.components),
            gold=Label(
                "class",
                invalid_label_for(component, config.invalid_label_mode),
            ),
            heuristic=record.heuristic,
            source_id=record.id,
        )
    out.perturbed_component = component
    out.n = n
    out.mode = config.mode
    manifest.per_assignment[f"n={n}/{component}"] = (
        manifest.per_assignment.get(f"n={n}/{component}", 0) + 1
    )
    return out


def _augment_pool(
    records: list[Record], config: AugmentConfig, manifest: AugmentManifest,
    targets: tuple[str, ...],
) -> list[AugmentedRecord]:
    """Valid copies plus floor(ratio * len) invalid copies, unsplit."""
    out = [_as_valid(r) for r in records]
    total_invalid = math.floor(config.ratio * len(records))
    if total_invalid == 0:
        return out

    order = list(range(len(records)))
    SplitMix64(derive_seed(config.master_seed, "augment", "source-order")
               ).shuffle(order)

    occurrences = [0] * len(records)
    produced = 0
    cursor = 0
    failures_in_a_row = 0
    while produced < total_invalid:
        if failures_in_a_row >= len(records):
            raise NothingPermutable(
                f"none of the {len(records)} records admits any "
                f"configured perturbation (n_set={config.n_set}, "
                f"components={targets})"
            )
        idx = order[cursor % len(records)]
        if cursor >= len(records):
            manifest.reused_sources += 1
        cursor += 1
        n = config.n_set[produced % len(config.n_set)]
        record = records[idx]
        invalid = _make_invalid(record, occurrences[idx], n, config,
                                targets, manifest)
        occurrences[idx] += 1
        if invalid is None:
            if occurrences[idx] == 1:
                manifest.skipped.append(record.id)
            failures_in_a_row += 1
            continue
        failures_in_a_row = 0
        out.append(invalid)
        produced += 1
    return out


def _split(
    records: list[AugmentedRecord], fraction: float, seed: int
) -> tuple[list[AugmentedRecord], list[AugmentedRecord]]:
    order = list(range(len(records)))
    SplitMix64(seed).shuffle(order)
    n_train = math.floor(fraction * len(records) + 0.5)
    train_idx = sorted(order[:n_train])
    dev_idx = sorted(order[n_train:])
    return ([records[i] for i in train_idx], [records[i] for i in dev_idx])


def augment(records: Iterable[Record], config: AugmentConfig) -> AugmentResult:
    """Run the full augmentation pass; see the module docstring.

    Raises ValueError if any record fails the min-word precondition on a
    target component (run ``filter_min_words`` first), and
    NothingPermutable if no record can be perturbed at all.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to augment")
    task = records[0].task
    if any(r.task != task for r in records):
        raise ValueError("augment requires records of a single task")
    targets = config.target_components or default_target_components(task)

    for record in records:
        for name in targets:
            for actual in record.expand_component(name):
                if word_count(record.components[actual]) < config.min_words:
                    raise ValueError(
                        f"record {record.id!r} fails the min_words="
                        f"{config.min_words} precondition on {actual!r}; "
                        f"apply filter_min_words first"
                    )

    label_space: list[str] | None = None
    if task != "multiple_choice":
        if task == "extractive_qa":
            label_space = make_label_space(task, config.invalid_label_mode,
                                           None, targets)
        else:
            originals = sorted({r.gold.value for r in records})
            label_space = make_label_space(task, config.invalid_label_mode,
                                           originals, targets)

    manifest = AugmentManifest(
        config={**asdict(config), "invalid_ending_text": INVALID_ENDING_TEXT},
        task=task,
        label_space=label_space,
    )

    if config.split_before_augment:
        valid_train, valid_dev = _split(
            records, config.split_fraction,
            derive_seed(config.master_seed, "augment", "pre-split"),
        )
        train = _augment_pool(valid_train, config, manifest, targets)
        dev = _augment_pool(valid_dev, config, manifest, targets)
    else:
        pool = _augment_pool(records, config, manifest, targets)
        train, dev = _split(
            pool, config.split_fraction,
            derive_seed(config.master_seed, "augment", "split"),
        )

    n_valid = sum(1 for r in train + dev if r.perturbed_component is None)
    manifest.counts = {
        "valid": n_valid,
        "invalid": len(train) + len(dev) - n_valid,
        "train": len(train),
        "dev": len(dev),
    }
    return AugmentResult(train=train, dev=dev, manifest=manifest)
