"""Word-order-perturbed evaluation sets.

For each (component, n) requested, every record gets the named component
permuted while its gold label, id and all other components stay
byte-identical, so predictions line up across variants. The unperturbed
set is always included under the variant name ``dev``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from . import permute as perm
from .records import Record
from .rng import derive_seed

DEV_VARIANT = "dev"


@dataclass(frozen=True)
class EvalVariant:
    """A named evaluation slice: ``dev`` or one (component, n) pairing."""

    name: str
    component: str | None = None
    n: int | None = None

    def __post_init__(self):
        unperturbed = self.component is None and self.n is None
        if (self.name == DEV_VARIANT) != unperturbed:
            raise ValueError(
                "variant 'dev' must leave component/n unset, and vice versa"
            )

    @classmethod
    def dev(cls) -> "EvalVariant":
        return cls(DEV_VARIANT)

    @classmethod
    def perturbed(cls, component: str, n: int) -> "EvalVariant":
        return cls(f"{component}-{n}gram", component, n)


@dataclass
class EvalBuild:
    """Variant name -> records, plus per-variant unpermutable-drop counts."""

    variants: dict[str, list[Record]]
    dropped: dict[str, int]
    order: list[EvalVariant]


def build_eval_sets(
    records: Iterable[Record],
    components: Sequence[str],
    n_set: Sequence[int],
    master_seed: int,
    mode: str = "differs",
) -> EvalBuild:
    """Build the ``dev`` variant plus one variant per (component, n).

    Gold labels are retained. Records that cannot be permuted for a given
    variant are dropped from that variant only, with the count reported
    in ``dropped``. Per-record seeds derive from
    ``(master_seed, record_id, "eval", component, n)``.
    """
    records = list(records)
    variants: dict[str, list[Record]] = {DEV_VARIANT: list(records)}
    dropped: dict[str, int] = {DEV_VARIANT: 0}
    order = [EvalVariant.dev()]

    for component in components:
        for n in n_set:
            variant = EvalVariant.perturbed(component, n)
            order.append(variant)
            kept: list[Record] = []
            n_dropped = 0
            for record in records:
                actual_names = record.expand_component(component)
                updates = {}
                try:
                    for actual in actual_names:
                        seed = derive_seed(master_seed, record.id, "eval",
                                           component, n, actual)
                        spec = perm.PerturbationSpec(n, mode, seed)
                        updates[actual] = perm.permute(
                            record.components[actual], spec
                        )
                except perm.NotPermutable:
                    n_dropped += 1
                    continue
                kept.append(record.replace_components(updates))
            variants[variant.name] = kept
            dropped[variant.name] = n_dropped

    return EvalBuild(variants=variants, dropped=dropped, order=order)
