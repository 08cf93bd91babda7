"""Constrained n-gram permutation of whitespace-tokenized text.

A text is split on Unicode whitespace, its final punctuation is detached,
the tokens are grouped into consecutive n-gram chunks, and the chunks are
shuffled under one of two constraints:

* ``differs``     - the permuted string must differ from the original;
* ``derangement`` - additionally, no chunk may stay at its original index.

Output is fully determined by ``(text, n, mode, seed)``.
"""

from __future__ import annotations

import unicodedata

from dataclasses import dataclass
from operator import eq as _eq
from typing import Iterator, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .rng import SplitMix64, derive_seed

MODES = ("differs", "derangement")

RESAMPLE_BUDGET = 64
# Orderings scanned in the last-resort enumeration before giving up.
ENUMERATION_CAP = 1_000_000

_PUNCT_CATEGORIES = frozenset({"Po", "Ps", "Pe", "Pi", "Pf"})
# ASCII sentence punctuation plus the Arabic question mark, semicolon and
# comma; all are also category Po but are listed explicitly as the
# guaranteed-supported core set.
_PUNCT_CHARS = frozenset(".,!?;:" + "؟؛،")


class EmptyInput(ValueError):
    """Raised when the input text is empty or whitespace-only."""


class NotPermutable(ValueError):
    """Raised when no permutation satisfying the mode constraint exists."""


class ResampleBudgetExceeded(RuntimeError):
    """Raised when both rejection sampling and bounded enumeration fail."""


@lru_cache(maxsize=4096)
def is_punct_char(ch: str) -> bool:
    return ch in _PUNCT_CHARS or unicodedata.category(ch) in _PUNCT_CATEGORIES


@dataclass(slots=True)
class TokenSequence:
    """Whitespace tokens with any final punctuation split off.

    ``punct_attached`` records whether the trailing punctuation was glued
    to the last word ("world!") or stood alone as its own token ("a b .");
    rendering preserves that distinction.
    """

    tokens: tuple[str, ...]
    trailing_punct: str | None = None
    punct_attached: bool = False

    def render(self, tokens: Sequence[str] | None = None) -> str:
        """Join ``tokens`` (default: own) and re-append the punctuation."""
        toks = self.tokens if tokens is None else tokens
        body = " ".join(toks)
        if self.trailing_punct is None:
            return body
        if not toks:
            return self.trailing_punct
        if self.punct_attached:
            return body + self.trailing_punct
        return body + " " + self.trailing_punct


@dataclass(frozen=True)
class Chunking:
    """Tokens grouped into consecutive n-grams; the last chunk may be short."""

    n: int
    chunks: tuple[tuple[str, ...], ...]

    def flatten(self) -> tuple[str, ...]:
        return tuple(tok for chunk in self.chunks for tok in chunk)


@dataclass(frozen=True)
class PerturbationSpec:
    """How to permute: chunk size, constraint mode, and the seed."""

    n: int
    mode: str = "differs"
    seed: int = 0

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"n must be one of 1, 2, 3; got {self.n}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}; got {self.mode!r}")
        object.__setattr__(self, "seed", self.seed & ((1 << 64) - 1))


def tokenize(text: str) -> TokenSequence:
    """Split on Unicode whitespace runs and detach final punctuation.

    A final token made up entirely of punctuation is detached whole and
    remembered as free-standing; otherwise, if the last token ends in
    exactly one punctuation character, that character alone is detached.
    """
    raw = text.split()
    if not raw:
        raise EmptyInput("text is empty or whitespace-only")
    last = raw[-1]
    if not is_punct_char(last[-1]):
        return TokenSequence(tuple(raw))
    if all(is_punct_char(ch) for ch in last):
        return TokenSequence(tuple(raw[:-1]), last, punct_attached=False)
    if len(last) >= 2 and is_punct_char(last[-2]):
        # two or more trailing punctuation characters stay attached
        return TokenSequence(tuple(raw))
    tokens = tuple(raw[:-1]) + (last[:-1],)
    return TokenSequence(tokens, last[-1], punct_attached=True)


def segment(tokens: Sequence[str], n: int) -> Chunking:
    """Greedy left-to-right n-gram grouping; leftovers form a short final chunk."""
    if n < 1:
        raise ValueError(f"n must be >= 1; got {n}")
    if not tokens:
        raise ValueError("cannot segment an empty token list")
    chunks = tuple(tuple(tokens[i : i + n]) for i in range(0, len(tokens), n))
    return Chunking(n, chunks)


def _commutes(a: tuple[str, ...], b: tuple[str, ...]) -> bool:
    return a + b == b + a


def _multiset_permutations(
    items: Sequence[tuple[str, ...]],
) -> Iterator[tuple[tuple[str, ...], ...]]:
    """Distinct orderings of a multiset, in lexicographic order."""
    pool = sorted(items)

    def rec(remaining: list) -> Iterator[tuple]:
        if not remaining:
            yield ()
            return
        prev = None
        for i, item in enumerate(remaining):
            if item == prev:
                continue
            prev = item
            rest = remaining[:i] + remaining[i + 1 :]
            for tail in rec(rest):
                yield (item,) + tail

    return rec(pool)


def _flat_equals(arrangement, original_flat: tuple[str, ...]) -> bool:
    """Does the arrangement concatenate to the original token sequence?"""
    i = 0
    for chunk in arrangement:
        for tok in chunk:
            if tok != original_flat[i]:
                return False
            i += 1
    return True


def _satisfies(
    arrangement: Sequence[tuple[str, ...]],
    original: Sequence[tuple[str, ...]],
    original_flat: tuple[str, ...],
    mode: str,
) -> bool:
    if _flat_equals(arrangement, original_flat):
        return False
    if mode == "derangement":
        return not any(map(_eq, arrangement, original))
    return True


def _exists_valid_derangement(
    chunks: Sequence[tuple[str, ...]], flat: tuple[str, ...]
) -> bool:
    for candidate in _multiset_permutations(chunks):
        if _satisfies(candidate, chunks, flat, "derangement"):
            return True
    return False


def _check_permutable(chunks: Sequence[tuple[str, ...]], uniform: bool,
                      mode: str, exact: bool = True) -> bool:
    """Permutability test.

    With ``exact`` unset, the ragged-derangement corner (where the cheap
    conditions can over-approximate) is allowed to answer True; permute()
    relies on its enumeration backstop to settle those, so it skips the
    small-case enumeration here.
    """
    k = len(chunks)
    if k < 2:
        return False
    first = chunks[0]
    if uniform:
        # equal-length chunks commute iff equal
        if all(c == first for c in chunks):
            return False
    elif all(_commutes(c, first) for c in chunks[1:]):
        return False
    if mode == "differs":
        return True
    counts: dict[tuple[str, ...], int] = {}
    for chunk in chunks:
        counts[chunk] = counts.get(chunk, 0) + 1
    if 2 * max(counts.values()) > k:
        return False
    if uniform:
        # Uniform chunk sizes: distinct orderings concatenate distinctly,
        # so Hall's condition alone settles it.
        return True
    if exact and k <= 8:
        flat = tuple(tok for chunk in chunks for tok in chunk)
        return _exists_valid_derangement(chunks, flat)
    # Ragged chunking with many chunks: Hall's condition plus a
    # non-commuting pair leaves no realistic counterexample; permute()
    # still falls back to exact enumeration if sampling cannot find one.
    return True


def is_permutable(tokens: Sequence[str], n: int, mode: str = "differs") -> bool:
    """True iff some chunk ordering satisfies the mode constraint.

    ``differs`` reduces to a pairwise-commutation test: all orderings of
    the chunk list concatenate to the same string exactly when every
    chunk is a power of one common primitive word. ``derangement``
    additionally needs a fixed-point-free arrangement, which exists iff
    no chunk value fills more than half the positions (Hall's condition);
    for ragged chunkings with few chunks the answer is checked exactly by
    enumeration.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}; got {mode!r}")
    if not tokens:
        return False
    chunks = segment(tokens, n).chunks
    return _check_permutable(chunks, len(tokens) % n == 0, mode)


def _repair_derangement(
    arrangement: list, original: Sequence[tuple[str, ...]]
) -> list:
    """Swap fixed points away; needs Hall's condition (2*max_mult <= k).

    For a fixed point holding value v, positions where neither the
    current nor the original value is v number at least k - 2*count(v)
    + 1 >= 1, so a partner always exists; each swap removes a fixed
    point and never creates one.
    """
    k = len(arrangement)
    for i in range(k):
        if arrangement[i] != original[i]:
            continue
        value = original[i]
        for j in range(k):
            if j == i:
                continue
            if arrangement[j] != value and original[j] != value:
                arrangement[i], arrangement[j] = (arrangement[j],
                                                  arrangement[i])
                break
        else:
            return []
    return arrangement


def _repair_differs(original: Sequence[tuple[str, ...]]) -> list:
    """Swap the first non-commuting adjacent pair; changes the string."""
    arrangement = list(original)
    for i in range(len(arrangement) - 1):
        if not _commutes(arrangement[i], arrangement[i + 1]):
            arrangement[i], arrangement[i + 1] = (arrangement[i + 1],
                                                  arrangement[i])
            return arrangement
    return []


def permute(text: str, spec: PerturbationSpec) -> str:
    """Return a seeded constrained permutation of ``text``.

    Chunks are shuffled by seeded Fisher-Yates draws until the mode
    constraint holds. Should ``RESAMPLE_BUDGET`` redraws all fail (a real
    possibility in derangement mode, where the valid fraction of
    orderings can sit near 0.1), one further draw is repaired
    deterministically into a valid arrangement; bounded enumeration in a
    content-independent order is the last resort. Every path is a pure
    function of (text, spec).
    """
    seq = tokenize(text)
    tokens = seq.tokens
    n = spec.n
    if n == 1:
        original = tuple((tok,) for tok in tokens)
    else:
        original = tuple(tuple(tokens[i : i + n])
                         for i in range(0, len(tokens), n))
    uniform = len(tokens) % n == 0
    if not _check_permutable(original, uniform, spec.mode, exact=False):
        raise NotPermutable(
            f"no {spec.mode} permutation at n={spec.n} for {text!r}"
        )
    original_flat = tokens
    rng = SplitMix64(spec.seed)
    shuffle = rng.shuffle
    deranged = spec.mode == "derangement"

    arrangement = list(original)
    if deranged:
        for _ in range(RESAMPLE_BUDGET):
            shuffle(arrangement)
            if any(map(_eq, arrangement, original)):
                continue
            # a fixed-point-free arrangement of uniform chunks always
            # concatenates differently; ragged ones need the flat check
            if uniform or not _flat_equals(arrangement, original_flat):
                return seq.render(
                    [tok for chunk in arrangement for tok in chunk])
    else:
        original_list = list(original)
        for _ in range(RESAMPLE_BUDGET):
            shuffle(arrangement)
            if arrangement == original_list:
                continue
            if uniform or not _flat_equals(arrangement, original_flat):
                return seq.render(
                    [tok for chunk in arrangement for tok in chunk])

    shuffle(arrangement)
    if deranged:
        repaired = _repair_derangement(list(arrangement), original)
    else:
        repaired = _repair_differs(original)
    if repaired and _satisfies(repaired, original, original_flat, spec.mode):
        return seq.render([tok for chunk in repaired for tok in chunk])

    return _permute_by_enumeration(seq, original, original_flat, spec, rng)


def _permute_by_enumeration(
    seq: TokenSequence,
    original: tuple[tuple[str, ...], ...],
    original_flat: tuple[str, ...],
    spec: PerturbationSpec,
    rng: SplitMix64,
) -> str:
    """Pick a valid ordering by seeded index over a bounded enumeration.

    Chunks are relabelled by first occurrence so the enumeration order
    depends only on the input's equality structure, not on spelling.
    Two passes keep memory flat.
    """
    labels: dict[tuple[str, ...], int] = {}
    for chunk in original:
        labels.setdefault(chunk, len(labels))
    by_label = {v: k for k, v in labels.items()}
    label_seq = [labels[c] for c in original]

    def candidates():
        for ordering in _multiset_permutations(label_seq):
            yield tuple(by_label[lab] for lab in ordering)

    scanned = 0
    total = 0
    exhausted = True
    for candidate in candidates():
        scanned += 1
        if _satisfies(candidate, original, original_flat, spec.mode):
            total += 1
        if scanned >= ENUMERATION_CAP:
            exhausted = False
            break
    if total == 0:
        if exhausted:
            raise NotPermutable(
                f"no {spec.mode} permutation at n={spec.n} for "
                f"{seq.render()!r}"
            )
        raise ResampleBudgetExceeded(
            f"no valid ordering within the first {ENUMERATION_CAP} "
            f"orderings of {seq.render()!r}"
        )
    index = rng.randbelow(total)
    seen = 0
    for candidate in candidates():
        if _satisfies(candidate, original, original_flat, spec.mode):
            if seen == index:
                return seq.render(
                    [tok for chunk in candidate for tok in chunk])
            seen += 1
    raise AssertionError("unreachable: counted ordering not re-found")


class NGramPermuter(TransformerMixin, BaseEstimator):
    """Transformer that permutes each input string's n-gram chunks.

    Parameters
    ----------
    n : chunk size, one of 1, 2, 3.
    mode : "differs" or "derangement".
    seed : master seed; item i is permuted with a seed derived from
        ``(seed, i)`` so a given list always transforms the same way.
    on_unpermutable : "raise" propagates ``NotPermutable``; "keep" passes
        the original string through unchanged.
    """

    def __init__(self, n: int = 1, mode: str = "differs", seed: int = 0,
                 on_unpermutable: str = "raise"):
        self.n = n
        self.mode = mode
        self.seed = seed
        self.on_unpermutable = on_unpermutable

    def fit(self, X=None, y=None):
        if self.on_unpermutable not in ("raise", "keep"):
            raise ValueError(
                f"on_unpermutable must be 'raise' or 'keep'; "
                f"got {self.on_unpermutable!r}"
            )
        PerturbationSpec(self.n, self.mode, self.seed)  # validates n/mode
        return self

    def transform(self, X: Sequence[str]) -> list[str]:
        self.fit()
        out = []
        for i, text in enumerate(X):
            spec = PerturbationSpec(
                self.n, self.mode, derive_seed(self.seed, "item", i)
            )
            try:
                out.append(permute(text, spec))
            except NotPermutable:
                if self.on_unpermutable == "raise":
                    raise
                out.append(text)
        return out
