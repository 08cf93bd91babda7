"""Exhaustive oracle sweep over all short inputs (acceptance plumbing).

Phase A enumerates every canonical input pattern (restricted-growth
string over at most 4 symbol classes), runs the permuter once per
pattern and (n, mode), and verifies the outcome against the brute-force
enumeration oracle. Phase B then sweeps every concrete input string and
checks that its output reduces to the verified pattern, which also
proves the permuter treats inputs up to symbol renaming consistently.

Both phases split across worker processes.
"""

from __future__ import annotations

import itertools
from multiprocessing import Pool
from operator import eq as _eq

from fival.permute import NotPermutable, PerturbationSpec, permute

from oracle import all_orderings, chunk_tokens, ordering_is_valid

ALPHABET = "abcd"
MAX_LEN = 9
SEED = 20260801
COMBOS = tuple((n, mode) for n in (1, 2, 3)
               for mode in ("differs", "derangement"))

_VERDICTS: dict = {}


def patterns_up_to(max_len: int, max_classes: int = 4):
    """Restricted-growth strings: canonical forms under symbol renaming."""
    out = []

    def grow(prefix: list[int], used: int):
        if prefix:
            out.append(tuple(prefix))
        if len(prefix) == max_len:
            return
        for cls in range(min(used + 1, max_classes)):
            prefix.append(cls)
            grow(prefix, max(used, cls + 1))
            prefix.pop()

    grow([], 0)
    return out


def _oracle_check(pattern: tuple, n: int, mode: str,
                  output: tuple | None) -> bool:
    """Brute force: enumerate all chunk orderings and filter by mode.

    At n=1 an ordering of one-token chunks IS its flattening, so the
    enumeration runs on bare class ids; semantics are unchanged.
    """
    deranged = mode == "derangement"
    if n == 1:
        original = list(pattern)
        if output is None:
            for ordering in all_orderings(original):
                if ordering == pattern:
                    continue
                if deranged and any(map(_eq, ordering, pattern)):
                    continue
                return False
            return True
        for ordering in all_orderings(original):
            if ordering != output:
                continue
            if ordering == pattern:
                return False
            return not (deranged and any(map(_eq, ordering, pattern)))
        return False

    original = chunk_tokens(pattern, n)
    if output is None:
        return not any(ordering_is_valid(o, original, mode)
                       for o in all_orderings(original))
    for ordering in all_orderings(original):
        if tuple(x for chunk in ordering for x in chunk) != output:
            continue
        if ordering_is_valid(ordering, original, mode):
            return True
    return False


def _run_permute(text: str, n: int, mode: str) -> tuple | None:
    """Output as class ids (characters map a->0 .. d->3), None if refused."""
    try:
        result = permute(text, PerturbationSpec(n, mode, SEED))
    except NotPermutable:
        return None
    return tuple(ord(ch) - 97 for ch in result.split())


def verify_pattern_block(patterns: list[tuple]) -> tuple[dict, list]:
    """Phase A worker: verified expected output per (pattern, n, mode)."""
    verdicts = {}
    failures = []
    for pattern in patterns:
        text = " ".join(ALPHABET[c] for c in pattern)
        for n, mode in COMBOS:
            output = _run_permute(text, n, mode)
            if not _oracle_check(pattern, n, mode, output):
                failures.append((pattern, n, mode, output))
            verdicts[(pattern, n, mode)] = output
    return verdicts, failures


def sweep_block(args: tuple[int, int, int]) -> tuple[int, list]:
    """Phase B worker: check every shard-owned input of one length."""
    length, shard, n_shards = args
    verdicts = _VERDICTS
    checked = 0
    failures = []
    symbols = tuple(ALPHABET)
    for index, combo in enumerate(itertools.product(symbols,
                                                    repeat=length)):
        if index % n_shards != shard:
            continue
        mapping: dict = {}
        pattern_list = []
        for tok in combo:
            cls = mapping.get(tok)
            if cls is None:
                cls = mapping[tok] = len(mapping)
            pattern_list.append(cls)
        pattern = tuple(pattern_list)
        text = " ".join(combo)
        for n, mode in COMBOS:
            try:
                raw = permute(text, PerturbationSpec(n, mode, SEED))
                output = tuple(mapping[tok] for tok in raw.split())
            except NotPermutable:
                output = None
            checked += 1
            if output != verdicts[(pattern, n, mode)]:
                failures.append((combo, n, mode, output))
    return checked, failures


def run_sweep(n_workers: int = 2) -> tuple[int, int, list]:
    """Run both phases; returns (inputs checked, patterns verified,
    failures)."""
    global _VERDICTS
    patterns = patterns_up_to(MAX_LEN)
    blocks = [patterns[i::n_workers] for i in range(n_workers)]
    failures: list = []
    with Pool(n_workers) as pool:
        results = pool.map(verify_pattern_block, blocks)
    verdicts: dict = {}
    for block_verdicts, block_failures in results:
        verdicts.update(block_verdicts)
        failures.extend(block_failures)
    if failures:
        return 0, len(patterns), failures

    _VERDICTS = verdicts
    jobs = [(length, shard, n_workers)
            for length in range(1, MAX_LEN + 1)
            for shard in range(n_workers)]
    checked = 0
    with Pool(n_workers) as pool:
        for block_checked, block_failures in pool.map(sweep_block, jobs):
            checked += block_checked
            failures.extend(block_failures)
    return checked // len(COMBOS), len(patterns), failures


if __name__ == "__main__":
    import time

    start = time.perf_counter()
    n_inputs, n_patterns, sweep_failures = run_sweep()
    elapsed = time.perf_counter() - start
    print(f"{n_inputs} inputs x {len(COMBOS)} combos, "
          f"{n_patterns} patterns, {len(sweep_failures)} failures, "
          f"{elapsed:.1f}s")
