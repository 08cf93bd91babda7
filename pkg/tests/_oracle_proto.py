"""Scratch: timing of the exhaustive <=9-token oracle sweep (not a test)."""

import itertools
import time

from fival.permute import NotPermutable, PerturbationSpec, permute

from oracle import all_orderings, chunk_tokens, ordering_is_valid

ALPHABET = ("wa", "xe", "yi", "zo")
SEED = 20260801


def pattern_of(tokens):
    mapping = {}
    out = []
    for tok in tokens:
        if tok not in mapping:
            mapping[tok] = len(mapping)
        out.append(mapping[tok])
    return tuple(out), mapping


def verdict_for_pattern(pattern, n, mode, output_pattern):
    """(permutable?, verified-output-pattern) via brute force."""
    original = chunk_tokens(pattern, n)
    found_any = False
    found_output = False
    for ordering in all_orderings(original):
        if not ordering_is_valid(ordering, original, mode):
            continue
        found_any = True
        if output_pattern is None:
            break
        flat = tuple(t for ch in ordering for t in ch)
        if flat == output_pattern:
            found_output = True
            break
    return found_any, found_output


def main():
    t0 = time.time()
    cache = {}  # (pattern, n, mode) -> set of verified output patterns/None
    n_inputs = 0
    n_cached = 0
    for length in range(1, 10):
        for combo in itertools.product(ALPHABET, repeat=length):
            n_inputs += 1
            text = " ".join(combo)
            pattern, mapping = pattern_of(combo)
            for n in (1, 2, 3):
                for mode in ("differs", "derangement"):
                    spec = PerturbationSpec(n, mode, SEED)
                    try:
                        out_tokens = tuple(permute(text, spec).split())
                        out_pattern = tuple(mapping[t] for t in out_tokens)
                    except NotPermutable:
                        out_pattern = None
                    key = (pattern, n, mode)
                    verified = cache.setdefault(key, set())
                    if out_pattern in verified:
                        n_cached += 1
                        continue
                    permutable, output_ok = verdict_for_pattern(
                        pattern, n, mode, out_pattern)
                    if out_pattern is None:
                        assert not permutable, (key, "said not permutable")
                    else:
                        assert output_ok, (key, out_pattern)
                    verified.add(out_pattern)
        print(f"len {length} done at {time.time()-t0:.1f}s "
              f"({n_inputs} inputs, {len(cache)} patterns)")
    sizes = [len(v) for v in cache.values()]
    print(f"TOTAL {time.time()-t0:.1f}s inputs={n_inputs} "
          f"unique={len(cache)} cache_hits={n_cached} "
          f"max_outputs_per_key={max(sizes)}")


if __name__ == "__main__":
    main()
