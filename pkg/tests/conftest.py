"""Shared builders for synthetic records."""

import random

import pytest

from fival.records import Label, Record

WORDS = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf",
    "hotel", "india", "juliet", "kilo", "lima", "mike", "november",
    "oscar", "papa", "quebec", "romeo", "sierra", "tango",
]

NLI_LABELS = ("entailment", "neutral", "contradiction")


def sentence(rng: random.Random, n_words: int, punct: str | None = None) -> str:
    words = [rng.choice(WORDS) for _ in range(n_words)]
    text = " ".join(words)
    return text + punct if punct else text


def make_pair_records(count: int, seed: int = 0, min_words: int = 4,
                      max_words: int = 12,
                      labels=NLI_LABELS) -> list[Record]:
    rng = random.Random(seed)
    out = []
    for i in range(count):
        out.append(Record(
            id=f"pair-{i}",
            task="pair_classification",
            components={
                "part1": sentence(rng, rng.randint(min_words, max_words)),
                "part2": sentence(rng, rng.randint(min_words, max_words)),
            },
            gold=Label("class", rng.choice(labels)),
        ))
    return out


def make_single_records(count: int, seed: int = 0, min_words: int = 4,
                        max_words: int = 12,
                        labels=("acceptable", "unacceptable")) -> list[Record]:
    rng = random.Random(seed)
    return [
        Record(
            id=f"sent-{i}",
            task="single_sentence",
            components={"part1": sentence(rng,
                                          rng.randint(min_words, max_words))},
            gold=Label("class", rng.choice(labels)),
        )
        for i in range(count)
    ]


def make_choice_records(count: int, seed: int = 0,
                        n_endings: int = 4) -> list[Record]:
    rng = random.Random(seed)
    out = []
    for i in range(count):
        components = {
            "context": sentence(rng, rng.randint(5, 10)),
            "sent2_prefix": sentence(rng, rng.randint(2, 4)),
        }
        for j in range(n_endings):
            components[f"ending_{j}"] = sentence(rng, rng.randint(4, 8))
        out.append(Record(
            id=f"mc-{i}",
            task="multiple_choice",
            components=components,
            gold=Label("choice_index", rng.randrange(n_endings)),
        ))
    return out


def make_qa_records(count: int, seed: int = 0,
                    passages: int = 3) -> list[Record]:
    rng = random.Random(seed)
    texts = [sentence(rng, rng.randint(20, 40)) for _ in range(passages)]
    out = []
    for i in range(count):
        # grouped by passage so the nested-JSON format round-trips in order
        passage = texts[(i * passages) // count]
        out.append(Record(
            id=f"qa-{i}",
            task="extractive_qa",
            components={"passage": passage,
                        "question": sentence(rng, rng.randint(5, 9), "?")},
            gold=Label("answer_spans",
                       [str(rng.randint(0, 99))] if rng.random() < 0.5
                       else [rng.choice(WORDS), rng.choice(WORDS)]),
        ))
    return out


@pytest.fixture
def pair_records():
    return make_pair_records(40, seed=7)
