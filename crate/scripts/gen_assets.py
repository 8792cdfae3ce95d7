#!/usr/bin/env python3
"""Regenerates the bundled files in assets/ (except the trained n-gram, see README)."""

import json
import random
from pathlib import Path

ASSETS = Path(__file__).resolve().parent.parent / "assets"

DETS = ["the", "a"]
ADJS = ["small", "old", "red", "quiet"]
NOUNS = ["dog", "cat", "bird", "child", "farmer", "teacher"]
VERBS = ["sees", "likes", "follows", "finds"]
INTRANS = ["sleeps", "runs", "waits"]
PREPS = ["near", "behind"]
PLACES = ["the house", "the river", "a tree"]


def noun_phrase(rng):
    words = [rng.choice(DETS)]
    if rng.random() < 0.35:
        words.append(rng.choice(ADJS))
    words.append(rng.choice(NOUNS))
    return words


def sentence(rng):
    words = noun_phrase(rng)
    if rng.random() < 0.3:
        words.append(rng.choice(INTRANS))
    else:
        words.append(rng.choice(VERBS))
        words += noun_phrase(rng)
    if rng.random() < 0.25:
        words.append(rng.choice(PREPS))
        words += rng.choice(PLACES).split()
    words.append(".")
    return " ".join(words)


def corpus(lines=2000, seed=13):
    rng = random.Random(seed)
    return "\n".join(sentence(rng) for _ in range(lines)) + "\n"


def mixture(epsilon):
    subjects = ["alice", "bob", "carol", "dave", "erin"]
    verbs = ["reads", "writes", "draws", "sings"]
    clean = [f"{s} {v} ." for s in subjects for v in verbs]
    noise = [f"zz{i}" for i in range(10)]
    vocab = ["</s>"] + sorted({w for s in clean + noise for w in s.split()})
    return {
        "kind": "mixture",
        "vocab": vocab,
        "params": {"epsilon": epsilon, "clean": {"uniform": clean}, "noise": {"uniform": noise}},
    }


# Empty output carries 45% of the mass; each length is dominated by one
# non-empty sequence.
DEMO = [
    ("0.45", ""),
    ("0.08", "good morning everyone ."),
    ("0.025", "good morning ."),
    ("0.02", "morning everyone ."),
    ("0.07", "good morning to all of you ."),
    ("0.03", "good morning to all ."),
    ("0.03", "hello to all of you ."),
    ("0.06", "good morning to each and every one ."),
    ("0.04", "hello to each and every one of you ."),
    ("0.06", "hello"),
    ("0.04", "hi all"),
    ("0.03", "hello everyone"),
    ("0.04", "good morning to you ."),
    ("0.025", "hi"),
]


def main():
    ASSETS.mkdir(exist_ok=True)
    (ASSETS / "corpus.txt").write_text(corpus())
    for name, eps in [("mixture_eps030", "3/10"), ("mixture_eps1_3", "1/3"), ("mixture_eps036", "9/25")]:
        (ASSETS / f"{name}.json").write_text(json.dumps(mixture(eps), indent=1) + "\n")
    family = {
        "label": "decaying_q",
        "branching": 2,
        "lengths": list(range(2, 17)),
        "q0": 0.05,
        "decay": 1.0,
        "replicates": 9,
        "spread": 100.0,
    }
    (ASSETS / "length_family_spec.json").write_text(json.dumps(family, indent=1) + "\n")
    (ASSETS / "length_family_model.json").write_text(
        json.dumps({"kind": "length_family", "vocab": ["</s>", "w1", "w2"],
                    "params": {"q": 1e-4, "branching": 2, "length": 14}}, indent=1) + "\n")
    demo = "# probability\tsequence\n" + "".join(f"{p}\t{s}\n" for p, s in DEMO)
    (ASSETS / "demo_distribution.tsv").write_text(demo)
    rng = random.Random(29)
    prompts = [" ".join(noun_phrase(rng)) for _ in range(12)]
    (ASSETS / "prompts.txt").write_text("\n".join(prompts) + "\n")
    (ASSETS / "references.txt").write_text("\n".join(str(rng.randint(3, 8)) for _ in prompts) + "\n")


if __name__ == "__main__":
    main()
