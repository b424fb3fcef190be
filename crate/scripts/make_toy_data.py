#!/usr/bin/env python3
"""Regenerates the bundled toy data under data/toy.

Output is deterministic for a given seed:

    python3 scripts/make_toy_data.py [--seed 20201] [--out data/toy]
"""

import argparse
import json
import random
from pathlib import Path

PLACES = [
    ("paris", "france"), ("london", "england"), ("rome", "italy"), ("berlin", "germany"),
    ("madrid", "spain"), ("tokyo", "japan"), ("lisbon", "portugal"), ("vienna", "austria"),
    ("athens", "greece"), ("dublin", "ireland"), ("oslo", "norway"), ("cairo", "egypt"),
]
NOUNS = [
    "capital", "city", "river", "museum", "bridge", "market", "school", "library", "park",
    "station", "castle", "church", "garden", "harbor", "tower", "village", "hotel", "bank",
    "book", "letter", "story", "song", "film", "game", "team", "teacher", "student", "doctor",
    "author", "painter", "king", "queen", "house", "door", "window", "car", "train", "ship",
    "road", "lake", "forest", "island", "mountain", "coffee", "dinner", "food", "weather",
    "water", "music", "history", "language", "money", "phone", "computer", "report",
]
ADJ_POS = ["good", "great", "beautiful", "friendly", "lovely", "wonderful", "pleasant", "excellent"]
ADJ_NEG = ["bad", "terrible", "ugly", "rude", "awful", "boring", "dirty", "poor"]
ADJ = ["old", "new", "large", "small", "famous", "busy", "quiet", "long", "high", "cold", "warm", "open"]
VERBS = [
    ("open", "opened"), ("close", "closed"), ("read", "read"), ("write", "wrote"), ("visit", "visited"),
    ("find", "found"), ("call", "called"), ("check", "checked"), ("clean", "cleaned"), ("build", "built"),
    ("bring", "brought"), ("take", "took"), ("send", "sent"), ("watch", "watched"), ("paint", "painted"),
    ("sell", "sold"), ("buy", "bought"), ("leave", "left"), ("cross", "crossed"), ("help", "helped"),
]
ADVERBS = ["quickly", "slowly", "carefully", "gently", "always", "never", "quietly", "now"]
QWH = ["what", "where", "who", "which", "when", "why", "how"]


def sentences(rng, n):
    def noun():
        return rng.choice(NOUNS)

    def place():
        return rng.choice(rng.choice(PLACES))

    def adj():
        return rng.choice(ADJ + ADJ_POS + ADJ_NEG)

    def verb():
        return rng.choice(VERBS)

    statements = [
        lambda: f"the {noun()} of {place()} is {adj()} .",
        lambda: "{} is located in {} .".format(*rng.choice(PLACES)),
        lambda: "{} is the capital of {} .".format(*rng.choice(PLACES)),
        lambda: f"the {noun()} is {adj()} .",
        lambda: f"the {noun()} was very {adj()} .",
        lambda: f"i {verb()[1]} the {noun()} in {place()} .",
        lambda: f"the {noun()} {verb()[1]} the {noun()} .",
        lambda: f"there is a {adj()} {noun()} in {place()} .",
        lambda: f"we can {verb()[0]} the {noun()} .",
        lambda: f"the {noun()} has a {adj()} {noun()} .",
    ]
    questions = [
        lambda: f"what is the {noun()} of {place()} ?",
        lambda: "what is the capital of {} ?".format(rng.choice(PLACES)[1]),
        lambda: f"where is the {noun()} ?",
        lambda: f"where is the {noun()} of {place()} ?",
        lambda: f"who {verb()[1]} the {noun()} ?",
        lambda: f"how {adj()} is the {noun()} ?",
        lambda: f"which {noun()} is {adj()} ?",
        lambda: f"when did the {noun()} {verb()[0]} the {noun()} ?",
        lambda: f"why is the {noun()} {adj()} ?",
        lambda: f"what does the {noun()} {verb()[0]} ?",
        lambda: f"where can i {verb()[0]} the {noun()} ?",
        lambda: f"is the {noun()} {adj()} ?",
        lambda: f"was the {noun()} in {place()} ?",
    ]
    imperatives = [
        lambda: f"{verb()[0]} the {noun()} .",
        lambda: f"please {verb()[0]} the {noun()} .",
        lambda: f"{rng.choice(ADVERBS)} {verb()[0]} the {noun()} .",
        lambda: f"{verb()[0]} the {noun()} in {place()} .",
    ]
    sentiment = [
        lambda: f"the {noun()} was {rng.choice(ADJ_POS)} and {rng.choice(ADJ_POS)} .",
        lambda: f"the {noun()} was {rng.choice(ADJ_NEG)} and {rng.choice(ADJ_NEG)} .",
        lambda: f"i love the {noun()} .",
        lambda: f"i hate the {noun()} .",
        lambda: f"the {noun()} is not {rng.choice(ADJ_POS)} .",
        lambda: f"what a {rng.choice(ADJ_POS + ADJ_NEG)} {noun()} !",
    ]
    mix = [(statements, 0.40), (questions, 0.30), (imperatives, 0.15), (sentiment, 0.15)]
    out = []
    for _ in range(n):
        r = rng.random()
        for pool, w in mix:
            if r < w:
                break
            r -= w
        out.append(rng.choice(pool)())
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=20201)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data" / "toy")
    ap.add_argument("--sentences", type=int, default=5000)
    ap.add_argument("--inputs", type=int, default=50)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)

    corpus = sentences(rng, args.sentences)
    vocab = []
    seen = set()
    extra = QWH + ["is", "are", "was", "were", "do", "does", "did", "can", "will", "should", "?", ".", "!"]
    for s in corpus + extra:
        for w in s.split():
            if w not in seen:
                seen.add(w)
                vocab.append(w)
    (out / "corpus.txt").write_text("\n".join(corpus) + "\n")
    (out / "vocab.txt").write_text("\n".join(vocab) + "\n")

    # Keyword sets come from corpus questions, the way they would be
    # extracted from real questions: one or two content words, in order.
    content = set(NOUNS) | {w for p in PLACES for w in p}
    questions = [s for s in corpus if s.endswith("?") and s.split()[0] in QWH]
    lines = []
    for i in range(args.inputs):
        while True:
            words = [w for w in rng.choice(questions).split() if w in content]
            if words:
                break
        want = 2 if i % 2 == 0 and len(words) >= 2 else 1
        picks = sorted(rng.sample(range(len(words)), want))
        lines.append("\t".join(words[j] for j in picks))
    (out / "keywords.tsv").write_text("\n".join(lines) + "\n")

    pos = [f"{v}\tVERB" for v, _ in VERBS]
    pos += [f"{a}\tADV" for a in ADVERBS]
    pos.append("please\tADV")
    pos += [f"{n}\tNOUN" for n in NOUNS if n not in {v for v, _ in VERBS}]
    (out / "pos_lexicon.tsv").write_text("\n".join(pos) + "\n")

    senti = [f"{a}\t1.5" for a in ADJ_POS] + [f"{a}\t-1.5" for a in ADJ_NEG]
    senti += ["love\t2.0", "hate\t-2.0", "not\t-0.5"]
    (out / "sentiment_lexicon.tsv").write_text("\n".join(senti) + "\n")

    aux = ["is", "are", "was", "were", "do", "does", "did", "can", "will", "should"]
    cats = {"categories": [
        {"name": "QWH", "members": [w for w in QWH if w in seen]},
        {"name": "AUX", "members": [w for w in aux if w in seen]},
        {"name": "OTH", "residual": True},
    ]}
    (out / "categories.json").write_text(json.dumps(cats, indent=2) + "\n")

    # Words in one topical cluster share a center, so similarity has structure.
    dim = 8
    centers = {}
    emb = [f"{len(vocab)} {dim}"]
    for w in vocab:
        if w in ADJ_POS:
            key = "pos"
        elif w in ADJ_NEG:
            key = "neg"
        elif any(w in p for p in PLACES):
            key = "place"
        else:
            key = w
        c = centers.setdefault(key, [rng.gauss(0, 1) for _ in range(dim)])
        v = [x + rng.gauss(0, 0.3) for x in c]
        emb.append(w + " " + " ".join(f"{x:.5f}" for x in v))
    (out / "embeddings.txt").write_text("\n".join(emb) + "\n")


if __name__ == "__main__":
    main()
