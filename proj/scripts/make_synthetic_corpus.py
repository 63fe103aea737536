#!/usr/bin/env python3
"""Generate the synthetic demo corpus used by the README walkthrough.

Writes train/validation/test JSONL splits (balanced human vs genai) plus a
genai-only foreign-domain set for the monoclass and cross-domain examples.
Deterministic for a given seed.
"""
import argparse
import json
import random
from pathlib import Path

HUMAN_CORE = """
    rain kettle porch garden swallow creaky letters auntie stubborn bicycle
    jam thursday marmalade fiddle crooked bakery gossip wobbly sparrow ditch
    laughter chalk lopsided mittens puddle whistle grumble barnyard thistle
""".split()

GENAI_CORE = """
    furthermore leverage comprehensive framework paradigm robust scalable
    utilize optimal synergy facilitate holistic streamline methodology
    innovative stakeholders actionable insights seamless dynamics alignment
    foster empower transformative granular ecosystem deliverable iterate
""".split()

SHARED = """
    the a of and to in that it was for on with as is at by this from or
""".split()

FOREIGN_CORE = """
    inoltre quindi processo struttura modello risultato analisi sistema
    approccio metodo contesto valore sviluppo linguaggio testo generato
""".split()


def make_text(rng, core, shared_ratio=0.3, lo=20, hi=60):
    n = rng.randint(lo, hi)
    words = []
    for _ in range(n):
        pool = SHARED if rng.random() < shared_ratio else core
        words.append(rng.choice(pool))
    return " ".join(words)


def make_split(rng, prefix, count, language):
    records = []
    for i in range(count):
        label = i % 2
        core = GENAI_CORE if label == 1 else HUMAN_CORE
        records.append({
            "id": f"{prefix}-{i:04d}",
            "text": make_text(rng, core),
            "label": label,
            "language": language,
        })
    return records


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    rng = random.Random(args.seed)
    write_jsonl(args.out_dir / "train.jsonl", make_split(rng, "train", 300, "en"))
    write_jsonl(args.out_dir / "validation.jsonl", make_split(rng, "val", 60, "en"))
    write_jsonl(args.out_dir / "test.jsonl", make_split(rng, "test", 60, "en"))

    # Foreign-domain genai-only set: generated text in another language that
    # still leans on the same connective scaffolding.
    foreign = []
    for i in range(60):
        foreign.append({
            "id": f"foreign-{i:04d}",
            "text": make_text(rng, FOREIGN_CORE, shared_ratio=0.4),
            "label": 1,
            "language": "it",
        })
    write_jsonl(args.out_dir / "foreign.jsonl", foreign)
    print(f"wrote 300/60/60 train/validation/test plus 60 foreign records to {args.out_dir}")


if __name__ == "__main__":
    main()
