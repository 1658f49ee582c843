#!/usr/bin/env python3
"""Build the desk-scale language-modeling corpus from State of the Union texts.

The source texts are US government works (public domain). They ship in the
npm package @stdlib/datasets-sotu; unpack it and point --src at its data/
directory:

    npm pack @stdlib/datasets-sotu && tar xzf stdlib-datasets-sotu-*.tgz
    python3 tools/make_sotu_corpus.py --src package/data --out data/sotu

Output: <out>.train.txt, <out>.valid.txt, <out>.test.txt, one lowercased,
whitespace-tokenized sentence per line.  Addresses are consumed in
chronological order until the token budget is reached; every 20th sentence
goes to valid, the next one to test.
"""
import argparse
import json
import pathlib
import re

TOKEN = re.compile(r"[a-z]+(?:'[a-z]+)?|[0-9]+|[.,;:!?]")
SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


def sentences(text):
    for raw in SENTENCE_END.split(text):
        toks = TOKEN.findall(raw.lower())
        if len(toks) >= 3:
            yield toks[:80]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--src", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--tokens", type=int, default=50000)
    args = ap.parse_args()

    files = sorted(pathlib.Path(args.src).glob("*.json"))
    splits = {"train": [], "valid": [], "test": []}
    total = 0
    index = 0
    for path in files:
        text = json.loads(path.read_text())["text"]
        for toks in sentences(text):
            slot = index % 20
            split = "valid" if slot == 18 else "test" if slot == 19 else "train"
            splits[split].append(" ".join(toks))
            total += len(toks)
            index += 1
            if total >= args.tokens:
                break
        if total >= args.tokens:
            break

    for name, lines in splits.items():
        pathlib.Path(f"{args.out}.{name}.txt").write_text("\n".join(lines) + "\n")
        print(name, len(lines), "sentences", sum(len(l.split()) for l in lines), "tokens")


if __name__ == "__main__":
    main()
