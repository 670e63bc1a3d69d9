#!/usr/bin/env python3
"""Regenerate core/data/{ipa_chart,features,modifiers}.tsv from a PanPhon data directory.

usage: gen_bundled_data.py <panphon/data dir> <output dir>

PanPhon (MIT licensed) ships ipa_bases.csv and diacritic_definitions.yml; the
toolkit keeps bases that carry no diacritic other than a tie bar, and turns each
post-position diacritic into a partial feature overwrite.
"""
import csv
import os
import sys
import unicodedata

import yaml

TIE_BARS = {"͡", "͜"}

# Diacritics the parser recognizes beyond the PanPhon definitions.
EXTRA_MODIFIERS = {
    "̪": {"distr": "+"},  # dental
    "̚": {"delrel": "-"},  # no audible release
    "ˑ": {},  # half-long
}

# Default frequency ranking used when no corpus statistics are available.
DEFAULT_PRIORITY = [
    "ː", "ʰ", "̃", "ʲ", "ʷ", "̪", "̥",
    "̩", "ʼ", "ˤ", "ˠ", "̯", "̤", "̰",
    "˞",
]


def nfd(s):
    return unicodedata.normalize("NFD", s)


def main(src, out):
    with open(os.path.join(src, "ipa_all.csv"), encoding="utf-8") as f:
        rows = list(csv.reader(f))
    names = rows[0][1:]
    all_rows = {nfd(r[0]): r[1:] for r in rows[1:]}

    with open(os.path.join(src, "ipa_bases.csv"), encoding="utf-8") as f:
        base_rows = list(csv.reader(f))[1:]

    with open(os.path.join(src, "diacritic_definitions.yml"), encoding="utf-8") as f:
        defs = yaml.safe_load(f)["diacritics"]

    modifiers = {}
    for d in defs:
        if d["position"] != "post":
            continue
        modifiers.setdefault(nfd(d["marker"]), d["content"])
    modifiers.update(EXTRA_MODIFIERS)

    bases = []
    seen = set()
    for r in base_rows:
        sym = nfd(r[0])
        if sym in seen:
            continue
        marks = [c for c in sym if unicodedata.category(c) == "Mn" and c not in TIE_BARS]
        if any(m in modifiers for m in marks):
            continue
        seen.add(sym)
        bases.append(sym)
    bases.sort(key=lambda s: [ord(c) for c in s])

    with open(os.path.join(out, "ipa_chart.tsv"), "w", encoding="utf-8") as f:
        f.write("# kind\tsymbol\n")
        for b in bases:
            f.write(f"base\t{b}\n")
        ranked = DEFAULT_PRIORITY + sorted(
            (m for m in modifiers if m not in DEFAULT_PRIORITY), key=ord)
        for m in ranked:
            f.write(f"diacritic\t{m}\n")

    with open(os.path.join(out, "features.tsv"), "w", encoding="utf-8") as f:
        f.write("phone\t" + "\t".join(names) + "\n")
        for b in bases:
            f.write(b + "\t" + "\t".join(all_rows[b]) + "\n")

    with open(os.path.join(out, "modifiers.tsv"), "w", encoding="utf-8") as f:
        f.write("kind\tsymbol\t" + "\t".join(names) + "\n")
        for m in sorted(modifiers, key=ord):
            vals = [modifiers[m].get(n, ".") for n in names]
            f.write("diacritic\t" + m + "\t" + "\t".join(vals) + "\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
