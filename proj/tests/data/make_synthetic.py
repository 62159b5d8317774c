#!/usr/bin/env python3
"""Writes synthetic_tiny.json: 10 short DocRED-style documents with
PER/ORG/LOC clusters and works_for (PER->ORG) / located_in (ORG->LOC)."""
import json
import random
import sys
from pathlib import Path

PEOPLE = ["alice", "bruno", "chen", "dara", "elif", "farid", "greta", "hiro", "ines", "jonas", "kira", "lena"]
ORGS = ["acme", "globex", "initech", "umbrella", "hooli", "vandelay", "stark", "wayne", "soylent", "tyrell"]
PLACES = ["paris", "oslo", "lima", "cairo", "quito", "perth", "delhi", "tokyo", "rome", "accra"]

TEMPLATES = [
    [["{p}", "works", "for", "{o}", "."], ["{o}", "is", "based", "in", "{l}", "."], ["{p}", "likes", "{o}", "."]],
    [["{o}", "hired", "{p}", "last", "year", "."], ["{p}", "moved", "to", "{l}", "."], ["{o}", "has", "offices", "in", "{l}", "."]],
    [["the", "firm", "{o}", "sits", "in", "{l}", "."], ["{p}", "joined", "{o}", "."], ["{p}", "praised", "{o}", "again", "."]],
]


def build(rng, idx):
    p, o, l = rng.choice(PEOPLE), ORGS[idx], PLACES[idx]
    sents = [[w.format(p=p, o=o, l=l) for w in s] for s in TEMPLATES[idx % len(TEMPLATES)]]
    names = {"PER": p, "ORG": o, "LOC": l}
    vertex_set = []
    for etype in ("PER", "ORG", "LOC"):
        cluster = [{"name": names[etype], "sent_id": si, "pos": [ti, ti + 1], "type": etype}
                   for si, sent in enumerate(sents) for ti, tok in enumerate(sent) if tok == names[etype]]
        vertex_set.append(cluster)
    labels = [{"h": 0, "t": 1, "r": "works_for", "evidence": []},
              {"h": 1, "t": 2, "r": "located_in", "evidence": []}]
    assert sum(len(s) for s in sents) <= 30
    return {"title": f"synth{idx:02d}", "sents": sents, "vertexSet": vertex_set, "labels": labels}


def main():
    rng = random.Random(7)
    docs = [build(rng, i) for i in range(10)]
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).with_name("synthetic_tiny.json")
    out.write_text(json.dumps(docs, indent=1) + "\n")


if __name__ == "__main__":
    main()
