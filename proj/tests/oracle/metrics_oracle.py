#!/usr/bin/env python3
"""Reference R-precision, AP@K and recall@cutoff on fixed judgment instances.

AP@K = sum over relevant ranks i <= K of precision@i, divided by min(R, K).
"""

INSTANCES = [
    # (ranked, relevant)
    ("a x b c y z", "a b c d"),
    ("r n r", "r1 r2"),
    ("n1 n2 n3 a b", "a b"),
    ("a b c d e f g h i j k l", "b d f h j l m"),
    ("q w e r t y u i o p", "p o i"),
]


def fix(ranked, relevant):
    # "r n r" stands for a relevant, a non-relevant, a second relevant item.
    if ranked == "r n r":
        return ["r1", "n", "r2"], {"r1", "r2"}
    return ranked.split(), set(relevant.split())


def r_precision(ranked, rel):
    r = len(rel)
    return sum(1 for x in ranked[:r] if x in rel) / r


def ap_at_k(ranked, rel, k):
    total, hits = 0.0, 0
    for i, x in enumerate(ranked[:k], start=1):
        if x in rel:
            hits += 1
            total += hits / i
    return total / min(len(rel), k)


def recall_at(ranked, rel, cutoff):
    return sum(1 for x in ranked[:cutoff] if x in rel) / len(rel)


for ranked, relevant in INSTANCES:
    rk, rel = fix(ranked, relevant)
    print(repr(r_precision(rk, rel)), repr(ap_at_k(rk, rel, 1)), repr(ap_at_k(rk, rel, 3)),
          repr(ap_at_k(rk, rel, 5)), repr(ap_at_k(rk, rel, 10)), repr(recall_at(rk, rel, 4)))
