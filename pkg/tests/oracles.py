"""Brute-force reference implementations shared by the unit and acceptance tests.

Deliberately plain Python: no numpy ranking, no vectorization.
"""

import math


def ap_oracle(relevant):
    """Brute force: precision and recall at every rank, then for each recall
    level the best precision at any rank reaching it."""
    total = sum(relevant)
    if total == 0:
        return 0.0
    points = []
    hits = 0
    for k, r in enumerate(relevant, start=1):
        hits += r
        points.append((hits, hits / k))
    levels = []
    for level in range(11):
        # recall >= level / 10, compared exactly in integers
        levels.append(max([p for h, p in points if 10 * h >= level * total], default=0.0))
    return math.fsum(levels) / 11


def retrieval_oracle(db, db_labels, q, q_labels, k):
    aps, topk = [], []
    for qi in range(len(q)):
        d = [math.sqrt(sum((a - b) ** 2 for a, b in zip(q[qi], db[j]))) for j in range(len(db))]
        order = sorted(range(len(db)), key=lambda j: (d[j], j))
        rel = [int(db_labels[j] == q_labels[qi]) for j in order]
        aps.append(ap_oracle(rel))
        topk.append(sum(rel[:k]) / k)
    return aps, topk
