"""Brute-force confident-joint oracle for the 4-row hand fixture.

Recomputes thresholds, the confident joint and the off-diagonal issue set by
enumerating every row and class with plain Python (no numpy).
"""
from fractions import Fraction as F

labels = [0, 0, 1, 1]
probs = [[F(9, 10), F(1, 10)], [F(6, 10), F(4, 10)], [F(2, 10), F(8, 10)], [F(8, 10), F(2, 10)]]
k = 2

thresholds = []
for j in range(k):
    rows = [probs[r][j] for r in range(len(labels)) if labels[r] == j]
    thresholds.append(sum(rows) / len(rows))

joint = [[0] * k for _ in range(k)]
issues = []
for r, given in enumerate(labels):
    above = [j for j in range(k) if probs[r][j] >= thresholds[j]]
    if not above:
        continue
    best = above[0]
    for j in above:
        if probs[r][j] > probs[r][best]:
            best = j
    joint[given][best] += 1
    if best != given:
        issues.append((r, best, probs[r][best]))

print("thresholds", [str(t) for t in thresholds])
print("joint", joint)
print("issues", [(r, j, str(p)) for r, j, p in issues])
