"""Small seeded traffic-sign-like fixture for the end-to-end CLI session.

Writes test.csv / test_probs.csv (probabilities over the collapsed classes
not_stop, stop), train.csv (contains two rows copied from test.csv) and
reference.csv (the intended operating distribution).
"""
import csv
import os

import numpy as np

rng = np.random.default_rng(1690280832)
here = os.path.dirname(os.path.abspath(__file__))
out = os.path.join(here, "..", "fixtures", "cli")
os.makedirs(out, exist_ok=True)

SIGNS = ["stop", "speed30", "no_entry", "no_overtaking"]


def sample(n, stop_share):
    rows, p_stop = [], []
    for _ in range(n):
        sign = "stop" if rng.random() < stop_share else SIGNS[1 + rng.integers(0, 3)]
        if sign == "stop":
            hue, octagon = rng.normal(0.95, 0.05), rng.normal(0.9, 0.08)
        else:
            hue, octagon = rng.normal(0.55, 0.15), rng.normal(0.2, 0.1)
        rows.append([round(float(hue), 4), round(float(octagon), 4), sign])
        z = 9.0 * (octagon - 0.55) + 4.0 * (hue - 0.75)
        p_stop.append(1.0 / (1.0 + np.exp(-z)))
    return rows, p_stop


test, p_stop = sample(48, 0.25)
# Three stop-looking signs carrying a non-stop label.
for r, label in zip((5, 17, 31), ("no_overtaking", "speed30", "no_entry")):
    test[r] = [0.97, 0.93, label]
    p_stop[r] = 0.985

with open(os.path.join(out, "test.csv"), "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["hue", "octagon", "signtype"])
    w.writerows(test)
with open(os.path.join(out, "test_probs.csv"), "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["not_stop", "stop"])
    for p in p_stop:
        p = round(float(p), 6)
        w.writerow([f"{1 - p:.6f}", f"{p:.6f}"])

train, _ = sample(80, 0.25)
train[10] = list(test[2])
train[40] = list(test[20])
with open(os.path.join(out, "train.csv"), "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["hue", "octagon", "signtype"])
    w.writerows(train)

reference, _ = sample(64, 0.25)
with open(os.path.join(out, "reference.csv"), "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["hue", "octagon", "signtype"])
    w.writerows(reference)
