"""Regenerate the bundled dataset fixtures.

monks-1.data: the complete MONK-1 instance space (432 rows) labelled by its
defining rule ``(a1 == a2) or (a5 == 1)``, written in the UCI whitespace format.

wbc-sample.csv: a synthetic stand-in shaped like the Wisconsin breast cancer
table (9 integer attributes in 1..10, classes 2/4, ~65/35 balance, a few rows
with a ``?`` cell). It is not the UCI data.
"""

import csv
import itertools
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "shapbench" / "fixtures"


def monks():
    lines = []
    domains = [range(1, 4), range(1, 4), range(1, 3), range(1, 4), range(1, 5), range(1, 3)]
    for k, attrs in enumerate(itertools.product(*domains), start=1):
        a1, a2, _, _, a5, _ = attrs
        label = int(a1 == a2 or a5 == 1)
        lines.append(" " + " ".join(str(v) for v in (label, *attrs)) + f" data_{k}")
    (OUT / "monks-1.data").write_text("\n".join(lines) + "\n")


def wbc():
    rng = np.random.default_rng(20240615)
    names = [
        "clump_thickness", "uniformity_cell_size", "uniformity_cell_shape",
        "marginal_adhesion", "single_epithelial_cell_size", "bare_nuclei",
        "bland_chromatin", "normal_nucleoli", "mitoses",
    ]
    n_benign, n_malignant = 355, 191
    centers_b = np.array([3, 1.3, 1.4, 1.3, 2.1, 1.3, 2.1, 1.2, 1.1])
    centers_m = np.array([7, 6.6, 6.6, 5.6, 5.3, 7.6, 6.0, 5.9, 2.6])
    rows = []
    for center, n, label in ((centers_b, n_benign, 2), (centers_m, n_malignant, 4)):
        vals = np.clip(np.rint(center + rng.normal(scale=1.6, size=(n, 9))), 1, 10).astype(int)
        rows.extend([*map(str, v), str(label)] for v in vals)
    order = rng.permutation(len(rows))
    rows = [rows[i] for i in order]
    for pos in (17, 211, 402):
        broken = list(rows[pos])
        broken[5] = "?"
        rows.insert(pos, broken)
    with (OUT / "wbc-sample.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "class"])
        w.writerows(rows)


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    monks()
    wbc()
