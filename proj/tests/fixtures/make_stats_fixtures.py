"""Regenerates stats_fixtures.json from independent reference implementations.

Kruskal-Wallis: scipy.stats.kruskal (tie corrected).
Dunn: scikit_posthocs.posthoc_dunn, raw and Bonferroni adjusted.
Cliff's delta: brute-force double loop.

Run: python3 make_stats_fixtures.py > stats_fixtures.json
"""
import json
import sys

import numpy as np
import scikit_posthocs as sp
from scipy import stats


def cliff(a, b):
    gt = sum(1 for x in a for y in b if x > y)
    lt = sum(1 for x in a for y in b if x < y)
    return (gt - lt) / (len(a) * len(b))


def make_groups(rng, case):
    g = int(rng.integers(2, 7))
    groups = []
    for k in range(g):
        n = int(rng.integers(3, 31))
        shift = rng.normal(0, 1.0) if case % 3 else 0.0
        vals = rng.normal(shift, 1.0, size=n)
        if case % 2 == 0:
            vals = np.round(vals, 1)  # force ties
        if case % 5 == 4:
            vals = np.round(0.5 + 0.1 * vals, 3)  # balanced-accuracy-like scale
        groups.append([float(v) for v in vals])
    return groups


def fixture(groups):
    h, p = stats.kruskal(*groups)
    raw = sp.posthoc_dunn(groups, p_adjust=None).to_numpy()
    adj = sp.posthoc_dunn(groups, p_adjust="bonferroni").to_numpy()
    g = len(groups)
    delta = [[cliff(groups[i], groups[j]) for j in range(g)] for i in range(g)]
    return {
        "groups": groups,
        "h": float(h),
        "p": float(p),
        "dunn_p_raw": raw.tolist(),
        "dunn_p_adjusted": adj.tolist(),
        "cliffs_delta": delta,
    }


def main():
    rng = np.random.default_rng(20240611)
    cases = [
        [[1, 2, 3], [4, 5, 6], [7, 8, 9]],
        [[1, 3, 5], [2, 4, 6]],
        [[0.5, 0.5, 0.6, 0.7], [0.5, 0.8, 0.8, 0.9], [0.4, 0.4, 0.5]],
    ]
    cases = [[[float(v) for v in grp] for grp in c] for c in cases]
    for case in range(30):
        cases.append(make_groups(rng, case))
    json.dump([fixture(c) for c in cases], sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
