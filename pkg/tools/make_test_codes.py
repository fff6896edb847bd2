#!/usr/bin/env python3
"""Generate the deterministic test codes shipped under codes/.

Each regular code is built from a seeded random socket matching, repaired to
remove duplicate edges, swapped to remove length-4 cycles where possible, and
re-drawn until the parity-check matrix has full GF(2) rank (so the systematic
encoder works).  Re-running this script reproduces the committed files
byte-for-byte.
"""

from __future__ import annotations

import sys
from collections import Counter
from itertools import combinations
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from admmdec.codes import ParityCheckMatrix, serialize_alist  # noqa: E402
from admmdec.channel import gf2_rank  # noqa: E402


class EdgeGraph:
    """Bipartite variable/check edge list with O(1) swap validity checks."""

    def __init__(self, edges):
        self.edges = list(edges)
        self.edge_set = set()
        self.dups = []
        for idx, e in enumerate(self.edges):
            if e in self.edge_set:
                self.dups.append(idx)
            else:
                self.edge_set.add(e)

    def swap_ok(self, i, j):
        vi, ci = self.edges[i]
        vj, cj = self.edges[j]
        if ci == cj or vi == vj:
            return False
        return (vi, cj) not in self.edge_set and (vj, ci) not in self.edge_set

    def swap(self, i, j):
        vi, ci = self.edges[i]
        vj, cj = self.edges[j]
        self.edge_set.discard((vi, ci))
        self.edge_set.discard((vj, cj))
        self.edges[i] = (vi, cj)
        self.edges[j] = (vj, ci)
        self.edge_set.add((vi, cj))
        self.edge_set.add((vj, ci))

    def repair_duplicates(self, rng, tries=100000):
        for idx in self.dups:
            fixed = False
            for _ in range(tries):
                j = int(rng.integers(len(self.edges)))
                if j != idx and self.swap_ok(idx, j):
                    self.swap(idx, j)
                    fixed = True
                    break
            if not fixed:
                return False
        self.dups = []
        return len(self.edge_set) == len(self.edges)

    def rows(self, n_checks):
        rows = [[] for _ in range(n_checks)]
        for v, c in self.edges:
            rows[c].append(v)
        return [np.array(sorted(r), dtype=np.int64) for r in rows]


def four_cycles(edges, n_vars):
    """Counter of check pairs sharing >= 2 variables (each shares a 4-cycle)."""
    checks_of = [[] for _ in range(n_vars)]
    for v, c in edges:
        checks_of[v].append(c)
    pair_count = Counter()
    for cs in checks_of:
        for a, b in combinations(sorted(cs), 2):
            pair_count[(a, b)] += 1
    return Counter({p: c for p, c in pair_count.items() if c >= 2})


def regular_code(n_vars, n_checks, var_deg, check_deg, seed, max_attempts=200):
    if n_vars * var_deg != n_checks * check_deg:
        raise ValueError("socket counts must match")
    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt])
        var_of_socket = np.repeat(np.arange(n_vars), var_deg)
        check_of_socket = rng.permutation(np.repeat(np.arange(n_checks), check_deg))
        g = EdgeGraph(zip(var_of_socket.tolist(), check_of_socket.tolist()))
        if not g.repair_duplicates(rng):
            continue

        for _ in range(2000):
            bad = four_cycles(g.edges, n_vars)
            if not bad:
                break
            (a, b), _ = bad.most_common(1)[0]
            shared = sorted(
                {v for v, c in g.edges if c == a} & {v for v, c in g.edges if c == b}
            )
            v = shared[int(rng.integers(len(shared)))]
            i = g.edges.index((v, b))
            for _ in range(500):
                j = int(rng.integers(len(g.edges)))
                if j != i and g.swap_ok(i, j):
                    g.swap(i, j)
                    break

        rows = g.rows(n_checks)
        if any(r.size != check_deg or np.unique(r).size != check_deg for r in rows):
            continue
        H = ParityCheckMatrix(n_vars, rows)
        if gf2_rank(H.dense()) != n_checks:
            continue
        return H, attempt, sum(four_cycles(g.edges, n_vars).values())
    raise RuntimeError("no valid code found; increase max_attempts")


def main():
    out = Path(__file__).resolve().parents[1] / "codes"
    out.mkdir(exist_ok=True)

    toy = ParityCheckMatrix(
        7, [np.array([0, 2, 4, 6]), np.array([1, 2, 5, 6]), np.array([3, 4, 5, 6])]
    )
    (out / "toy_7_4.alist").write_text(serialize_alist(toy))
    print("toy_7_4: [7,4], row degrees", toy.row_degrees.tolist())

    # column weights must be odd somewhere or the GF(2) row sum vanishes and
    # the matrix can never reach full rank; (3,6)-regular keeps every column odd
    specs = [
        ("regular_96_48_d6.alist", 96, 48, 3, 6, 9648),
        ("regular_128_64_d6.alist", 128, 64, 3, 6, 12864),
        ("regular_192_96_d6.alist", 192, 96, 3, 6, 19296),
    ]
    for name, n, m, dv, dc, seed in specs:
        H, attempt, cycles = regular_code(n, m, dv, dc, seed)
        (out / name).write_text(serialize_alist(H))
        print(f"{name}: [{n},{n - m}], attempt {attempt}, residual 4-cycles {cycles}")


if __name__ == "__main__":
    main()
