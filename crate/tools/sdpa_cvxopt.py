#!/usr/bin/env python3
"""Solve a sparse SDPA file with CVXOPT and print the result as JSON.

Reads the primal form  min c^T x  s.t.  sum_i x_i F_i - F_0 >= 0  and passes it
to cvxopt.solvers.sdp as  h - sum_i x_i G_i >= 0  with G_i = -F_i, h = -F_0.
Comment lines (starting with '"' or '*') are ignored, as in any SDPA reader.

Usage: sdpa_cvxopt.py FILE.dat-s
Output: {"status": ..., "tol": ..., "objective": c^T x, "x": [...]}
"""

import json
import re
import sys

import numpy as np
from cvxopt import matrix, solvers


def parse(text):
    lines = []
    for raw in text.splitlines():
        s = raw.strip()
        if not s or s[0] in '"*':
            continue
        lines.append(re.sub(r"[,(){}]", " ", s).split())
    m = int(lines[0][0])
    nblocks = int(lines[1][0])
    sizes = [int(v) for v in lines[2][:nblocks]]
    c = np.array([float(v) for v in lines[3][:m]])
    mats = [[np.zeros((abs(n), abs(n))) for n in sizes] for _ in range(m + 1)]
    for tok in lines[4:]:
        k, b, i, j = (int(t) for t in tok[:4])
        v = float(tok[4])
        blk = mats[k][b - 1]
        blk[i - 1, j - 1] = v
        blk[j - 1, i - 1] = v
    return c, sizes, mats


def solve(c, sizes, mats):
    m = len(c)
    gl_rows, hl = [], []
    gs, hs = [], []
    for b, n in enumerate(sizes):
        if n < 0:
            for r in range(-n):
                gl_rows.append([-mats[i + 1][b][r, r] for i in range(m)])
                hl.append(-mats[0][b][r, r])
        else:
            cols = [(-mats[i + 1][b]).flatten(order="F") for i in range(m)]
            gs.append(matrix(np.column_stack(cols)))
            hs.append(matrix(-mats[0][b]))
    kwargs = {"Gs": gs, "hs": hs}
    if gl_rows:
        kwargs["Gl"] = matrix(np.array(gl_rows))
        kwargs["hl"] = matrix(np.array(hl))
    # Very tight tolerances can break CVXOPT's scaling update near the
    # optimum; fall back to looser ones and keep the tightest run that works.
    sol = None
    for tol in (1e-10, 1e-9, 1e-8, 1e-7):
        solvers.options.update(
            {"show_progress": False, "abstol": tol, "reltol": tol, "feastol": tol, "maxiters": 200}
        )
        try:
            sol = solvers.sdp(matrix(c), **kwargs)
        except (ArithmeticError, ValueError):
            continue
        break
    if sol is None:
        return {"status": "failed", "objective": float("nan"), "x": []}
    x = np.array(sol["x"]).ravel() if sol["x"] is not None else np.full(m, np.nan)
    return {"status": sol["status"], "tol": tol, "objective": float(c @ x), "x": x.tolist()}


def main():
    if len(sys.argv) != 2:
        print(__doc__.strip().splitlines()[-2], file=sys.stderr)
        return 64
    with open(sys.argv[1]) as fh:
        c, sizes, mats = parse(fh.read())
    print(json.dumps(solve(c, sizes, mats)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
