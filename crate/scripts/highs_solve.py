#!/usr/bin/env python3
"""Solve a free-format MPS file with scipy's HiGHS and write an ldslab solution file.

Usage: highs_solve.py MODEL.mps SOLUTION.sol

Example command template:
    python3 scripts/highs_solve.py {mps} {sol}
"""

import math
import sys

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix


def read_mps(path):
    section = None
    obj_row = None
    rows = {}  # name -> sense
    row_order = []
    cols = {}  # name -> index
    col_order = []
    coeffs = []  # (row, col, value)
    cost = {}
    rhs = {}
    lower = {}
    upper = {}
    with open(path) as f:
        for line in f:
            if not line.strip() or line.startswith("*"):
                continue
            if not line[0].isspace():
                section = line.split()[0]
                continue
            fields = line.split()
            if section == "ROWS":
                sense, name = fields
                if sense == "N":
                    obj_row = obj_row or name
                else:
                    rows[name] = sense
                    row_order.append(name)
            elif section == "COLUMNS":
                col = fields[0]
                if col not in cols:
                    cols[col] = len(col_order)
                    col_order.append(col)
                for row, value in zip(fields[1::2], fields[2::2]):
                    if row == obj_row:
                        cost[col] = float(value)
                    elif row in rows:
                        coeffs.append((row, col, float(value)))
            elif section == "RHS":
                rest = fields[1:] if len(fields) % 2 == 1 else fields
                for row, value in zip(rest[0::2], rest[1::2]):
                    rhs[row] = float(value)
            elif section == "BOUNDS":
                kind, _, col = fields[:3]
                value = float(fields[3]) if len(fields) > 3 else 0.0
                if kind == "UP":
                    upper[col] = value
                elif kind == "LO":
                    lower[col] = value
                elif kind == "FX":
                    lower[col] = upper[col] = value
                elif kind == "FR":
                    lower[col], upper[col] = -math.inf, math.inf
                elif kind == "MI":
                    lower[col] = -math.inf
                elif kind == "PL":
                    upper[col] = math.inf
                else:
                    raise SystemExit(f"unsupported bound type {kind}")
    return obj_row, rows, row_order, cols, col_order, coeffs, cost, rhs, lower, upper


def main():
    if len(sys.argv) != 3:
        raise SystemExit(__doc__)
    _, rows, row_order, cols, col_order, coeffs, cost, rhs, lower, upper = read_mps(sys.argv[1])
    n = len(col_order)
    c = np.array([cost.get(name, 0.0) for name in col_order])
    bounds = [(lower.get(name, 0.0), upper.get(name, math.inf)) for name in col_order]
    bounds = [(None if lo == -math.inf else lo, None if hi == math.inf else hi) for lo, hi in bounds]

    def block(names):
        index = {name: i for i, name in enumerate(names)}
        sign = [-1.0 if rows[r] == "G" else 1.0 for r in names]
        entries = [(index[r], cols[col], sign[index[r]] * v) for r, col, v in coeffs if r in index]
        i, j, v = zip(*entries) if entries else ((), (), ())
        matrix = coo_matrix((v, (i, j)), shape=(len(names), n)).tocsr()
        return matrix, np.array([s * rhs.get(r, 0.0) for r, s in zip(names, sign)])

    inequalities = [r for r in row_order if rows[r] != "E"]
    equalities = [r for r in row_order if rows[r] == "E"]
    a_ub, b_ub = block(inequalities) if inequalities else (None, None)
    a_eq, b_eq = block(equalities) if equalities else (None, None)

    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    status = {0: "optimal", 1: "limit", 2: "infeasible", 3: "unbounded"}.get(res.status)
    if status is None:
        print(res.message, file=sys.stderr)
        sys.exit(1)
    with open(sys.argv[2], "w") as out:
        out.write(f"status {status}\n")
        if status == "optimal":
            out.write(f"objective {res.fun!r}\n")
            for name, value in zip(col_order, res.x):
                out.write(f"{name} {float(value)!r}\n")


if __name__ == "__main__":
    main()
