#!/usr/bin/env python3
# Copyright 2026 Cascade Planner Authors
# SPDX-License-Identifier: Apache-2.0
"""Independently solves an exported min-max assignment LP file.

Reads the LP text emitted by the planner's MILP export, rebuilds the model
and solves it with SciPy's HiGHS MILP backend. Prints the optimal objective
value (17 significant digits) or INFEASIBLE. Development-time verification
tool; not a build dependency.
"""

import sys

import numpy as np
from scipy.optimize import LinearConstraint, milp


def parse_lp(path):
    minimize = []
    constraints = []  # (coeffs dict, op, rhs)
    binaries = set()
    section = None
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("\\"):
                continue
            if line in ("Minimize", "Subject To", "Bounds", "Binaries", "End"):
                section = line
                continue
            if section == "Minimize":
                _, expr = line.split(":", 1)
                minimize = expr.split()
            elif section == "Subject To":
                name, expr = line.split(":", 1)
                tokens = expr.split()
                op_idx = next(i for i, t in enumerate(tokens) if t in ("=", ">=", "<="))
                rhs = float(tokens[op_idx + 1])
                op = tokens[op_idx]
                coeffs = {}
                sign = 1.0
                coef = None
                for tok in tokens[:op_idx]:
                    if tok == "+":
                        sign, coef = 1.0, None
                    elif tok == "-":
                        sign, coef = -1.0, None
                    else:
                        try:
                            coef = float(tok)
                        except ValueError:
                            coeffs[tok] = coeffs.get(tok, 0.0) + sign * (
                                1.0 if coef is None else coef
                            )
                            sign, coef = 1.0, None
                constraints.append((name.strip(), coeffs, op, rhs))
            elif section == "Binaries":
                binaries.update(line.split())
    return minimize, constraints, binaries


def main():
    if len(sys.argv) != 2:
        print("usage: verify_milp.py problem.lp", file=sys.stderr)
        return 2
    minimize, constraints, binaries = parse_lp(sys.argv[1])

    variables = sorted(binaries) + [v for v in minimize if v not in binaries]
    index = {v: i for i, v in enumerate(variables)}
    n = len(variables)

    c = np.zeros(n)
    for v in minimize:
        c[index[v]] = 1.0

    rows, lb, ub = [], [], []
    for _, coeffs, op, rhs in constraints:
        row = np.zeros(n)
        for var, coef in coeffs.items():
            row[index[var]] = coef
        rows.append(row)
        if op == "=":
            lb.append(rhs)
            ub.append(rhs)
        elif op == ">=":
            lb.append(rhs)
            ub.append(np.inf)
        else:
            lb.append(-np.inf)
            ub.append(rhs)

    integrality = np.array([1 if v in binaries else 0 for v in variables])
    bounds_lb = np.array([0.0] * n)
    bounds_ub = np.array([1.0 if v in binaries else np.inf for v in variables])

    from scipy.optimize import Bounds

    result = milp(
        c=c,
        constraints=LinearConstraint(np.vstack(rows), np.array(lb), np.array(ub)),
        integrality=integrality,
        bounds=Bounds(bounds_lb, bounds_ub),
    )
    if not result.success:
        print("INFEASIBLE")
        return 1
    print(f"{result.fun:.17g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
