#!/usr/bin/env python3
"""Solve a free-format MPS model with scipy's HiGHS backend.

Usage:
    mps_solve.py MODEL.mps SOLUTION.sol [--gap G] [--time-limit SECONDS]

Reads the MPS subset this repo's writer emits (NAME / OBJSENSE / ROWS /
COLUMNS with INTORG-INTEND markers / RHS / BOUNDS / ENDATA, one or two
`row value` pairs per data line) and writes a HiGHS-style solution file:
model status, primal column values and row activities, and -- for pure LPs --
dual row values and reduced costs in the `min c'x` sign convention
(duals <= 0 on <= rows, >= 0 on >= rows).

Pure LPs go through scipy.optimize.linprog, models with integer columns
through scipy.optimize.milp (no duals in that case). Exit status is 0 whenever
a solution file was written, including for infeasible/unbounded models.
"""

import argparse
import sys

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp


class MpsError(Exception):
    pass


def parse_mps(path):
    name = "unnamed"
    obj_row = None
    rows = []  # (name, sense)
    row_ix = {}
    col_order = []
    cols = {}  # name -> dict(obj, integer, entries=[(row_i, val)], lo, up)
    rhs = {}
    obj_offset = 0.0
    section = None
    in_int = False

    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip()
            if not line or line.startswith("*"):
                continue
            flush = not raw[0].isspace()
            toks = line.split()

            if flush:
                head = toks[0]
                if head == "NAME":
                    name = toks[1] if len(toks) > 1 else name
                elif head in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "OBJSENSE"):
                    section = head
                elif head == "RANGES":
                    raise MpsError(f"line {lineno}: RANGES is not supported")
                elif head == "ENDATA":
                    section = "ENDATA"
                    break
                else:
                    raise MpsError(f"line {lineno}: unknown section {head!r}")
                continue

            if section == "OBJSENSE":
                if toks[0].upper().startswith("MAX"):
                    raise MpsError(f"line {lineno}: OBJSENSE MAX not supported")
            elif section == "ROWS":
                kind, rname = toks[0], toks[1]
                if kind == "N":
                    if obj_row is None:
                        obj_row = rname
                    else:
                        raise MpsError(f"line {lineno}: second N row {rname!r}")
                elif kind in ("L", "G", "E"):
                    row_ix[rname] = len(rows)
                    rows.append((rname, kind))
                else:
                    raise MpsError(f"line {lineno}: bad row type {kind!r}")
            elif section == "COLUMNS":
                if any(t.strip("'") in ("INTORG", "INTEND") for t in toks):
                    in_int = any(t.strip("'") == "INTORG" for t in toks)
                    continue
                cname = toks[0]
                col = cols.setdefault(
                    cname,
                    {"obj": 0.0, "integer": False, "entries": [], "lo": 0.0, "up": np.inf},
                )
                if cname not in col_order:
                    col_order.append(cname)
                col["integer"] |= in_int
                pairs = toks[1:]
                if len(pairs) % 2 != 0:
                    raise MpsError(f"line {lineno}: odd COLUMNS entry")
                for rname, val in zip(pairs[::2], pairs[1::2]):
                    v = float(val)
                    if rname == obj_row:
                        col["obj"] += v
                    elif rname in row_ix:
                        col["entries"].append((row_ix[rname], v))
                    else:
                        raise MpsError(f"line {lineno}: unknown row {rname!r}")
            elif section == "RHS":
                pairs = toks[1:]
                if len(pairs) % 2 != 0:
                    raise MpsError(f"line {lineno}: odd RHS entry")
                for rname, val in zip(pairs[::2], pairs[1::2]):
                    v = float(val)
                    if rname == obj_row:
                        obj_offset = -v
                    elif rname in row_ix:
                        rhs[row_ix[rname]] = v
                    else:
                        raise MpsError(f"line {lineno}: unknown row {rname!r}")
            elif section == "BOUNDS":
                btype, cname = toks[0], toks[2]
                if cname not in cols:
                    raise MpsError(f"line {lineno}: bound on unknown column {cname!r}")
                col = cols[cname]
                val = float(toks[3]) if len(toks) > 3 else 0.0
                if btype == "LO":
                    col["lo"] = val
                elif btype == "UP":
                    col["up"] = val
                elif btype == "FX":
                    col["lo"] = col["up"] = val
                elif btype == "FR":
                    col["lo"], col["up"] = -np.inf, np.inf
                elif btype == "MI":
                    col["lo"] = -np.inf
                elif btype == "PL":
                    col["up"] = np.inf
                elif btype == "BV":
                    col["lo"], col["up"], col["integer"] = 0.0, 1.0, True
                else:
                    raise MpsError(f"line {lineno}: bound type {btype!r} not supported")
            elif section is None:
                raise MpsError(f"line {lineno}: data before any section")

    if section != "ENDATA":
        raise MpsError("missing ENDATA")
    if obj_row is None:
        raise MpsError("no objective (N) row")
    return {
        "name": name,
        "rows": rows,
        "rhs": [rhs.get(i, 0.0) for i in range(len(rows))],
        "col_order": col_order,
        "cols": cols,
        "obj_offset": obj_offset,
    }


def solve(model, gap, time_limit):
    col_order = model["col_order"]
    cols = model["cols"]
    rows = model["rows"]
    rhs = model["rhs"]
    n = len(col_order)
    m = len(rows)
    cx = {cname: j for j, cname in enumerate(col_order)}

    c = np.array([cols[cn]["obj"] for cn in col_order])
    lo = np.array([cols[cn]["lo"] for cn in col_order])
    up = np.array([cols[cn]["up"] for cn in col_order])
    integrality = np.array([1 if cols[cn]["integer"] else 0 for cn in col_order])

    trip_r, trip_c, trip_v = [], [], []
    for cn in col_order:
        j = cx[cn]
        for r, v in cols[cn]["entries"]:
            trip_r.append(r)
            trip_c.append(j)
            trip_v.append(v)
    A = sparse.csr_matrix((trip_v, (trip_r, trip_c)), shape=(m, n)) if m else None

    is_mip = integrality.any()
    duals = None
    redcosts = None

    if is_mip:
        constraints = []
        if m:
            lb = np.array([-np.inf if s == "L" else b for (_, s), b in zip(rows, rhs)])
            ub = np.array([np.inf if s == "G" else b for (_, s), b in zip(rows, rhs)])
            constraints = LinearConstraint(A, lb, ub)
        res = milp(
            c,
            constraints=constraints,
            integrality=integrality,
            bounds=Bounds(lo, up),
            options={"mip_rel_gap": gap, "time_limit": time_limit},
        )
        status = {0: "Optimal", 1: "Time limit reached", 2: "Infeasible", 3: "Unbounded"}.get(
            res.status, "Not Set"
        )
        x = res.x
    else:
        # Stack: Le rows as +a <= b, Ge rows negated, Eq rows separate.
        ub_rows = [i for i, (_, s) in enumerate(rows) if s in ("L", "G")]
        eq_rows = [i for i, (_, s) in enumerate(rows) if s == "E"]
        A_ub = b_ub = A_eq = b_eq = None
        sign = {}
        if ub_rows:
            blocks, bvals = [], []
            for i in ub_rows:
                s = 1.0 if rows[i][1] == "L" else -1.0
                sign[i] = s
                blocks.append(A[i] * s)
                bvals.append(rhs[i] * s)
            A_ub = sparse.vstack(blocks)
            b_ub = np.array(bvals)
        if eq_rows:
            A_eq = sparse.vstack([A[i] for i in eq_rows])
            b_eq = np.array([rhs[i] for i in eq_rows])
        res = linprog(
            c,
            A_ub=A_ub,
            b_ub=b_ub,
            A_eq=A_eq,
            b_eq=b_eq,
            bounds=np.column_stack([lo, up]),
            method="highs",
            options={"time_limit": time_limit},
        )
        status = {0: "Optimal", 1: "Time limit reached", 2: "Infeasible", 3: "Unbounded"}.get(
            res.status, "Not Set"
        )
        x = res.x
        if res.status == 0:
            duals = np.zeros(m)
            for k, i in enumerate(ub_rows):
                # Undo the Ge negation so >= rows carry their >= 0 dual.
                duals[i] = res.ineqlin.marginals[k] * sign[i]
            for k, i in enumerate(eq_rows):
                duals[i] = res.eqlin.marginals[k]
            redcosts = res.lower.marginals + res.upper.marginals

    return status, x, duals, redcosts


def write_solution(path, model, status, x, duals, redcosts):
    col_order = model["col_order"]
    rows = model["rows"]
    cols = model["cols"]
    lines = ["Model status", status, ""]
    lines.append("# Primal solution values")
    if x is None:
        lines.append("None")
    else:
        obj = float(np.dot([cols[cn]["obj"] for cn in col_order], x)) + model["obj_offset"]
        lines.append("Feasible")
        lines.append(f"Objective {obj!r}")
        lines.append(f"# Columns {len(col_order)}")
        for cn, v in zip(col_order, x):
            lines.append(f"{cn} {float(v)!r}")
        if rows:
            cx = {cn: j for j, cn in enumerate(col_order)}
            lines.append(f"# Rows {len(rows)}")
            act = np.zeros(len(rows))
            for cn in col_order:
                for r, v in cols[cn]["entries"]:
                    act[r] += v * x[cx[cn]]
            for (rn, _), a in zip(rows, act):
                lines.append(f"{rn} {float(a)!r}")
    lines.append("")
    lines.append("# Dual solution values")
    if duals is None:
        lines.append("None")
    else:
        lines.append("Feasible")
        lines.append(f"# Columns {len(col_order)}")
        for cn, d in zip(col_order, redcosts):
            lines.append(f"{cn} {float(d)!r}")
        lines.append(f"# Rows {len(rows)}")
        for (rn, _), d in zip(rows, duals):
            lines.append(f"{rn} {float(d)!r}")
    lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("model")
    ap.add_argument("solution")
    ap.add_argument("--gap", type=float, default=1e-3, help="relative MIP gap")
    ap.add_argument("--time-limit", type=float, default=1e7, help="seconds")
    args = ap.parse_args()

    try:
        model = parse_mps(args.model)
        status, x, duals, redcosts = solve(model, args.gap, args.time_limit)
    except MpsError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    write_solution(args.solution, model, status, x, duals, redcosts)
    return 0


if __name__ == "__main__":
    sys.exit(main())
