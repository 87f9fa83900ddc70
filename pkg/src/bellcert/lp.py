"""Self-contained linear programming: exact rational and float simplex.

Programs maximize <objective, x> subject to equality rows A x = b,
inequality rows G x <= h and x >= 0.

Exact mode runs a two-phase simplex with fraction-free integer pivoting:
rows are scaled to integers up front and every pivot applies the one-step
Bareiss update T[i][j] <- (piv * T[i][j] - T[i][c] * T[r][j]) / d with d the
previous pivot, which divides exactly and keeps the whole tableau integer.
Entries therefore stay exact rationals T/d of controlled size, and results
are returned as fractions.  Pivoting is deterministic: most-negative
reduced cost with lowest-index ties, switching permanently to Bland's rule
after a run of degenerate pivots (the anti-cycling device).

The artificial columns are kept through phase 2 (barred from entering and
driven out of the basis first), so the final reduced costs hold exact row
duals: strong duality value == sum(dual * rhs) holds bit-exactly, and
infeasibility returns a Farkas vector y with y.A <= 0 componentwise
(y <= 0 on inequality rows) and y.b > 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

from .errors import MalformedProgram

STALL_LIMIT = 12       # degenerate pivots before switching to Bland's rule
FLOAT_EPS = 1e-9
MAX_PIVOTS = 50000


@dataclass
class LinearProgram:
    n: int
    objective: list
    eq_rows: list = field(default_factory=list)     # (row, rhs)
    ineq_rows: list = field(default_factory=list)   # (row, rhs): row . x <= rhs
    arithmetic_mode: str = "exact"

    def validate(self):
        if self.arithmetic_mode not in ("exact", "float"):
            raise MalformedProgram(f"unknown mode {self.arithmetic_mode!r}")
        if len(self.objective) != self.n:
            raise MalformedProgram("objective length != variable count")
        for row, _ in self.eq_rows + self.ineq_rows:
            if len(row) != self.n:
                raise MalformedProgram("constraint row length != variable count")
        if self.arithmetic_mode == "exact":
            for value in self.objective:
                if isinstance(value, float):
                    raise MalformedProgram("exact mode requires rational data")
            for row, rhs in self.eq_rows + self.ineq_rows:
                if isinstance(rhs, float) or any(isinstance(v, float) for v in row):
                    raise MalformedProgram("exact mode requires rational data")


@dataclass
class Solution:
    status: str                 # optimal | infeasible | unbounded | max_iterations
    value: object = None
    x: list | None = None
    duals: list | None = None   # one per row, equalities then inequalities
    certificate: list | None = None


def _lcm(a, b):
    return a * b // gcd(a, b)


class _IntTableau:
    """Integer tableau with a global denominator; entries represent T/d.

    Rows 0..m-1 are constraints; any further rows are cost rows, updated by
    every pivot so that all rows share one Bareiss history (divisions stay
    exact).
    """

    __slots__ = ("T", "d", "basis", "m", "width")

    def __init__(self, rows, basis, m):
        self.T = rows
        self.d = 1
        self.basis = basis
        self.m = m
        self.width = len(rows[0])

    def pivot(self, r, c):
        T, d = self.T, self.d
        piv = T[r][c]
        rowr = T[r]
        for i in range(len(T)):
            if i == r:
                continue
            rowi = T[i]
            f = rowi[c]
            if f == 0:
                if piv != 1 or d != 1:
                    for j in range(self.width):
                        rowi[j] = rowi[j] * piv // d
            else:
                for j in range(self.width):
                    rowi[j] = (rowi[j] * piv - f * rowr[j]) // d
        self.d = piv
        self.basis[r] = c

    def value(self, i, j) -> Fraction:
        return Fraction(self.T[i][j], self.d)


def _simplex_int(tab: _IntTableau, obj_row, enter_limit):
    """Minimize the given cost row; 'optimal', 'unbounded' or 'max_iterations'."""
    T = tab.T
    m = tab.m
    rhs = tab.width - 1
    stall = 0
    bland = False
    for _ in range(MAX_PIVOTS):
        ds = 1 if tab.d > 0 else -1
        obj = T[obj_row]
        enter = -1
        if bland:
            for j in range(enter_limit):
                if obj[j] * ds < 0:
                    enter = j
                    break
        else:
            best = 0
            for j in range(enter_limit):
                v = obj[j] * ds
                if v < best:
                    best = v
                    enter = j
        if enter < 0:
            return "optimal"
        leave = -1
        ra = rb = None          # best ratio = ra / rb, both scaled by d
        for i in range(m):
            a = T[i][enter]
            if a * ds > 0:
                ti = T[i][rhs]
                if leave < 0 or ti * rb < ra * a or (
                    ti * rb == ra * a and tab.basis[i] < tab.basis[leave]
                ):
                    ra, rb = ti, a
                    leave = i
        if leave < 0:
            return "unbounded"
        if not bland:
            stall = stall + 1 if ra == 0 else 0
            if stall >= STALL_LIMIT:
                bland = True
        tab.pivot(leave, enter)
    return "max_iterations"


def _drive_out_artificials(tab: _IntTableau, ntot):
    """Degenerate pivots replacing basic artificials by structural columns.

    Prevents later pivots from regrowing an artificial (which would silently
    relax its constraint row); rows with no structural entries are redundant
    and stay inert.
    """
    for i in range(tab.m):
        if tab.basis[i] >= ntot:
            col = next((j for j in range(ntot) if tab.T[i][j] != 0), None)
            if col is not None:
                tab.pivot(i, col)


def _scale_row_to_int(row, rhs):
    den = 1
    for v in row:
        den = _lcm(den, Fraction(v).denominator)
    den = _lcm(den, Fraction(rhs).denominator)
    ints = [int(Fraction(v) * den) for v in row]
    return ints, int(Fraction(rhs) * den), den


def _solve_exact(p: LinearProgram) -> Solution:
    n = p.n
    nslack = len(p.ineq_rows)
    ntot = n + nslack
    rows, rhs, signs, rowscale = [], [], [], []
    for row, b in p.eq_rows:
        r, bb, t = _scale_row_to_int(row, b)
        rows.append(r + [0] * nslack)
        rhs.append(bb)
        rowscale.append(t)
    for k, (row, b) in enumerate(p.ineq_rows):
        r, bb, t = _scale_row_to_int(row, b)
        # slack coefficient must scale with the row to stay a plain slack
        r = r + [0] * nslack
        r[n + k] = t
        rows.append(r)
        rhs.append(bb)
        rowscale.append(t)
    m = len(rows)
    for i in range(m):
        if rhs[i] < 0:
            rows[i] = [-v for v in rows[i]]
            rhs[i] = -rhs[i]
            signs.append(-1)
        else:
            signs.append(1)
    ncols = ntot + m
    T = [rows[i] + [1 if j == i else 0 for j in range(m)] + [rhs[i]] for i in range(m)]
    # phase-2 cost row (minimize -objective, integer-scaled), then phase-1 row
    obj_den = 1
    for v in p.objective:
        obj_den = _lcm(obj_den, Fraction(v).denominator)
    cost2 = [-int(Fraction(v) * obj_den) for v in p.objective]
    cost2 += [0] * (nslack + m + 1)
    cost1 = [0] * (ncols + 1)
    for i in range(m):
        for j in range(ncols + 1):
            cost1[j] -= T[i][j]
    for j in range(ntot, ncols):
        cost1[j] = 0
    T.append(cost2)
    T.append(cost1)
    tab = _IntTableau(T, [ntot + i for i in range(m)], m)
    status = _simplex_int(tab, m + 1, ntot)
    if status != "optimal":
        return Solution(status="max_iterations")
    phase1 = -tab.value(m + 1, ncols)
    if phase1 > 0:
        # phase-1 duals: reduced cost of artificial i is 1 - y_i; map back
        # through the row sign/scale to certify the original rows
        cert = [
            signs[i] * rowscale[i] * (1 - tab.value(m + 1, ntot + i))
            for i in range(m)
        ]
        return Solution(status="infeasible", certificate=cert)
    _drive_out_artificials(tab, ntot)
    status = _simplex_int(tab, m, ntot)
    if status == "unbounded":
        return Solution(status="unbounded")
    if status != "optimal":
        return Solution(status="max_iterations")
    x = [Fraction(0)] * ntot
    for i in range(m):
        if tab.basis[i] < ntot:
            x[tab.basis[i]] = tab.value(i, ncols)
    value = sum(Fraction(c) * x[j] for j, c in enumerate(p.objective))
    # reduced cost of artificial i in the scaled min problem is -y_i; undo
    # the objective, row-sign and row-scale factors
    duals = [
        signs[i] * rowscale[i] * tab.value(m, ntot + i) / obj_den for i in range(m)
    ]
    return Solution(status="optimal", value=value, x=x[:n], duals=duals)


# ---------------------------------------------------------------------------
# float path


def _simplex_float(T, basis, enter_limit):
    eps = FLOAT_EPS
    m = len(T) - 1
    rhs_col = len(T[0]) - 1
    stall = 0
    bland = False
    for _ in range(MAX_PIVOTS):
        obj = T[m]
        enter = -1
        if bland:
            for j in range(enter_limit):
                if obj[j] < -eps:
                    enter = j
                    break
        else:
            best = -eps
            for j in range(enter_limit):
                if obj[j] < best:
                    best = obj[j]
                    enter = j
        if enter < 0:
            return "optimal"
        leave = -1
        ratio = None
        for i in range(m):
            a = T[i][enter]
            if a > eps:
                r = T[i][rhs_col] / a
                if ratio is None or r < ratio - 1e-15 or (
                    abs(r - ratio) <= 1e-15 and basis[i] < basis[leave]
                ):
                    ratio = r
                    leave = i
        if leave < 0:
            return "unbounded"
        if not bland:
            stall = stall + 1 if (ratio is not None and ratio < 1e-13) else 0
            if stall >= STALL_LIMIT:
                bland = True
        piv = T[leave][enter]
        row = T[leave]
        inv = 1.0 / piv
        for j in range(rhs_col + 1):
            row[j] *= inv
        for i in range(m + 1):
            if i == leave:
                continue
            f = T[i][enter]
            if f == 0.0:
                continue
            ri = T[i]
            for j in range(rhs_col + 1):
                ri[j] -= f * row[j]
        basis[leave] = enter
    return "max_iterations"


def _solve_float(p: LinearProgram) -> Solution:
    n = p.n
    nslack = len(p.ineq_rows)
    ntot = n + nslack
    rows, rhs, signs = [], [], []
    for row, b in p.eq_rows:
        rows.append([float(v) for v in row] + [0.0] * nslack)
        rhs.append(float(b))
    for k, (row, b) in enumerate(p.ineq_rows):
        r = [float(v) for v in row] + [0.0] * nslack
        r[n + k] = 1.0
        rows.append(r)
        rhs.append(float(b))
    m = len(rows)
    for i in range(m):
        if rhs[i] < 0:
            rows[i] = [-v for v in rows[i]]
            rhs[i] = -rhs[i]
            signs.append(-1)
        else:
            signs.append(1)
    ncols = ntot + m
    T = [rows[i] + [1.0 if j == i else 0.0 for j in range(m)] + [rhs[i]] for i in range(m)]
    cost1 = [0.0] * (ncols + 1)
    for i in range(m):
        for j in range(ncols + 1):
            cost1[j] -= T[i][j]
    for j in range(ntot, ncols):
        cost1[j] = 0.0
    T.append(cost1)
    basis = [ntot + i for i in range(m)]
    status = _simplex_float(T, basis, ntot)
    if status != "optimal":
        return Solution(status="max_iterations")
    if -T[m][ncols] > 1e-7:
        cert = [signs[i] * (1.0 - T[m][ntot + i]) for i in range(m)]
        return Solution(status="infeasible", certificate=cert)
    for i in range(m):
        if basis[i] >= ntot:
            col = next((j for j in range(ntot) if abs(T[i][j]) > FLOAT_EPS), None)
            if col is None:
                continue
            piv = T[i][col]
            inv = 1.0 / piv
            for j in range(ncols + 1):
                T[i][j] *= inv
            for k in range(m + 1):
                if k != i and T[k][col] != 0.0:
                    f = T[k][col]
                    for j in range(ncols + 1):
                        T[k][j] -= f * T[i][j]
            basis[i] = col
    cost2 = [-float(c) for c in p.objective] + [0.0] * (nslack + m + 1)
    for i in range(m):
        f = cost2[basis[i]]
        if f != 0.0:
            for j in range(ncols + 1):
                cost2[j] -= f * T[i][j]
    T[m] = cost2
    status = _simplex_float(T, basis, ntot)
    if status == "unbounded":
        return Solution(status="unbounded")
    if status != "optimal":
        return Solution(status="max_iterations")
    x = [0.0] * ntot
    for i in range(m):
        if basis[i] < ntot:
            x[basis[i]] = T[i][ncols]
    value = sum(float(c) * x[j] for j, c in enumerate(p.objective))
    duals = [signs[i] * T[m][ntot + i] for i in range(m)]
    return Solution(status="optimal", value=value, x=x[:n], duals=duals)


def solve_lp(p: LinearProgram) -> Solution:
    """Two-phase simplex; exact rationals when p.arithmetic_mode == 'exact'."""
    p.validate()
    if p.arithmetic_mode == "exact":
        return _solve_exact(p)
    return _solve_float(p)


def dual_objective(p: LinearProgram, duals) -> object:
    """sum(dual * rhs) over all rows; equals the optimum at an exact solve."""
    vals = [b for _, b in p.eq_rows] + [b for _, b in p.ineq_rows]
    return sum(d * b for d, b in zip(duals, vals))


def dump_lp(p: LinearProgram, path) -> None:
    def enc(v):
        if isinstance(v, Fraction):
            return f"{v.numerator}/{v.denominator}"
        return v

    doc = {
        "n": p.n,
        "mode": p.arithmetic_mode,
        "objective": [enc(v) for v in p.objective],
        "eq": [{"row": [enc(v) for v in row], "rhs": enc(b)} for row, b in p.eq_rows],
        "ineq": [{"row": [enc(v) for v in row], "rhs": enc(b)} for row, b in p.ineq_rows],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_lp(path) -> LinearProgram:
    with open(path) as fh:
        doc = json.load(fh)
    mode = doc.get("mode", "exact")
    dec = (lambda v: Fraction(v)) if mode == "exact" else (lambda v: float(v))
    return LinearProgram(
        n=doc["n"],
        objective=[dec(v) for v in doc["objective"]],
        eq_rows=[([dec(v) for v in e["row"]], dec(e["rhs"])) for e in doc["eq"]],
        ineq_rows=[([dec(v) for v in e["row"]], dec(e["rhs"])) for e in doc["ineq"]],
        arithmetic_mode=mode,
    )
