"""Guessing-probability certification: LP/SDP builders, reports, curves.

The security question "how well can the untrusted receiver guess the
sender's bit, given what is observed" becomes

  * an exact rational LP over the 128 entries of p(abce|xyz) when the
    adversary holds arbitrary non-signaling resources, or
  * a moment-matrix SDP relaxation (an upper bound, never an optimum) when
    the adversary is limited to quantum resources.

Both builders accept the same constraint bundle: untrusted party, the
target settings, exactly one of {Svetlichny value, fixed marginal, none},
and the optional secret-sharing equality at the target settings.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .behavior import Behavior, ExtendedBehavior
from .errors import ConflictingConstraints, MalformedProgram, ParameterOutOfRange
from .lp import LinearProgram, solve_lp
from .npa import LevelSpec, OperatorScenario, assemble_sdp, monomial_basis
from .scenario import tripartite_with_adversary
from .sdp import solve_sdp

BITS = (0, 1)


@dataclass
class CertificationConstraints:
    untrusted: str = "alice"
    target_settings: tuple = (0, 0, 0)
    svetlichny_value: object = None          # rational/float gamma, or None
    fixed_marginal: Behavior | None = None
    secret_sharing: bool = False
    resource: str = "ns"                     # ns | quantum
    level: str = "2"
    tolerance: float = 1e-7

    def validate(self):
        if self.untrusted not in ("alice", "bob"):
            raise MalformedProgram("untrusted must be 'alice' or 'bob'")
        if self.svetlichny_value is not None and self.fixed_marginal is not None:
            raise ConflictingConstraints(
                "fix either the Svetlichny value or the marginal, not both"
            )
        if self.resource == "ns" and self.svetlichny_value is not None:
            if not -8 <= self.svetlichny_value <= 8:
                raise ParameterOutOfRange("NS Svetlichny value outside [-8, 8]")


@dataclass
class GuessingReport:
    value: object                      # Fraction (NS) or float upper bound
    status: str
    resource: str
    level: str | None
    constraints: str
    exact: bool
    optimizer: ExtendedBehavior | None = None
    certificate: object = None
    diagnostics: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


def _constraint_summary(c: CertificationConstraints) -> str:
    parts = [f"untrusted={c.untrusted}", f"target={c.target_settings}"]
    if c.svetlichny_value is not None:
        parts.append(f"svetlichny={c.svetlichny_value}")
    if c.fixed_marginal is not None:
        parts.append("marginal=fixed")
    parts.append(f"ss={'on' if c.secret_sharing else 'off'}")
    return " ".join(parts)


def ns_guessing_problem(c: CertificationConstraints) -> LinearProgram:
    """The exact LP over p(abce|xyz): non-signaling rows for the three
    directions of the untrusted-receiver model, normalization, the optional
    secret-sharing row, the value/marginal constraint, objective
    p(e = c | target settings)."""
    c.validate()
    sc = tripartite_with_adversary()
    n = sc.size

    def idx(a, b_, c_, e, x, y, z):
        return sc.flat_index((x, y, z, 0), (a, b_, c_, e))

    eq_rows = []

    def add_row(cells, rhs):
        row = [Fraction(0)] * n
        for pos, coeff in cells:
            row[pos] += Fraction(coeff)
        eq_rows.append((row, Fraction(rhs)))

    # broadcast direction: joint (untrusted, e) marginal independent of the
    # untrusted receiver's input
    if c.untrusted == "alice":
        for b_, c_, y, z in itertools.product(BITS, BITS, BITS, BITS):
            cells = []
            for a, e in itertools.product(BITS, BITS):
                cells.append((idx(a, b_, c_, e, 0, y, z), 1))
                cells.append((idx(a, b_, c_, e, 1, y, z), -1))
            add_row(cells, 0)
    else:
        for a, c_, x, z in itertools.product(BITS, BITS, BITS, BITS):
            cells = []
            for b_, e in itertools.product(BITS, BITS):
                cells.append((idx(a, b_, c_, e, x, 0, z), 1))
                cells.append((idx(a, b_, c_, e, x, 1, z), -1))
            add_row(cells, 0)
    # Bob direction (or Alice under the mirror): single-party marginals
    if c.untrusted == "alice":
        for a, c_, e, x, z in itertools.product(BITS, BITS, BITS, BITS, BITS):
            cells = []
            for b_ in BITS:
                cells.append((idx(a, b_, c_, e, x, 0, z), 1))
                cells.append((idx(a, b_, c_, e, x, 1, z), -1))
            add_row(cells, 0)
    else:
        for b_, c_, e, y, z in itertools.product(BITS, BITS, BITS, BITS, BITS):
            cells = []
            for a in BITS:
                cells.append((idx(a, b_, c_, e, 0, y, z), 1))
                cells.append((idx(a, b_, c_, e, 1, y, z), -1))
            add_row(cells, 0)
    # Charlie direction
    for a, b_, e, x, y in itertools.product(BITS, BITS, BITS, BITS, BITS):
        cells = []
        for c_ in BITS:
            cells.append((idx(a, b_, c_, e, x, y, 0), 1))
            cells.append((idx(a, b_, c_, e, x, y, 1), -1))
        add_row(cells, 0)
    # normalization
    for x, y, z in itertools.product(BITS, BITS, BITS):
        add_row(
            [
                (idx(a, b_, c_, e, x, y, z), 1)
                for a, b_, c_, e in itertools.product(BITS, BITS, BITS, BITS)
            ],
            1,
        )
    xs, ys, zs = c.target_settings
    if c.secret_sharing:
        add_row(
            [
                (idx(a, b_, c_, e, xs, ys, zs), 1)
                for a, b_, c_, e in itertools.product(BITS, BITS, BITS, BITS)
                if a ^ b_ ^ c_ == 0
            ],
            1,
        )
    if c.svetlichny_value is not None:
        cells = []
        for x, y, z in itertools.product(BITS, BITS, BITS):
            sign = (-1) ** (((x & y) ^ (x & z) ^ (y & z)) & 1)
            for a, b_, c_, e in itertools.product(BITS, BITS, BITS, BITS):
                cells.append(
                    (idx(a, b_, c_, e, x, y, z), sign * (-1) ** ((a + b_ + c_) & 1))
                )
        add_row(cells, Fraction(c.svetlichny_value))
    if c.fixed_marginal is not None:
        marg = c.fixed_marginal
        if marg.arithmetic_mode != "exact":
            raise MalformedProgram("NS problems need an exact fixed marginal")
        for x, y, z in itertools.product(BITS, BITS, BITS):
            for a, b_, c_ in itertools.product(BITS, BITS, BITS):
                add_row(
                    [(idx(a, b_, c_, e, x, y, z), 1) for e in BITS],
                    marg.at((x, y, z), (a, b_, c_)),
                )
    objective = [Fraction(0)] * n
    for a, b_, c_, e in itertools.product(BITS, BITS, BITS, BITS):
        if e == c_:
            objective[idx(a, b_, c_, e, xs, ys, zs)] += 1
    return LinearProgram(n=n, objective=objective, eq_rows=eq_rows, arithmetic_mode="exact")


def certify_ns(c: CertificationConstraints) -> GuessingReport:
    """Solve the NS guessing LP exactly and package the result."""
    lp = ns_guessing_problem(c)
    sol = solve_lp(lp)
    if sol.status != "optimal":
        return GuessingReport(
            value=None,
            status=sol.status,
            resource="ns",
            level=None,
            constraints=_constraint_summary(c),
            exact=True,
            certificate=sol.certificate,
        )
    sc = tripartite_with_adversary()
    optimizer = ExtendedBehavior(sc, sol.x, c.untrusted, "exact")
    return GuessingReport(
        value=sol.value,
        status="optimal",
        resource="ns",
        level=None,
        constraints=_constraint_summary(c),
        exact=True,
        optimizer=optimizer,
    )


def quantum_guessing_problem(c: CertificationConstraints):
    """Moment structure and SDP for the quantum resource class."""
    c.validate()
    if c.resource != "quantum":
        raise MalformedProgram("quantum_guessing_problem needs resource='quantum'")
    level = c.level if isinstance(c.level, LevelSpec) else LevelSpec.parse(str(c.level))
    ms = monomial_basis(OperatorScenario(c.untrusted), level)
    return ms, assemble_sdp(ms, c)


def certify_quantum(
    c: CertificationConstraints,
    max_iterations=150,
    psd_shift=None,
    verbose=False,
) -> GuessingReport:
    """Upper bound on the guessing probability at the configured level.

    psd_shift=None tries the unshifted problem first and falls back to a
    tiny cone relaxation when the run stalls (no Slater point, e.g. an
    extremal fixed marginal); shifted runs stay valid upper bounds.
    """
    ms, prog = quantum_guessing_problem(c)
    shifts = [0.0, 1e-8, 1e-6] if psd_shift is None else [psd_shift]
    last = None
    used_shift = 0.0
    for shift in shifts:
        sol = solve_sdp(prog, max_iterations=max_iterations, psd_shift=shift, verbose=verbose)
        last = sol
        used_shift = shift
        if sol.status in ("optimal", "infeasible"):
            break
    level = str(ms.level)
    note = f"upper bound at level {level}"
    if used_shift:
        note += f", psd shift {used_shift:g}"
    if last.status == "infeasible":
        return GuessingReport(
            value=None,
            status="infeasible",
            resource="quantum",
            level=level,
            constraints=_constraint_summary(c),
            exact=False,
            certificate=last.dual_value,
            diagnostics=note + "; " + last.diagnostics,
        )
    value = last.value if last.value is None else float(last.value)
    status = "optimal" if last.status == "optimal" else last.status
    return GuessingReport(
        value=value,
        status=status,
        resource="quantum",
        level=level,
        constraints=_constraint_summary(c),
        exact=False,
        diagnostics=note,
    )


# ---------------------------------------------------------------------------
# curves


@dataclass
class CurvePoint:
    sweep_value: object
    svetlichny: object
    report: GuessingReport


def guessing_curve(sweep, constraints_factory, svetlichny_of=None) -> list:
    """One report per grid point, emitted in sweep order.

    `constraints_factory(t)` builds the CertificationConstraints for sweep
    value t; `svetlichny_of(t)` computes the column value when the
    constraint itself is not a Svetlichny equality.  Infeasible points are
    flagged in their report, never dropped.
    """
    points = []
    for t in sweep:
        c = constraints_factory(t)
        if c.resource == "ns":
            rep = certify_ns(c)
        else:
            rep = certify_quantum(c)
        sv = svetlichny_of(t) if svetlichny_of else c.svetlichny_value
        points.append(CurvePoint(t, sv, rep))
    return points


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Fraction):
        return f"{float(value):.12g}"
    return f"{float(value):.12g}"


def curve_to_csv(points, ss_flag) -> str:
    """CSV with the columns sweep_value, svetlichny, guess, status,
    resource, level, ss_constraint (+ exact num/den for NS rows)."""
    ns_mode = any(p.report.resource == "ns" for p in points)
    header = "sweep_value,svetlichny,guess,status,resource,level,ss_constraint"
    if ns_mode:
        header += ",guess_exact"
    lines = [header]
    for p in points:
        rep = p.report
        row = [
            _fmt(p.sweep_value),
            _fmt(p.svetlichny),
            _fmt(rep.value),
            rep.status,
            rep.resource,
            rep.level or "",
            "on" if ss_flag else "off",
        ]
        if ns_mode:
            if isinstance(rep.value, Fraction):
                row.append(f"{rep.value.numerator}/{rep.value.denominator}")
            else:
                row.append("")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
