"""Bell functionals: CHSH, Mermin, tripartite and n-partite Svetlichny.

Functionals are stored as exact coefficient tensors over (outcomes, settings)
in the same flat layout as behaviors, so evaluation is a plain inner product
and relabelings act identically on both objects.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .behavior import Behavior, RelabelSpec, full_correlators, relabel_entries
from .errors import DimensionMismatch, ScenarioMismatch
from .scenario import Scenario, nparty_binary, tripartite_binary


@dataclass(frozen=True)
class BellFunctional:
    scenario: Scenario
    coefficients: tuple
    bound: Fraction
    name: str = ""

    def __post_init__(self):
        coeffs = tuple(Fraction(c) for c in self.coefficients)
        if len(coeffs) != self.scenario.size:
            raise DimensionMismatch(
                f"expected {self.scenario.size} coefficients, got {len(coeffs)}"
            )
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "bound", Fraction(self.bound))


def evaluate(f: BellFunctional, b: Behavior):
    """Inner product <coefficients, p>; exact when the behavior is exact."""
    if f.scenario != b.scenario:
        raise ScenarioMismatch(
            f"functional scenario {f.scenario} != behavior scenario {b.scenario}"
        )
    if b.arithmetic_mode == "exact":
        return sum((c * p for c, p in zip(f.coefficients, b.p)), Fraction(0))
    return float(sum(float(c) * p for c, p in zip(f.coefficients, b.p)))


def from_correlators(scenario: Scenario, pattern: dict, bound, name="") -> BellFunctional:
    """Build a full-correlator functional sum_x c(x) E_x as a coefficient tensor.

    pattern maps setting tuples to rational coefficients; omitted settings get 0.
    """
    if any(o != 2 for o in scenario.outcomes):
        raise DimensionMismatch("correlator functionals require binary outcomes")
    coeffs = []
    for xs in scenario.setting_tuples():
        c = Fraction(pattern.get(xs, 0))
        for outs in scenario.outcome_tuples():
            coeffs.append(-c if (sum(outs) & 1) else c)
    return BellFunctional(scenario, coeffs, bound, name)


def correlator_pattern(f: BellFunctional) -> dict:
    """Inverse of from_correlators for pure full-correlator functionals."""
    sc = f.scenario
    nout = sc.n_outcome_tuples
    pattern = {}
    for si, xs in enumerate(sc.setting_tuples()):
        block = f.coefficients[si * nout : (si + 1) * nout]
        base = block[0]
        for outs, c in zip(sc.outcome_tuples(), block):
            expect = -base if (sum(outs) & 1) else base
            if c != expect:
                raise DimensionMismatch("not a full-correlator functional")
        if base != 0:
            pattern[xs] = base
    return pattern


def svetlichny3() -> BellFunctional:
    """S = sum (-1)^(a+b+c+xy+xz+yz) p(abc|xyz), hybrid bound 4, NS maximum 8."""
    sc = tripartite_binary()
    pattern = {
        (x, y, z): (-1) ** (((x & y) ^ (x & z) ^ (y & z)) & 1)
        for x, y, z in itertools.product((0, 1), repeat=3)
    }
    return from_correlators(sc, pattern, 4, "svetlichny3")


def mermin3() -> BellFunctional:
    """M = E000 - E011 - E101 - E110, local bound 2, algebraic maximum 4.

    This is the Mermin symmetry maximally violated by the GHZ protocol with
    sigma_x/sigma_y measurements (outcome 0 <-> eigenvalue +1).
    """
    sc = tripartite_binary()
    pattern = {(0, 0, 0): 1, (0, 1, 1): -1, (1, 0, 1): -1, (1, 1, 0): -1}
    return from_correlators(sc, pattern, 2, "mermin3")


def chsh(primed: bool = False) -> BellFunctional:
    """CHSH = E00 + E01 + E10 - E11; the primed symmetry flips the sign of
    every term carrying a 1 input (E00 - E01 - E10 - E11).  Both bound 2."""
    sc = Scenario((2, 2), (2, 2))
    if primed:
        pattern = {(0, 0): 1, (0, 1): -1, (1, 0): -1, (1, 1): -1}
        return from_correlators(sc, pattern, 2, "chsh'")
    pattern = {(0, 0): 1, (0, 1): 1, (1, 0): 1, (1, 1): -1}
    return from_correlators(sc, pattern, 2, "chsh")


def relabel_functional(f: BellFunctional, spec: RelabelSpec) -> BellFunctional:
    new_sc, coeffs = relabel_entries(f.scenario, f.coefficients, spec)
    return BellFunctional(new_sc, coeffs, f.bound, f.name)


# ---------------------------------------------------------------------------
# decomposition into Alice-conditioned CHSH values


@dataclass(frozen=True)
class CorrelatorView:
    """Alice marginals, full correlators and Bob-Charlie conditional data."""

    full: dict
    alice_marginal: dict          # (a, x) -> p_A(a|x)
    conditional: dict             # (a, x) -> {(y, z): E^{ax}_{yz}} or None
    chsh_values: dict             # (a, x) -> CHSH_{ax} or None
    chsh_prime_values: dict       # (a, x) -> CHSH'_{ax} or None
    marginal_zero: tuple          # (a, x) slots where p_A vanishes


@dataclass(frozen=True)
class DecompositionReport:
    view: CorrelatorView
    decomposed_value: object
    direct_value: object

    @property
    def consistent(self) -> bool:
        diff = self.decomposed_value - self.direct_value
        return diff == 0 if not isinstance(diff, float) else abs(diff) <= 1e-12


def decompose_svetlichny(b: Behavior) -> DecompositionReport:
    """Split S into Alice-conditioned CHSH terms and verify the identity

        S = pA(0|0) CHSH_00 - pA(1|0) CHSH_10
          + pA(0|1) CHSH'_01 - pA(1|1) CHSH'_11.

    Slots with vanishing Alice marginal are flagged, not fatal: their
    weighted contribution is zero regardless.  Exact for non-signaling
    behaviors, where p(a|x,y,z) is slice-independent.
    """
    sc = b.scenario
    if sc != tripartite_binary():
        raise ScenarioMismatch("decomposition requires the tripartite binary scenario")
    full = full_correlators(b)
    zero = Fraction(0) if b.arithmetic_mode == "exact" else 0.0
    pA, cond, chsh_v, chshp_v = {}, {}, {}, {}
    flagged = []
    for a, x in itertools.product((0, 1), (0, 1)):
        m = sum(
            b.at((x, 0, 0), (a, bb, cc)) for bb, cc in itertools.product((0, 1), (0, 1))
        )
        pA[(a, x)] = m
        if m == 0:
            flagged.append((a, x))
            cond[(a, x)] = None
            chsh_v[(a, x)] = None
            chshp_v[(a, x)] = None
            continue
        E = {}
        for y, z in itertools.product((0, 1), (0, 1)):
            num = zero
            for bb, cc in itertools.product((0, 1), (0, 1)):
                term = b.at((x, y, z), (a, bb, cc))
                num += -term if ((bb + cc) & 1) else term
            E[(y, z)] = num / m
        cond[(a, x)] = E
        chsh_v[(a, x)] = E[(0, 0)] + E[(0, 1)] + E[(1, 0)] - E[(1, 1)]
        chshp_v[(a, x)] = E[(0, 0)] - E[(0, 1)] - E[(1, 0)] - E[(1, 1)]
    decomposed = zero
    for a in (0, 1):
        if pA[(a, 0)] != 0:
            term = pA[(a, 0)] * chsh_v[(a, 0)]
            decomposed += -term if a else term
        if pA[(a, 1)] != 0:
            term = pA[(a, 1)] * chshp_v[(a, 1)]
            decomposed += -term if a else term
    direct = evaluate(svetlichny3(), b)
    view = CorrelatorView(full, pA, cond, chsh_v, chshp_v, tuple(flagged))
    return DecompositionReport(view, decomposed, direct)


# ---------------------------------------------------------------------------
# n-partite recursion


def _svetlichny_pattern(n: int) -> dict:
    """Correlator coefficients of the n-party Svetlichny recursion.

    Base: the tripartite pattern (-1)^(xy+xz+yz).  Step: the new party's
    0 input selects S_{n-1}, its 1 input the party-1 input flip of S_{n-1};
    the factor 1/2 per step keeps the stated bound 4 at every n.
    """
    pattern = {
        (x, y, z): Fraction((-1) ** (((x & y) ^ (x & z) ^ (y & z)) & 1))
        for x, y, z in itertools.product((0, 1), repeat=3)
    }
    for _ in range(3, n):
        nxt = {}
        for xs, c in pattern.items():
            nxt[xs + (0,)] = c / 2
        for xs, c in pattern.items():
            nxt[(1 - xs[0],) + xs[1:] + (1,)] = c / 2
        pattern = nxt
    return pattern


def svetlichny_n(n: int) -> BellFunctional:
    """The n-party Svetlichny functional, bound 4 for every n; the n = 3
    base case is exactly svetlichny3()."""
    if n < 3:
        raise DimensionMismatch("svetlichny_n requires n >= 3")
    if n == 3:
        return svetlichny3()
    return from_correlators(
        nparty_binary(n), _svetlichny_pattern(n), 4, f"svetlichny{n}"
    )


@dataclass(frozen=True)
class ExpansionReport:
    """Conditional-CHSH expansion of svetlichny_n versus direct evaluation."""

    expanded_value: object
    direct_value: object
    block_forms: dict             # xs of parties 3..n -> form label
    marginal_zero: tuple

    @property
    def consistent(self) -> bool:
        diff = self.expanded_value - self.direct_value
        return diff == 0 if not isinstance(diff, float) else abs(diff) <= 1e-12


def expand_recursion(n: int, b: Behavior) -> ExpansionReport:
    """Expand S_n into CHSH-type blocks on parties 1, 2 conditioned on the
    outcomes and settings of parties 3..n, and compare with direct evaluation.

        S_n = sum (-1)^(a3+..+an) p(a3..an|x3..xn) * Block(x3..xn; a3..an)

    Block is the restriction of the S_n correlator pattern to fixed trailing
    settings, evaluated on the conditional party-1,2 correlators; blocks
    proportional to CHSH or CHSH' are labelled.  Exact for non-signaling
    behaviors (the conditioning marginal is then slice-independent).
    """
    if b.scenario != nparty_binary(n):
        raise ScenarioMismatch(f"expected the {n}-party binary scenario")
    f = svetlichny_n(n)
    pattern = correlator_pattern(f)
    zero = Fraction(0) if b.arithmetic_mode == "exact" else 0.0
    chsh_pat = {(0, 0): 1, (0, 1): 1, (1, 0): 1, (1, 1): -1}
    chshp_pat = {(0, 0): 1, (0, 1): -1, (1, 0): -1, (1, 1): -1}
    expanded = zero
    forms = {}
    flagged = []
    pairs = list(itertools.product((0, 1), (0, 1)))
    for xs_rest in itertools.product((0, 1), repeat=n - 2):
        block = {
            x12: pattern.get(x12 + xs_rest, Fraction(0)) for x12 in pairs
        }
        scale = next((c for c in block.values() if c != 0), Fraction(0))
        label = "zero"
        if scale != 0:
            norm = {k: v / abs(scale) for k, v in block.items()}
            for sign in (1, -1):
                cand = {k: sign * v for k, v in norm.items()}
                if cand == chsh_pat:
                    label = "chsh" if sign == 1 else "-chsh"
                elif cand == chshp_pat:
                    label = "chsh'" if sign == 1 else "-chsh'"
        forms[xs_rest] = label
        for outs_rest in itertools.product((0, 1), repeat=n - 2):
            # conditioning marginal from the (0,0) slice of parties 1, 2
            m_ref = sum(
                b.at((0, 0) + xs_rest, o12 + outs_rest) for o12 in pairs
            )
            if m_ref == 0:
                flagged.append((outs_rest, xs_rest))
                continue
            block_value = zero
            for x12 in pairs:
                c = block[x12]
                if c == 0:
                    continue
                m_slice = sum(
                    b.at(x12 + xs_rest, o12 + outs_rest) for o12 in pairs
                )
                if m_slice == 0:
                    flagged.append((outs_rest, xs_rest))
                    continue
                econd = zero
                for o12 in pairs:
                    term = b.at(x12 + xs_rest, o12 + outs_rest)
                    econd += -term if (sum(o12) & 1) else term
                block_value += c * (econd / m_slice)
            sign_rest = -1 if (sum(outs_rest) & 1) else 1
            expanded += sign_rest * m_ref * block_value
    direct = evaluate(f, b)
    return ExpansionReport(expanded, direct, forms, tuple(flagged))
