"""Multipartite behaviors: construction, named boxes, transforms, NS checks.

A Behavior is a conditional probability table p(outcomes|settings) stored as
a flat tuple in the canonical order of :mod:`bellcert.scenario`.  Exact mode
(fractions) is the default for constructed boxes; float mode is reserved for
quantum-derived tables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .errors import (
    DimensionMismatch,
    NegativeEntry,
    NotNormalized,
    ScenarioMismatch,
    SignalingMarginal,
    WeightOutOfRange,
    ParameterOutOfRange,
    InvalidPermutation,
)
from .scenario import Scenario, tripartite_binary, tripartite_with_adversary

FLOAT_NORM_TOL = 1e-12


def _as_exact(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


class Behavior:
    """A validated conditional probability table over a Scenario."""

    __slots__ = ("scenario", "p", "arithmetic_mode")

    def __init__(self, scenario: Scenario, entries, arithmetic_mode: str = "exact"):
        entries = tuple(entries)
        if len(entries) != scenario.size:
            raise DimensionMismatch(
                f"expected {scenario.size} entries, got {len(entries)}"
            )
        if arithmetic_mode not in ("exact", "float"):
            raise ValueError(f"unknown arithmetic mode {arithmetic_mode!r}")
        if arithmetic_mode == "exact":
            entries = tuple(_as_exact(v) for v in entries)
        else:
            entries = tuple(float(v) for v in entries)
        nout = scenario.n_outcome_tuples
        for v in entries:
            if v < 0:
                raise NegativeEntry(f"entry {v} is negative")
        for block in range(scenario.n_setting_tuples):
            total = sum(entries[block * nout : (block + 1) * nout])
            if arithmetic_mode == "exact":
                if total != 1:
                    raise NotNormalized(f"setting block {block} sums to {total}")
            elif abs(total - 1.0) > FLOAT_NORM_TOL:
                raise NotNormalized(f"setting block {block} sums to {total!r}")
        object.__setattr__(self, "scenario", scenario)
        object.__setattr__(self, "p", entries)
        object.__setattr__(self, "arithmetic_mode", arithmetic_mode)

    def __setattr__(self, name, value):
        raise AttributeError("Behavior is immutable")

    def at(self, settings, outcomes):
        return self.p[self.scenario.flat_index(settings, outcomes)]

    def to_float(self) -> "Behavior":
        if self.arithmetic_mode == "float":
            return self
        return Behavior(self.scenario, [float(v) for v in self.p], "float")

    def __eq__(self, other):
        return (
            isinstance(other, Behavior)
            and self.scenario == other.scenario
            and all(a == b for a, b in zip(self.p, other.p))
        )

    def __hash__(self):
        return hash((self.scenario, self.p))

    def __repr__(self):
        return (
            f"Behavior(parties={self.scenario.parties}, "
            f"mode={self.arithmetic_mode})"
        )


class ExtendedBehavior(Behavior):
    """A behavior p(a,b,c,e|x,y,z) carrying an adversary outcome.

    The adversary occupies the last party slot with a single dummy setting;
    ``untrusted`` records which receiver generates e.
    """

    __slots__ = ("untrusted",)

    def __init__(self, scenario, entries, untrusted: str, arithmetic_mode="exact"):
        if untrusted not in ("alice", "bob"):
            raise ValueError("untrusted must be 'alice' or 'bob'")
        if scenario.settings[-1] != 1:
            raise DimensionMismatch("adversary slot must have a single setting")
        super().__init__(scenario, entries, arithmetic_mode)
        object.__setattr__(self, "untrusted", untrusted)

    def observed(self) -> Behavior:
        """Marginal over the adversary outcome (always well defined)."""
        return marginal(self, keep=tuple(range(self.scenario.parties - 1)))


def uniform_box(scenario: Scenario, exact: bool = True) -> Behavior:
    w = Fraction(1, scenario.n_outcome_tuples)
    entries = [w] * scenario.size
    if exact:
        return Behavior(scenario, entries, "exact")
    return Behavior(scenario, [float(w)] * scenario.size, "float")


def parity_box(parity) -> Behavior:
    """Tripartite box (1/4) * delta(a+b+c = parity(x,y,z) mod 2), exact."""
    sc = tripartite_binary()
    q = Fraction(1, 4)
    entries = [
        q if ((a ^ b ^ c) == parity(x, y, z) & 1) else Fraction(0)
        for (x, y, z), (a, b, c) in sc.entries()
    ]
    return Behavior(sc, entries, "exact")


def mermin_box() -> Behavior:
    """The broadcast-wiring box maximally violating the Mermin functional.

    p(a,b,c|x,y,z) = (1/4) delta(a+b+c, xy+z): constructible by Bob feeding
    x*y into a shared local parity box, hence inside the untrusted-Alice set,
    yet it reaches the algebraic maximum 4 of the Mermin functional.
    """
    return parity_box(lambda x, y, z: (x & y) ^ z)


def svetlichny_box() -> Behavior:
    """p = (1/4) delta(a+b+c, xy+xz+yz); attains S = 8."""
    return parity_box(lambda x, y, z: (x & y) ^ (x & z) ^ (y & z))


def classical_box() -> Behavior:
    """p = (1/4) delta(a+b+c, x); classically correlated, S = 4."""
    return parity_box(lambda x, y, z: x)


def mix(b1: Behavior, b2: Behavior, v) -> Behavior:
    """Convex combination v*b1 + (1-v)*b2, entrywise."""
    if b1.scenario != b2.scenario:
        raise ScenarioMismatch("mix requires identical scenarios")
    exact = (
        b1.arithmetic_mode == "exact"
        and b2.arithmetic_mode == "exact"
        and not isinstance(v, float)
    )
    w = _as_exact(v) if exact else float(v)
    if not 0 <= w <= 1:
        raise WeightOutOfRange(f"weight {w} outside [0, 1]")
    entries = [w * p1 + (1 - w) * p2 for p1, p2 in zip(b1.p, b2.p)]
    mode = "exact" if exact else "float"
    if isinstance(b1, ExtendedBehavior) and isinstance(b2, ExtendedBehavior):
        if b1.untrusted == b2.untrusted:
            return ExtendedBehavior(b1.scenario, entries, b1.untrusted, mode)
    return Behavior(b1.scenario, entries, mode)


def _extended(parity_abc, parity_e, untrusted="alice") -> ExtendedBehavior:
    sc = tripartite_with_adversary()
    q = Fraction(1, 4)
    entries = []
    for (x, y, z, _), (a, b, c, e) in sc.entries():
        ok = ((a ^ b ^ c) == parity_abc(x, y, z)) and (e == parity_e(a, b, c, x, y, z))
        entries.append(q if ok else Fraction(0))
    return ExtendedBehavior(sc, entries, untrusted, "exact")


def unsafe_ns_box() -> ExtendedBehavior:
    """The S=6 non-signaling box with perfect adversary guessing.

    p(abce|xyz) = (1/4) d(a+b+c, F) d(e+c+x(a+b), F) with F = xy+xz+xyz.
    """

    def f(x, y, z):
        return (x & y) ^ (x & z) ^ (x & y & z)

    return _extended(
        f,
        lambda a, b, c, x, y, z: c ^ (x & (a ^ b)) ^ f(x, y, z),
    )


def tunable_unsafe_box(u) -> ExtendedBehavior:
    """The S = 4 + 2u family of guessable boxes, u in [-1, 1]."""
    exact = not isinstance(u, float)
    uu = _as_exact(u) if exact else float(u)
    if not -1 <= uu <= 1:
        raise ParameterOutOfRange(f"u = {uu} outside [-1, 1]")
    sc = tripartite_with_adversary()

    def beta(a, b, c, x, y, z):
        return (-1) ** ((a + b + c + (x & y) + (x & z) + (y & z)) & 1)

    one16 = Fraction(1, 16) if exact else 1 / 16
    one8 = Fraction(1, 8) if exact else 1 / 8
    entries = []
    for (x, y, z, _), (a, b, c, e) in sc.entries():
        if x == 1:
            entries.append(one16 * (1 + beta(a, b, c, 1, y, z)))
        elif z == 0:
            entries.append(one8 if e == c else (Fraction(0) if exact else 0.0))
        else:
            entries.append(one16 * (1 + beta(a, b, c, 0, y, 1) * uu))
    return ExtendedBehavior(sc, entries, "alice", "exact" if exact else "float")


def mermin_wiring_box() -> ExtendedBehavior:
    """Broadcast attack reproducing mermin_box() as its observed marginal.

    Alice, sharing hidden bits (l1, l2) with the other devices, outputs
    a = l1 and guesses e = l1 + l2; Bob feeds x*y into the local parity box
    (b = xy + l2) and Charlie outputs c = z + l1 + l2.  Eliminating the
    hidden bits gives p(abce|xyz) = (1/4) d(e, a+b+xy) d(c, z+e).
    """
    sc = tripartite_with_adversary()
    q = Fraction(1, 4)
    entries = []
    for (x, y, z, _), (a, b, c, e) in sc.entries():
        ok = (e == (a ^ b ^ (x & y))) and (c == (z ^ e))
        entries.append(q if ok else Fraction(0))
    return ExtendedBehavior(sc, entries, "alice", "exact")


def marginal(b: Behavior, keep) -> Behavior:
    """Marginal over the dropped parties' outcomes.

    Raises SignalingMarginal when the sum still depends on a dropped party's
    setting (possible for untrusted-receiver boxes); never renormalizes.
    """
    keep = tuple(sorted(keep))
    n = b.scenario.parties
    if any(i < 0 or i >= n for i in keep) or len(set(keep)) != len(keep) or not keep:
        raise DimensionMismatch(f"invalid party subset {keep}")
    dropped = [i for i in range(n) if i not in keep]
    sub = Scenario(
        tuple(b.scenario.settings[i] for i in keep),
        tuple(b.scenario.outcomes[i] for i in keep),
    )
    zero = Fraction(0) if b.arithmetic_mode == "exact" else 0.0
    tol = 0 if b.arithmetic_mode == "exact" else FLOAT_NORM_TOL
    table = {}
    for xs_sub in sub.setting_tuples():
        for outs_sub in sub.outcome_tuples():
            value = None
            for xs_drop in itertools.product(*[range(b.scenario.settings[i]) for i in dropped]):
                xs = [0] * n
                for i, x in zip(keep, xs_sub):
                    xs[i] = x
                for i, x in zip(dropped, xs_drop):
                    xs[i] = x
                total = zero
                for outs_drop in itertools.product(
                    *[range(b.scenario.outcomes[i]) for i in dropped]
                ):
                    outs = [0] * n
                    for i, a in zip(keep, outs_sub):
                        outs[i] = a
                    for i, a in zip(dropped, outs_drop):
                        outs[i] = a
                    total += b.at(tuple(xs), tuple(outs))
                if value is None:
                    value = total
                elif abs(total - value) > tol:
                    raise SignalingMarginal(
                        f"marginal at {xs_sub}/{outs_sub} depends on a dropped setting"
                    )
            table[(xs_sub, outs_sub)] = value
    entries = [table[(xs, outs)] for xs in sub.setting_tuples() for outs in sub.outcome_tuples()]
    return Behavior(sub, entries, b.arithmetic_mode)


# ---------------------------------------------------------------------------
# relabeling


@dataclass(frozen=True)
class RelabelSpec:
    """Party/setting/outcome relabeling.

    party_perm[j] = old party occupying new slot j.
    input_perms[i][x_new] = old setting of old party i shown as new label x_new.
    output_perms[i][x_old][a_new] = old outcome of party i at old setting
    x_old shown as new label a_new.  Any field may be None for identity.
    """

    party_perm: tuple | None = None
    input_perms: tuple | None = None
    output_perms: tuple | None = None

    @staticmethod
    def input_flip(party: int, n_parties: int = 3) -> "RelabelSpec":
        perms = [None] * n_parties
        perms[party] = (1, 0)
        return RelabelSpec(input_perms=tuple(perms))

    @staticmethod
    def party_swap(i: int, j: int, n_parties: int = 3) -> "RelabelSpec":
        perm = list(range(n_parties))
        perm[i], perm[j] = perm[j], perm[i]
        return RelabelSpec(party_perm=tuple(perm))


def _check_perm(perm, size):
    if sorted(perm) != list(range(size)):
        raise InvalidPermutation(f"{perm} is not a permutation of range({size})")


def relabel_entries(scenario: Scenario, entries, spec: RelabelSpec):
    """Apply a relabeling to a flat tensor; returns (new_scenario, new_entries).

    Works for probability tables and functional coefficient tensors alike,
    which is what makes evaluation covariant under relabelings.
    """
    n = scenario.parties
    party_perm = spec.party_perm or tuple(range(n))
    _check_perm(party_perm, n)
    in_perms = spec.input_perms or (None,) * n
    out_perms = spec.output_perms or (None,) * n
    if len(in_perms) != n or len(out_perms) != n:
        raise InvalidPermutation("per-party permutation lists must match party count")
    new_sc = Scenario(
        tuple(scenario.settings[party_perm[j]] for j in range(n)),
        tuple(scenario.outcomes[party_perm[j]] for j in range(n)),
    )
    for i in range(n):
        if in_perms[i] is not None:
            _check_perm(in_perms[i], scenario.settings[i])
        if out_perms[i] is not None:
            for xo, operm in enumerate(out_perms[i]):
                if operm is not None:
                    _check_perm(operm, scenario.outcomes[i])
    new_entries = [None] * scenario.size
    for xs_new in new_sc.setting_tuples():
        for outs_new in new_sc.outcome_tuples():
            xs_old = [0] * n
            outs_old = [0] * n
            for j in range(n):
                i = party_perm[j]
                x = xs_new[j]
                x_old = in_perms[i][x] if in_perms[i] is not None else x
                xs_old[i] = x_old
                a = outs_new[j]
                if out_perms[i] is not None and out_perms[i][x_old] is not None:
                    a = out_perms[i][x_old][a]
                outs_old[i] = a
            new_entries[new_sc.flat_index(xs_new, outs_new)] = entries[
                scenario.flat_index(tuple(xs_old), tuple(outs_old))
            ]
    return new_sc, tuple(new_entries)


def relabel(b: Behavior, spec: RelabelSpec) -> Behavior:
    new_sc, entries = relabel_entries(b.scenario, b.p, spec)
    return Behavior(new_sc, entries, b.arithmetic_mode)


# ---------------------------------------------------------------------------
# non-signaling checks


@dataclass(frozen=True)
class NsReport:
    """Per-direction no-signaling verdicts with worst violation magnitudes."""

    directions: dict
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.directions.values())

    def worst(self) -> float:
        return max((float(v) for _, v in self.directions.values()), default=0.0)


def _marginal_violation(b: Behavior, sum_over, vary_setting):
    """Worst |difference| of sum over `sum_over` outcomes across settings of
    party `vary_setting`, all other parties' settings and outcomes fixed."""
    sc = b.scenario
    n = sc.parties
    keep = [i for i in range(n) if i not in sum_over]
    worst = 0
    other = [i for i in range(n) if i != vary_setting]
    for xs_other in itertools.product(*[range(sc.settings[i]) for i in other]):
        for outs_keep in itertools.product(*[range(sc.outcomes[i]) for i in keep]):
            ref = None
            for xv in range(sc.settings[vary_setting]):
                xs = [0] * n
                for i, x in zip(other, xs_other):
                    xs[i] = x
                xs[vary_setting] = xv
                total = 0
                for outs_sum in itertools.product(
                    *[range(sc.outcomes[i]) for i in sum_over]
                ):
                    outs = [0] * n
                    for i, a in zip(keep, outs_keep):
                        outs[i] = a
                    for i, a in zip(sum_over, outs_sum):
                        outs[i] = a
                    total += b.at(tuple(xs), tuple(outs))
                if ref is None:
                    ref = total
                else:
                    worst = max(worst, abs(total - ref))
    return worst


def check_nonsignaling(b: ExtendedBehavior, untrusted: str | None = None) -> NsReport:
    """Verify the three NS constraint families of the untrusted-receiver model.

    For untrusted Alice: Bob's and Charlie's marginals must not signal, and
    the joint Alice+adversary marginal must be independent of x.  Mirrored
    for untrusted Bob.
    """
    who = untrusted or getattr(b, "untrusted", "alice")
    A, B, C, E = 0, 1, 2, 3
    if who == "alice":
        families = {
            "bob": ([B], B),
            "charlie": ([C], C),
            "alice+eve": ([A, E], A),
        }
    else:
        families = {
            "alice": ([A], A),
            "charlie": ([C], C),
            "bob+eve": ([B, E], B),
        }
    tol = 0.0 if b.arithmetic_mode == "exact" else 1e-10
    directions = {}
    for name, (sum_over, vary) in families.items():
        worst = _marginal_violation(b, sum_over, vary)
        directions[name] = (worst <= tol, worst)
    return NsReport(directions, tol)


def check_nonsignaling_all(b: Behavior, tol: float | None = None) -> NsReport:
    """Full NS check for an ordinary behavior: no party's setting is visible
    in the marginal of the remaining parties."""
    if tol is None:
        tol = 0.0 if b.arithmetic_mode == "exact" else 1e-10
    directions = {}
    for i in range(b.scenario.parties):
        worst = _marginal_violation(b, [i], i)
        directions[f"party{i}"] = (worst <= tol, worst)
    return NsReport(directions, tol)


# ---------------------------------------------------------------------------
# correlators


def full_correlators(b: Behavior):
    """E(x1..xn) = sum over outcomes of (-1)^(a1+...+an) p, binary outcomes."""
    sc = b.scenario
    if any(o != 2 for o in sc.outcomes):
        raise DimensionMismatch("full correlators require binary outcomes")
    out = {}
    for xs in sc.setting_tuples():
        total = 0
        for outs in sc.outcome_tuples():
            term = b.at(xs, outs)
            total += -term if (sum(outs) & 1) else term
        out[xs] = total
    return out
