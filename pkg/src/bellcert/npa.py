"""Moment-matrix structures for the untrusted-receiver quantum model.

The operator scenario realizes p(abce|xyz) = Tr[(E_x A_x B_xy C_xz) rho]:
one outcome-0 projector per setting and party, distinct parties commuting,
the untrusted receiver's input appearing in everyone else's setting index.
Words are canonicalized by sorting letters into party order (within-party
order preserved, projectors idempotent) and identifying a word with its
adjoint, which is what ties equal moment-matrix entries together.

Level specs follow the grammar "<int>(+<PARTIES>)*", e.g.
"2+ABC+ABE+BCE+ABCE": base words up to the given length plus one projector
per party for each listed combination.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConflictingConstraints, DimensionMismatch, MalformedProgram
from .sdp import SdpBuilder, SemidefiniteProgram

PARTY_ORDER = {"A": 0, "B": 1, "C": 2, "E": 3}
BITS = (0, 1)


def reduce_word(word):
    """Canonical form: letters grouped by party, adjacent repeats collapsed."""
    parts = {p: [] for p in PARTY_ORDER}
    for p, s in word:
        seq = parts[p]
        if seq and seq[-1] == s:
            continue
        seq.append(s)
    out = []
    for p in sorted(PARTY_ORDER, key=PARTY_ORDER.get):
        out.extend((p, s) for s in parts[p])
    return tuple(out)


def adjoint(word):
    return tuple(reversed(word))


def canonical(word):
    """Reduced word identified with its adjoint (real moment matrices)."""
    w = reduce_word(word)
    return min(w, adjoint(w))


@dataclass(frozen=True)
class OperatorScenario:
    """Per-party setting counts of the tripartite+adversary operator model."""

    untrusted: str = "alice"

    @property
    def setting_counts(self) -> dict:
        return {"A": 2 if self.untrusted == "alice" else 4,
                "B": 4 if self.untrusted == "alice" else 2,
                "C": 4,
                "E": 2}

    def letters(self):
        out = []
        for p in sorted(PARTY_ORDER, key=PARTY_ORDER.get):
            out.extend((p, s) for s in range(self.setting_counts[p]))
        return out

    def setting_of(self, party: str, x: int, y: int, z: int) -> int:
        """Operator setting index for a party at protocol inputs (x, y, z)."""
        if self.untrusted == "alice":
            return {"A": x, "B": 2 * x + y, "C": 2 * x + z, "E": x}[party]
        return {"A": 2 * y + x, "B": y, "C": 2 * y + z, "E": y}[party]


@dataclass(frozen=True)
class LevelSpec:
    base: int
    extras: tuple = ()

    @staticmethod
    def parse(text: str) -> "LevelSpec":
        parts = text.strip().split("+")
        try:
            base = int(parts[0])
        except ValueError:
            raise MalformedProgram(f"level spec must start with an integer: {text!r}")
        extras = []
        for word in parts[1:]:
            if not word or not all(ch in PARTY_ORDER for ch in word):
                raise MalformedProgram(f"bad extra monomial class {word!r}")
            if len(set(word)) != len(word) or len(word) < 3:
                raise MalformedProgram(
                    f"extra class {word!r} must name >= 3 distinct parties"
                )
            extras.append("".join(sorted(word, key=PARTY_ORDER.get)))
        return LevelSpec(base, tuple(extras))

    def __str__(self):
        return "+".join([str(self.base), *self.extras])


@dataclass
class MomentStructure:
    scenario: OperatorScenario
    level: LevelSpec
    monomials: list                    # canonical words indexing rows/cols
    words: list                        # distinct entry classes (canonical words)
    word_index: dict
    classes: np.ndarray                # (n, n) int array of word ids
    prob_map: dict = field(default_factory=dict)   # (a,b,c,e,x,y,z) -> [(word id, coeff)]

    @property
    def size(self) -> int:
        return len(self.monomials)

    @property
    def free_entries(self) -> int:
        return len(self.words)

    def expectation(self, factors):
        """<prod (proj or 1-proj)> as [(word id, coeff)]; factors are
        (party, setting, outcome) with outcome 1 meaning the complement."""
        out = {}

        def rec(i, word, coeff):
            if i == len(factors):
                w = canonical(word)
                out[w] = out.get(w, 0.0) + coeff
                return
            party, setting, outcome = factors[i]
            if outcome == 0:
                rec(i + 1, word + ((party, setting),), coeff)
            else:
                rec(i + 1, word, coeff)
                rec(i + 1, word + ((party, setting),), -coeff)

        rec(0, (), 1.0)
        terms = []
        for w, coeff in out.items():
            if w not in self.word_index:
                raise DimensionMismatch(f"moment word {w} outside the structure")
            terms.append((self.word_index[w], coeff))
        return terms

    def prob_terms(self, a, b, c, e, x, y, z):
        key = (a, b, c, e, x, y, z)
        if key not in self.prob_map:
            sc = self.scenario
            self.prob_map[key] = self.expectation(
                [
                    ("A", sc.setting_of("A", x, y, z), a),
                    ("B", sc.setting_of("B", x, y, z), b),
                    ("C", sc.setting_of("C", x, y, z), c),
                    ("E", sc.setting_of("E", x, y, z), e),
                ]
            )
        return self.prob_map[key]

    def marginal_terms(self, a, b, c, x, y, z):
        sc = self.scenario
        return self.expectation(
            [
                ("A", sc.setting_of("A", x, y, z), a),
                ("B", sc.setting_of("B", x, y, z), b),
                ("C", sc.setting_of("C", x, y, z), c),
            ]
        )


def monomial_basis(scenario: OperatorScenario, level: LevelSpec) -> MomentStructure:
    """All words up to the base length plus the listed cross-party classes,
    reduced by idempotence and commutation, as a MomentStructure."""
    letters = scenario.letters()
    mons = [()]
    seen = {()}
    # base level: products of up to `base` letters
    frontier = [()]
    for _ in range(level.base):
        nxt = []
        for w in frontier:
            for letter in letters:
                r = reduce_word(w + (letter,))
                if len(r) == len(w) + 1 and r not in seen:
                    seen.add(r)
                    nxt.append(r)
        mons.extend(sorted(nxt))
        frontier = nxt
    for combo in level.extras:
        fresh = []
        for tup in itertools.product(
            *[[(p, s) for s in range(scenario.setting_counts[p])] for p in combo]
        ):
            w = reduce_word(tup)
            if w not in seen:
                seen.add(w)
                fresh.append(w)
        mons.extend(sorted(fresh))
    n = len(mons)
    words, word_index = [], {}
    classes = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i, n):
            w = canonical(adjoint(mons[i]) + mons[j])
            if w not in word_index:
                word_index[w] = len(words)
                words.append(w)
            classes[i, j] = classes[j, i] = word_index[w]
    return MomentStructure(scenario, level, mons, words, word_index, classes)


def _collect(terms_list):
    """Merge [(var, coeff)] lists into a single dict."""
    acc = {}
    for term in terms_list:
        for var, coeff in term:
            acc[var] = acc.get(var, 0.0) + coeff
    return acc


def assemble_sdp(ms: MomentStructure, constraints) -> SemidefiniteProgram:
    """Emit the guessing-probability SDP for a CertificationConstraints.

    Positivity of the moment matrix, <1> = 1, probability nonnegativity,
    the non-signaling family that is not automatic in this parametrization
    (the untrusted pair's joint marginal independent of the broadcast
    input), exactly one of {fixed quantum marginal, Bell-value equality,
    nothing}, and the optional secret-sharing equality at the target
    settings.  The Bob/Charlie no-signaling families hold identically:
    their sums telescope to moments that carry no foreign setting index.
    """
    if constraints.fixed_marginal is not None and constraints.svetlichny_value is not None:
        raise ConflictingConstraints(
            "fix either the marginal or the Svetlichny value, not both"
        )
    n = ms.size
    nv = ms.free_entries
    builder = SdpBuilder(nv)
    blk = builder.add_dense_block(n)
    done = set()
    cls = ms.classes
    for i in range(n):
        for j in range(i, n):
            k = int(cls[i, j])
            if (i, j) not in done:
                builder.dense_entry(blk, i, j, k)
                done.add((i, j))
    builder.add_eq([ms.word_index[()]], [1.0], 1.0)

    # probability positivity as a diag block
    pblk = builder.add_diag_block(128)
    row = 0
    for x, y, z in itertools.product(BITS, BITS, BITS):
        for a, b, c, e in itertools.product(BITS, BITS, BITS, BITS):
            for var, coeff in ms.prob_terms(a, b, c, e, x, y, z):
                builder.diag_entry(pblk, row, var, coeff)
            row += 1

    # broadcast-input NS family: the trusted pair's joint marginal must not
    # depend on the untrusted receiver's input
    trusted = ("B", "C") if ms.scenario.untrusted == "alice" else ("A", "C")
    for o1, o2 in itertools.product(BITS, BITS):
        for v1, v2 in itertools.product(BITS, BITS):
            rows = []
            for u in BITS:
                if ms.scenario.untrusted == "alice":
                    x, y, z = u, v1, v2
                else:
                    x, y, z = v1, u, v2
                rows.append(
                    ms.expectation(
                        [
                            (trusted[0], ms.scenario.setting_of(trusted[0], x, y, z), o1),
                            (trusted[1], ms.scenario.setting_of(trusted[1], x, y, z), o2),
                        ]
                    )
                )
            diff = _collect([rows[0], [(var, -coeff) for var, coeff in rows[1]]])
            diff = {var: coeff for var, coeff in diff.items() if coeff != 0}
            if diff:
                builder.add_eq(list(diff), list(diff.values()), 0.0)

    if constraints.fixed_marginal is not None:
        marg = constraints.fixed_marginal
        for x, y, z in itertools.product(BITS, BITS, BITS):
            for a, b, c in itertools.product(BITS, BITS, BITS):
                terms = ms.marginal_terms(a, b, c, x, y, z)
                builder.add_eq(
                    [var for var, _ in terms],
                    [coeff for _, coeff in terms],
                    float(marg.at((x, y, z), (a, b, c))),
                )
    elif constraints.svetlichny_value is not None:
        acc = {}
        for x, y, z in itertools.product(BITS, BITS, BITS):
            sign = (-1) ** (((x & y) ^ (x & z) ^ (y & z)) & 1)
            for a, b, c in itertools.product(BITS, BITS, BITS):
                beta = sign * (-1) ** ((a + b + c) & 1)
                for var, coeff in ms.marginal_terms(a, b, c, x, y, z):
                    acc[var] = acc.get(var, 0.0) + beta * coeff
        acc = {var: coeff for var, coeff in acc.items() if coeff != 0}
        builder.add_eq(list(acc), list(acc.values()), float(constraints.svetlichny_value))

    if constraints.secret_sharing:
        xs, ys, zs = constraints.target_settings
        acc = {}
        for a, b, c, e in itertools.product(BITS, BITS, BITS, BITS):
            if a ^ b ^ c == 0:
                for var, coeff in ms.prob_terms(a, b, c, e, xs, ys, zs):
                    acc[var] = acc.get(var, 0.0) + coeff
        builder.add_eq(list(acc), list(acc.values()), 1.0)

    xs, ys, zs = constraints.target_settings
    for a, b, c, e in itertools.product(BITS, BITS, BITS, BITS):
        if e == c:
            for var, coeff in ms.prob_terms(a, b, c, e, xs, ys, zs):
                builder.objective[var] += coeff
    return builder.build(tolerance=getattr(constraints, "tolerance", 1e-7))


def extract_behavior(ms: MomentStructure, y):
    """The probability table encoded by a solved moment vector, as an
    ExtendedBehavior (float mode, clipped at tiny negatives)."""
    from .behavior import ExtendedBehavior
    from .scenario import tripartite_with_adversary

    sc = tripartite_with_adversary()
    entries = np.zeros(sc.size)
    for x, yy, z in itertools.product(BITS, BITS, BITS):
        for a, b, c, e in itertools.product(BITS, BITS, BITS, BITS):
            val = sum(coeff * y[var] for var, coeff in ms.prob_terms(a, b, c, e, x, yy, z))
            entries[sc.flat_index((x, yy, z, 0), (a, b, c, e))] = val
    entries = np.clip(entries, 0.0, None)
    # renormalize per setting block against solver roundoff
    nout = sc.n_outcome_tuples
    for blk_i in range(sc.n_setting_tuples):
        seg = entries[blk_i * nout : (blk_i + 1) * nout]
        total = seg.sum()
        if total > 0:
            seg /= total
    untrusted = ms.scenario.untrusted
    return ExtendedBehavior(sc, entries.tolist(), untrusted, "float")


# ---------------------------------------------------------------------------
# calibration preset


def npa1_chsh_program() -> SemidefiniteProgram:
    """Level-1 bipartite moment SDP maximizing CHSH; optimum 2*sqrt(2).

    Serves as an analytic calibration point for the bundled solver: the
    level-1 relaxation is tight for CHSH.
    """
    letters = [("A", 0), ("A", 1), ("B", 0), ("B", 1)]
    mons = [()] + [(l,) for l in letters]
    n = len(mons)
    words, word_index = [], {}
    classes = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(i, n):
            w = canonical(adjoint(mons[i]) + mons[j])
            if w not in word_index:
                word_index[w] = len(words)
                words.append(w)
            classes[i, j] = classes[j, i] = word_index[w]
    builder = SdpBuilder(len(words))
    blk = builder.add_dense_block(n)
    for i in range(n):
        for j in range(i, n):
            builder.dense_entry(blk, i, j, int(classes[i, j]))
    builder.add_eq([word_index[()]], [1.0], 1.0)

    def moment(*ops):
        return word_index[canonical(tuple(ops))]

    # E_xy = 4<A_x B_y> - 2<A_x> - 2<B_y> + 1  (0 outcome <-> +1 eigenvalue)
    chsh_signs = {(0, 0): 1, (0, 1): 1, (1, 0): 1, (1, 1): -1}
    const = 0.0
    for (x, y), s in chsh_signs.items():
        builder.objective[moment(("A", x), ("B", y))] += 4.0 * s
        builder.objective[moment(("A", x))] += -2.0 * s
        builder.objective[moment(("B", y))] += -2.0 * s
        const += s
    # constant term folded into <1>, which equals 1
    builder.objective[word_index[()]] += const
    return builder.build(tolerance=1e-9)
