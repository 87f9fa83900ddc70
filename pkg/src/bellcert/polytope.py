"""Causal-structure polytopes in full-correlator space, exactly.

Deterministic strategies of the untrusted-receiver models are enumerated,
projected to the 8 full correlators E_xyz and converted to facets with an
incremental double description method over exact integers.  Facet lists are
canonicalized (primitive integer normals, normal.x <= offset, sorted), which
makes them suitable for golden-file comparison.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

from .behavior import Behavior, full_correlators
from .errors import DimensionMismatch, NotFullDimensional
from .lp import LinearProgram, solve_lp

BITS = (0, 1)


@dataclass(frozen=True)
class CausalModel:
    """Which receiver is untrusted, plus the per-party response signatures."""

    untrusted: str                       # alice | bob | either
    signatures: tuple                    # ((output, parents), ...)

    @staticmethod
    def alice() -> "CausalModel":
        return CausalModel(
            "alice",
            (("a", ("x",)), ("b", ("x", "y")), ("c", ("x", "z")), ("e", ("x",))),
        )

    @staticmethod
    def bob() -> "CausalModel":
        return CausalModel(
            "bob",
            (("a", ("x", "y")), ("b", ("y",)), ("c", ("y", "z")), ("e", ("y",))),
        )

    @staticmethod
    def either() -> "CausalModel":
        return CausalModel(
            "either", CausalModel.alice().signatures + CausalModel.bob().signatures
        )


@dataclass(frozen=True)
class VRep:
    dimension: int
    vertices: tuple                      # tuples of Fraction
    provenance: tuple = ()

    def __post_init__(self):
        for v in self.vertices:
            if len(v) != self.dimension:
                raise DimensionMismatch("vertex dimension mismatch")


@dataclass(frozen=True)
class HRep:
    dimension: int
    facets: tuple                        # ((normal ints...), offset int), normal.x <= offset


def deterministic_strategies(model: str):
    """Outcome tables (a,b,c) per setting tuple for each deterministic map.

    Untrusted Alice: a=f(x), b=g(x,y), c=h(x,z); mirrored for Bob.  The raw
    count is 4*16*16 = 1024 per model before projection.
    """
    if model == "alice":
        for f in itertools.product(BITS, repeat=2):
            for g in itertools.product(BITS, repeat=4):
                for h in itertools.product(BITS, repeat=4):
                    yield {
                        (x, y, z): (f[x], g[2 * x + y], h[2 * x + z])
                        for x, y, z in itertools.product(BITS, BITS, BITS)
                    }
    elif model == "bob":
        for f in itertools.product(BITS, repeat=4):
            for g in itertools.product(BITS, repeat=2):
                for h in itertools.product(BITS, repeat=4):
                    yield {
                        (x, y, z): (f[2 * x + y], g[y], h[2 * y + z])
                        for x, y, z in itertools.product(BITS, BITS, BITS)
                    }
    elif model == "local":
        for f in itertools.product(BITS, repeat=2):
            for g in itertools.product(BITS, repeat=2):
                for h in itertools.product(BITS, repeat=2):
                    yield {
                        (x, y, z): (f[x], g[y], h[z])
                        for x, y, z in itertools.product(BITS, BITS, BITS)
                    }
    else:
        raise DimensionMismatch(f"unknown strategy model {model!r}")


SETTING_ORDER = list(itertools.product(BITS, BITS, BITS))


def project_correlators(strategies, provenance="") -> VRep:
    """Map each strategy table to its 8-vector E_xyz = (-1)^(a+b+c), dedup."""
    seen = {}
    for table in strategies:
        vec = tuple(Fraction((-1) ** (sum(table[s]) & 1)) for s in SETTING_ORDER)
        seen.setdefault(vec, provenance)
    verts = tuple(sorted(seen))
    return VRep(8, verts, tuple(seen[v] for v in verts))


def enumerate_vertices(model) -> VRep:
    """V-representation of the untrusted-Alice/Bob/either correlator polytope."""
    name = model.untrusted if isinstance(model, CausalModel) else str(model)
    if name in ("alice", "bob", "local"):
        return project_correlators(deterministic_strategies(name), name)
    if name != "either":
        raise DimensionMismatch(f"unknown causal model {name!r}")
    alice = set(enumerate_vertices("alice").vertices)
    bob = set(enumerate_vertices("bob").vertices)
    verts = tuple(sorted(alice | bob))
    prov = tuple(
        "both" if v in alice and v in bob else ("alice" if v in alice else "bob")
        for v in verts
    )
    return VRep(8, verts, prov)


def bipartite_local_vrep() -> VRep:
    """Sanity preset: the bipartite local polytope over marginals+correlators.

    Coordinates (<B_0>, <B_1>, <C_0>, <C_1>, E_00, E_01, E_10, E_11); the 16
    deterministic strategies are all distinct here and the polytope is full
    dimensional, with the textbook facet list: 16 positivity facets plus the
    8 CHSH symmetries.
    """
    verts = []
    for g in itertools.product(BITS, repeat=2):
        for h in itertools.product(BITS, repeat=2):
            u = [Fraction((-1) ** g[y]) for y in BITS]
            w = [Fraction((-1) ** h[z]) for z in BITS]
            verts.append(
                tuple(u)
                + tuple(w)
                + tuple(u[y] * w[z] for y, z in itertools.product(BITS, BITS))
            )
    verts = tuple(sorted(set(verts)))
    return VRep(8, verts, ("local",) * len(verts))


# ---------------------------------------------------------------------------
# exact double description


def _primitive(vec):
    """Scale a rational vector to coprime integers (direction preserved)."""
    den = 1
    for v in vec:
        f = Fraction(v)
        den = den * f.denominator // gcd(den, f.denominator)
    ints = [int(Fraction(v) * den) for v in vec]
    g = 0
    for v in ints:
        g = gcd(g, abs(v))
    if g > 1:
        ints = [v // g for v in ints]
    return tuple(ints)


def _exact_rank(rows):
    """Rank of a list of Fraction/int vectors by Gaussian elimination."""
    mat = [list(map(Fraction, r)) for r in rows]
    rank = 0
    ncols = len(mat[0]) if mat else 0
    for col in range(ncols):
        piv = next((i for i in range(rank, len(mat)) if mat[i][col] != 0), None)
        if piv is None:
            continue
        mat[rank], mat[piv] = mat[piv], mat[rank]
        prow = mat[rank]
        for i in range(len(mat)):
            if i != rank and mat[i][col] != 0:
                f = mat[i][col] / prow[col]
                mat[i] = [a - f * b for a, b in zip(mat[i], prow)]
        rank += 1
        if rank == len(mat):
            break
    return rank


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _invert(mat):
    n = len(mat)
    aug = [
        list(map(Fraction, mat[i])) + [Fraction(int(i == j)) for j in range(n)]
        for i in range(n)
    ]
    for col in range(n):
        piv = next(i for i in range(col, n) if aug[i][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for i in range(n):
            if i != col and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[col])]
    return [row[n:] for row in aug]


def dd_cone_rays(rows):
    """Extreme rays of the pointed cone {w : row . w >= 0 for all rows}.

    Incremental double description in exact integer arithmetic.  Rows are
    inserted in the given order (callers pass deterministically sorted rows);
    adjacency uses the combinatorial test on exact tight-sets.
    """
    rows = [tuple(map(Fraction, r)) for r in rows]
    dim = len(rows[0])
    idx = []
    for i, r in enumerate(rows):
        if _exact_rank([rows[j] for j in idx] + [r]) > len(idx):
            idx.append(i)
        if len(idx) == dim:
            break
    if len(idx) < dim:
        raise NotFullDimensional("constraint rows do not span the space")
    mb = [list(rows[i]) for i in idx]
    inv = _invert(mb)
    rays = [_primitive([inv[r][c] for r in range(dim)]) for c in range(dim)]
    processed = list(idx)

    def tight_mask(ray):
        mask = 0
        for k, i in enumerate(processed):
            if _dot(rows[i], ray) == 0:
                mask |= 1 << k
        return mask

    masks = [tight_mask(r) for r in rays]
    pending = [i for i in range(len(rows)) if i not in idx]
    for i in pending:
        row = rows[i]
        vals = [_dot(row, r) for r in rays]
        pos = [k for k, v in enumerate(vals) if v > 0]
        zer = [k for k, v in enumerate(vals) if v == 0]
        neg = [k for k, v in enumerate(vals) if v < 0]
        if neg:
            keep_rays = [rays[k] for k in pos + zer]
            keep_masks = [masks[k] for k in pos + zer]
            combos = []
            for kp in pos:
                for kn in neg:
                    common = masks[kp] & masks[kn]
                    if bin(common).count("1") < dim - 2:
                        continue
                    adjacent = True
                    for kk in range(len(rays)):
                        if kk in (kp, kn):
                            continue
                        if masks[kk] & common == common:
                            adjacent = False
                            break
                    if not adjacent:
                        continue
                    combos.append(
                        _primitive(
                            [
                                vals[kp] * rays[kn][t] - vals[kn] * rays[kp][t]
                                for t in range(dim)
                            ]
                        )
                    )
            rays = keep_rays + combos
            masks = keep_masks + [tight_mask(r) for r in combos]
        bit = 1 << len(processed)
        processed.append(i)
        masks = [
            m | (bit if _dot(row, r) == 0 else 0) for m, r in zip(masks, rays)
        ]
    return rays


def facets(v: VRep) -> HRep:
    """Facets of conv(vertices) by double description on the polar cone.

    Raises NotFullDimensional unless the vertices affinely span the space.
    Output is canonical: primitive integer (normal, offset) with
    normal . x <= offset, sorted lexicographically.
    """
    verts = [tuple(map(Fraction, w)) for w in v.vertices]
    if not verts:
        raise NotFullDimensional("empty vertex set")
    base = verts[0]
    diffs = [[a - b for a, b in zip(w, base)] for w in verts[1:]]
    if not diffs or _exact_rank(diffs) < v.dimension:
        raise NotFullDimensional(
            f"vertices span {(_exact_rank(diffs) if diffs else 0)} < {v.dimension} dims"
        )
    # rays (alpha, u) of {alpha + u.v >= 0 for all v} are facets -u.x <= alpha
    rows = [(Fraction(1),) + w for w in sorted(verts)]
    rays = dd_cone_rays(rows)
    out = []
    for ray in rays:
        alpha, u = ray[0], ray[1:]
        out.append((tuple(-t for t in u), alpha))
    return HRep(v.dimension, tuple(sorted(out)))


def vertices_of(h: HRep) -> VRep:
    """Vertices of {x : normal.x <= offset} (bounded polytopes only)."""
    rows = [
        (Fraction(offset),) + tuple(Fraction(-t) for t in normal)
        for normal, offset in h.facets
    ]
    rays = dd_cone_rays(rows)
    verts = set()
    for ray in rays:
        t = ray[0]
        if t <= 0:
            raise NotFullDimensional("polyhedron is unbounded")
        verts.add(tuple(Fraction(c, t) for c in ray[1:]))
    return VRep(h.dimension, tuple(sorted(verts)))


def verify_duality(v: VRep, h: HRep) -> bool:
    """Every vertex satisfies every facet; every facet tight at >= dim
    affinely independent vertices.  Exact."""
    for normal, offset in h.facets:
        tight = []
        for w in v.vertices:
            s = _dot(normal, w)
            if s > offset:
                return False
            if s == offset:
                tight.append(w)
        if len(tight) < h.dimension:
            return False
        base = tight[0]
        diffs = [[a - b for a, b in zip(t, base)] for t in tight[1:]]
        if _exact_rank(diffs) < h.dimension - 1:
            return False
    return True


def membership(point, v: VRep):
    """Exact convex-combination feasibility; returns (inside, certificate).

    Accepts a correlator vector of rationals or a tripartite binary Behavior
    (projected to its full correlators).  Outside points get a separating
    functional (u, u0) with u.x <= u0 over the polytope and u.point > u0.
    """
    if isinstance(point, Behavior):
        corr = full_correlators(point)
        point = tuple(corr[s] for s in SETTING_ORDER)
    point = tuple(map(Fraction, point))
    if len(point) != v.dimension:
        raise DimensionMismatch(f"point dim {len(point)} != {v.dimension}")
    nv = len(v.vertices)
    eq_rows = [
        ([Fraction(w[d]) for w in v.vertices], point[d]) for d in range(v.dimension)
    ]
    eq_rows.append(([Fraction(1)] * nv, Fraction(1)))
    lp = LinearProgram(
        n=nv,
        objective=[Fraction(0)] * nv,
        eq_rows=eq_rows,
        arithmetic_mode="exact",
    )
    sol = solve_lp(lp)
    if sol.status == "optimal":
        return True, None
    if sol.status != "infeasible":
        raise NotFullDimensional(f"membership solve failed: {sol.status}")
    cert = sol.certificate
    u = tuple(cert[: v.dimension])
    u0 = -cert[v.dimension]
    return False, (u, u0)


def most_violated_facet(point, h: HRep):
    """The facet maximizing normal.point - offset; (facet, violation)."""
    if isinstance(point, Behavior):
        corr = full_correlators(point)
        point = tuple(corr[s] for s in SETTING_ORDER)
    best = None
    best_gap = None
    for normal, offset in h.facets:
        gap = _dot(normal, point) - offset
        if best_gap is None or gap > best_gap:
            best_gap = gap
            best = (normal, offset)
    return best, best_gap


# ---------------------------------------------------------------------------
# facet classification


def is_trivial_facet(normal, offset) -> bool:
    """Trivial facets bound a single correlator: the |E_xyz| <= 1 form."""
    return sum(1 for t in normal if t != 0) == 1


def svetlichny_facet_orbit() -> set:
    """All images of the Svetlichny inequality under local relabelings,
    as canonical (normal, offset) pairs in full-correlator coordinates.

    The group is generated by party permutations, per-party input flips and
    per-party per-setting output flips; on the complete quadratic form these
    generate exactly the sign patterns (-1)^(xy+xz+yz+ax+by+cz+d).
    """
    orbit = set()
    for a, b, c, d in itertools.product(BITS, repeat=4):
        normal = tuple(
            (-1)
            ** (((x & y) ^ (x & z) ^ (y & z) ^ (a & x) ^ (b & y) ^ (c & z) ^ d) & 1)
            for x, y, z in SETTING_ORDER
        )
        orbit.add((normal, 4))
    return orbit


def classify_facets(h: HRep) -> dict:
    """Counts of trivial, Svetlichny-orbit and remaining facets."""
    orbit = svetlichny_facet_orbit()
    counts = {"trivial": 0, "svetlichny": 0, "other": 0}
    for normal, offset in h.facets:
        if is_trivial_facet(normal, offset):
            counts["trivial"] += 1
        elif (tuple(normal), int(offset)) in orbit:
            counts["svetlichny"] += 1
        else:
            counts["other"] += 1
    return counts


# ---------------------------------------------------------------------------
# canonical JSON


def hrep_to_json(h: HRep) -> str:
    doc = {
        "dimension": h.dimension,
        "count": len(h.facets),
        "facets": [[*map(int, normal), int(offset)] for normal, offset in h.facets],
    }
    return json.dumps(doc, indent=1) + "\n"


def hrep_from_json(text: str) -> HRep:
    doc = json.loads(text)
    facets_list = tuple(
        (tuple(int(v) for v in row[:-1]), int(row[-1])) for row in doc["facets"]
    )
    return HRep(doc["dimension"], facets_list)
