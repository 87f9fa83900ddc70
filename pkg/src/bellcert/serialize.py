"""JSON round-tripping for behaviors and Bell functionals.

Exact-mode tensors are written as "num/den" strings so that load(dump(x))
reproduces x bit-exactly; float mode uses plain JSON numbers.
"""

from __future__ import annotations

import json
from fractions import Fraction

from .behavior import Behavior, ExtendedBehavior
from .scenario import Scenario


def _encode_value(v, mode):
    if mode == "exact":
        f = Fraction(v)
        return f"{f.numerator}/{f.denominator}"
    return float(v)


def _decode_value(v, mode):
    if mode == "exact":
        return Fraction(v) if isinstance(v, str) else Fraction(v)
    return float(v)


def behavior_to_dict(b: Behavior) -> dict:
    d = {
        "parties": b.scenario.parties,
        "settings": list(b.scenario.settings),
        "outcomes": list(b.scenario.outcomes),
        "arithmetic": b.arithmetic_mode,
        "p": [_encode_value(v, b.arithmetic_mode) for v in b.p],
    }
    if isinstance(b, ExtendedBehavior):
        d["untrusted"] = b.untrusted
    return d


def behavior_from_dict(d: dict) -> Behavior:
    sc = Scenario(tuple(d["settings"]), tuple(d["outcomes"]))
    mode = d.get("arithmetic", "exact")
    entries = [_decode_value(v, mode) for v in d["p"]]
    if "untrusted" in d:
        return ExtendedBehavior(sc, entries, d["untrusted"], mode)
    return Behavior(sc, entries, mode)


def dump_behavior(b: Behavior, path) -> None:
    with open(path, "w") as fh:
        json.dump(behavior_to_dict(b), fh, indent=1)
        fh.write("\n")


def load_behavior(path) -> Behavior:
    with open(path) as fh:
        return behavior_from_dict(json.load(fh))


def functional_to_dict(f) -> dict:
    return {
        "name": f.name,
        "parties": f.scenario.parties,
        "settings": list(f.scenario.settings),
        "outcomes": list(f.scenario.outcomes),
        "arithmetic": "exact",
        "p": [_encode_value(v, "exact") for v in f.coefficients],
        "bound": _encode_value(f.bound, "exact"),
    }


def functional_from_dict(d: dict):
    from .functionals import BellFunctional

    sc = Scenario(tuple(d["settings"]), tuple(d["outcomes"]))
    coeffs = [Fraction(v) for v in d["p"]]
    return BellFunctional(sc, coeffs, Fraction(d["bound"]), d.get("name", ""))


def dump_functional(f, path) -> None:
    with open(path, "w") as fh:
        json.dump(functional_to_dict(f), fh, indent=1)
        fh.write("\n")


def load_functional(path):
    with open(path) as fh:
        return functional_from_dict(json.load(fh))
