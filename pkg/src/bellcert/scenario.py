"""Measurement scenarios and the canonical flat index convention.

Every probability table in this library is stored as a flat vector in one
fixed order, so that behaviors, Bell functionals and LP/SDP constraint rows
can be combined without any transposition logic:

    flat = settings_index * n_outcome_tuples + outcomes_index

with both sub-indices mixed-radix, party 1 fastest:

    settings_index = x1 + s1*(x2 + s2*(x3 + ...))
    outcomes_index = a1 + o1*(a2 + o2*(a3 + ...))

i.e. settings are the outermost (slowest) block and within each block the
first party's outcome varies fastest.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import DimensionMismatch


@dataclass(frozen=True)
class Scenario:
    """A multipartite Bell scenario: per-party setting and outcome counts."""

    settings: tuple[int, ...]
    outcomes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "settings", tuple(int(s) for s in self.settings))
        object.__setattr__(self, "outcomes", tuple(int(o) for o in self.outcomes))
        if len(self.settings) != len(self.outcomes):
            raise DimensionMismatch(
                f"{len(self.settings)} setting counts vs {len(self.outcomes)} outcome counts"
            )
        if any(s < 1 for s in self.settings) or any(o < 1 for o in self.outcomes):
            raise DimensionMismatch("all setting/outcome counts must be >= 1")

    @property
    def parties(self) -> int:
        return len(self.settings)

    @property
    def n_setting_tuples(self) -> int:
        n = 1
        for s in self.settings:
            n *= s
        return n

    @property
    def n_outcome_tuples(self) -> int:
        n = 1
        for o in self.outcomes:
            n *= o
        return n

    @property
    def size(self) -> int:
        """Total number of entries in a probability table."""
        return self.n_setting_tuples * self.n_outcome_tuples

    def settings_index(self, xs) -> int:
        idx, stride = 0, 1
        for x, s in zip(xs, self.settings):
            if not 0 <= x < s:
                raise DimensionMismatch(f"setting {x} out of range {s}")
            idx += x * stride
            stride *= s
        return idx

    def outcomes_index(self, outs) -> int:
        idx, stride = 0, 1
        for a, o in zip(outs, self.outcomes):
            if not 0 <= a < o:
                raise DimensionMismatch(f"outcome {a} out of range {o}")
            idx += a * stride
            stride *= o
        return idx

    def flat_index(self, xs, outs) -> int:
        if len(xs) != self.parties or len(outs) != self.parties:
            raise DimensionMismatch("setting/outcome tuple length != party count")
        return self.settings_index(xs) * self.n_outcome_tuples + self.outcomes_index(outs)

    def setting_tuples(self):
        """All setting tuples in canonical (party-1-fastest) order."""
        ranges = [range(s) for s in self.settings]
        for tup in itertools.product(*reversed(ranges)):
            yield tuple(reversed(tup))

    def outcome_tuples(self):
        ranges = [range(o) for o in self.outcomes]
        for tup in itertools.product(*reversed(ranges)):
            yield tuple(reversed(tup))

    def entries(self):
        """All (settings, outcomes) pairs in flat order."""
        for xs in self.setting_tuples():
            for outs in self.outcome_tuples():
                yield xs, outs


def tripartite_binary() -> Scenario:
    """Three parties, binary inputs and outputs."""
    return Scenario((2, 2, 2), (2, 2, 2))


def tripartite_with_adversary() -> Scenario:
    """A, B, C with binary inputs/outputs plus an adversary outcome slot.

    The adversary is modelled as a fourth party with a single (dummy) setting,
    so p(a,b,c,e|x,y,z) is an ordinary table over four parties.
    """
    return Scenario((2, 2, 2, 1), (2, 2, 2, 2))


def nparty_binary(n: int) -> Scenario:
    return Scenario((2,) * n, (2,) * n)
