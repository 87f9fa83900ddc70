"""Desk-scale quantum states and measurements generating float behaviors.

Dense complex matrices only; parties are qubits and the scenario is capped
at 10 qubits.  Outcome 0 corresponds to the +1 eigenvalue of an observable,
matching the correlator convention E = sum (-1)^(a+b+c) p.
"""

from __future__ import annotations

import itertools

import numpy as np

from .behavior import Behavior
from .errors import DimensionMismatch, NonUnitObservable, VisibilityOutOfRange
from .scenario import Scenario

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
EIG_TOL = 1e-10
MAX_QUBITS = 10

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class DensityMatrix:
    """A validated density operator."""

    __slots__ = ("dim", "entries")

    def __init__(self, entries):
        m = np.asarray(entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"density matrix must be square, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise DimensionMismatch("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > HERMITIAN_TOL:
            raise DimensionMismatch(f"trace {np.trace(m).real!r} != 1")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise DimensionMismatch("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "dim", m.shape[0])
        object.__setattr__(self, "entries", m)

    def __setattr__(self, name, value):
        raise AttributeError("DensityMatrix is immutable")

    def purity(self) -> float:
        return float(np.trace(self.entries @ self.entries).real)


class Measurement:
    """A POVM given by one effect per outcome."""

    __slots__ = ("effects",)

    def __init__(self, effects):
        effects = [np.asarray(e, dtype=complex) for e in effects]
        dim = effects[0].shape[0]
        total = np.zeros((dim, dim), dtype=complex)
        for e in effects:
            if e.shape != (dim, dim):
                raise DimensionMismatch("all effects must share one dimension")
            if np.max(np.abs(e - e.conj().T)) > HERMITIAN_TOL:
                raise DimensionMismatch("effect is not Hermitian")
            if np.linalg.eigvalsh(e).min() < -PSD_TOL:
                raise DimensionMismatch("effect has a negative eigenvalue")
            total += e
        if np.max(np.abs(total - np.eye(dim))) > HERMITIAN_TOL:
            raise DimensionMismatch("effects do not sum to the identity")
        for e in effects:
            e.setflags(write=False)
        object.__setattr__(self, "effects", tuple(effects))

    def __setattr__(self, name, value):
        raise AttributeError("Measurement is immutable")

    @property
    def outcomes(self) -> int:
        return len(self.effects)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]


def ghz_state(n: int) -> DensityMatrix:
    """Projector onto (|0..0> + |1..1>)/sqrt(2) for n parties."""
    if n < 2:
        raise DimensionMismatch("GHZ state needs at least 2 parties")
    if n > MAX_QUBITS:
        raise DimensionMismatch(f"party count {n} exceeds the {MAX_QUBITS}-qubit cap")
    dim = 2**n
    vec = np.zeros(dim, dtype=complex)
    vec[0] = vec[-1] = 1 / np.sqrt(2)
    return DensityMatrix(np.outer(vec, vec.conj()))


def noisy_state(rho: DensityMatrix, v) -> DensityMatrix:
    """v * rho + (1 - v) * I/dim."""
    v = float(v)
    if not 0 <= v <= 1:
        raise VisibilityOutOfRange(f"visibility {v} outside [0, 1]")
    mixed = np.eye(rho.dim) / rho.dim
    return DensityMatrix(v * rho.entries + (1 - v) * mixed)


def pauli_measurement(spec) -> Measurement:
    """Binary projective measurement of cx*sx + cy*sy + cz*sz, |c| = 1.

    Outcome 0 is the +1 eigenspace projector.
    """
    cx, cy, cz = (float(c) for c in spec)
    norm = cx * cx + cy * cy + cz * cz
    if abs(norm - 1.0) > 1e-9:
        raise NonUnitObservable(f"coefficient norm {norm!r} != 1")
    obs = cx * PAULI_X + cy * PAULI_Y + cz * PAULI_Z
    vals, vecs = np.linalg.eigh(obs)
    plus = np.zeros((2, 2), dtype=complex)
    minus = np.zeros((2, 2), dtype=complex)
    for k in range(2):
        proj = np.outer(vecs[:, k], vecs[:, k].conj())
        if vals[k] > EIG_TOL:
            plus += proj
        else:
            minus += proj
    return Measurement([plus, minus])


def observable(meas: Measurement) -> np.ndarray:
    """M0 - M1 for a binary measurement."""
    if meas.outcomes != 2:
        raise DimensionMismatch("observable requires a binary measurement")
    return meas.effects[0] - meas.effects[1]


def behavior_from_quantum(state: DensityMatrix, measurements) -> Behavior:
    """p(outcomes|settings) = Tr[(M1 x M2 x ...) rho], as a float Behavior.

    measurements[i] is party i's list of Measurement objects, one per setting.
    """
    dims = [m[0].dim for m in measurements]
    total = 1
    for d in dims:
        total *= d
    if total != state.dim:
        raise DimensionMismatch(
            f"party dimensions multiply to {total} != state dim {state.dim}"
        )
    settings = tuple(len(m) for m in measurements)
    outcomes = tuple(m[0].outcomes for m in measurements)
    for party in measurements:
        for meas in party:
            if meas.outcomes != party[0].outcomes or meas.dim != party[0].dim:
                raise DimensionMismatch("inconsistent measurement shapes for a party")
    sc = Scenario(settings, outcomes)
    entries = np.empty(sc.size)
    rho = state.entries
    for xs in sc.setting_tuples():
        for outs in sc.outcome_tuples():
            op = measurements[0][xs[0]].effects[outs[0]]
            for i in range(1, len(measurements)):
                op = np.kron(op, measurements[i][xs[i]].effects[outs[i]])
            entries[sc.flat_index(xs, outs)] = np.trace(op @ rho).real
    entries = np.clip(entries, 0.0, None)
    return Behavior(sc, entries.tolist(), "float")


INV_SQRT2 = 1 / np.sqrt(2)


def svetlichny_optimal_setup(v):
    """State and settings maximizing S on the visibility-v GHZ state.

    Alice measures (sx - sy)/sqrt(2) and (sx + sy)/sqrt(2); Bob and Charlie
    measure sx and sy.  Gives S(v) = 4*sqrt(2)*v.
    """
    v = float(v)
    if not 0 <= v <= 1:
        raise VisibilityOutOfRange(f"visibility {v} outside [0, 1]")
    state = noisy_state(ghz_state(3), v)
    alice = [
        pauli_measurement((INV_SQRT2, -INV_SQRT2, 0)),
        pauli_measurement((INV_SQRT2, INV_SQRT2, 0)),
    ]
    bobcharlie = [pauli_measurement((1, 0, 0)), pauli_measurement((0, 1, 0))]
    return state, [alice, list(bobcharlie), list(bobcharlie)]


def mermin_protocol_setup(v=1.0):
    """The secret-sharing protocol settings: every party measures sx, sy."""
    v = float(v)
    if not 0 <= v <= 1:
        raise VisibilityOutOfRange(f"visibility {v} outside [0, 1]")
    state = noisy_state(ghz_state(3), v)
    xy = [pauli_measurement((1, 0, 0)), pauli_measurement((0, 1, 0))]
    return state, [list(xy), list(xy), list(xy)]


def conditional_bc_behavior(b: Behavior, a: int, x: int) -> Behavior:
    """Bob-Charlie behavior conditioned on Alice's outcome a at input x."""
    if b.scenario.parties != 3:
        raise DimensionMismatch("conditioning requires a tripartite behavior")
    sub = Scenario(b.scenario.settings[1:], b.scenario.outcomes[1:])
    entries = []
    for y, z in sub.setting_tuples():
        m = sum(
            b.at((x, y, z), (a, bb, cc))
            for bb, cc in itertools.product(
                range(sub.outcomes[0]), range(sub.outcomes[1])
            )
        )
        if m == 0:
            raise DimensionMismatch(f"Alice marginal vanishes at a={a}, x={x}")
        for bb, cc in sub.outcome_tuples():
            entries.append(b.at((x, y, z), (a, bb, cc)) / m)
    return Behavior(sub, entries, b.arithmetic_mode)
