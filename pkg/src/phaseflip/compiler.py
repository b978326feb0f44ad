"""Lower logical circuits onto the native gate set of the four-qubit device.

Hadamards become Y^-1 followed by a virtual Z(pi); CNOT becomes
Y^-1 - CZ - Y on the target; Z rotations only move the software phase frame.
Adjacent rotations about the same axis are merged, which removes the
Y Y^-1 pairs an encoder built from CNOT and H would otherwise contain.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .circuit import (
    Idle,
    InjectErrors,
    NativeCircuit,
    PairMeasure,
    ResetSwap,
    frame_after_swap,
    known_states,
)
from .errors import CompositionError, ConnectivityError, ReadoutConstraintError
from .executor import full_unitary_of_circuit
from .gates import (
    DeviceModel,
    RotationGate,
    calibrate_resonant_swap,
    cphase,
    rotation,
    rotation_matrix,
    toffoli_like,
    wrap_phase,
)
from .noise import ErrorInjection
from .state import StateVector, apply_unitary

PREPARED_STATES = {
    "down": (0.0, 0.0),
    "up": (np.pi, 0.0),
    "x": (np.pi / 2, 0.0),
    "-x": (-np.pi / 2, 0.0),
    "y": (np.pi / 2, np.pi / 2),
    "-y": (-np.pi / 2, np.pi / 2),
}

UNITARY_OPS = {"H", "X", "Y", "Z", "CZ", "CNOT", "TOFFOLI", "IDLE"}
ALL_OPS = UNITARY_OPS | {"PREPARE", "RESET", "ERRORS", "MEASURE"}
ARITY = {"H": 1, "X": 1, "Y": 1, "Z": 1, "CZ": 2, "CNOT": 2, "TOFFOLI": 3, "PREPARE": 1, "RESET": 2, "MEASURE": 1}


@dataclass(frozen=True)
class Op:
    """One logical instruction.

    ``angle`` is in radians for X/Y/Z. ``RESET`` takes ``(qubit, helper)``.
    ``IDLE`` uses ``duration`` in seconds; ``ERRORS`` carries ``errors``.
    """

    name: str
    qubits: tuple = ()
    angle: float | None = None
    state: str | None = None
    duration: float = 0.0
    errors: ErrorInjection | None = None

    def __post_init__(self):
        name = self.name.upper()
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if name not in ALL_OPS:
            raise ValueError(f"unknown logical op {self.name!r}")
        if name in ARITY and len(self.qubits) != ARITY[name]:
            raise ValueError(f"{name} takes {ARITY[name]} qubit(s), got {len(self.qubits)}")
        if name in ("X", "Y", "Z") and self.angle is None:
            raise ValueError(f"{name} needs an angle")
        if name == "PREPARE" and self.state not in PREPARED_STATES:
            raise ValueError(f"unknown prepared state {self.state!r}")


@dataclass(frozen=True)
class LogicalCircuit:
    ops: tuple[Op, ...] = ()

    def __post_init__(self):
        ops = tuple(self.ops)
        object.__setattr__(self, "ops", ops)
        seen_measure = False
        for op in ops:
            if op.name == "MEASURE":
                seen_measure = True
            elif seen_measure:
                raise ValueError("MEASURE may only appear as a trailing suffix")

    def __add__(self, other: "LogicalCircuit") -> "LogicalCircuit":
        return LogicalCircuit(self.ops + other.ops)

    @property
    def body(self) -> "LogicalCircuit":
        return LogicalCircuit(tuple(op for op in self.ops if op.name != "MEASURE"))

    @property
    def measured(self) -> tuple:
        return tuple(op.qubits[0] for op in self.ops if op.name == "MEASURE")

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "LogicalCircuit":
        """Build from ``{op, qubits, angle?}`` records with angles in units of pi."""
        ops = []
        for rec in records:
            angle = rec.get("angle")
            ops.append(
                Op(
                    rec["op"],
                    tuple(rec.get("qubits", ())),
                    None if angle is None else float(angle) * np.pi,
                    state=rec.get("state"),
                    duration=float(rec.get("duration_us", 0.0)) * 1e-6,
                )
            )
        return cls(tuple(ops))


# shorthands used by the experiment builders
def H(q):
    return Op("H", (q,))


def X(q, angle=np.pi / 2):
    return Op("X", (q,), angle)


def Y(q, angle=np.pi / 2):
    return Op("Y", (q,), angle)


def Z(q, angle):
    return Op("Z", (q,), angle)


def CNOT(c, t):
    return Op("CNOT", (c, t))


def CZ(a, b):
    return Op("CZ", (a, b))


def TOFFOLI(c1, c2, t):
    return Op("TOFFOLI", (c1, c2, t))


def PREPARE(q, state):
    return Op("PREPARE", (q,), state=state)


def MEASURE(q):
    return Op("MEASURE", (q,))


def RESET(q, helper):
    return Op("RESET", (q, helper))


def IDLE(qubits, duration):
    return Op("IDLE", tuple(qubits), duration=duration)


def ERRORS(spec: ErrorInjection):
    return Op("ERRORS", spec.targets, errors=spec)


class _Emitter:
    def __init__(self, device: DeviceModel, merge: bool):
        self.device = device
        self.merge = merge
        self.ops: list = []
        self.frame = [0.0] * device.n_qubits

    def rotation(self, q: int, angle: float, logical_axis: float):
        axis = float(wrap_phase(logical_axis - self.frame[q]))
        if self.merge:
            for i in range(len(self.ops) - 1, -1, -1):
                prev = self.ops[i]
                if q not in getattr(prev, "qubits", ()):
                    continue
                if isinstance(prev, RotationGate):
                    d = float(wrap_phase(prev.axis - axis))
                    sign = 1 if abs(d) < 1e-12 else (-1 if abs(abs(d) - np.pi) < 1e-12 else 0)
                    if sign:
                        total = prev.angle + sign * angle
                        r = np.mod(total, 2 * np.pi)
                        if min(r, 2 * np.pi - r) < 1e-12:
                            del self.ops[i]  # identity up to global phase
                        else:
                            self.ops[i] = rotation(q, total, prev.axis, self.device)
                        return
                break
        if abs(np.mod(angle + np.pi, 2 * np.pi) - np.pi) < 1e-15:
            return
        self.ops.append(rotation(q, angle, axis, self.device))

    def emit(self, op):
        self.ops.append(op)


def _resolve(device: DeviceModel, qubits) -> tuple[int, ...]:
    return tuple(device.index(q) for q in qubits)


def lower(circuit: LogicalCircuit, device: DeviceModel, merge: bool = True) -> NativeCircuit:
    """Compile to native instructions. Trailing MEASUREs go through
    :func:`insert_readout_reset`."""
    em = _Emitter(device, merge)
    touched: set[int] = set()
    for op in circuit.body.ops:
        qs = _resolve(device, op.qubits)
        name = op.name
        if name == "PREPARE":
            (q,) = qs
            if q in touched:
                raise CompositionError(f"PREPARE on {op.qubits[0]} after it was already used")
            angle, axis = PREPARED_STATES[op.state]
            if angle:
                em.rotation(q, angle, axis)
        elif name == "H":
            em.rotation(qs[0], -np.pi / 2, np.pi / 2)
            em.frame[qs[0]] += np.pi
        elif name == "X":
            em.rotation(qs[0], op.angle, 0.0)
        elif name == "Y":
            em.rotation(qs[0], op.angle, np.pi / 2)
        elif name == "Z":
            em.frame[qs[0]] += op.angle
        elif name == "CZ":
            em.emit(cphase(qs, np.pi, device))
        elif name == "CNOT":
            c, t = qs
            em.rotation(t, -np.pi / 2, np.pi / 2)
            em.emit(cphase((c, t), np.pi, device))
            em.rotation(t, np.pi / 2, np.pi / 2)
        elif name == "TOFFOLI":
            c1, c2, t = qs
            for g in toffoli_like((c1, c2), t, device):
                if isinstance(g, RotationGate):
                    em.rotation(g.qubit, g.angle, g.axis)
                else:
                    em.emit(g)
        elif name == "RESET":
            q, helper = qs
            gate = calibrate_resonant_swap((helper, q), device)
            em.emit(ResetSwap(q, helper, gate))
            em.frame = list(frame_after_swap(tuple(em.frame), (helper, q)))
        elif name == "IDLE":
            em.emit(Idle(qs, op.duration))
        elif name == "ERRORS":
            em.emit(InjectErrors(op.errors))
        touched.update(qs)
    frame = tuple(float(wrap_phase(f)) for f in em.frame)
    native = NativeCircuit(device.n_qubits, tuple(em.ops), frame)
    native.check_device(device)
    if circuit.measured:
        native = insert_readout_reset(native, device, _resolve(device, circuit.measured))
    return native


def insert_readout_reset(circuit: NativeCircuit, device: DeviceModel, targets: Sequence[int]) -> NativeCircuit:
    """Append PSB readout of ``targets``, resetting unknown partners first.

    A single qubit can only be read when its pair partner is in a known basis
    state. An unknown partner is reset by a resonant SWAP with a neighbouring
    qubit that is known to be spin down.
    """
    targets = [device.index(t) for t in targets]
    known = known_states(circuit)
    ops = list(circuit.instructions)
    frame = circuit.phase_frame
    done: set[tuple[int, int]] = set()
    for t in targets:
        pair, _ = device.readout_pair_of(t)
        if pair in done:
            continue
        partner = pair[1] if pair[0] == t else pair[0]
        if partner in targets:
            ops.append(PairMeasure(pair))
            done.add(pair)
            continue
        if known[partner] is None:
            helper = next(
                (
                    h
                    for h in range(device.n_qubits)
                    if h not in pair and h not in targets and known[h] == 0 and device.has_edge(h, partner)
                ),
                None,
            )
            if helper is None:
                raise ReadoutConstraintError(
                    f"cannot read {device.qubit_names[t]}: partner "
                    f"{device.qubit_names[partner]} is in an unknown state and has no spin-down neighbour"
                )
            ops.append(ResetSwap(partner, helper, calibrate_resonant_swap((helper, partner), device)))
            frame = frame_after_swap(frame, (helper, partner))
            known[partner], known[helper] = 0, None
        ops.append(PairMeasure(pair, t, known[partner]))
        done.add(pair)
    return NativeCircuit(circuit.n_qubits, tuple(ops), frame)


# --- reference semantics and equivalence -------------------------------------

_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def _rz(phi: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])


def _cnot() -> np.ndarray:
    u = np.eye(4, dtype=complex)
    u[[2, 3]] = u[[3, 2]]
    return u


def _toffoli() -> np.ndarray:
    u = np.eye(8, dtype=complex)
    u[[6, 7]] = u[[7, 6]]
    return u


def logical_unitary(circuit: LogicalCircuit, device: DeviceModel) -> np.ndarray:
    """Textbook matrix of a unitary-only logical circuit (independent of lowering)."""
    n = device.n_qubits
    state = StateVector(n, np.eye(2**n, dtype=complex))
    for op in circuit.ops:
        if op.name not in UNITARY_OPS:
            raise CompositionError(f"{op.name} has no unitary")
        qs = _resolve(device, op.qubits)
        if op.name == "IDLE":
            continue
        u = {
            "H": lambda: _HADAMARD,
            "X": lambda: rotation_matrix(op.angle, 0.0),
            "Y": lambda: rotation_matrix(op.angle, np.pi / 2),
            "Z": lambda: _rz(op.angle),
            "CZ": lambda: np.diag([1, 1, 1, -1]).astype(complex),
            "CNOT": _cnot,
            "TOFFOLI": _toffoli,
        }[op.name]()
        state = apply_unitary(state, u, qs)
    return state.amplitudes.T.copy()


def control_diagonal_distance(a: np.ndarray, b: np.ndarray, controls: Sequence[int], n_qubits: int) -> float:
    """Distance of ``a`` from ``b @ D`` minimised over diagonal unitaries D on ``controls``."""
    m = b.conj().T @ a
    idx = np.arange(2**n_qubits)
    key = np.zeros_like(idx)
    for c in controls:
        key = key * 2 + ((idx >> c) & 1)
    target = np.zeros_like(m)
    for k in np.unique(key):
        sel = key == k
        block = m[np.ix_(sel, sel)]
        tr = np.trace(block)
        phase = tr / abs(tr) if abs(tr) > 1e-300 else 1.0
        target[np.ix_(sel, sel)] = phase * np.eye(int(sel.sum()))
    return float(np.max(np.abs(m - target)))


def verify_equivalence(
    a: NativeCircuit,
    b: LogicalCircuit,
    device: DeviceModel,
    mode: str = "exact",
    tol: float = 1e-10,
    controls: Sequence = (),
) -> tuple[bool, float]:
    """Compare a native circuit with a logical one by brute-force matrices.

    ``mode="exact"`` allows only a global phase. ``mode="up-to-control-diagonal"``
    additionally factors out an arbitrary diagonal unitary on ``controls``.
    """
    n = device.n_qubits
    ua = full_unitary_of_circuit(a, n, device)
    ub = logical_unitary(b, device)
    if mode == "exact":
        overlap = np.trace(ub.conj().T @ ua)
        phase = overlap / abs(overlap) if abs(overlap) > 1e-300 else 1.0
        dev = float(np.max(np.abs(ua - phase * ub)))
    elif mode == "up-to-control-diagonal":
        dev = control_diagonal_distance(ua, ub, _resolve(device, controls), n)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return dev < tol, dev

