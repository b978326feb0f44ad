"""Native circuit container and its instruction types."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .gates import ConditionalPhaseGate, DeviceModel, ResonantSwapGate, RotationGate, wrap_phase
from .noise import ErrorInjection


@dataclass(frozen=True)
class Idle:
    qubits: tuple[int, ...]
    duration: float


@dataclass(frozen=True)
class InjectErrors:
    spec: ErrorInjection

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.spec.targets

    duration = 0.0


@dataclass(frozen=True)
class ResetSwap:
    """Reset ``reset_qubit`` by a resonant SWAP with ``helper``; may fail (see ResetModel)."""

    reset_qubit: int
    helper: int
    gate: ResonantSwapGate

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.helper, self.reset_qubit)

    @property
    def duration(self) -> float:
        return self.gate.duration


@dataclass(frozen=True)
class PairMeasure:
    """Parity readout of a PSB pair.

    ``read_qubit`` is the qubit of interest; ``partner_state`` is the statically
    known spin of the other qubit (0 or 1), or None for a joint parity read.
    """

    pair: tuple[int, int]
    read_qubit: int | None = None
    partner_state: int | None = None

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.pair

    duration = 0.0


Instruction = Union[
    RotationGate, ConditionalPhaseGate, ResonantSwapGate, Idle, InjectErrors, ResetSwap, PairMeasure
]
UNITARY_TYPES = (RotationGate, ConditionalPhaseGate, ResonantSwapGate, Idle)


@dataclass(frozen=True)
class NativeCircuit:
    """Ordered native instructions plus the residual virtual-Z frame per qubit.

    Rotation axes are physical (frames already folded in). The logical state
    equals ``Rz(phase_frame)`` applied to the physical state at the end.
    """

    n_qubits: int
    instructions: tuple = ()
    phase_frame: tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        frame = tuple(self.phase_frame) or (0.0,) * self.n_qubits
        if len(frame) != self.n_qubits:
            raise ValueError("phase frame needs one entry per qubit")
        object.__setattr__(self, "phase_frame", frame)

    def __len__(self):
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def then(self, *instructions, phase_frame=None) -> "NativeCircuit":
        frame = self.phase_frame if phase_frame is None else phase_frame
        return NativeCircuit(self.n_qubits, self.instructions + tuple(instructions), frame)

    @property
    def is_unitary(self) -> bool:
        return all(isinstance(op, UNITARY_TYPES) for op in self.instructions)

    @property
    def duration(self) -> float:
        return float(sum(op.duration for op in self.instructions))

    def two_qubit_edges(self) -> list[tuple[int, int]]:
        return [
            tuple(op.qubits)
            for op in self.instructions
            if isinstance(op, (ConditionalPhaseGate, ResonantSwapGate, ResetSwap))
        ]

    def check_device(self, device: DeviceModel) -> None:
        """Structural check: edges exist and measured pairs are readout pairs."""
        from .errors import ConnectivityError, ReadoutConstraintError

        for a, b in self.two_qubit_edges():
            device.require_edge(a, b)
        pairs = {tuple(sorted(p)) for p, _ in device.readout_pairs}
        for op in self.instructions:
            if isinstance(op, PairMeasure) and tuple(sorted(op.pair)) not in pairs:
                raise ReadoutConstraintError(f"{op.pair} is not a readout pair")
        if self.n_qubits != device.n_qubits:
            raise ConnectivityError("circuit and device qubit counts differ")


def _is_multiple_of(angle: float, period: float, tol: float = 1e-9) -> bool:
    r = np.mod(angle, period)
    return r < tol or period - r < tol


def known_states(circuit: NativeCircuit, initial=None) -> list[int | None]:
    """Static dataflow of which qubits sit in a known basis state.

    All qubits start spin down unless ``initial`` says otherwise. Rotations by
    a multiple of pi keep a known state known; entangling gates make both
    qubits unknown; a reset copies the helper's known state.
    """
    known: list[int | None] = list(initial) if initial is not None else [0] * circuit.n_qubits
    for op in circuit.instructions:
        if isinstance(op, RotationGate):
            q = op.qubit
            if known[q] is None:
                continue
            if _is_multiple_of(op.angle, 2 * np.pi):
                pass
            elif _is_multiple_of(op.angle, np.pi):
                known[q] = 1 - known[q]
            else:
                known[q] = None
        elif isinstance(op, (ConditionalPhaseGate, ResonantSwapGate)):
            for q in op.qubits:
                known[q] = None
        elif isinstance(op, ResetSwap):
            known[op.reset_qubit] = known[op.helper]
            known[op.helper] = None
    return known


def frame_after_swap(frame: tuple[float, ...], edge: tuple[int, int]) -> tuple[float, ...]:
    f = list(frame)
    a, b = edge
    f[a], f[b] = f[b], f[a]
    return tuple(float(wrap_phase(x)) for x in f)
