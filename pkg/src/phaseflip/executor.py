"""Run native circuits: batched Monte Carlo shots, exact mixtures, full unitaries."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .circuit import Idle, InjectErrors, NativeCircuit, PairMeasure, ResetSwap
from .errors import CompositionError, SizeError
from .gates import (
    ConditionalPhaseGate,
    DeviceModel,
    ResonantSwapGate,
    RotationGate,
    cphase_unitary,
    resonant_swap_unitary,
    rotation_unitary,
)
from .noise import (
    NoiseModel,
    ReadoutModel,
    ResetModel,
    apply_idle,
    begin_shot,
    inject_errors,
    readout_with_error,
    swap_or_retain,
)
from .state import (
    StateVector,
    apply_unitary,
    measure_pair,
    new_state,
    pair_odd_probability,
)


def _apply_gate(state: StateVector, op, device: DeviceModel | None) -> StateVector:
    if isinstance(op, RotationGate):
        return apply_unitary(state, rotation_unitary(op), (op.qubit,))
    if isinstance(op, ConditionalPhaseGate):
        return apply_unitary(state, cphase_unitary(op), op.edge)
    if isinstance(op, ResonantSwapGate):
        if device is None:
            from .gates import swap_matrix

            return apply_unitary(state, swap_matrix(op.swap_angle), op.edge)
        return apply_unitary(state, resonant_swap_unitary(op, device), op.edge)
    raise TypeError(f"not a gate: {op!r}")


def apply_frames(state: StateVector, frame) -> StateVector:
    for q, phi in enumerate(frame):
        if phi:
            state = apply_unitary(state, np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)]), (q,))
    return state


def full_unitary_of_circuit(circuit: NativeCircuit, n_qubits: int, device: DeviceModel | None = None) -> np.ndarray:
    """Brute-force matrix of a unitary-only circuit, column by column.

    Idles count as identity (noise-free). Residual virtual-Z frames are
    applied at the end so the result is the logical operation.
    """
    if n_qubits > 6:
        raise SizeError("full unitary construction limited to 6 qubits")
    if not circuit.is_unitary:
        raise CompositionError("circuit contains measurement, reset or error injection")
    dim = 2**n_qubits
    state = StateVector(n_qubits, np.eye(dim, dtype=complex))  # row j is |j>
    for op in circuit.instructions:
        if not isinstance(op, Idle):
            state = _apply_gate(state, op, device)
    state = apply_frames(state, circuit.phase_frame)
    return state.amplitudes.T.copy()


@dataclass
class MeasureRecord:
    op: PairMeasure
    true_odd: np.ndarray
    reported_odd: np.ndarray

    def reported_up(self) -> np.ndarray:
        """Per-shot 'read qubit is up' derived from parity and the known partner."""
        if self.op.partner_state is None:
            raise ValueError("joint parity read has no single-qubit outcome")
        return self.reported_odd ^ bool(self.op.partner_state)


@dataclass
class ShotRecord:
    state: StateVector
    measurements: list[MeasureRecord] = field(default_factory=list)
    flips: np.ndarray | None = None
    reset_retained: list[np.ndarray] = field(default_factory=list)


def run_shots(
    circuit: NativeCircuit,
    device: DeviceModel,
    rng: np.random.Generator,
    shots: int,
    noise: NoiseModel | None = None,
    readout: Mapping[tuple[int, int], ReadoutModel] | None = None,
    reset: ResetModel | None = None,
) -> ShotRecord:
    """Execute ``shots`` independent trajectories as one batch."""
    n = circuit.n_qubits
    noise = noise or NoiseModel.noiseless(n)
    readout = readout or {}
    reset = reset or ResetModel(0.0)
    state = new_state(n, shots)
    ctx = begin_shot(noise, rng, shots)
    record = ShotRecord(state, flips=np.zeros((shots, n), dtype=bool))
    everyone = tuple(range(n))
    for op in circuit.instructions:
        if isinstance(op, Idle):
            state = apply_idle(state, op.qubits, op.duration, ctx, rng)
            continue
        if isinstance(op, InjectErrors):
            state, flips = inject_errors(state, op.spec, rng)
            record.flips ^= flips
        elif isinstance(op, ResetSwap):
            retained = rng.random(shots) < reset.retain_probability
            state = swap_or_retain(state, op.gate, retained, device)
            record.reset_retained.append(retained)
        elif isinstance(op, PairMeasure):
            model = _readout_for(readout, op.pair)
            true_odd, state = measure_pair(state, op.pair, rng, model.odd_states)
            reported = readout_with_error(true_odd, model, rng)
            record.measurements.append(MeasureRecord(op, true_odd, reported))
        else:
            state = _apply_gate(state, op, device)
        if noise.dephase_during_gates and op.duration > 0:
            state = apply_idle(state, everyone, op.duration, ctx, rng)
    record.state = state
    return record


def _readout_for(readout, pair) -> ReadoutModel:
    key = tuple(pair)
    if key in readout:
        return readout[key]
    if key[::-1] in readout:
        return readout[key[::-1]]
    return ReadoutModel.ideal()


def exact_report_probabilities(
    circuit: NativeCircuit,
    device: DeviceModel,
    readout: Mapping[tuple[int, int], ReadoutModel] | None = None,
    reset: ResetModel | None = None,
) -> list[float]:
    """Exact P(reported odd) for each trailing PairMeasure, without sampling.

    Reset failures and Bernoulli injections are summed over as weighted
    branches. Dephasing noise has no finite branch set and is not accepted
    here; use :func:`run_shots` for noisy circuits.
    """
    readout = readout or {}
    reset = reset or ResetModel(0.0)
    branches = [(1.0, new_state(circuit.n_qubits))]
    ops = list(circuit.instructions)
    first_measure = next((i for i, op in enumerate(ops) if isinstance(op, PairMeasure)), len(ops))
    if any(not isinstance(op, PairMeasure) for op in ops[first_measure:]):
        raise CompositionError("exact evaluation needs measurements as a trailing suffix")
    for op in ops[:first_measure]:
        if isinstance(op, Idle):
            continue
        if isinstance(op, InjectErrors):
            spec = op.spec
            if spec.mode == "deterministic":
                dummy = np.random.default_rng(0)
                branches = [(w, inject_errors(s, spec, dummy)[0]) for w, s in branches]
                continue
            new = []
            for pattern in itertools.product((0, 1), repeat=len(spec.targets)):
                k = sum(pattern)
                w_pat = spec.probability**k * (1 - spec.probability) ** (len(pattern) - k)
                if w_pat == 0:
                    continue
                for w, s in branches:
                    for t, bit in zip(spec.targets, pattern):
                        if bit:
                            s = apply_unitary(s, np.diag([1, -1]).astype(complex), (t,))
                    new.append((w * w_pat, s))
            branches = new
        elif isinstance(op, ResetSwap):
            r = reset.retain_probability
            new = []
            for w, s in branches:
                if r < 1:
                    new.append((w * (1 - r), swap_or_retain(s, op.gate, False, device)))
                if r > 0:
                    new.append((w * r, s))
            branches = new
        else:
            branches = [(w, _apply_gate(s, op, device)) for w, s in branches]
    out = []
    for op in ops[first_measure:]:
        model = _readout_for(readout, op.pair)
        p_odd = sum(w * float(pair_odd_probability(s, op.pair, model.odd_states)) for w, s in branches)
        out.append(1.0 - float(model.report_even_probability(1.0 - p_odd)))
    return out


def final_state(circuit: NativeCircuit, device: DeviceModel | None = None, with_frames: bool = False) -> StateVector:
    """Noise-free state after the unitary prefix of ``circuit`` (measurements and injections skipped)."""
    state = new_state(circuit.n_qubits)
    for op in circuit.instructions:
        if isinstance(op, (Idle, InjectErrors, PairMeasure)):
            continue
        if isinstance(op, ResetSwap):
            state = swap_or_retain(state, op.gate, False, device) if device else _apply_gate(state, op.gate, None)
            continue
        state = _apply_gate(state, op, device)
    if with_frames:
        state = apply_frames(state, circuit.phase_frame)
    return state

