"""Device description and the native gate set.

Two-qubit gates are modelled at the level of the accumulated conditional
phase (static exchange) or swap angle (resonantly modulated exchange) in the
rotating frame. Single-qubit Z terms picked up during an exchange pulse are
assumed absorbed into virtual-Z frames, so an ideal CPhase is exactly
``diag(1, 1, 1, exp(1j * phase))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CalibrationError,
    ConnectivityError,
    DegeneratePulseError,
    QubitIndexError,
    ResonanceError,
    SizeError,
)

DEFAULT_FREQUENCIES_HZ = (1.393e9, 2.192e9, 2.101e9, 2.412e9)
DEFAULT_RABI_HZ = 5e6
DEFAULT_EXCHANGE_HZ = 10e6
DEFAULT_TUKEY_ALPHA = 0.5
RESONANCE_TOLERANCE_HZ = 1e3


def wrap_phase(phi):
    """Reduce an angle into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2 * np.pi)


def _edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class DeviceModel:
    qubit_frequencies: tuple[float, ...] = DEFAULT_FREQUENCIES_HZ
    rabi_rates: tuple[float, ...] = (DEFAULT_RABI_HZ,) * 4
    connectivity_edges: frozenset = frozenset({(0, 1), (1, 2), (2, 3), (0, 3)})
    readout_pairs: tuple[tuple[tuple[int, int], str], ...] = (((0, 1), "S1"), ((2, 3), "S2"))
    external_field: float = 0.65
    qubit_names: tuple[str, ...] = ("Q1", "Q2", "Q3", "Q4")
    exchange_hz: float = DEFAULT_EXCHANGE_HZ
    tukey_alpha: float = DEFAULT_TUKEY_ALPHA
    resonance_tolerance_hz: float = RESONANCE_TOLERANCE_HZ

    def __post_init__(self):
        n = len(self.qubit_frequencies)
        if len(self.rabi_rates) != n or len(self.qubit_names) != n:
            raise SizeError("frequencies, rabi rates and names must have one entry per qubit")
        edges = frozenset(_edge_key(*e) for e in self.connectivity_edges)
        for a, b in edges:
            if a == b or not (0 <= a < n and 0 <= b < n):
                raise QubitIndexError(f"bad edge {(a, b)}")
        object.__setattr__(self, "connectivity_edges", edges)
        seen = [q for pair, _ in self.readout_pairs for q in pair]
        if sorted(seen) != list(range(n)):
            raise ConnectivityError("readout pairs must partition the qubits into disjoint pairs")

    @property
    def n_qubits(self) -> int:
        return len(self.qubit_frequencies)

    def index(self, qubit) -> int:
        if isinstance(qubit, str):
            try:
                return self.qubit_names.index(qubit)
            except ValueError:
                raise QubitIndexError(f"unknown qubit {qubit!r}") from None
        q = int(qubit)
        if not 0 <= q < self.n_qubits:
            raise QubitIndexError(f"qubit {q} out of range")
        return q

    def has_edge(self, a: int, b: int) -> bool:
        return _edge_key(a, b) in self.connectivity_edges

    def require_edge(self, a: int, b: int) -> None:
        if not self.has_edge(a, b):
            raise ConnectivityError(
                f"no exchange edge between {self.qubit_names[a]} and {self.qubit_names[b]}"
            )

    def readout_pair_of(self, qubit: int) -> tuple[tuple[int, int], str]:
        for pair, sensor in self.readout_pairs:
            if qubit in pair:
                return pair, sensor
        raise ConnectivityError(f"qubit {qubit} belongs to no readout pair")

    def partner(self, qubit: int) -> int:
        (a, b), _ = self.readout_pair_of(qubit)
        return b if a == qubit else a


# --- single-qubit rotations -------------------------------------------------


@dataclass(frozen=True)
class RotationGate:
    """Rotation by ``angle`` about the in-plane axis at azimuth ``axis``.

    X is ``angle=pi/2, axis=0``; Y is ``angle=pi/2, axis=pi/2``; X^2 is
    ``angle=pi``; X^-1 is ``angle=-pi/2``.
    """

    qubit: int
    axis: float
    angle: float
    duration: float = 0.0

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.qubit,)


def rotation_matrix(angle: float, axis: float) -> np.ndarray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array(
        [[c, -1j * s * np.exp(-1j * axis)], [-1j * s * np.exp(1j * axis), c]], dtype=complex
    )


def rotation_unitary(gate: RotationGate) -> np.ndarray:
    return rotation_matrix(gate.angle, gate.axis)


def rotation(qubit: int, angle: float, axis: float = 0.0, device: DeviceModel | None = None) -> RotationGate:
    """Build a rotation whose duration follows the qubit's Rabi rate."""
    duration = 0.0
    if device is not None:
        duration = abs(angle) / (2 * np.pi * device.rabi_rates[qubit])
    return RotationGate(qubit, float(axis), float(angle), duration)


# --- exchange pulses --------------------------------------------------------


@dataclass(frozen=True)
class ExchangePulse:
    edge: tuple[int, int]
    j0: float
    duration: float
    alpha: float = DEFAULT_TUKEY_ALPHA
    f_mod: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"Tukey ramp fraction must be in [0, 1], got {self.alpha}")

    def envelope(self, t):
        """Tukey window on [0, duration]: raised-cosine ramps, flat top."""
        t = np.asarray(t, dtype=float)
        T, a = self.duration, self.alpha
        out = np.where((t >= 0) & (t <= T), 1.0, 0.0)
        if a > 0 and T > 0:
            ramp = a * T / 2
            rise = 0.5 * (1 - np.cos(np.pi * t / ramp))
            fall = 0.5 * (1 - np.cos(np.pi * (T - t) / ramp))
            out = np.where((t >= 0) & (t < ramp), rise, out)
            out = np.where((t > T - ramp) & (t <= T), fall, out)
        return out

    def envelope_integral(self) -> float:
        return self.duration * (1 - self.alpha / 2)

    def exchange_integral(self) -> float:
        """Integral of J(t) dt, in cycles."""
        return self.j0 * self.envelope_integral()


@dataclass(frozen=True)
class ConditionalPhaseGate:
    edge: tuple[int, int]
    phase: float
    pulse: ExchangePulse | None = None

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.edge

    @property
    def duration(self) -> float:
        return 0.0 if self.pulse is None else self.pulse.duration


def cphase_matrix(phase: float) -> np.ndarray:
    return np.diag([1, 1, 1, np.exp(1j * phase)]).astype(complex)


def cphase_unitary(gate: ConditionalPhaseGate) -> np.ndarray:
    return cphase_matrix(gate.phase)


def conditional_phase_from_pulse(pulse: ExchangePulse) -> ConditionalPhaseGate:
    if pulse.duration <= 0:
        raise DegeneratePulseError("exchange pulse has zero duration")
    if pulse.f_mod != 0:
        raise DegeneratePulseError("conditional phase needs an unmodulated pulse (f_mod = 0)")
    phase = float(wrap_phase(2 * np.pi * pulse.exchange_integral()))
    return ConditionalPhaseGate(pulse.edge, phase, pulse)


def calibrate_cphase(
    edge: tuple[int, int],
    target_phase: float,
    device: DeviceModel,
    j0: float | None = None,
    alpha: float | None = None,
) -> ExchangePulse:
    """Shortest static exchange pulse giving ``target_phase`` on ``edge``."""
    device.require_edge(*edge)
    j0 = device.exchange_hz if j0 is None else j0
    alpha = device.tukey_alpha if alpha is None else alpha
    if j0 <= 0:
        raise CalibrationError("peak exchange must be positive")
    if not -np.pi < target_phase <= np.pi:
        raise CalibrationError(f"target phase {target_phase} outside (-pi, pi]")
    cycles = np.mod(target_phase, 2 * np.pi) / (2 * np.pi)
    if cycles < 1e-12:
        raise CalibrationError("zero conditional phase needs a zero-length pulse")
    duration = cycles / (j0 * (1 - alpha / 2))
    return ExchangePulse(tuple(edge), j0, duration, alpha, 0.0)


def cphase(edge: tuple[int, int], phase: float, device: DeviceModel) -> ConditionalPhaseGate:
    return conditional_phase_from_pulse(calibrate_cphase(edge, phase, device))


# --- resonant SWAP ----------------------------------------------------------


@dataclass(frozen=True)
class ResonantSwapGate:
    edge: tuple[int, int]
    pulse: ExchangePulse

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.edge

    @property
    def duration(self) -> float:
        return self.pulse.duration

    @property
    def swap_angle(self) -> float:
        # effective odd-subspace Rabi rate is J0 * envelope / 2
        return 2 * np.pi * self.pulse.exchange_integral() / 2


def swap_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    u = np.eye(4, dtype=complex)
    u[1:3, 1:3] = [[c, -1j * s], [-1j * s, c]]
    return u


def check_resonance(gate: ResonantSwapGate, device: DeviceModel) -> None:
    a, b = gate.edge
    detuning = abs(device.qubit_frequencies[a] - device.qubit_frequencies[b])
    if abs(gate.pulse.f_mod - detuning) > device.resonance_tolerance_hz:
        raise ResonanceError(
            f"modulation {gate.pulse.f_mod:.6g} Hz is off resonance with {detuning:.6g} Hz"
        )


def resonant_swap_unitary(gate: ResonantSwapGate, device: DeviceModel) -> np.ndarray:
    check_resonance(gate, device)
    return swap_matrix(gate.swap_angle)


def calibrate_resonant_swap(
    edge: tuple[int, int],
    device: DeviceModel,
    swap_angle: float = np.pi,
    j0: float | None = None,
    alpha: float | None = None,
) -> ResonantSwapGate:
    device.require_edge(*edge)
    j0 = device.exchange_hz if j0 is None else j0
    alpha = device.tukey_alpha if alpha is None else alpha
    if swap_angle <= 0 or j0 <= 0:
        raise CalibrationError("swap angle and exchange must be positive")
    a, b = edge
    f_mod = abs(device.qubit_frequencies[a] - device.qubit_frequencies[b])
    duration = swap_angle / (np.pi * j0 * (1 - alpha / 2))
    return ResonantSwapGate(tuple(edge), ExchangePulse(tuple(edge), j0, duration, alpha, f_mod))


# --- relative-phase Toffoli -------------------------------------------------


def toffoli_like(controls: tuple[int, int], target: int, device: DeviceModel):
    """Toffoli up to a diagonal phase on the controls, from CS^-1 and CZ.

    ``controls[0]`` couples to the target through CS^-1 and ``controls[1]``
    through CZ; no control-control edge is needed. On the target, CS^-1
    sandwiched by Y-rotations acts as a controlled ``Rx(-/+ pi/2)`` and CZ as
    a controlled ``Rz(pi)``. The sequence realises the group commutator
    ``Rz(pi) Rx(-pi/2) Rz(pi) Rx(pi/2) = Rx(pi)`` when both controls are up,
    while each control alone contributes a product that cancels to identity.
    """
    from .circuit import NativeCircuit

    c_s, c_z = controls
    device.require_edge(c_s, target)
    device.require_edge(c_z, target)
    if len({c_s, c_z, target}) != 3:
        raise QubitIndexError("controls and target must be distinct")
    cs_inv = cphase((c_s, target), -np.pi / 2, device)
    cz = cphase((c_z, target), np.pi, device)
    y = rotation(target, np.pi / 2, np.pi / 2, device)
    y_inv = rotation(target, -np.pi / 2, np.pi / 2, device)
    ops = (y, cs_inv, y_inv, cz, y_inv, cs_inv, y, cz)
    return NativeCircuit(device.n_qubits, ops)
