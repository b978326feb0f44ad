"""Exact complex state-vector engine.

Qubit ``k`` is bit ``k`` of the basis index (qubit 0 is the least significant
bit). ``|0>`` is spin down. Gate matrices acting on several targets use the
Kronecker convention: ``targets[0]`` is the most significant index of the
matrix, so ``np.kron(A, B)`` applies ``A`` to ``targets[0]``.

A :class:`StateVector` may carry a leading batch axis holding independent
Monte Carlo shots; every function here works on both shapes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import QubitIndexError, SizeError

MAX_QUBITS = 12
ODD_STATES = ((0, 1), (1, 0))


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape[-1] != 2**self.n_qubits:
            raise SizeError(
                f"amplitude length {self.amplitudes.shape[-1]} != 2**{self.n_qubits}"
            )

    @property
    def batched(self) -> bool:
        return self.amplitudes.ndim == 2

    @property
    def n_shots(self) -> int:
        return self.amplitudes.shape[0] if self.batched else 1

    def norm_squared(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=-1)

    def probabilities(self) -> np.ndarray:
        p = np.abs(self.amplitudes) ** 2
        p[(p < 0) & (p >= -1e-12)] = 0.0
        return p


def new_state(n_qubits: int, shots: int | None = None) -> StateVector:
    """All qubits spin down. ``shots`` adds a batch axis of identical copies."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise SizeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    shape = (2**n_qubits,) if shots is None else (shots, 2**n_qubits)
    amps = np.zeros(shape, dtype=complex)
    amps[..., 0] = 1.0
    return StateVector(n_qubits, amps)


def _check_targets(n_qubits: int, targets: Sequence[int]) -> tuple[int, ...]:
    targets = tuple(int(t) for t in targets)
    if len(set(targets)) != len(targets):
        raise QubitIndexError(f"duplicate targets {targets}")
    for t in targets:
        if not 0 <= t < n_qubits:
            raise QubitIndexError(f"qubit {t} out of range for {n_qubits} qubits")
    return targets


def _axis(n_qubits: int, qubit: int, batched: bool) -> int:
    # C-order reshape puts the most significant bit (highest qubit) first
    return (n_qubits - 1 - qubit) + (1 if batched else 0)


def apply_unitary(state: StateVector, u: np.ndarray, targets: Sequence[int]) -> StateVector:
    """Apply ``u`` to ``targets``; identity elsewhere. Returns a new state."""
    targets = _check_targets(state.n_qubits, targets)
    u = np.asarray(u, dtype=complex)
    k = len(targets)
    if u.shape != (2**k, 2**k):
        raise SizeError(f"unitary shape {u.shape} does not match {k} targets")
    n = state.n_qubits
    lead = (state.n_shots,) if state.batched else ()
    psi = state.amplitudes.reshape(lead + (2,) * n)
    axes = [_axis(n, t, state.batched) for t in targets]
    out = np.tensordot(u.reshape((2,) * (2 * k)), psi, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return StateVector(n, out.reshape(state.amplitudes.shape))


def basis_bits(n_qubits: int, qubit: int) -> np.ndarray:
    """0/1 value of ``qubit`` for every basis index."""
    return (np.arange(2**n_qubits) >> qubit) & 1


def apply_phases(state: StateVector, phases: np.ndarray) -> StateVector:
    """Multiply amplitudes by ``exp(1j * phases)``.

    ``phases`` broadcasts against the amplitudes, so a ``(shots, 2**n)`` array
    gives every shot its own diagonal unitary.
    """
    return StateVector(state.n_qubits, state.amplitudes * np.exp(1j * phases))


def qubit_up_probability(state: StateVector, qubit: int):
    """Marginal probability of spin up on ``qubit`` (per shot when batched)."""
    (qubit,) = _check_targets(state.n_qubits, [qubit])
    mask = basis_bits(state.n_qubits, qubit).astype(bool)
    p = state.probabilities()[..., mask].sum(axis=-1)
    return np.clip(p, 0.0, 1.0)


def _odd_mask(n_qubits: int, pair: tuple[int, int], odd_states) -> np.ndarray:
    a = basis_bits(n_qubits, pair[0])
    b = basis_bits(n_qubits, pair[1])
    mask = np.zeros(2**n_qubits, dtype=bool)
    for sa, sb in odd_states:
        mask |= (a == sa) & (b == sb)
    return mask


def pair_odd_probability(state: StateVector, pair: tuple[int, int], odd_states=ODD_STATES):
    pair = _check_targets(state.n_qubits, pair)
    if len(pair) != 2:
        raise QubitIndexError("pair needs exactly two qubits")
    mask = _odd_mask(state.n_qubits, pair, odd_states)
    return np.clip(state.probabilities()[..., mask].sum(axis=-1), 0.0, 1.0)


def measure_pair(
    state: StateVector,
    pair: tuple[int, int],
    rng: np.random.Generator,
    odd_states=ODD_STATES,
):
    """Projective parity measurement of a readout pair.

    ``odd_states`` lists the joint (pair[0], pair[1]) spin configurations
    grouped as the "odd" outcome; the rest are "even".

    Returns ``(parity, collapsed_state)``. For a single state ``parity`` is
    ``"even"`` or ``"odd"``; for a batch it is a boolean array, True = odd.
    """
    p_odd = pair_odd_probability(state, pair, odd_states)
    odd = rng.random(np.shape(p_odd)) < p_odd
    mask = _odd_mask(state.n_qubits, tuple(pair), odd_states)
    keep = np.where(np.asarray(odd)[..., None], mask, ~mask)
    amps = np.where(keep, state.amplitudes, 0.0)
    norm = np.sqrt(np.sum(np.abs(amps) ** 2, axis=-1, keepdims=True))
    amps = amps / np.where(norm > 0, norm, 1.0)
    collapsed = StateVector(state.n_qubits, amps)
    if state.batched:
        return odd, collapsed
    return ("odd" if bool(odd) else "even"), collapsed


def global_phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max entrywise ``|a - e^{i t} b|`` with ``t`` aligning ``tr(b^H a)``."""
    overlap = np.trace(b.conj().T @ a)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-300 else 1.0
    return float(np.max(np.abs(a - phase * b)))


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    u = np.asarray(u)
    return bool(np.allclose(u @ u.conj().T, np.eye(u.shape[0]), atol=tol, rtol=0))
