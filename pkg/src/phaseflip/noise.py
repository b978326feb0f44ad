"""Stochastic error engine: dephasing, injected phase errors, readout and reset.

Dephasing has two parts. A quasi-static Gaussian frequency offset is drawn
once per shot and gives Gaussian Ramsey decay ``exp(-(t/T2*)^2)``; an echo
removes it exactly. A Markovian part is realised as random Z(pi) kicks whose
ensemble average is the exponential echo decay ``exp(-t/T2_Hahn)``.
Relaxation (T1) is not modelled.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InconsistentCoherenceError, TimeError
from .gates import (
    DeviceModel,
    ResonantSwapGate,
    calibrate_resonant_swap,
    check_resonance,
    swap_matrix,
    wrap_phase,
)
from .state import ODD_STATES, StateVector, apply_phases, apply_unitary, basis_bits


@dataclass(frozen=True)
class NoiseParams:
    sigma_qs: float = 0.0  # rad/s
    gamma_m: float = 0.0  # 1/s

    @property
    def t2_star(self) -> float:
        return np.inf if self.sigma_qs == 0 else np.sqrt(2) / self.sigma_qs

    @property
    def t2_hahn(self) -> float:
        return np.inf if self.gamma_m == 0 else 1 / self.gamma_m


def calibrate_noise(t2_star: float, t2_hahn: float) -> NoiseParams:
    if not t2_star > 0 or not t2_hahn > 0:
        raise InconsistentCoherenceError("coherence times must be positive")
    if t2_star > t2_hahn:
        raise InconsistentCoherenceError(
            f"T2* ({t2_star:g} s) cannot exceed T2 Hahn ({t2_hahn:g} s)"
        )
    return NoiseParams(np.sqrt(2) / t2_star, 1 / t2_hahn)


@dataclass(frozen=True)
class NoiseModel:
    """Per-qubit dephasing plus optional constant residual exchange per edge."""

    qubits: tuple[NoiseParams, ...]
    residual_exchange_hz: Mapping[tuple[int, int], float] = field(default_factory=dict)
    dephase_during_gates: bool = False

    @classmethod
    def noiseless(cls, n_qubits: int) -> "NoiseModel":
        return cls((NoiseParams(),) * n_qubits)

    @property
    def is_noiseless(self) -> bool:
        return all(p.sigma_qs == 0 and p.gamma_m == 0 for p in self.qubits) and not any(
            self.residual_exchange_hz.values()
        )


@dataclass(frozen=True)
class ShotNoiseContext:
    """Quasi-static offsets fixed for a shot; ``offsets`` is (shots, n) or (n,)."""

    offsets: np.ndarray
    model: NoiseModel


def begin_shot(model: NoiseModel, rng: np.random.Generator, shots: int | None = None) -> ShotNoiseContext:
    sigma = np.array([p.sigma_qs for p in model.qubits])
    size = sigma.shape if shots is None else (shots,) + sigma.shape
    return ShotNoiseContext(rng.standard_normal(size) * sigma, model)


def flip_probability(gamma_m, duration):
    """Chance of a Z(pi) kick in ``duration``; keeps E[(-1)^kick] = exp(-gamma t)."""
    return 0.5 * (1 - np.exp(-np.asarray(gamma_m) * duration))


def apply_idle(
    state: StateVector,
    qubits: Sequence[int],
    duration: float,
    ctx: ShotNoiseContext,
    rng: np.random.Generator,
) -> StateVector:
    if duration < 0:
        raise TimeError(f"negative idle duration {duration}")
    if duration == 0 or not qubits:
        return state
    n = state.n_qubits
    lead = (state.n_shots,) if state.batched else ()
    phases = np.zeros(lead + (2**n,))
    for q in qubits:
        params = ctx.model.qubits[q]
        phi = ctx.offsets[..., q] * duration
        if params.gamma_m > 0:
            kicks = rng.random(lead) < flip_probability(params.gamma_m, duration)
            phi = phi + np.pi * kicks
        phases = phases + np.multiply.outer(phi, basis_bits(n, q))
    for (a, b), j_res in ctx.model.residual_exchange_hz.items():
        if j_res and a in qubits and b in qubits:
            both = basis_bits(n, a) & basis_bits(n, b)
            phases = phases + 2 * np.pi * j_res * duration * both
    return apply_phases(state, phases)


@dataclass(frozen=True)
class ErrorInjection:
    """Intentional Z errors: a fixed Z(phase) or Bernoulli Z(pi) flips."""

    mode: str = "deterministic"  # or "bernoulli"
    targets: tuple[int, ...] = ()
    phase: float = 0.0
    probability: float = 0.0

    def __post_init__(self):
        if self.mode not in ("deterministic", "bernoulli"):
            raise ValueError(f"unknown injection mode {self.mode!r}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("flip probability must be in [0, 1]")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets


def inject_errors(state: StateVector, spec: ErrorInjection, rng: np.random.Generator):
    """Returns ``(state, flips)``; ``flips`` is boolean (..., n_qubits)."""
    n = state.n_qubits
    lead = (state.n_shots,) if state.batched else ()
    flips = np.zeros(lead + (n,), dtype=bool)
    for t in spec.targets:
        if not 0 <= t < n:
            raise IndexError(f"qubit {t} out of range")
    if not spec.targets:
        return state, flips
    if spec.mode == "deterministic":
        if abs(wrap_phase(spec.phase)) < 1e-12:
            return state, flips
        phases = spec.phase * sum(basis_bits(n, t) for t in spec.targets)
        flips[..., list(spec.targets)] = True
        return apply_phases(state, phases), flips
    draws = rng.random(lead + (len(spec.targets),)) < spec.probability
    flips[..., list(spec.targets)] = draws
    bits = np.stack([basis_bits(n, t) for t in spec.targets])  # (k, 2**n)
    phases = np.pi * (draws.astype(float) @ bits)
    return apply_phases(state, phases), flips


@dataclass(frozen=True)
class ReadoutModel:
    """Parity readout confusion of one pair; ``odd_states`` are the blocked configurations."""

    f_even: float = 0.95
    f_odd: float = 0.85
    odd_states: tuple[tuple[int, int], ...] = ODD_STATES

    def __post_init__(self):
        for name in ("f_even", "f_odd"):
            v = getattr(self, name)
            if not 0.5 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0.5, 1], got {v}")

    @classmethod
    def ideal(cls) -> "ReadoutModel":
        return cls(1.0, 1.0)

    def confusion_matrix(self) -> np.ndarray:
        """Rows: true (even, odd); columns: reported (even, odd)."""
        return np.array([[self.f_even, 1 - self.f_even], [1 - self.f_odd, self.f_odd]])

    def report_even_probability(self, p_even_true):
        return self.f_even * p_even_true + (1 - self.f_odd) * (1 - p_even_true)


def readout_with_error(true_parity, model: ReadoutModel, rng: np.random.Generator):
    """Report a parity through the confusion matrix.

    Accepts ``"even"``/``"odd"`` or a boolean array (True = odd) and returns
    the same kind.
    """
    if isinstance(true_parity, str):
        odd = true_parity == "odd"
        flip = rng.random() < (1 - model.f_odd if odd else 1 - model.f_even)
        return "odd" if odd != flip else "even"
    odd = np.asarray(true_parity, dtype=bool)
    p_flip = np.where(odd, 1 - model.f_odd, 1 - model.f_even)
    return odd ^ (rng.random(odd.shape) < p_flip)


@dataclass(frozen=True)
class ResetModel:
    retain_probability: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.retain_probability <= 1.0:
            raise ValueError("retain probability must be in [0, 1]")


def swap_or_retain(state: StateVector, gate: ResonantSwapGate, retained, device: DeviceModel) -> StateVector:
    """Apply the SWAP on shots where ``retained`` is False, identity elsewhere."""
    check_resonance(gate, device)
    swapped = apply_unitary(state, swap_matrix(gate.swap_angle), gate.edge)
    keep = np.asarray(retained, dtype=bool)
    amps = np.where(keep[..., None] if state.batched else keep, state.amplitudes, swapped.amplitudes)
    return StateVector(state.n_qubits, amps)


def reset_via_swap(
    state: StateVector,
    reset_qubit: int,
    helper_qubit: int,
    model: ResetModel,
    device: DeviceModel,
    rng: np.random.Generator,
) -> StateVector:
    """Reinitialise ``reset_qubit`` by swapping it with a spin-down helper.

    With probability ``model.retain_probability`` the swap fails and the
    reset qubit keeps its previous state, so the error depends on history.
    """
    gate = calibrate_resonant_swap((helper_qubit, reset_qubit), device)
    lead = (state.n_shots,) if state.batched else ()
    retained = rng.random(lead) < model.retain_probability
    return swap_or_retain(state, gate, retained, device)
