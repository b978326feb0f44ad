"""Sweep runners for the single-, two- and three-qubit experiments.

Every runner builds one native circuit per sweep point and samples it in
fixed-size chunks. Chunk ``c`` of point ``i`` draws from
``SeedSequence(master_seed, spawn_key=seed_key + (i, c))``, so the output
does not depend on how many worker processes share the work.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .analysis import FitResult, fit_decay, fit_gamma_model
from .circuit import Idle, NativeCircuit, PairMeasure
from .compiler import (
    CNOT,
    ERRORS,
    IDLE,
    MEASURE,
    PREPARE,
    RESET,
    TOFFOLI,
    LogicalCircuit,
    H,
    X,
    Y,
    insert_readout_reset,
    lower,
)
from .curves import DecayCurve
from .errors import FitError
from .executor import exact_report_probabilities, final_state, run_shots
from .gates import DeviceModel, cphase, rotation, wrap_phase
from .noise import ErrorInjection, NoiseModel, ReadoutModel, ResetModel
from .state import StateVector, basis_bits

CHUNK_SHOTS = 2000


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep. ``sweep`` is in SI units (seconds, radians or a probability)."""

    kind: str
    sweep: tuple[float, ...]
    device: DeviceModel = field(default_factory=DeviceModel)
    noise: NoiseModel | None = None
    readout: ReadoutModel | Mapping[tuple[int, int], ReadoutModel] | None = None
    reset: ResetModel = field(default_factory=lambda: ResetModel(0.0))
    shots_per_point: int = 10_000
    master_seed: int = 0
    options: Mapping = field(default_factory=dict)
    exact: bool = False
    seed_key: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sweep", tuple(float(v) for v in np.atleast_1d(self.sweep)))
        if not self.sweep:
            raise ValueError("sweep must not be empty")
        if self.shots_per_point < 1:
            raise ValueError("shots_per_point must be at least 1")
        if self.kind not in REGISTRY:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        unknown = set(self.options) - set(REGISTRY[self.kind].options)
        if unknown:
            raise ValueError(f"unknown options for {self.kind}: {sorted(unknown)}")

    def option(self, key):
        return self.options.get(key, REGISTRY[self.kind].options[key])

    @property
    def noise_model(self) -> NoiseModel:
        return self.noise or NoiseModel.noiseless(self.device.n_qubits)

    @property
    def readout_map(self) -> dict:
        if self.readout is None:
            return {}
        if isinstance(self.readout, ReadoutModel):
            return {pair: self.readout for pair, _ in self.device.readout_pairs}
        return dict(self.readout)


@dataclass
class ShotLog:
    """Per-shot record of one sweep point."""

    flips: np.ndarray  # (shots, n_qubits) injected Z(pi) flips
    reported_odd: np.ndarray  # (shots,) parity reported by the final readout
    success: np.ndarray  # (shots,)


@dataclass
class CodeResult:
    curve: DecayCurve
    logs: list[ShotLog]
    fit: FitResult | None = None


@dataclass
class ExperimentOutput:
    """What the front end writes: named curves plus a JSON-able summary."""

    curves: dict[str, DecayCurve]
    summary: dict
    result: object = None


# --- sampling engine -------------------------------------------------------


def _chunk_task(args):
    circuit, spec, point, chunk, shots = args
    seq = np.random.SeedSequence(spec.master_seed, spawn_key=spec.seed_key + (point, chunk))
    rng = np.random.default_rng(seq)
    rec = run_shots(circuit, spec.device, rng, shots, spec.noise_model, spec.readout_map, spec.reset)
    up = np.array([m.reported_up() for m in rec.measurements])
    odd = np.array([m.reported_odd for m in rec.measurements])
    return up, odd, rec.flips


def sample(spec: ExperimentSpec, circuits: Sequence[NativeCircuit], jobs: int = 1):
    """Run every circuit for ``spec.shots_per_point`` shots.

    Returns, per point, ``(reported_up, reported_odd, flips)`` with shapes
    (k, shots), (k, shots) and (shots, n) for k trailing measurements.
    """
    tasks = []
    for i, circ in enumerate(circuits):
        n_chunks = math.ceil(spec.shots_per_point / CHUNK_SHOTS)
        for c in range(n_chunks):
            shots = min(CHUNK_SHOTS, spec.shots_per_point - c * CHUNK_SHOTS)
            tasks.append((circ, spec, i, c, shots))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_chunk_task, tasks))
    else:
        results = [_chunk_task(t) for t in tasks]
    out = []
    k = 0
    for i in range(len(circuits)):
        parts = []
        while k < len(tasks) and tasks[k][2] == i:
            parts.append(results[k])
            k += 1
        out.append(
            (
                np.concatenate([p[0] for p in parts], axis=1),
                np.concatenate([p[1] for p in parts], axis=1),
                np.concatenate([p[2] for p in parts], axis=0),
            )
        )
    return out


def up_probabilities(spec: ExperimentSpec, circuits: Sequence[NativeCircuit], jobs: int = 1) -> list[np.ndarray]:
    """Per point, the probability that each trailing readout reports 'up'.

    Exact mode sums over reset and injection branches instead of sampling
    and requires a dephasing-free noise model.
    """
    if spec.exact:
        if not spec.noise_model.is_noiseless:
            raise ValueError("exact mode needs a noiseless dephasing model")
        out = []
        for circ in circuits:
            p_odd = exact_report_probabilities(circ, spec.device, spec.readout_map, spec.reset)
            meas = [op for op in circ.instructions if isinstance(op, PairMeasure)]
            out.append(np.array([p if not m.partner_state else 1 - p for p, m in zip(p_odd, meas)]))
        return out
    return [up.mean(axis=1) for up, _, _ in sample(spec, circuits, jobs)]


def _curves(spec: ExperimentSpec, probs: list[np.ndarray], x=None, index: int = 0, invert=False) -> DecayCurve:
    x = np.asarray(spec.sweep if x is None else x)
    y = np.array([p[index] for p in probs])
    if invert:
        y = 1 - y
    if spec.exact:
        return DecayCurve.exact(x, y)
    shots = np.full(len(x), spec.shots_per_point)
    return DecayCurve.from_counts(x, np.rint(y * shots), shots)


# --- helpers ----------------------------------------------------------------


def bloch_vector(state: StateVector, qubit: int) -> np.ndarray:
    """Bloch vector of one qubit of a pure state; +z is spin down (bit 0)."""
    amps = state.amplitudes
    bits = basis_bits(state.n_qubits, qubit).astype(bool)
    idx0 = np.nonzero(~bits)[0]
    a0 = amps[idx0]
    a1 = amps[idx0 | (1 << qubit)]
    rho01 = np.vdot(a1, a0)  # sum a0 * conj(a1)
    z = np.vdot(a0, a0).real - np.vdot(a1, a1).real
    return np.array([2 * rho01.real, -2 * rho01.imag, z])


def project_to_down(circuit: NativeCircuit, qubit: int, device: DeviceModel) -> NativeCircuit:
    """Append the single rotation that takes the ideal final state of ``qubit`` to spin down."""
    v = bloch_vector(final_state(circuit, device), qubit)
    theta = float(np.arctan2(np.hypot(v[0], v[1]), v[2]))
    if theta < 1e-12:
        return circuit
    axis = float(np.arctan2(-v[0], v[1])) if np.hypot(v[0], v[1]) > 1e-12 else 0.0
    return circuit.then(rotation(qubit, theta, axis, device))


def _qubit(device: DeviceModel, q) -> int:
    return device.index(q)


def _readout_circuit(device: DeviceModel, logical: LogicalCircuit, targets) -> NativeCircuit:
    return lower(logical + LogicalCircuit(tuple(MEASURE(t) for t in targets)), device)


# --- runners ---------------------------------------------------------------


def run_rabi(spec: ExperimentSpec, jobs: int = 1) -> ExperimentOutput:
    """Resonant drive of duration t, sliced so idle dephasing acts during the drive."""
    dev = spec.device
    q = _qubit(dev, spec.option("qubit"))
    max_slice = np.pi / 16
    circuits = []
    for t in spec.sweep:
        theta = 2 * np.pi * dev.rabi_rates[q] * t
        n = max(1, math.ceil(abs(theta) / max_slice))
        ops = []
        for _ in range(n if t > 0 else 0):
            ops += [rotation(q, theta / n, 0.0, dev), Idle((q,), t / n)]
        circuits.append(insert_readout_reset(NativeCircuit(dev.n_qubits, tuple(ops)), dev, [q]))
    curve = _curves(spec, up_probabilities(spec, circuits, jobs))
    return ExperimentOutput({"": curve}, {"model": None, "qubit": dev.qubit_names[q]})


def _ramsey_like(spec: ExperimentSpec, jobs: int, echo: bool) -> ExperimentOutput:
    dev = spec.device
    q = _qubit(dev, spec.option("qubit"))
    circuits = []
    for t in spec.sweep:
        if echo:
            body = [X(q), IDLE((q,), t / 2), X(q, np.pi), IDLE((q,), t / 2), X(q, -np.pi / 2)]
        else:
            body = [X(q), IDLE((q,), t), X(q)]
        circuits.append(_readout_circuit(dev, LogicalCircuit(tuple(body)), [q]))
    curve = _curves(spec, up_probabilities(spec, circuits, jobs))
    model = "exponential" if echo else "gaussian"
    fit = fit_decay(curve, model)
    return ExperimentOutput({"": curve}, fit.to_json(), fit)


def run_ramsey(spec: ExperimentSpec, jobs: int = 1) -> ExperimentOutput:
    """X - idle(t) - X; Gaussian fit gives T2*."""
    return _ramsey_like(spec, jobs, echo=False)


def run_hahn(spec: ExperimentSpec, jobs: int = 1) -> ExperimentOutput:
    """X - idle(t/2) - X^2 - idle(t/2) - X^-1; exponential fit gives T2 Hahn."""
    return _ramsey_like(spec, jobs, echo=True)


def _cphase_phase(spec: ExperimentSpec) -> float:
    gate = spec.option("gate")
    if gate == "CZ":
        return np.pi
    if gate == "CS_inv":
        return -np.pi / 2
    return float(spec.option("phase"))


def run_cphase_calibration(spec: ExperimentSpec, jobs: int = 1) -> ExperimentOutput:
    """Ramsey on the target around the conditional phase, control off and on.

    The sweep is the axis of the final X(pi/2) analysis pulse. Each curve is
    fitted with ``y0 + A cos(x + phi0)``; the acquired phase difference is
    ``-(phi0_on - phi0_off)``, wrapped to (-pi, pi].
    """
    dev = spec.device
    c = _qubit(dev, spec.option("control"))
    t = _qubit(dev, spec.option("target"))
    phase = _cphase_phase(spec)
    curves, fits = {}, {}
    for label, on in (("control_off", False), ("control_on", True)):
        circuits = []
        for psi in spec.sweep:
            ops = [rotation(c, np.pi, 0.0, dev)] if on else []
            ops.append(rotation(t, np.pi / 2, 0.0, dev))
            if abs(wrap_phase(phase)) > 1e-12:
                ops.append(cphase((c, t), phase, dev))
            ops.append(rotation(t, np.pi / 2, psi, dev))
            circuits.append(insert_readout_reset(NativeCircuit(dev.n_qubits, tuple(ops)), dev, [t]))
        curve = _curves(spec, up_probabilities(spec, circuits, jobs))
        fit = fit_decay(curve, "sinusoid")
        contrast = 2 * abs(fit["amplitude"])
        if contrast < 5 * float(np.mean(curve.y_err)) or contrast < 1e-9:
            raise FitError(f"{label}: fringe contrast {contrast:.3g} too small to fit a phase")
        curves[label], fits[label] = curve, fit
    diff = float(wrap_phase(-(fits["control_on"]["phase"] - fits["control_off"]["phase"])))
    err = math.hypot(fits["control_on"].error("phase"), fits["control_off"].error("phase"))
    summary = {
        "model": "sinusoid",
        "fits": {k: f.to_json() for k, f in fits.items()},
        "phase_difference": diff,
        "phase_difference_stderr": err,
    }
    return ExperimentOutput(curves, summary, diff)


def run_swap_demo(spec: ExperimentSpec, jobs: int = 1) -> ExperimentOutput:
    """X(theta) on the source, SWAP into the partner, read both."""
    dev = spec.device
    src = _qubit(dev, spec.option("source"))
    dst = _qubit(dev, spec.option("destination"))
    circuits = [
        _readout_circuit(dev, LogicalCircuit((X(src, theta), RESET(src, dst))), [dst, src]) for theta in spec.sweep
    ]
    probs = up_probabilities(spec, circuits, jobs)
    curves = {dev.qubit_names[dst]: _curves(spec, probs, index=0), dev.qubit_names[src]: _curves(spec, probs, index=1)}
    return ExperimentOutput(curves, {"model": None})


def run_toffoli_test(spec: ExperimentSpec, jobs: int = 1) -> ExperimentOutput:
    """Sweep X(theta) on one control, with and without X^2 on the other, read the target."""
    dev = spec.device
    c1, c2 = (_qubit(dev, q) for q in spec.option("controls"))
    t = _qubit(dev, spec.option("target"))
    swept = _qubit(dev, spec.option("swept_control") or spec.option("controls")[0])
    other = c2 if swept == c1 else c1
    curves = {}
    for label, prep in (("without_prep", False), ("with_prep", True)):
        circuits = []
        for theta in spec.sweep:
            ops = [X(swept, theta)] + ([X(other, np.pi)] if prep else []) + [TOFFOLI(c1, c2, t)]
            circuits.append(_readout_circuit(dev, LogicalCircuit(tuple(ops)), [t]))
        curves[label] = _curves(spec, up_probabilities(spec, circuits, jobs))
    x = np.asarray(spec.sweep)
    dev_with = float(np.max(np.abs(curves["with_prep"].y - np.sin(x / 2) ** 2)))
    dev_without = float(np.max(np.abs(curves["without_prep"].y)))
    return ExperimentOutput(
        curves, {"model": None, "max_deviation_with_prep": dev_with, "max_deviation_without_prep": dev_without}
    )


def two_qubit_code_circuit(
    device: DeviceModel, t_wait: float, data, ancilla, echo: bool, input_state: str
) -> NativeCircuit:
    d, a = device.index(data), device.index(ancilla)
    encode = (PREPARE(d, input_state), CNOT(d, a), H(d), H(a))
    if echo:
        wait = (IDLE((d, a), t_wait / 2), Y(a, np.pi), IDLE((d, a), t_wait / 2))
    else:
        wait = (IDLE((d, a), t_wait),)
    decode = (H(d), H(a), CNOT(d, a), CNOT(a, d))
    native = lower(LogicalCircuit(encode + wait + decode), device)
    native = project_to_down(native, d, device)
    return insert_readout_reset(native, device, [d])


def run_two_qubit_code(spec: ExperimentSpec, jobs: int = 1) -> ExperimentOutput:
    """Two-qubit phase-flip code; y is the chance the data qubit reads back down."""
    dev = spec.device
    echo = spec.option("echo") == "ancilla_Y2"
    circuits = [
        two_qubit_code_circuit(dev, t, spec.option("data"), spec.option("ancilla"), echo, spec.option("input"))
        for t in spec.sweep
    ]
    curve = _curves(spec, up_probabilities(spec, circuits, jobs), invert=True)
    fit = fit_decay(curve, "exponential" if echo else "gaussian")
    d, a = spec.option("data"), spec.option("ancilla")
    wait = f"IDLE/2 Y2({a}) IDLE/2" if echo else "IDLE"
    sequence = (
        f"PREPARE({d}) CNOT({d},{a}) H({d}) H({a}) {wait} H({d}) H({a}) CNOT({d},{a}) CNOT({a},{d}) "
        f"PROJECT({d}) MEASURE({d})"
    )
    return ExperimentOutput({"": curve}, dict(fit.to_json(), sequence=sequence), fit)


def three_qubit_code_circuit(
    device: DeviceModel,
    injection: ErrorInjection | None,
    data="Q4",
    ancillas=("Q1", "Q3"),
    input_state: str = "down",
    wait: float = 0.0,
    echo_axis: str = "Y",
) -> NativeCircuit:
    """Encode, echo, inject, decode, correct, project to down, reset and read.

    ``ancillas[0]`` drives the CS^-1 half of the correction and must be the
    qubit read out last through the reset.
    """
    d = device.index(data)
    a1, a2 = (device.index(q) for q in ancillas)
    code = (d, a1, a2)
    ops = [PREPARE(d, input_state), CNOT(d, a1), CNOT(d, a2)] + [H(q) for q in code]
    if wait:
        ops.append(IDLE(code, wait / 2))
    echo = Y if echo_axis == "Y" else X
    ops += [echo(q, np.pi) for q in code]
    if wait:
        ops.append(IDLE(code, wait / 2))
    if injection is not None and injection.targets:
        ops.append(ERRORS(injection))
    ops += [H(q) for q in code] + [CNOT(d, a1), CNOT(d, a2), TOFFOLI(a1, a2, d)]
    native = lower(LogicalCircuit(tuple(ops)), device)
    native = project_to_down(native, d, device)
    return insert_readout_reset(native, device, [d])


def _subset_label(device: DeviceModel, subset) -> str:
    return "+".join(device.qubit_names[device.index(q)] for q in subset) or "none"


def run_three_qubit_phase_sweep(spec: ExperimentSpec, jobs: int = 1) -> ExperimentOutput:
    """Deterministic Z(phi) on each requested subset; one curve per subset."""
    dev = spec.device
    curves = {}
    for subset in spec.option("subsets"):
        targets = tuple(dev.index(q) for q in subset)
        circuits = [
            three_qubit_code_circuit(
                dev,
                ErrorInjection("deterministic", targets, phase=phi),
                spec.option("data"),
                spec.option("ancillas"),
                spec.option("input"),
                spec.option("wait"),
                spec.option("echo_axis"),
            )
            for phi in spec.sweep
        ]
        curves[_subset_label(dev, subset)] = _curves(spec, up_probabilities(spec, circuits, jobs), invert=True)
    return ExperimentOutput(curves, {"model": None})


def run_three_qubit_random(spec: ExperimentSpec, jobs: int = 1) -> ExperimentOutput:
    """Independent Z(pi) flips with probability p on all three code qubits."""
    dev = spec.device
    code = tuple(dev.index(q) for q in (spec.option("data"),) + tuple(spec.option("ancillas")))
    circuits = [
        three_qubit_code_circuit(
            dev,
            ErrorInjection("bernoulli", code, probability=p),
            spec.option("data"),
            spec.option("ancillas"),
            spec.option("input"),
            spec.option("wait"),
            spec.option("echo_axis"),
        )
        for p in spec.sweep
    ]
    logs = []
    if spec.exact:
        curve = _curves(spec, up_probabilities(spec, circuits, jobs), invert=True)
    else:
        for up, odd, flips in sample(spec, circuits, jobs):
            logs.append(ShotLog(flips[:, list(code)], odd[-1], ~up[-1]))
        x = np.asarray(spec.sweep)
        shots = np.full(len(x), spec.shots_per_point)
        curve = DecayCurve.from_counts(x, [log.success.sum() for log in logs], shots)
    fit = None
    summary: dict = {"model": "gamma"}
    try:
        fit = fit_gamma_model(curve, weighted=not spec.exact and bool(np.all(curve.y_err > 0)))
        summary = fit.to_json()
    except FitError as exc:
        summary["error"] = str(exc)
    return ExperimentOutput({"": curve}, summary, CodeResult(curve, logs, fit))


# --- registry ----------------------------------------------------------------


@dataclass(frozen=True)
class Kind:
    runner: Callable[[ExperimentSpec, int], ExperimentOutput]
    sweep: str  # unit of the sweep variable: "us", "pi" or "p"
    options: dict
    description: str


_CODE_OPTIONS = {"data": "Q4", "ancillas": ("Q1", "Q3"), "input": "down", "wait": 0.0, "echo_axis": "Y"}

REGISTRY: dict[str, Kind] = {
    "rabi": Kind(run_rabi, "us", {"qubit": "Q1"}, "drive duration sweep, P(up)"),
    "ramsey": Kind(run_ramsey, "us", {"qubit": "Q1"}, "free evolution sweep, Gaussian T2* fit"),
    "hahn": Kind(run_hahn, "us", {"qubit": "Q1"}, "echo sweep, exponential T2 Hahn fit"),
    "cphase_calibration": Kind(
        run_cphase_calibration,
        "pi",
        {"control": "Q4", "target": "Q1", "gate": "CZ", "phase": np.pi},
        "analysis-phase sweep with control off/on, fitted phase difference",
    ),
    "swap_demo": Kind(
        run_swap_demo, "pi", {"source": "Q3", "destination": "Q2"}, "X(theta) then SWAP, P(up) of both qubits"
    ),
    "toffoli_test": Kind(
        run_toffoli_test,
        "pi",
        {"controls": ("Q1", "Q3"), "target": "Q4", "swept_control": None},
        "X(theta) on one control, with/without X^2 on the other",
    ),
    "two_qubit_code": Kind(
        run_two_qubit_code,
        "us",
        {"data": "Q4", "ancilla": "Q1", "echo": "none", "input": "x"},
        "two-qubit phase-flip code vs wait time, decay fit",
    ),
    "three_qubit_phase_sweep": Kind(
        run_three_qubit_phase_sweep,
        "pi",
        dict(_CODE_OPTIONS, subsets=((), ("Q1",), ("Q1", "Q3"))),
        "three-qubit code with Z(phi) on chosen subsets",
    ),
    "three_qubit_random": Kind(
        run_three_qubit_random, "p", dict(_CODE_OPTIONS), "three-qubit code with random flips, Gamma(p) fit"
    ),
}


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> ExperimentOutput:
    return REGISTRY[spec.kind].runner(spec, jobs)


def list_experiments() -> str:
    rows = [("kind", "sweep", "options", "description")]
    for name in sorted(REGISTRY):
        k = REGISTRY[name]
        opts = ", ".join(f"{o}={_fmt(v)}" for o, v in k.options.items())
        rows.append((name, k.sweep, opts, k.description))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    return "\n".join(
        f"{r[0]:<{widths[0]}}  {r[1]:<{widths[1]}}  {r[2]:<{widths[2]}}  {r[3]}".rstrip() for r in rows
    )


def _fmt(v) -> str:
    if isinstance(v, float) and v == np.pi:
        return "1pi"
    if isinstance(v, tuple):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    return str(v)
