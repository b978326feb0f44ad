import numpy as np
import pytest
from scipy.integrate import quad

from phaseflip.errors import FitError
from phaseflip.experiments import (
    ExperimentSpec,
    bloch_vector,
    list_experiments,
    project_to_down,
    run_experiment,
    three_qubit_code_circuit,
)
from phaseflip.executor import final_state
from phaseflip.circuit import NativeCircuit
from phaseflip.gates import DeviceModel, rotation
from phaseflip.noise import ErrorInjection, NoiseModel, NoiseParams, ReadoutModel, ResetModel, calibrate_noise

THETA = np.linspace(0, 2 * np.pi, 13)
P11 = np.round(np.linspace(0, 1, 11), 10)


def exact(kind, sweep, **kw):
    return run_experiment(ExperimentSpec(kind, sweep, exact=True, **kw))


def q1_noise(t2_star=0.28e-6, gamma=0.0):
    return NoiseModel((NoiseParams(np.sqrt(2) / t2_star, gamma),) + (NoiseParams(),) * 3)


# --- rabi ------------------------------------------------------------------


def test_rabi_noiseless():
    rate = DeviceModel().rabi_rates[0]
    t = np.array([0.0, 0.25 / rate, 0.5 / rate, 1 / rate])
    y = exact("rabi", t).curves[""].y
    assert np.allclose(y, np.sin(2 * np.pi * rate * t / 2) ** 2, atol=1e-12)
    assert y[0] == 0 and np.isclose(y[2], 1)


def test_rabi_decays_like_detuned_average():
    noise = q1_noise()
    sigma = noise.qubits[0].sigma_qs
    omega = 2 * np.pi * DeviceModel().rabi_rates[0]
    t = np.array([0.05e-6, 0.15e-6, 0.3e-6])
    spec = ExperimentSpec("rabi", t, noise=noise, shots_per_point=20_000, master_seed=4)
    y = run_experiment(spec).curves[""].y

    def oracle(tt):
        def f(d):
            w = np.hypot(omega, d)
            return (omega / w) ** 2 * np.sin(w * tt / 2) ** 2 * np.exp(-0.5 * (d / sigma) ** 2)

        return quad(f, -8 * sigma, 8 * sigma)[0] / (np.sqrt(2 * np.pi) * sigma)

    for tt, yy in zip(t, y):
        ref = oracle(tt)
        assert abs(yy - ref) < 4 * np.sqrt(ref * (1 - ref) / 20_000) + 5e-3


# --- cphase calibration ----------------------------------------------------

PSI = np.linspace(0, 2 * np.pi, 20, endpoint=False)


@pytest.mark.parametrize("gate, expected", [("CZ", np.pi), ("CS_inv", -np.pi / 2)])
def test_cphase_calibration_targets(gate, expected):
    out = exact("cphase_calibration", PSI, options={"gate": gate})
    assert abs(np.angle(np.exp(1j * (out.summary["phase_difference"] - expected)))) < 0.01


def test_cphase_zero_pulse():
    out = exact("cphase_calibration", PSI, options={"gate": "custom", "phase": 0.0})
    assert abs(out.summary["phase_difference"]) < 1e-9


def test_cphase_sampled_close():
    out = run_experiment(ExperimentSpec("cphase_calibration", PSI, shots_per_point=20_000, master_seed=3))
    diff = out.summary["phase_difference"]
    assert abs(np.angle(np.exp(1j * (diff - np.pi)))) < 4 * out.summary["phase_difference_stderr"] + 1e-3


def test_cphase_flat_fringe_is_fit_error():
    spec = ExperimentSpec("cphase_calibration", PSI, readout=ReadoutModel(0.5, 0.5), shots_per_point=200)
    with pytest.raises(FitError):
        run_experiment(spec)


# --- swap and toffoli --------------------------------------------------------


def test_swap_demo_ideal():
    out = exact("swap_demo", THETA)
    assert np.allclose(out.curves["Q2"].y, np.sin(THETA / 2) ** 2, atol=1e-12)
    assert np.allclose(out.curves["Q3"].y, 0, atol=1e-12)


def test_swap_demo_reset_residual():
    out = exact("swap_demo", THETA, reset=ResetModel(0.1))
    assert np.allclose(out.curves["Q3"].y, 0.1 * np.sin(THETA / 2) ** 2, atol=1e-12)
    sampled = run_experiment(ExperimentSpec("swap_demo", THETA, reset=ResetModel(0.1), shots_per_point=10_000))
    y, err = sampled.curves["Q3"].y, np.sqrt(0.1 * np.sin(THETA / 2) ** 2 * 0.9 / 10_000)
    assert np.all(np.abs(y - 0.1 * np.sin(THETA / 2) ** 2) <= 4 * err + 1e-3)


@pytest.mark.parametrize("swept", [None, "Q3"])
def test_toffoli_truth(swept):
    out = exact("toffoli_test", THETA, options={"swept_control": swept})
    assert np.max(np.abs(out.curves["without_prep"].y)) < 1e-9
    assert np.max(np.abs(out.curves["with_prep"].y - np.sin(THETA / 2) ** 2)) < 1e-9


# --- codes -------------------------------------------------------------------


@pytest.mark.parametrize("echo", [False, True])
@pytest.mark.parametrize("inp", ["x", "down"])
def test_two_qubit_code_noiseless_constant(echo, inp):
    from phaseflip.experiments import two_qubit_code_circuit, up_probabilities

    t = np.linspace(0, 2e-6, 6)
    spec = ExperimentSpec("two_qubit_code", t, exact=True)
    circuits = [two_qubit_code_circuit(spec.device, tt, "Q4", "Q1", echo, inp) for tt in t]
    for p_up in up_probabilities(spec, circuits):
        assert np.allclose(p_up, 0, atol=1e-12)


def test_two_qubit_code_noiseless_sampling_is_seed_independent():
    t = np.linspace(0, 2e-6, 5)
    for seed in (0, 1):
        spec = ExperimentSpec("two_qubit_code", t, shots_per_point=100, master_seed=seed)
        with pytest.raises(FitError):
            run_experiment(spec)  # flat curve: tau is not identifiable


def test_two_qubit_code_data_errors_corrected():
    # dephasing only on the data qubit: the code removes it entirely
    noise = NoiseModel((NoiseParams(),) * 3 + (calibrate_noise(0.23e-6, 3.26e-6),))
    t = np.linspace(0, 1e-6, 5)
    spec = ExperimentSpec("two_qubit_code", t, noise=noise, shots_per_point=2000)
    from phaseflip.experiments import sample, two_qubit_code_circuit

    circuits = [two_qubit_code_circuit(spec.device, tt, "Q4", "Q1", False, "x") for tt in t]
    for up, _, _ in sample(spec, circuits):
        assert not up.any()


def code_oracle(phi, k):
    # k-qubit Z(phi): patterns never interfere (distinct syndromes), success iff <= 1 flip
    c2, s2 = np.cos(phi / 2) ** 2, np.sin(phi / 2) ** 2
    return sum(c2 ** (k - j) * s2**j * (1 if j == 0 else k if j == 1 else 0) for j in range(k + 1))


def test_three_qubit_phase_sweep_noiseless():
    subsets = ((), ("Q4",), ("Q1",), ("Q3",), ("Q4", "Q1"), ("Q1", "Q3"), ("Q4", "Q1", "Q3"))
    for inp in ("down", "x"):
        out = exact("three_qubit_phase_sweep", THETA, options={"subsets": subsets, "input": inp})
        for label, curve in out.curves.items():
            k = 0 if label == "none" else label.count("+") + 1
            assert np.allclose(curve.y, code_oracle(THETA, k), atol=1e-12), (inp, label)
    assert np.isclose(out.curves["Q1+Q3"].y[6], 0)  # phi = pi, double error


def test_three_qubit_x_echo_axis_equivalent():
    a = exact("three_qubit_phase_sweep", THETA, options={"subsets": (("Q1", "Q3"),), "echo_axis": "X"})
    b = exact("three_qubit_phase_sweep", THETA, options={"subsets": (("Q1", "Q3"),)})
    assert np.allclose(a.curves["Q1+Q3"].y, b.curves["Q1+Q3"].y)


def test_three_qubit_random_ideal_values():
    y = exact("three_qubit_random", P11).curves[""].y
    assert np.allclose(y, 1 - 3 * P11**2 + 2 * P11**3, atol=1e-12)


def test_three_qubit_random_sampled_point():
    out = run_experiment(ExperimentSpec("three_qubit_random", (0.0, 0.3, 0.5), shots_per_point=10_000, master_seed=9))
    c = out.curves[""]
    assert c.y[0] == 1
    for y, truth in zip(c.y[1:], (0.784, 0.5)):
        assert abs(y - truth) < 4 * np.sqrt(truth * (1 - truth) / 10_000)


def test_code_result_logs_consistent():
    out = run_experiment(ExperimentSpec("three_qubit_random", P11[::2], shots_per_point=3000, master_seed=5))
    res = out.result
    for log, y in zip(res.logs, res.curve.y):
        assert log.flips.shape == (3000, 3)
        assert np.isclose(log.success.mean(), y)
        # ideal readout: success iff at most one flip
        assert np.array_equal(log.success, log.flips.sum(axis=1) <= 1)


def test_seed_reproducibility_and_jobs_independence():
    spec = ExperimentSpec("three_qubit_random", (0.2, 0.6), shots_per_point=4500, master_seed=11,
                          readout=ReadoutModel(0.95, 0.85), reset=ResetModel(0.2))
    a = run_experiment(spec).result
    b = run_experiment(spec, jobs=3).result
    assert a.curve.to_csv() == b.curve.to_csv()
    for la, lb in zip(a.logs, b.logs):
        assert np.array_equal(la.flips, lb.flips)
        assert np.array_equal(la.reported_odd, lb.reported_odd)
        assert np.array_equal(la.success, lb.success)


def test_pipeline_matches_readout_reset_formula():
    # reported-down probability through a parity confusion and a retained-Q3 mixture
    fe, fo, r = 0.95, 0.85, 0.3
    y = exact("three_qubit_random", P11, readout=ReadoutModel(fe, fo), reset=ResetModel(r)).curves[""].y
    ideal = 1 - 3 * P11**2 + 2 * P11**3
    # retained Q3 holds the second syndrome bit: set iff Q4 and Q3 flips differ
    q = 1 - 2 * P11 + 3 * P11**2 - 2 * P11**3
    p_good = (1 - r) * ideal + r * q
    assert np.allclose(y, (1 - fo) + (fe + fo - 1) * p_good, atol=1e-12)


def _gamma0(readout=ReadoutModel.ideal(), reset=ResetModel(0.0), noise=None, exact_mode=True):
    spec = ExperimentSpec(
        "three_qubit_random", (0.0,), readout=readout, reset=reset, noise=noise,
        exact=exact_mode, shots_per_point=20_000, master_seed=1, options={"wait": 0.5e-6},
    )
    return run_experiment(spec).curves[""]


@pytest.mark.parametrize("grid", [[1.0, 0.97, 0.9, 0.8, 0.6]])
def test_monotone_degradation_readout(grid):
    for which in ("f_even", "f_odd"):
        vals = [
            _gamma0(ReadoutModel(**{"f_even": 1.0, "f_odd": 1.0, which: f}), ResetModel(0.2)).y[0] for f in grid
        ]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_monotone_degradation_reset():
    vals = [_gamma0(ReadoutModel(0.95, 0.85), ResetModel(r)).y[0] for r in (0, 0.1, 0.3, 0.6, 1.0)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_monotone_degradation_dephasing():
    for field_name, grid in (("sigma_qs", [0, 2e6, 5e6, 1e7]), ("gamma_m", [0, 2e5, 1e6, 4e6])):
        curves = []
        for v in grid:
            params = NoiseParams(**{field_name: v})
            curves.append(_gamma0(noise=NoiseModel((params,) * 4), exact_mode=False))
        for a, b in zip(curves, curves[1:]):
            assert b.y[0] <= a.y[0] + 4 * np.hypot(a.y_err[0], b.y_err[0]) + 1e-12


def test_projection_to_down():
    dev = DeviceModel()
    for axis in np.linspace(0, 2 * np.pi, 7):
        for angle in (0.3, np.pi / 2, 2.0, np.pi):
            circ = NativeCircuit(4, (rotation(1, angle, axis, dev),))
            v = bloch_vector(final_state(project_to_down(circ, 1, dev), dev), 1)
            assert np.allclose(v, [0, 0, 1], atol=1e-12)


def test_three_qubit_circuit_reads_q4_after_q3_reset():
    circ = three_qubit_code_circuit(DeviceModel(), ErrorInjection("bernoulli", (0, 2, 3), probability=0.1))
    names = [type(op).__name__ for op in circ.instructions[-2:]]
    assert names == ["ResetSwap", "PairMeasure"]


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec("rabi", ())
    with pytest.raises(ValueError):
        ExperimentSpec("rabi", (0.0,), shots_per_point=0)
    with pytest.raises(ValueError):
        ExperimentSpec("rabi", (0.0,), options={"echo": "none"})
    with pytest.raises(ValueError):
        ExperimentSpec("nope", (0.0,))


def test_exact_mode_requires_noiseless():
    with pytest.raises(ValueError):
        run_experiment(ExperimentSpec("ramsey", np.linspace(0, 1e-6, 6), noise=q1_noise(), exact=True))


def test_list_experiments_table():
    text = list_experiments()
    for kind in ("three_qubit_random", "two_qubit_code", "cphase_calibration"):
        assert kind in text
    assert text == list_experiments()


def test_two_qubit_code_summary_records_sequence():
    q = calibrate_noise(0.25e-6, 3e-6)
    noise = NoiseModel((q, NoiseParams(), NoiseParams(), q))
    spec = ExperimentSpec("two_qubit_code", np.linspace(0, 0.8e-6, 8), noise=noise, shots_per_point=1000)
    seq = run_experiment(spec).summary["sequence"]
    assert seq.startswith("PREPARE(Q4) CNOT(Q4,Q1)") and "Y2" not in seq
