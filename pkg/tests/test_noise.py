from __future__ import annotations

import json
import math

import numpy as np
import pytest

from oracles import (apply_kraus, average_gate_fidelity, depolarizing_kraus, embed, pauli_dense,
                     relaxation_kraus, sum_dense)
from protonpipe.circuit import Circuit, CouplingMap, Gate, transpile
from protonpipe.errors import ParseError, ResourceLimitError, ValidationError
from protonpipe.noise import (GateCalibration, NoiseModel, QubitCalibration, build_noise_model,
                              depolarizing_parameter, evolve_density, noisy_expectation, relaxation_factors,
                              synthetic_calibration)
from protonpipe.pauli import PauliSum
from protonpipe.sim import expectation, run


def calibration(n=3):
    qubits = [{"t1_us": 80 + 20 * q, "t2_us": 60 + 10 * q, "readout_p01": 0.01 * (q + 1),
               "readout_p10": 0.02 * (q + 1)} for q in range(n)]
    gates = [{"kind": "sx", "qubits": [q], "error": 1e-3 * (q + 1), "duration_ns": 40} for q in range(n)]
    gates += [{"kind": "cz", "qubits": [q, q + 1], "error": 0.01 + 0.005 * q, "duration_ns": 300}
              for q in range(n - 1)]
    return {"qubits": qubits, "gates": gates, "eplg18": 0.01, "timestamp": "t0"}


def kraus_oracle(c: Circuit, nm: NoiseModel) -> np.ndarray:
    n = c.n_qubits
    rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
    rho[0, 0] = 1
    for g in c.gates:
        u = embed(g.unitary(), g.qubits, n)
        rho = u @ rho @ u.conj().T
        error, duration = nm.gate_error(g)
        if error:
            p = depolarizing_parameter(error, duration, [nm.qubits[q] for q in g.qubits])
            rho = apply_kraus(rho, depolarizing_kraus(p, len(g.qubits)), g.qubits, n)
        if duration:
            for q in g.qubits:
                cal = nm.qubits[q]
                rho = apply_kraus(rho, relaxation_kraus(*relaxation_factors(duration, cal.t1, cal.t2)), [q], n)
    return rho


def test_density_evolution_matches_kraus_oracle(rng):
    nm = build_noise_model(calibration(3))
    gates = [Gate("SX", (0,)), Gate("CZ", (0, 1)), Gate("RY", (2,), 0.7), Gate("CZ", (1, 2)),
             Gate("X", (1,)), Gate("RZ", (0,), 0.3), Gate("H", (2,)), Gate("CZ", (0, 1))]
    c = Circuit(3, gates)
    rho = evolve_density(c, nm)
    assert np.allclose(rho, kraus_oracle(c, nm), atol=1e-12)
    assert abs(np.trace(rho) - 1) < 1e-12
    assert np.linalg.eigvalsh(rho).min() > -1e-12


@pytest.mark.parametrize("k,error,duration", [(1, 1e-3, 40e-9), (2, 0.0125, 300e-9), (2, 3.108e-3, 68e-9)])
def test_calibrated_channel_has_reported_average_infidelity(k, error, duration):
    qubits = [QubitCalibration(100e-6, 70e-6), QubitCalibration(150e-6, 200e-6)][:k]
    p = depolarizing_parameter(error, duration, qubits)
    d = 2 ** k
    dep = [embed(x, list(range(k)), k) for x in depolarizing_kraus(p, k)]
    rel = []
    for q, cal in enumerate(qubits):
        rel.append([embed(x, [q], k) for x in relaxation_kraus(*relaxation_factors(duration, cal.t1, cal.t2))])
    ops = dep
    for channel in rel:
        ops = [b @ a for a in ops for b in channel]
    assert 1 - average_gate_fidelity(ops, d) == pytest.approx(error, rel=1e-10)


def test_depolarizing_without_relaxation():
    # pure depolarizing: error = p (d^2 - 1) / d^2 * d / (d + 1)
    ideal = [QubitCalibration(), QubitCalibration()]
    p = depolarizing_parameter(3.108e-3, 68e-9, ideal)
    assert p == pytest.approx(3.108e-3 * 5 / 4 * 16 / 15, rel=1e-12)
    with pytest.warns(UserWarning, match="relaxation alone"):
        assert depolarizing_parameter(1e-6, 1e-6, [QubitCalibration(1e-6, 1e-6)]) == 0.0


def test_readout_confusion():
    nm = NoiseModel((QubitCalibration(readout_p01=0.05, readout_p10=0.1),))
    z = PauliSum.single("Z")
    assert noisy_expectation(Circuit(1), z, nm) == pytest.approx(0.9, abs=1e-12)
    flipped = Circuit(1, [Gate("X", (0,))])
    assert noisy_expectation(flipped, z, nm) == pytest.approx(-0.8, abs=1e-12)
    plus = Circuit(1, [Gate("H", (0,))])
    assert noisy_expectation(plus, PauliSum.single("X"), nm) == pytest.approx(0.9, abs=1e-12)


def test_ideal_model_reproduces_statevector_including_routing(rng):
    n = 4
    terms = [("".join(rng.choice(list("IXYZ"), n)), float(rng.normal())) for _ in range(10)]
    h = PauliSum(n, terms + [("IIII", 0.3)])
    gates = [Gate("RY", (q,), float(rng.uniform(-2, 2))) for q in range(n)]
    gates += [Gate("CX", (0, 3)), Gate("RX", (2,), 0.4), Gate("CX", (2, 1)), Gate("RZ", (3,), 1.0)]
    c = Circuit(n, gates)
    exact = expectation(run(c), h)
    assert noisy_expectation(c, h, NoiseModel.ideal(n)) == pytest.approx(exact, abs=1e-12)
    routed = transpile(c, CouplingMap.line(n))
    assert noisy_expectation(routed, h, NoiseModel.ideal(n)) == pytest.approx(exact, abs=1e-12)
    psi = run(c).amplitudes
    assert exact == pytest.approx((psi.conj() @ sum_dense(h.terms.items(), n) @ psi).real)


def test_shot_sampling_is_unbiased():
    nm = build_noise_model(calibration(2))
    c = Circuit(2, [Gate("SX", (0,)), Gate("CZ", (0, 1)), Gate("SX", (1,))])
    h = PauliSum(2, [("ZZ", 1.0), ("XI", 0.5), ("IY", -0.7)])
    exact = noisy_expectation(c, h, nm)
    samples = [noisy_expectation(c, h, nm, shots=2000, rng=s) for s in range(40)]
    sem = np.std(samples, ddof=1) / np.sqrt(len(samples))
    assert abs(np.mean(samples) - exact) < 5 * sem
    assert noisy_expectation(c, h, nm, shots=2000, rng=3) == noisy_expectation(c, h, nm, shots=2000, rng=3)


def test_fallbacks_and_missing_edges():
    cal = calibration(3)
    cal["gates"] = [g for g in cal["gates"] if g["qubits"] != [1, 2]]
    with pytest.warns(UserWarning, match=r"\(1, 2\)"):
        nm = build_noise_model(cal, CouplingMap.line(3))
    assert nm.missing == ((1, 2),)
    assert nm.gate_error(Gate("CZ", (2, 1))) == pytest.approx((0.01, 300e-9))
    assert nm.gate_error(Gate("RZ", (0,), 0.1)) == (0.0, 0.0)
    assert nm.gate_error(Gate("RX", (1,), 0.1)) == pytest.approx((2e-3, 40e-9))
    cal2 = calibration(2)
    cal2["gates"].append({"kind": "cx", "qubits": [0, 1], "error": None})
    with pytest.warns(UserWarning):
        assert build_noise_model(cal2).missing == ((0, 1),)


def test_validation_errors(tmp_path):
    cal = calibration(2)
    cal["qubits"][1]["t2_us"] = 500
    with pytest.raises(ValidationError, match="qubit 1"):
        build_noise_model(cal)
    cal = calibration(2)
    cal["qubits"][0]["readout_p01"] = 1.5
    with pytest.raises(ValidationError):
        build_noise_model(cal)
    (tmp_path / "bad.json").write_text("{\n  'x': }")
    with pytest.raises(ParseError):
        build_noise_model(tmp_path / "bad.json")
    with pytest.raises(ParseError):
        build_noise_model({"gates": []})
    with pytest.raises(ResourceLimitError):
        evolve_density(Circuit(11), NoiseModel.ideal(11))
    with pytest.raises(ValidationError):
        noisy_expectation(Circuit(1), PauliSum(1, [("X", 1j)]), NoiseModel.ideal(1))


def test_synthetic_calibration_roundtrip(tmp_path):
    cmap = CouplingMap.from_spec("heavyhex:2", 6)
    data = synthetic_calibration(cmap)
    path = tmp_path / "cal.json"
    path.write_text(json.dumps(data))
    nm = build_noise_model(path, cmap)
    assert nm.missing == () and nm.eplg == pytest.approx(3.108e-3)
    again = build_noise_model(nm.to_json(), cmap)
    for a, b in zip(again.qubits, nm.qubits):
        assert a.t1 == pytest.approx(b.t1) and a.t2 == pytest.approx(b.t2)
    assert math.isinf(NoiseModel.ideal(1).qubits[0].t1)
    assert np.allclose(pauli_dense("Z"), np.diag([1, -1]))
